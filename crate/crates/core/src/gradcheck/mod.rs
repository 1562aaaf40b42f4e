//! Central finite-difference verification of autodiff gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Array, Graph, Var};

mod suite;

pub use suite::{format_table, run_suite, tiny_network_config, SuiteReport, SuiteRow, MODULES};

#[derive(Clone, Debug)]
pub struct FdOptions {
    pub h: f64,
    pub tol_rel: f64,
    pub tol_abs: f64,
    /// Check only this many randomly chosen elements (across all inputs).
    pub sample: Option<usize>,
    pub seed: u64,
    /// Scale all backward contributions by this factor (negative control).
    pub fault: Option<f64>,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            h: 1e-5,
            tol_rel: 1e-5,
            tol_abs: 1e-8,
            sample: None,
            seed: 0,
            fault: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdReport {
    pub checked: usize,
    pub passed: bool,
    /// `(input, flat index)` of the worst element.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    /// `|analytic - numeric| / (|numeric| + tol_abs / tol_rel)`; the element
    /// passes iff this is at most `tol_rel`.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
}

fn eval_scalar<F>(f: &F, inputs: &[Array<f64>]) -> Result<f64>
where
    F: Fn(&Graph<f64>, &[Var]) -> Result<Var>,
{
    let g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|a| g.constant(a.clone())).collect();
    let out = f(&g, &vars)?;
    let v = g.value(out);
    if v.len() != 1 {
        return Err(Error::NonScalarLoss(v.shape().to_vec()));
    }
    Ok(v.data()[0])
}

/// Compares autodiff gradients of the scalar function `f` at `inputs`
/// against central differences `(f(x+h·e) − f(x−h·e)) / 2h`.
pub fn finite_diff_check<F>(f: F, inputs: &[Array<f64>], opts: &FdOptions) -> Result<FdReport>
where
    F: Fn(&Graph<f64>, &[Var]) -> Result<Var>,
{
    let g = Graph::new();
    if let Some(factor) = opts.fault {
        g.inject_gradient_fault(factor);
    }
    let vars: Vec<Var> = inputs.iter().map(|a| g.param(a.clone())).collect();
    let loss = f(&g, &vars)?;
    let grads = g.backward(loss)?;
    let analytic: Vec<Array<f64>> = vars
        .iter()
        .map(|&v| grads.wrt(v).cloned().expect("leaf gradient"))
        .collect();

    let total: usize = inputs.iter().map(Array::len).sum();
    let mut flat: Vec<usize> = match opts.sample {
        Some(n) if n < total => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            sample(&mut rng, total, n).into_vec()
        }
        _ => (0..total).collect(),
    };
    flat.sort_unstable();

    let locate = |mut i: usize| {
        for (k, a) in inputs.iter().enumerate() {
            if i < a.len() {
                return (k, i);
            }
            i -= a.len();
        }
        unreachable!("flat index in range")
    };

    let floor = opts.tol_abs / opts.tol_rel;
    let mut report = FdReport {
        checked: 0,
        passed: true,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        max_rel_err: 0.0,
        max_abs_err: 0.0,
    };
    let mut work: Vec<Array<f64>> = inputs.to_vec();
    for i in flat {
        let (k, j) = locate(i);
        let orig = work[k].data()[j];
        work[k].data_mut()[j] = orig + opts.h;
        let plus = eval_scalar(&f, &work)?;
        work[k].data_mut()[j] = orig - opts.h;
        let minus = eval_scalar(&f, &work)?;
        work[k].data_mut()[j] = orig;
        let numeric = (plus - minus) / (2.0 * opts.h);
        let an = analytic[k].data()[j];
        let abs = (an - numeric).abs();
        let rel = abs / (numeric.abs() + floor);
        report.checked += 1;
        report.max_abs_err = report.max_abs_err.max(abs);
        if !(abs <= opts.tol_abs + opts.tol_rel * numeric.abs()) {
            report.passed = false;
        }
        if rel > report.max_rel_err || rel.is_nan() {
            report.max_rel_err = rel;
            report.worst = (k, j);
            report.analytic = an;
            report.numeric = numeric;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random(shape: &[usize], seed: u64) -> Array<f64> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn quadratic_passes_tightly() {
        let x = random(&[4, 3], 1);
        let opts = FdOptions {
            tol_rel: 1e-6,
            ..FdOptions::default()
        };
        let r = finite_diff_check(
            |g, v| {
                let sq = g.mul(v[0], v[0])?;
                g.sum(sq)
            },
            &[x],
            &opts,
        )
        .unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.checked, 12);
    }

    #[test]
    fn softmax_cross_entropy_passes() {
        let logits = random(&[2, 5], 2);
        let target = Array::from_fn(&[2, 5], |i| if i % 5 == 2 { 1.0 } else { 0.0 });
        let r = finite_diff_check(
            move |g, v| {
                let p = g.softmax(v[0], 1)?;
                // −Σ t·log p, with log via the identity log p = x − logsumexp
                let t = g.constant(target.clone());
                let sel = g.mul(p, t)?;
                let s = g.sum(sel)?;
                let neg = g.scale(s, -1.0)?;
                g.exp(neg)
            },
            &[logits],
            &FdOptions::default(),
        )
        .unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn corrupted_backward_fails() {
        let x = random(&[5], 3);
        let opts = FdOptions {
            fault: Some(1.5),
            ..FdOptions::default()
        };
        let r = finite_diff_check(|g, v| {
            let s = g.sigmoid(v[0])?;
            g.sum(s)
        }, &[x], &opts)
        .unwrap();
        assert!(!r.passed);
    }

    #[test]
    fn sampling_checks_requested_count() {
        let x = random(&[10, 10], 4);
        let opts = FdOptions {
            sample: Some(20),
            ..FdOptions::default()
        };
        let r = finite_diff_check(|g, v| {
            let s = g.silu(v[0])?;
            g.sum(s)
        }, &[x], &opts)
        .unwrap();
        assert_eq!(r.checked, 20);
        assert!(r.passed);
    }
}
