//! Soft Dice + cross-entropy loss on class probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{numel, Array, Backward, Float, Graph, Var};

/// Probabilities below this are clamped inside the log.
pub const CE_CLAMP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub dice_eps: f64,
    pub dice_include_background: bool,
    pub class_weights: Option<Vec<f64>>,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            dice_eps: 1e-5,
            dice_include_background: false,
            class_weights: None,
        }
    }
}

impl LossConfig {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if !(self.dice_eps > 0.0 && self.dice_eps.is_finite()) {
            return Err(Error::Config {
                field: "dice_eps".into(),
                msg: format!("must be positive, got {}", self.dice_eps),
            });
        }
        if let Some(w) = &self.class_weights {
            if w.len() != num_classes || w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Config {
                    field: "class_weights".into(),
                    msg: format!("need {num_classes} non-negative weights with a positive sum, got {w:?}"),
                });
            }
        }
        if !self.dice_include_background && num_classes < 2 {
            return Err(Error::Config {
                field: "dice_include_background".into(),
                msg: "no foreground class to score".into(),
            });
        }
        Ok(())
    }
}

/// The two terms of the compound loss, for logging.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParts {
    pub dice: f64,
    pub ce: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.dice + self.ce
    }
}

struct DiceCe {
    labels: Vec<usize>,
    classes: usize,
    voxels: usize,
    dice_classes: Vec<usize>,
    weights: Vec<f64>,
    weight_total: f64,
    eps: f64,
    inter: Vec<f64>,
    denom: Vec<f64>,
}

fn check_inputs<T: Float>(probs: &Array<T>, target: &Array<i32>) -> Result<(usize, usize, Vec<usize>)> {
    let ps = probs.shape();
    let mut expect = vec![ps[0]];
    expect.extend_from_slice(ps.get(2..).unwrap_or(&[]));
    if ps.len() < 3 || target.shape() != expect {
        return Err(Error::shape(
            "dice_ce_loss",
            format!("probs {ps:?} and target {:?} disagree", target.shape()),
        ));
    }
    let (k, v) = (ps[1], numel(&ps[2..]));
    let mut labels = Vec::with_capacity(target.len());
    for &t in target.data() {
        if t < 0 || t as usize >= k {
            return Err(Error::InvalidArgument(format!("label {t} outside [0, {k})")));
        }
        labels.push(t as usize);
    }
    for b in 0..ps[0] {
        for i in 0..v {
            let s: f64 = (0..k).map(|c| probs.data()[(b * k + c) * v + i].to_f()).sum();
            if (s - 1.0).abs() > 1e-4 {
                return Err(Error::InvalidArgument(format!(
                    "probabilities at batch {b}, voxel {i} sum to {s}"
                )));
            }
        }
    }
    Ok((k, v, labels))
}

/// Dice and CE terms without building a graph.
pub fn dice_ce_parts<T: Float>(probs: &Array<T>, target: &Array<i32>, cfg: &LossConfig) -> Result<LossParts> {
    let (k, v, labels) = check_inputs(probs, target)?;
    cfg.validate(k)?;
    let op = DiceCe::new(probs, labels, k, v, cfg);
    Ok(op.parts(probs))
}

impl DiceCe {
    fn new<T: Float>(probs: &Array<T>, labels: Vec<usize>, k: usize, v: usize, cfg: &LossConfig) -> Self {
        let batch = probs.shape()[0];
        let mut inter = vec![0.0; k];
        let mut psum = vec![0.0; k];
        let mut gsum = vec![0.0; k];
        for b in 0..batch {
            for c in 0..k {
                let row = &probs.data()[(b * k + c) * v..(b * k + c + 1) * v];
                for (i, &p) in row.iter().enumerate() {
                    let p = p.to_f();
                    psum[c] += p;
                    if labels[b * v + i] == c {
                        inter[c] += p;
                        gsum[c] += 1.0;
                    }
                }
            }
        }
        let weights = cfg.class_weights.clone().unwrap_or_else(|| vec![1.0; k]);
        let weight_total = labels.iter().map(|&t| weights[t]).sum();
        let first = if cfg.dice_include_background { 0 } else { 1 };
        Self {
            labels,
            classes: k,
            voxels: v,
            dice_classes: (first..k).collect(),
            weights,
            weight_total,
            eps: cfg.dice_eps,
            denom: (0..k).map(|c| psum[c] + gsum[c] + cfg.dice_eps).collect(),
            inter,
        }
    }

    fn parts<T: Float>(&self, probs: &Array<T>) -> LossParts {
        let n = self.dice_classes.len() as f64;
        let mean_dice: f64 = self
            .dice_classes
            .iter()
            .map(|&c| (2.0 * self.inter[c] + self.eps) / self.denom[c])
            .sum::<f64>()
            / n;
        let mut ce = 0.0;
        if self.weight_total > 0.0 {
            for (j, &t) in self.labels.iter().enumerate() {
                let (b, i) = (j / self.voxels, j % self.voxels);
                let p = probs.data()[(b * self.classes + t) * self.voxels + i].to_f();
                ce -= self.weights[t] * p.max(CE_CLAMP).ln();
            }
            ce /= self.weight_total;
        }
        LossParts {
            dice: 1.0 - mean_dice,
            ce,
        }
    }
}

impl<T: Float> Backward<T> for DiceCe {
    fn name(&self) -> &'static str {
        "dice_ce_loss"
    }

    fn backward(&self, inputs: &[&Array<T>], _: &Array<T>, grad: &Array<T>) -> Vec<Option<Array<T>>> {
        let probs = inputs[0];
        let (k, v) = (self.classes, self.voxels);
        let up = grad.data()[0].to_f();
        let n = self.dice_classes.len() as f64;
        let mut in_dice = vec![false; k];
        for &c in &self.dice_classes {
            in_dice[c] = true;
        }
        // d(1 - mean Dice)/dp = -(1/n)(2g/den - (2I+eps)/den²)
        let base: Vec<f64> = (0..k)
            .map(|c| (2.0 * self.inter[c] + self.eps) / (self.denom[c] * self.denom[c]) / n)
            .collect();
        let hit: Vec<f64> = (0..k).map(|c| -2.0 / self.denom[c] / n).collect();
        let mut g = Array::zeros(probs.shape());
        for (idx, out) in g.data_mut().iter_mut().enumerate() {
            let i = idx % v;
            let c = (idx / v) % k;
            let b = idx / (v * k);
            let t = self.labels[b * v + i];
            let mut d = 0.0;
            if in_dice[c] {
                d += base[c];
                if t == c {
                    d += hit[c];
                }
            }
            if t == c && self.weight_total > 0.0 {
                let p = probs.data()[idx].to_f();
                if p > CE_CLAMP {
                    d -= self.weights[t] / (self.weight_total * p);
                }
            }
            *out = T::from_f(d * up);
        }
        vec![Some(g)]
    }
}

impl<T: Float> Graph<T> {
    /// `(1 - mean_k softDice_k) + CE` with Dice sums taken over the whole
    /// batch. `target` holds integer labels shaped `[B, *spatial]`.
    pub fn dice_ce_loss(&self, probs: Var, target: &Array<i32>, cfg: &LossConfig) -> Result<Var> {
        self.record(&[probs], |v| {
            let p = v[0];
            let (k, vox, labels) = check_inputs(p, target)?;
            cfg.validate(k)?;
            let op = DiceCe::new(p, labels, k, vox, cfg);
            let total = op.parts(p).total();
            Ok((Array::scalar(T::from_f(total)), op))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_is_near_zero() {
        let target = Array::new(&[1, 4], vec![0, 1, 2, 1]).unwrap();
        let probs = Array::from_fn(&[1, 3, 4], |i| {
            let (c, j) = (i / 4, i % 4);
            if target.data()[j] as usize == c {
                1.0
            } else {
                0.0
            }
        });
        let parts = dice_ce_parts::<f64>(&probs, &target, &LossConfig::default()).unwrap();
        assert!(parts.total().abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        let target = Array::new(&[1, 2], vec![0, 2]).unwrap();
        let probs = Array::full(&[1, 2, 2], 0.5f64);
        assert!(dice_ce_parts(&probs, &target, &LossConfig::default()).is_err());
        let target = Array::new(&[1, 2], vec![0, 1]).unwrap();
        let probs = Array::full(&[1, 2, 2], 0.6f64);
        assert!(dice_ce_parts(&probs, &target, &LossConfig::default()).is_err());
        let cfg = LossConfig {
            dice_eps: 0.0,
            ..LossConfig::default()
        };
        assert!(dice_ce_parts(&Array::full(&[1, 2, 2], 0.5f64), &target, &cfg).is_err());
    }
}
