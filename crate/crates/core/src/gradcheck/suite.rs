//! The registered finite-difference suite: every differentiable op, the
//! composite blocks and a tiny end-to-end network.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{finite_diff_check, FdOptions, FdReport};
use crate::error::{Error, Result};
use crate::loss::LossConfig;
use crate::tensor::{Array, Bound, Graph, Init, ParamStore, Var};
use crate::unet::{build_network, DecoderStage, EncoderStage, NetworkConfig, ResidualBlock, Task, Variant};
use crate::vil::{Direction, MLstmCell, VilBlock, VilSettings, XlstmBlock};

pub const MODULES: [&str; 4] = ["tensor-core", "vil-xlstm", "optim-loss", "unet-arch"];

const KERNEL_TOL: f64 = 1e-5;
const COMPOSITE_TOL: f64 = 1e-4;

type Check = Box<dyn Fn(&FdOptions) -> Result<FdReport> + Send + Sync>;

struct Case {
    module: &'static str,
    name: String,
    tol: f64,
    sample: Option<usize>,
    check: Check,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteRow {
    pub module: &'static str,
    pub name: String,
    pub tol: f64,
    pub report: FdReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.report.passed)
    }

    pub fn failures(&self) -> Vec<&SuiteRow> {
        self.rows.iter().filter(|r| !r.report.passed).collect()
    }

    pub fn worst_rel_err(&self) -> f64 {
        self.rows.iter().map(|r| r.report.max_rel_err).fold(0.0, f64::max)
    }
}

fn random(shape: &[usize], seed: u64, scale: f64) -> Array<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array::from_fn(shape, |_| rng.random_range(-scale..scale))
}

/// `Σ w ⊙ y` with fixed random weights so each output element counts.
fn weighted_sum(g: &Graph<f64>, y: Var, w: &Array<f64>) -> Result<Var> {
    let wv = g.constant(w.clone());
    let p = g.mul(y, wv)?;
    g.sum(p)
}

type OpFn = fn(&Graph<f64>, &[Var]) -> Result<Var>;

struct Registry {
    seed: u64,
    cases: Vec<Case>,
}

impl Registry {
    fn next_seed(&mut self) -> u64 {
        self.seed = self.seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.seed
    }

    fn push(&mut self, module: &'static str, name: &str, tol: f64, sample: Option<usize>, check: Check) {
        self.cases.push(Case {
            module,
            name: name.to_string(),
            tol,
            sample,
            check,
        });
    }

    /// A single op on random inputs. Inputs listed in `positive` are shifted
    /// to `[0.5, 1.5)`.
    fn op(&mut self, module: &'static str, name: &str, tol: f64, shapes: &[&[usize]], positive: &[usize], f: OpFn) {
        let inputs: Vec<Array<f64>> = shapes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let a = random(s, self.next_seed(), 1.0);
                if positive.contains(&i) {
                    a.map(|v| v.abs() + 0.5)
                } else {
                    a
                }
            })
            .collect();
        let wseed = self.next_seed();
        self.push(
            module,
            name,
            tol,
            None,
            Box::new(move |opts| {
                finite_diff_check(
                    |g, v| {
                        let y = f(g, v)?;
                        let w = random(&g.shape(y), wseed, 1.0);
                        weighted_sum(g, y, &w)
                    },
                    &inputs,
                    opts,
                )
            }),
        );
    }

    /// A parameterized block: every parameter and the input are perturbed.
    fn block<F>(&mut self, module: &'static str, name: &str, store: ParamStore<f64>, input: &[usize], sample: Option<usize>, f: F)
    where
        F: Fn(&Bound<'_, f64>, Var) -> Result<Var> + Send + Sync + 'static,
    {
        let (names, mut inputs): (Vec<String>, Vec<Array<f64>>) =
            store.iter().map(|(k, v)| (k.to_string(), v.clone())).unzip();
        inputs.push(random(input, self.next_seed(), 1.0));
        let wseed = self.next_seed();
        let n = names.len();
        self.push(
            module,
            name,
            COMPOSITE_TOL,
            sample,
            Box::new(move |opts| {
                finite_diff_check(
                    |g, v| {
                        let p = Bound::from_vars(g, names.iter().cloned().zip(v[..n].iter().copied()));
                        let y = f(&p, v[n])?;
                        let w = random(&g.shape(y), wseed, 1.0);
                        weighted_sum(g, y, &w)
                    },
                    &inputs,
                    opts,
                )
            }),
        );
    }

    fn init(&mut self) -> Init {
        Init::new(ChaCha8Rng::seed_from_u64(self.next_seed()))
    }
}

fn tensor_core(r: &mut Registry) {
    let m = "tensor-core";
    let t = KERNEL_TOL;
    r.op(m, "add", t, &[&[3, 4], &[3, 4]], &[], |g, v| g.add(v[0], v[1]));
    r.op(m, "add_broadcast", t, &[&[3, 4], &[1]], &[], |g, v| g.add(v[0], v[1]));
    r.op(m, "sub", t, &[&[5], &[5]], &[], |g, v| g.sub(v[0], v[1]));
    r.op(m, "mul", t, &[&[2, 3], &[2, 3]], &[], |g, v| g.mul(v[0], v[1]));
    r.op(m, "mul_broadcast", t, &[&[1], &[2, 3]], &[], |g, v| g.mul(v[0], v[1]));
    r.op(m, "sigmoid", t, &[&[7]], &[], |g, v| g.sigmoid(v[0]));
    r.op(m, "silu", t, &[&[7]], &[], |g, v| g.silu(v[0]));
    r.op(m, "exp", t, &[&[7]], &[], |g, v| g.exp(v[0]));
    r.op(m, "relu", t, &[&[7]], &[], |g, v| g.relu(v[0]));
    r.op(m, "leaky_relu", t, &[&[7]], &[], |g, v| g.leaky_relu(v[0], 0.01));
    r.op(m, "max_scalar", t, &[&[7]], &[0], |g, v| g.max_scalar(v[0], 1.0));
    r.op(m, "scale", t, &[&[4]], &[], |g, v| g.scale(v[0], -1.7));
    r.op(m, "add_scalar", t, &[&[4]], &[], |g, v| g.add_scalar(v[0], 0.3));
    r.op(m, "sum", t, &[&[2, 3]], &[], |g, v| g.sum(v[0]));
    r.op(m, "mean", t, &[&[2, 3]], &[], |g, v| g.mean(v[0]));
    r.op(m, "matmul", t, &[&[3, 4], &[4, 2]], &[], |g, v| g.matmul(v[0], v[1]));
    r.op(m, "linear", t, &[&[2, 3, 4], &[4, 5], &[5]], &[], |g, v| g.linear(v[0], v[1], Some(v[2])));
    r.op(m, "mul_last", t, &[&[2, 3, 4], &[4]], &[], |g, v| g.mul_last(v[0], v[1]));
    r.op(m, "reshape", t, &[&[2, 6]], &[], |g, v| g.reshape(v[0], &[3, 4]));
    r.op(m, "permute", t, &[&[2, 3, 4]], &[], |g, v| g.permute(v[0], &[2, 0, 1]));
    r.op(m, "reshape_permute", t, &[&[2, 4, 3]], &[], |g, v| g.reshape_permute(v[0], &[3, 8], &[2, 0, 1]));
    r.op(m, "flip", t, &[&[2, 4, 3]], &[], |g, v| g.flip(v[0], 1));
    r.op(m, "slice_last", t, &[&[2, 4]], &[], |g, v| g.slice_last(v[0], 1, 2));
    r.op(m, "concat", t, &[&[2, 3, 2], &[2, 1, 2]], &[], |g, v| g.concat(&[v[0], v[1]], 1));
    r.op(m, "conv_nd_1d", t, &[&[2, 2, 7], &[3, 2, 3], &[3]], &[], |g, v| {
        g.conv_nd(v[0], v[1], v[2], &[2], &[1])
    });
    r.op(m, "conv_nd_2d", t, &[&[2, 2, 5, 6], &[3, 2, 3, 2], &[3]], &[], |g, v| {
        g.conv_nd(v[0], v[1], v[2], &[1, 2], &[1, 0])
    });
    r.op(m, "conv_nd_3d", t, &[&[1, 2, 4, 3, 3], &[2, 2, 3, 3, 2], &[2]], &[], |g, v| {
        g.conv_nd(v[0], v[1], v[2], &[2, 1, 1], &[1, 1, 0])
    });
    r.op(m, "conv_transpose_2d", t, &[&[2, 3, 3, 2], &[3, 2, 2, 2], &[2]], &[], |g, v| {
        g.conv_transpose_nd(v[0], v[1], v[2], &[2, 2], &[0, 0])
    });
    r.op(m, "conv_transpose_3d", t, &[&[1, 2, 3, 2, 2], &[2, 2, 3, 2, 2], &[2]], &[], |g, v| {
        g.conv_transpose_nd(v[0], v[1], v[2], &[2, 2, 1], &[1, 0, 0])
    });
    r.op(m, "instance_norm", t, &[&[2, 3, 4, 3], &[3], &[3]], &[], |g, v| {
        g.instance_norm(v[0], v[1], v[2], 1e-5)
    });
    r.op(m, "layer_norm", t, &[&[2, 3, 5], &[5], &[5]], &[], |g, v| g.layer_norm(v[0], v[1], v[2], 1e-5));
    r.op(m, "softmax", t, &[&[2, 4, 3]], &[], |g, v| g.softmax(v[0], 1));
    r.op(m, "causal_conv1d", t, &[&[2, 6, 3], &[3, 4], &[3]], &[], |g, v| g.causal_conv1d(v[0], v[1], v[2]));
}

fn vil_xlstm(r: &mut Registry) {
    let m = "vil-xlstm";
    let (b, l, e) = (2, 6, 4);
    r.op(m, "mlstm_scan_forward", KERNEL_TOL, &[&[b, l, e], &[b, l, e], &[b, l, e], &[b, l, 2], &[b, l, 2]], &[], |g, v| {
        g.mlstm_scan(v[0], v[1], v[2], v[3], v[4], 2, Direction::Forward)
    });
    r.op(m, "mlstm_scan_reverse", KERNEL_TOL, &[&[b, l, e], &[b, l, e], &[b, l, e], &[b, l, 2], &[b, l, 2]], &[], |g, v| {
        g.mlstm_scan(v[0], v[1], v[2], v[3], v[4], 2, Direction::Reverse)
    });

    let cell = MLstmCell::new("cell", 4, 2).expect("valid cell");
    let mut store = ParamStore::new();
    let mut init = r.init();
    cell.init(&mut store, &mut init).expect("fresh store");
    r.block(m, "mlstm_cell", store, &[2, 5, 4], None, move |p, x| cell.forward(p, x, Direction::Forward));

    let settings = VilSettings {
        heads: 2,
        ..VilSettings::default()
    };
    let vil = VilBlock::new("vil", 4, settings, Direction::Reverse).expect("valid block");
    let mut store = ParamStore::new();
    let mut init = r.init();
    vil.init(&mut store, &mut init).expect("fresh store");
    r.block(m, "vil_block", store, &[2, 5, 4], None, move |p, x| vil.forward(p, x));

    let xl = XlstmBlock::new("x", 4, settings).expect("valid block");
    let mut store = ParamStore::new();
    let mut init = r.init();
    xl.init(&mut store, &mut init).expect("fresh store");
    r.block(m, "xlstm_block", store, &[1, 4, 3, 3], Some(60), move |p, x| xl.forward(p, x));
}

fn optim_loss(r: &mut Registry) {
    let m = "optim-loss";
    for (name, background, weights) in [
        ("dice_ce_loss", false, None),
        ("dice_ce_loss_background", true, None),
        ("dice_ce_loss_weighted", false, Some(vec![0.5, 2.0, 1.0])),
    ] {
        let logits = random(&[2, 3, 4, 3], r.next_seed(), 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(r.next_seed());
        let target = Array::from_fn(&[2, 4, 3], |_| rng.random_range(0..3i32));
        let cfg = LossConfig {
            dice_include_background: background,
            class_weights: weights,
            ..LossConfig::default()
        };
        r.push(
            m,
            name,
            KERNEL_TOL,
            None,
            Box::new(move |opts| {
                finite_diff_check(
                    |g, v| {
                        let p = g.softmax(v[0], 1)?;
                        g.dice_ce_loss(p, &target, &cfg)
                    },
                    std::slice::from_ref(&logits),
                    opts,
                )
            }),
        );
    }
}

/// The tiny end-to-end network: 2 stages, base 4, 16×16 patches, two
/// classes, xLSTM in every encoder stage.
pub fn tiny_network_config(seed: u64) -> NetworkConfig {
    NetworkConfig {
        task: Task::TwoD,
        in_channels: 1,
        num_classes: 2,
        num_stages: 2,
        base_channels: 4,
        channel_cap: 16,
        variant: Variant::Enc,
        patch_size: vec![16, 16],
        heads: 2,
        expansion: 2,
        seed,
    }
}

fn unet_arch(r: &mut Registry) {
    let m = "unet-arch";
    let res = ResidualBlock::new("res", 2, 2, 3, 2);
    let mut store = ParamStore::new();
    let mut init = r.init();
    res.init(&mut store, &mut init).expect("fresh store");
    r.block(m, "residual_block", store, &[2, 2, 6, 6], None, move |p, x| res.forward(p, x));

    let enc = EncoderStage::new("enc", 2, 2, 4, 2, Some(VilSettings { heads: 2, ..VilSettings::default() }))
        .expect("valid stage");
    let mut store = ParamStore::new();
    let mut init = r.init();
    enc.init(&mut store, &mut init).expect("fresh store");
    r.block(m, "encoder_stage", store, &[1, 2, 6, 6], Some(60), move |p, x| Ok(enc.forward(p, x)?.0));

    let dec = DecoderStage::new("dec", 2, 4, 2, 2, 2);
    let mut store = ParamStore::new();
    let mut init = r.init();
    dec.init(&mut store, &mut init).expect("fresh store");
    let skip = random(&[1, 2, 6, 6], r.next_seed(), 1.0);
    r.block(m, "decoder_stage", store, &[1, 4, 3, 3], Some(60), move |p, x| {
        let s = p.graph().constant(skip.clone());
        dec.forward(p, x, s)
    });

    let cfg = tiny_network_config(r.next_seed() % 1000);
    let net = build_network(&cfg).expect("tiny config is valid").cast::<f64>();
    let (names, mut inputs): (Vec<String>, Vec<Array<f64>>) =
        net.params.iter().map(|(k, v)| (k.to_string(), v.clone())).unzip();
    inputs.push(random(&[2, 1, 16, 16], r.next_seed(), 1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(r.next_seed());
    let target = Array::from_fn(&[2, 16, 16], |_| rng.random_range(0..2i32));
    let n = names.len();
    r.push(
        m,
        "end_to_end",
        COMPOSITE_TOL,
        Some(40),
        Box::new(move |opts| {
            finite_diff_check(
                |g, v| {
                    let p = Bound::from_vars(g, names.iter().cloned().zip(v[..n].iter().copied()));
                    let probs = net.arch.forward(&p, v[n])?;
                    g.dice_ce_loss(probs, &target, &LossConfig::default())
                },
                &inputs,
                opts,
            )
        }),
    );
}

/// Runs every registered check, or only those of `module`. `fault` scales
/// all backward contributions, which must make the suite fail.
pub fn run_suite(module: Option<&str>, seed: u64, fault: Option<f64>) -> Result<SuiteReport> {
    if let Some(name) = module {
        if !MODULES.contains(&name) {
            return Err(Error::InvalidArgument(format!(
                "unknown module `{name}`; expected one of {}",
                MODULES.join(", ")
            )));
        }
    }
    let mut r = Registry {
        seed,
        cases: Vec::new(),
    };
    tensor_core(&mut r);
    vil_xlstm(&mut r);
    optim_loss(&mut r);
    unet_arch(&mut r);
    let cases: Vec<Case> = r
        .cases
        .into_iter()
        .filter(|c| module.is_none_or(|m| c.module == m))
        .collect();
    let rows = cases
        .par_iter()
        .map(|c| {
            let opts = FdOptions {
                tol_rel: c.tol,
                sample: c.sample,
                seed,
                fault,
                ..FdOptions::default()
            };
            let report = (c.check)(&opts).map_err(|e| match e {
                Error::InvalidArgument(msg) => Error::InvalidArgument(format!("{}: {msg}", c.name)),
                other => other,
            })?;
            Ok(SuiteRow {
                module: c.module,
                name: c.name.clone(),
                tol: c.tol,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport { rows })
}

/// One line per check: module, name, elements checked, worst relative
/// error, tolerance and verdict.
pub fn format_table(report: &SuiteReport) -> String {
    let mut out = format!(
        "{:<12} {:<26} {:>7} {:>12} {:>8}  result\n",
        "module", "op", "checked", "max_rel_err", "tol"
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{:<12} {:<26} {:>7} {:>12.3e} {:>8.0e}  {}",
            r.module,
            r.name,
            r.report.checked,
            r.report.max_rel_err,
            r.tol,
            if r.report.passed { "ok" } else { "FAIL" }
        );
    }
    out
}
