use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use xlstm_unet::eval::{evaluate_dirs, write_reports};
use xlstm_unet::gradcheck::{format_table, run_suite};
use xlstm_unet::io::{gen_synthetic_dataset, SyntheticSpec};
use xlstm_unet::metrics::parse_metrics;
use xlstm_unet::predict::predict_file;
use xlstm_unet::train::{train_run, RunConfig, TrainOptions};
use xlstm_unet::Error;

#[derive(Parser)]
#[command(name = "xlstm-unet", version, about = "UNet + ViL segmentation: data, training, inference, evaluation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic phantom dataset.
    GenData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dims: usize,
        #[arg(long)]
        cases: usize,
        #[arg(long)]
        classes: usize,
        /// Spatial extents, e.g. 64,64 or 32,64,64.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        size: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train on a dataset directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output directory; falls back to `out_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Checkpoint directory to continue from.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Segment one image and write the int32 label map.
    Predict {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Sliding window at half-patch stride for images of any size.
        #[arg(long)]
        tile: bool,
    },
    /// Score predicted label maps against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value = "dsc,nsd,hd95,f1")]
        metrics: String,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        /// JSON-lines report; the CSV summary is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of every differentiable op.
    Gradcheck {
        /// tensor-core, vil-xlstm, optim-loss or unet-arch.
        #[arg(long)]
        module: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scale every backward contribution by 1.5 (the suite must fail).
        #[arg(long)]
        corrupt_gradients: bool,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::InvalidArgument(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn run(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::GenData {
            out,
            dims,
            cases,
            classes,
            size,
            seed,
        } => {
            if size.len() != dims {
                return Err(Failure::Usage(format!("--size has {} axes but --dims is {dims}", size.len())));
            }
            let spec = SyntheticSpec {
                cases,
                classes,
                size,
                seed,
            };
            spec.validate()?;
            let meta = gen_synthetic_dataset(&out, &spec)?;
            println!(
                "wrote {} cases ({}D, {} classes, size {:?}, seed {}) to {}",
                meta.cases.len(),
                meta.dims,
                meta.classes,
                spec.size,
                meta.seed,
                out.display()
            );
        }
        Cmd::Train {
            config,
            data,
            out,
            resume,
        } => {
            let config = RunConfig::from_file(&config)?;
            config.validate()?;
            let out = out
                .or_else(|| config.out_dir.clone())
                .ok_or_else(|| Failure::Usage("no output directory: pass --out or set out_dir".into()))?;
            let opts = TrainOptions {
                resume,
                max_epochs: None,
            };
            let outcome = train_run(config, data, &out, &opts, |s| {
                println!(
                    "epoch {:>4}  lr {:.3e}  loss {:.5}{}",
                    s.epoch,
                    s.lr,
                    s.mean_loss,
                    if s.improved { "  *" } else { "" }
                );
            })?;
            println!(
                "done: {} epochs, {} steps, checkpoint {}",
                outcome.epochs_completed,
                outcome.steps_completed,
                outcome.latest.display()
            );
        }
        Cmd::Predict {
            ckpt,
            input,
            output,
            tile,
        } => {
            let labels = predict_file(&ckpt, &input, &output, tile)?;
            println!("wrote {:?} label map to {}", labels.shape(), output.display());
        }
        Cmd::Eval {
            pred,
            gt,
            metrics,
            tau,
            out,
        } => {
            let metrics = parse_metrics(&metrics)?;
            let run = evaluate_dirs(&pred, &gt, &metrics, tau)?;
            let csv = write_reports(&run, &out)?;
            for a in &run.aggregate.per_class {
                let fmt = |s: Option<xlstm_unet::metrics::Stat>| {
                    s.map(|s| format!("{:.4} ± {:.4}", s.mean, s.std)).unwrap_or_else(|| "-".into())
                };
                println!(
                    "class {}: dsc {}  nsd {}  hd95 {}",
                    a.class_id,
                    fmt(a.dsc),
                    fmt(a.nsd),
                    fmt(a.hd95)
                );
            }
            if let Some(f1) = run.aggregate.f1 {
                println!("instance f1: {:.4} ± {:.4}", f1.mean, f1.std);
            }
            println!("{} cases -> {}, {}", run.reports.len(), out.display(), csv.display());
            if !run.missing.is_empty() {
                eprintln!("warning: cases missing on one side and excluded: {}", run.missing.join(", "));
                return Err(Failure::Runtime(format!("{} unmatched cases", run.missing.len())));
            }
        }
        Cmd::Gradcheck {
            module,
            seed,
            corrupt_gradients,
        } => {
            let report = run_suite(module.as_deref(), seed, corrupt_gradients.then_some(1.5))?;
            print!("{}", format_table(&report));
            let failed: Vec<&str> = report.failures().iter().map(|r| r.name.as_str()).collect();
            if !failed.is_empty() {
                return Err(Failure::Runtime(format!("gradient check failed: {}", failed.join(", "))));
            }
            println!("all {} checks passed", report.rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
