//! A complete training run on disk: checkpoints, step log, config snapshot,
//! then a resume that extends the schedule.
//!
//! `cargo run --release --example train [work_dir]`

use std::path::PathBuf;

use xlstm_unet::io::{gen_synthetic_dataset, SyntheticSpec};
use xlstm_unet::train::{read_log, train_run, RunConfig, TrainOptions};

fn main() -> xlstm_unet::Result<()> {
    let work = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "train_example".into()));
    let data = work.join("data");
    gen_synthetic_dataset(
        &data,
        &SyntheticSpec {
            cases: 4,
            classes: 3,
            size: vec![64, 64],
            seed: 1,
        },
    )?;
    let config = RunConfig {
        epochs: 3,
        steps_per_epoch: 5,
        lr: 0.005,
        ..RunConfig::default()
    };
    let out = work.join("run");
    let print = |s: &xlstm_unet::train::EpochSummary| {
        println!("epoch {}  lr {:.4}  loss {:.4}  best {}", s.epoch, s.lr, s.mean_loss, s.improved)
    };
    train_run(config.clone(), &data, &out, &TrainOptions::default(), print)?;

    let longer = RunConfig { epochs: 5, ..config };
    let opts = TrainOptions {
        resume: Some(out.join("latest")),
        ..TrainOptions::default()
    };
    let done = train_run(longer, &data, &out, &opts, print)?;
    let log = read_log(out.join("train_log.csv"))?;
    println!(
        "{} steps logged, last loss {:.4}, checkpoint {}",
        log.len(),
        log.last().map_or(f64::NAN, |r| r.loss),
        done.latest.display()
    );
    Ok(())
}
