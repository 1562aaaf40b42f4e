//! Training runs: configuration, the optimization loop, step logs and
//! resumable checkpoints.

mod checkpoint;
mod config;
mod log;
mod trainer;

pub use checkpoint::{Checkpoint, Manifest, OptimizerFiles, RngState, FORMAT, MANIFEST};
pub use config::RunConfig;
pub use log::{read_log, StepRecord, TrainLog, LOG_HEADER};
pub use trainer::{
    train_run, EpochSummary, TrainOptions, TrainOutcome, Trainer, AUGMENT_STREAM, CONFIG_SNAPSHOT, LOG_FILE,
    SAMPLE_STREAM,
};
