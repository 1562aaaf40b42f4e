use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checkpoint::{Checkpoint, RngState};
use super::config::RunConfig;
use super::log::{StepRecord, TrainLog};
use crate::error::{Error, Result};
use crate::io::{sample_patch, Dataset, Sample};
use crate::optim::{lr_schedule, AdamWState};
use crate::tensor::{Array, Graph};
use crate::unet::{build_network, Network};

/// ChaCha stream ids of the per-purpose generators. Initialization uses the
/// network seed directly.
pub const SAMPLE_STREAM: u64 = 1;
pub const AUGMENT_STREAM: u64 = 2;

fn stream(seed: u64, id: u64, word_pos: u128) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng.set_word_pos(word_pos);
    rng
}

fn parse_pos(s: &str) -> Result<u128> {
    s.parse()
        .map_err(|_| Error::InvalidArgument(format!("bad RNG word position `{s}` in checkpoint")))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochSummary {
    /// Zero-based index of the finished epoch.
    pub epoch: usize,
    pub lr: f64,
    pub mean_loss: f64,
    pub last_loss: f64,
    pub improved: bool,
    pub seconds: f64,
}

/// Network, optimizer, data and RNG streams of one run.
pub struct Trainer {
    pub config: RunConfig,
    pub net: Network<f32>,
    pub opt: AdamWState<f32>,
    pub samples: Vec<Sample>,
    sample_rng: ChaCha8Rng,
    augment_rng: ChaCha8Rng,
    /// Completed epochs.
    pub epoch: usize,
    /// Completed optimizer steps.
    pub step: u64,
    pub best_loss: Option<f64>,
}

fn check_samples(config: &RunConfig, samples: &[Sample]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Dataset("no training cases".into()));
    }
    let rank = config.task.rank();
    for s in samples {
        let is = s.image.shape();
        if is.len() != rank + 1 || is[0] != config.in_channels || is[1..] != *s.label.shape() {
            return Err(Error::Dataset(format!(
                "case `{}`: image {is:?} / label {:?} do not fit a {rank}D run with {} channels",
                s.case_id,
                s.label.shape(),
                config.in_channels
            )));
        }
        if let Some(&bad) = s.label.data().iter().find(|&&v| v < 0 || v as usize >= config.num_classes) {
            return Err(Error::Dataset(format!(
                "case `{}`: label {bad} outside [0, {})",
                s.case_id, config.num_classes
            )));
        }
    }
    Ok(())
}

impl Trainer {
    pub fn new(config: RunConfig, samples: Vec<Sample>) -> Result<Self> {
        config.validate()?;
        check_samples(&config, &samples)?;
        let net = build_network(&config.network())?;
        let opt = AdamWState::new(&net.params, config.adamw());
        Ok(Self {
            sample_rng: stream(config.seed, SAMPLE_STREAM, 0),
            augment_rng: stream(config.seed, AUGMENT_STREAM, 0),
            config,
            net,
            opt,
            samples,
            epoch: 0,
            step: 0,
            best_loss: None,
        })
    }

    /// Continues from `ckpt`. A replacement `config` may change the schedule
    /// length and other run settings but not the network.
    pub fn resume(ckpt: Checkpoint, config: Option<RunConfig>, samples: Vec<Sample>) -> Result<Self> {
        let config = match config {
            Some(c) => {
                c.validate()?;
                if c.network() != ckpt.config.network() {
                    return Err(Error::Config {
                        field: "network".into(),
                        msg: "config describes a different network than the checkpoint".into(),
                    });
                }
                c
            }
            None => ckpt.config.clone(),
        };
        check_samples(&config, &samples)?;
        let mut opt = ckpt.opt;
        opt.config = config.adamw();
        Ok(Self {
            sample_rng: stream(ckpt.rng.seed, SAMPLE_STREAM, parse_pos(&ckpt.rng.sample_word_pos)?),
            augment_rng: stream(ckpt.rng.seed, AUGMENT_STREAM, parse_pos(&ckpt.rng.augment_word_pos)?),
            config,
            net: ckpt.net,
            opt,
            samples,
            epoch: ckpt.epoch,
            step: ckpt.step,
            best_loss: ckpt.best_loss,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            epoch: self.epoch,
            step: self.step,
            best_loss: self.best_loss,
            rng: RngState {
                seed: self.config.seed,
                sample_word_pos: self.sample_rng.get_word_pos().to_string(),
                augment_word_pos: self.augment_rng.get_word_pos().to_string(),
            },
            net: self.net.clone(),
            opt: self.opt.clone(),
        }
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.config.epochs
    }

    pub fn current_lr(&self) -> f64 {
        lr_schedule(self.epoch, self.config.epochs, self.config.lr, self.config.schedule)
    }

    /// Random patches `[B, C, *patch]` with labels `[B, *patch]`.
    pub fn next_batch(&mut self) -> (Array<f32>, Array<i32>) {
        let patch = self.config.patch_size.clone();
        let b = self.config.batch_size;
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..b {
            let idx = self.sample_rng.random_range(0..self.samples.len());
            let (mut img, mut lab) = sample_patch(&self.samples[idx], &patch, &mut self.sample_rng);
            if self.config.mirror {
                for ax in 0..patch.len() {
                    if self.augment_rng.random_bool(0.5) {
                        img = img.flip(ax + 1).expect("axis in range");
                        lab = lab.flip(ax).expect("axis in range");
                    }
                }
            }
            images.extend_from_slice(img.data());
            labels.extend_from_slice(lab.data());
        }
        let mut ishape = vec![b, self.config.in_channels];
        ishape.extend_from_slice(&patch);
        let mut lshape = vec![b];
        lshape.extend_from_slice(&patch);
        (
            Array::new(&ishape, images).expect("batch shape"),
            Array::new(&lshape, labels).expect("batch shape"),
        )
    }

    /// Loss and per-parameter gradients on one batch, without updating.
    pub fn loss_and_grads(
        &self,
        images: &Array<f32>,
        labels: &Array<i32>,
    ) -> Result<(f64, indexmap::IndexMap<String, Array<f32>>)> {
        let g = Graph::new();
        let p = self.net.params.bind(&g);
        let x = g.constant(images.clone());
        let probs = self.net.arch.forward(&p, x)?;
        let loss = g.dice_ce_loss(probs, labels, &self.config.loss)?;
        let value = g.value(loss).data()[0] as f64;
        let mut grads = g.backward(loss)?;
        Ok((value, p.collect(&mut grads)))
    }

    /// One optimizer step at `lr`. Returns the batch loss.
    pub fn train_step(&mut self, lr: f64) -> Result<f64> {
        let step_no = self.step + 1;
        let (images, labels) = self.next_batch();
        let (loss, grads) = self.loss_and_grads(&images, &labels).map_err(|e| match e {
            Error::NonFinite { .. } => Error::NonFiniteLoss(step_no),
            other => other,
        })?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(step_no));
        }
        self.opt.step(&mut self.net.params, &grads, lr)?;
        self.step = step_no;
        Ok(loss)
    }

    pub fn run_epoch(&mut self, mut log: Option<&mut TrainLog>, clock: Instant) -> Result<EpochSummary> {
        let start = Instant::now();
        let lr = self.current_lr();
        let mut total = 0.0;
        let mut last = 0.0;
        for _ in 0..self.config.steps_per_epoch {
            last = self.train_step(lr)?;
            total += last;
            if let Some(log) = log.as_deref_mut() {
                log.record(&StepRecord {
                    step: self.step,
                    epoch: self.epoch,
                    lr,
                    loss: last,
                    seconds: clock.elapsed().as_secs_f64(),
                })?;
            }
        }
        let mean_loss = total / self.config.steps_per_epoch as f64;
        let improved = self.best_loss.is_none_or(|b| mean_loss < b);
        if improved {
            self.best_loss = Some(mean_loss);
        }
        let summary = EpochSummary {
            epoch: self.epoch,
            lr,
            mean_loss,
            last_loss: last,
            improved,
            seconds: start.elapsed().as_secs_f64(),
        };
        self.epoch += 1;
        Ok(summary)
    }
}

pub const LOG_FILE: &str = "train_log.csv";
pub const CONFIG_SNAPSHOT: &str = "config.json";

#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    pub resume: Option<PathBuf>,
    /// Stop after this many epochs in this invocation.
    pub max_epochs: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub epochs_completed: usize,
    pub steps_completed: u64,
    pub best_loss: Option<f64>,
    pub latest: PathBuf,
}

fn write_snapshot(out: &Path, config: &RunConfig) -> Result<()> {
    let p = out.join(CONFIG_SNAPSHOT);
    let snapshot = RunConfig {
        out_dir: None,
        ..config.clone()
    };
    let text = serde_json::to_string_pretty(&snapshot)? + "\n";
    fs::write(&p, text).map_err(|e| Error::io(&p, e))
}

/// Full training run: writes `latest/` every epoch, `best/` whenever the
/// epoch's mean loss improves, the step log and a config snapshot.
pub fn train_run(
    config: RunConfig,
    data: impl AsRef<Path>,
    out: impl AsRef<Path>,
    opts: &TrainOptions,
    mut on_epoch: impl FnMut(&EpochSummary),
) -> Result<TrainOutcome> {
    config.validate()?;
    let dataset = Dataset::open(data)?;
    config.check_dataset(&dataset.meta)?;
    let samples = dataset.load_all()?;
    for s in &samples {
        config.check_case_shape(&s.case_id, s.spatial())?;
    }
    let mut trainer = match &opts.resume {
        Some(dir) => Trainer::resume(Checkpoint::load(dir)?, Some(config), samples)?,
        None => Trainer::new(config, samples)?,
    };
    let out = out.as_ref();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_snapshot(out, &trainer.config)?;
    let mut log = TrainLog::open(out.join(LOG_FILE), opts.resume.is_some())?;
    let latest = out.join("latest");
    let clock = Instant::now();
    let mut ran = 0;
    if trainer.is_done() {
        trainer.checkpoint().save(&latest)?;
    }
    while !trainer.is_done() && opts.max_epochs.is_none_or(|m| ran < m) {
        let summary = trainer.run_epoch(Some(&mut log), clock)?;
        log.flush()?;
        let ckpt = trainer.checkpoint();
        ckpt.save(&latest)?;
        if summary.improved {
            ckpt.save(out.join("best"))?;
        }
        ran += 1;
        on_epoch(&summary);
    }
    log.flush()?;
    write_snapshot(out, &trainer.config)?;
    Ok(TrainOutcome {
        epochs_completed: trainer.epoch,
        steps_completed: trainer.step,
        best_loss: trainer.best_loss,
        latest,
    })
}
