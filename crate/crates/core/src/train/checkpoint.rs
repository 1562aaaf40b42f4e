use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{read_tensor, write_tensor};
use crate::optim::AdamWState;
use crate::tensor::{ParamStore, Tensor};
use crate::unet::{Network, UNet};

pub const MANIFEST: &str = "manifest.json";
pub const FORMAT: &str = "xlstm-unet-checkpoint";

/// Position of a ChaCha stream, stored as decimal text (u128 does not fit
/// JSON numbers).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub sample_word_pos: String,
    pub augment_word_pos: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerFiles {
    pub t: u64,
    pub m: IndexMap<String, String>,
    pub v: IndexMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub config: RunConfig,
    /// Completed epochs.
    pub epoch: usize,
    /// Completed optimizer steps.
    pub step: u64,
    pub best_loss: Option<f64>,
    pub rng: RngState,
    pub params: IndexMap<String, String>,
    pub optimizer: OptimizerFiles,
}

/// Training state as stored on disk.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub epoch: usize,
    pub step: u64,
    pub best_loss: Option<f64>,
    pub rng: RngState,
    pub net: Network<f32>,
    pub opt: AdamWState<f32>,
}

fn write_store(dir: &Path, sub: &str, store: &ParamStore<f32>) -> Result<IndexMap<String, String>> {
    let d = dir.join(sub);
    fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    let mut files = IndexMap::new();
    for (name, a) in store.iter() {
        let rel = format!("{sub}/{name}.xten");
        write_tensor(dir.join(&rel), &Tensor::F32(a.clone()))?;
        files.insert(name.to_string(), rel);
    }
    Ok(files)
}

fn read_store(dir: &Path, files: &IndexMap<String, String>) -> Result<ParamStore<f32>> {
    let mut store = ParamStore::new();
    for (name, rel) in files {
        if rel.contains("..") || Path::new(rel).is_absolute() {
            return Err(Error::InvalidArgument(format!("checkpoint file path `{rel}` escapes the directory")));
        }
        store.insert(name.clone(), read_tensor(dir.join(rel))?.into_f32()?)?;
    }
    Ok(store)
}

impl Checkpoint {
    /// Writes the checkpoint. Output bytes depend only on the state, never on
    /// time or output location.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let params = write_store(dir, "params", &self.net.params)?;
        let m = write_store(dir, "adam_m", &self.opt.m)?;
        let v = write_store(dir, "adam_v", &self.opt.v)?;
        let manifest = Manifest {
            format: FORMAT.into(),
            version: 1,
            config: RunConfig {
                out_dir: None,
                ..self.config.clone()
            },
            epoch: self.epoch,
            step: self.step,
            best_loss: self.best_loss,
            rng: self.rng.clone(),
            params,
            optimizer: OptimizerFiles { t: self.opt.t, m, v },
        };
        let p = dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let p = dir.join(MANIFEST);
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.format != FORMAT || manifest.version != 1 {
            return Err(Error::InvalidArgument(format!(
                "{}: not a version-1 checkpoint manifest",
                p.display()
            )));
        }
        manifest.config.validate()?;
        let arch = UNet::new(&manifest.config.network())?;
        let net = Network::with_params(arch, read_store(dir, &manifest.params)?)?;
        let m = read_store(dir, &manifest.optimizer.m)?;
        let v = read_store(dir, &manifest.optimizer.v)?;
        for (name, a) in net.params.iter() {
            for (which, s) in [("m", &m), ("v", &v)] {
                if s.get(name).map(|x| x.shape()) != Some(a.shape()) {
                    return Err(Error::InvalidArgument(format!(
                        "optimizer {which} state for `{name}` is missing or mis-shaped"
                    )));
                }
            }
        }
        let opt = AdamWState {
            config: manifest.config.adamw(),
            t: manifest.optimizer.t,
            m,
            v,
        };
        Ok(Self {
            config: manifest.config,
            epoch: manifest.epoch,
            step: manifest.step,
            best_loss: manifest.best_loss,
            rng: manifest.rng,
            net,
            opt,
        })
    }
}
