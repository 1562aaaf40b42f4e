use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::xten::{read_tensor, write_tensor};
use crate::error::{Error, Result};
use crate::tensor::{Array, Tensor};

pub const META_FILE: &str = "dataset.json";

/// Contents of `dataset.json`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub classes: usize,
    pub in_channels: usize,
    pub dims: usize,
    pub cases: Vec<String>,
    pub seed: u64,
}

/// One image/label pair. `image: [C, *spatial]`, `label: [*spatial]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub case_id: String,
    pub image: Array<f32>,
    pub label: Array<i32>,
}

impl Sample {
    pub fn spatial(&self) -> &[usize] {
        self.label.shape()
    }

    pub fn validate(&self, meta: &DatasetMeta) -> Result<()> {
        let (is, ls) = (self.image.shape(), self.label.shape());
        if is.len() != meta.dims + 1 || is[0] != meta.in_channels || is[1..] != *ls {
            return Err(Error::Dataset(format!(
                "case `{}`: image {is:?} and label {ls:?} do not fit {}D data with {} channels",
                self.case_id, meta.dims, meta.in_channels
            )));
        }
        if let Some(&bad) = self.label.data().iter().find(|&&v| v < 0 || v as usize >= meta.classes) {
            return Err(Error::Dataset(format!(
                "case `{}`: label value {bad} outside [0, {})",
                self.case_id, meta.classes
            )));
        }
        Ok(())
    }
}

/// A dataset directory: `images/<case>.xten`, `labels/<case>.xten` and
/// `dataset.json`.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub meta: DatasetMeta,
}

pub fn image_path(root: &Path, case: &str) -> PathBuf {
    root.join("images").join(format!("{case}.xten"))
}

pub fn label_path(root: &Path, case: &str) -> PathBuf {
    root.join("labels").join(format!("{case}.xten"))
}

impl Dataset {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let meta_path = root.join(META_FILE);
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: DatasetMeta = serde_json::from_str(&text)?;
        if meta.classes < 2 || meta.in_channels == 0 || !(2..=3).contains(&meta.dims) || meta.cases.is_empty() {
            return Err(Error::Dataset(format!(
                "{}: need classes >= 2, in_channels >= 1, dims 2 or 3 and at least one case",
                meta_path.display()
            )));
        }
        let missing: Vec<&str> = meta
            .cases
            .iter()
            .filter(|c| !image_path(&root, c).is_file() || !label_path(&root, c).is_file())
            .map(String::as_str)
            .collect();
        if !missing.is_empty() {
            return Err(Error::Dataset(format!("cases without image/label pair: {missing:?}")));
        }
        Ok(Self { root, meta })
    }

    pub fn load_case(&self, case: &str) -> Result<Sample> {
        let image = read_tensor(image_path(&self.root, case))?.into_f32()?;
        let label = read_tensor(label_path(&self.root, case))?.into_labels()?;
        let s = Sample {
            case_id: case.to_string(),
            image,
            label,
        };
        s.validate(&self.meta)?;
        Ok(s)
    }

    pub fn load_all(&self) -> Result<Vec<Sample>> {
        self.meta.cases.iter().map(|c| self.load_case(c)).collect()
    }
}

/// Writes `dataset.json` and every sample. Labels are stored as u8 when
/// they fit.
pub fn write_dataset(root: impl AsRef<Path>, meta: &DatasetMeta, samples: &[Sample]) -> Result<()> {
    let root = root.as_ref();
    for sub in ["images", "labels"] {
        let d = root.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    for s in samples {
        s.validate(meta)?;
        write_tensor(image_path(root, &s.case_id), &Tensor::F32(s.image.clone()))?;
        let label = if meta.classes <= 256 {
            Tensor::U8(s.label.map(|v| v as u8))
        } else {
            Tensor::I32(s.label.clone())
        };
        write_tensor(label_path(root, &s.case_id), &label)?;
    }
    let p = root.join(META_FILE);
    let text = serde_json::to_string_pretty(meta)? + "\n";
    fs::write(&p, text).map_err(|e| Error::io(&p, e))
}
