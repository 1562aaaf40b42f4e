//! Tensor files, dataset directories, synthetic phantoms and patch sampling.

mod dataset;
mod patch;
mod synthetic;
mod xten;

pub use dataset::{image_path, label_path, write_dataset, Dataset, DatasetMeta, Sample, META_FILE};
pub use patch::{crop, pad_to, sample_patch, FOREGROUND_PROB};
pub use synthetic::{case_name, gen_synthetic_dataset, synth_case, synth_samples, SyntheticSpec, NOISE_SIGMA};
pub use xten::{decode_tensor, encode_tensor, read_tensor, write_tensor, MAGIC, VERSION};
