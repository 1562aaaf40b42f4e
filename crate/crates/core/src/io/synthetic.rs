use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::dataset::{write_dataset, DatasetMeta, Sample};
use crate::error::{Error, Result};
use crate::tensor::{numel, Array};

pub const NOISE_SIGMA: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub cases: usize,
    pub classes: usize,
    /// Spatial extents; two or three axes.
    pub size: Vec<usize>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| {
            Err(Error::Config {
                field: field.into(),
                msg,
            })
        };
        if self.classes < 2 || self.classes > 256 {
            return bad("classes", format!("need 2..=256 classes, got {}", self.classes));
        }
        if !(2..=3).contains(&self.size.len()) {
            return bad("size", format!("need 2 or 3 axes, got {:?}", self.size));
        }
        if self.size.iter().any(|&s| s < 8) {
            return bad("size", format!("every extent must be at least 8, got {:?}", self.size));
        }
        if self.cases == 0 {
            return bad("cases", "need at least one case".into());
        }
        Ok(())
    }
}

pub fn case_name(i: usize) -> String {
    format!("case_{i:03}")
}

/// Paints one axis-aligned ellipse/ellipsoid of `class` into `label`.
fn paint(label: &mut Array<i32>, class: i32, rng: &mut ChaCha8Rng) {
    let shape = label.shape().to_vec();
    let rank = shape.len();
    let (lo, hi) = if rank == 2 { (1.0 / 16.0, 1.0 / 6.0) } else { (1.0 / 10.0, 1.0 / 5.0) };
    let radii: Vec<f64> = shape
        .iter()
        .map(|&s| rng.random_range((s as f64 * lo).max(1.5)..=(s as f64 * hi).max(2.5)))
        .collect();
    let centre: Vec<f64> = shape
        .iter()
        .zip(&radii)
        .map(|(&s, &r)| {
            let margin = (r * 0.5).min(s as f64 / 2.0 - 1.0);
            rng.random_range(margin..=s as f64 - 1.0 - margin)
        })
        .collect();
    let mut idx = vec![0usize; rank];
    for v in label.data_mut() {
        let d: f64 = (0..rank).map(|a| ((idx[a] as f64 - centre[a]) / radii[a]).powi(2)).sum();
        if d <= 1.0 {
            *v = class;
        }
        for a in (0..rank).rev() {
            idx[a] += 1;
            if idx[a] < shape[a] {
                break;
            }
            idx[a] = 0;
        }
    }
}

/// One synthetic case: 1–4 structures per foreground class, class `k` at
/// mean intensity `k/(K−1)` with per-structure jitter, Gaussian noise on top.
pub fn synth_case(case_id: &str, classes: usize, size: &[usize], rng: &mut ChaCha8Rng) -> Sample {
    let n = numel(size);
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");
    let mut label = Array::full(size, 0i32);
    loop {
        label.data_mut().fill(0);
        for k in 1..classes as i32 {
            for _ in 0..rng.random_range(1..=4) {
                paint(&mut label, k, rng);
            }
        }
        // later classes may cover earlier ones completely
        let mut seen = vec![false; classes];
        label.data().iter().for_each(|&v| seen[v as usize] = true);
        if seen.iter().all(|&s| s) {
            break;
        }
    }
    let jitter: Vec<f64> = (0..classes).map(|_| rng.random_range(-0.05..=0.05)).collect();
    let mut image_data = Vec::with_capacity(n);
    for &v in label.data() {
        let base = if v == 0 {
            0.0
        } else {
            v as f64 / (classes - 1) as f64 + jitter[v as usize]
        };
        image_data.push((base + noise.sample(rng)) as f32);
    }
    let mut shape = vec![1];
    shape.extend_from_slice(size);
    Sample {
        case_id: case_id.to_string(),
        image: Array::new(&shape, image_data).expect("shape matches"),
        label,
    }
}

/// Generates the samples in memory. Case `i` draws from its own ChaCha
/// stream, so cases do not depend on each other.
pub fn synth_samples(spec: &SyntheticSpec) -> Result<Vec<Sample>> {
    spec.validate()?;
    Ok((0..spec.cases)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            synth_case(&case_name(i), spec.classes, &spec.size, &mut rng)
        })
        .collect())
}

pub fn gen_synthetic_dataset(out: impl AsRef<Path>, spec: &SyntheticSpec) -> Result<DatasetMeta> {
    let samples = synth_samples(spec)?;
    let meta = DatasetMeta {
        classes: spec.classes,
        in_channels: 1,
        dims: spec.size.len(),
        cases: samples.iter().map(|s| s.case_id.clone()).collect(),
        seed: spec.seed,
    };
    write_dataset(out, &meta, &samples)?;
    Ok(meta)
}
