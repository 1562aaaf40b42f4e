use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::dataset::Sample;
use crate::tensor::{numel, strides, Array};

pub const FOREGROUND_PROB: f64 = 0.5;

/// Zero-pads `image: [C,*sp]` and `label: [*sp]` symmetrically so every
/// axis is at least `patch`. Returns the inputs unchanged when no axis is
/// short.
pub fn pad_to(image: &Array<f32>, label: &Array<i32>, patch: &[usize]) -> (Array<f32>, Array<i32>, Vec<usize>) {
    let sp = label.shape();
    let padded: Vec<usize> = sp.iter().zip(patch).map(|(&s, &p)| s.max(p)).collect();
    let before: Vec<usize> = sp.iter().zip(&padded).map(|(&s, &p)| (p - s) / 2).collect();
    if padded == sp {
        return (image.clone(), label.clone(), before);
    }
    let c = image.shape()[0];
    let (n_in, n_out) = (numel(sp), numel(&padded));
    let mut img = vec![0.0f32; c * n_out];
    let mut lab = vec![0i32; n_out];
    let out_strides = strides(&padded);
    for i in 0..n_in {
        let mut r = i;
        let mut o = 0;
        for ax in (0..sp.len()).rev() {
            o += (r % sp[ax] + before[ax]) * out_strides[ax];
            r /= sp[ax];
        }
        lab[o] = label.data()[i];
        for ch in 0..c {
            img[ch * n_out + o] = image.data()[ch * n_in + i];
        }
    }
    let mut ishape = vec![c];
    ishape.extend_from_slice(&padded);
    (
        Array::new(&ishape, img).expect("shape"),
        Array::new(&padded, lab).expect("shape"),
        before,
    )
}

/// Copies the box starting at `corner` of extent `patch`.
pub fn crop(image: &Array<f32>, label: &Array<i32>, corner: &[usize], patch: &[usize]) -> (Array<f32>, Array<i32>) {
    let sp = label.shape();
    let c = image.shape()[0];
    let (n_in, n_out) = (numel(sp), numel(patch));
    let in_strides = strides(sp);
    let mut img = Vec::with_capacity(c * n_out);
    let mut offsets = Vec::with_capacity(n_out);
    for i in 0..n_out {
        let mut r = i;
        let mut o = 0;
        for ax in (0..patch.len()).rev() {
            o += (r % patch[ax] + corner[ax]) * in_strides[ax];
            r /= patch[ax];
        }
        offsets.push(o);
    }
    for ch in 0..c {
        img.extend(offsets.iter().map(|&o| image.data()[ch * n_in + o]));
    }
    let lab = offsets.iter().map(|&o| label.data()[o]).collect();
    let mut ishape = vec![c];
    ishape.extend_from_slice(patch);
    (Array::new(&ishape, img).expect("shape"), Array::new(patch, lab).expect("shape"))
}

/// Random crop of size `patch`. With probability [`FOREGROUND_PROB`] the
/// crop is forced to contain a randomly chosen foreground voxel.
pub fn sample_patch(sample: &Sample, patch: &[usize], rng: &mut ChaCha8Rng) -> (Array<f32>, Array<i32>) {
    let (image, label, _) = pad_to(&sample.image, &sample.label, patch);
    let sp = label.shape().to_vec();
    let force = rng.random_bool(FOREGROUND_PROB);
    let fg: Vec<usize> = if force {
        (0..label.len()).filter(|&i| label.data()[i] > 0).collect()
    } else {
        Vec::new()
    };
    let corner: Vec<usize> = if fg.is_empty() {
        sp.iter().zip(patch).map(|(&s, &p)| rng.random_range(0..=s - p)).collect()
    } else {
        let mut v = fg[rng.random_range(0..fg.len())];
        let mut pos = vec![0; sp.len()];
        for ax in (0..sp.len()).rev() {
            pos[ax] = v % sp[ax];
            v /= sp[ax];
        }
        (0..sp.len())
            .map(|ax| {
                let lo = (pos[ax] + 1).saturating_sub(patch[ax]);
                let hi = pos[ax].min(sp[ax] - patch[ax]);
                rng.random_range(lo..=hi)
            })
            .collect()
    };
    crop(&image, &label, &corner, patch)
}
