//! Whole-image inference: a single patch-sized forward pass or a tiled
//! sliding window with mean-probability stitching.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{pad_to, read_tensor, write_tensor, Sample};
use crate::metrics::dsc;
use crate::tensor::{numel, strides, Array, Tensor};
use crate::train::Checkpoint;
use crate::unet::{forward_segment, Network};

fn check_image(net: &Network<f32>, image: &Array<f32>) -> Result<()> {
    let cfg = net.config();
    let s = image.shape();
    if s.len() != cfg.patch_size.len() + 1 || s[0] != cfg.in_channels {
        return Err(Error::shape(
            "predict",
            format!(
                "network expects [{}, <{} spatial axes>], input is {s:?}",
                cfg.in_channels,
                cfg.patch_size.len()
            ),
        ));
    }
    Ok(())
}

/// Window corners along one axis of length `n >= p`.
fn window_starts(n: usize, p: usize) -> Vec<usize> {
    let stride = (p / 2).max(1);
    let mut starts: Vec<usize> = (0..=n - p).step_by(stride).collect();
    if *starts.last().expect("n >= p") != n - p {
        starts.push(n - p);
    }
    starts
}

fn batch1(x: &Array<f32>) -> Array<f32> {
    let mut s = vec![1];
    s.extend_from_slice(x.shape());
    x.reshape(&s).expect("same size")
}

/// Class probabilities `[K, *spatial]` for `image: [C, *spatial]`.
///
/// Without `tile` the spatial extent must equal the training patch. With
/// `tile` any extent works: the image is zero-padded up to the patch where
/// needed and covered by windows at stride `patch/2`.
pub fn predict_probs(net: &Network<f32>, image: &Array<f32>, tile: bool) -> Result<Array<f32>> {
    check_image(net, image)?;
    let patch = net.config().patch_size.clone();
    let k = net.config().num_classes;
    let sp = image.shape()[1..].to_vec();
    if !tile {
        if sp != patch {
            return Err(Error::shape(
                "predict",
                format!("input spatial shape {sp:?} differs from patch {patch:?}; use tiling"),
            ));
        }
        let p = forward_segment(net, &batch1(image))?;
        let mut s = vec![k];
        s.extend_from_slice(&sp);
        return p.reshape(&s);
    }

    let dummy = Array::new(&sp, vec![0i32; numel(&sp)])?;
    let (padded, _, before) = pad_to(image, &dummy, &patch);
    let psp = padded.shape()[1..].to_vec();
    let n = numel(&psp);
    let pst = strides(&psp);
    let per_axis: Vec<Vec<usize>> = psp.iter().zip(&patch).map(|(&n, &p)| window_starts(n, p)).collect();
    let mut acc = vec![0.0f64; k * n];
    let mut count = vec![0u32; n];
    let mut corner = vec![0usize; psp.len()];
    let mut idx = vec![0usize; psp.len()];
    let c = image.shape()[0];
    let pn = numel(&patch);
    loop {
        for ax in 0..psp.len() {
            corner[ax] = per_axis[ax][idx[ax]];
        }
        let offsets: Vec<usize> = (0..pn)
            .map(|i| {
                let mut r = i;
                let mut o = 0;
                for ax in (0..patch.len()).rev() {
                    o += (r % patch[ax] + corner[ax]) * pst[ax];
                    r /= patch[ax];
                }
                o
            })
            .collect();
        let mut win = Vec::with_capacity(c * pn);
        for ch in 0..c {
            win.extend(offsets.iter().map(|&o| padded.data()[ch * n + o]));
        }
        let mut ws = vec![1, c];
        ws.extend_from_slice(&patch);
        let probs = forward_segment(net, &Array::new(&ws, win)?)?;
        for (i, &o) in offsets.iter().enumerate() {
            count[o] += 1;
            for cls in 0..k {
                acc[cls * n + o] += probs.data()[cls * pn + i] as f64;
            }
        }
        // odometer over window grid
        let mut ax = psp.len();
        loop {
            if ax == 0 {
                return crop_back(&acc, &count, k, &psp, &before, &sp);
            }
            ax -= 1;
            idx[ax] += 1;
            if idx[ax] < per_axis[ax].len() {
                break;
            }
            idx[ax] = 0;
        }
    }
}

fn crop_back(acc: &[f64], count: &[u32], k: usize, psp: &[usize], before: &[usize], sp: &[usize]) -> Result<Array<f32>> {
    let (n, m) = (numel(psp), numel(sp));
    let pst = strides(psp);
    let mut out = Vec::with_capacity(k * m);
    for cls in 0..k {
        for i in 0..m {
            let mut r = i;
            let mut o = 0;
            for ax in (0..sp.len()).rev() {
                o += (r % sp[ax] + before[ax]) * pst[ax];
                r /= sp[ax];
            }
            out.push((acc[cls * n + o] / count[o] as f64) as f32);
        }
    }
    let mut s = vec![k];
    s.extend_from_slice(sp);
    Array::new(&s, out)
}

/// Per-voxel argmax over axis 0; ties go to the lowest class.
pub fn argmax_labels(probs: &Array<f32>) -> Array<i32> {
    let k = probs.shape()[0];
    let sp = &probs.shape()[1..];
    let m = numel(sp);
    Array::from_fn(sp, |i| {
        let mut best = 0;
        for c in 1..k {
            if probs.data()[c * m + i] > probs.data()[best * m + i] {
                best = c;
            }
        }
        best as i32
    })
}

pub fn predict_labels(net: &Network<f32>, image: &Array<f32>, tile: bool) -> Result<Array<i32>> {
    Ok(argmax_labels(&predict_probs(net, image, tile)?))
}

/// Loads a checkpoint and an image file, writes the label map as int32.
pub fn predict_file(ckpt: impl AsRef<Path>, input: impl AsRef<Path>, output: impl AsRef<Path>, tile: bool) -> Result<Array<i32>> {
    let ckpt = Checkpoint::load(ckpt)?;
    let image = read_tensor(input)?.into_f32()?;
    let labels = predict_labels(&ckpt.net, &image, tile)?;
    let output = output.as_ref();
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_tensor(output, &Tensor::I32(labels.clone()))?;
    Ok(labels)
}

/// Mean foreground DSC of whole-case predictions against their labels,
/// averaged over cases and classes `1..K`.
pub fn mean_foreground_dsc(net: &Network<f32>, samples: &[Sample], tile: bool) -> Result<f64> {
    let k = net.config().num_classes;
    let mut total = 0.0;
    for s in samples {
        let pred = predict_labels(net, &s.image, tile)?;
        for c in 1..k {
            total += dsc(&pred, &s.label, c as i32)?;
        }
    }
    Ok(total / (samples.len() * (k - 1)) as f64)
}
