use crate::error::{Error, Result};
use crate::tensor::Array;

pub(crate) const FAR: f64 = 1e30;

/// Spatial shape padded to three axes (leading 1s).
pub(crate) fn shape3(shape: &[usize]) -> [usize; 3] {
    let mut s = [1; 3];
    let off = 3 - shape.len();
    s[off..].copy_from_slice(shape);
    s
}

pub(crate) fn check_pair(op: &'static str, pred: &Array<i32>, gt: &Array<i32>) -> Result<()> {
    if pred.shape() != gt.shape() {
        return Err(Error::shape(
            op,
            format!("pred {:?} vs gt {:?}", pred.shape(), gt.shape()),
        ));
    }
    if pred.ndim() > 3 {
        return Err(Error::shape(op, format!("expected 1–3 spatial axes, got {:?}", pred.shape())));
    }
    Ok(())
}

pub(crate) fn class_mask(labels: &Array<i32>, class_id: i32) -> Vec<bool> {
    labels.data().iter().map(|&v| v == class_id).collect()
}

/// Face-adjacent neighbours of voxel `i` along the real (unpadded) axes;
/// `None` for positions outside the volume.
pub(crate) fn neighbours(i: usize, rank: usize, s: [usize; 3], mut f: impl FnMut(Option<usize>)) {
    let coords = [i / (s[1] * s[2]), (i / s[2]) % s[1], i % s[2]];
    let strides = [s[1] * s[2], s[2], 1];
    for ax in 3 - rank..3 {
        f((coords[ax] > 0).then(|| i - strides[ax]));
        f((coords[ax] + 1 < s[ax]).then(|| i + strides[ax]));
    }
}

/// Foreground voxels with at least one face-adjacent background neighbour.
/// Positions outside the volume count as background.
pub fn boundary(mask: &[bool], shape: &[usize]) -> Vec<bool> {
    let s = shape3(shape);
    (0..mask.len())
        .map(|i| {
            let mut edge = false;
            if mask[i] {
                neighbours(i, shape.len(), s, |n| edge |= n.is_none_or(|j| !mask[j]));
            }
            edge
        })
        .collect()
}

/// 1D lower-envelope squared distance transform.
fn edt_1d(f: &[f64], v: &mut [usize], z: &mut [f64], out: &mut [f64]) {
    let n = f.len();
    let meet = |q: usize, p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s = meet(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = meet(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared Euclidean distance from every voxel to the nearest `true` voxel of
/// `features`. All `FAR` when there are none.
pub fn squared_distance_transform(features: &[bool], shape: &[usize]) -> Vec<f64> {
    let s = shape3(shape);
    let mut d: Vec<f64> = features.iter().map(|&b| if b { 0.0 } else { FAR }).collect();
    if !features.iter().any(|&b| b) {
        return d;
    }
    let strides = [s[1] * s[2], s[2], 1];
    let maxn = *s.iter().max().unwrap_or(&1);
    let (mut f, mut v, mut z, mut out) = (vec![0.0; maxn], vec![0; maxn], vec![0.0; maxn + 1], vec![0.0; maxn]);
    for ax in 0..3 {
        let n = s[ax];
        if n == 1 {
            continue;
        }
        let others: Vec<usize> = (0..3).filter(|&a| a != ax).collect();
        for a in 0..s[others[0]] {
            for b in 0..s[others[1]] {
                let base = a * strides[others[0]] + b * strides[others[1]];
                for i in 0..n {
                    f[i] = d[base + i * strides[ax]];
                }
                edt_1d(&f[..n], &mut v[..n], &mut z[..n + 1], &mut out[..n]);
                for i in 0..n {
                    d[base + i * strides[ax]] = out[i].min(FAR);
                }
            }
        }
    }
    d
}

/// Distances from each `from` boundary voxel to the `to` boundary, in voxel
/// index order.
pub(crate) fn directed_distances(from: &[bool], to: &[bool], shape: &[usize]) -> Vec<f64> {
    let dt = squared_distance_transform(to, shape);
    from.iter()
        .zip(&dt)
        .filter(|(b, _)| **b)
        .map(|(_, &d2)| d2.sqrt())
        .collect()
}

/// Normalized surface distance at tolerance `tau` (voxel units).
pub fn nsd(pred: &Array<i32>, gt: &Array<i32>, class_id: i32, tau: f64) -> Result<f64> {
    check_pair("nsd", pred, gt)?;
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("nsd tolerance must be positive, got {tau}")));
    }
    let (pm, gm) = (class_mask(pred, class_id), class_mask(gt, class_id));
    let (pe, ge) = (!pm.iter().any(|&b| b), !gm.iter().any(|&b| b));
    if pe && ge {
        return Ok(1.0);
    }
    if pe || ge {
        return Ok(0.0);
    }
    let (pb, gb) = (boundary(&pm, pred.shape()), boundary(&gm, gt.shape()));
    let dp = directed_distances(&pb, &gb, pred.shape());
    let dg = directed_distances(&gb, &pb, pred.shape());
    let ok = dp.iter().chain(&dg).filter(|&&d| d <= tau).count();
    Ok(ok as f64 / (dp.len() + dg.len()) as f64)
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// 95th-percentile symmetric Hausdorff distance. `None` when the class is
/// absent from either mask.
pub fn hd95(pred: &Array<i32>, gt: &Array<i32>, class_id: i32) -> Result<Option<f64>> {
    hd_percentile(pred, gt, class_id, 95.0)
}

pub fn hd_percentile(pred: &Array<i32>, gt: &Array<i32>, class_id: i32, q: f64) -> Result<Option<f64>> {
    check_pair("hd95", pred, gt)?;
    let (pm, gm) = (class_mask(pred, class_id), class_mask(gt, class_id));
    if !pm.iter().any(|&b| b) || !gm.iter().any(|&b| b) {
        return Ok(None);
    }
    let (pb, gb) = (boundary(&pm, pred.shape()), boundary(&gm, gt.shape()));
    let mut all = directed_distances(&pb, &gb, pred.shape());
    all.extend(directed_distances(&gb, &pb, pred.shape()));
    all.sort_by(f64::total_cmp);
    Ok(Some(percentile(&all, q)))
}
