use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::surface::{check_pair, neighbours, shape3};
use crate::error::{Error, Result};
use crate::tensor::Array;

/// Face-adjacent connected components of `mask`. Returns per-voxel ids
/// (0 = background, components numbered from 1 in scan order) and the count.
pub fn connected_components(mask: &[bool], shape: &[usize]) -> (Vec<u32>, usize) {
    let s = shape3(shape);
    let mut ids = vec![0u32; mask.len()];
    let mut count = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || ids[start] != 0 {
            continue;
        }
        count += 1;
        ids[start] = count;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            neighbours(i, shape.len(), s, |n| {
                if let Some(j) = n {
                    if mask[j] && ids[j] == 0 {
                        ids[j] = count;
                        queue.push_back(j);
                    }
                }
            });
        }
    }
    (ids, count as usize)
}

/// Instance map from the connected components of a label volume's foreground.
pub fn instances_from_labels(labels: &Array<i32>) -> Array<i32> {
    let mask: Vec<bool> = labels.data().iter().map(|&v| v > 0).collect();
    let (ids, _) = connected_components(&mask, labels.shape());
    Array::new(labels.shape(), ids.into_iter().map(|v| v as i32).collect()).expect("same shape")
}

/// Detection F1: predicted instances are the connected components of the
/// foreground of `pred`; `gt_instances` holds one positive id per instance.
/// Pairs are matched greedily by descending IoU, one-to-one, and count as
/// true positives when IoU ≥ `iou_thresh`.
pub fn instance_f1(pred: &Array<i32>, gt_instances: &Array<i32>, iou_thresh: f64) -> Result<f64> {
    check_pair("instance_f1", pred, gt_instances)?;
    if !(iou_thresh > 0.0 && iou_thresh < 1.0) {
        return Err(Error::InvalidArgument(format!("iou threshold must be in (0, 1), got {iou_thresh}")));
    }
    let pred_instances = instances_from_labels(pred);
    let mut pred_size = BTreeMap::<i32, usize>::new();
    let mut gt_size = BTreeMap::<i32, usize>::new();
    let mut inter = BTreeMap::<(i32, i32), usize>::new();
    for (&p, &g) in pred_instances.data().iter().zip(gt_instances.data()) {
        if p > 0 {
            *pred_size.entry(p).or_default() += 1;
        }
        if g > 0 {
            *gt_size.entry(g).or_default() += 1;
        }
        if p > 0 && g > 0 {
            *inter.entry((p, g)).or_default() += 1;
        }
    }
    let (np, ng) = (pred_size.len(), gt_size.len());
    if np + ng == 0 {
        return Ok(1.0);
    }
    let mut pairs: Vec<(f64, i32, i32)> = inter
        .iter()
        .map(|(&(p, g), &i)| (i as f64 / (pred_size[&p] + gt_size[&g] - i) as f64, p, g))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_p = BTreeSet::new();
    let mut used_g = BTreeSet::new();
    let mut tp = 0usize;
    for (iou, p, g) in pairs {
        if used_p.contains(&p) || used_g.contains(&g) {
            continue;
        }
        used_p.insert(p);
        used_g.insert(g);
        if iou >= iou_thresh {
            tp += 1;
        }
    }
    let (fp, fn_) = (np - tp, ng - tp);
    Ok(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64)
}
