use super::surface::check_pair;
use crate::error::Result;
use crate::tensor::Array;

/// `2|P∩G| / (|P|+|G|)`, 1.0 when the class is absent from both.
pub fn dsc(pred: &Array<i32>, gt: &Array<i32>, class_id: i32) -> Result<f64> {
    check_pair("dsc", pred, gt)?;
    let (mut inter, mut p, mut g) = (0usize, 0usize, 0usize);
    for (&a, &b) in pred.data().iter().zip(gt.data()) {
        let (pa, gb) = (a == class_id, b == class_id);
        p += pa as usize;
        g += gb as usize;
        inter += (pa && gb) as usize;
    }
    if p + g == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (p + g) as f64)
}
