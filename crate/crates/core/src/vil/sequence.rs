use crate::error::{Error, Result};
use crate::tensor::{numel, Float, Graph, Var};

/// A volume flattened to `[B, L, C]` together with the shape it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceView {
    pub data: Var,
    pub origin_shape: Vec<usize>,
}

/// `[B,C,*spatial] → [B, L, C]` with `L` the row-major flattening of the
/// spatial axes.
pub fn volume_to_sequence<T: Float>(g: &Graph<T>, x: Var) -> Result<SequenceView> {
    let shape = g.shape(x);
    let rank = shape.len();
    if !(4..=5).contains(&rank) {
        return Err(Error::shape(
            "volume_to_sequence",
            format!("expected [B,C,H,W] or [B,C,H,W,D], got {shape:?}"),
        ));
    }
    let mut order = vec![0];
    order.extend(2..rank);
    order.push(1);
    let seq_shape = [shape[0], numel(&shape[2..]), shape[1]];
    let data = g.reshape_permute(x, &seq_shape, &order)?;
    Ok(SequenceView {
        data,
        origin_shape: shape,
    })
}

/// Exact inverse of [`volume_to_sequence`].
pub fn sequence_to_volume<T: Float>(g: &Graph<T>, s: &SequenceView) -> Result<Var> {
    let seq_shape = g.shape(s.data);
    let o = &s.origin_shape;
    let consistent = (4..=5).contains(&o.len())
        && seq_shape.len() == 3
        && seq_shape[0] == o[0]
        && seq_shape[2] == o[1]
        && seq_shape[1] == numel(&o[2..]);
    if !consistent {
        return Err(Error::shape(
            "sequence_to_volume",
            format!("origin shape {o:?} does not match sequence {seq_shape:?}"),
        ));
    }
    let rank = o.len();
    let mut channels_last = vec![o[0]];
    channels_last.extend_from_slice(&o[2..]);
    channels_last.push(o[1]);
    let expanded = g.reshape(s.data, &channels_last)?;
    let mut order = vec![0, rank - 1];
    order.extend(1..rank - 1);
    g.reshape_permute(expanded, o, &order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Array;

    #[test]
    fn flatten_2d_layout() {
        let g = Graph::<f64>::new();
        let x = Array::from_fn(&[1, 2, 2, 2], |i| i as f64);
        let v = g.constant(x.clone());
        let s = volume_to_sequence(&g, v).unwrap();
        let seq = g.value(s.data).clone();
        assert_eq!(seq.shape(), &[1, 4, 2]);
        for c in 0..2 {
            for h in 0..2 {
                for w in 0..2 {
                    assert_eq!(seq.get(&[0, h * 2 + w, c]), x.get(&[0, c, h, w]));
                }
            }
        }
    }

    #[test]
    fn rejects_bad_rank_and_origin() {
        let g = Graph::<f64>::new();
        let x = g.constant(Array::zeros(&[2, 3, 4]));
        assert!(volume_to_sequence(&g, x).is_err());
        let v = g.constant(Array::zeros(&[1, 3, 2, 2]));
        let mut s = volume_to_sequence(&g, v).unwrap();
        s.origin_shape = vec![1, 3, 2, 3];
        assert!(sequence_to_volume(&g, &s).is_err());
    }
}
