//! Bidirectional mLSTM (ViL) blocks and the bridge between feature volumes
//! and token sequences.

mod block;
mod mlstm;
mod sequence;

pub use block::{VilBlock, VilSettings, XlstmBlock, LN_EPS};
pub use mlstm::{Direction, HeadState, MLstmCell, MLstmState};
pub use sequence::{sequence_to_volume, volume_to_sequence, SequenceView};
