//! UNet segmentation with bidirectional mLSTM (ViL) blocks in the encoder,
//! built on a small tape-based autodiff core.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: arrays, kernels (matmul, N-d convolution, transposed
//!   convolution, normalizations, softmax) and reverse-mode autodiff.
//! - [`gradcheck`]: central finite-difference verification of gradients.
//! - [`vil`]: the stabilized mLSTM recurrence, the ViL block and the
//!   volume/sequence bridge.
//! - [`unet`]: network configuration, construction and the segmentation forward pass.
//! - [`loss`] and [`optim`]: Dice + cross-entropy, AdamW and LR schedules.
//! - [`metrics`]: DSC, NSD, HD95 and instance F1.
//! - [`io`]: the XTEN tensor format, dataset layout, synthetic phantoms and patch sampling.
//! - [`train`], [`predict`], [`eval`]: the end-to-end drivers used by the CLI.

pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod optim;
pub mod predict;
pub mod tensor;
pub mod train;
pub mod unet;
pub mod vil;

pub use error::{Error, Result};
pub use tensor::{Array, Float, Graph, Tensor, Var};
