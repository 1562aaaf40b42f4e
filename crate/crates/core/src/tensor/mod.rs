//! Dense arrays, numerical kernels and the autodiff tape.

mod array;
mod graph;
pub mod kernels;
mod ops;
mod params;

pub use array::{numel, strides, Array, DType, Float, Tensor};
pub use graph::{Backward, Gradients, Graph, Var};
pub use params::{Bound, Init, ParamStore};
