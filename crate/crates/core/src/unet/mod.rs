//! The segmentation network: stem, residual encoder stages with optional
//! xLSTM blocks, bottleneck, transposed-conv decoder and a softmax head.

mod blocks;
mod config;
mod network;

pub use blocks::{ConvLayer, ConvNormAct, DecoderStage, EncoderStage, NormLayer, ResidualBlock, IN_EPS, LEAKY_SLOPE};
pub use config::{NetworkConfig, Task, Variant};
pub use network::{build_network, forward_segment, Network, UNet};
