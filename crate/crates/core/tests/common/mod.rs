//! Independent oracles shared by several test targets.

pub mod masks;
pub mod mlstm;
