//! Tensor type, operator definitions and the differentiation tape.

mod gemm;
pub mod ops;
pub mod tape;
pub mod tensor;

pub use ops::{Activation, ConvSpec};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
