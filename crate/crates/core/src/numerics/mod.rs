//! Tensors, convolution, sampling, softmax, reverse-mode differentiation, Adam and SVD.

mod adam;
pub mod conv;
pub mod gradcheck;
pub mod linalg;
mod ops;
pub mod params;
pub mod sample;
mod softmax;
mod tape;
mod tensor;

pub use adam::AdamState;
pub use conv::{conv2d, pixel_shuffle, pixel_unshuffle};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport, InputReport};
pub use params::{Bound, Conv, ParamId, ParamStore};
pub use linalg::{svd, svd_matrix, Matrix, Svd};
pub use sample::{bilinear_sample, SampleGrid};
pub use softmax::softmax;
pub use tape::{BackwardFn, Gradients, Tape, Var};
pub use tensor::Tensor;
