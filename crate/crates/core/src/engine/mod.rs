//! Dense tensors with exact reverse-mode gradients.

pub mod checkpoint;
pub mod dropout;
pub mod gradcheck;
pub mod init;
pub mod ops;
pub mod params;
pub mod real;
pub mod tape;
pub mod tensor;

pub use checkpoint::Checkpoint;
pub use dropout::{dropout_apply, dropout_mask, dropout_on_tape};
pub use gradcheck::{finite_difference_check, GradCheckOptions, GradCheckReport, GroupReport};
pub use init::{derive_seed, xavier_init};
pub use params::{GradientStore, ParamKind, Parameter, ParameterStore};
pub use real::Real;
pub use tape::{ProductGroup, Tape, Var};
pub use tensor::Tensor;
