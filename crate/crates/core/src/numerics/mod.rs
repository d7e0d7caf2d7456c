//! Dense `f64` tensors, a reverse-mode tape, stable activations and a
//! central-difference gradient checker.

mod gradcheck;
pub mod ops;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, CoordSample, GradCheckReport, ZERO_GRADIENT};
pub use ops::{cross_entropy, log_sigmoid, sigmoid, softmax};
pub use tape::{Segment, Tape, Var};
pub use tensor::{Gradients, ParamId, ParamSet, Tensor};
