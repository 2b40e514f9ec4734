//! Dense `f64` arrays, a recording tape for reverse-mode gradients, the
//! activation/loss functions the model uses, a finite-difference gradient
//! checker and Adam.

mod adam;
mod gradcheck;
pub(crate) mod math;
mod matrix;
pub(crate) mod ops;
mod store;
mod tape;

pub use adam::{clip_grad_norm, Adam, AdamConfig};
pub use gradcheck::{finite_difference_check, GradCheck};
pub use matrix::Matrix;
pub use ops::{cross_entropy, log_softmax, softmax, Floored, PROB_FLOOR};
pub use store::{ParamId, ParameterStore};
pub use tape::{NodeId, Tape};
