//! Minimal tensor library for small dense and convolutional networks:
//! tape-based reverse-mode autodiff, Adam, gradient checking and a
//! named-tensor file container. All math is `f64`.

pub mod container;
mod error;
pub mod gradcheck;
pub mod init;
pub mod optim;
pub mod param;
pub mod tape;
mod tensor;

pub use error::{NnError, Result};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use optim::{Adam, AdamConfig};
pub use param::{ParamSet, Parameter};
pub use tape::{Gradients, Padding, Tape, Var};
pub use tensor::Tensor;
