//! Polycrystal stress-strain surrogates: synthetic microstructures, a
//! plane-strain crystal-plasticity solver, single-crystal basis curves and
//! DeepONet models trained on them.

pub mod basis;
pub mod cpfem;
pub mod error;
pub mod eval;
pub mod micro;
pub mod pipeline;
pub mod surrogate;

pub use error::{Error, Result};
