//! Plane-strain crystal-plasticity finite elements.

mod banded;
pub mod constitutive;
pub mod crystal;
pub mod curve;
pub mod load;
pub mod material;
pub mod solver;

pub use banded::BandMatrix;
pub use constitutive::{material_update, LocalSettings, MaterialState, TangentMode, Update, UpdateFailure};
pub use crystal::{harden, mean_field, resolved_shear, slip_rate, von_mises, Crystal, SlipSystems, N_SLIP};
pub use curve::ResponseCurve;
pub use load::{LoadCase, LoadKind, OutputQuantity};
pub use material::{rotated_stiffness, MaterialParams, BOLTZMANN};
pub use solver::{run_simulation, simulate, OrientationField, Simulation, SolveStats, SolverSettings};
