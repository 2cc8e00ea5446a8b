#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` style guards reject NaN as well.

pub mod error;
pub mod field;
pub mod grid;
pub mod params;
pub mod snapshot;
pub mod spectral;

pub use error::{Error, Result};
pub use field::{field_l2_norm, Field};
pub use grid::{Axis, AxisKind, Grid};
pub use params::{validate_params, ModelParams, Terms};
pub mod march;
pub mod profile;
pub mod kuznetsov;
pub mod kzk;
pub mod npe;
pub mod hydro;
pub mod validate;
mod problems;

pub use hydro::{ConeSpec, ConservedState};
pub use kzk::{ReconstructedState, Reconstructor};
pub use march::MarchOutcome;
pub use profile::{ProfileSlice, ProfileSolution};
pub use validate::{ExperimentConfig, ScalingReport};
