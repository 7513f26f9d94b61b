//! Simulation and numerical verification of skew-product decompositions.
//!
//! Three SO(2)-equivariant diffusions are provided: planar Brownian motion,
//! Brownian motion rotated at unit angular speed, and a 2×2 matrix diffusion
//! `dx = f(x) dA` with `f(x) = det(x) / (tr(xᵀx) + 1)`. Each is split into a
//! radial part (radius, or the upper-triangular QR factor) and an unwrapped
//! angle, the angle is put back on its own quadratic-variation clock, and the
//! [`stats`] module turns the resulting paths into pass/fail verdicts.
//!
//! The [`suite`] module wires these pieces into the three example pipelines.

pub mod decompose;
pub mod error;
pub mod mat2;
pub mod scenarios;
pub mod sde;
pub mod stats;
pub mod suite;

pub use decompose::{
    dds_extract, polar_decompose, qr_path, time_change_matrix, time_change_planar, DdsPath, PolarDecomposition,
    QrDecomposition, TimeChange,
};
pub use error::{Error, Result};
pub use mat2::{f_coeff, qr_decompose, rotation_matrix, Mat2, Rotation, UpperTri2};
pub use scenarios::{Scenario, ScenarioConfig};
pub use sde::{euler_maruyama, wiener_increments, Grid, Point2, SamplePath, State, WienerBundle};
pub use stats::{TestReport, Verdict};
pub use suite::{run_suite, Expected, Suite, SuiteConfig, SuiteEntry, SuiteOutcome};
