//! Simulation and analysis of magnetic-field amplification with polarized
//! ¹²⁹Xe spins under Markovian and Gaussian (quantum-Zeno) relaxation.
//!
//! - [`units`]: constants, parameter records, unit parsing.
//! - [`bloch`]: rotating- and lab-frame Bloch equations, RK4 integration.
//! - [`linear`]: weak-field closed forms, optimal time, √e enhancement.
//! - [`optimal`]: optimal response from full numeric traces.
//! - [`sweep`]: deterministic parallel parameter sweeps and their output.
//! - [`axion`]: dipole potential and exclusion-curve rescaling.

// `!(x > 0.0)` is deliberate: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod axion;
pub mod bloch;
pub mod config;
pub mod error;
pub mod linear;
pub mod optimal;
pub mod roots;
pub mod sweep;
pub mod units;

pub use bloch::{
    integrate, rhs_lab, rhs_rotating, to_lab_frame, BlochState, Frame, IntegratorConfig, Trace,
    TraceMeta, Vec3,
};
pub use config::{ConfigFile, ParamSet};
pub use error::{Error, Result};
pub use linear::{
    amplification_factor, enhancement_ratio, optimal_time_exact, optimal_time_taylor,
    p_perp_analytic, rotating_frame_solution, LinearResponseParams, OptimalPoint,
};
pub use optimal::{find_optimal_response, saturation_scan, OptimalResponse};
pub use sweep::{emit, run_sweep, run_sweep_with_workers, SweepResult, SweepSpec};
pub use units::{
    AmplifierConstants, DetuningConvention, DriveConfig, NoiseModel, RelaxationSpec, SpinSpecies,
};

/// Scientific notation with 17 significant digits, enough to round-trip any f64.
pub fn fmt_sci(x: f64) -> String {
    format!("{x:.16e}")
}
