//! Energy-detection constellation design for a single-antenna transmitter
//! and a receiver with many antennas.
//!
//! The receiver averages received energy across antennas and decides by
//! thresholds. This crate computes the Gaussian statistics of that average,
//! the optimal thresholds, the exact average symbol error probability, and
//! an alternating power-allocation optimizer, together with a brute-force
//! grid oracle and a Monte Carlo channel simulator for cross-checks.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detector;
pub mod error;
pub mod model;
pub mod optimizer;
pub mod simulator;

pub use detector::{
    average_sep, conditional_pdf, decide, optimal_boundaries, optimal_boundary, pair_error_h,
    per_symbol_error, q_function, sep_at_optimal_boundaries, Boundaries,
};
pub use error::{Error, Result};
pub use model::{
    energy_stats, rician_moments, snr_to_pbar, validate_constellation, Constellation, EnergyStats,
    SystemParams,
};
pub use optimizer::{
    brute_force, convexity_probe, init_powers, optimize, update_powers, OptResult,
};
pub use simulator::{gaussianity_report, sample_energy, simulate_ser, SimResult};
