//! Regularized resolvents, the epsilon-trace of the positivity argument,
//! and limiting-absorption sweeps.

pub mod solve;
pub mod sweep;
pub mod trace;

pub use solve::{energy_identity_check, eps0_bound, eps1_bound, resolvent_element, shifted_solve, Branch, EnergyIdentity, ShiftedSolver};
pub use sweep::{
    estimate_spacing, fit_exponent, gaussian_test_vectors, growth_exponent, kato_smoothness_probe, lap_sweep, linspace, mu_schedule, KatoOptions, KatoReport,
    LapSweepResult, SpacingEstimate, TestVector, BLOWUP_THRESHOLD, FLAT_THRESHOLD,
};
pub use trace::{default_schedule, eps_window_convergence, regularized_trace, EpsWindowReport, RegularizedTrace, TraceOptions};
