//! Numerical tolerances and guard values used across the crate.
//!
//! Everything that a check in `scenario` or a default in `config` depends on
//! is named here, so the acceptance thresholds live in exactly one place.

/// Default stopping tolerance for the Picard steady-state iteration
/// (sup-norm of the undamped update).
pub const PICARD_TOL: f64 = 1e-10;

/// Default Picard iteration cap.
pub const PICARD_MAX_ITER: usize = 200;

/// Default tolerance on successive Rayleigh quotients in the inverse power
/// iteration.
pub const EIG_TOL: f64 = 1e-10;

/// Default iteration cap for the eigenvalue solver.
pub const EIG_MAX_ITER: usize = 10_000;

/// A time step is rejected when min l drops below minus this.
pub const POSITIVITY_TOL: f64 = 1e-10;

/// Maximum number of dt halvings after a rejected step.
pub const MAX_DT_HALVINGS: usize = 20;

/// The computed steady state must satisfy min l_inf >= -STEADY_NONNEG_TOL.
pub const STEADY_NONNEG_TOL: f64 = 1e-12;

/// Validated snapshots tolerate at most this much negativity in l. Tighter
/// than the step-rejection threshold: supplied data is held to a higher
/// standard than a transient the integrator is still allowed to shrink away.
pub const SNAPSHOT_NONNEG_TOL: f64 = 1e-12;

/// The bound fraction must stay below 1 by at least this margin along any
/// trajectory (the exponential update keeps it there with room to spare).
pub const S_BOUND_MARGIN: f64 = 1e-8;

/// Domain guard for sigma_I(x) = -ln(1-x): x must stay below 1 - this.
pub const ONE_MINUS_S_GUARD: f64 = 1e-14;

/// Norm series values below this floor are excluded from rate fits
/// (subtraction noise dominates far below it).
pub const SERIES_FLOOR: f64 = 1e-13;

/// Maximum relative residual of the energy identity
/// Lambda(t) + int_0^t D_Lambda - Lambda(0) over a verification run.
pub const ENERGY_RESIDUAL_MAX: f64 = 1e-3;

/// Allowed relative slack in the spectral-gap inequality chi*Lambda <= D_Lambda.
pub const SPECTRAL_GAP_SLACK: f64 = 0.01;

/// Default margin for decay-rate checks: PASS when the fitted rate is at
/// least (1 - margin) * chi/2.
pub const RATE_MARGIN: f64 = 0.05;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    #[allow(clippy::assertions_on_constants)]
    fn guards_are_ordered() {
        // The step-rejection tolerance must be no tighter than what the
        // steady state is required to satisfy, and the sigma_I guard must sit
        // well inside the s bound margin.
        assert!(STEADY_NONNEG_TOL < POSITIVITY_TOL);
        assert!(ONE_MINUS_S_GUARD < S_BOUND_MARGIN);
        assert!(SERIES_FLOOR > 0.0);
        assert!(RATE_MARGIN > 0.0 && RATE_MARGIN < 1.0);
        assert!(SPECTRAL_GAP_SLACK > 0.0 && SPECTRAL_GAP_SLACK < 0.1);
    }
}
