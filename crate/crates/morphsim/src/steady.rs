//! Steady state of the transport system via a monotone Picard iteration.
//!
//! The stationary concentration solves -D lap(l) = -eps*l/(delta+eps+l) with
//! the same boundary partition as the evolution; writing the right side as
//! -f(l)*l with f(x) = eps/(delta+eps+x) turns each Picard sweep into one
//! linear solve with a nonnegative diagonal perturbation of the diffusion
//! operator. Starting from zero the iterates increase monotonically, and the
//! fixed point is unique because x -> x*f(x) is increasing.

use crate::band::BandMatrix;
use crate::error::{Error, Result};
use crate::mesh::{BoundaryData, Field, Grid};
use crate::operator::{laplacian_operator, neumann_source};
use crate::tolerances;

/// Converged steady state.
#[derive(Debug, Clone)]
pub struct SteadyState {
    /// Free concentration l_inf, componentwise nonnegative.
    pub l_inf: Field,
    /// Bound fraction s_inf = l_inf / (eps + delta + l_inf), in [0, 1).
    pub s_inf: Field,
    pub picard_iterations: usize,
    /// Sup norm of the last undamped update ||T(u_k) - u_k||.
    pub final_update_norm: f64,
}

/// Absorption coefficient f(x) = eps / (delta + eps + x); positive and
/// decreasing in x, so stronger concentrations saturate the receptors.
pub fn f_reaction(x: f64, delta: f64, epsilon: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Param(format!("f_reaction needs x >= 0, got {x}")));
    }
    check_rates(1.0, delta, epsilon)?;
    Ok(epsilon / (delta + epsilon + x))
}

fn check_rates(diffusivity: f64, delta: f64, epsilon: f64) -> Result<()> {
    for (name, v) in [("diffusivity", diffusivity), ("delta", delta), ("epsilon", epsilon)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Param(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}

/// One Picard sweep: solves [A + W f(u)] w = source for the linearized
/// steady problem. The reaction diagonal carries the same trapezoid weights
/// as the quadrature so the boundary rows stay second-order consistent.
pub fn apply_t(
    grid: &Grid,
    u: &Field,
    nu: &BoundaryData,
    diffusivity: f64,
    delta: f64,
    epsilon: f64,
) -> Result<Field> {
    check_rates(diffusivity, delta, epsilon)?;
    if u.len() != grid.dof_count() {
        return Err(Error::Field("input field does not match the grid".into()));
    }
    if u.min() < 0.0 {
        return Err(Error::Param(format!("apply_t needs u >= 0, min = {:e}", u.min())));
    }
    let a = assemble(grid, u, diffusivity, delta, epsilon);
    let src = neumann_source(grid, nu);
    let w = a.cholesky()?.solve(src.as_slice());
    let sol =
        Field::from_values(grid, w).map_err(|_| Error::NonFinite("steady linear solve".into()))?;
    // Inverse positivity of the M-matrix keeps the solution nonnegative for
    // nonnegative influx; anything below rounding noise is a bug, not data.
    debug_assert!(sol.min() >= -1e-12 * (1.0 + sol.sup_norm()));
    Ok(sol)
}

fn assemble(grid: &Grid, u: &Field, diffusivity: f64, delta: f64, epsilon: f64) -> BandMatrix {
    let mut a = laplacian_operator(grid, diffusivity);
    let diag: Vec<f64> = u
        .as_slice()
        .iter()
        .zip(grid.weights())
        .map(|(&ui, &wi)| wi * epsilon / (delta + epsilon + ui))
        .collect();
    a.add_diag(&diag);
    a
}

/// Picard iteration from u = 0 with undamped updates.
pub fn picard_steady(
    grid: &Grid,
    nu: &BoundaryData,
    diffusivity: f64,
    delta: f64,
    epsilon: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SteadyState> {
    picard_steady_from(
        grid,
        nu,
        diffusivity,
        delta,
        epsilon,
        &Field::zeros(grid),
        tol,
        max_iter,
        1.0,
    )
}

/// Picard iteration from an arbitrary nonnegative start; `damping` in (0, 1]
/// blends each update as u <- (1-damping) u + damping T(u). Converges to the
/// same fixed point from any start.
#[allow(clippy::too_many_arguments)]
pub fn picard_steady_from(
    grid: &Grid,
    nu: &BoundaryData,
    diffusivity: f64,
    delta: f64,
    epsilon: f64,
    u0: &Field,
    tol: f64,
    max_iter: usize,
    damping: f64,
) -> Result<SteadyState> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Param(format!("Picard tolerance must be positive, got {tol}")));
    }
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::Param(format!("damping must lie in (0, 1], got {damping}")));
    }
    let mut u = u0.clone();
    let mut last_update = f64::INFINITY;
    for it in 1..=max_iter {
        let w = apply_t(grid, &u, nu, diffusivity, delta, epsilon)?;
        last_update = w.sup_diff(&u);
        u = if damping == 1.0 {
            w
        } else {
            Field::from_raw(
                u.as_slice()
                    .iter()
                    .zip(w.as_slice())
                    .map(|(&a, &b)| (1.0 - damping) * a + damping * b)
                    .collect(),
            )
        };
        if last_update < tol {
            if u.min() < -tolerances::STEADY_NONNEG_TOL {
                return Err(Error::NonFinite(format!(
                    "steady state lost positivity: min = {:e}",
                    u.min()
                )));
            }
            let s_inf =
                Field::from_raw(u.as_slice().iter().map(|&l| l / (epsilon + delta + l)).collect());
            return Ok(SteadyState {
                l_inf: u,
                s_inf,
                picard_iterations: it,
                final_update_norm: last_update,
            });
        }
    }
    Err(Error::PicardNonConvergence { max_iter, last_update })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_grid, BcKind, GridSpec};
    use proptest::prelude::*;

    fn mixed_interval(n: usize) -> Grid {
        build_grid(&GridSpec::interval(1.0, n, BcKind::Neumann, BcKind::Dirichlet)).unwrap()
    }

    fn default_nu(g: &Grid) -> BoundaryData {
        BoundaryData::constant(g, 1.0).unwrap()
    }

    #[test]
    fn absorption_coefficient_values() {
        assert!((f_reaction(0.0, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(f_reaction(1e6, 1.0, 1.0).unwrap() < 1e-5);
        assert!(f_reaction(-0.1, 1.0, 1.0).is_err());
        assert!(f_reaction(1.0, 0.0, 1.0).is_err());
        // x * f(x) is nondecreasing: uniqueness of the fixed point hangs on it.
        let mut prev = 0.0;
        for k in 0..1000 {
            let x = k as f64 * 0.05;
            let v = x * f_reaction(x, 0.7, 1.3).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn zero_influx_gives_zero_sweep() {
        let g = mixed_interval(41);
        let w = apply_t(&g, &Field::zeros(&g), &BoundaryData::zeros(&g), 1.0, 1.0, 1.0).unwrap();
        assert_eq!(w.sup_norm(), 0.0);
    }

    #[test]
    fn sweep_at_zero_matches_closed_form() {
        // With u = 0 the sweep solves -D w'' + f(0) w = 0, w'(0) = -nu/D,
        // w(1) = 0, i.e. w = nu sinh(kappa (1-x)) / (D kappa cosh(kappa)).
        let (d, delta, eps, nu_val) = (1.0, 1.0, 1.0, 1.0);
        let g = mixed_interval(512);
        let w = apply_t(&g, &Field::zeros(&g), &default_nu(&g), d, delta, eps).unwrap();
        let kappa = (eps / (delta + eps) / d).sqrt();
        let scale = nu_val / (d * kappa * kappa.cosh());
        let mut worst = 0.0f64;
        let mut amp = 0.0f64;
        for dof in 0..g.dof_count() {
            let x = g.dof_coords(dof)[0];
            let want = scale * (kappa * (1.0 - x)).sinh();
            worst = worst.max((w[dof] - want).abs());
            amp = amp.max(want.abs());
        }
        assert!(worst / amp < 1e-4, "relative error {}", worst / amp);
    }

    #[test]
    fn sweep_is_monotone_in_the_input() {
        let g = mixed_interval(9);
        let nu = default_nu(&g);
        proptest!(ProptestConfig::with_cases(32), |(
            base in proptest::collection::vec(0.0..2.0f64, 8),
            bump in proptest::collection::vec(0.0..1.0f64, 8),
        )| {
            let u1 = Field::from_values(&g, base.clone()).unwrap();
            let u2 = Field::from_values(
                &g,
                base.iter().zip(&bump).map(|(a, b)| a + b).collect(),
            )
            .unwrap();
            let w1 = apply_t(&g, &u1, &nu, 1.0, 1.0, 1.0).unwrap();
            let w2 = apply_t(&g, &u2, &nu, 1.0, 1.0, 1.0).unwrap();
            for i in 0..w1.len() {
                prop_assert!(w1[i] >= 0.0);
                prop_assert!(w2[i] + 1e-12 >= w1[i]);
            }
        });
    }

    #[test]
    fn picard_zero_influx_converges_immediately() {
        let g = mixed_interval(33);
        let st = picard_steady(&g, &BoundaryData::zeros(&g), 1.0, 1.0, 1.0, 1e-10, 50).unwrap();
        assert_eq!(st.picard_iterations, 1);
        assert_eq!(st.l_inf.sup_norm(), 0.0);
        assert_eq!(st.s_inf.sup_norm(), 0.0);
    }

    #[test]
    fn picard_iterates_increase_from_zero() {
        let g = mixed_interval(65);
        let nu = default_nu(&g);
        let mut u = Field::zeros(&g);
        for _ in 0..12 {
            let w = apply_t(&g, &u, &nu, 1.0, 1.0, 1.0).unwrap();
            for i in 0..u.len() {
                assert!(w[i] + 1e-13 >= u[i], "iterate lost monotonicity at {i}");
            }
            u = w;
        }
    }

    #[test]
    fn picard_fixed_point_residual_and_positivity() {
        let g = mixed_interval(256);
        let st = picard_steady(&g, &default_nu(&g), 1.0, 1.0, 1.0, 1e-10, 100).unwrap();
        let t_of_l = apply_t(&g, &st.l_inf, &default_nu(&g), 1.0, 1.0, 1.0).unwrap();
        assert!(t_of_l.sup_diff(&st.l_inf) < 1e-10);
        assert!(st.l_inf.min() >= -1e-12);
        assert!(st.final_update_norm < 1e-10);
        // s_inf = l/(eps+delta+l) stays inside [0, 1).
        assert!(st.s_inf.min() >= 0.0 && st.s_inf.max() < 1.0);
    }

    #[test]
    fn picard_agrees_from_far_start() {
        let g = mixed_interval(128);
        let nu = default_nu(&g);
        let a = picard_steady(&g, &nu, 1.0, 1.0, 1.0, 1e-10, 100).unwrap();
        let far = Field::constant(&g, 100.0);
        let b = picard_steady_from(&g, &nu, 1.0, 1.0, 1.0, &far, 1e-10, 200, 1.0).unwrap();
        assert!(a.l_inf.sup_diff(&b.l_inf) < 1e-8);
    }

    #[test]
    fn weak_influx_is_effectively_linear() {
        // For nu -> 0 the saturation is negligible and l_inf approaches the
        // u = 0 sweep.
        let g = mixed_interval(128);
        let nu = BoundaryData::constant(&g, 1e-6).unwrap();
        let st = picard_steady(&g, &nu, 1.0, 1.0, 1.0, 1e-14, 100).unwrap();
        let lin = apply_t(&g, &Field::zeros(&g), &nu, 1.0, 1.0, 1.0).unwrap();
        let rel = st.l_inf.sup_diff(&lin) / lin.sup_norm();
        assert!(rel < 1e-4, "relative difference {rel}");
    }

    #[test]
    fn picard_nonconvergence_is_reported() {
        let g = mixed_interval(64);
        match picard_steady(&g, &default_nu(&g), 1.0, 1.0, 1.0, 1e-12, 2) {
            Err(Error::PicardNonConvergence { max_iter: 2, last_update }) => {
                assert!(last_update.is_finite());
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn damping_reaches_the_same_fixed_point() {
        let g = mixed_interval(64);
        let nu = default_nu(&g);
        let plain = picard_steady(&g, &nu, 1.0, 1.0, 1.0, 1e-11, 100).unwrap();
        let damped =
            picard_steady_from(&g, &nu, 1.0, 1.0, 1.0, &Field::zeros(&g), 1e-11, 400, 0.5).unwrap();
        assert!(plain.l_inf.sup_diff(&damped.l_inf) < 1e-9);
        assert!(
            picard_steady_from(&g, &nu, 1.0, 1.0, 1.0, &Field::zeros(&g), 1e-11, 100, 1.5).is_err()
        );
    }
}
