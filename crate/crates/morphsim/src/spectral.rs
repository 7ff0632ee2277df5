//! Principal eigenvalue of the mixed-boundary Laplacian and the decay rate
//! derived from it.

use crate::error::{Error, Result};
use crate::mesh::{Field, Grid};
use crate::operator::laplacian_operator;
use crate::tolerances;

/// Converged output of [`smallest_eigenvalue`].
#[derive(Debug, Clone)]
pub struct EigenResult {
    /// Smallest eigenvalue of -lap with the grid's boundary partition (D = 1).
    pub lambda1: f64,
    /// Eigenfield, unit discrete L2 norm, largest-magnitude entry positive.
    pub eigenfield: Field,
    /// Scale-free residual ||A v - lambda W v|| / ||A v||; stays below
    /// sqrt(tol) once the Rayleigh quotient has settled to tol.
    pub residual: f64,
    pub iterations: usize,
}

/// Smallest eigenvalue of the discrete -lap by inverse power iteration,
/// converged when successive Rayleigh quotients differ by less than `tol`.
///
/// The operator pencil is (A, W) with A from [`laplacian_operator`] (D = 1)
/// and W the trapezoid weights, i.e. the collocation operator W^-1 A; its
/// eigenvalues approximate the continuum ones at second order. A is factored
/// once and reused across iterations.
pub fn smallest_eigenvalue(grid: &Grid, tol: f64) -> Result<EigenResult> {
    smallest_eigenvalue_with(grid, tol, tolerances::EIG_MAX_ITER)
}

/// [`smallest_eigenvalue`] with an explicit iteration cap.
pub fn smallest_eigenvalue_with(grid: &Grid, tol: f64, max_iter: usize) -> Result<EigenResult> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Param(format!("eigenvalue tolerance must be positive, got {tol}")));
    }
    let n = grid.dof_count();
    let a = laplacian_operator(grid, 1.0);
    let chol = a.cholesky()?;
    let w = grid.weights();
    let vol = grid.cell_volume();

    let l2h = |v: &[f64]| -> f64 {
        let s: f64 = v.iter().zip(w).map(|(x, wi)| wi * x * x).sum();
        (vol * s).sqrt()
    };

    let mut x = vec![1.0; n];
    let nrm = l2h(&x);
    for v in &mut x {
        *v /= nrm;
    }

    let mut rho_prev = f64::INFINITY;
    let mut last_delta = f64::INFINITY;
    for it in 1..=max_iter {
        let wx: Vec<f64> = x.iter().zip(w).map(|(v, wi)| v * wi).collect();
        let mut y = chol.solve(&wx);
        let nrm = l2h(&y);
        if !(nrm.is_finite() && nrm > 0.0) {
            return Err(Error::NonFinite("eigenvalue iteration".into()));
        }
        for v in &mut y {
            *v /= nrm;
        }
        let ay = a.mul_vec(&y);
        let num: f64 = ay.iter().zip(&y).map(|(p, q)| p * q).sum();
        let den: f64 = y.iter().zip(w).map(|(v, wi)| wi * v * v).sum();
        let rho = num / den;
        x = y;
        last_delta = (rho - rho_prev).abs();
        if last_delta < tol * rho.abs().max(1.0) {
            // Fix the sign, then measure the residual of the converged pair.
            let mut imax = 0;
            for (i, v) in x.iter().enumerate() {
                if v.abs() > x[imax].abs() {
                    imax = i;
                }
            }
            if x[imax] < 0.0 {
                for v in &mut x {
                    *v = -*v;
                }
            }
            let ax = a.mul_vec(&x);
            let mut rnum = 0.0;
            let mut rden = 0.0;
            for ((axi, xi), wi) in ax.iter().zip(&x).zip(w) {
                let r = axi - rho * wi * xi;
                rnum += r * r;
                rden += axi * axi;
            }
            let residual = (rnum / rden).sqrt();
            return Ok(EigenResult {
                lambda1: rho,
                eigenfield: Field::from_raw(x),
                residual,
                iterations: it,
            });
        }
        rho_prev = rho;
    }
    Err(Error::EigenNonConvergence { max_iter, last_delta })
}

/// Exponential decay rate of the Lyapunov functional,
/// chi = min( D*lambda1, D*lambda1*(delta+eps) / (2*(D*lambda1 + 2)) + eps/2 ).
///
/// Both halves of the min are positive, and chi/2 < D*lambda1 as well as
/// chi/2 < delta + eps hold strictly.
pub fn compute_chi(diffusivity: f64, lambda1: f64, delta: f64, epsilon: f64) -> Result<f64> {
    for (name, v) in
        [("diffusivity", diffusivity), ("lambda1", lambda1), ("delta", delta), ("epsilon", epsilon)]
    {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Param(format!("{name} must be positive, got {v}")));
        }
    }
    let dl = diffusivity * lambda1;
    let branch = dl * (delta + epsilon) / (2.0 * (dl + 2.0)) + epsilon / 2.0;
    Ok(dl.min(branch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_grid, BcKind, GridSpec};
    use proptest::prelude::*;

    const LAM_1D: f64 = std::f64::consts::FRAC_PI_2 * std::f64::consts::FRAC_PI_2;

    fn mixed_interval(n: usize) -> Grid {
        build_grid(&GridSpec::interval(1.0, n, BcKind::Neumann, BcKind::Dirichlet)).unwrap()
    }

    #[test]
    fn interval_eigenvalue_matches_quarter_mode() {
        // Neumann west / Dirichlet east on the unit interval: the first mode
        // is cos(pi x/2) with eigenvalue (pi/2)^2.
        let g = mixed_interval(512);
        let r = smallest_eigenvalue(&g, 1e-10).unwrap();
        assert!((r.lambda1 - LAM_1D).abs() < 1e-3, "lambda1 = {}", r.lambda1);
        assert!(r.lambda1 > 0.0);
        assert!(r.residual < 1e-5, "residual = {}", r.residual);
        // Unit discrete L2 norm and positive orientation.
        let nrm = g.integrate_volume(&crate::mesh::Field::from_raw(
            r.eigenfield.as_slice().iter().map(|v| v * v).collect(),
        ));
        assert!((nrm - 1.0).abs() < 1e-12);
        assert!(r.eigenfield.max() > 0.0);
    }

    #[test]
    fn eigenvalue_refines_at_second_order() {
        let e = |n: usize| {
            (smallest_eigenvalue(&mixed_interval(n), 1e-11).unwrap().lambda1 - LAM_1D).abs()
        };
        let (e1, e2) = (e(128), e(256));
        let order = (e1 / e2).log2() / ((255.0f64 / 127.0).log2());
        assert!((1.9..=2.1).contains(&order), "order {order}");
    }

    #[test]
    fn rectangle_eigenvalue_splits_into_axis_modes() {
        let g = build_grid(&GridSpec::rectangle(
            [1.0, 1.0],
            [256, 256],
            BcKind::Neumann,
            BcKind::Dirichlet,
            BcKind::Dirichlet,
            BcKind::Dirichlet,
        ))
        .unwrap();
        let want = LAM_1D + std::f64::consts::PI.powi(2);
        let r = smallest_eigenvalue(&g, 1e-10).unwrap();
        assert!((r.lambda1 - want).abs() < 1e-2, "lambda1 = {}", r.lambda1);
    }

    #[test]
    fn nonconvergence_is_reported() {
        let g = mixed_interval(64);
        match smallest_eigenvalue_with(&g, 1e-14, 1) {
            Err(Error::EigenNonConvergence { max_iter: 1, .. }) => {}
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rayleigh_quotients_dominate_lambda1() {
        let g = mixed_interval(96);
        let lam = smallest_eigenvalue(&g, 1e-11).unwrap().lambda1;
        let a = laplacian_operator(&g, 1.0);
        for seed in 0..20u64 {
            let mut s = seed.wrapping_mul(0x2545f4914f6cdd1d).wrapping_add(1);
            let v: Vec<f64> = (0..g.dof_count())
                .map(|_| {
                    s ^= s << 13;
                    s ^= s >> 7;
                    s ^= s << 17;
                    (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                })
                .collect();
            let den: f64 = v.iter().zip(g.weights()).map(|(x, w)| w * x * x).sum();
            let q = a.quadratic_form(&v) / den;
            assert!(q >= lam - 1e-9, "Rayleigh quotient {q} below lambda1 {lam}");
        }
    }

    #[test]
    fn chi_default_parameters() {
        let chi = compute_chi(1.0, LAM_1D, 1.0, 1.0).unwrap();
        assert!((chi - 1.0523).abs() < 1e-4, "chi = {chi}");
        assert!((chi / 2.0 - 0.5262).abs() < 1e-4);
        // Second branch is active here.
        assert!(chi < LAM_1D);
    }

    #[test]
    fn chi_small_epsilon_keeps_second_branch() {
        let chi = compute_chi(1.0, 1.0, 1.0, 1e-9).unwrap();
        assert!((chi - 1.0 / 6.0).abs() < 1e-8, "chi = {chi}");
    }

    #[test]
    fn chi_rejects_nonpositive_inputs() {
        assert!(compute_chi(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(compute_chi(1.0, -2.0, 1.0, 1.0).is_err());
        assert!(compute_chi(1.0, 1.0, f64::NAN, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn chi_is_the_min_and_half_of_it_is_strictly_dominated(
            d in 1e-3..1e3f64,
            lam in 1e-3..1e3f64,
            delta in 1e-3..1e2f64,
            eps in 1e-3..1e2f64,
        ) {
            let chi = compute_chi(d, lam, delta, eps).unwrap();
            let dl = d * lam;
            let branch = dl * (delta + eps) / (2.0 * (dl + 2.0)) + eps / 2.0;
            prop_assert!(chi <= dl && chi <= branch);
            prop_assert!(chi == dl.min(branch));
            prop_assert!(chi / 2.0 < dl);
            prop_assert!(chi / 2.0 < delta + eps);
        }
    }
}
