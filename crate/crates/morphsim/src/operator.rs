//! Discrete diffusion operator and boundary source on a [`Grid`].
//!
//! `laplacian_operator` assembles the symmetric positive definite matrix A of
//! -D * (discrete Laplacian): second-order centered differences with
//! Dirichlet nodes eliminated and homogeneous-flux ghost reflection on
//! Neumann faces. Rows of boundary nodes carry the trapezoid half-weights, so
//! A is exactly the (scaled) stiffness form of the quadrature in `mesh`:
//! `cell_volume * f'Af / D == gradient_norm_sq(f)` holds to rounding, and the
//! consistent collocation operator is W^-1 A with W the diagonal of
//! `Grid::weights`. Evolution and steady solves pair A with W accordingly.

use crate::band::BandMatrix;
use crate::mesh::{BoundaryData, Field, Grid};

/// Assembles A = -D * (discrete Laplacian) over the free nodes.
pub fn laplacian_operator(grid: &Grid, diffusivity: f64) -> BandMatrix {
    assert!(diffusivity > 0.0, "diffusivity must be positive");
    let mut bw = 0usize;
    grid.for_each_edge(|d1, d2, _, _| {
        if let (Some(a), Some(b)) = (d1, d2) {
            bw = bw.max(a.abs_diff(b));
        }
    });
    let mut mat = BandMatrix::zeros(grid.dof_count(), bw.max(1));
    grid.for_each_edge(|d1, d2, axis, tw| {
        let h = grid.spacing(axis);
        let c = diffusivity * tw / (h * h);
        match (d1, d2) {
            (Some(a), Some(b)) => {
                mat.add(a, a, c);
                mat.add(b, b, c);
                mat.add(a.max(b), a.min(b), -c);
            }
            (Some(a), None) | (None, Some(a)) => mat.add(a, a, c),
            (None, None) => unreachable!(),
        }
    });
    mat
}

/// Discrete influx source: nu/h per Neumann boundary node (ghost-point
/// derivation), scaled by the transverse trapezoid weight in 2D. Independent
/// of the diffusivity, which cancels when the flux condition is inserted.
pub fn neumann_source(grid: &Grid, nu: &BoundaryData) -> Field {
    assert_eq!(nu.values().len(), grid.neumann_count());
    let mut src = vec![0.0; grid.dof_count()];
    for (node, &v) in grid.neumann_nodes().iter().zip(nu.values()) {
        src[node.dof] = node.source_coef * v;
    }
    Field::from_raw(src)
}

/// Trapezoidal integral of |grad f|^2: forward differences along each axis,
/// one-sided into eliminated Dirichlet zeros, no difference past a Neumann
/// face. Identical to cell_volume * f'Af/D by construction; this is the form
/// the dissipation functional uses.
pub fn gradient_norm_sq(grid: &Grid, f: &Field) -> f64 {
    assert_eq!(f.len(), grid.dof_count());
    let v = f.as_slice();
    let mut acc = 0.0;
    grid.for_each_edge(|d1, d2, axis, tw| {
        let a = d1.map_or(0.0, |d| v[d]);
        let b = d2.map_or(0.0, |d| v[d]);
        let h = grid.spacing(axis);
        let slope = (b - a) / h;
        acc += tw * slope * slope;
    });
    acc * grid.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_grid, BcKind, GridSpec};

    fn mixed_interval(n: usize) -> Grid {
        build_grid(&GridSpec::interval(1.0, n, BcKind::Neumann, BcKind::Dirichlet)).unwrap()
    }

    #[test]
    fn three_node_stencil_by_hand() {
        // N = 3, h = 1/2, D = 1, Neumann west / Dirichlet east. Edge (0,1)
        // contributes 1/h^2 = 4 to both diagonals and -4 off-diagonal; edge
        // (1,2) ends in the eliminated node and adds 4 to the last diagonal.
        let g = mixed_interval(3);
        let a = laplacian_operator(&g, 1.0);
        assert_eq!(a.n(), 2);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(0, 1), -4.0);
        assert_eq!(a.get(1, 0), -4.0);
        assert_eq!(a.get(1, 1), 8.0);
    }

    #[test]
    fn constant_annihilated_away_from_dirichlet() {
        let g = mixed_interval(33);
        let a = laplacian_operator(&g, 1.7);
        let ones = vec![1.0; g.dof_count()];
        let y = a.mul_vec(&ones);
        for (i, &yi) in y.iter().enumerate().take(g.dof_count() - 1) {
            assert!(yi.abs() < 1e-12, "row {i}: {yi}");
        }
        // The row next to the eliminated Dirichlet node sees the missing
        // neighbor.
        let h = g.spacing(0);
        assert!((y[g.dof_count() - 1] - 1.7 / (h * h)).abs() < 1e-9);
    }

    #[test]
    fn symmetric_as_bilinear_form() {
        let g = build_grid(&GridSpec::rectangle(
            [1.0, 1.5],
            [7, 9],
            BcKind::Neumann,
            BcKind::Dirichlet,
            BcKind::Dirichlet,
            BcKind::Neumann,
        ))
        .unwrap();
        let a = laplacian_operator(&g, 2.3);
        let n = g.dof_count();
        let u: Vec<f64> = (0..n).map(|i| ((i * 37 + 11) % 17) as f64 - 8.0).collect();
        let v: Vec<f64> = (0..n).map(|i| ((i * 53 + 29) % 23) as f64 - 11.0).collect();
        let au = a.mul_vec(&u);
        let av = a.mul_vec(&v);
        let uav: f64 = u.iter().zip(&av).map(|(x, y)| x * y).sum();
        let vau: f64 = v.iter().zip(&au).map(|(x, y)| x * y).sum();
        assert!((uav - vau).abs() <= 1e-9 * uav.abs().max(vau.abs()).max(1.0));
    }

    #[test]
    fn collocation_form_is_second_order() {
        // f = cos(pi x / 2) satisfies f'(0) = 0 and f(1) = 0; W^-1 A f must
        // converge to -D f'' = D (pi/2)^2 f at second order, boundary row
        // included.
        let err = |n: usize| -> f64 {
            let g = mixed_interval(n);
            let a = laplacian_operator(&g, 1.0);
            let f = Field::from_fn(&g, |x| (std::f64::consts::FRAC_PI_2 * x[0]).cos());
            let af = a.mul_vec(f.as_slice());
            let lam = std::f64::consts::FRAC_PI_2.powi(2);
            let mut worst = 0.0f64;
            for (dof, (&afi, &w)) in af.iter().zip(g.weights()).enumerate() {
                let want = lam * f[dof];
                worst = worst.max((afi / w - want).abs());
            }
            worst
        };
        let e1 = err(65);
        let e2 = err(129);
        let rate = (e1 / e2).log2();
        assert!((1.8..=2.2).contains(&rate), "observed order {rate}");
    }

    #[test]
    fn source_is_influx_over_spacing() {
        let g = mixed_interval(11);
        let h = g.spacing(0);
        let nu = BoundaryData::constant(&g, 2.5).unwrap();
        let src = neumann_source(&g, &nu);
        assert!((src[0] - 2.5 / h).abs() < 1e-12);
        assert!(src.as_slice()[1..].iter().all(|&v| v == 0.0));

        let zero = neumann_source(&g, &BoundaryData::zeros(&g));
        assert!(zero.as_slice().iter().all(|&v| v == 0.0));

        // Doubling the influx doubles the source.
        let nu2 = BoundaryData::constant(&g, 5.0).unwrap();
        let src2 = neumann_source(&g, &nu2);
        assert!((src2[0] - 2.0 * src[0]).abs() < 1e-12);
    }

    #[test]
    fn discrete_flux_balance_on_linear_profile() {
        // A w = src has the exact solution w = nu (1 - x)/D; the total
        // Dirichlet outflow equals the influx.
        let g = mixed_interval(21);
        let d = 1.6;
        let nu_val = 0.7;
        let nu = BoundaryData::constant(&g, nu_val).unwrap();
        let a = laplacian_operator(&g, d);
        let src = neumann_source(&g, &nu);
        let w = a.cholesky().unwrap().solve(src.as_slice());
        for (dof, &wi) in w.iter().enumerate() {
            let x = g.dof_coords(dof)[0];
            assert!((wi - nu_val * (1.0 - x) / d).abs() < 1e-10);
        }
        let outflow: f64 = a.mul_vec(&w).iter().sum::<f64>() * g.cell_volume();
        assert!((outflow - g.integrate_boundary(&nu)).abs() < 1e-10);
    }

    #[test]
    fn gradient_of_linear_ramp_is_one() {
        // Dirichlet on the west so f(x) = x vanishes there; the one-sided
        // difference at the east Neumann end sees slope one as well.
        let g =
            build_grid(&GridSpec::interval(1.0, 129, BcKind::Dirichlet, BcKind::Neumann)).unwrap();
        let f = Field::from_fn(&g, |x| x[0]);
        assert!((gradient_norm_sq(&g, &f) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_constant_contributes_only_at_dirichlet_contact() {
        let g = mixed_interval(17);
        let h = g.spacing(0);
        let c = 0.8;
        let f = Field::constant(&g, c);
        // Interior and Neumann-side differences vanish; only the one-sided
        // jump into the eliminated east node remains.
        assert!((gradient_norm_sq(&g, &f) - c * c / h).abs() < 1e-12);
    }

    #[test]
    fn gradient_equals_operator_quadratic_form() {
        for spec in [
            GridSpec::interval(1.0, 48, BcKind::Neumann, BcKind::Dirichlet),
            GridSpec::rectangle(
                [1.0, 0.7],
                [13, 11],
                BcKind::Neumann,
                BcKind::Dirichlet,
                BcKind::Neumann,
                BcKind::Dirichlet,
            ),
        ] {
            let g = build_grid(&spec).unwrap();
            let d = 2.4;
            let a = laplacian_operator(&g, d);
            let f = Field::from_fn(&g, |x| {
                (2.0 * x[0]).sin() + x.get(1).map_or(0.0, |y| (1.3 * y).cos())
            });
            let lhs = gradient_norm_sq(&g, &f);
            let rhs = g.cell_volume() * a.quadratic_form(f.as_slice()) / d;
            assert!(
                (lhs - rhs).abs() <= 1e-12 * lhs.max(1.0),
                "quadrature mismatch: {lhs} vs {rhs}"
            );
        }
    }
}
