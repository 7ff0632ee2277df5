//! Energy functional, dissipation, discrete Sobolev norms, and decay-rate
//! fits along trajectories.
//!
//! The energy is Lambda(u, v) = 1/2 ||u - l_inf||_2^2 + Lambda0(v) with a
//! Bregman-type receptor term built on sigma(x) = -ln(1-x); its dissipation
//! combines the gradient energy of u - l_inf with pointwise reaction terms.
//! Along any trajectory Lambda is nonincreasing, Lambda' = -D_Lambda, and the
//! spectral gap chi bounds D_Lambda from below by chi * Lambda, which is what
//! the rate fits verify.

use crate::error::{Error, Result};
use crate::evolution::{ModelParams, Snapshot, Trajectory};
use crate::mesh::{Field, Grid};
use crate::operator::gradient_norm_sq;
use crate::steady::SteadyState;
use crate::tolerances;

fn check_s_domain(x: f64) -> Result<()> {
    if !(0.0..1.0 - tolerances::ONE_MINUS_S_GUARD).contains(&x) {
        return Err(Error::Field(format!(
            "bound fraction {x} outside [0, 1 - {:e})",
            tolerances::ONE_MINUS_S_GUARD
        )));
    }
    Ok(())
}

/// sigma(x) = -ln(1-x): convex, increasing, sigma(0) = 0. The generating
/// function of the receptor energy.
pub fn sigma_i(x: f64) -> Result<f64> {
    check_s_domain(x)?;
    Ok(-(-x).ln_1p())
}

/// Bregman gap sigma(v) - sigma(s) - (v-s)/(1-s) >= 0, computed as
/// -ln(1-r) - r with r = (v-s)/(1-s). The direct form cancels
/// catastrophically near r = 0, so small r switches to the series
/// r^2/2 + r^3/3 + ..., which is also manifestly nonnegative there.
fn bregman(v: f64, s: f64) -> f64 {
    let r = (v - s) / (1.0 - s);
    if r.abs() < 1e-5 {
        r * r * (0.5 + r * (1.0 / 3.0 + r * (0.25 + r * (0.2 + r / 6.0))))
    } else {
        -(-r).ln_1p() - r
    }
}

/// Receptor part of the energy:
/// int (1-s_inf)(l_inf + delta + 2 eps) * [sigma(v) - sigma(s_inf) - (v-s_inf)/(1-s_inf)].
/// Zero exactly when s = s_inf.
pub fn lambda0(
    grid: &Grid,
    s: &Field,
    steady: &SteadyState,
    delta: f64,
    epsilon: f64,
) -> Result<f64> {
    if s.len() != grid.dof_count() {
        return Err(Error::Field("field does not match the grid".into()));
    }
    let s_inf = steady.s_inf.as_slice();
    for i in 0..s.len() {
        check_s_domain(s[i])?;
    }
    Ok(grid.integrate_with(|i| {
        (1.0 - s_inf[i]) * (steady.l_inf[i] + delta + 2.0 * epsilon) * bregman(s[i], s_inf[i])
    }))
}

/// Full energy 1/2 ||l - l_inf||_2^2 + Lambda0(s); nonnegative, zero only at
/// the steady state.
pub fn lyapunov(
    grid: &Grid,
    l: &Field,
    s: &Field,
    steady: &SteadyState,
    delta: f64,
    epsilon: f64,
) -> Result<f64> {
    if l.len() != grid.dof_count() {
        return Err(Error::Field("field does not match the grid".into()));
    }
    let z1 = l.sub(&steady.l_inf);
    let quad = 0.5 * grid.integrate_with(|i| z1[i] * z1[i]);
    Ok(quad + lambda0(grid, s, steady, delta, epsilon)?)
}

/// Dissipation rate of the energy,
///
/// ```text
/// D ||grad(l - l_inf)||_2^2
///   + int ([l(1-s) - (delta+eps)s]^2 + eps(l_inf+delta+eps)(s-s_inf)^2) / (1-s);
/// ```
///
/// the reaction bracket vanishes at equilibrium because
/// l_inf (1 - s_inf) = (delta+eps) s_inf.
pub fn dissipation(
    grid: &Grid,
    l: &Field,
    s: &Field,
    steady: &SteadyState,
    diffusivity: f64,
    delta: f64,
    epsilon: f64,
) -> Result<f64> {
    if l.len() != grid.dof_count() || s.len() != grid.dof_count() {
        return Err(Error::Field("field does not match the grid".into()));
    }
    for i in 0..s.len() {
        check_s_domain(s[i])?;
    }
    let z1 = l.sub(&steady.l_inf);
    let grad = diffusivity * gradient_norm_sq(grid, &z1);
    let s_inf = steady.s_inf.as_slice();
    let de = delta + epsilon;
    let react = grid.integrate_with(|i| {
        let one_minus = 1.0 - s[i];
        let bracket = l[i] * one_minus - de * s[i];
        let drift = s[i] - s_inf[i];
        (bracket * bracket + epsilon * (steady.l_inf[i] + de) * drift * drift) / one_minus
    });
    Ok(grad + react)
}

/// Relative defect of the balance Lambda(t) + int_0^t D_Lambda = Lambda(0)
/// at every snapshot. The cumulative integral uses the right-endpoint rule:
/// it pairs with the implicit bias of the stepper (the backward step damps
/// energy between states, which the right endpoint credits to the arrival
/// state), cutting the defect roughly in half versus the trapezoid rule.
/// Accurate when the snapshots are each integrator step.
pub fn energy_identity_residual(
    grid: &Grid,
    traj: &Trajectory,
    steady: &SteadyState,
) -> Result<Vec<f64>> {
    let snaps = &traj.snapshots;
    if snaps.len() < 3 {
        return Err(Error::Param(format!(
            "energy identity needs at least 3 snapshots, got {}",
            snaps.len()
        )));
    }
    let spacing = snaps[1].t - snaps[0].t;
    for w in snaps.windows(2) {
        if ((w[1].t - w[0].t) - spacing).abs() > 1e-9 * spacing.max(1.0) {
            return Err(Error::Param("energy identity needs uniform output spacing".into()));
        }
    }
    let p = &traj.params;
    let lam: Vec<f64> = snaps
        .iter()
        .map(|sn| lyapunov(grid, &sn.l, &sn.s, steady, p.delta, p.epsilon))
        .collect::<Result<_>>()?;
    let dis: Vec<f64> = snaps
        .iter()
        .map(|sn| dissipation(grid, &sn.l, &sn.s, steady, p.diffusivity, p.delta, p.epsilon))
        .collect::<Result<_>>()?;
    let scale = lam[0].max(1e-300);
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(snaps.len());
    out.push(0.0);
    for k in 1..snaps.len() {
        acc += dis[k] * (snaps[k].t - snaps[k - 1].t);
        out.push((lam[k] + acc - lam[0]).abs() / scale);
    }
    Ok(out)
}

/// Same residuals computed from an already-built series (whose
/// `int_d_lambda` is the identical running trapezoid), so streaming runs
/// need not retain snapshots.
pub fn series_energy_residuals(series: &LyapunovSeries) -> Vec<f64> {
    if series.is_empty() {
        return Vec::new();
    }
    let scale = series.lambda[0].max(1e-300);
    (0..series.len())
        .map(|k| (series.lambda[k] + series.int_d_lambda[k] - series.lambda[0]).abs() / scale)
        .collect()
}

/// Discrete norms of a field over the quadrature measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    Lp,
    W1p,
    W2p,
}

/// L2/Lp are plain quadrature norms; W1p adds the forward-difference gradient
/// p-integral (one-sided into Dirichlet zeros, none across a Neumann face),
/// W2p additionally the centered second differences at axis-interior nodes.
/// The Sobolev kinds require p above the dimension; W2p also needs every axis
/// to carry at least two interior nodes.
pub fn discrete_norm(grid: &Grid, f: &Field, kind: NormKind, p: f64) -> Result<f64> {
    if f.len() != grid.dof_count() {
        return Err(Error::Field("field does not match the grid".into()));
    }
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::Param(format!("norm exponent must be >= 1, got {p}")));
    }
    if matches!(kind, NormKind::W1p | NormKind::W2p) && p <= grid.dim() as f64 {
        return Err(Error::Param(format!(
            "Sobolev norms need p above the dimension {}, got {p}",
            grid.dim()
        )));
    }
    let q = if kind == NormKind::L2 { 2.0 } else { p };
    let mut acc = grid.integrate_with(|i| f[i].abs().powf(q));
    if matches!(kind, NormKind::W1p | NormKind::W2p) {
        let v = f.as_slice();
        let mut grad = 0.0;
        grid.for_each_edge(|d1, d2, axis, tw| {
            let a = d1.map_or(0.0, |d| v[d]);
            let b = d2.map_or(0.0, |d| v[d]);
            grad += tw * ((b - a) / grid.spacing(axis)).abs().powf(q);
        });
        acc += grad * grid.cell_volume();
    }
    if kind == NormKind::W2p {
        if !grid.supports_second_differences() {
            return Err(Error::Grid(
                "second differences need at least two interior nodes per axis".into(),
            ));
        }
        let v = f.as_slice();
        let mut second = 0.0;
        for axis in 0..grid.dim() {
            let h2 = grid.spacing(axis) * grid.spacing(axis);
            grid.for_each_axis_interior(axis, |dof, lo, hi, w| {
                let a = lo.map_or(0.0, |d| v[d]);
                let b = hi.map_or(0.0, |d| v[d]);
                second += w * ((a - 2.0 * v[dof] + b) / h2).abs().powf(q);
            });
        }
        acc += second * grid.cell_volume();
    }
    Ok(acc.powf(1.0 / q))
}

/// Energy, dissipation, and distance-to-equilibrium series sampled at the
/// output times of a run, plus the decay envelope 2 Lambda(0) e^{-chi t}.
#[derive(Debug, Clone)]
pub struct LyapunovSeries {
    pub times: Vec<f64>,
    pub lambda: Vec<f64>,
    pub d_lambda: Vec<f64>,
    /// Running integral of the dissipation, right-endpoint rule over every
    /// state the builder saw (integrator steps when streamed from a run).
    pub int_d_lambda: Vec<f64>,
    pub l2_z1: Vec<f64>,
    pub l2_z2: Vec<f64>,
    pub lp_z1: Vec<f64>,
    pub lp_z2: Vec<f64>,
    pub w1p_z1: Vec<f64>,
    pub w1p_z2: Vec<f64>,
    pub w2p_z1: Vec<f64>,
    pub envelope: Vec<f64>,
    pub chi: f64,
    pub delta_plus_epsilon: f64,
    /// Smallest grid spacing the norms were computed on; the difference
    /// quotients amplify pointwise roundoff by 1/h (first) and 1/h^2
    /// (second), which sets where those series stop being signal.
    pub min_spacing: f64,
}

impl LyapunovSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Streaming accumulator: feed snapshots in time order, memory stays O(1) in
/// the trajectory length times the grid size, so large 2D runs never hold
/// more than one snapshot.
///
/// `push` records a series row; `observe_step` only feeds the running
/// dissipation integral. Feeding every accepted integrator step keeps the
/// quadrature error of `int_d_lambda` at the step level instead of the
/// (usually coarser) output spacing, where the fast initial transient would
/// dominate the energy-identity residual.
pub struct SeriesBuilder<'a> {
    grid: &'a Grid,
    steady: &'a SteadyState,
    params: &'a ModelParams,
    series: LyapunovSeries,
    acc: f64,
    last_node_t: Option<f64>,
}

impl<'a> SeriesBuilder<'a> {
    pub fn new(
        grid: &'a Grid,
        steady: &'a SteadyState,
        params: &'a ModelParams,
        chi: f64,
    ) -> Result<SeriesBuilder<'a>> {
        if !(chi > 0.0 && chi.is_finite()) {
            return Err(Error::Param(format!("chi must be positive, got {chi}")));
        }
        if !grid.supports_second_differences() {
            return Err(Error::Grid(
                "series needs second differences: at least 4 nodes per axis".into(),
            ));
        }
        Ok(SeriesBuilder {
            grid,
            steady,
            params,
            acc: 0.0,
            last_node_t: None,
            series: LyapunovSeries {
                times: Vec::new(),
                lambda: Vec::new(),
                d_lambda: Vec::new(),
                int_d_lambda: Vec::new(),
                l2_z1: Vec::new(),
                l2_z2: Vec::new(),
                lp_z1: Vec::new(),
                lp_z2: Vec::new(),
                w1p_z1: Vec::new(),
                w1p_z2: Vec::new(),
                w2p_z1: Vec::new(),
                envelope: Vec::new(),
                chi,
                delta_plus_epsilon: params.delta + params.epsilon,
                min_spacing: (0..grid.dim()).map(|a| grid.spacing(a)).fold(f64::INFINITY, f64::min),
            },
        })
    }

    /// Advances the dissipation integral to this state (right-endpoint rule:
    /// the increment is (t - t_prev) * D_Lambda(state), matching the
    /// integrator's implicit bias) and returns the state's dissipation.
    fn advance_node(&mut self, snap: &Snapshot) -> Result<f64> {
        let p = self.params;
        let dis = dissipation(
            self.grid,
            &snap.l,
            &snap.s,
            self.steady,
            p.diffusivity,
            p.delta,
            p.epsilon,
        )?;
        if !dis.is_finite() {
            return Err(Error::NonFinite(format!("dissipation at t = {}", snap.t)));
        }
        if let Some(t_prev) = self.last_node_t {
            if !(snap.t > t_prev) {
                return Err(Error::Param(format!(
                    "snapshots out of order: {} after {t_prev}",
                    snap.t
                )));
            }
            self.acc += (snap.t - t_prev) * dis;
        }
        self.last_node_t = Some(snap.t);
        Ok(dis)
    }

    /// Feeds an intermediate state into the dissipation integral without
    /// recording a series row.
    pub fn observe_step(&mut self, snap: &Snapshot) -> Result<()> {
        self.advance_node(snap).map(|_| ())
    }

    pub fn push(&mut self, snap: &Snapshot) -> Result<()> {
        let dis = self.advance_node(snap)?;
        let int_now = self.acc;
        let p = self.params;
        let lam = lyapunov(self.grid, &snap.l, &snap.s, self.steady, p.delta, p.epsilon)?;
        let z1 = snap.l.sub(&self.steady.l_inf);
        let z2 = snap.s.sub(&self.steady.s_inf);
        let norm = |f: &Field, kind| discrete_norm(self.grid, f, kind, p.p);
        let s = &mut self.series;
        let lam0 = *s.lambda.first().unwrap_or(&lam);
        for (dst, val) in [
            (&mut s.lambda, lam),
            (&mut s.d_lambda, dis),
            (&mut s.int_d_lambda, int_now),
            (&mut s.l2_z1, norm(&z1, NormKind::L2)?),
            (&mut s.l2_z2, norm(&z2, NormKind::L2)?),
            (&mut s.lp_z1, norm(&z1, NormKind::Lp)?),
            (&mut s.lp_z2, norm(&z2, NormKind::Lp)?),
            (&mut s.w1p_z1, norm(&z1, NormKind::W1p)?),
            (&mut s.w1p_z2, norm(&z2, NormKind::W1p)?),
            (&mut s.w2p_z1, norm(&z1, NormKind::W2p)?),
            (&mut s.envelope, 2.0 * lam0 * (-s.chi * snap.t).exp()),
        ] {
            if !val.is_finite() {
                return Err(Error::NonFinite(format!("series value at t = {}", snap.t)));
            }
            dst.push(val);
        }
        s.times.push(snap.t);
        Ok(())
    }

    pub fn finish(self) -> LyapunovSeries {
        self.series
    }
}

/// Series over an already collected trajectory. The dissipation integral is
/// then accumulated at the trajectory's own spacing; stream through a
/// [`SeriesBuilder`] during integration for step-resolution accuracy.
pub fn series_from_trajectory(
    grid: &Grid,
    traj: &Trajectory,
    steady: &SteadyState,
    chi: f64,
) -> Result<LyapunovSeries> {
    let mut builder = SeriesBuilder::new(grid, steady, &traj.params, chi)?;
    for snap in &traj.snapshots {
        builder.push(snap)?;
    }
    Ok(builder.finish())
}

/// Result of one log-linear tail fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitOutcome {
    Fitted {
        rate: f64,
        residual: f64,
        pass: bool,
    },
    /// The series reached the numerical floor before enough window points:
    /// converged, counted as a pass.
    BelowFloor,
}

#[derive(Debug, Clone)]
pub struct RateFit {
    pub label: &'static str,
    pub outcome: FitOutcome,
}

impl RateFit {
    pub fn passes(&self) -> bool {
        match self.outcome {
            FitOutcome::Fitted { pass, .. } => pass,
            FitOutcome::BelowFloor => true,
        }
    }
}

/// Per-norm decay-rate fits in bootstrap order (L2, then Lp, then the
/// Sobolev norms), plus the pointwise decay-envelope check.
#[derive(Debug, Clone)]
pub struct RateReport {
    pub chi: f64,
    /// Fitted rates must reach (1 - margin) * chi / 2.
    pub threshold: f64,
    pub window: (f64, f64),
    pub fits: Vec<RateFit>,
    pub envelope_pass: bool,
    /// Worst observed (||z1||^2 + (delta+eps)||z2||^2) / envelope.
    pub envelope_worst: f64,
}

impl RateReport {
    pub fn all_pass(&self) -> bool {
        self.envelope_pass && self.fits.iter().all(RateFit::passes)
    }
}

fn fit_one(
    label: &'static str,
    times: &[f64],
    values: &[f64],
    window: (f64, f64),
    t_min: f64,
    floor: f64,
    threshold: f64,
) -> RateFit {
    let lo = window.0.max(t_min);
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        // Once the series touches the floor the remaining points are
        // subtraction noise, not decay; drop them all.
        if v <= floor {
            break;
        }
        if t >= lo && t <= window.1 {
            pts.push((t, v.ln()));
        }
    }
    if pts.len() < 2 {
        return RateFit { label, outcome: FitOutcome::BelowFloor };
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm) * (p.0 - tm)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let slope = sxy / sxx;
    let residual = (pts
        .iter()
        .map(|p| {
            let e = p.1 - (ym + slope * (p.0 - tm));
            e * e
        })
        .sum::<f64>()
        / n)
        .sqrt();
    let rate = -slope;
    RateFit { label, outcome: FitOutcome::Fitted { rate, residual, pass: rate >= threshold } }
}

/// Fits exponential decay rates over the tail window and checks them against
/// chi/2, one-sided: the true decay may be faster, never slower. The second
/// difference series is additionally restricted to t >= 1, before which its
/// decay carries an algebraic prefactor.
///
/// The converged-to-floor cutoff is per series: a plain norm of z bottoms out
/// near machine precision, but the Sobolev norms divide roundoff by h and
/// h^2, so their floors are raised by the same factors. Without that, a
/// fully converged run reads as a flat near-zero "rate" instead of floored.
pub fn fit_rates(
    series: &LyapunovSeries,
    chi: f64,
    window: (f64, f64),
    margin: f64,
) -> Result<RateReport> {
    if !(window.0.is_finite() && window.1.is_finite() && window.0 < window.1) {
        return Err(Error::Param(format!("bad fit window [{}, {}]", window.0, window.1)));
    }
    if !(0.0..1.0).contains(&margin) {
        return Err(Error::Param(format!("rate margin must be in [0, 1), got {margin}")));
    }
    if series.is_empty() {
        return Err(Error::Param("empty series".into()));
    }
    let h = series.min_spacing;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Param(format!("series carries no grid spacing, got {h}")));
    }
    let floor = tolerances::SERIES_FLOOR;
    let (floor1, floor2) = (floor / h, floor / (h * h));
    let threshold = (1.0 - margin) * 0.5 * chi;
    let t = &series.times;
    let fits = vec![
        fit_one("l2_z1", t, &series.l2_z1, window, 0.0, floor, threshold),
        fit_one("l2_z2", t, &series.l2_z2, window, 0.0, floor, threshold),
        fit_one("lp_z1", t, &series.lp_z1, window, 0.0, floor, threshold),
        fit_one("lp_z2", t, &series.lp_z2, window, 0.0, floor, threshold),
        fit_one("w1p_z1", t, &series.w1p_z1, window, 0.0, floor1, threshold),
        fit_one("w1p_z2", t, &series.w1p_z2, window, 0.0, floor1, threshold),
        fit_one("w2p_z1", t, &series.w2p_z1, window, 1.0, floor2, threshold),
    ];
    let mut envelope_worst = 0.0f64;
    let mut envelope_pass = true;
    for k in 0..series.len() {
        let lhs = series.l2_z1[k] * series.l2_z1[k]
            + series.delta_plus_epsilon * series.l2_z2[k] * series.l2_z2[k];
        let env = series.envelope[k];
        if env > 0.0 {
            envelope_worst = envelope_worst.max(lhs / env);
        } else if lhs > 0.0 {
            envelope_pass = false;
        }
    }
    envelope_pass = envelope_pass && envelope_worst <= 1.0 + 1e-9;
    Ok(RateReport { chi, threshold, window, fits, envelope_pass, envelope_worst })
}
