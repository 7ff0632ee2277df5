//! Time integration of the coupled transport system.
//!
//! One step splits the mechanisms: diffusion is implicit (backward Euler on
//! the weighted pair (A, W), unconditionally stable), the reaction source in
//! the l-equation is explicit, and the s-equation gets its exact exponential
//! update with l frozen over the step. Since s' = -(delta+eps+l)s + l is
//! linear in s once l is held, the update
//!     s_new = e^{-a dt} s + (1 - e^{-a dt}) l/a,    a = delta + eps + l,
//! is a convex combination of s and l/a < 1, so 0 <= s < 1 survives every
//! step unconditionally. Global order is one in dt. The steady state is an
//! exact fixed point of the full step: the Picard equation rearranges to the
//! implicit l-update, and l_inf/a_inf = s_inf freezes the s-update.

use std::collections::BTreeMap;

use crate::band::{BandCholesky, BandMatrix};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryData, Field, Grid};
use crate::operator::{laplacian_operator, neumann_source};
use crate::steady::SteadyState;
use crate::tolerances;

/// Physical parameters of a run. `p` is the exponent used by the Sobolev
/// norms downstream and must exceed the spatial dimension.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub diffusivity: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub nu: BoundaryData,
    pub p: f64,
}

impl ModelParams {
    pub fn new(
        grid: &Grid,
        diffusivity: f64,
        delta: f64,
        epsilon: f64,
        nu: BoundaryData,
        p: f64,
    ) -> Result<ModelParams> {
        for (name, v) in [("diffusivity", diffusivity), ("delta", delta), ("epsilon", epsilon)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Param(format!("{name} must be positive, got {v}")));
            }
        }
        if nu.values().len() != grid.neumann_count() {
            return Err(Error::Param(format!(
                "influx data has {} entries but the grid has {} Neumann nodes",
                nu.values().len(),
                grid.neumann_count()
            )));
        }
        if !(p.is_finite() && p > grid.dim() as f64) {
            return Err(Error::Param(format!(
                "norm exponent p must exceed the dimension {}, got {p}",
                grid.dim()
            )));
        }
        Ok(ModelParams { diffusivity, delta, epsilon, nu, p })
    }
}

/// State of the system at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub l: Field,
    pub s: Field,
}

impl Snapshot {
    /// Validating constructor for supplied data; integrator output is held to
    /// the (looser) step positivity tolerance instead.
    pub fn new(grid: &Grid, t: f64, l: Field, s: Field) -> Result<Snapshot> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Param(format!("snapshot time must be >= 0, got {t}")));
        }
        if l.len() != grid.dof_count() || s.len() != grid.dof_count() {
            return Err(Error::Field("snapshot fields do not match the grid".into()));
        }
        if l.min() < -tolerances::SNAPSHOT_NONNEG_TOL {
            return Err(Error::Field(format!("snapshot l has min {:e}", l.min())));
        }
        if s.min() < 0.0 || s.max() >= 1.0 {
            return Err(Error::Field(format!(
                "snapshot s must lie in [0, 1), range is [{:e}, {:e}]",
                s.min(),
                s.max()
            )));
        }
        Ok(Snapshot { t, l, s })
    }

    pub(crate) fn unchecked(t: f64, l: Field, s: Field) -> Snapshot {
        Snapshot { t, l, s }
    }
}

/// Snapshots at the requested output times, first one at t = 0 holding the
/// initial data, plus the extremes seen across every internal step (not just
/// the emitted ones).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub params: ModelParams,
    pub min_l_seen: f64,
    pub max_s_seen: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory holds at least the initial snapshot")
    }
}

/// Step counts and extreme values of one integration.
#[derive(Debug, Clone, Copy)]
pub struct EvolveStats {
    pub steps: usize,
    pub rejected: usize,
    pub min_l_seen: f64,
    pub max_s_seen: f64,
}

/// Exact solution at time dt of s' = -(delta+epsilon+l)s + l with l held
/// fixed, arranged so every term is nonnegative: no cancellation for small
/// a*dt (exp_m1) and none for huge a*dt (exp underflows to 0, the update
/// degrades gracefully to l/a).
pub fn s_scalar_update(s: f64, l: f64, dt: f64, delta: f64, epsilon: f64) -> f64 {
    let a = delta + epsilon + l;
    let e = (-a * dt).exp();
    let q = -(-a * dt).exp_m1();
    e * s + q * (l / a)
}

/// Reusable stepper: owns the assembled operator and one Cholesky factor of
/// W + dt*A per distinct dt, so uniform stepping factorizes exactly once.
pub struct Stepper<'a> {
    grid: &'a Grid,
    params: &'a ModelParams,
    stiffness: BandMatrix,
    source: Field,
    factors: BTreeMap<u64, BandCholesky>,
}

impl<'a> Stepper<'a> {
    pub fn new(grid: &'a Grid, params: &'a ModelParams) -> Stepper<'a> {
        Stepper {
            grid,
            params,
            stiffness: laplacian_operator(grid, params.diffusivity),
            source: neumann_source(grid, &params.nu),
            factors: BTreeMap::new(),
        }
    }

    fn factor(&mut self, dt: f64) -> Result<&BandCholesky> {
        let key = dt.to_bits();
        if !self.factors.contains_key(&key) {
            let mut m = self.stiffness.clone();
            m.scale_in_place(dt);
            m.add_diag(self.grid.weights());
            self.factors.insert(key, m.cholesky()?);
        }
        Ok(&self.factors[&key])
    }

    /// One IMEX step from (l, s) at time t. Fails with `StepRejected` when
    /// the implicit solve undershoots -positivity_tol (possible for large dt,
    /// where the explicit reaction can drive the right side negative).
    pub fn try_step(
        &mut self,
        t: f64,
        l: &Field,
        s: &Field,
        dt: f64,
        positivity_tol: f64,
    ) -> Result<(Field, Field)> {
        debug_assert!(dt > 0.0 && dt.is_finite());
        let (delta, epsilon) = (self.params.delta, self.params.epsilon);
        let w = self.grid.weights();
        let mut rhs: Vec<f64> = (0..l.len())
            .map(|i| {
                w[i] * (l[i] + dt * (delta * s[i] - l[i] * (1.0 - s[i]))) + dt * self.source[i]
            })
            .collect();
        self.factor(dt)?.solve_in_place(&mut rhs);
        let l_new = Field::from_values(self.grid, rhs)
            .map_err(|_| Error::NonFinite(format!("l update at t = {t}")))?;
        if l_new.min() < -positivity_tol {
            return Err(Error::StepRejected { t, min_l: l_new.min(), tol: positivity_tol });
        }
        let s_new = Field::from_raw(
            (0..s.len()).map(|i| s_scalar_update(s[i], l[i], dt, delta, epsilon)).collect(),
        );
        Ok((l_new, s_new))
    }
}

/// Single step without retry; a rejected step surfaces as an error for the
/// caller to halve.
pub fn step(grid: &Grid, params: &ModelParams, state: &Snapshot, dt: f64) -> Result<Snapshot> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Param(format!("dt must be positive, got {dt}")));
    }
    let mut stepper = Stepper::new(grid, params);
    let (l, s) = stepper.try_step(state.t, &state.l, &state.s, dt, tolerances::POSITIVITY_TOL)?;
    Ok(Snapshot::unchecked(state.t + dt, l, s))
}

#[allow(clippy::too_many_arguments)]
fn advance(
    stepper: &mut Stepper,
    l: &mut Field,
    s: &mut Field,
    t: f64,
    dt: f64,
    positivity_tol: f64,
    stats: &mut EvolveStats,
    levels_left: usize,
) -> Result<()> {
    match stepper.try_step(t, l, s, dt, positivity_tol) {
        Ok((l_new, s_new)) => {
            stats.steps += 1;
            stats.min_l_seen = stats.min_l_seen.min(l_new.min());
            stats.max_s_seen = stats.max_s_seen.max(s_new.max());
            *l = l_new;
            *s = s_new;
            Ok(())
        }
        Err(Error::StepRejected { .. }) if levels_left > 0 => {
            stats.rejected += 1;
            let half = 0.5 * dt;
            advance(stepper, l, s, t, half, positivity_tol, stats, levels_left - 1)?;
            advance(stepper, l, s, t + half, half, positivity_tol, stats, levels_left - 1)
        }
        Err(Error::StepRejected { .. }) => {
            Err(Error::StepSizeUnderflow { t, halvings: tolerances::MAX_DT_HALVINGS })
        }
        Err(e) => Err(e),
    }
}

/// Sorted emission schedule: t = 0, the requested times, and t_end, with
/// near-duplicates collapsed so the schedule is strictly increasing.
fn emission_times(t_end: f64, output_times: &[f64]) -> Result<Vec<f64>> {
    let mut times = vec![0.0, t_end];
    for &t in output_times {
        if !(t.is_finite() && (0.0..=t_end).contains(&t)) {
            return Err(Error::Param(format!("output time {t} outside [0, {t_end}]")));
        }
        times.push(t);
    }
    times.sort_by(|a, b| a.partial_cmp(b).expect("times are finite"));
    times.dedup_by(|b, a| *b - *a <= 1e-12 * b.abs().max(1.0));
    Ok(times)
}

/// Integrates from (l0, s0) to t_end with base step dt, invoking `observe`
/// on the state after every accepted step. The flag marks scheduled output
/// times (t = 0, the requested `output_times`, and t_end; exact landing: the
/// last step before an output time is shortened to hit it); the in-between
/// states let diagnostics accumulate time integrals at step resolution.
/// Snapshots are borrowed by the observer and not retained, so memory stays
/// flat for large grids.
#[allow(clippy::too_many_arguments)]
pub fn integrate_with(
    grid: &Grid,
    params: &ModelParams,
    l0: &Field,
    s0: &Field,
    t_end: f64,
    dt: f64,
    output_times: &[f64],
    positivity_tol: f64,
    mut observe: impl FnMut(&Snapshot, bool) -> Result<()>,
) -> Result<EvolveStats> {
    if !(positivity_tol >= 0.0) {
        return Err(Error::Param(format!("positivity_tol must be >= 0, got {positivity_tol}")));
    }
    if l0.len() != grid.dof_count() || s0.len() != grid.dof_count() {
        return Err(Error::Field("initial fields do not match the grid".into()));
    }
    if l0.min() < 0.0 {
        return Err(Error::Field(format!("initial l must be nonnegative, min is {:e}", l0.min())));
    }
    if s0.min() < 0.0 || s0.max() >= 1.0 {
        return Err(Error::Field(format!(
            "initial s must lie in [0, 1), range is [{:e}, {:e}]",
            s0.min(),
            s0.max()
        )));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Param(format!("t_end must be >= 0, got {t_end}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Param(format!("dt must be positive, got {dt}")));
    }
    let schedule = emission_times(t_end, output_times)?;
    let mut stepper = Stepper::new(grid, params);
    let mut l = l0.clone();
    let mut s = s0.clone();
    let mut stats = EvolveStats { steps: 0, rejected: 0, min_l_seen: l.min(), max_s_seen: s.max() };
    observe(&Snapshot::unchecked(0.0, l.clone(), s.clone()), true)?;
    for pair in schedule.windows(2) {
        let (ta, tb) = (pair[0], pair[1]);
        let span = tb - ta;
        let n_full = (span / dt + 1e-9).floor() as u64;
        let mut rem = span - n_full as f64 * dt;
        if rem <= dt * 1e-9 {
            rem = 0.0;
        }
        for k in 0..n_full {
            let t = ta + k as f64 * dt;
            advance(
                &mut stepper,
                &mut l,
                &mut s,
                t,
                dt,
                positivity_tol,
                &mut stats,
                tolerances::MAX_DT_HALVINGS,
            )?;
            // The interval's final state is reported below, at exactly tb.
            if rem > 0.0 || k + 1 < n_full {
                let t_now = ta + (k + 1) as f64 * dt;
                observe(&Snapshot::unchecked(t_now, l.clone(), s.clone()), false)?;
            }
        }
        if rem > 0.0 {
            advance(
                &mut stepper,
                &mut l,
                &mut s,
                tb - rem,
                rem,
                positivity_tol,
                &mut stats,
                tolerances::MAX_DT_HALVINGS,
            )?;
        }
        observe(&Snapshot::unchecked(tb, l.clone(), s.clone()), true)?;
    }
    Ok(stats)
}

/// As `integrate_with`, but collects the snapshots into a [`Trajectory`].
pub fn integrate(
    grid: &Grid,
    params: &ModelParams,
    l0: &Field,
    s0: &Field,
    t_end: f64,
    dt: f64,
    output_times: &[f64],
) -> Result<Trajectory> {
    let mut snapshots = Vec::new();
    let stats = integrate_with(
        grid,
        params,
        l0,
        s0,
        t_end,
        dt,
        output_times,
        tolerances::POSITIVITY_TOL,
        |snap, is_output| {
            if is_output {
                snapshots.push(snap.clone());
            }
            Ok(())
        },
    )?;
    debug_assert!(stats.min_l_seen >= -tolerances::POSITIVITY_TOL);
    Ok(Trajectory {
        snapshots,
        params: params.clone(),
        min_l_seen: stats.min_l_seen,
        max_s_seen: stats.max_s_seen,
    })
}

/// Reconstruction of s from a sampled l path and the receptor ODE alone,
/// independent of the stepper's splitting.
#[derive(Debug, Clone)]
pub struct SExplicitSolution {
    pub times: Vec<f64>,
    pub s: Vec<Field>,
    /// Sup over nodes of the integrating factor exp(-int_0^t (delta+eps+l)),
    /// which is bounded by e^{-(delta+eps)t} whenever l >= 0.
    pub factor_sup: Vec<f64>,
}

/// Integrates s' = -(delta+eps+l(t))s + l(t) nodewise by variation of
/// constants, given l sampled at `times`. In the deviation variables
/// z1 = l - l_inf, z2 = s - s_inf the ODE reads z2' = -a(t) z2 + (1-s_inf) z1
/// with a = delta + eps + l, so over one sample interval
///     z2(t_{k+1}) = E z2(t_k) + (1-s_inf) * (dt/2) * (E z1(t_k) + z1(t_{k+1})),
/// E = exp(-(dt/2)(a_k + a_{k+1})): trapezoid both in the exponent and on the
/// forcing. The kernel must be the two-time factor exp(-int_tau^t a); a
/// stationary convolution kernel A(t - tau) is exact only when a is constant
/// in time.
pub fn s_explicit_solution(
    grid: &Grid,
    times: &[f64],
    l_path: &[Field],
    s0: &Field,
    steady: &SteadyState,
    params: &ModelParams,
) -> Result<SExplicitSolution> {
    if times.len() != l_path.len() {
        return Err(Error::Param(format!(
            "time grid and l samples disagree: {} times vs {} fields",
            times.len(),
            l_path.len()
        )));
    }
    if times.is_empty() {
        return Err(Error::Param("empty sample path".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Param("sample times must be strictly increasing".into()));
    }
    let n = grid.dof_count();
    if s0.len() != n || l_path.iter().any(|f| f.len() != n) || steady.l_inf.len() != n {
        return Err(Error::Field("sampled fields do not match the grid".into()));
    }
    let de = params.delta + params.epsilon;
    let l_inf = steady.l_inf.as_slice();
    let s_inf = steady.s_inf.as_slice();
    let mut z2: Vec<f64> = (0..n).map(|i| s0[i] - s_inf[i]).collect();
    let mut ln_factor = vec![0.0f64; n];
    let mut s_out = Vec::with_capacity(times.len());
    let mut factor_sup = Vec::with_capacity(times.len());
    s_out.push(s0.clone());
    factor_sup.push(1.0);
    for k in 0..times.len() - 1 {
        let dt = times[k + 1] - times[k];
        let (lk, lk1) = (&l_path[k], &l_path[k + 1]);
        let mut s_next = vec![0.0; n];
        let mut ln_max = f64::NEG_INFINITY;
        for i in 0..n {
            let g = 0.5 * dt * (de + lk[i] + de + lk1[i]);
            let e = (-g).exp();
            let z1k = lk[i] - l_inf[i];
            let z1k1 = lk1[i] - l_inf[i];
            z2[i] = e * z2[i] + (1.0 - s_inf[i]) * 0.5 * dt * (e * z1k + z1k1);
            ln_factor[i] -= g;
            ln_max = ln_max.max(ln_factor[i]);
            s_next[i] = z2[i] + s_inf[i];
        }
        s_out.push(Field::from_values(grid, s_next)?);
        factor_sup.push(ln_max.exp());
    }
    Ok(SExplicitSolution { times: times.to_vec(), s: s_out, factor_sup })
}

/// Residual of the integrated balance law d/dt int(l+s) = influx - Dirichlet
/// outflow - eps*int(s), one value per interior snapshot, centered time
/// differences against the instantaneous right side. Interior edges cancel in
/// 1'Al, so cell_volume * sum(A l) is exactly the discrete outflow through
/// the Dirichlet part.
pub fn mass_balance_residual(grid: &Grid, traj: &Trajectory) -> Result<Vec<f64>> {
    let snaps = &traj.snapshots;
    if snaps.len() < 3 {
        return Err(Error::Param(format!(
            "mass balance needs at least 3 snapshots, got {}",
            snaps.len()
        )));
    }
    let dt = snaps[1].t - snaps[0].t;
    for w in snaps.windows(2) {
        if ((w[1].t - w[0].t) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(Error::Param("mass balance needs uniform output spacing".into()));
        }
    }
    let a = laplacian_operator(grid, traj.params.diffusivity);
    let influx = grid.integrate_boundary(&traj.params.nu);
    let vol = grid.cell_volume();
    let eps = traj.params.epsilon;
    let mass: Vec<f64> = snaps
        .iter()
        .map(|sn| grid.integrate_volume(&sn.l) + grid.integrate_volume(&sn.s))
        .collect();
    Ok((1..snaps.len() - 1)
        .map(|k| {
            let outflow = vol * a.mul_vec(snaps[k].l.as_slice()).iter().sum::<f64>();
            let rate = (mass[k + 1] - mass[k - 1]) / (2.0 * dt);
            rate - (influx - outflow - eps * grid.integrate_volume(&snaps[k].s))
        })
        .collect())
}
