//! Scenario orchestration: the pipeline eigenvalue -> decay constant ->
//! steady state -> time integration -> diagnostics series -> rate fits,
//! with CSV emission and a run manifest.
//!
//! The manifest is written on every run, success or failure, and echoes the
//! full configuration, so any result directory can be rerun from its
//! manifest alone. All numeric output is deterministic; only the wall times
//! in the manifest differ between reruns.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::ScenarioConfig;
use crate::csv_io::{atomic_write, write_field_csv, write_series_csv};
use crate::error::{Error, Result};
use crate::evolution::{self, EvolveStats, Snapshot};
use crate::lyapunov::{
    fit_rates, series_energy_residuals, FitOutcome, LyapunovSeries, RateReport, SeriesBuilder,
};
use crate::spectral::{compute_chi, smallest_eigenvalue, EigenResult};
use crate::steady::{picard_steady, SteadyState};
use crate::tolerances;

/// How far down the pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Eigenvalue and decay constant only.
    Eig,
    /// Through the steady state.
    Steady,
    /// Through time integration and series emission.
    Evolve,
    /// Everything, plus the pass/fail checks.
    Verify,
}

impl RunMode {
    fn name(self) -> &'static str {
        match self {
            RunMode::Eig => "eig",
            RunMode::Steady => "steady",
            RunMode::Evolve => "evolve",
            RunMode::Verify => "verify",
        }
    }
}

/// One verification line: a named predicate over the finished run.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug)]
pub struct RunReport {
    pub lambda1: f64,
    pub chi: f64,
    pub eigen: EigenResult,
    pub steady: Option<SteadyState>,
    pub stats: Option<EvolveStats>,
    pub series: Option<LyapunovSeries>,
    pub rates: Option<RateReport>,
    pub checks: Vec<Check>,
    /// Every file emitted, manifest last.
    pub files: Vec<PathBuf>,
}

impl RunReport {
    /// True when no check failed (vacuously true when none ran).
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Runs the pipeline prefix selected by `mode`, emitting CSVs and the
/// manifest into `out_dir`. A `t_end` of zero stops after the steady state
/// regardless of mode: there is no trajectory to integrate.
pub fn run_scenario(cfg: &ScenarioConfig, mode: RunMode, out_dir: &Path) -> Result<RunReport> {
    let mut man = Manifest::new(cfg, mode);
    let result = run_inner(cfg, mode, out_dir, &mut man);
    match &result {
        Ok(report) => man.finish_ok(report),
        Err(e) => man.finish_err(e),
    }
    let manifest_path = out_dir.join("manifest.txt");
    atomic_write(&manifest_path, &man.text)?;
    result.map(|mut report| {
        report.files.push(manifest_path);
        report
    })
}

fn emit(
    files: &mut Vec<PathBuf>,
    out_dir: &Path,
    name: &str,
    write: impl FnOnce(&Path) -> Result<()>,
) -> Result<()> {
    let path = out_dir.join(name);
    write(&path).map_err(|e| e.in_phase("output"))?;
    files.push(path);
    Ok(())
}

fn run_inner(
    cfg: &ScenarioConfig,
    mode: RunMode,
    out_dir: &Path,
    man: &mut Manifest,
) -> Result<RunReport> {
    let phase = |name: &'static str| move |e: Error| e.in_phase(name);

    let grid = cfg.build_grid().map_err(phase("setup"))?;
    let params = cfg.build_params(&grid).map_err(phase("setup"))?;

    let t = Instant::now();
    let eigen = smallest_eigenvalue(&grid, cfg.eig_tol).map_err(phase("eigensolve"))?;
    let chi = compute_chi(cfg.diffusivity, eigen.lambda1, cfg.delta, cfg.epsilon)
        .map_err(phase("eigensolve"))?;
    man.timing("eigensolve_seconds", t.elapsed().as_secs_f64());

    let mut files = Vec::new();
    let mut steady = None;
    let mut stats = None;
    let mut series = None;
    let mut rates = None;
    let mut checks = Vec::new();

    emit(&mut files, out_dir, "eigenfield.csv", |p| {
        write_field_csv(p, &grid, &eigen.eigenfield, "phi1")
    })?;

    'pipeline: {
        if mode == RunMode::Eig {
            break 'pipeline;
        }

        let t = Instant::now();
        let st = picard_steady(
            &grid,
            &params.nu,
            cfg.diffusivity,
            cfg.delta,
            cfg.epsilon,
            cfg.picard_tol,
            tolerances::PICARD_MAX_ITER,
        )
        .map_err(phase("steady state"))?;
        man.timing("steady_seconds", t.elapsed().as_secs_f64());

        emit(&mut files, out_dir, "steady_l.csv", |p| {
            write_field_csv(p, &grid, &st.l_inf, "l_inf")
        })?;
        emit(&mut files, out_dir, "steady_s.csv", |p| {
            write_field_csv(p, &grid, &st.s_inf, "s_inf")
        })?;

        if mode == RunMode::Steady || cfg.t_end == 0.0 {
            steady = Some(st);
            break 'pipeline;
        }

        let t = Instant::now();
        let l0 = cfg
            .initial_field(&grid, &cfg.initial_l, Some(&st), false)
            .map_err(phase("evolution"))?;
        let s0 = cfg
            .initial_field(&grid, &cfg.initial_s, Some(&st), true)
            .map_err(phase("evolution"))?;
        let mut builder =
            SeriesBuilder::new(&grid, &st, &params, chi).map_err(phase("evolution"))?;
        let mut last: Option<Snapshot> = None;
        let run_stats = evolution::integrate_with(
            &grid,
            &params,
            &l0,
            &s0,
            cfg.t_end,
            cfg.dt,
            &cfg.output_schedule(),
            cfg.positivity_tol,
            |snap, is_output| {
                if is_output {
                    builder.push(snap)?;
                    last = Some(snap.clone());
                } else {
                    builder.observe_step(snap)?;
                }
                Ok(())
            },
        )
        .map_err(phase("evolution"))?;
        let ser = builder.finish();
        let last = last.expect("integration emits at least the initial snapshot");
        man.timing("evolve_seconds", t.elapsed().as_secs_f64());

        emit(&mut files, out_dir, "series.csv", |p| write_series_csv(p, &ser))?;
        emit(&mut files, out_dir, "final_l.csv", |p| write_field_csv(p, &grid, &last.l, "l"))?;
        emit(&mut files, out_dir, "final_s.csv", |p| write_field_csv(p, &grid, &last.s, "s"))?;

        if mode == RunMode::Verify {
            let t = Instant::now();
            let rate_report = fit_rates(&ser, chi, cfg.rate_window(), cfg.rate_margin)
                .map_err(phase("rate fit"))?;
            man.timing("rate_fit_seconds", t.elapsed().as_secs_f64());
            checks = run_checks(cfg, &run_stats, &ser, &rate_report);
            rates = Some(rate_report);
        }

        steady = Some(st);
        stats = Some(run_stats);
        series = Some(ser);
    }

    Ok(RunReport {
        lambda1: eigen.lambda1,
        chi,
        eigen,
        steady,
        stats,
        series,
        rates,
        checks,
        files,
    })
}

fn run_checks(
    cfg: &ScenarioConfig,
    stats: &EvolveStats,
    series: &LyapunovSeries,
    rates: &RateReport,
) -> Vec<Check> {
    let mut checks = Vec::new();
    let mut push = |name, pass, detail| checks.push(Check { name, pass, detail });

    push(
        "nonnegativity",
        stats.min_l_seen >= -cfg.positivity_tol,
        format!("min l over the run = {:.3e}, floor -{:.1e}", stats.min_l_seen, cfg.positivity_tol),
    );
    push(
        "fraction_bounds",
        stats.max_s_seen <= 1.0 - tolerances::S_BOUND_MARGIN,
        format!(
            "max s over the run = {:.12}, bound 1 - {:.1e}",
            stats.max_s_seen,
            tolerances::S_BOUND_MARGIN
        ),
    );

    let worst_energy = series_energy_residuals(series).into_iter().fold(0.0_f64, f64::max);
    push(
        "energy_identity",
        worst_energy <= tolerances::ENERGY_RESIDUAL_MAX,
        format!(
            "worst relative residual = {worst_energy:.3e}, budget {:.1e}",
            tolerances::ENERGY_RESIDUAL_MAX
        ),
    );

    // chi * Lambda <= D_Lambda, with the configured slack. At equilibrium both
    // sides vanish; that counts as satisfied.
    let mut worst_ratio = 0.0_f64;
    let mut gap_ok = true;
    for k in 0..series.len() {
        let lhs = series.chi * series.lambda[k];
        let rhs = series.d_lambda[k];
        if rhs > 0.0 {
            worst_ratio = worst_ratio.max(lhs / rhs);
        }
        if lhs > rhs * (1.0 + tolerances::SPECTRAL_GAP_SLACK) {
            gap_ok = false;
        }
    }
    push(
        "spectral_gap",
        gap_ok,
        format!(
            "worst chi*Lambda / D_Lambda = {worst_ratio:.6}, allowed {}",
            1.0 + tolerances::SPECTRAL_GAP_SLACK
        ),
    );

    push(
        "decay_envelope",
        rates.envelope_pass,
        format!("worst deviation / envelope = {:.6}", rates.envelope_worst),
    );

    let mut detail = String::new();
    for fit in &rates.fits {
        if !detail.is_empty() {
            detail.push_str(", ");
        }
        detail.push_str(fit.label);
        match fit.outcome {
            FitOutcome::Fitted { rate, .. } => {
                detail.push_str(&format!(" {rate:.4}"));
            }
            FitOutcome::BelowFloor => detail.push_str(" (below floor)"),
        }
    }
    push(
        "decay_rates",
        rates.fits.iter().all(|f| f.passes()),
        format!("threshold {:.4}: {detail}", rates.threshold),
    );

    checks
}

/// Accumulates the manifest text; rendered and written even when a phase
/// fails.
struct Manifest {
    text: String,
    timings: String,
}

impl Manifest {
    fn new(cfg: &ScenarioConfig, mode: RunMode) -> Self {
        let mut text = String::new();
        text.push_str(&format!(
            "# morphsim {} run manifest\nmode = {}\n",
            env!("CARGO_PKG_VERSION"),
            mode.name()
        ));
        text.push_str("\n## config\n");
        text.push_str(&cfg.canonical());
        text.push_str("\n## tolerances in force\n");
        for (k, v) in [
            ("picard_tol", cfg.picard_tol),
            ("eig_tol", cfg.eig_tol),
            ("positivity_tol", cfg.positivity_tol),
            ("rate_margin", cfg.rate_margin),
            ("energy_residual_max", tolerances::ENERGY_RESIDUAL_MAX),
            ("spectral_gap_slack", tolerances::SPECTRAL_GAP_SLACK),
            ("series_floor", tolerances::SERIES_FLOOR),
            ("s_bound_margin", tolerances::S_BOUND_MARGIN),
        ] {
            text.push_str(&format!("{k} = {v}\n"));
        }
        let (wa, wb) = cfg.rate_window();
        text.push_str(&format!("rate_window = {wa}, {wb}\n"));
        Manifest { text, timings: String::new() }
    }

    fn timing(&mut self, key: &str, seconds: f64) {
        self.timings.push_str(&format!("{key} = {seconds:.3}\n"));
    }

    fn finish_ok(&mut self, report: &RunReport) {
        let timings = std::mem::take(&mut self.timings);
        self.text.push_str("\n## timing\n");
        self.text.push_str(&timings);
        self.text.push_str("\n## results\n");
        let mut kv = |k: &str, v: String| self.text.push_str(&format!("{k} = {v}\n"));
        kv("lambda1", format!("{:.16e}", report.lambda1));
        kv("chi", format!("{:.16e}", report.chi));
        kv("eig_iterations", report.eigen.iterations.to_string());
        kv("eig_residual", format!("{:.3e}", report.eigen.residual));
        if let Some(st) = &report.steady {
            kv("picard_iterations", st.picard_iterations.to_string());
            kv("picard_final_update", format!("{:.3e}", st.final_update_norm));
            kv("steady_l_max", format!("{:.16e}", st.l_inf.max()));
        }
        if let Some(stats) = &report.stats {
            kv("steps", stats.steps.to_string());
            kv("rejected_steps", stats.rejected.to_string());
            kv("min_l_seen", format!("{:.3e}", stats.min_l_seen));
            kv("max_s_seen", format!("{:.12}", stats.max_s_seen));
        }
        if let Some(series) = &report.series {
            kv("output_rows", series.len().to_string());
            kv("lambda_initial", format!("{:.16e}", series.lambda[0]));
            kv("lambda_final", format!("{:.16e}", series.lambda[series.len() - 1]));
        }
        if !report.checks.is_empty() {
            self.text.push_str("\n## checks\n");
            for c in &report.checks {
                self.text.push_str(&format!(
                    "{} = {} ({})\n",
                    c.name,
                    if c.pass { "pass" } else { "FAIL" },
                    c.detail
                ));
            }
        }
        self.text.push_str(&format!(
            "\noutcome = {}\n",
            if report.all_pass() { "pass" } else { "fail" }
        ));
    }

    fn finish_err(&mut self, e: &Error) {
        let timings = std::mem::take(&mut self.timings);
        self.text.push_str("\n## timing\n");
        self.text.push_str(&timings);
        self.text.push_str(&format!("\noutcome = error\nerror = {e}\n"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, NuSpec};

    fn outdir() -> PathBuf {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().to_path_buf();
        std::mem::forget(dir);
        path
    }

    #[test]
    fn eig_mode_emits_eigenfield_and_manifest() {
        let cfg = parse_config("grid.nodes_x = 16\n").unwrap();
        let dir = outdir();
        let report = run_scenario(&cfg, RunMode::Eig, &dir).unwrap();
        assert!(report.all_pass());
        assert!(dir.join("eigenfield.csv").exists());
        assert!(!dir.join("steady_l.csv").exists());
        let man = std::fs::read_to_string(dir.join("manifest.txt")).unwrap();
        assert!(man.contains("mode = eig"), "{man}");
        assert!(man.contains("lambda1 = "), "{man}");
        assert!(man.contains("outcome = pass"), "{man}");
        assert!(man.contains("nodes_x = 16"), "{man}");
    }

    #[test]
    fn steady_mode_stops_before_integration() {
        let cfg = parse_config("grid.nodes_x = 16\n").unwrap();
        let dir = outdir();
        let report = run_scenario(&cfg, RunMode::Steady, &dir).unwrap();
        assert!(report.steady.is_some());
        assert!(report.stats.is_none());
        assert!(dir.join("steady_l.csv").exists());
        assert!(dir.join("steady_s.csv").exists());
        assert!(!dir.join("series.csv").exists());
    }

    #[test]
    fn t_end_zero_emits_no_trajectory_files() {
        let cfg = parse_config("grid.nodes_x = 16\ntime.t_end = 0\n").unwrap();
        let dir = outdir();
        let report = run_scenario(&cfg, RunMode::Verify, &dir).unwrap();
        assert!(report.all_pass());
        assert!(report.checks.is_empty());
        assert!(dir.join("steady_l.csv").exists());
        assert!(!dir.join("series.csv").exists());
        assert!(!dir.join("final_l.csv").exists());
    }

    #[test]
    fn verify_passes_on_a_small_default_style_run() {
        let cfg = parse_config(
            "grid.nodes_x = 48\ntime.t_end = 1.5\ntime.dt = 1e-3\ntime.output_stride = 10\n\
             tolerances.rate_window = 0.5, 1.5\n",
        )
        .unwrap();
        let dir = outdir();
        let report = run_scenario(&cfg, RunMode::Verify, &dir).unwrap();
        assert_eq!(report.checks.len(), 6);
        for c in &report.checks {
            assert!(c.pass, "{}: {}", c.name, c.detail);
        }
        assert!(dir.join("series.csv").exists());
        assert!(dir.join("final_l.csv").exists());
        assert!(dir.join("final_s.csv").exists());
        let man = std::fs::read_to_string(dir.join("manifest.txt")).unwrap();
        assert!(man.contains("outcome = pass"), "{man}");
        assert!(man.contains("decay_rates = pass"), "{man}");
    }

    #[test]
    fn reruns_are_byte_identical() {
        let cfg = parse_config(
            "grid.nodes_x = 16\ntime.t_end = 0.5\ntime.dt = 5e-3\ntime.output_stride = 10\n",
        )
        .unwrap();
        let (da, db) = (outdir(), outdir());
        run_scenario(&cfg, RunMode::Evolve, &da).unwrap();
        run_scenario(&cfg, RunMode::Evolve, &db).unwrap();
        for name in ["eigenfield.csv", "steady_l.csv", "steady_s.csv", "series.csv", "final_l.csv"]
        {
            let a = std::fs::read(da.join(name)).unwrap();
            let b = std::fs::read(db.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between reruns");
        }
    }

    #[test]
    fn failures_still_write_the_manifest_with_the_phase() {
        let cfg = ScenarioConfig {
            // The 1D grid has one influx node, so a two-entry table must fail.
            nu: NuSpec::Table(vec![1.0, 2.0]),
            ..ScenarioConfig::default()
        };
        let dir = outdir();
        let err = run_scenario(&cfg, RunMode::Eig, &dir).unwrap_err();
        assert!(matches!(err, Error::Phase { phase: "setup", .. }), "{err:?}");
        let man = std::fs::read_to_string(dir.join("manifest.txt")).unwrap();
        assert!(man.contains("outcome = error"), "{man}");
        assert!(man.contains("setup"), "{man}");
        assert!(!dir.join("manifest.txt.partial").exists());
    }

    #[test]
    fn two_dimensional_verify_smoke() {
        // The energy-identity defect scales with dt * lambda1, so the faster
        // 2D dynamics need a smaller step than the 1D default for the same
        // budget.
        let cfg = parse_config(
            "[grid]\ndimension = 2\nnodes_x = 8\n\
             [time]\nt_end = 0.3\ndt = 1e-4\noutput_stride = 100\n\
             [tolerances]\nrate_window = 0.15, 0.3\n",
        )
        .unwrap();
        let dir = outdir();
        let report = run_scenario(&cfg, RunMode::Verify, &dir).unwrap();
        for c in &report.checks {
            assert!(c.pass, "{}: {}", c.name, c.detail);
        }
        let text = std::fs::read_to_string(dir.join("final_l.csv")).unwrap();
        assert!(text.starts_with("x,y,l\n"));
    }
}
