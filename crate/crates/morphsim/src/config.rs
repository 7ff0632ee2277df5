//! Strict flat `key = value` configuration with `[section]` headers.
//!
//! Every key is optional; the empty config is the default scenario (unit
//! interval, influx 1 on the west face, absorbing east face, D = delta =
//! eps = 1, N = 256, dt = 1e-3, t_end = 40). Unknown keys, duplicate keys,
//! and out-of-range values are hard errors carrying the line number: a typo
//! must never silently fall back to a default.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::evolution::ModelParams;
use crate::mesh::{build_grid, BcKind, BoundaryData, Face, Field, Grid, GridSpec};
use crate::steady::SteadyState;
use crate::tolerances;

/// Initial data for one of the two fields.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Zero,
    Constant(f64),
    /// Start at the computed steady profile.
    Steady,
    /// One value per free node, lexicographic order.
    Table(Vec<f64>),
}

/// Influx on the Neumann part of the boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum NuSpec {
    Constant(f64),
    /// One value per free Neumann node, lexicographic order.
    Table(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub grid: GridSpec,
    pub diffusivity: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub p: f64,
    pub nu: NuSpec,
    pub initial_l: InitSpec,
    pub initial_s: InitSpec,
    pub t_end: f64,
    pub dt: f64,
    /// Every `output_stride`-th step is an output time (ignored when explicit
    /// `output_times` are given).
    pub output_stride: usize,
    pub output_times: Option<Vec<f64>>,
    pub picard_tol: f64,
    pub eig_tol: f64,
    pub positivity_tol: f64,
    pub rate_margin: f64,
    /// Tail window for the rate fits; defaults to [t_end/2, t_end].
    pub rate_window: Option<(f64, f64)>,
    pub output_dir: String,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            grid: GridSpec::interval(1.0, 256, BcKind::Neumann, BcKind::Dirichlet),
            diffusivity: 1.0,
            delta: 1.0,
            epsilon: 1.0,
            p: 4.0,
            nu: NuSpec::Constant(1.0),
            initial_l: InitSpec::Zero,
            initial_s: InitSpec::Zero,
            t_end: 40.0,
            dt: 1e-3,
            output_stride: 10,
            output_times: None,
            picard_tol: tolerances::PICARD_TOL,
            eig_tol: tolerances::EIG_TOL,
            positivity_tol: tolerances::POSITIVITY_TOL,
            rate_margin: tolerances::RATE_MARGIN,
            rate_window: None,
            output_dir: "out".into(),
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "grid.dimension",
    "grid.extent_x",
    "grid.extent_y",
    "grid.nodes_x",
    "grid.nodes_y",
    "grid.face_west",
    "grid.face_east",
    "grid.face_south",
    "grid.face_north",
    "params.diffusivity",
    "params.delta",
    "params.epsilon",
    "params.p",
    "nu.value",
    "nu.table",
    "initial.l",
    "initial.s",
    "time.t_end",
    "time.dt",
    "time.output_stride",
    "time.output_times",
    "tolerances.picard_tol",
    "tolerances.eig_tol",
    "tolerances.positivity_tol",
    "tolerances.rate_margin",
    "tolerances.rate_window",
    "output.dir",
];

struct Raw {
    entries: BTreeMap<String, (usize, String)>,
}

impl Raw {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn f64_at(
        &mut self,
        key: &str,
        check: impl Fn(f64) -> Option<&'static str>,
    ) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, raw)) => {
                let v: f64 = raw.parse().map_err(|_| Error::Config {
                    line,
                    msg: format!("`{key}`: expected a number, got `{raw}`"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Config {
                        line,
                        msg: format!("`{key}`: value must be finite"),
                    });
                }
                if let Some(constraint) = check(v) {
                    return Err(Error::Config {
                        line,
                        msg: format!("`{key}` = {v} violates: {constraint}"),
                    });
                }
                Ok(Some(v))
            }
        }
    }

    fn usize_at(&mut self, key: &str, min: usize) -> Result<Option<usize>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, raw)) => {
                let v: usize = raw.parse().map_err(|_| Error::Config {
                    line,
                    msg: format!("`{key}`: expected a nonnegative integer, got `{raw}`"),
                })?;
                if v < min {
                    return Err(Error::Config {
                        line,
                        msg: format!("`{key}` = {v} must be at least {min}"),
                    });
                }
                Ok(Some(v))
            }
        }
    }

    fn face_at(&mut self, key: &str) -> Result<Option<BcKind>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, raw)) => match raw.as_str() {
                "neumann" => Ok(Some(BcKind::Neumann)),
                "dirichlet" => Ok(Some(BcKind::Dirichlet)),
                other => Err(Error::Config {
                    line,
                    msg: format!("`{key}`: expected `neumann` or `dirichlet`, got `{other}`"),
                }),
            },
        }
    }
}

fn parse_float_list(key: &str, line: usize, raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|tok| {
            let tok = tok.trim();
            tok.parse::<f64>().map_err(|_| Error::Config {
                line,
                msg: format!("`{key}`: `{tok}` is not a number"),
            })
        })
        .collect()
}

fn parse_init(key: &str, line: usize, raw: &str, is_s: bool) -> Result<InitSpec> {
    let spec = match raw {
        "zero" => InitSpec::Zero,
        "steady" => InitSpec::Steady,
        _ => {
            if let Some(v) = raw.strip_prefix("constant:") {
                let c: f64 = v.trim().parse().map_err(|_| Error::Config {
                    line,
                    msg: format!("`{key}`: `{v}` is not a number"),
                })?;
                InitSpec::Constant(c)
            } else if let Some(v) = raw.strip_prefix("table:") {
                InitSpec::Table(parse_float_list(key, line, v)?)
            } else {
                return Err(Error::Config {
                    line,
                    msg: format!(
                        "`{key}`: expected zero | steady | constant:<v> | table:<v,..>, got `{raw}`"
                    ),
                });
            }
        }
    };
    let bad = |msg: String| Err(Error::Config { line, msg });
    match &spec {
        InitSpec::Constant(c) if is_s && !(0.0..1.0).contains(c) => {
            bad(format!("`{key}` = {c} violates: s must lie in [0, 1)"))
        }
        InitSpec::Constant(c) if !is_s && *c < 0.0 => {
            bad(format!("`{key}` = {c} violates: l must be nonnegative"))
        }
        InitSpec::Table(vs) if is_s && vs.iter().any(|v| !(0.0..1.0).contains(v)) => {
            bad(format!("`{key}`: every s entry must lie in [0, 1)"))
        }
        InitSpec::Table(vs) if !is_s && vs.iter().any(|v| *v < 0.0) => {
            bad(format!("`{key}`: every l entry must be nonnegative"))
        }
        _ => Ok(spec),
    }
}

/// Parses and fully validates a configuration. Cross-key constraints are
/// checked too (the grid is built, parameters constructed), so a returned
/// config cannot fail those validations later.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut section = String::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return Err(Error::Config {
                    line: lineno,
                    msg: format!("malformed section `{body}`"),
                });
            };
            section = name.trim().to_string();
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(Error::Config {
                line: lineno,
                msg: format!("expected `key = value`, got `{body}`"),
            });
        };
        let key = key.trim();
        let full = if key.contains('.') || section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        if !KNOWN_KEYS.contains(&full.as_str()) {
            return Err(Error::Config { line: lineno, msg: format!("unknown key `{full}`") });
        }
        if entries.insert(full.clone(), (lineno, value.trim().to_string())).is_some() {
            return Err(Error::Config { line: lineno, msg: format!("duplicate key `{full}`") });
        }
    }

    let mut raw = Raw { entries };
    let mut cfg = ScenarioConfig::default();

    let positive = |v: f64| (v <= 0.0).then_some("value must be positive");
    let nonnegative = |v: f64| (v < 0.0).then_some("value must be nonnegative");

    let dimension = raw.usize_at("grid.dimension", 1)?.unwrap_or(1);
    if dimension > 2 {
        return Err(Error::ConfigGeneral(format!(
            "`grid.dimension` must be 1 or 2, got {dimension}"
        )));
    }
    let extent_x = raw.f64_at("grid.extent_x", positive)?.unwrap_or(1.0);
    let nodes_x = raw.usize_at("grid.nodes_x", 3)?.unwrap_or(256);
    let west = raw.face_at("grid.face_west")?.unwrap_or(BcKind::Neumann);
    let east = raw.face_at("grid.face_east")?.unwrap_or(BcKind::Dirichlet);
    let planar_keys = ["grid.extent_y", "grid.nodes_y", "grid.face_south", "grid.face_north"];
    if dimension == 1 {
        for key in planar_keys {
            if let Some((line, _)) = raw.take(key) {
                return Err(Error::Config {
                    line,
                    msg: format!("`{key}` requires grid.dimension = 2"),
                });
            }
        }
        cfg.grid = GridSpec::interval(extent_x, nodes_x, west, east);
    } else {
        let extent_y = raw.f64_at("grid.extent_y", positive)?.unwrap_or(1.0);
        let nodes_y = raw.usize_at("grid.nodes_y", 3)?.unwrap_or(nodes_x);
        let south = raw.face_at("grid.face_south")?.unwrap_or(BcKind::Dirichlet);
        let north = raw.face_at("grid.face_north")?.unwrap_or(BcKind::Dirichlet);
        cfg.grid =
            GridSpec::rectangle([extent_x, extent_y], [nodes_x, nodes_y], west, east, south, north);
    }

    if let Some(v) = raw.f64_at("params.diffusivity", positive)? {
        cfg.diffusivity = v;
    }
    if let Some(v) = raw.f64_at("params.delta", positive)? {
        cfg.delta = v;
    }
    if let Some(v) = raw.f64_at("params.epsilon", positive)? {
        cfg.epsilon = v;
    }
    let p_line = raw.entries.get("params.p").map(|e| e.0);
    if let Some(v) = raw.f64_at("params.p", positive)? {
        cfg.p = v;
    }
    if cfg.p <= dimension as f64 {
        let msg =
            format!("`params.p` = {} violates: p must exceed the dimension {dimension}", cfg.p);
        return Err(match p_line {
            Some(line) => Error::Config { line, msg },
            None => Error::ConfigGeneral(msg),
        });
    }

    let nu_value = raw.f64_at("nu.value", nonnegative)?;
    let nu_table = raw.take("nu.table");
    cfg.nu = match (nu_value, nu_table) {
        (Some(_), Some((line, _))) => {
            return Err(Error::Config { line, msg: "`nu.table` conflicts with `nu.value`".into() })
        }
        (Some(v), None) => NuSpec::Constant(v),
        (None, Some((line, rawv))) => {
            let vs = parse_float_list("nu.table", line, &rawv)?;
            if vs.iter().any(|v| *v < 0.0) {
                return Err(Error::Config {
                    line,
                    msg: "`nu.table`: influx values must be nonnegative".into(),
                });
            }
            NuSpec::Table(vs)
        }
        (None, None) => NuSpec::Constant(1.0),
    };

    if let Some((line, rawv)) = raw.take("initial.l") {
        cfg.initial_l = parse_init("initial.l", line, &rawv, false)?;
    }
    if let Some((line, rawv)) = raw.take("initial.s") {
        cfg.initial_s = parse_init("initial.s", line, &rawv, true)?;
    }

    if let Some(v) = raw.f64_at("time.t_end", nonnegative)? {
        cfg.t_end = v;
    }
    if let Some(v) = raw.f64_at("time.dt", positive)? {
        cfg.dt = v;
    }
    if let Some(v) = raw.usize_at("time.output_stride", 1)? {
        cfg.output_stride = v;
    }
    if let Some((line, rawv)) = raw.take("time.output_times") {
        let ts = parse_float_list("time.output_times", line, &rawv)?;
        if ts.iter().any(|t| !t.is_finite() || *t < 0.0 || *t > cfg.t_end) {
            return Err(Error::Config {
                line,
                msg: format!("`time.output_times`: times must lie in [0, {}]", cfg.t_end),
            });
        }
        cfg.output_times = Some(ts);
    }

    for (key, dst) in [
        ("tolerances.picard_tol", &mut cfg.picard_tol),
        ("tolerances.eig_tol", &mut cfg.eig_tol),
        ("tolerances.positivity_tol", &mut cfg.positivity_tol),
    ] {
        if let Some(v) = raw.f64_at(key, positive)? {
            *dst = v;
        }
    }
    if let Some(v) = raw.f64_at("tolerances.rate_margin", |v| {
        (!(0.0..1.0).contains(&v)).then_some("margin must lie in [0, 1)")
    })? {
        cfg.rate_margin = v;
    }
    if let Some((line, rawv)) = raw.take("tolerances.rate_window") {
        let vs = parse_float_list("tolerances.rate_window", line, &rawv)?;
        let [a, b] = vs.as_slice() else {
            return Err(Error::Config {
                line,
                msg: "`tolerances.rate_window`: expected `start, end`".into(),
            });
        };
        if !(0.0 <= *a && a < b) {
            return Err(Error::Config {
                line,
                msg: format!("`tolerances.rate_window`: need 0 <= start < end, got {a}, {b}"),
            });
        }
        cfg.rate_window = Some((*a, *b));
    }

    if let Some((_, dir)) = raw.take("output.dir") {
        cfg.output_dir = dir;
    }

    debug_assert!(raw.entries.is_empty(), "all known keys must be consumed");

    // Cross-checks that need the actual grid: build it once and construct the
    // parameters so any module-level invariant violation surfaces now.
    let grid = cfg.build_grid().map_err(|e| Error::ConfigGeneral(e.to_string()))?;
    cfg.build_params(&grid).map_err(|e| Error::ConfigGeneral(e.to_string()))?;
    for (spec, len, what) in [
        (&cfg.initial_l, grid.dof_count(), "initial.l"),
        (&cfg.initial_s, grid.dof_count(), "initial.s"),
    ] {
        if let InitSpec::Table(vs) = spec {
            if vs.len() != len {
                return Err(Error::ConfigGeneral(format!(
                    "`{what}` table has {} entries, the grid has {len} free nodes",
                    vs.len()
                )));
            }
        }
    }
    Ok(cfg)
}

impl ScenarioConfig {
    pub fn build_grid(&self) -> Result<Grid> {
        build_grid(&self.grid)
    }

    pub fn build_params(&self, grid: &Grid) -> Result<ModelParams> {
        let nu = match &self.nu {
            NuSpec::Constant(v) => BoundaryData::constant(grid, *v)?,
            NuSpec::Table(vs) => BoundaryData::from_values(grid, vs.clone())?,
        };
        ModelParams::new(grid, self.diffusivity, self.delta, self.epsilon, nu, self.p)
    }

    /// Realizes an initial-data spec; `steady` is only consulted for
    /// `InitSpec::Steady`.
    pub fn initial_field(
        &self,
        grid: &Grid,
        spec: &InitSpec,
        steady: Option<&SteadyState>,
        bound_fraction: bool,
    ) -> Result<Field> {
        match spec {
            InitSpec::Zero => Ok(Field::zeros(grid)),
            InitSpec::Constant(c) => Ok(Field::constant(grid, *c)),
            InitSpec::Table(vs) => Field::from_values(grid, vs.clone()),
            InitSpec::Steady => {
                let st = steady.ok_or_else(|| {
                    Error::Param("steady initial data needs the steady state".into())
                })?;
                Ok(if bound_fraction { st.s_inf.clone() } else { st.l_inf.clone() })
            }
        }
    }

    /// Output times for the integrator: explicit list if configured, else
    /// every `output_stride`-th step up to t_end.
    pub fn output_schedule(&self) -> Vec<f64> {
        if let Some(ts) = &self.output_times {
            return ts.clone();
        }
        let spacing = self.dt * self.output_stride as f64;
        let mut out = Vec::new();
        let mut k = 1u64;
        loop {
            let t = k as f64 * spacing;
            if t >= self.t_end * (1.0 - 1e-12) {
                break;
            }
            out.push(t);
            k += 1;
        }
        out
    }

    pub fn rate_window(&self) -> (f64, f64) {
        self.rate_window.unwrap_or((0.5 * self.t_end, self.t_end))
    }

    /// Canonical `key = value` echo of every setting, defaults included.
    /// Parsing the echo reproduces the config, so the manifest doubles as a
    /// rerun recipe.
    pub fn canonical(&self) -> String {
        use std::fmt::Write as _;

        fn join(vs: &[f64]) -> String {
            vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
        }

        let mut out = String::new();
        let dim = self.grid.nodes.len();
        let face = |f: Face| {
            let kind = self
                .grid
                .conditions
                .iter()
                .find(|(g, _)| *g == f)
                .map(|(_, k)| *k)
                .unwrap_or(BcKind::Dirichlet);
            match kind {
                BcKind::Neumann => "neumann",
                BcKind::Dirichlet => "dirichlet",
            }
        };
        let _ = writeln!(out, "[grid]");
        let _ = writeln!(out, "dimension = {dim}");
        let _ = writeln!(out, "extent_x = {}", self.grid.extents[0]);
        let _ = writeln!(out, "nodes_x = {}", self.grid.nodes[0]);
        let _ = writeln!(out, "face_west = {}", face(Face::West));
        let _ = writeln!(out, "face_east = {}", face(Face::East));
        if dim == 2 {
            let _ = writeln!(out, "extent_y = {}", self.grid.extents[1]);
            let _ = writeln!(out, "nodes_y = {}", self.grid.nodes[1]);
            let _ = writeln!(out, "face_south = {}", face(Face::South));
            let _ = writeln!(out, "face_north = {}", face(Face::North));
        }
        let _ = writeln!(out, "[params]");
        let _ = writeln!(out, "diffusivity = {}", self.diffusivity);
        let _ = writeln!(out, "delta = {}", self.delta);
        let _ = writeln!(out, "epsilon = {}", self.epsilon);
        let _ = writeln!(out, "p = {}", self.p);
        let _ = writeln!(out, "[nu]");
        match &self.nu {
            NuSpec::Constant(v) => {
                let _ = writeln!(out, "value = {v}");
            }
            NuSpec::Table(vs) => {
                let _ = writeln!(out, "table = {}", join(vs));
            }
        }
        let _ = writeln!(out, "[initial]");
        for (key, spec) in [("l", &self.initial_l), ("s", &self.initial_s)] {
            match spec {
                InitSpec::Zero => {
                    let _ = writeln!(out, "{key} = zero");
                }
                InitSpec::Steady => {
                    let _ = writeln!(out, "{key} = steady");
                }
                InitSpec::Constant(c) => {
                    let _ = writeln!(out, "{key} = constant:{c}");
                }
                InitSpec::Table(vs) => {
                    let _ = writeln!(out, "{key} = table:{}", join(vs));
                }
            }
        }
        let _ = writeln!(out, "[time]");
        let _ = writeln!(out, "t_end = {}", self.t_end);
        let _ = writeln!(out, "dt = {}", self.dt);
        match &self.output_times {
            Some(ts) => {
                let _ = writeln!(out, "output_times = {}", join(ts));
            }
            None => {
                let _ = writeln!(out, "output_stride = {}", self.output_stride);
            }
        }
        let _ = writeln!(out, "[tolerances]");
        let _ = writeln!(out, "picard_tol = {}", self.picard_tol);
        let _ = writeln!(out, "eig_tol = {}", self.eig_tol);
        let _ = writeln!(out, "positivity_tol = {}", self.positivity_tol);
        let _ = writeln!(out, "rate_margin = {}", self.rate_margin);
        if let Some((a, b)) = self.rate_window {
            let _ = writeln!(out, "rate_window = {a}, {b}");
        }
        let _ = writeln!(out, "[output]");
        let _ = writeln!(out, "dir = {}", self.output_dir);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default_scenario() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.grid.nodes, vec![256]);
        assert_eq!(cfg.diffusivity, 1.0);
        assert_eq!(cfg.t_end, 40.0);
        assert_eq!(cfg.dt, 1e-3);
        assert_eq!(cfg.nu, NuSpec::Constant(1.0));
        assert_eq!(cfg.initial_l, InitSpec::Zero);
        assert_eq!(cfg.output_stride, 10);
        let grid = cfg.build_grid().unwrap();
        assert_eq!(grid.dof_count(), 255);
    }

    #[test]
    fn sections_and_inline_comments_parse() {
        let cfg = parse_config(
            "# comment\n\
             [grid]\n\
             nodes_x = 64   # inline\n\
             [params]\n\
             epsilon = 0.5\n\
             [time]\n\
             t_end = 2.0\n\
             output_stride = 5\n",
        )
        .unwrap();
        assert_eq!(cfg.grid.nodes, vec![64]);
        assert_eq!(cfg.epsilon, 0.5);
        assert_eq!(cfg.t_end, 2.0);
        assert_eq!(cfg.output_stride, 5);
    }

    #[test]
    fn qualified_keys_work_without_sections() {
        let cfg = parse_config("params.delta = 2.5\ntime.dt = 0.01\n").unwrap();
        assert_eq!(cfg.delta, 2.5);
        assert_eq!(cfg.dt, 0.01);
    }

    #[test]
    fn negative_epsilon_is_named_with_its_line() {
        let err = parse_config("[params]\nepsilon = -1\n").unwrap_err();
        match err {
            Error::Config { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("epsilon"), "{msg}");
                assert!(msg.contains("positive"), "{msg}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected_by_name() {
        let err = parse_config("[params]\ndiffusionn = 1.0\n").unwrap_err();
        match err {
            Error::Config { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("diffusionn"), "{msg}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_malformed_lines_are_rejected() {
        assert!(parse_config("time.dt = 1e-3\ntime.dt = 1e-4\n").is_err());
        assert!(parse_config("just some words\n").is_err());
        assert!(parse_config("[grid\nnodes_x = 4\n").is_err());
        assert!(parse_config("time.dt = fast\n").is_err());
    }

    #[test]
    fn p_must_exceed_the_dimension() {
        let err = parse_config("[params]\np = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("p"), "{err}");
        // Default p = 4 is fine in 2D; p = 2 is not.
        assert!(parse_config("grid.dimension = 2\ngrid.nodes_x = 8\n").is_ok());
        assert!(parse_config("grid.dimension = 2\nparams.p = 2.0\n").is_err());
    }

    #[test]
    fn planar_keys_require_two_dimensions() {
        let err = parse_config("grid.nodes_y = 16\n").unwrap_err();
        assert!(err.to_string().contains("nodes_y"), "{err}");
        let cfg =
            parse_config("[grid]\ndimension = 2\nnodes_x = 16\nface_south = dirichlet\n").unwrap();
        assert_eq!(cfg.grid.nodes, vec![16, 16]);
    }

    #[test]
    fn initial_specs_parse_and_validate() {
        let cfg = parse_config("[initial]\nl = constant:0.5\ns = steady\n").unwrap();
        assert_eq!(cfg.initial_l, InitSpec::Constant(0.5));
        assert_eq!(cfg.initial_s, InitSpec::Steady);
        assert!(parse_config("initial.s = constant:1.0\n").is_err());
        assert!(parse_config("initial.l = constant:-0.1\n").is_err());
        assert!(parse_config("initial.l = ramp\n").is_err());
        // Table length must match the grid.
        assert!(parse_config("grid.nodes_x = 4\ninitial.l = table:0,0,0\n").is_ok());
        assert!(parse_config("grid.nodes_x = 4\ninitial.l = table:0,0\n").is_err());
    }

    #[test]
    fn nu_validation() {
        assert!(parse_config("nu.value = -0.5\n").is_err());
        assert!(parse_config("nu.value = 1\nnu.table = 1,2\n").is_err());
        let cfg = parse_config("grid.nodes_x = 4\nnu.table = 2.0\n").unwrap();
        assert_eq!(cfg.nu, NuSpec::Table(vec![2.0]));
        // One value per Neumann node: a 1D grid has exactly one.
        assert!(parse_config("grid.nodes_x = 4\nnu.table = 2.0,3.0\n").is_err());
    }

    #[test]
    fn output_times_must_fit_the_horizon() {
        assert!(parse_config("time.t_end = 1.0\ntime.output_times = 0.5, 2.0\n").is_err());
        let cfg = parse_config("time.t_end = 1.0\ntime.output_times = 0.25, 0.5\n").unwrap();
        assert_eq!(cfg.output_times, Some(vec![0.25, 0.5]));
    }

    #[test]
    fn canonical_echo_reparses_to_the_same_config() {
        let text = "[grid]\ndimension = 2\nnodes_x = 8\nnodes_y = 6\nextent_y = 2.0\n\
                    [params]\nepsilon = 0.25\n[initial]\nl = constant:0.5\ns = steady\n\
                    [time]\nt_end = 3\noutput_times = 1, 2\n\
                    [tolerances]\nrate_window = 1, 3\n[output]\ndir = results\n";
        let cfg = parse_config(text).unwrap();
        let echo = cfg.canonical();
        let again = parse_config(&echo).unwrap();
        assert_eq!(again.grid.nodes, cfg.grid.nodes);
        assert_eq!(again.grid.extents, cfg.grid.extents);
        assert_eq!(again.epsilon, cfg.epsilon);
        assert_eq!(again.initial_l, cfg.initial_l);
        assert_eq!(again.initial_s, cfg.initial_s);
        assert_eq!(again.output_times, cfg.output_times);
        assert_eq!(again.rate_window, cfg.rate_window);
        assert_eq!(again.output_dir, cfg.output_dir);
        assert_eq!(again.canonical(), echo);
    }

    #[test]
    fn schedule_and_window_defaults() {
        let cfg =
            parse_config("time.t_end = 0.1\ntime.dt = 0.01\ntime.output_stride = 2\n").unwrap();
        let sched = cfg.output_schedule();
        assert_eq!(sched, vec![0.02, 0.04, 0.06, 0.08]);
        assert_eq!(cfg.rate_window(), (0.05, 0.1));
        let cfg = parse_config("tolerances.rate_window = 2, 12\n").unwrap();
        assert_eq!(cfg.rate_window(), (2.0, 12.0));
        assert!(parse_config("tolerances.rate_window = 5\n").is_err());
        assert!(parse_config("tolerances.rate_window = 5, 2\n").is_err());
    }
}
