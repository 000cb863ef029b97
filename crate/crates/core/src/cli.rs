//! Scenario files and the command runner behind the `hjreduce` binary.
//!
//! Exit codes: 0 success, 1 a residual exceeded `--tol` (or a sampled
//! precondition failed), 2 schema violation, 3 numeric failure.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::Error;
use crate::expr::{self, Bindings, Expr};
use crate::forms::{OneForm, TwoForm};
use crate::grid;
use crate::hj::{
    self, check_complete, quadrature_complete_solution, solve_heavy_top, solve_reduced_1d,
    BranchSign, GeneratingFunction, HeavyTop, Kind, ReducedSolution,
};
use crate::integrators::{
    diagonal_invariance_violation, run_scheme, transform_to_equilibrium, EquilibriumSeries,
};
use crate::phase_space::{
    flow_reference, Coordinates, HamiltonianSystem, PhasePoint, Sample, Trajectory,
};
use crate::reconstruction::{
    chart_grid, gamma_relatedness, integrate_projected, lift_solution, momentum_variation,
    reconstruct_trajectory, trajectory_distance, verify_lift,
};
use crate::reduction::{
    magnetic_condition_residual, magnetic_term, reduce, QuotientChart, ReducedSystem,
};
use crate::symmetry::{check_invariance_lemma, momentum_map, MomentumValue, TranslationAction};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RESIDUAL: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Smallest acceptable `|det ∂²S/∂q∂a|` for a complete solution.
const MIN_DET: f64 = 1e-6;
const INVARIANCE_SAMPLES: usize = 200;

#[derive(Debug, Parser)]
#[command(
    name = "hjreduce",
    version,
    about = "Hamilton-Jacobi reduction, reconstruction and generating-function integrators"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reduced hamiltonian and magnetic term at the scenario's momentum level.
    Reduce(RunArgs),
    /// Solve the reduced (or cyclic) Hamilton-Jacobi equation by quadrature.
    #[command(name = "solve-hj")]
    SolveHj(RunArgs),
    /// Lift the reduced solution and rebuild a trajectory.
    Reconstruct(RunArgs),
    /// RK4 trajectory of the full system.
    Simulate(RunArgs),
    /// Run every check the scenario supports.
    Verify(RunArgs),
    /// Iterate the generating-function scheme `S = qᵀβ + τh(q, β)`.
    Integrate(RunArgs),
    /// Push a trajectory through a complete type I solution.
    Equilibrium(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Reduce(_) => "reduce",
            Command::SolveHj(_) => "solve-hj",
            Command::Reconstruct(_) => "reconstruct",
            Command::Simulate(_) => "simulate",
            Command::Verify(_) => "verify",
            Command::Integrate(_) => "integrate",
            Command::Equilibrium(_) => "equilibrium",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Reduce(a)
            | Command::SolveHj(a)
            | Command::Reconstruct(a)
            | Command::Simulate(a)
            | Command::Verify(a)
            | Command::Integrate(a)
            | Command::Equilibrium(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Scenario JSON file.
    pub scenario: PathBuf,
    /// Residual tolerance; any residual above it exits with code 1.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Points per axis of verification grids.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Seed for sampled checks (overrides the scenario).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for reports and CSV files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Time step (overrides the scenario).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time (overrides the scenario).
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
}

// ---------------------------------------------------------------------------
// Scenario schema

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub coords: CoordSpec,
    pub hamiltonian: String,
    #[serde(default)]
    pub action: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Default output directory when `--out` is not given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced: Option<ReducedNames>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hj: Option<HjSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruct: Option<ReconstructSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<RunSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrate: Option<IntegrateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<EquilibriumSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heavy_top: Option<HeavyTopSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnetic: Option<MagneticSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CoordSpec {
    pub q: Vec<String>,
    pub p: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReducedNames {
    pub y: Vec<String>,
    pub p: Vec<String>,
}

fn positive() -> BranchSign {
    BranchSign::Positive
}

fn default_nodes() -> usize {
    hj::DEFAULT_NODES
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HjSpec {
    pub energy: f64,
    /// Range of the reduced coordinate for the quadrature.
    pub range: [f64; 2],
    #[serde(default = "positive")]
    pub branch: BranchSign,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    /// Reduced-coordinate range of the verification grid (defaults to `range`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify_range: Option<[f64; 2]>,
    /// Group-coordinate range of the verification grid (default `[-2, 2]`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_range: Option<[f64; 2]>,
}

fn default_t_end() -> f64 {
    1.0
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReconstructSpec {
    pub y0: Vec<f64>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub z0: PointSpec,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IntegrateSpec {
    pub tau: f64,
    pub steps: usize,
    pub z0: PointSpec,
    /// Check diagonal invariance of the generator before running.
    #[serde(default = "yes")]
    pub check_invariance: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeneratingSpec {
    /// `S(t, q, α)` as an expression string.
    pub s: String,
    pub params: Vec<String>,
}

fn default_parameter() -> String {
    "E".into()
}

fn default_panels() -> usize {
    hj::branch::DEFAULT_PANELS
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    #[serde(default = "default_parameter")]
    pub parameter: String,
    pub q0: f64,
    #[serde(default = "positive")]
    pub branch: BranchSign,
    #[serde(default = "default_panels")]
    pub panels: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generating: Option<GeneratingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureSpec>,
    pub z0: PointSpec,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HeavyTopSpec {
    pub top: HeavyTop,
    pub beta2: f64,
    pub beta3: f64,
    pub energy: f64,
    pub theta_range: [f64; 2],
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Candidate {
    pub name: String,
    /// Components over the reduced coordinates.
    pub form: Vec<String>,
    /// Whether the candidate should satisfy `dγ̃ = −β_μ`.
    pub expect_pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MagneticSpec {
    /// Connection form `α_μ` on `Q`, one component per coordinate.
    pub alpha: Vec<String>,
    #[serde(default)]
    pub candidates: Vec<Candidate>,
    /// Range of each reduced coordinate on the check grid (default `[-2, 2]`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
}

// ---------------------------------------------------------------------------
// Errors

#[derive(Debug)]
pub enum CliError {
    Schema { path: String, message: String },
    Numeric(Error),
    Io(io::Error),
}

impl CliError {
    fn schema(path: impl Into<String>, message: impl fmt::Display) -> Self {
        CliError::Schema {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } => EXIT_SCHEMA,
            CliError::Numeric(Error::Precondition { .. } | Error::NotCyclic(_)) => EXIT_RESIDUAL,
            CliError::Numeric(_) | CliError::Io(_) => EXIT_NUMERIC,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Schema { path, message } => write!(f, "schema error at {path}: {message}"),
            CliError::Numeric(e) => write!(f, "numeric failure: {e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Numeric(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

// ---------------------------------------------------------------------------
// Loading and validation

/// Parses scenario text. Errors carry a JSON path such as `$.hj.range`.
pub fn parse_scenario(text: &str) -> CliResult<Scenario> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| CliError::schema("$", format!("invalid JSON: {e}")))?;
    serde_path_to_error::deserialize(value).map_err(|e| {
        let mut path = e.path().to_string();
        let message = e.inner().to_string();
        let base = if path == "." {
            "$".to_string()
        } else {
            format!("$.{path}")
        };
        path = match message
            .strip_prefix("missing field `")
            .and_then(|rest| rest.split('`').next())
        {
            Some(field) => format!("{base}.{field}"),
            None => base,
        };
        CliError::schema(path, message)
    })
}

pub fn load_scenario(path: &Path) -> CliResult<Scenario> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::schema("$", format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text)
}

/// A validated scenario with its objects built.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub sys: HamiltonianSystem,
    pub action: TranslationAction,
    pub mu: MomentumValue,
    pub chart: QuotientChart,
    pub seed: u64,
}

fn parse_expr(text: &str, path: &str) -> CliResult<Expr> {
    expr::parse(text).map_err(|e| CliError::schema(path, e))
}

fn check_range(r: [f64; 2], path: &str) -> CliResult<(f64, f64)> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]) {
        return Err(CliError::schema(
            path,
            format!("expected lo < hi, got [{}, {}]", r[0], r[1]),
        ));
    }
    Ok((r[0], r[1]))
}

fn check_len(got: usize, expected: usize, path: &str) -> CliResult<()> {
    if got != expected {
        return Err(CliError::schema(
            path,
            format!("expected {expected} entries, got {got}"),
        ));
    }
    Ok(())
}

fn check_step(dt: f64, t_end: f64, path: &str) -> CliResult<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CliError::schema(
            format!("{path}.dt"),
            format!("step must be positive, got {dt}"),
        ));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(CliError::schema(
            format!("{path}.t_end"),
            format!("must be non-negative, got {t_end}"),
        ));
    }
    Ok(())
}

fn check_point(z: &PointSpec, n: usize, path: &str) -> CliResult<()> {
    check_len(z.q.len(), n, &format!("{path}.q"))?;
    check_len(z.p.len(), n, &format!("{path}.p"))
}

fn unique(names: &[&String], path: &str) -> CliResult<()> {
    for (i, a) in names.iter().enumerate() {
        if names[..i].contains(a) {
            return Err(CliError::schema(
                path,
                format!("variable `{a}` declared twice"),
            ));
        }
    }
    Ok(())
}

impl Scenario {
    /// Checks every section and builds the system, action and chart.
    pub fn prepare(self) -> CliResult<Prepared> {
        let c = &self.coords;
        if c.q.is_empty() {
            return Err(CliError::schema(
                "$.coords.q",
                "at least one coordinate is required",
            ));
        }
        check_len(c.p.len(), c.q.len(), "$.coords.p")?;
        let mut all: Vec<&String> = c.q.iter().chain(&c.p).collect();
        all.extend(c.t.iter());
        unique(&all, "$.coords")?;
        let n = c.q.len();
        let mut coords = Coordinates::new(c.q.clone(), c.p.clone())
            .map_err(|e| CliError::schema("$.coords", e))?;
        if let Some(t) = &c.t {
            coords = coords.with_time(t.clone());
        }
        let h = parse_expr(&self.hamiltonian, "$.hamiltonian")?;
        let sys =
            HamiltonianSystem::new(coords, h).map_err(|e| CliError::schema("$.hamiltonian", e))?;
        for (i, g) in self.action.iter().enumerate() {
            check_len(g.len(), n, &format!("$.action[{i}]"))?;
        }
        let action =
            TranslationAction::new(n, &self.action).map_err(|e| CliError::schema("$.action", e))?;
        let k = action.k();
        let mu = match &self.mu {
            Some(m) => {
                check_len(m.len(), k, "$.mu")?;
                MomentumValue(m.clone())
            }
            None => MomentumValue::zero(k),
        };
        let chart = match &self.reduced {
            Some(r) => {
                check_len(r.y.len(), n - k, "$.reduced.y")?;
                check_len(r.p.len(), n - k, "$.reduced.p")?;
                let names: Vec<&String> = r.y.iter().chain(&r.p).collect();
                unique(&names, "$.reduced")?;
                QuotientChart::new(&action, &c.q, &r.y, &r.p)
                    .map_err(|e| CliError::schema("$.reduced", e))?
            }
            None => crate::reduction::build_chart(&action, &c.q)
                .map_err(|e| CliError::schema("$.action", e))?,
        };
        let m = chart.m();
        if let Some(hj) = &self.hj {
            if m != 1 {
                return Err(CliError::schema(
                    "$.hj",
                    format!("quadrature needs a one-dimensional quotient, got dimension {m}"),
                ));
            }
            check_range(hj.range, "$.hj.range")?;
            if let Some(r) = hj.verify_range {
                check_range(r, "$.hj.verify_range")?;
            }
            if let Some(r) = hj.x_range {
                check_range(r, "$.hj.x_range")?;
            }
            if hj.nodes < 2 {
                return Err(CliError::schema(
                    "$.hj.nodes",
                    "at least two nodes are required",
                ));
            }
        }
        if let Some(r) = &self.reconstruct {
            if self.hj.is_none() {
                return Err(CliError::schema(
                    "$.hj",
                    "required by the reconstruct section",
                ));
            }
            check_len(r.y0.len(), m, "$.reconstruct.y0")?;
            check_step(r.dt, r.t_end, "$.reconstruct")?;
        }
        if let Some(s) = &self.simulate {
            check_point(&s.z0, n, "$.simulate.z0")?;
            check_step(s.dt, s.t_end, "$.simulate")?;
        }
        if let Some(s) = &self.integrate {
            check_point(&s.z0, n, "$.integrate.z0")?;
            if !(s.tau.is_finite() && s.tau != 0.0) {
                return Err(CliError::schema(
                    "$.integrate.tau",
                    "must be finite and nonzero",
                ));
            }
        }
        if let Some(e) = &self.equilibrium {
            check_point(&e.z0, n, "$.equilibrium.z0")?;
            check_step(e.dt, e.t_end, "$.equilibrium")?;
            match (&e.generating, &e.quadrature) {
                (Some(_), None) | (None, Some(_)) => {}
                _ => {
                    return Err(CliError::schema(
                        "$.equilibrium",
                        "exactly one of `generating` and `quadrature` is required",
                    ))
                }
            }
            if let Some(g) = &e.generating {
                check_len(g.params.len(), n, "$.equilibrium.generating.params")?;
                parse_expr(&g.s, "$.equilibrium.generating.s")?;
            }
            if e.quadrature.is_some() && n != 1 {
                return Err(CliError::schema(
                    "$.equilibrium.quadrature",
                    "quadrature solutions need n = 1",
                ));
            }
        }
        if let Some(t) = &self.heavy_top {
            check_range(t.theta_range, "$.heavy_top.theta_range")?;
            let expected = hj::heavy_top_hamiltonian(&t.top)
                .map_err(|e| CliError::schema("$.heavy_top.top", e))?;
            if expected.coords().q != c.q || expected.coords().p != c.p {
                return Err(CliError::schema(
                    "$.coords",
                    "heavy_top needs coordinates theta, phi, psi and p_theta, p_phi, p_psi",
                ));
            }
            let mut rng = grid::rng(1);
            for _ in 0..20 {
                let mut b = Bindings::new();
                b.assign(&c.q, &[rand::Rng::gen_range(&mut rng, 0.2..2.9), 0.3, -0.4]);
                b.assign(&c.p, &grid::uniform_point(&mut rng, 3, -2.0, 2.0));
                let (u, v) = (sys.hamiltonian().eval(&b), expected.hamiltonian().eval(&b));
                match (u, v) {
                    (Ok(u), Ok(v)) if (u - v).abs() <= 1e-12 * (1.0 + u.abs()) => {}
                    _ => {
                        return Err(CliError::schema(
                            "$.hamiltonian",
                            "does not match the heavy_top parameters",
                        ))
                    }
                }
            }
        }
        if let Some(mg) = &self.magnetic {
            check_len(mg.alpha.len(), n, "$.magnetic.alpha")?;
            for (i, a) in mg.alpha.iter().enumerate() {
                let e = parse_expr(a, &format!("$.magnetic.alpha[{i}]"))?;
                if let Some(v) = e.free_vars().into_iter().find(|v| !c.q.contains(v)) {
                    return Err(CliError::schema(
                        format!("$.magnetic.alpha[{i}]"),
                        format!("undeclared variable `{v}`"),
                    ));
                }
            }
            for (j, cand) in mg.candidates.iter().enumerate() {
                check_len(
                    cand.form.len(),
                    m,
                    &format!("$.magnetic.candidates[{j}].form"),
                )?;
                for (i, f) in cand.form.iter().enumerate() {
                    let path = format!("$.magnetic.candidates[{j}].form[{i}]");
                    let e = parse_expr(f, &path)?;
                    if let Some(v) = e
                        .free_vars()
                        .into_iter()
                        .find(|v| !chart.y_names().contains(v))
                    {
                        return Err(CliError::schema(path, format!("undeclared variable `{v}`")));
                    }
                }
            }
            if let Some(r) = mg.range {
                check_range(r, "$.magnetic.range")?;
            }
        }
        let seed = self.seed.unwrap_or(grid::DEFAULT_SEED);
        Ok(Prepared {
            scenario: self,
            sys,
            action,
            mu,
            chart,
            seed,
        })
    }
}

// ---------------------------------------------------------------------------
// Output

/// Result of one command: the JSON report, whether every residual passed,
/// and extra files (name, contents) for the output directory.
#[derive(Debug)]
pub struct Outcome {
    pub report: Value,
    pub pass: bool,
    pub files: Vec<(String, String)>,
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory followed by a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        file_name.to_string_lossy(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Trajectory as CSV text: header `t,<q names>,<p names>`, values with 17
/// significant digits, LF line endings.
pub fn trajectory_csv(traj: &Trajectory, q_names: &[String], p_names: &[String]) -> String {
    let mut out = String::from("t");
    for name in q_names.iter().chain(p_names) {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for s in &traj.samples {
        out.push_str(&format!("{:.16e}", s.t));
        for v in s.point.q.iter().chain(&s.point.p) {
            out.push_str(&format!(",{v:.16e}"));
        }
        out.push('\n');
    }
    out
}

pub fn emit_trajectory(traj: &Trajectory, coords: &Coordinates, path: &Path) -> io::Result<()> {
    write_atomic(path, trajectory_csv(traj, &coords.q, &coords.p).as_bytes())
}

/// Parses CSV written by [`trajectory_csv`]. Returns the header names after
/// `t` and the samples; the step is read off the first two times.
pub fn parse_trajectory_csv(text: &str) -> std::result::Result<(Vec<String>, Trajectory), String> {
    let mut lines = text.split('\n');
    let header = lines.next().ok_or("empty file")?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"t") || cols.len().is_multiple_of(2) {
        return Err(format!("bad header `{header}`"));
    }
    let n = (cols.len() - 1) / 2;
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|v| v.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 2)))
            .collect::<std::result::Result<Vec<f64>, String>>()?;
        if vals.len() != cols.len() {
            return Err(format!(
                "line {}: expected {} fields, got {}",
                i + 2,
                cols.len(),
                vals.len()
            ));
        }
        samples.push(Sample {
            t: vals[0],
            point: PhasePoint::new(vals[1..=n].to_vec(), vals[n + 1..].to_vec()),
        });
    }
    let dt = if samples.len() >= 2 {
        samples[1].t - samples[0].t
    } else {
        0.0
    };
    Ok((
        cols[1..].iter().map(|s| s.to_string()).collect(),
        Trajectory { dt, samples },
    ))
}

fn form_strings(beta: &TwoForm) -> Vec<Vec<String>> {
    beta.matrix()
        .iter()
        .map(|row| row.iter().map(|e| e.to_string()).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// Commands

struct Ctx<'a> {
    p: &'a Prepared,
    args: &'a RunArgs,
}

impl Ctx<'_> {
    fn name(&self) -> &str {
        &self.p.scenario.name
    }

    fn seed(&self) -> u64 {
        self.args.seed.unwrap_or(self.p.seed)
    }

    fn rng(&self) -> grid::SampleRng {
        grid::rng(self.seed())
    }

    fn grid_n(&self) -> usize {
        self.args.grid.unwrap_or(50).max(2)
    }

    fn times(&self, t_end: f64, dt: f64) -> (f64, f64) {
        (self.args.t_end.unwrap_or(t_end), self.args.dt.unwrap_or(dt))
    }

    fn within(&self, v: f64) -> bool {
        v.is_finite() && v <= self.args.tol
    }

    fn section<'b, T>(&self, s: &'b Option<T>, key: &str) -> CliResult<&'b T> {
        s.as_ref().ok_or_else(|| {
            CliError::schema(
                format!("$.{key}"),
                "missing section required by this command",
            )
        })
    }

    fn reduced(&self) -> CliResult<ReducedSystem> {
        let mut rng = self.rng();
        let mut r = reduce(&self.p.sys, &self.p.chart, &self.p.mu, &mut rng)?;
        if let Some(mg) = &self.p.scenario.magnetic {
            let alpha = self.alpha(mg)?;
            r.beta = magnetic_term(
                &self.p.chart,
                &alpha,
                &self.p.mu,
                self.args.tol.max(1e-12),
                &mut rng,
            )?;
        }
        Ok(r)
    }

    fn alpha(&self, mg: &MagneticSpec) -> CliResult<OneForm> {
        let comps = mg
            .alpha
            .iter()
            .map(|a| parse_expr(a, "$.magnetic.alpha"))
            .collect::<CliResult<Vec<_>>>()?;
        Ok(OneForm::new(self.p.chart.q_names().to_vec(), comps)?)
    }

    fn solve(&self, reduced: &ReducedSystem) -> CliResult<ReducedSolution> {
        let hj = self.section(&self.p.scenario.hj, "hj")?;
        let chart = &reduced.chart;
        Ok(solve_reduced_1d(
            reduced.hamiltonian(),
            &chart.y_names()[0],
            &chart.py_names()[0],
            hj.energy,
            (hj.range[0], hj.range[1]),
            hj.branch,
            hj.nodes,
        )?)
    }

    fn verification_grid(&self) -> CliResult<Vec<Vec<f64>>> {
        let hj = self.section(&self.p.scenario.hj, "hj")?;
        let y = hj.verify_range.unwrap_or(hj.range);
        let x = hj.x_range.unwrap_or([-2.0, 2.0]);
        let xs = vec![(x[0], x[1]); self.p.chart.k()];
        Ok(chart_grid(
            &self.p.chart,
            &[(y[0], y[1])],
            &xs,
            self.grid_n(),
        )?)
    }
}

fn run_reduce(c: &Ctx) -> CliResult<Outcome> {
    let r = c.reduced()?;
    let chart = &r.chart;
    let reduced_scenario = Scenario {
        name: format!("{}_reduced", c.name()),
        coords: CoordSpec {
            q: chart.y_names().to_vec(),
            p: chart.py_names().to_vec(),
            t: c.p.scenario.coords.t.clone(),
        },
        hamiltonian: r.hamiltonian().to_string(),
        action: Vec::new(),
        mu: None,
        seed: c.p.scenario.seed,
        out: None,
        reduced: None,
        hj: None,
        reconstruct: None,
        simulate: None,
        integrate: None,
        equilibrium: None,
        heavy_top: None,
        magnetic: None,
    };
    let report = json!({
        "command": "reduce",
        "scenario": c.name(),
        "mu": r.mu,
        "chart": {
            "y_names": chart.y_names(),
            "x_names": chart.x_names(),
            "py_names": chart.py_names(),
            "y_block": chart.y_block(),
            "x_block": chart.x_block(),
        },
        "reduced_hamiltonian": r.hamiltonian().to_string(),
        "magnetic_term": form_strings(&r.beta),
        "reduced_scenario": reduced_scenario,
    });
    Ok(Outcome {
        report,
        pass: true,
        files: Vec::new(),
    })
}

fn heavy_top_report(c: &Ctx, spec: &HeavyTopSpec) -> CliResult<(Value, bool, String)> {
    let sol = solve_heavy_top(
        &spec.top,
        spec.beta2,
        spec.beta3,
        spec.energy,
        (spec.theta_range[0], spec.theta_range[1]),
        spec.nodes,
    )?;
    let pass = c.within(sol.equation_residual)
        && c.within(sol.completeness.hj_max_dev)
        && sol.completeness.min_abs_det >= MIN_DET;
    let mut csv = Vec::new();
    sol.v.write_csv(&mut csv)?;
    let report = json!({
        "kind": "heavy_top",
        "template": sol.ansatz.template(),
        "equation": sol.ansatz.display_equation(),
        "min_radicand": sol.min_radicand,
        "equation_residual": sol.equation_residual,
        "node_residual": sol.v.node_residual,
        "completeness": sol.completeness,
        "min_det_threshold": MIN_DET,
    });
    Ok((report, pass, String::from_utf8(csv).expect("ascii csv")))
}

fn run_solve_hj(c: &Ctx) -> CliResult<Outcome> {
    if let Some(spec) = &c.p.scenario.heavy_top {
        let (mut report, pass, csv) = heavy_top_report(c, spec)?;
        report["command"] = json!("solve-hj");
        report["scenario"] = json!(c.name());
        report["pass"] = json!(pass);
        return Ok(Outcome {
            report,
            pass,
            files: vec![(format!("{}.solve-hj.csv", c.name()), csv)],
        });
    }
    let r = c.reduced()?;
    let sol = c.solve(&r)?;
    let mut csv = Vec::new();
    sol.write_csv(&mut csv)?;
    let pass = c.within(sol.node_residual);
    let report = json!({
        "command": "solve-hj",
        "scenario": c.name(),
        "reduced_hamiltonian": r.hamiltonian().to_string(),
        "branch": sol.branch,
        "solve": sol.report(),
        "pass": pass,
    });
    Ok(Outcome {
        report,
        pass,
        files: vec![(
            format!("{}.solve-hj.csv", c.name()),
            String::from_utf8(csv).expect("ascii csv"),
        )],
    })
}

/// Lift plus checks; returns the lifted form too.
fn lift_report(c: &Ctx) -> CliResult<(Value, bool, OneForm, ReducedSystem, ReducedSolution)> {
    let r = c.reduced()?;
    let sol = c.solve(&r)?;
    let gamma = lift_solution(&sol.form, &r.chart, &r.mu, None)?;
    let pts = c.verification_grid()?;
    let mut rng = c.rng();
    let lift = verify_lift(&c.p.sys, &gamma, &r.chart, &r.mu, &pts, &mut rng)?;
    let lemma = check_invariance_lemma(c.p.chart.action(), &gamma, &pts, 1e-9)?;
    let pass = c.within(lift.hj.max_dev)
        && c.within(lift.momentum_residual)
        && c.within(lift.invariance_residual)
        && c.within(sol.node_residual);
    let report = json!({
        "grid_points": pts.len(),
        "node_residual": sol.node_residual,
        "hj_max_dev": lift.hj.max_dev,
        "e_est": lift.hj.e_est,
        "momentum_residual": lift.momentum_residual,
        "invariance_residual": lift.invariance_residual,
        "j_spread": lemma.j_spread,
    });
    Ok((report, pass, gamma, r, sol))
}

fn run_reconstruct(c: &Ctx) -> CliResult<Outcome> {
    let (lift, mut pass, gamma, r, sol) = lift_report(c)?;
    let mut report = json!({
        "command": "reconstruct",
        "scenario": c.name(),
        "lift": lift,
    });
    let mut files = Vec::new();
    if let Some(spec) = &c.p.scenario.reconstruct {
        let (t_end, dt) = c.times(spec.t_end, spec.dt);
        check_step(dt, t_end, "$.reconstruct")
            .map_err(|_| CliError::schema("--dt/--t-end", "invalid time settings"))?;
        let traj = reconstruct_trajectory(&c.p.sys, &r, &sol.form, &spec.y0, t_end, dt)?;
        let q0 = traj.samples[0].point.q.clone();
        let direct = integrate_projected(&c.p.sys, &gamma, &q0, t_end, dt)?;
        let distance = trajectory_distance(&traj, &direct, true)?;
        let related = gamma_relatedness(&c.p.sys, &gamma, &q0, t_end, dt)?;
        let j_var = momentum_variation(&r.chart, &traj)?;
        pass &= c.within(distance) && c.within(related) && c.within(j_var);
        report["trajectory"] = json!({
            "samples": traj.len(),
            "dt": traj.dt,
            "t_end": t_end,
            "direct_distance": distance,
            "gamma_relatedness": related,
            "momentum_variation": j_var,
        });
        files.push((
            format!("{}.reconstruct.csv", c.name()),
            trajectory_csv(&traj, &c.p.sys.coords().q, &c.p.sys.coords().p),
        ));
    }
    report["pass"] = json!(pass);
    Ok(Outcome {
        report,
        pass,
        files,
    })
}

fn point(z: &PointSpec) -> PhasePoint {
    PhasePoint::new(z.q.clone(), z.p.clone())
}

fn run_simulate(c: &Ctx) -> CliResult<Outcome> {
    let spec = c.section(&c.p.scenario.simulate, "simulate")?;
    let (t_end, dt) = c.times(spec.t_end, spec.dt);
    check_step(dt, t_end, "$.simulate")
        .map_err(|_| CliError::schema("--dt/--t-end", "invalid time settings"))?;
    let traj = flow_reference(&c.p.sys, &point(&spec.z0), t_end, dt)?;
    let h0 = c.p.sys.energy(&traj.samples[0].point)?;
    let j0 = momentum_map(&c.p.action, &traj.samples[0].point)?;
    let mut energy_drift = 0.0f64;
    let mut momentum_drift = 0.0f64;
    for s in &traj.samples {
        energy_drift = energy_drift.max((c.p.sys.energy(&s.point)? - h0).abs());
        let j = momentum_map(&c.p.action, &s.point)?;
        momentum_drift =
            j.0.iter()
                .zip(&j0.0)
                .fold(momentum_drift, |m, (a, b)| m.max((a - b).abs()));
    }
    let pass = c.within(momentum_drift);
    let report = json!({
        "command": "simulate",
        "scenario": c.name(),
        "samples": traj.len(),
        "dt": traj.dt,
        "t_end": t_end,
        "energy_drift": energy_drift,
        "momentum_drift": momentum_drift,
        "pass": pass,
    });
    Ok(Outcome {
        report,
        pass,
        files: vec![(
            format!("{}.simulate.csv", c.name()),
            trajectory_csv(&traj, &c.p.sys.coords().q, &c.p.sys.coords().p),
        )],
    })
}

fn magnetic_report(c: &Ctx, mg: &MagneticSpec) -> CliResult<(Value, bool)> {
    let r = c.reduced()?;
    let range = mg.range.unwrap_or([-2.0, 2.0]);
    let pts = grid::tensor(&vec![(range[0], range[1]); r.chart.m()], 9);
    let mut pass = true;
    let mut results = Vec::new();
    for cand in &mg.candidates {
        let form = OneForm::parse(
            &r.chart
                .y_names()
                .iter()
                .map(String::as_str)
                .collect::<Vec<_>>(),
            &cand.form,
        )?;
        let residual = magnetic_condition_residual(&form, &r.beta, &pts)?;
        let ok = c.within(residual);
        pass &= ok == cand.expect_pass;
        results.push(json!({
            "name": cand.name,
            "residual": residual,
            "passes": ok,
            "expected": cand.expect_pass,
        }));
    }
    Ok((
        json!({
            "magnetic_term": form_strings(&r.beta),
            "candidates": results,
        }),
        pass,
    ))
}

fn run_verify(c: &Ctx) -> CliResult<Outcome> {
    let s = &c.p.scenario;
    let mut report = json!({ "command": "verify", "scenario": c.name() });
    let mut pass = true;
    let mut ran = false;
    if s.hj.is_some() {
        let (lift, ok, _, r, _) = lift_report(c)?;
        report["reduced_hamiltonian"] = json!(r.hamiltonian().to_string());
        report["hj_max_dev"] = lift["hj_max_dev"].clone();
        report["lift"] = lift;
        pass &= ok;
        ran = true;
    }
    if let Some(spec) = &s.heavy_top {
        let (ht, ok, _) = heavy_top_report(c, spec)?;
        report["heavy_top"] = ht;
        pass &= ok;
        ran = true;
    }
    if let Some(mg) = &s.magnetic {
        let (m, ok) = magnetic_report(c, mg)?;
        report["magnetic"] = m;
        pass &= ok;
        ran = true;
    }
    if s.equilibrium.is_some() {
        let (e, ok) = equilibrium_report(c)?;
        report["equilibrium"] = e.0;
        pass &= ok;
        ran = true;
    }
    if c.p.action.k() > 0 {
        let mut rng = c.rng();
        let inv = crate::symmetry::invariance_violation(
            &c.p.action,
            c.p.sys.coords(),
            c.p.sys.hamiltonian(),
            INVARIANCE_SAMPLES,
            1e-9,
            &mut rng,
        )?;
        report["hamiltonian_invariant"] = json!(inv.is_none());
        pass &= inv.is_none();
        ran = true;
    }
    if !ran {
        return Err(CliError::schema(
            "$",
            "nothing to verify: add an hj, heavy_top, magnetic or equilibrium section",
        ));
    }
    report["pass"] = json!(pass);
    Ok(Outcome {
        report,
        pass,
        files: Vec::new(),
    })
}

fn run_integrate(c: &Ctx) -> CliResult<Outcome> {
    let spec = c.section(&c.p.scenario.integrate, "integrate")?;
    let s = crate::integrators::euler_generator(&c.p.sys, spec.tau)?;
    if spec.check_invariance {
        let mut rng = c.rng();
        if let Some((residual, witness)) =
            diagonal_invariance_violation(&s, &c.p.action, INVARIANCE_SAMPLES, 1e-9, &mut rng)?
        {
            let report = json!({
                "command": "integrate",
                "scenario": c.name(),
                "precondition": {
                    "what": "S is not invariant under the diagonal action",
                    "residual": residual,
                    "witness": witness,
                },
                "pass": false,
            });
            return Ok(Outcome {
                report,
                pass: false,
                files: Vec::new(),
            });
        }
    }
    let (traj, scheme) = run_scheme(
        &c.p.sys,
        &c.p.action,
        spec.tau,
        &point(&spec.z0),
        spec.steps,
    )?;
    let pass = c.within(scheme.max_momentum_drift) && c.within(scheme.defect);
    let report = json!({
        "command": "integrate",
        "scenario": c.name(),
        "invariance_checked": spec.check_invariance,
        "scheme": scheme,
        "pass": pass,
    });
    Ok(Outcome {
        report,
        pass,
        files: vec![(
            format!("{}.integrate.csv", c.name()),
            trajectory_csv(&traj, &c.p.sys.coords().q, &c.p.sys.coords().p),
        )],
    })
}

fn equilibrium_generator(c: &Ctx, spec: &EquilibriumSpec) -> CliResult<GeneratingFunction> {
    let coords = c.p.sys.coords();
    if let Some(g) = &spec.generating {
        let e = parse_expr(&g.s, "$.equilibrium.generating.s")?;
        return GeneratingFunction::new(
            Kind::TypeI,
            e,
            coords.q.clone(),
            g.params.clone(),
            coords.time_name(),
        )
        .map_err(|e| CliError::schema("$.equilibrium.generating", e));
    }
    let q = spec.quadrature.as_ref().expect("validated");
    Ok(quadrature_complete_solution(
        c.p.sys.hamiltonian(),
        &coords.q[0],
        &coords.p[0],
        &q.parameter,
        q.branch,
        q.q0,
        q.panels,
    )?)
}

fn equilibrium_report(
    c: &Ctx,
) -> CliResult<((Value, EquilibriumSeries, GeneratingFunction), bool)> {
    let spec = c.section(&c.p.scenario.equilibrium, "equilibrium")?;
    let (t_end, dt) = c.times(spec.t_end, spec.dt);
    check_step(dt, t_end, "$.equilibrium")
        .map_err(|_| CliError::schema("--dt/--t-end", "invalid time settings"))?;
    let s = equilibrium_generator(c, spec)?;
    let series = transform_to_equilibrium(&s, &c.p.sys, &point(&spec.z0), t_end, dt)?;
    let traj = flow_reference(&c.p.sys, &point(&spec.z0), t_end, dt)?;
    let stride = (traj.len() / 50).max(1);
    let pts: Vec<Vec<f64>> = traj
        .samples
        .iter()
        .zip(&series.alpha)
        .step_by(stride)
        .map(|(smp, a)| {
            std::iter::once(smp.t)
                .chain(smp.point.q.iter().copied())
                .chain(a.iter().copied())
                .collect()
        })
        .collect();
    let complete = check_complete(&s, &c.p.sys, &pts)?;
    let pass = c.within(series.max_var)
        && c.within(complete.hj_max_dev)
        && complete.min_abs_det >= MIN_DET;
    let report = json!({
        "generating_function": s.expr().to_string(),
        "samples": series.times.len(),
        "alpha0": series.alpha.first(),
        "beta0": series.beta.first(),
        "max_var": series.max_var,
        "completeness": complete,
    });
    Ok(((report, series, s), pass))
}

fn run_equilibrium(c: &Ctx) -> CliResult<Outcome> {
    let ((mut report, series, s), pass) = equilibrium_report(c)?;
    report["command"] = json!("equilibrium");
    report["scenario"] = json!(c.name());
    report["pass"] = json!(pass);
    let traj = Trajectory {
        dt: c.args.dt.unwrap_or(0.0),
        samples: series
            .times
            .iter()
            .zip(series.alpha.iter().zip(&series.beta))
            .map(|(&t, (a, b))| Sample {
                t,
                point: PhasePoint::new(a.clone(), b.clone()),
            })
            .collect(),
    };
    let betas: Vec<String> = (1..=s.n()).map(|i| format!("beta{i}")).collect();
    Ok(Outcome {
        report,
        pass,
        files: vec![(
            format!("{}.equilibrium.csv", c.name()),
            trajectory_csv(&traj, s.param_names(), &betas),
        )],
    })
}

/// Runs one command on a prepared scenario without touching the file system.
pub fn execute(command: &Command, prepared: &Prepared) -> CliResult<Outcome> {
    let c = Ctx {
        p: prepared,
        args: command.args(),
    };
    match command {
        Command::Reduce(_) => run_reduce(&c),
        Command::SolveHj(_) => run_solve_hj(&c),
        Command::Reconstruct(_) => run_reconstruct(&c),
        Command::Simulate(_) => run_simulate(&c),
        Command::Verify(_) => run_verify(&c),
        Command::Integrate(_) => run_integrate(&c),
        Command::Equilibrium(_) => run_equilibrium(&c),
    }
}

fn finish(command: &Command, prepared: &Prepared, outcome: Outcome) -> CliResult<i32> {
    let args = command.args();
    let text = serde_json::to_string_pretty(&outcome.report).expect("report serializes") + "\n";
    let out_dir = args.out.clone().or_else(|| prepared.scenario.out.clone());
    if let Some(dir) = out_dir {
        let report_path = dir.join(format!(
            "{}.{}.json",
            prepared.scenario.name,
            command.name()
        ));
        write_atomic(&report_path, text.as_bytes())?;
        for (name, contents) in &outcome.files {
            write_atomic(&dir.join(name), contents.as_bytes())?;
        }
    }
    io::stdout().write_all(text.as_bytes())?;
    Ok(if outcome.pass { EXIT_OK } else { EXIT_RESIDUAL })
}

/// Loads, validates and runs; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let command = &cli.command;
    let result = load_scenario(&command.args().scenario)
        .and_then(Scenario::prepare)
        .and_then(|p| {
            let outcome = execute(command, &p)?;
            finish(command, &p, outcome)
        });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("hjreduce {}: {e}", command.name());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "free",
        "coords": {"q": ["q1"], "p": ["p1"]},
        "hamiltonian": "p1^2/2",
        "simulate": {"z0": {"q": [0.0], "p": [1.0]}, "t_end": 0.2, "dt": 0.1}
    }"#;

    fn args(path: &str) -> RunArgs {
        RunArgs {
            scenario: path.into(),
            tol: 1e-8,
            grid: None,
            seed: None,
            out: None,
            dt: None,
            t_end: None,
        }
    }

    #[test]
    fn missing_hamiltonian_reports_path() {
        let err =
            parse_scenario(r#"{"name": "x", "coords": {"q": ["q"], "p": ["p"]}}"#).unwrap_err();
        match &err {
            CliError::Schema { path, .. } => assert_eq!(path, "$.hamiltonian"),
            other => panic!("{other:?}"),
        }
        assert_eq!(err.exit_code(), EXIT_SCHEMA);
    }

    #[test]
    fn nested_type_error_reports_path() {
        let text = MINIMAL.replace("\"t_end\": 0.2", "\"t_end\": \"soon\"");
        match parse_scenario(&text).unwrap_err() {
            CliError::Schema { path, .. } => assert_eq!(path, "$.simulate.t_end"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn undeclared_variable_is_schema_error() {
        let text = MINIMAL.replace("p1^2/2", "p1^2/2 + z");
        let err = parse_scenario(&text).unwrap().prepare().unwrap_err();
        match err {
            CliError::Schema { path, .. } => assert_eq!(path, "$.hamiltonian"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn action_length_checked() {
        let text = MINIMAL.replace("\"hamiltonian\"", "\"action\": [[1, 0]], \"hamiltonian\"");
        match parse_scenario(&text).unwrap().prepare().unwrap_err() {
            CliError::Schema { path, .. } => assert_eq!(path, "$.action[0]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn simulate_three_samples() {
        let p = parse_scenario(MINIMAL).unwrap().prepare().unwrap();
        let cmd = Command::Simulate(args("unused"));
        let out = execute(&cmd, &p).unwrap();
        assert!(out.pass);
        let csv = &out.files[0].1;
        assert_eq!(csv.lines().count(), 4);
        assert!(!csv.contains('\r'));
        let (names, traj) = parse_trajectory_csv(csv).unwrap();
        assert_eq!(names, vec!["q1", "p1"]);
        let q: Vec<f64> = traj.samples.iter().map(|s| s.point.q[0]).collect();
        assert_eq!(q[0], 0.0);
        assert!(((q[2] - q[1]) - (q[1] - q[0])).abs() < 1e-15);
    }

    #[test]
    fn empty_trajectory_is_header_only() {
        let text = trajectory_csv(&Trajectory::default(), &["q".into()], &["p".into()]);
        assert_eq!(text, "t,q,p\n");
        let (_, t) = parse_trajectory_csv(&text).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let samples = (0..5)
            .map(|i| Sample {
                t: 0.1 * i as f64,
                point: PhasePoint::new(
                    vec![std::f64::consts::PI / (i + 1) as f64, -1e-300],
                    vec![1.0 / 3.0, 2e300],
                ),
            })
            .collect();
        let traj = Trajectory { dt: 0.1, samples };
        let text = trajectory_csv(&traj, &["a".into(), "b".into()], &["c".into(), "d".into()]);
        let (_, back) = parse_trajectory_csv(&text).unwrap();
        for (u, v) in traj.samples.iter().zip(&back.samples) {
            assert_eq!(u.t.to_bits(), v.t.to_bits());
            for (x, y) in u.point.to_vec().iter().zip(v.point.to_vec()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_atomic(&path, b"one\n").unwrap();
        write_atomic(&path, b"two\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
