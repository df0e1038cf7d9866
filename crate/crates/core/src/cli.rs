//! Declarative front end: scenario, sweep and figure-preset runners that
//! write CSV datasets plus a JSON manifest, and the clap command tree used by
//! the `retarded-transfer` binary.

use std::f64::consts::PI;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{self, AnalysisError};
use crate::model::{self, DelayedLinearSystem, Emitter, ModelError, SystemKind, SystemParams};
use crate::observables::{self, ObservableError, ProbePair};
use crate::solver::{self, SolverError, Trajectory};

pub const DEFAULT_OMEGA0_GHZ: f64 = 3.276;
pub const DEFAULT_GAMMA_MHZ: f64 = 29.2;

/// Tolerances of the post-write CSV check.
const POPULATION_SLACK: f64 = 1e-9;
const ENTROPY_IDENTITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("unknown figure preset `{0}`")]
    UnknownPreset(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: row {row}: {message}")]
    CsvCheck {
        path: PathBuf,
        row: usize,
        message: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

impl CliError {
    fn invalid(field: &str, message: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation { .. } | CliError::Model(_) => "validation",
            CliError::UnknownPreset(_) => "unknown-preset",
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::CsvCheck { .. } => "csv-check",
            CliError::Solver(_) | CliError::Observable(_) => "numerical",
            CliError::Analysis(_) => "analysis",
        }
    }

    pub fn field(&self) -> Option<&str> {
        match self {
            CliError::Validation { field, .. } => Some(field),
            CliError::Model(ModelError::Domain { field, .. }) => Some(field),
            _ => None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "validation" | "unknown-preset" | "parse" => 2,
            "io" => 3,
            _ => 4,
        }
    }

    /// One-line JSON rendering for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {
                "kind": self.kind(),
                "field": self.field(),
                "message": self.to_string(),
            }
        })
        .to_string()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One simulation run. Unset optional fields take per-system defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub system: String,
    pub eta: f64,
    pub theta: f64,
    pub j_over_gamma: f64,
    /// Defaults to 8.7e-3, or 0 for the giant dimer.
    pub kappa_over_gamma: Option<f64>,
    pub omega0_over_gamma: f64,
    /// Pins the propagation phase; ω₀/γ is then taken as φ/η.
    pub phi: Option<f64>,
    pub initial: String,
    pub t_max_gamma: f64,
    pub steps_per_delay: usize,
    /// Column groups to write (`amplitudes`, `populations`, `P_tot`, `S`); empty means all.
    pub outputs: Vec<String>,
    pub output_path: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            system: SystemKind::SmallDimer.name().to_string(),
            eta: 0.56,
            theta: 0.0,
            j_over_gamma: 0.5,
            kappa_over_gamma: None,
            omega0_over_gamma: SystemParams::REFERENCE_OMEGA0,
            phi: None,
            initial: "a".to_string(),
            t_max_gamma: 15.0,
            steps_per_delay: solver::DEFAULT_STEPS_PER_DELAY,
            outputs: Vec::new(),
            output_path: PathBuf::from("trajectory.csv"),
        }
    }
}

/// A scenario after validation, ready to integrate.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub kind: SystemKind,
    pub params: SystemParams,
    pub system: DelayedLinearSystem,
    pub initial: Emitter,
    pub t_max_gamma: f64,
    pub steps_per_delay: usize,
    pub columns: ColumnSet,
}

impl ResolvedScenario {
    pub fn integrate(&self) -> Result<Trajectory, SolverError> {
        self.integrate_from(self.initial)
    }

    pub fn integrate_from(&self, initial: Emitter) -> Result<Trajectory, SolverError> {
        solver::integrate(
            &self.system,
            initial,
            self.t_max_gamma,
            self.steps_per_delay,
        )
    }
}

impl ScenarioConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, CliError> {
        read_json(path)
    }

    pub fn resolve(&self) -> Result<ResolvedScenario, CliError> {
        let kind: SystemKind = self.system.parse().map_err(|_| {
            CliError::invalid("system", format!("unknown system `{}`", self.system))
        })?;
        if kind == SystemKind::Custom {
            return Err(CliError::invalid(
                "system",
                "custom systems cannot be built from a scenario",
            ));
        }
        let initial: Emitter = self.initial.parse().map_err(|_| {
            CliError::invalid("initial", format!("unknown emitter `{}`", self.initial))
        })?;
        if !(self.t_max_gamma.is_finite() && self.t_max_gamma >= 0.0) {
            return Err(CliError::invalid(
                "t_max_gamma",
                "must be finite and non-negative",
            ));
        }
        if self.steps_per_delay < solver::MIN_STEPS_PER_DELAY {
            return Err(CliError::invalid(
                "steps_per_delay",
                format!("must be at least {}", solver::MIN_STEPS_PER_DELAY),
            ));
        }
        let kappa = self.kappa_over_gamma.unwrap_or(match kind {
            SystemKind::GiantDimer => 0.0,
            _ => SystemParams::REFERENCE_KAPPA,
        });
        let params = match self.phi {
            Some(phi) => {
                if !(self.eta > 0.0) {
                    return Err(CliError::invalid("phi", "pinning the phase needs eta > 0"));
                }
                SystemParams::with_phase(kappa, self.j_over_gamma, self.theta, self.eta, phi)?
            }
            None => SystemParams::new(
                self.omega0_over_gamma,
                kappa,
                self.j_over_gamma,
                self.theta,
                self.eta,
            )?,
        };
        let system = model::build(kind, &params)?;
        if initial.index() >= system.dimension {
            return Err(CliError::invalid(
                "initial",
                format!("emitter {initial} does not exist in a {}", kind.name()),
            ));
        }
        let columns = ColumnSet::from_names(&self.outputs)?;
        Ok(ResolvedScenario {
            kind,
            params,
            system,
            initial,
            t_max_gamma: self.t_max_gamma,
            steps_per_delay: self.steps_per_delay,
            columns,
        })
    }
}

/// Which column groups of the CSV schema are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnSet {
    pub amplitudes: bool,
    pub populations: bool,
    pub total: bool,
    pub entropy: bool,
}

impl ColumnSet {
    pub const ALL: ColumnSet = ColumnSet {
        amplitudes: true,
        populations: true,
        total: true,
        entropy: true,
    };

    pub fn from_names(names: &[String]) -> Result<Self, CliError> {
        if names.is_empty() {
            return Ok(Self::ALL);
        }
        let mut set = ColumnSet {
            amplitudes: false,
            populations: false,
            total: false,
            entropy: false,
        };
        for name in names {
            match name.as_str() {
                "amplitudes" | "c" => set.amplitudes = true,
                "populations" | "P" => set.populations = true,
                "P_tot" => set.total = true,
                "S" => set.entropy = true,
                other => {
                    return Err(CliError::invalid(
                        "outputs",
                        format!(
                        "unknown output `{other}` (expected amplitudes, populations, P_tot or S)"
                    ),
                    ))
                }
            }
        }
        Ok(set)
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `t_gamma,re_c_<label>…,im_c_<label>…,P_<label>…,P_tot,S`, restricted to `columns`.
pub fn csv_header(dimension: usize, columns: ColumnSet) -> String {
    let labels: Vec<&str> = Emitter::ALL[..dimension]
        .iter()
        .map(|e| e.label())
        .collect();
    let mut fields = vec!["t_gamma".to_string()];
    if columns.amplitudes {
        fields.extend(labels.iter().map(|l| format!("re_c_{l}")));
        fields.extend(labels.iter().map(|l| format!("im_c_{l}")));
    }
    if columns.populations {
        fields.extend(labels.iter().map(|l| format!("P_{l}")));
    }
    if columns.total {
        fields.push("P_tot".into());
    }
    if columns.entropy {
        fields.push("S".into());
    }
    fields.join(",")
}

pub fn trajectory_csv(traj: &Trajectory, columns: ColumnSet) -> String {
    let entropy = observables::linear_entropy(traj);
    let mut out = csv_header(traj.dimension(), columns);
    out.push('\n');
    for m in 0..traj.len() {
        let c = traj.amplitudes(m);
        let mut row = vec![num(traj.times()[m])];
        if columns.amplitudes {
            row.extend(c.iter().map(|z| num(z.re)));
            row.extend(c.iter().map(|z| num(z.im)));
        }
        if columns.populations {
            row.extend(c.iter().map(|z| num(z.norm_sqr())));
        }
        if columns.total {
            row.push(num(c.iter().map(|z| z.norm_sqr()).sum()));
        }
        if columns.entropy {
            row.push(num(entropy.values[m]));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Re-reads a written trajectory CSV and checks the population bound and
/// S = 2P_tot(1 − P_tot) on every row that carries those columns.
pub fn check_trajectory_csv(path: &Path) -> Result<usize, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| CliError::Parse {
            path: path.into(),
            message: "empty file".into(),
        })?
        .split(',')
        .collect();
    let col = |name: &str| header.iter().position(|h| *h == name);
    let (p_col, s_col) = (col("P_tot"), col("S"));
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let fail = |message: String| CliError::CsvCheck {
            path: path.into(),
            row: i + 1,
            message,
        };
        let values = line
            .split(',')
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| fail(e.to_string()))?;
        if values.len() != header.len() {
            return Err(fail(format!(
                "{} fields, header has {}",
                values.len(),
                header.len()
            )));
        }
        if let Some(p) = p_col.map(|j| values[j]) {
            if !(-POPULATION_SLACK..=1.0 + POPULATION_SLACK).contains(&p) {
                return Err(fail(format!("P_tot = {p} outside [0, 1]")));
            }
            if let Some(s) = s_col.map(|j| values[j]) {
                let expected = observables::entropy_from_total_population(p);
                if (s - expected).abs() > ENTROPY_IDENTITY_TOLERANCE {
                    return Err(fail(format!("S = {s} but 2P(1-P) = {expected}")));
                }
            }
        }
        rows += 1;
    }
    Ok(rows)
}

/// Derived quantities written to every manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRecord {
    pub system: String,
    pub dimension: usize,
    pub initial: Emitter,
    pub omega0_over_gamma: f64,
    pub kappa_over_gamma: f64,
    pub j_over_gamma: f64,
    pub theta: f64,
    pub eta: f64,
    pub phi: f64,
    pub tau: f64,
    pub h: f64,
    pub steps_per_delay: usize,
    pub t_max_gamma: f64,
    pub nodes: usize,
}

impl ResolvedRecord {
    fn new(resolved: &ResolvedScenario, traj: &Trajectory) -> Self {
        let p = &resolved.params;
        Self {
            system: resolved.kind.name().to_string(),
            dimension: resolved.system.dimension,
            initial: traj.initial_state().excited,
            omega0_over_gamma: p.omega0_over_gamma,
            kappa_over_gamma: p.kappa_over_gamma,
            j_over_gamma: p.j_modulus_over_gamma,
            theta: p.theta,
            eta: p.eta,
            phi: resolved.system.phi,
            tau: resolved.system.tau,
            h: traj.step(),
            steps_per_delay: resolved.steps_per_delay,
            t_max_gamma: resolved.t_max_gamma,
            nodes: traj.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioManifest {
    pub tool: String,
    pub version: String,
    pub config: ScenarioConfig,
    pub resolved: ResolvedRecord,
    pub csv: PathBuf,
    pub rows: usize,
    pub sha256: String,
}

pub fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("manifest.json")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("manifest types serialize");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.into(),
        message: e.to_string(),
    })
}

fn write_trajectory(
    resolved: &ResolvedScenario,
    traj: &Trajectory,
    config: &ScenarioConfig,
    path: &Path,
) -> Result<ScenarioManifest, CliError> {
    let csv = trajectory_csv(traj, resolved.columns);
    write_file(path, csv.as_bytes())?;
    let rows = check_trajectory_csv(path)?;
    let manifest = ScenarioManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        resolved: ResolvedRecord::new(resolved, traj),
        csv: path.to_path_buf(),
        rows,
        sha256: sha256_hex(csv.as_bytes()),
    };
    write_json(&manifest_path(path), &manifest)?;
    Ok(manifest)
}

/// Integrates one scenario, writes its CSV and `<csv stem>.manifest.json`.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioManifest, CliError> {
    let resolved = config.resolve()?;
    let traj = resolved.integrate()?;
    write_trajectory(&resolved, &traj, config, &config.output_path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Eta,
    Theta,
    JOverGamma,
    KappaOverGamma,
    Omega0OverGamma,
    Phi,
    TMaxGamma,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Eta => "eta",
            SweepParameter::Theta => "theta",
            SweepParameter::JOverGamma => "j_over_gamma",
            SweepParameter::KappaOverGamma => "kappa_over_gamma",
            SweepParameter::Omega0OverGamma => "omega0_over_gamma",
            SweepParameter::Phi => "phi",
            SweepParameter::TMaxGamma => "t_max_gamma",
        }
    }

    pub fn apply(self, config: &mut ScenarioConfig, value: f64) {
        match self {
            SweepParameter::Eta => config.eta = value,
            SweepParameter::Theta => config.theta = value,
            SweepParameter::JOverGamma => config.j_over_gamma = value,
            SweepParameter::KappaOverGamma => config.kappa_over_gamma = Some(value),
            SweepParameter::Omega0OverGamma => config.omega0_over_gamma = value,
            SweepParameter::Phi => config.phi = Some(value),
            SweepParameter::TMaxGamma => config.t_max_gamma = value,
        }
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
            CliError::invalid(
                "parameter",
                format!("`{s}` is not a sweepable scenario field"),
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub base: ScenarioConfig,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Also run the mirrored initial state and report the nonreciprocity metric.
    #[serde(default = "default_paired")]
    pub paired: bool,
    /// Keep one trajectory CSV per value next to the summary.
    #[serde(default)]
    pub keep_trajectories: bool,
    #[serde(default = "default_sweep_path")]
    pub output_path: PathBuf,
}

fn default_paired() -> bool {
    true
}

fn default_sweep_path() -> PathBuf {
    PathBuf::from("sweep.csv")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub metric: Option<f64>,
    pub p_tot_end: f64,
    pub circulation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub tool: String,
    pub version: String,
    pub config: SweepConfig,
    pub runs: Vec<ResolvedRecord>,
    pub rows: Vec<SweepRow>,
    pub csv: PathBuf,
    pub sha256: String,
}

/// The emitter whose run mirrors `initial` for the paired metric (a ↔ b).
fn mirror(initial: Emitter) -> Emitter {
    match initial {
        Emitter::A => Emitter::B,
        _ => Emitter::A,
    }
}

/// Probe pair for runs started in a and b: P_b of the first against P_a of the second.
fn paired_metric(first: &Trajectory, second: &Trajectory) -> Result<f64, ObservableError> {
    observables::nonreciprocity_metric(first, second, ProbePair::TRANSFER_AB)
}

fn circulation_label(traj: &Trajectory) -> Result<Option<String>, CliError> {
    if traj.dimension() != 3 {
        return Ok(None);
    }
    match observables::circulation_direction(traj) {
        Ok(c) => Ok(Some(c.label().to_string())),
        Err(ObservableError::Inconclusive(_)) => Ok(Some("inconclusive".to_string())),
        Err(e) => Err(e.into()),
    }
}

struct SweepPoint {
    row: SweepRow,
    record: ResolvedRecord,
    kept: Option<(ResolvedScenario, Trajectory, ScenarioConfig)>,
}

fn sweep_point(config: &SweepConfig, value: f64) -> Result<SweepPoint, CliError> {
    let mut scenario = config.base.clone();
    config.parameter.apply(&mut scenario, value);
    let resolved = scenario.resolve()?;
    let traj = resolved.integrate()?;
    let metric = if config.paired {
        let other = resolved.integrate_from(mirror(resolved.initial))?;
        let (a, b) = if resolved.initial == Emitter::B {
            (&other, &traj)
        } else {
            (&traj, &other)
        };
        Some(paired_metric(a, b)?)
    } else {
        None
    };
    let row = SweepRow {
        value,
        metric,
        p_tot_end: observables::total_population(&traj).last(),
        circulation: circulation_label(&traj)?,
    };
    let record = ResolvedRecord::new(&resolved, &traj);
    let kept = config.keep_trajectories.then_some((resolved, traj, scenario));
    Ok(SweepPoint { row, record, kept })
}

pub fn sweep_csv(parameter: SweepParameter, rows: &[SweepRow]) -> String {
    let mut out = format!("{},metric,P_tot_end,circulation\n", parameter.name());
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            num(r.value),
            r.metric.map(num).unwrap_or_default(),
            num(r.p_tot_end),
            r.circulation.as_deref().unwrap_or("")
        );
    }
    out
}

/// Computes the summary rows concurrently without writing anything.
pub fn sweep_rows(config: &SweepConfig) -> Result<Vec<SweepRow>, CliError> {
    Ok(sweep_points(config)?.into_iter().map(|p| p.row).collect())
}

fn sweep_points(config: &SweepConfig) -> Result<Vec<SweepPoint>, CliError> {
    if config.values.is_empty() {
        return Err(CliError::invalid(
            "values",
            "sweep needs at least one value",
        ));
    }
    if let Some(v) = config.values.iter().find(|v| !v.is_finite()) {
        return Err(CliError::invalid("values", format!("non-finite value {v}")));
    }
    config
        .values
        .par_iter()
        .map(|&v| sweep_point(config, v))
        .collect()
}

/// Runs every swept value (in parallel) and writes one summary CSV with its
/// manifest; outputs are collected in value order.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepManifest, CliError> {
    let points = sweep_points(config)?;
    let mut rows = Vec::with_capacity(points.len());
    let mut runs = Vec::with_capacity(points.len());
    for (i, point) in points.into_iter().enumerate() {
        if let Some((resolved, traj, scenario)) = &point.kept {
            let stem = config.output_path.with_extension("");
            let path = PathBuf::from(format!("{}_{i:03}.csv", stem.display()));
            write_trajectory(resolved, traj, scenario, &path)?;
        }
        rows.push(point.row);
        runs.push(point.record);
    }
    let csv = sweep_csv(config.parameter, &rows);
    write_file(&config.output_path, csv.as_bytes())?;
    let manifest = SweepManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        runs,
        rows,
        csv: config.output_path.clone(),
        sha256: sha256_hex(csv.as_bytes()),
    };
    write_json(&manifest_path(&config.output_path), &manifest)?;
    Ok(manifest)
}

pub const PRESET_NAMES: [&str; 22] = [
    "fig2a", "fig2b", "fig2c", "fig2d", "fig2e", "fig2f", "fig3a", "fig3b", "fig3c", "fig3d",
    "fig4a", "fig4b", "fig4c", "fig4d", "fig5a", "fig5b", "fig5c", "fig5d", "fig5e", "fig5f",
    "figB2a", "figB2b",
];

/// Summary quantity of a preset panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PanelKind {
    /// Runs from a and b; reports max |P_b(a) − P_a(b)|.
    Transfer,
    /// One trimer run; reports the circulation label.
    Circulation,
    /// Trimer runs from a and b; reports max |S(a) − S(b)|.
    Entropy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresetPanel {
    pub tag: String,
    pub kind: PanelKind,
    pub runs: Vec<ScenarioConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigurePreset {
    pub name: String,
    pub t_max_gamma: f64,
    pub panels: Vec<PresetPanel>,
}

fn dimer_pair(base: &ScenarioConfig) -> Vec<ScenarioConfig> {
    ["a", "b"]
        .iter()
        .map(|init| ScenarioConfig {
            initial: init.to_string(),
            ..base.clone()
        })
        .collect()
}

/// Parameter sets of the named figure preset, without running them.
pub fn figure_preset(name: &str) -> Result<FigurePreset, CliError> {
    let small = |theta: f64, eta: f64| ScenarioConfig {
        system: SystemKind::SmallDimer.name().into(),
        theta,
        eta,
        j_over_gamma: 0.5,
        t_max_gamma: 15.0,
        ..ScenarioConfig::default()
    };
    let trimer = |theta: f64, initial: &str, t_max: f64| ScenarioConfig {
        system: SystemKind::GiantTrimer.name().into(),
        theta,
        eta: 0.56,
        j_over_gamma: 1.0,
        initial: initial.into(),
        t_max_gamma: t_max,
        ..ScenarioConfig::default()
    };
    let giant = |eta: f64, phi: f64| ScenarioConfig {
        system: SystemKind::GiantDimer.name().into(),
        theta: PI / 2.0,
        eta,
        phi: Some(phi),
        kappa_over_gamma: Some(0.0),
        j_over_gamma: 0.5,
        t_max_gamma: 50.0,
        ..ScenarioConfig::default()
    };
    let transfer = |tag: &str, base: ScenarioConfig| PresetPanel {
        tag: tag.into(),
        kind: PanelKind::Transfer,
        runs: dimer_pair(&base),
    };
    let single = |tag: &str, cfg: ScenarioConfig| PresetPanel {
        tag: tag.into(),
        kind: PanelKind::Circulation,
        runs: vec![cfg],
    };
    let both = |tag: &str, kind: PanelKind, theta: f64, t_max: f64| PresetPanel {
        tag: tag.into(),
        kind,
        runs: vec![trimer(theta, "a", t_max), trimer(theta, "b", t_max)],
    };
    let half = PI / 2.0;
    let panels = match name {
        "fig2a" => vec![transfer("", small(0.0, 0.56))],
        "fig2b" => vec![transfer("", small(0.0, 0.574))],
        "fig2c" => vec![transfer("", small(0.0, 0.588))],
        "fig2d" => vec![transfer("", small(PI / 4.0, 0.56))],
        "fig2e" => vec![transfer("", small(half, 0.56))],
        "fig2f" => vec![transfer("", small(PI, 0.56))],
        "fig3a" => vec![transfer("", small(half, 0.56))],
        "fig3b" => vec![transfer("", small(half, 0.574))],
        "fig3c" => vec![transfer("", small(half, 0.588))],
        "fig3d" => [0.056, 0.56, 1.12]
            .iter()
            .map(|&eta| transfer(&format!("eta{eta}"), small(half, eta)))
            .collect(),
        "fig4a" => vec![both("", PanelKind::Transfer, 0.0, 15.0)],
        "fig4b" => vec![both("", PanelKind::Transfer, half, 15.0)],
        "fig4c" => vec![single("", trimer(half, "a", 15.0))],
        "fig4d" => vec![single("", trimer(half, "b", 15.0))],
        "fig5a" => vec![single("", trimer(half, "a", 40.0))],
        "fig5b" => vec![single("", trimer(half, "b", 40.0))],
        "fig5c" => vec![single("", trimer(0.0, "a", 40.0))],
        "fig5d" => vec![single("", trimer(0.0, "b", 40.0))],
        "fig5e" => vec![both("", PanelKind::Entropy, half, 40.0)],
        "fig5f" => vec![both("", PanelKind::Entropy, 0.0, 40.0)],
        "figB2a" => vec![transfer("", giant(0.154, 5.5 * PI))],
        "figB2b" => vec![transfer("", giant(0.014, 0.5 * PI))],
        other => return Err(CliError::UnknownPreset(other.to_string())),
    };
    let t_max_gamma = panels[0].runs[0].t_max_gamma;
    Ok(FigurePreset {
        name: name.to_string(),
        t_max_gamma,
        panels,
    })
}

impl FigurePreset {
    /// Overrides the horizon and resolution of every run.
    pub fn with_overrides(
        mut self,
        t_max_gamma: Option<f64>,
        steps_per_delay: Option<usize>,
    ) -> Self {
        for run in self.panels.iter_mut().flat_map(|p| p.runs.iter_mut()) {
            if let Some(t) = t_max_gamma {
                run.t_max_gamma = t;
            }
            if let Some(n) = steps_per_delay {
                run.steps_per_delay = n;
            }
        }
        if let Some(t) = t_max_gamma {
            self.t_max_gamma = t;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRun {
    pub csv: PathBuf,
    pub sha256: String,
    pub resolved: ResolvedRecord,
    pub p_tot_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSummary {
    pub tag: String,
    pub kind: PanelKind,
    pub runs: Vec<PanelRun>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonreciprocity_metric: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub circulation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetManifest {
    pub tool: String,
    pub version: String,
    pub preset: String,
    pub t_max_gamma: f64,
    pub panels: Vec<PanelSummary>,
}

fn entropy_gap(first: &Trajectory, second: &Trajectory) -> f64 {
    let s1 = observables::linear_entropy(first).values;
    let s2 = observables::linear_entropy(second).values;
    s1.iter()
        .zip(&s2)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Runs a preset and writes `<dir>/<preset>[_<tag>]_init_<x>.csv` per run
/// plus `<dir>/<preset>.manifest.json`.
pub fn run_figure_preset(
    preset: &FigurePreset,
    out_dir: &Path,
) -> Result<PresetManifest, CliError> {
    let jobs: Vec<(usize, ScenarioConfig)> = preset
        .panels
        .iter()
        .enumerate()
        .flat_map(|(i, p)| p.runs.iter().map(move |r| (i, r.clone())))
        .collect();
    let integrated = jobs
        .par_iter()
        .map(|(_, cfg)| {
            let resolved = cfg.resolve()?;
            let traj = resolved.integrate()?;
            Ok((resolved, traj))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut panels = Vec::with_capacity(preset.panels.len());
    let mut cursor = integrated.iter().zip(&jobs);
    for panel in &preset.panels {
        let mut runs = Vec::new();
        let mut trajs = Vec::new();
        for _ in &panel.runs {
            let ((resolved, traj), (_, cfg)) = cursor.next().expect("one result per job");
            let stem = if panel.tag.is_empty() {
                preset.name.clone()
            } else {
                format!("{}_{}", preset.name, panel.tag)
            };
            let path = out_dir.join(format!("{stem}_init_{}.csv", resolved.initial));
            let config = ScenarioConfig {
                output_path: path.clone(),
                ..cfg.clone()
            };
            let manifest = write_trajectory(resolved, traj, &config, &path)?;
            runs.push(PanelRun {
                csv: path,
                sha256: manifest.sha256,
                resolved: manifest.resolved,
                p_tot_end: observables::total_population(traj).last(),
            });
            trajs.push(traj);
        }
        let mut summary = PanelSummary {
            tag: panel.tag.clone(),
            kind: panel.kind,
            runs,
            nonreciprocity_metric: None,
            circulation: None,
            entropy_gap: None,
        };
        match panel.kind {
            PanelKind::Transfer => {
                summary.nonreciprocity_metric = Some(paired_metric(trajs[0], trajs[1])?)
            }
            PanelKind::Circulation => summary.circulation = circulation_label(trajs[0])?,
            PanelKind::Entropy => summary.entropy_gap = Some(entropy_gap(trajs[0], trajs[1])),
        }
        panels.push(summary);
    }
    let manifest = PresetManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        preset: preset.name.clone(),
        t_max_gamma: preset.t_max_gamma,
        panels,
    };
    write_json(
        &out_dir.join(format!("{}.manifest.json", preset.name)),
        &manifest,
    )?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexValue {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdomainSample {
    pub s: f64,
    pub forward: ComplexValue,
    pub backward: ComplexValue,
    pub modulus_asymmetry: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub system: String,
    pub phi: f64,
    pub tau: f64,
    pub effective_matrix: Vec<Vec<ComplexValue>>,
    pub eigenvalues: Vec<ComplexValue>,
    pub decay_rates: Vec<f64>,
    pub lossless_mode: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub braided_indirect_coupling: Option<ComplexValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reciprocity_predicted: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymmetry_polynomial: Option<Vec<f64>>,
    pub sdomain: Vec<SdomainSample>,
}

pub const DEFAULT_S_SAMPLES: [f64; 3] = [0.1, 1.0, 10.0];

/// Markovian collapse and, for dimers, the s-domain reciprocity analysis.
pub fn analyze(config: &ScenarioConfig, s_samples: &[f64]) -> Result<AnalysisReport, CliError> {
    let resolved = config.resolve()?;
    let sys = &resolved.system;
    let eff = analysis::markovian_effective_matrix(sys)?;
    let d = sys.dimension;
    let dimer = d == 2;
    let sdomain = if dimer {
        s_samples
            .iter()
            .map(|&s| {
                let pair = analysis::sdomain_coupling_pair(sys, Complex64::from(s))?;
                Ok(SdomainSample {
                    s,
                    forward: pair.forward.into(),
                    backward: pair.backward.into(),
                    modulus_asymmetry: pair.forward.norm_sqr() - pair.backward.norm_sqr(),
                })
            })
            .collect::<Result<_, AnalysisError>>()?
    } else {
        Vec::new()
    };
    Ok(AnalysisReport {
        system: resolved.kind.name().into(),
        phi: sys.phi,
        tau: sys.tau,
        effective_matrix: (0..d)
            .map(|j| (0..d).map(|l| eff.matrix[(j, l)].into()).collect())
            .collect(),
        eigenvalues: eff.eigenvalues.iter().map(|&z| z.into()).collect(),
        decay_rates: eff.decay_rates(),
        lossless_mode: eff.has_lossless_mode(),
        braided_indirect_coupling: (resolved.kind == SystemKind::GiantDimer)
            .then(|| analysis::braided_indirect_coupling(sys.phi).into()),
        reciprocity_predicted: dimer
            .then(|| analysis::reciprocity_predicted(sys))
            .transpose()?,
        asymmetry_polynomial: dimer
            .then(|| analysis::asymmetry_polynomial(sys))
            .transpose()?,
        sdomain,
    })
}

/// Parses `1.57`, `pi`, `-pi/2`, `3pi/4`, `0.5pi` or `20.5*pi`.
pub fn parse_angle(text: &str) -> Result<f64, String> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let t = t.to_ascii_lowercase().replace('π', "pi");
    if let Ok(x) = t.parse::<f64>() {
        return Ok(x);
    }
    let (negative, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.as_str()),
    };
    let (numerator, denominator) = match body.split_once('/') {
        Some((n, d)) => (
            n,
            d.parse::<f64>()
                .map_err(|_| format!("bad angle `{text}`"))?,
        ),
        None => (body, 1.0),
    };
    let factor = numerator
        .strip_suffix("pi")
        .map(|k| k.trim_end_matches('*'))
        .ok_or_else(|| format!("bad angle `{text}`"))?;
    let k = if factor.is_empty() {
        1.0
    } else {
        factor
            .parse::<f64>()
            .map_err(|_| format!("bad angle `{text}`"))?
    };
    let value = k * PI / denominator;
    Ok(if negative { -value } else { value })
}

#[derive(Debug, Parser)]
#[command(
    name = "retarded-transfer",
    version,
    about = "Retarded excitation transfer between waveguide emitters"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one scenario and write its CSV and manifest.
    Simulate(SimulateArgs),
    /// Run a scenario for each value of one parameter.
    Sweep(SweepArgs),
    /// Run a named figure preset.
    Figure(FigureArgs),
    /// Print the Markovian and s-domain analysis of a scenario as JSON.
    Analyze(AnalyzeArgs),
}

/// Scenario fields; anything given here overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioFlags {
    /// JSON scenario file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// small-dimer, giant-dimer or trimer.
    #[arg(long)]
    pub system: Option<String>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Coupling phase; accepts forms like `pi/2`.
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    #[arg(long = "j")]
    pub j_over_gamma: Option<f64>,
    #[arg(long = "kappa")]
    pub kappa_over_gamma: Option<f64>,
    #[arg(long = "omega0", conflicts_with_all = ["omega0_ghz", "gamma_mhz"])]
    pub omega0_over_gamma: Option<f64>,
    /// Emitter frequency ω₀/2π in GHz (with --gamma-mhz, default 3.276).
    #[arg(long)]
    pub omega0_ghz: Option<f64>,
    /// Waveguide decay rate γ/2π in MHz (with --omega0-ghz, default 29.2).
    #[arg(long)]
    pub gamma_mhz: Option<f64>,
    /// Pin the propagation phase (ω₀/γ becomes φ/η); accepts `20.5pi`.
    #[arg(long, value_parser = parse_angle)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub initial: Option<String>,
    #[arg(long = "t-max")]
    pub t_max_gamma: Option<f64>,
    #[arg(long)]
    pub steps_per_delay: Option<usize>,
    /// Comma-separated column groups: amplitudes, populations, P_tot, S.
    #[arg(long, value_delimiter = ',')]
    pub outputs: Option<Vec<String>>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

impl ScenarioFlags {
    pub fn scenario(&self) -> Result<ScenarioConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::from_json_file(path)?,
            None => ScenarioConfig::default(),
        };
        self.apply(&mut cfg)?;
        Ok(cfg)
    }

    pub fn apply(&self, cfg: &mut ScenarioConfig) -> Result<(), CliError> {
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = &self.$flag { cfg.$field = v.clone(); })*
            };
        }
        set!(system => system, eta => eta, theta => theta, j_over_gamma => j_over_gamma,
             omega0_over_gamma => omega0_over_gamma, initial => initial,
             t_max_gamma => t_max_gamma, steps_per_delay => steps_per_delay,
             outputs => outputs, output => output_path);
        if let Some(k) = self.kappa_over_gamma {
            cfg.kappa_over_gamma = Some(k);
        }
        if let Some(p) = self.phi {
            cfg.phi = Some(p);
        }
        if self.omega0_ghz.is_some() || self.gamma_mhz.is_some() {
            cfg.omega0_over_gamma = omega0_over_gamma_from_units(
                self.omega0_ghz.unwrap_or(DEFAULT_OMEGA0_GHZ),
                self.gamma_mhz.unwrap_or(DEFAULT_GAMMA_MHZ),
            )?;
        }
        Ok(())
    }
}

/// ω₀/γ from ω₀/2π in GHz and γ/2π in MHz.
pub fn omega0_over_gamma_from_units(omega0_ghz: f64, gamma_mhz: f64) -> Result<f64, CliError> {
    if !(gamma_mhz > 0.0 && gamma_mhz.is_finite()) {
        return Err(CliError::invalid("gamma_mhz", "must be positive"));
    }
    Ok(omega0_ghz * 1e3 / gamma_mhz)
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioFlags,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON sweep file (`base`, `parameter`, `values`, ...).
    #[arg(long = "sweep-config")]
    pub sweep_config: Option<PathBuf>,
    #[command(flatten)]
    pub scenario: ScenarioFlags,
    /// Scenario field to vary.
    #[arg(long)]
    pub parameter: Option<String>,
    /// Comma-separated values; angles accept `pi/2` forms.
    #[arg(long, value_parser = parse_angle, value_delimiter = ',', allow_hyphen_values = true)]
    pub values: Option<Vec<f64>>,
    /// Skip the mirrored run (no nonreciprocity metric).
    #[arg(long)]
    pub unpaired: bool,
    /// Also write one trajectory CSV per value.
    #[arg(long)]
    pub keep_trajectories: bool,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    /// Preset name, e.g. fig2e or figB2b; `list` prints all names.
    pub name: String,
    #[arg(long, default_value = "figures")]
    pub out_dir: PathBuf,
    #[arg(long = "t-max")]
    pub t_max_gamma: Option<f64>,
    #[arg(long)]
    pub steps_per_delay: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub scenario: ScenarioFlags,
    /// Real Laplace variables at which to sample the coupling pair.
    #[arg(long = "s", value_delimiter = ',')]
    pub s_samples: Option<Vec<f64>>,
}

impl SweepArgs {
    pub fn sweep(&self) -> Result<SweepConfig, CliError> {
        let mut cfg = match &self.sweep_config {
            Some(path) => read_json::<SweepConfig>(path)?,
            None => {
                let name = self.parameter.as_deref().ok_or_else(|| {
                    CliError::invalid("parameter", "missing (use --parameter or --sweep-config)")
                })?;
                SweepConfig {
                    base: ScenarioConfig::default(),
                    parameter: name.parse()?,
                    values: Vec::new(),
                    paired: true,
                    keep_trajectories: false,
                    output_path: default_sweep_path(),
                }
            }
        };
        if let Some(path) = &self.scenario.config {
            cfg.base = ScenarioConfig::from_json_file(path)?;
        }
        let output = self.scenario.output.clone();
        let base_flags = ScenarioFlags {
            output: None,
            ..self.scenario.clone()
        };
        base_flags.apply(&mut cfg.base)?;
        if let Some(name) = &self.parameter {
            cfg.parameter = name.parse()?;
        }
        if let Some(values) = &self.values {
            cfg.values = values.clone();
        }
        if let Some(path) = output {
            cfg.output_path = path;
        }
        if self.unpaired {
            cfg.paired = false;
        }
        if self.keep_trajectories {
            cfg.keep_trajectories = true;
        }
        Ok(cfg)
    }
}

/// Executes a parsed command; what it prints goes to stdout.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Simulate(args) => {
            let manifest = run_scenario(&args.scenario.scenario()?)?;
            Ok(pretty(&manifest))
        }
        Command::Sweep(args) => Ok(pretty(&run_sweep(&args.sweep()?)?)),
        Command::Figure(args) => {
            if args.name == "list" {
                return Ok(PRESET_NAMES.join("\n"));
            }
            let preset =
                figure_preset(&args.name)?.with_overrides(args.t_max_gamma, args.steps_per_delay);
            Ok(pretty(&run_figure_preset(&preset, &args.out_dir)?))
        }
        Command::Analyze(args) => {
            let samples = args
                .s_samples
                .clone()
                .unwrap_or_else(|| DEFAULT_S_SAMPLES.to_vec());
            let report = analyze(&args.scenario.scenario()?, &samples)?;
            let text = pretty(&report);
            if let Some(path) = &args.scenario.output {
                write_file(path, format!("{text}\n").as_bytes())?;
            }
            Ok(text)
        }
    }
}

fn pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize")
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(text) => {
            use std::io::Write;
            // a closed pipe downstream is not an error of the run
            let _ = writeln!(std::io::stdout(), "{text}");
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
