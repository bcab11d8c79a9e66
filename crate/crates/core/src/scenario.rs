//! Scenario configuration, the builtin figure scenarios, cross-model
//! comparison and file emission.
//!
//! A scenario is a JSON document. Dynamics scenarios look like
//!
//! ```json
//! { "kind": "dynamics", "name": "demo", "g_over_w0": 5.18, "wq_over_w0": 0.0,
//!   "qubit": "band1", "periods": 2, "models": ["full", "periodic", "rabi"] }
//! ```
//!
//! and band scans like `{ "kind": "bands", "name": "b", "v": 2.0 }`. A config
//! file holds one scenario or an array of them.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bands::{self, BandTable};
use crate::error::{Error, Result};
use crate::fock::{self, FockState, RabiPropagator};
use crate::full::{self, DtTrial, FullPropagator, GridSpec, QubitAmplitudes};
use crate::io;
use crate::periodic::{self, PeriodicPropagator};
use crate::series::{record_times, ObservableSeries, Sample};
use crate::units::{RabiParams, SystemParams};

pub const DEFAULT_BREAKDOWN_THRESHOLD: f64 = 0.05;
pub const DEFAULT_ENERGY_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_PERIODS: f64 = 2.0;
pub const RECORDS_PER_PERIOD: usize = 100;
/// Half width of the Brillouin zone, the scale of the breakdown threshold.
pub const BZ_HALF_WIDTH: f64 = 2.0;
/// Observables compared between models. Leakage is reported separately.
pub const COMPARED: [&str; 8] = ["x", "p", "q", "sigma_x", "sigma_z", "p_in", "norm", "energy"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Full,
    Periodic,
    Rabi,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::Full, Model::Periodic, Model::Rabi];

    pub fn name(self) -> &'static str {
        match self {
            Model::Full => "full",
            Model::Periodic => "periodic",
            Model::Rabi => "rabi",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Model::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown model {s:?}; expected full, periodic or rabi")))
    }
}

/// Initial qubit state: `"band0"`, `"band1"`, `"equal"` or explicit
/// `{"c0": [re, im], "c1": [re, im]}` (normalised on use).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QubitSpec {
    Named(String),
    Amplitudes { c0: [f64; 2], c1: [f64; 2] },
}

impl QubitSpec {
    pub fn amplitudes(&self) -> Result<QubitAmplitudes> {
        match self {
            QubitSpec::Named(n) => match n.as_str() {
                "band0" => Ok(QubitAmplitudes::band0()),
                "band1" => Ok(QubitAmplitudes::band1()),
                "equal" => Ok(QubitAmplitudes::equal()),
                other => Err(Error::Config(format!(
                    "unknown qubit state {other:?}; expected band0, band1, equal or amplitudes"
                ))),
            },
            QubitSpec::Amplitudes { c0, c1 } => QubitAmplitudes::new(
                Complex64::new(c0[0], c0[1]),
                Complex64::new(c1[0], c1[1]),
            ),
        }
    }
}

fn default_models() -> Vec<Model> {
    Model::ALL.to_vec()
}
fn default_qubit() -> QubitSpec {
    QubitSpec::Named("band1".into())
}
fn default_cutoff() -> usize {
    fock::DEFAULT_CUTOFF
}
fn default_threshold() -> f64 {
    DEFAULT_BREAKDOWN_THRESHOLD
}
fn default_energy_tolerance() -> f64 {
    DEFAULT_ENERGY_TOLERANCE
}
fn default_n_bands() -> usize {
    4
}
fn default_q_resolution() -> usize {
    401
}
fn default_n_max() -> usize {
    bands::DEFAULT_N_MAX
}

/// Time evolution of one parameter set under a subset of the models.
///
/// Physical parameters come either as `(v, w0)` or as the ratios
/// `(g_over_w0, wq_over_w0)`. The window is `t_max` or, failing that,
/// `periods` trap periods. Without `dt` the step is chosen by the time-step
/// rule and then halved until energy is conserved to `energy_tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub name: String,
    #[serde(default = "default_models")]
    pub models: Vec<Model>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_over_w0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wq_over_w0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w0: Option<f64>,
    #[serde(default = "default_qubit")]
    pub qubit: QubitSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    /// Records after `t = 0`; defaults to 100 per trap period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_records: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_points: Option<usize>,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    /// Store the full model's momentum distribution every this many records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
    #[serde(default = "default_threshold")]
    pub breakdown_threshold: f64,
    #[serde(default = "default_energy_tolerance")]
    pub energy_tolerance: f64,
    /// Rerun with halved dt, doubled grid and reduced cutoff to report
    /// convergence deltas.
    #[serde(default)]
    pub convergence: bool,
}

impl DynamicsConfig {
    pub fn new(name: &str, g_over_w0: f64, wq_over_w0: f64) -> Self {
        Self {
            name: name.to_string(),
            models: default_models(),
            g_over_w0: Some(g_over_w0),
            wq_over_w0: Some(wq_over_w0),
            v: None,
            w0: None,
            qubit: default_qubit(),
            periods: None,
            t_max: None,
            n_records: None,
            dt: None,
            n_points: None,
            band_points: None,
            cutoff: default_cutoff(),
            snapshot_every: None,
            breakdown_threshold: default_threshold(),
            energy_tolerance: default_energy_tolerance(),
            convergence: false,
        }
    }

    pub fn params(&self) -> Result<SystemParams> {
        match (self.v, self.w0, self.g_over_w0, self.wq_over_w0) {
            (Some(v), Some(w0), None, None) => SystemParams::new(v, w0),
            (None, None, Some(g), wq) => SystemParams::from_ratios(g, wq.unwrap_or(0.0)),
            _ => Err(Error::Config(format!(
                "scenario {:?}: give either v and w0 or g_over_w0 (and wq_over_w0), not a mix",
                self.name
            ))),
        }
    }

    /// Resolves parameters, window and grid, checking every sizing rule.
    pub fn resolve(&self) -> Result<Resolved> {
        let params = self.params()?;
        if self.models.is_empty() {
            return Err(Error::Config(format!("scenario {:?} selects no model", self.name)));
        }
        let period = params.trap_period();
        let t_max = match (self.t_max, self.periods) {
            (Some(t), _) => t,
            (None, Some(p)) => p * period,
            (None, None) => DEFAULT_PERIODS * period,
        };
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::Config(format!("t_max must be positive, got {t_max}")));
        }
        let n_records = self
            .n_records
            .unwrap_or_else(|| ((t_max / period) * RECORDS_PER_PERIOD as f64).round().max(1.0) as usize);
        let mut grid = GridSpec::for_params(&params, t_max, n_records)?;
        if let Some(m) = self.band_points {
            let n = self.n_points.unwrap_or(8 * m);
            grid = GridSpec::with_band_points(m, n).with_time(t_max, n_records, grid.dt);
        } else if let Some(n) = self.n_points {
            grid.n_points = n;
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config(format!("dt must be positive, got {dt}")));
            }
            grid = grid.with_time(t_max, n_records, dt);
        }
        grid.validate(&params)?;
        if !(self.breakdown_threshold > 0.0) {
            return Err(Error::Config("breakdown_threshold must be positive".into()));
        }
        if self.cutoff < 1 {
            return Err(Error::Config("cutoff must be at least 1".into()));
        }
        Ok(Resolved {
            params,
            rabi: params.to_rabi_params(),
            qubit: self.qubit.amplitudes()?,
            grid,
            t_max,
            n_records,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    pub params: SystemParams,
    pub rabi: RabiParams,
    pub qubit: QubitAmplitudes,
    pub grid: GridSpec,
    pub t_max: f64,
    pub n_records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandsConfig {
    pub name: String,
    pub v: f64,
    #[serde(default = "default_n_bands")]
    pub n_bands: usize,
    #[serde(default = "default_q_resolution")]
    pub q_resolution: usize,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Scenario {
    Bands(BandsConfig),
    Dynamics(DynamicsConfig),
}

impl Scenario {
    pub fn name(&self) -> &str {
        match self {
            Scenario::Bands(b) => &b.name,
            Scenario::Dynamics(d) => &d.name,
        }
    }
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 9] = [
    "fig1", "fig2", "fig2-ddsc", "fig2-dsc", "fig3", "fig3-ddsc", "fig3-dsc", "fig4", "all",
];

/// Builtin figure scenarios. Group names (`fig2`, `fig3`, `all`) expand to
/// several scenarios.
pub fn builtin(name: &str) -> Result<Vec<Scenario>> {
    let fig2 = |n: &str, wq: f64| {
        let mut c = DynamicsConfig::new(n, 5.18, wq);
        c.convergence = true;
        Scenario::Dynamics(c)
    };
    let fig3 = |n: &str, g: f64, wq: f64| {
        let mut c = DynamicsConfig::new(n, g, wq);
        c.qubit = QubitSpec::Named("band0".into());
        c.snapshot_every = Some(RECORDS_PER_PERIOD / 4);
        c.convergence = true;
        Scenario::Dynamics(c)
    };
    let one = match name {
        "fig1" => Scenario::Bands(BandsConfig {
            name: "fig1".into(),
            v: 2.0,
            n_bands: default_n_bands(),
            q_resolution: default_q_resolution(),
            n_max: default_n_max(),
        }),
        "fig2-ddsc" => fig2("fig2-ddsc", 28.7),
        "fig2-dsc" => fig2("fig2-dsc", 0.0),
        // g/ω_q = 0.43
        "fig3-ddsc" => fig3("fig3-ddsc", 7.7, 7.7 / 0.43),
        "fig3-dsc" => fig3("fig3-dsc", 10.0, 1.0),
        "fig4" => {
            let mut c = DynamicsConfig::new("fig4", 5.18, 0.0);
            c.periods = Some(6.0);
            c.convergence = true;
            Scenario::Dynamics(c)
        }
        "fig2" => return Ok(vec![builtin("fig2-ddsc")?.remove(0), builtin("fig2-dsc")?.remove(0)]),
        "fig3" => return Ok(vec![builtin("fig3-ddsc")?.remove(0), builtin("fig3-dsc")?.remove(0)]),
        "all" => {
            let mut all = Vec::new();
            for n in ["fig1", "fig2", "fig3", "fig4"] {
                all.extend(builtin(n)?);
            }
            return Ok(all);
        }
        other => {
            return Err(Error::Usage(format!(
                "unknown scenario {other:?}; builtins are {}",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    Ok(vec![one])
}

/// Parses a config document holding one scenario or an array of them.
pub fn parse_config(text: &str) -> Result<Vec<Scenario>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let list = match value {
        serde_json::Value::Array(items) => items,
        other => vec![other],
    };
    let scenarios = list
        .into_iter()
        .map(|v| serde_json::from_value(v).map_err(|e| Error::Config(e.to_string())))
        .collect::<Result<Vec<Scenario>>>()?;
    if scenarios.is_empty() {
        return Err(Error::Config("config holds no scenario".into()));
    }
    Ok(scenarios)
}

pub fn load_config(path: &Path) -> Result<Vec<Scenario>> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub observable: String,
    pub max_abs: f64,
    pub rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub a: String,
    pub b: String,
    pub threshold: f64,
    pub deviations: Vec<Deviation>,
    /// First record time with `|Δq| > threshold·2ħk0`.
    pub breakdown_time: Option<f64>,
    /// Larger of the two leakages at every record.
    pub leakage: Vec<f64>,
}

impl ComparisonReport {
    pub fn deviation(&self, observable: &str) -> Option<&Deviation> {
        self.deviations.iter().find(|d| d.observable == observable)
    }
}

/// Checks that two series share their record times.
pub fn same_times(a: &ObservableSeries, b: &ObservableSeries) -> bool {
    a.len() == b.len()
        && a.samples
            .iter()
            .zip(&b.samples)
            .all(|(x, y)| (x.t - y.t).abs() <= 1e-9 * x.t.abs().max(1.0))
}

/// Deviation metrics between two runs on a common time grid.
pub fn compare(
    a: &ObservableSeries,
    b: &ObservableSeries,
    threshold: f64,
) -> Result<ComparisonReport> {
    compare_named("a", a, "b", b, threshold)
}

pub fn compare_named(
    a_name: &str,
    a: &ObservableSeries,
    b_name: &str,
    b: &ObservableSeries,
    threshold: f64,
) -> Result<ComparisonReport> {
    if !same_times(a, b) {
        return Err(Error::Usage(format!(
            "series {a_name} ({} records) and {b_name} ({} records) do not share record times",
            a.len(),
            b.len()
        )));
    }
    if !(threshold > 0.0) {
        return Err(Error::Usage(format!("threshold must be positive, got {threshold}")));
    }
    let n = a.len().max(1) as f64;
    let deviations = COMPARED
        .iter()
        .map(|&name| {
            let (mut max_abs, mut sq) = (0.0f64, 0.0);
            for (x, y) in a.samples.iter().zip(&b.samples) {
                let d = (x.get(name).unwrap_or(0.0) - y.get(name).unwrap_or(0.0)).abs();
                max_abs = max_abs.max(d);
                sq += d * d;
            }
            Deviation { observable: name.to_string(), max_abs, rms: (sq / n).sqrt() }
        })
        .collect();
    let breakdown_time = a
        .samples
        .iter()
        .zip(&b.samples)
        .find(|(x, y)| (x.q - y.q).abs() > threshold * BZ_HALF_WIDTH)
        .map(|(x, _)| x.t);
    let leakage = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| x.leakage.max(y.leakage))
        .collect();
    Ok(ComparisonReport {
        a: a_name.to_string(),
        b: b_name.to_string(),
        threshold,
        deviations,
        breakdown_time,
        leakage,
    })
}

/// Largest absolute difference over every recorded observable.
pub fn max_delta(a: &ObservableSeries, b: &ObservableSeries) -> Result<f64> {
    if !same_times(a, b) {
        return Err(Error::Usage("series do not share record times".into()));
    }
    Ok(a.samples
        .iter()
        .zip(&b.samples)
        .flat_map(|(x, y)| {
            let (x, y) = (x.values(), y.values());
            (1..Sample::COLUMNS.len()).map(move |i| (x[i] - y[i]).abs())
        })
        .fold(0.0, f64::max))
}

/// Sensitivity of the run to its discretisation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceEvidence {
    /// Probe runs of the automatic time-step choice.
    pub dt_trials: Vec<DtTrial>,
    /// Relative energy drift of the full model over the whole run.
    pub energy_drift: Option<f64>,
    pub full_dt_halving_delta: Option<f64>,
    pub full_grid_doubling_delta: Option<f64>,
    pub periodic_dt_halving_delta: Option<f64>,
    /// Change when the cutoff is lowered by 100.
    pub rabi_cutoff_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFailure {
    pub model: Model,
    pub kind: String,
    pub message: String,
}

/// Everything a dynamics scenario produced.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub config: DynamicsConfig,
    pub resolved: Resolved,
    pub series: BTreeMap<Model, ObservableSeries>,
    pub comparisons: Vec<ComparisonReport>,
    pub convergence: ConvergenceEvidence,
    pub failures: Vec<ModelFailure>,
    pub files: Vec<PathBuf>,
}

impl ScenarioRun {
    pub fn comparison(&self, a: Model, b: Model) -> Option<&ComparisonReport> {
        self.comparisons.iter().find(|c| c.a == a.name() && c.b == b.name())
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    name: &'a str,
    software: &'static str,
    version: &'static str,
    status: &'static str,
    config: &'a DynamicsConfig,
    v: f64,
    w0: f64,
    wq: f64,
    g: f64,
    g_over_w0: f64,
    wq_over_w0: f64,
    beta_max: f64,
    q_excursion: f64,
    trap_period: f64,
    t_max: f64,
    n_records: usize,
    grid: GridSpec,
    cutoff: usize,
    convergence: &'a ConvergenceEvidence,
    comparisons: Vec<ComparisonSummary<'a>>,
    cutoff_warning: bool,
    failures: &'a [ModelFailure],
    files: Vec<String>,
}

#[derive(Serialize)]
struct ComparisonSummary<'a> {
    a: &'a str,
    b: &'a str,
    threshold: f64,
    deviations: &'a [Deviation],
    breakdown_time: Option<f64>,
    max_leakage: f64,
}

fn run_full(r: &Resolved, grid: &GridSpec, snapshot_every: Option<usize>) -> Result<ObservableSeries> {
    let psi = full::prepare_initial_state(&r.params, grid, r.qubit)?;
    let mut prop = FullPropagator::new(&r.params, grid)?;
    Ok(prop.evolve(&psi, snapshot_every)?.0)
}

fn run_periodic(r: &Resolved, grid: &GridSpec) -> Result<ObservableSeries> {
    let psi = full::prepare_initial_state(&r.params, grid, r.qubit)?;
    let state = periodic::from_grid_state(&psi)?;
    let mut prop = PeriodicPropagator::new(&r.params, state.q_points(), grid.dt)?;
    Ok(prop.evolve(&state, grid.n_steps, grid.record_stride)?.0)
}

fn run_rabi(r: &Resolved, grid: &GridSpec, cutoff: usize) -> Result<ObservableSeries> {
    let initial = FockState::vacuum(r.qubit, cutoff)?;
    let prop = RabiPropagator::new(&r.rabi, cutoff)?;
    prop.evolve(&initial, &record_times(grid.dt, grid.n_steps, grid.record_stride))
}

fn halved(grid: &GridSpec) -> GridSpec {
    GridSpec {
        dt: 0.5 * grid.dt,
        n_steps: 2 * grid.n_steps,
        record_stride: 2 * grid.record_stride,
        ..*grid
    }
}

/// Runs one dynamics scenario. Model faults are collected in
/// [`ScenarioRun::failures`] rather than aborting the other models;
/// configuration errors abort. With `out_dir` the CSV files and JSON sidecar
/// are written there.
pub fn run_dynamics(config: &DynamicsConfig, out_dir: Option<&Path>) -> Result<ScenarioRun> {
    let mut resolved = config.resolve()?;
    let mut convergence = ConvergenceEvidence::default();
    let wants = |m: Model| config.models.contains(&m);

    // only the grid models need the energy probe; the Fock model is exact in time
    if config.dt.is_none() && (wants(Model::Full) || wants(Model::Periodic)) {
        let psi = full::prepare_initial_state(&resolved.params, &resolved.grid, resolved.qubit)?;
        let (grid, trials) =
            full::converge_dt(&resolved.params, &resolved.grid, &psi, config.energy_tolerance)?;
        resolved.grid = grid;
        convergence.dt_trials = trials;
    }
    let r = resolved;

    let mut series = BTreeMap::new();
    let mut failures = Vec::new();
    let mut record = |model: Model, result: Result<ObservableSeries>| match result {
        Ok(s) => {
            series.insert(model, s);
        }
        Err(e) => failures.push(ModelFailure {
            model,
            kind: e.kind().to_string(),
            message: e.to_string(),
        }),
    };
    if wants(Model::Full) {
        record(Model::Full, run_full(&r, &r.grid, config.snapshot_every));
    }
    if wants(Model::Periodic) {
        record(Model::Periodic, run_periodic(&r, &r.grid));
    }
    if wants(Model::Rabi) {
        record(Model::Rabi, run_rabi(&r, &r.grid, config.cutoff));
    }

    if let Some(s) = series.get(&Model::Full) {
        convergence.energy_drift = Some(full::relative_energy_drift(s, &r.params));
    }
    if config.convergence {
        if let Some(base) = series.get(&Model::Full) {
            let fine = run_full(&r, &halved(&r.grid), None)?;
            convergence.full_dt_halving_delta = Some(max_delta(base, &fine)?);
            let mut wide = r.grid;
            wide.n_points *= 2;
            let wide = run_full(&r, &wide, None)?;
            convergence.full_grid_doubling_delta = Some(max_delta(base, &wide)?);
        }
        if let Some(base) = series.get(&Model::Periodic) {
            let fine = run_periodic(&r, &halved(&r.grid))?;
            convergence.periodic_dt_halving_delta = Some(max_delta(base, &fine)?);
        }
        if let Some(base) = series.get(&Model::Rabi) {
            if config.cutoff > 100 {
                let low = run_rabi(&r, &r.grid, config.cutoff - 100)?;
                convergence.rabi_cutoff_delta = Some(max_delta(base, &low)?);
            }
        }
    }

    let mut comparisons = Vec::new();
    for (a, b) in [
        (Model::Full, Model::Rabi),
        (Model::Full, Model::Periodic),
        (Model::Periodic, Model::Rabi),
    ] {
        if let (Some(sa), Some(sb)) = (series.get(&a), series.get(&b)) {
            comparisons.push(compare_named(a.name(), sa, b.name(), sb, config.breakdown_threshold)?);
        }
    }

    let mut run = ScenarioRun {
        config: config.clone(),
        resolved: r,
        series,
        comparisons,
        convergence,
        failures,
        files: Vec::new(),
    };
    if let Some(dir) = out_dir {
        write_dynamics(&mut run, dir)?;
    }
    Ok(run)
}

fn write_dynamics(run: &mut ScenarioRun, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let name = &run.config.name;
    let mut files = Vec::new();
    for (model, s) in &run.series {
        let path = dir.join(format!("{name}_{model}.csv"));
        io::save_series_csv(&path, s)?;
        files.push(path);
        if !s.snapshots.is_empty() {
            let path = dir.join(format!("{name}_{model}_momentum.csv"));
            io::write_snapshots_csv(File::create(&path)?, &s.snapshots)?;
            files.push(path);
        }
    }
    let sidecar_path = dir.join(format!("{name}.json"));
    files.push(sidecar_path.clone());

    let r = &run.resolved;
    let sidecar = Sidecar {
        name,
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        status: if run.failures.is_empty() { "ok" } else { "partial" },
        config: &run.config,
        v: r.params.v(),
        w0: r.params.w0(),
        wq: r.rabi.wq,
        g: r.rabi.g,
        g_over_w0: r.rabi.g_over_w0(),
        wq_over_w0: r.rabi.wq_over_w0(),
        beta_max: r.rabi.beta_max(),
        q_excursion: r.rabi.q_excursion(),
        trap_period: r.params.trap_period(),
        t_max: r.t_max,
        n_records: r.n_records,
        grid: r.grid,
        cutoff: run.config.cutoff,
        convergence: &run.convergence,
        comparisons: run
            .comparisons
            .iter()
            .map(|c| ComparisonSummary {
                a: &c.a,
                b: &c.b,
                threshold: c.threshold,
                deviations: &c.deviations,
                breakdown_time: c.breakdown_time,
                max_leakage: c.leakage.iter().copied().fold(0.0, f64::max),
            })
            .collect(),
        cutoff_warning: run.series.values().any(|s| s.cutoff_warning),
        failures: &run.failures,
        files: files
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
    };
    io::save_json(&sidecar_path, &sidecar)?;
    run.files = files;
    Ok(())
}

/// Output of a band-scan scenario.
#[derive(Debug, Clone)]
pub struct BandsRun {
    pub config: BandsConfig,
    pub table: BandTable,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct BandsSidecar<'a> {
    name: &'a str,
    software: &'static str,
    version: &'static str,
    config: &'a BandsConfig,
    gaps_at_q0: Vec<f64>,
}

pub fn run_bands(config: &BandsConfig, out_dir: Option<&Path>) -> Result<BandsRun> {
    let table = bands::dispersion_scan_with(config.v, config.n_bands, config.q_resolution, config.n_max)?;
    let mut files = Vec::new();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}_bands.csv", config.name));
        io::write_bands_csv(File::create(&csv_path)?, &table)?;
        let json_path = dir.join(format!("{}.json", config.name));
        let mut gaps = Vec::new();
        for i in 0..config.n_bands.saturating_sub(1) {
            let e = bands::band_energies(0.0, config.v, config.n_bands, config.n_max)?;
            gaps.push(e[i + 1] - e[i]);
        }
        io::save_json(
            &json_path,
            &BandsSidecar {
                name: &config.name,
                software: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                config,
                gaps_at_q0: gaps,
            },
        )?;
        files.push(csv_path);
        files.push(json_path);
    }
    Ok(BandsRun { config: config.clone(), table, files })
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Bands(BandsRun),
    Dynamics(Box<ScenarioRun>),
}

impl Outcome {
    /// True when every requested model completed.
    pub fn succeeded(&self) -> bool {
        match self {
            Outcome::Bands(_) => true,
            Outcome::Dynamics(r) => r.failures.is_empty(),
        }
    }

    pub fn files(&self) -> &[PathBuf] {
        match self {
            Outcome::Bands(b) => &b.files,
            Outcome::Dynamics(r) => &r.files,
        }
    }
}

pub fn run_scenario(scenario: &Scenario, out_dir: Option<&Path>) -> Result<Outcome> {
    match scenario {
        Scenario::Bands(b) => run_bands(b, out_dir).map(Outcome::Bands),
        Scenario::Dynamics(d) => run_dynamics(d, out_dir).map(|r| Outcome::Dynamics(Box::new(r))),
    }
}

/// Runs scenarios on one worker thread each; results keep input order.
pub fn run_all(scenarios: &[Scenario], out_dir: Option<&Path>) -> Vec<Result<Outcome>> {
    let mut names: Vec<&str> = scenarios.iter().map(Scenario::name).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) && out_dir.is_some() {
        return scenarios
            .iter()
            .map(|_| Err(Error::Config("scenario names must be unique within one output directory".into())))
            .collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|s| scope.spawn(move || run_scenario(s, out_dir)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Numerical { step: 0, what: "worker panicked".into() })))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(q: &[f64]) -> ObservableSeries {
        ObservableSeries {
            samples: q
                .iter()
                .enumerate()
                .map(|(i, &q)| Sample { t: i as f64, q, ..Default::default() })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn identical_series_have_no_deviation() {
        let a = series(&[0.0, 0.5, -1.0]);
        let r = compare(&a, &a, 0.05).unwrap();
        assert!(r.deviations.iter().all(|d| d.max_abs == 0.0 && d.rms == 0.0));
        assert_eq!(r.breakdown_time, None);
    }

    #[test]
    fn breakdown_is_first_record_over_threshold() {
        let a = series(&[0.0, 0.0, 0.0, 0.0]);
        let b = series(&[0.0, 0.05, 0.2, 0.0]);
        let r = compare(&a, &b, 0.05).unwrap();
        assert_eq!(r.breakdown_time, Some(2.0));
        assert_eq!(r.deviation("q").unwrap().max_abs, 0.2);
    }

    #[test]
    fn mismatched_times_are_usage_errors() {
        let a = series(&[0.0, 1.0]);
        let b = series(&[0.0, 1.0, 2.0]);
        assert!(matches!(compare(&a, &b, 0.05), Err(Error::Usage(_))));
        let mut c = series(&[0.0, 1.0]);
        c.samples[1].t = 1.5;
        assert!(matches!(compare(&a, &c, 0.05), Err(Error::Usage(_))));
    }

    #[test]
    fn builtins_resolve() {
        for name in BUILTIN_NAMES {
            for s in builtin(name).unwrap() {
                if let Scenario::Dynamics(d) = s {
                    d.resolve().unwrap();
                }
            }
        }
        assert_eq!(builtin("all").unwrap().len(), 6);
        assert!(matches!(builtin("fig9"), Err(Error::Usage(_))));
    }

    #[test]
    fn builtin_parameters() {
        let Scenario::Dynamics(d) = &builtin("fig3-dsc").unwrap()[0] else { panic!() };
        let p = d.params().unwrap();
        assert!((p.w0() - 0.04).abs() < 1e-14 && (p.v() - 0.08).abs() < 1e-14);
        let Scenario::Dynamics(d) = &builtin("fig3-ddsc").unwrap()[0] else { panic!() };
        let rp = d.params().unwrap().to_rabi_params();
        assert!((rp.g / rp.wq - 0.43).abs() < 1e-12);
    }

    #[test]
    fn config_round_trip_and_rules() {
        let text = r#"[{"kind": "dynamics", "name": "a", "v": 0.0, "w0": 1.0, "qubit": "equal"},
                       {"kind": "bands", "name": "b", "v": 2.0}]"#;
        let list = parse_config(text).unwrap();
        assert_eq!(list.len(), 2);
        let back = serde_json::to_string(&list).unwrap();
        assert_eq!(parse_config(&back).unwrap(), list);

        let unknown = r#"{"kind": "dynamics", "name": "a", "g_over_w0": 2.0, "bogus": 1}"#;
        assert!(matches!(parse_config(unknown), Err(Error::Config(_))));
        let mixed = r#"{"kind": "dynamics", "name": "a", "g_over_w0": 2.0, "v": 1.0, "w0": 1.0}"#;
        let Scenario::Dynamics(d) = &parse_config(mixed).unwrap()[0] else { panic!() };
        assert!(matches!(d.resolve(), Err(Error::Config(_))));
    }

    #[test]
    fn small_grid_names_the_rule() {
        let mut d = DynamicsConfig::new("small", 2.0, 0.0);
        d.n_points = Some(512);
        let msg = d.resolve().unwrap_err().to_string();
        assert!(msg.contains("n_points"), "{msg}");
        let mut d = DynamicsConfig::new("narrow", 5.18, 0.0);
        d.band_points = Some(16);
        d.n_points = Some(1024);
        let msg = d.resolve().unwrap_err().to_string();
        assert!(msg.contains("box rule"), "{msg}");
    }

    #[test]
    fn models_parse() {
        assert_eq!("rabi".parse::<Model>().unwrap(), Model::Rabi);
        assert!("fock".parse::<Model>().is_err());
    }
}
