//! Experiment configuration files.
//!
//! A config is a JSON object with a `schema_version`, an optional `kind`
//! (required for `mkvlab run`), an optional `seed`, and the fields of the
//! kind-specific section. Unknown fields are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use mkvlab_core::gaussian_flow::GaussianState;
use mkvlab_core::particle::{MeanFieldMode, Scheme, SimConfig};
use mkvlab_core::{CklsParams, EmpiricalMeasure, InitialLaw, VasicekParams};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    SimulateCkls,
    SimulateVasicek,
    VerifyHarnackCkls,
    VerifyHarnackVasicek,
    VerifyW1Contraction,
    VerifyW2EntropyContraction,
    VerifyInverseMoment,
    VerifyYw,
    VerifyLemmaIne,
    StationaryCkls,
}

impl Kind {
    pub const ALL: [Kind; 10] = [
        Kind::SimulateCkls,
        Kind::SimulateVasicek,
        Kind::VerifyHarnackCkls,
        Kind::VerifyHarnackVasicek,
        Kind::VerifyW1Contraction,
        Kind::VerifyW2EntropyContraction,
        Kind::VerifyInverseMoment,
        Kind::VerifyYw,
        Kind::VerifyLemmaIne,
        Kind::StationaryCkls,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::SimulateCkls => "simulate-ckls",
            Kind::SimulateVasicek => "simulate-vasicek",
            Kind::VerifyHarnackCkls => "verify-harnack-ckls",
            Kind::VerifyHarnackVasicek => "verify-harnack-vasicek",
            Kind::VerifyW1Contraction => "verify-w1-contraction",
            Kind::VerifyW2EntropyContraction => "verify-w2-entropy-contraction",
            Kind::VerifyInverseMoment => "verify-inverse-moment",
            Kind::VerifyYw => "verify-yw",
            Kind::VerifyLemmaIne => "verify-lemma-ine",
            Kind::StationaryCkls => "stationary-ckls",
        }
    }

    pub fn from_name(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Bounded, strictly positive test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    /// `exp(c sin x)`
    ExpSin { c: f64 },
    /// `exp(c tanh x)`
    ExpTanh { c: f64 },
    /// The constant `c > 0`.
    Constant { c: f64 },
}

impl TestFunction {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            TestFunction::ExpSin { c } | TestFunction::ExpTanh { c } if c.is_finite() => Ok(()),
            TestFunction::Constant { c } if c > 0.0 && c.is_finite() => Ok(()),
            _ => Err(format!("invalid test function {self:?}")),
        }
    }

    pub fn log_f(&self, x: f64) -> f64 {
        match *self {
            TestFunction::ExpSin { c } => c * x.sin(),
            TestFunction::ExpTanh { c } => c * x.tanh(),
            TestFunction::Constant { c } => c.ln(),
        }
    }

    pub fn f(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Constant { c } => c,
            _ => self.log_f(x).exp(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, TestFunction::Constant { .. })
    }

    pub fn label(&self) -> String {
        match *self {
            TestFunction::ExpSin { c } => format!("exp_sin({c})"),
            TestFunction::ExpTanh { c } => format!("exp_tanh({c})"),
            TestFunction::Constant { c } => format!("constant({c})"),
        }
    }
}

/// Initial law as written in a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    Dirac(f64),
    /// Uniform empirical measure on the listed atoms.
    Samples(Vec<f64>),
    /// Single-column CSV of atoms, relative to the config file.
    Csv(PathBuf),
    Gaussian(GaussianState),
}

/// Initial law after loading.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Law(InitialLaw),
    Gaussian(GaussianState),
}

impl InitSpec {
    pub fn load(&self, base: &Path) -> Result<Init, String> {
        match self {
            InitSpec::Dirac(x) => {
                if !x.is_finite() {
                    return Err(format!("non-finite Dirac location {x}"));
                }
                Ok(Init::Law(InitialLaw::Dirac(*x)))
            }
            InitSpec::Samples(xs) => EmpiricalMeasure::uniform(xs.clone())
                .map(|m| Init::Law(InitialLaw::Measure(m)))
                .map_err(|e| e.to_string()),
            InitSpec::Csv(p) => crate::io::read_measure(&base.join(p))
                .map(|m| Init::Law(InitialLaw::Measure(m))),
            InitSpec::Gaussian(g) => GaussianState::new(g.mean, g.variance)
                .map(Init::Gaussian)
                .map_err(|e| e.to_string()),
        }
    }

    /// Load a law usable by the particle engine (no Gaussian).
    pub fn load_law(&self, base: &Path, field: &str) -> Result<InitialLaw, String> {
        match self.load(base)? {
            Init::Law(l) => Ok(l),
            Init::Gaussian(_) => Err(format!("{field}: gaussian initial law not supported here")),
        }
    }

    /// Load a law for the Gaussian flow (Dirac or Gaussian).
    pub fn load_gaussian(&self, field: &str) -> Result<GaussianState, String> {
        match self {
            InitSpec::Dirac(x) => GaussianState::dirac(*x).map_err(|e| e.to_string()),
            InitSpec::Gaussian(g) => GaussianState::new(g.mean, g.variance).map_err(|e| e.to_string()),
            _ => Err(format!("{field}: only dirac or gaussian initial laws are supported here")),
        }
    }
}

/// Particle-engine settings. `horizon` and the snapshot grid are optional
/// when the experiment derives them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub n_particles: usize,
    pub dt: f64,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub snapshot_times: Option<Vec<f64>>,
    #[serde(default)]
    pub snapshot_every: Option<f64>,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub mean_field_mode: MeanFieldMode,
    #[serde(default)]
    pub deterministic_mode: bool,
}

impl SimSpec {
    /// Build a `SimConfig`. When the config pins no snapshot grid, `default_times`
    /// is used.
    pub fn to_sim(&self, horizon: f64, default_times: Vec<f64>, seed: u64) -> Result<SimConfig, String> {
        if let Some(h) = self.horizon {
            if (h - horizon).abs() > 1e-12 * horizon.max(1.0) {
                return Err(format!("sim.horizon = {h} conflicts with the experiment horizon {horizon}"));
            }
        }
        let mut cfg = SimConfig::new(self.n_particles, self.dt, horizon, seed)
            .with_scheme(self.scheme)
            .with_mode(self.mean_field_mode);
        cfg.deterministic_mode = self.deterministic_mode;
        cfg = match (&self.snapshot_times, self.snapshot_every) {
            (Some(_), Some(_)) => {
                return Err("give sim.snapshot_times or sim.snapshot_every, not both".into())
            }
            (Some(ts), None) => cfg.with_snapshots(ts.clone()),
            (None, Some(e)) => {
                if !(e > 0.0 && e.is_finite()) {
                    return Err(format!("sim.snapshot_every must be > 0, got {e}"));
                }
                cfg.with_snapshot_every(e)
            }
            (None, None) => cfg.with_snapshots(default_times),
        };
        cfg.grid().map_err(|e| format!("sim: {e}"))?;
        Ok(cfg)
    }

    pub fn required_horizon(&self) -> Result<f64, String> {
        self.horizon.ok_or_else(|| "sim.horizon is required for this experiment".to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesMode {
    #[default]
    Summary,
    Particles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateCkls {
    pub params: CklsParams,
    pub init: InitSpec,
    pub sim: SimSpec,
    #[serde(default)]
    pub series: SeriesMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateVasicek {
    pub params: VasicekParams,
    pub init: InitSpec,
    pub sim: SimSpec,
    /// Step of the Gaussian-flow oracle; defaults to `sim.dt`.
    #[serde(default)]
    pub flow_dt: Option<f64>,
    #[serde(default)]
    pub series: SeriesMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyHarnackCkls {
    pub params: CklsParams,
    /// The law on the `log P_T f` side; it carries the moment condition.
    pub mu0: InitSpec,
    /// The law on the `P_T log f` side.
    pub nu0: InitSpec,
    pub horizons: Vec<f64>,
    pub test_functions: Vec<TestFunction>,
    pub sim: SimSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnackVasicekCase {
    /// Overrides the top-level parameters for this case.
    #[serde(default)]
    pub params: Option<VasicekParams>,
    pub mu0: InitSpec,
    pub nu0: InitSpec,
    pub t: f64,
    pub f: TestFunction,
}

fn default_flow_dt() -> f64 {
    1e-3
}

fn default_quad_nodes() -> usize {
    96
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyHarnackVasicek {
    pub params: VasicekParams,
    pub cases: Vec<HarnackVasicekCase>,
    #[serde(default = "default_flow_dt")]
    pub flow_dt: f64,
    #[serde(default = "default_quad_nodes")]
    pub quad_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyW1Contraction {
    pub params: CklsParams,
    pub init_a: InitSpec,
    pub init_b: InitSpec,
    pub sim: SimSpec,
}

fn default_tail_start() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyW2Entropy {
    pub params: VasicekParams,
    pub init_a: InitSpec,
    pub init_b: InitSpec,
    pub horizon: f64,
    #[serde(default = "default_flow_dt")]
    pub dt: f64,
    /// Fraction of the horizon where the entropy tail fit starts.
    #[serde(default = "default_tail_start")]
    pub tail_start: f64,
}

fn default_floor() -> f64 {
    mkvlab_core::particle::DEFAULT_FLOOR
}

fn default_confidence() -> f64 {
    0.99
}

fn default_max_floored() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyInverseMoment {
    pub params: CklsParams,
    pub x0: f64,
    pub sim: SimSpec,
    /// `E int_0^T zeta_t^2 dt`; derived from `gamma` and the exact mean when
    /// absent.
    #[serde(default)]
    pub zeta_l2: Option<f64>,
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default = "default_max_floored")]
    pub max_floored_fraction: f64,
}

fn default_epsilons() -> Vec<f64> {
    vec![0.5, 0.1, 0.01]
}

fn default_points() -> usize {
    1000
}

fn default_yw_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyYw {
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_yw_tol")]
    pub tol: f64,
}

fn default_k_values() -> Vec<f64> {
    vec![1.0, 1.5, 2.0, 5.0, 10.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyLemmaIne {
    #[serde(default = "default_k_values")]
    pub k_values: Vec<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaryCkls {
    pub params: CklsParams,
    pub init: InitSpec,
    pub burn_in: f64,
    pub sample_horizon: f64,
    /// Spacing of the post-burn-in snapshots.
    pub sample_every: f64,
    pub sim: SimSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    SimulateCkls(SimulateCkls),
    SimulateVasicek(SimulateVasicek),
    VerifyHarnackCkls(VerifyHarnackCkls),
    VerifyHarnackVasicek(VerifyHarnackVasicek),
    VerifyW1Contraction(VerifyW1Contraction),
    VerifyW2Entropy(VerifyW2Entropy),
    VerifyInverseMoment(VerifyInverseMoment),
    VerifyYw(VerifyYw),
    VerifyLemmaIne(VerifyLemmaIne),
    StationaryCkls(StationaryCkls),
}

/// A parsed configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: Option<u64>,
    pub experiment: Experiment,
    /// The config object as read, for echoing into reports.
    pub raw: Value,
    /// Directory that relative paths resolve against.
    pub base_dir: PathBuf,
}

/// A config that failed to parse or validate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// JSON path of the offending field, `.` for the document root.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error at {}: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.to_string(),
        message: message.into(),
    }
}

fn section<T: serde::de::DeserializeOwned>(body: Value) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(body).map_err(|e| {
        let path = e.path().to_string();
        err(&path, e.into_inner().to_string())
    })
}

/// Parse a config document. `expected` is the kind named on the command line,
/// if any.
pub fn parse(text: &str, expected: Option<Kind>, base_dir: &Path) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: Value = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        err(&path, format!("malformed JSON: {}", e.into_inner()))
    })?;
    let Value::Object(mut obj) = raw.clone() else {
        return Err(err(".", "config must be a JSON object"));
    };

    match obj.remove("schema_version") {
        Some(Value::Number(n)) if n.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(err(
                "schema_version",
                format!("unsupported schema_version {v}, expected {SCHEMA_VERSION}"),
            ))
        }
        None => return Err(err("schema_version", "missing field `schema_version`")),
    }

    let kind = match (obj.remove("kind"), expected) {
        (Some(Value::String(s)), exp) => {
            let k = Kind::from_name(&s).ok_or_else(|| err("kind", format!("unknown experiment kind `{s}`")))?;
            if let Some(e) = exp {
                if e != k {
                    return Err(err("kind", format!("config is for `{k}` but the command is `{e}`")));
                }
            }
            k
        }
        (Some(_), _) => return Err(err("kind", "kind must be a string")),
        (None, Some(e)) => e,
        (None, None) => return Err(err("kind", "missing field `kind` (required by `run`)")),
    };

    let seed = match obj.remove("seed") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_u64()
                .ok_or_else(|| err("seed", format!("seed must be a non-negative integer, got {v}")))?,
        ),
    };

    let body = Value::Object(obj);
    let experiment = match kind {
        Kind::SimulateCkls => Experiment::SimulateCkls(section(body)?),
        Kind::SimulateVasicek => Experiment::SimulateVasicek(section(body)?),
        Kind::VerifyHarnackCkls => Experiment::VerifyHarnackCkls(section(body)?),
        Kind::VerifyHarnackVasicek => Experiment::VerifyHarnackVasicek(section(body)?),
        Kind::VerifyW1Contraction => Experiment::VerifyW1Contraction(section(body)?),
        Kind::VerifyW2EntropyContraction => Experiment::VerifyW2Entropy(section(body)?),
        Kind::VerifyInverseMoment => Experiment::VerifyInverseMoment(section(body)?),
        Kind::VerifyYw => Experiment::VerifyYw(section(body)?),
        Kind::VerifyLemmaIne => Experiment::VerifyLemmaIne(section(body)?),
        Kind::StationaryCkls => Experiment::StationaryCkls(section(body)?),
    };
    validate(&experiment)?;
    Ok(ExperimentConfig {
        kind,
        seed,
        experiment,
        raw,
        base_dir: base_dir.to_path_buf(),
    })
}

fn check_functions(fs: &[TestFunction], path: &str) -> Result<(), ConfigError> {
    for (i, f) in fs.iter().enumerate() {
        f.validate().map_err(|m| err(&format!("{path}[{i}]"), m))?;
    }
    Ok(())
}

fn positive(v: f64, path: &str) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(err(path, format!("must be > 0, got {v}")))
    }
}

/// Checks that serde cannot express.
fn validate(e: &Experiment) -> Result<(), ConfigError> {
    match e {
        Experiment::VerifyHarnackCkls(c) => {
            if c.horizons.is_empty() {
                return Err(err("horizons", "at least one horizon is required"));
            }
            for (i, &t) in c.horizons.iter().enumerate() {
                positive(t, &format!("horizons[{i}]"))?;
            }
            if c.test_functions.is_empty() {
                return Err(err("test_functions", "at least one test function is required"));
            }
            check_functions(&c.test_functions, "test_functions")?;
        }
        Experiment::VerifyHarnackVasicek(c) => {
            if c.cases.is_empty() {
                return Err(err("cases", "at least one case is required"));
            }
            for (i, case) in c.cases.iter().enumerate() {
                case.f.validate().map_err(|m| err(&format!("cases[{i}].f"), m))?;
                if !(case.t >= 0.0 && case.t.is_finite()) {
                    return Err(err(&format!("cases[{i}].t"), format!("must be >= 0, got {}", case.t)));
                }
            }
            positive(c.flow_dt, "flow_dt")?;
            if c.quad_nodes == 0 {
                return Err(err("quad_nodes", "must be > 0"));
            }
        }
        Experiment::VerifyW2Entropy(c) => {
            positive(c.horizon, "horizon")?;
            positive(c.dt, "dt")?;
            if !(c.tail_start >= 0.0 && c.tail_start < 1.0) {
                return Err(err("tail_start", "must lie in [0, 1)"));
            }
        }
        Experiment::VerifyInverseMoment(c) => {
            positive(c.floor, "floor")?;
            if !(c.confidence > 0.5 && c.confidence < 1.0) {
                return Err(err("confidence", "must lie in (0.5, 1)"));
            }
            if c.zeta_l2.is_some_and(|z| !(z >= 0.0 && z.is_finite())) {
                return Err(err("zeta_l2", "must be >= 0"));
            }
        }
        Experiment::VerifyYw(c) => {
            if c.epsilons.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
                return Err(err("epsilons", "every epsilon must lie in (0, 1)"));
            }
            if c.points < 2 {
                return Err(err("points", "need at least 2 points"));
            }
        }
        Experiment::VerifyLemmaIne(c) => {
            if c.k_values.iter().any(|&k| !(k >= 1.0 && k.is_finite())) {
                return Err(err("k_values", "every K must be >= 1"));
            }
            if c.points < 2 {
                return Err(err("points", "need at least 2 points"));
            }
        }
        Experiment::StationaryCkls(c) => {
            positive(c.burn_in, "burn_in")?;
            positive(c.sample_horizon, "sample_horizon")?;
            positive(c.sample_every, "sample_every")?;
        }
        Experiment::SimulateVasicek(c) => {
            if let Some(dt) = c.flow_dt {
                positive(dt, "flow_dt")?;
            }
        }
        Experiment::SimulateCkls(_) | Experiment::VerifyW1Contraction(_) => {}
    }
    Ok(())
}
