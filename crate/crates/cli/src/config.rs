use std::fmt;
use std::path::{Path, PathBuf};

use mmspace::euclid::{ConvexBody, Theorem1Config};
use mmspace::plans::{ExclusionConfig, VerifyConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::args::{Cli, Command};

/// Exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    /// The checked property failed; a witness was written.
    pub const FAIL: i32 = 1;
    /// Bad flags, unknown config keys or out-of-range values.
    pub const USAGE: i32 = 2;
    pub const MALFORMED_JSON: i32 = 3;
    pub const MISSING_FIELD: i32 = 4;
    pub const UNKNOWN_KIND: i32 = 5;
    /// Unreadable input or unwritable output.
    pub const IO: i32 = 6;
    /// The library rejected the inputs of a well-formed config.
    pub const REJECTED: i32 = 7;
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Malformed(String),
    Missing(String),
    UnknownKind(String),
    Io(String),
    Rejected(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Malformed(_) => exit::MALFORMED_JSON,
            CliError::Missing(_) => exit::MISSING_FIELD,
            CliError::UnknownKind(_) => exit::UNKNOWN_KIND,
            CliError::Io(_) => exit::IO,
            CliError::Rejected(_) => exit::REJECTED,
        }
    }

    /// Classifies a JSON error raised while reading `what`.
    pub fn from_json(what: &str, e: serde_json::Error) -> Self {
        use serde_json::error::Category;
        let msg = format!("{what}: {e}");
        match e.classify() {
            Category::Io => CliError::Io(msg),
            Category::Syntax | Category::Eof => CliError::Malformed(msg),
            Category::Data if e.to_string().starts_with("missing field") => CliError::Missing(msg),
            Category::Data => CliError::Usage(msg),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (label, msg) = match self {
            CliError::Usage(m) => ("usage", m),
            CliError::Malformed(m) => ("malformed JSON", m),
            CliError::Missing(m) => ("missing field", m),
            CliError::UnknownKind(m) => ("unknown experiment", m),
            CliError::Io(m) => ("i/o", m),
            CliError::Rejected(m) => ("rejected", m),
        };
        write!(f, "error ({label}): {msg}")
    }
}

impl From<mmspace::Error> for CliError {
    fn from(e: mmspace::Error) -> Self {
        CliError::Rejected(e.to_string())
    }
}

pub const KINDS: [&str; 6] = ["theorem1", "mcp", "plan", "transport", "stability", "heis-suite"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Theorem1Params {
    /// Bundled cloud: square (in ℝ³), disk, circle or half-atom.
    pub fixture: String,
    pub input: Option<PathBuf>,
    pub particles: usize,
    pub pipeline: Theorem1Config,
}

impl Default for Theorem1Params {
    fn default() -> Self {
        Theorem1Params { fixture: "square".into(), input: None, particles: 4000, pipeline: Theorem1Config::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McpParams {
    pub space: String,
    pub theta: Option<f64>,
    /// `auto`, `haar`, `uniform`, `surface` or a measure file.
    pub measure: String,
    pub particles: usize,
    /// Half side of the Haar box on ℍⁿ.
    pub half_width: f64,
    #[serde(rename = "K")]
    pub k: f64,
    /// Profile exponent; the dimension bound of the space when absent.
    #[serde(rename = "N")]
    pub n: Option<f64>,
    pub table: Option<Vec<(f64, f64)>>,
    pub trials: usize,
    pub eps: f64,
    pub fd_step: f64,
    pub slack: f64,
    pub t_grid: Vec<f64>,
    pub estimator: String,
    pub strong: bool,
}

impl Default for McpParams {
    fn default() -> Self {
        let m = mmspace::mcpcheck::McpConfig::default();
        McpParams {
            space: "heis1".into(),
            theta: None,
            measure: "auto".into(),
            particles: 2000,
            half_width: 1.0,
            k: 0.0,
            n: None,
            table: None,
            trials: m.trials,
            eps: m.eps,
            fd_step: m.fd_step,
            slack: m.slack,
            t_grid: m.t_grid,
            estimator: m.estimator,
            strong: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanParams {
    pub build: String,
    pub center: Option<Vec<f64>>,
    /// Body of the convex builder; the unit square when absent.
    pub body: Option<ConvexBody>,
    pub body_file: Option<PathBuf>,
    /// Angle of the cone builder.
    pub theta: f64,
    pub measure: String,
    pub particles: usize,
    pub half_width: f64,
    pub verify: bool,
    /// Saved plan to verify instead of building one.
    pub plan_file: Option<PathBuf>,
    pub rescale: Option<String>,
    pub extend: Option<f64>,
    pub annuli: Option<usize>,
    pub push: Option<PathBuf>,
    /// Coarse verification cell; chosen from the particle density when absent.
    pub cell_size: Option<f64>,
    /// Expected reference particles per fine cell when the cell size is automatic.
    pub particles_per_cell: f64,
    pub hz_tol: f64,
    pub ac_tol: f64,
    pub density_cap: f64,
    pub marginal_tol: f64,
    pub exclusion: ExclusionConfig,
}

impl Default for PlanParams {
    fn default() -> Self {
        let v = VerifyConfig::default();
        PlanParams {
            build: "convex".into(),
            center: None,
            body: None,
            body_file: None,
            theta: std::f64::consts::PI,
            measure: "auto".into(),
            particles: 10_000,
            half_width: 1.0,
            verify: false,
            plan_file: None,
            rescale: None,
            extend: None,
            annuli: None,
            push: None,
            cell_size: None,
            particles_per_cell: 100.0,
            hz_tol: v.hz_tol,
            ac_tol: v.ac_tol,
            density_cap: v.density_cap,
            marginal_tol: v.marginal_tol,
            exclusion: ExclusionConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportParams {
    pub space: String,
    /// `random` or `two-pair`.
    pub fixture: String,
    pub mu0: Option<PathBuf>,
    pub mu1: Option<PathBuf>,
    pub atoms: usize,
    pub t_grid: Vec<f64>,
    /// Tolerance on `|W₂(μ₀, μ_t) − t·W₂(μ₀, μ₁)|`.
    pub tol: f64,
}

impl Default for TransportParams {
    fn default() -> Self {
        TransportParams {
            space: "euclid2".into(),
            fixture: "random".into(),
            mu0: None,
            mu1: None,
            atoms: 20,
            t_grid: vec![0.25, 0.5, 0.75],
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityParams {
    pub map: String,
    pub push: Option<PathBuf>,
    /// Nominal ε of the map when absent.
    pub eps: Option<f64>,
    pub particles: usize,
    pub center: Vec<f64>,
    pub radius: f64,
    pub cell_size: f64,
    pub isometry_points: usize,
    /// Allowed growth of the uniformity constant.
    pub uniformity_factor: f64,
}

impl Default for StabilityParams {
    fn default() -> Self {
        StabilityParams {
            map: "snap:0.01".into(),
            push: None,
            eps: None,
            particles: 4000,
            center: vec![0.4, 0.55],
            radius: 2.0,
            cell_size: 0.1,
            isometry_points: 1500,
            uniformity_factor: 1.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeisSuiteParams {
    pub samples: usize,
    pub av_samples: usize,
    pub pairs: usize,
    pub particles: usize,
    pub r_max: f64,
    pub round_trip_tol: f64,
    pub av_tol: f64,
    pub hz_tol: f64,
    /// Half-width of the excluded tube around the center line and the plane `t = 0`.
    pub tube: f64,
}

impl Default for HeisSuiteParams {
    fn default() -> Self {
        HeisSuiteParams {
            samples: 10_000,
            av_samples: 1000,
            pairs: 100_000,
            particles: 4000,
            r_max: 2.0,
            round_trip_tol: 1e-9,
            av_tol: 1e-12,
            hz_tol: 1e-7,
            tube: 1e-3,
        }
    }
}

// built once per run, so boxing the large variants buys nothing
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Params {
    Theorem1(Theorem1Params),
    Mcp(McpParams),
    Plan(PlanParams),
    Transport(TransportParams),
    Stability(StabilityParams),
    HeisSuite(HeisSuiteParams),
}

impl Params {
    pub fn kind(&self) -> &'static str {
        match self {
            Params::Theorem1(_) => "theorem1",
            Params::Mcp(_) => "mcp",
            Params::Plan(_) => "plan",
            Params::Transport(_) => "transport",
            Params::Stability(_) => "stability",
            Params::HeisSuite(_) => "heis-suite",
        }
    }

    fn from_value(kind: &str, rest: Value) -> Result<Self, CliError> {
        fn de<T: DeserializeOwned>(v: Value) -> Result<T, CliError> {
            serde_json::from_value(v).map_err(|e| CliError::from_json("config", e))
        }
        Ok(match kind {
            "theorem1" => Params::Theorem1(de(rest)?),
            "mcp" => Params::Mcp(de(rest)?),
            "plan" => Params::Plan(de(rest)?),
            "transport" => Params::Transport(de(rest)?),
            "stability" => Params::Stability(de(rest)?),
            "heis-suite" => Params::HeisSuite(de(rest)?),
            other => return Err(unknown_kind(other)),
        })
    }

    fn default_for(kind: &str) -> Result<Self, CliError> {
        Params::from_value(kind, Value::Object(Map::new()))
    }
}

fn unknown_kind(kind: &str) -> CliError {
    CliError::UnknownKind(format!("`{kind}` is not one of {}", KINDS.join(", ")))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(flatten)]
    pub params: Params,
}

pub const DEFAULT_OUT: &str = "mmspace-out";

pub fn read_json(path: &Path, what: &str) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::from_json(what, e))
}

pub fn read_typed<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    serde_json::from_value(read_json(path, what)?).map_err(|e| CliError::from_json(what, e))
}

/// Reads the config file (if any), applies the flags and validates the result.
pub fn parse_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let flag_kind = cli.command.as_ref().map(Command::kind);
    let (mut params, file_seed, file_out) = match &cli.config {
        Some(path) => {
            let Value::Object(mut obj) = read_json(path, "config")? else {
                return Err(CliError::Malformed("config must be a JSON object".into()));
            };
            let kind = match obj.remove("experiment") {
                Some(Value::String(k)) => k,
                Some(other) => return Err(CliError::Usage(format!("`experiment` must be a string, got {other}"))),
                None => match flag_kind {
                    Some(k) => k.to_string(),
                    None => return Err(CliError::Missing("config has no `experiment`".into())),
                },
            };
            if !KINDS.contains(&kind.as_str()) {
                return Err(unknown_kind(&kind));
            }
            if let Some(k) = flag_kind.filter(|k| *k != kind) {
                return Err(CliError::Usage(format!("subcommand `{k}` contradicts config experiment `{kind}`")));
            }
            let seed = match obj.remove("seed") {
                Some(v) => Some(v.as_u64().ok_or_else(|| CliError::Usage(format!("`seed` must be a nonnegative integer, got {v}")))?),
                None => None,
            };
            let out = match obj.remove("out") {
                Some(Value::String(s)) => Some(PathBuf::from(s)),
                Some(other) => return Err(CliError::Usage(format!("`out` must be a path, got {other}"))),
                None => None,
            };
            if seed.is_none() && cli.seed.is_none() {
                return Err(CliError::Missing("config has no `seed` and none was given with --seed".into()));
            }
            (Params::from_value(&kind, Value::Object(obj))?, seed, out)
        }
        None => {
            let kind = flag_kind.ok_or_else(|| CliError::Usage("give a subcommand or --config FILE".into()))?;
            (Params::default_for(kind)?, None, None)
        }
    };
    if let Some(cmd) = &cli.command {
        apply_flags(&mut params, cmd);
    }
    validate(&params)?;
    Ok(ExperimentConfig {
        seed: cli.seed.or(file_seed).unwrap_or(0),
        out: cli.out.clone().or(file_out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        params,
    })
}

fn set<T>(slot: &mut T, flag: &Option<T>)
where
    T: Clone,
{
    if let Some(v) = flag {
        *slot = v.clone();
    }
}

fn set_opt<T: Clone>(slot: &mut Option<T>, flag: &Option<T>) {
    if flag.is_some() {
        slot.clone_from(flag);
    }
}

fn apply_flags(params: &mut Params, cmd: &Command) {
    match (params, cmd) {
        (Params::Theorem1(p), Command::Theorem1(a)) => {
            set(&mut p.fixture, &a.fixture);
            set_opt(&mut p.input, &a.input);
            set(&mut p.particles, &a.particles);
        }
        (Params::Mcp(p), Command::Mcp(a)) => {
            set(&mut p.space, &a.space);
            set_opt(&mut p.theta, &a.theta);
            set(&mut p.measure, &a.measure);
            set(&mut p.particles, &a.particles);
            set(&mut p.k, &a.k);
            set_opt(&mut p.n, &a.n);
            set(&mut p.trials, &a.trials);
            set(&mut p.eps, &a.eps);
            set(&mut p.fd_step, &a.fd_step);
            set(&mut p.slack, &a.slack);
            set(&mut p.estimator, &a.estimator);
            p.strong |= a.strong;
        }
        (Params::Plan(p), Command::Plan(a)) => {
            set(&mut p.build, &a.build);
            set_opt(&mut p.center, &a.center);
            set_opt(&mut p.body_file, &a.body);
            set(&mut p.measure, &a.measure);
            set(&mut p.particles, &a.particles);
            if let Some(v) = &a.verify {
                p.verify = true;
                set_opt(&mut p.plan_file, v);
            }
            set_opt(&mut p.rescale, &a.rescale);
            set_opt(&mut p.extend, &a.extend);
            set_opt(&mut p.push, &a.push);
            set_opt(&mut p.cell_size, &a.cell_size);
        }
        (Params::Transport(p), Command::Transport(a)) => {
            set(&mut p.space, &a.space);
            set(&mut p.fixture, &a.fixture);
            set_opt(&mut p.mu0, &a.mu0);
            set_opt(&mut p.mu1, &a.mu1);
            set(&mut p.atoms, &a.atoms);
        }
        (Params::Stability(p), Command::Stability(a)) => {
            set(&mut p.map, &a.map);
            set_opt(&mut p.push, &a.push);
            set_opt(&mut p.eps, &a.eps);
            set(&mut p.particles, &a.particles);
            set(&mut p.cell_size, &a.cell_size);
        }
        (Params::HeisSuite(p), Command::HeisSuite(a)) => {
            set(&mut p.samples, &a.samples);
            set(&mut p.pairs, &a.pairs);
        }
        _ => unreachable!("kinds are checked to agree before flags are applied"),
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("`{name}` must be positive, got {v}")))
    }
}

fn nonzero(name: &str, v: usize) -> Result<(), CliError> {
    if v > 0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("`{name}` must be at least 1")))
    }
}

fn unit_grid(name: &str, grid: &[f64]) -> Result<(), CliError> {
    if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(CliError::Usage(format!("`{name}` must be a nonempty list inside (0, 1)")));
    }
    Ok(())
}

/// Range checks on values serde cannot express; every tolerance must be positive.
fn validate(params: &Params) -> Result<(), CliError> {
    match params {
        Params::Theorem1(p) => {
            nonzero("particles", p.particles)?;
            positive("pipeline.span_tol", p.pipeline.span_tol)?;
            positive("pipeline.ac_tol", p.pipeline.ac_tol)?;
            positive("pipeline.density_cap", p.pipeline.density_cap)?;
            unit_grid("pipeline.t_grid", &p.pipeline.t_grid)?;
        }
        Params::Mcp(p) => {
            nonzero("trials", p.trials)?;
            nonzero("particles", p.particles)?;
            positive("eps", p.eps)?;
            positive("fd_step", p.fd_step)?;
            positive("half_width", p.half_width)?;
            if !(0.0..1.0).contains(&p.slack) {
                return Err(CliError::Usage(format!("`slack` must lie in [0, 1), got {}", p.slack)));
            }
            unit_grid("t_grid", &p.t_grid)?;
        }
        Params::Plan(p) => {
            nonzero("particles", p.particles)?;
            positive("hz_tol", p.hz_tol)?;
            positive("ac_tol", p.ac_tol)?;
            positive("density_cap", p.density_cap)?;
            positive("marginal_tol", p.marginal_tol)?;
            positive("particles_per_cell", p.particles_per_cell)?;
            positive("half_width", p.half_width)?;
            positive("exclusion.tube", p.exclusion.tube)?;
            positive("exclusion.max_fraction", p.exclusion.max_fraction)?;
            if let Some(c) = p.cell_size {
                positive("cell_size", c)?;
            }
            if let Some(r) = p.extend {
                positive("extend", r)?;
            }
        }
        Params::Transport(p) => {
            nonzero("atoms", p.atoms)?;
            positive("tol", p.tol)?;
            unit_grid("t_grid", &p.t_grid)?;
        }
        Params::Stability(p) => {
            nonzero("particles", p.particles)?;
            nonzero("isometry_points", p.isometry_points)?;
            positive("radius", p.radius)?;
            positive("cell_size", p.cell_size)?;
            positive("uniformity_factor", p.uniformity_factor)?;
            if let Some(e) = p.eps {
                if !(e >= 0.0 && e.is_finite()) {
                    return Err(CliError::Usage(format!("`eps` must be nonnegative, got {e}")));
                }
            }
        }
        Params::HeisSuite(p) => {
            nonzero("samples", p.samples)?;
            nonzero("av_samples", p.av_samples)?;
            nonzero("pairs", p.pairs)?;
            nonzero("particles", p.particles)?;
            positive("r_max", p.r_max)?;
            positive("round_trip_tol", p.round_trip_tol)?;
            positive("av_tol", p.av_tol)?;
            positive("hz_tol", p.hz_tol)?;
            positive("tube", p.tube)?;
        }
    }
    Ok(())
}
