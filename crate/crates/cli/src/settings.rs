//! Command-line flags, TOML configuration files and their merge into
//! validated run settings. Flags override file values, which override
//! defaults.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;
use ssc_core::adaptive::{BatchSize, BuildConfig};
use ssc_core::estimators::EstimatorPolicy;
use ssc_core::oracle::{Evaluation, Oracle, OracleError};
use ssc_core::surrogate::{LecMode, Mode};
use ssc_core::testbed::{GasNetwork, GasOracle, TestOracle};

use crate::CliError;

pub const DEFAULT_THRESHOLD: f64 = 0.7;
pub const DEFAULT_NMC_ERROR: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    SmoothSine,
    FakeKink,
    ClippedSine,
    Gas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Original,
    Improved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LecArg {
    Off,
    Strict,
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorArg {
    LastPoint,
    McL1,
    VolOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadArg {
    Mc,
    Qmc,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Original => Mode::Original,
            ModeArg::Improved => Mode::Improved,
        }
    }
}

impl From<LecArg> for LecMode {
    fn from(l: LecArg) -> Self {
        match l {
            LecArg::Off => LecMode::Off,
            LecArg::Strict => LecMode::Strict,
            LecArg::Delta => LecMode::Delta,
        }
    }
}

impl From<EstimatorArg> for EstimatorPolicy {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::LastPoint => EstimatorPolicy::LastPoint,
            EstimatorArg::McL1 => EstimatorPolicy::MonteCarloL1,
            EstimatorArg::VolOrder => EstimatorPolicy::VolumeOrder,
        }
    }
}

pub fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Original => "original",
        Mode::Improved => "improved",
    }
}

pub fn lec_name(l: LecMode) -> &'static str {
    match l {
        LecMode::Off => "off",
        LecMode::Strict => "strict",
        LecMode::Delta => "delta",
    }
}

pub fn estimator_name(e: EstimatorPolicy) -> &'static str {
    match e {
        EstimatorPolicy::LastPoint => "last-point",
        EstimatorPolicy::MonteCarloL1 => "mc-l1",
        EstimatorPolicy::VolumeOrder => "vol-order",
    }
}

/// Parses a batch size: an integer is an absolute count, a decimal or a
/// value with an `n` suffix (`0.3n`) is a fraction of the current sample
/// count.
pub fn parse_mref(text: &str) -> Result<BatchSize, CliError> {
    let bad = || CliError::Usage(format!("invalid --mref {text:?}: expected a count like 4 or a fraction like 0.3n"));
    let t = text.trim();
    if let Some(frac) = t.strip_suffix('n') {
        let f: f64 = frac.parse().map_err(|_| bad())?;
        return Ok(BatchSize::Fraction(f));
    }
    if let Ok(k) = t.parse::<usize>() {
        return Ok(BatchSize::Absolute(k));
    }
    t.parse::<f64>().map(BatchSize::Fraction).map_err(|_| bad())
}

pub fn format_mref(m: BatchSize) -> String {
    match m {
        BatchSize::Absolute(k) => k.to_string(),
        BatchSize::Fraction(f) => format!("{f}n"),
    }
}

/// A TOML value that may be a scalar or a list.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Numbers in TOML may be written as integers or strings (`mref = "0.3n"`).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MrefValue {
    Count(usize),
    Fraction(f64),
    Text(String),
}

/// Keys accepted in a `--config` file; names match the long flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub oracle: Option<OracleKind>,
    pub threshold: Option<f64>,
    pub network: Option<PathBuf>,
    pub qoi: Option<String>,
    pub d: Option<usize>,
    pub p: Option<OneOrMany<usize>>,
    pub mode: Option<OneOrMany<ModeArg>>,
    pub lec: Option<LecArg>,
    pub estimator: Option<EstimatorArg>,
    pub mref: Option<MrefValue>,
    pub budget: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub nmc_error: Option<usize>,
    pub nmc_local: Option<usize>,
    pub out: Option<PathBuf>,
    pub reps: Option<usize>,
    pub per_decade: Option<usize>,
    pub model: Option<PathBuf>,
    pub quad: Option<QuadArg>,
    pub nq: Option<usize>,
    pub quad_seed: Option<u64>,
    pub cdf_nodes: Option<usize>,
    pub cdf_mc: Option<usize>,
    pub cdf_seed: Option<u64>,
    pub compare: Option<OneOrMany<QuadArg>>,
    pub reference_n: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Flags shared by `build` and `converge`.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// TOML file with defaults for any of these flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub oracle: Option<OracleKind>,
    /// Clip or label threshold of the sine oracles
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Gas network description; the bundled network is used if omitted
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// Overrides the QoI node of the gas network
    #[arg(long)]
    pub qoi: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Maximal polynomial degree; `converge` accepts a list such as 1,2,3
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<usize>,
    /// `converge` accepts a list such as original,improved
    #[arg(long, value_enum, value_delimiter = ',')]
    pub mode: Vec<ModeArg>,
    #[arg(long, value_enum)]
    pub lec: Option<LecArg>,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorArg>,
    /// Simplices refined per step: a count (4) or a fraction of n (0.3n)
    #[arg(long)]
    pub mref: Option<String>,
    #[arg(long)]
    pub budget: Option<usize>,
    /// Stop once the global error estimate reaches this value
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Uniform points used to measure the true l1 error
    #[arg(long = "nmc-error")]
    pub nmc_error: Option<usize>,
    /// Interior draws per simplex of the mc-l1 estimator
    #[arg(long = "nmc-local")]
    pub nmc_local: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// The oracle of a run together with what is needed to recreate it.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleSpec {
    Test(TestOracle),
    Gas {
        network: GasNetwork,
        /// Network file contents, kept so model files are self-contained.
        text: String,
        qoi: String,
    },
}

impl OracleSpec {
    pub fn dimension(&self) -> usize {
        match self {
            OracleSpec::Test(o) => o.dim,
            OracleSpec::Gas { network, .. } => network.dimension(),
        }
    }

    pub fn oracle(&self) -> CliOracle {
        match self {
            OracleSpec::Test(o) => CliOracle::Test(o.clone()),
            OracleSpec::Gas { network, .. } => CliOracle::Gas(GasOracle::new(network.clone())),
        }
    }

    /// Gas oracle from network text with an optional QoI override.
    pub fn gas(text: String, qoi: Option<&str>) -> Result<Self, String> {
        let mut network = GasNetwork::parse(&text).map_err(|e| e.to_string())?;
        if let Some(name) = qoi {
            network.qoi = network
                .node_index(name)
                .ok_or_else(|| format!("network has no node {name:?}"))?;
        }
        let qoi = network.nodes[network.qoi].name.clone();
        Ok(OracleSpec::Gas { network, text, qoi })
    }
}

/// Dispatches to the selected oracle.
#[derive(Debug, Clone)]
pub enum CliOracle {
    Test(TestOracle),
    Gas(GasOracle),
}

impl Oracle for CliOracle {
    fn dimension(&self) -> usize {
        match self {
            CliOracle::Test(o) => o.dimension(),
            CliOracle::Gas(o) => o.dimension(),
        }
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation, OracleError> {
        match self {
            CliOracle::Test(o) => o.evaluate(x),
            CliOracle::Gas(o) => o.evaluate(x),
        }
    }

    fn describe(&self) -> String {
        match self {
            CliOracle::Test(o) => o.describe(),
            CliOracle::Gas(o) => o.describe(),
        }
    }
}

/// Fully resolved settings of a `build` or `converge` run.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub oracle: OracleSpec,
    pub ps: Vec<usize>,
    pub modes: Vec<Mode>,
    pub base: BuildConfig,
    pub nmc_error: usize,
    pub out: PathBuf,
}

impl RunSettings {
    pub fn config(&self, p: usize, mode: Mode, seed: u64) -> BuildConfig {
        BuildConfig {
            p_max: p,
            mode,
            seed,
            ..self.base.clone()
        }
    }
}

pub fn resolve_oracle(args: &ModelArgs, file: &FileConfig) -> Result<OracleSpec, CliError> {
    let kind = args
        .oracle
        .or(file.oracle)
        .ok_or_else(|| CliError::Usage("missing --oracle".into()))?;
    let d = args.d.or(file.d);
    match kind {
        OracleKind::Gas => {
            if args.threshold.or(file.threshold).is_some() {
                return Err(CliError::Usage("--threshold does not apply to the gas oracle".into()));
            }
            let text = match args.network.as_ref().or(file.network.as_ref()) {
                Some(path) => std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read network {}: {e}", path.display())))?,
                None => ssc_core::testbed::gas::BUNDLED_NETWORK.to_string(),
            };
            let qoi = args.qoi.as_deref().or(file.qoi.as_deref());
            let spec = OracleSpec::gas(text, qoi).map_err(CliError::Usage)?;
            if let Some(d) = d {
                if d != spec.dimension() {
                    return Err(CliError::Usage(format!(
                        "--d {d} does not match the {} bound network parameters",
                        spec.dimension()
                    )));
                }
            }
            Ok(spec)
        }
        _ => {
            if args.network.is_some() || file.network.is_some() || args.qoi.is_some() || file.qoi.is_some() {
                return Err(CliError::Usage("--network and --qoi only apply to the gas oracle".into()));
            }
            let d = d.ok_or_else(|| CliError::Usage("missing --d".into()))?;
            if d == 0 || d > ssc_core::surrogate::basis::MAX_DIM {
                return Err(CliError::Usage(format!("--d must be in 1..=6, got {d}")));
            }
            let threshold = args.threshold.or(file.threshold).unwrap_or(DEFAULT_THRESHOLD);
            if kind != OracleKind::SmoothSine && !(threshold > 0.0 && threshold < 1.0) {
                return Err(CliError::Usage(format!("--threshold must lie in (0,1), got {threshold}")));
            }
            Ok(OracleSpec::Test(match kind {
                OracleKind::SmoothSine => TestOracle::smooth(d),
                OracleKind::FakeKink => TestOracle::fake_kink(d, threshold),
                OracleKind::ClippedSine => TestOracle::clipped(d, threshold),
                OracleKind::Gas => unreachable!(),
            }))
        }
    }
}

pub fn resolve_run(args: &ModelArgs, file: &FileConfig) -> Result<RunSettings, CliError> {
    let oracle = resolve_oracle(args, file)?;
    let ps = if !args.p.is_empty() {
        args.p.clone()
    } else {
        file.p.as_ref().map(|p| p.to_vec()).unwrap_or_else(|| vec![2])
    };
    let modes: Vec<Mode> = if !args.mode.is_empty() {
        args.mode.iter().map(|&m| m.into()).collect()
    } else {
        file.mode
            .as_ref()
            .map(|m| m.to_vec().into_iter().map(Mode::from).collect())
            .unwrap_or_else(|| vec![Mode::Improved])
    };
    let m_ref = match (&args.mref, &file.mref) {
        (Some(s), _) => parse_mref(s)?,
        (None, Some(MrefValue::Count(k))) => BatchSize::Absolute(*k),
        (None, Some(MrefValue::Fraction(f))) => BatchSize::Fraction(*f),
        (None, Some(MrefValue::Text(s))) => parse_mref(s)?,
        (None, None) => BatchSize::Absolute(1),
    };
    let defaults = BuildConfig::default();
    let base = BuildConfig {
        lec: args.lec.or(file.lec).map(LecMode::from).unwrap_or(defaults.lec),
        estimator: args
            .estimator
            .or(file.estimator)
            .map(EstimatorPolicy::from)
            .unwrap_or(defaults.estimator),
        m_ref,
        budget: args.budget.or(file.budget).unwrap_or(defaults.budget),
        tolerance: args.tol.or(file.tol).unwrap_or(defaults.tolerance),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
        n_mc_local: args.nmc_local.or(file.nmc_local).unwrap_or(defaults.n_mc_local),
        ..defaults
    };
    let d = oracle.dimension();
    for &p in &ps {
        for &mode in &modes {
            BuildConfig { p_max: p, mode, ..base.clone() }
                .validate(d)
                .map_err(|e| CliError::Usage(e.to_string()))?;
        }
    }
    let nmc_error = args.nmc_error.or(file.nmc_error).unwrap_or(DEFAULT_NMC_ERROR);
    if nmc_error == 0 {
        return Err(CliError::Usage("--nmc-error must be positive".into()));
    }
    let out = args
        .out
        .clone()
        .or_else(|| file.out.clone())
        .ok_or_else(|| CliError::Usage("missing --out".into()))?;
    Ok(RunSettings {
        oracle,
        ps,
        modes,
        base,
        nmc_error,
        out,
    })
}
