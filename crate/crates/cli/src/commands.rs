//! The `build`, `converge` and `stats` subcommands. Every command resolves
//! and validates its inputs before anything is written.

use std::path::{Path, PathBuf};

use clap::Args;
use ssc_core::adaptive::BuildConfig;
use ssc_core::estimators::EstimatorPolicy;
use ssc_core::experiment::{convergence_run, geometric_ladder, loglog_slope, ConvergencePoint, ErrorProbe};
use ssc_core::oracle::Oracle;
use ssc_core::samples::SampleSet;
use ssc_core::stats::{self, QuadratureSpec};

use crate::model_file::ModelFile;
use crate::settings::{estimator_name, mode_name, resolve_run, FileConfig, ModelArgs, QuadArg, RunSettings};
use crate::CliError;

pub const BUILD_LOG: &str = "build_log.csv";
pub const MODEL_FILE: &str = "model.ssc";
pub const CONVERGE_CSV: &str = "converge.csv";
pub const SLOPES_CSV: &str = "slopes.csv";
pub const STATS_CSV: &str = "stats.csv";
pub const CDF_CSV: &str = "cdf.csv";
pub const COMPARISON_CSV: &str = "comparison.csv";

/// Seeds of the true-error probe are offset from the run seed so the probe
/// never reuses the build's random stream.
const PROBE_SEED_OFFSET: u64 = 0x5eed_0f_e770;

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Usage(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn create_out_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Usage(format!("cannot create output directory {}: {e}", out.display())))
}

fn warn_ignored_tolerance(config: &BuildConfig) {
    if config.estimator == EstimatorPolicy::VolumeOrder && config.tolerance > 0.0 {
        eprintln!("warning: --tol is ignored by the vol-order estimator, which has no error scale");
    }
}

fn resolve(args: &ModelArgs, single: bool) -> Result<RunSettings, CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let settings = resolve_run(args, &file)?;
    if single && (settings.ps.len() != 1 || settings.modes.len() != 1) {
        return Err(CliError::Usage("build takes a single --p and --mode".into()));
    }
    warn_ignored_tolerance(&settings.base);
    Ok(settings)
}

pub fn build(args: &ModelArgs) -> Result<(), CliError> {
    let s = resolve(args, true)?;
    let config = s.config(s.ps[0], s.modes[0], s.base.seed);
    let oracle = s.oracle.oracle();
    let model = ssc_core::adaptive::build(&oracle, config).map_err(|e| CliError::Numerical(e.to_string()))?;

    let rows: Vec<Vec<String>> = model
        .log()
        .iter()
        .map(|e| {
            vec![
                e.step.to_string(),
                e.n_samples.to_string(),
                e.n_simplices.to_string(),
                num(e.aggregate_estimate),
                num(e.wall_time_s),
            ]
        })
        .collect();
    create_out_dir(&s.out)?;
    write_csv(
        &s.out.join(BUILD_LOG),
        &["step", "n_samples", "n_simplices", "aggregate_estimate", "wall_time_s"],
        &rows,
    )?;
    ModelFile::from_model(&model, Some(s.oracle.clone())).save(&s.out.join(MODEL_FILE))?;
    println!(
        "built {}: n={} simplices={} aggregate_estimate={}",
        oracle.describe(),
        model.num_samples(),
        model.triangulation().num_simplices(),
        num(model.aggregate())
    );
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Repetitions; repetition r uses seed + r
    #[arg(long)]
    pub reps: Option<usize>,
    /// Error checkpoints per decade of n
    #[arg(long = "per-decade")]
    pub per_decade: Option<usize>,
}

pub fn converge(args: &ConvergeArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.model.config.as_deref())?;
    let s = resolve(&args.model, false)?;
    let reps = args.reps.or(file.reps).unwrap_or(1);
    let per_decade = args.per_decade.or(file.per_decade).unwrap_or(10);
    if reps == 0 || per_decade == 0 {
        return Err(CliError::Usage("--reps and --per-decade must be positive".into()));
    }
    let oracle = s.oracle.oracle();
    let d = oracle.dimension();
    let start = SampleSet::initial_count(d);
    let ladder = geometric_ladder(start, s.base.budget, per_decade);
    let probe = ErrorProbe::new(&oracle, s.nmc_error, s.base.seed.wrapping_add(PROBE_SEED_OFFSET))
        .map_err(|e| CliError::Numerical(e.to_string()))?;

    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    let (lo, hi) = (s.base.budget / 10, s.base.budget);
    for &p in &s.ps {
        for &mode in &s.modes {
            let mut pooled: Vec<ConvergencePoint> = Vec::new();
            for r in 0..reps {
                let seed = s.base.seed.wrapping_add(r as u64);
                let config = s.config(p, mode, seed);
                let (_, points) =
                    convergence_run(&oracle, config, &probe, &ladder).map_err(|e| CliError::Numerical(e.to_string()))?;
                for pt in &points {
                    rows.push(vec![
                        pt.n.to_string(),
                        num(pt.l1_error),
                        num(pt.aggregate),
                        p.to_string(),
                        mode_name(mode).to_string(),
                        estimator_name(s.base.estimator).to_string(),
                        seed.to_string(),
                    ]);
                }
                pooled.extend(points);
            }
            let fit: Vec<&ConvergencePoint> = pooled
                .iter()
                .filter(|pt| pt.n >= lo && pt.n <= hi && pt.l1_error > 0.0)
                .collect();
            let slope = if fit.iter().map(|pt| pt.n).collect::<std::collections::BTreeSet<_>>().len() >= 2 {
                let x: Vec<f64> = fit.iter().map(|pt| pt.n as f64).collect();
                let y: Vec<f64> = fit.iter().map(|pt| pt.l1_error).collect();
                loglog_slope(&x, &y)
            } else {
                f64::NAN
            };
            println!("p={p} mode={} slope={slope:.3}", mode_name(mode));
            slopes.push(vec![
                p.to_string(),
                mode_name(mode).to_string(),
                estimator_name(s.base.estimator).to_string(),
                num(slope),
                lo.to_string(),
                hi.to_string(),
                fit.len().to_string(),
            ]);
        }
    }
    create_out_dir(&s.out)?;
    write_csv(
        &s.out.join(CONVERGE_CSV),
        &["n", "l1_error", "aggregate_estimate", "p", "mode", "estimator", "seed"],
        &rows,
    )?;
    write_csv(
        &s.out.join(SLOPES_CSV),
        &["p", "mode", "estimator", "slope", "n_lo", "n_hi", "points"],
        &slopes,
    )
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    /// TOML file with defaults for any of these flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model file written by `build`
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Quadrature applied to the surrogate
    #[arg(long, value_enum)]
    pub quad: Option<QuadArg>,
    /// Quadrature nodes
    #[arg(long)]
    pub nq: Option<usize>,
    #[arg(long = "quad-seed")]
    pub quad_seed: Option<u64>,
    #[arg(long = "cdf-nodes")]
    pub cdf_nodes: Option<usize>,
    /// Surrogate draws behind the CDF
    #[arg(long = "cdf-mc")]
    pub cdf_mc: Option<usize>,
    #[arg(long = "cdf-seed")]
    pub cdf_seed: Option<u64>,
    /// Direct-oracle estimators to compare with at the model's oracle budget
    #[arg(long, value_enum, value_delimiter = ',')]
    pub compare: Vec<QuadArg>,
    /// Halton nodes of the direct-oracle reference expectation
    #[arg(long = "reference-n")]
    pub reference_n: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const DEFAULT_NQ: usize = 1_000_000;
pub const DEFAULT_CDF_NODES: usize = 101;
pub const DEFAULT_CDF_MC: usize = 100_000;
pub const DEFAULT_REFERENCE_N: usize = 1 << 20;

fn quad_spec(kind: QuadArg, n: usize, seed: u64) -> QuadratureSpec {
    match kind {
        QuadArg::Mc => QuadratureSpec::MonteCarlo { n, seed },
        QuadArg::Qmc => QuadratureSpec::Halton { n },
    }
}

pub fn stats(args: &StatsArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let model_path = args
        .model
        .clone()
        .or(file.model.clone())
        .ok_or_else(|| CliError::Usage("missing --model".into()))?;
    let out = args
        .out
        .clone()
        .or(file.out.clone())
        .ok_or_else(|| CliError::Usage("missing --out".into()))?;
    let quad_kind = args.quad.or(file.quad).unwrap_or(QuadArg::Qmc);
    let nq = args.nq.or(file.nq).unwrap_or(DEFAULT_NQ);
    let quad_seed = args.quad_seed.or(file.quad_seed).unwrap_or(0);
    let cdf_nodes = args.cdf_nodes.or(file.cdf_nodes).unwrap_or(DEFAULT_CDF_NODES);
    let cdf_mc = args.cdf_mc.or(file.cdf_mc).unwrap_or(DEFAULT_CDF_MC);
    let cdf_seed = args.cdf_seed.or(file.cdf_seed).unwrap_or(1);
    let compare: Vec<QuadArg> = if !args.compare.is_empty() {
        args.compare.clone()
    } else {
        file.compare.as_ref().map(|c| c.to_vec()).unwrap_or_default()
    };
    let reference_n = args.reference_n.or(file.reference_n).unwrap_or(DEFAULT_REFERENCE_N);
    if nq == 0 || cdf_mc == 0 || reference_n == 0 {
        return Err(CliError::Usage("--nq, --cdf-mc and --reference-n must be positive".into()));
    }
    if cdf_nodes < 2 {
        return Err(CliError::Usage("--cdf-nodes must be at least 2".into()));
    }

    let stored = ModelFile::load(&model_path)?;
    if !compare.is_empty() && stored.oracle.is_none() {
        return Err(CliError::Usage("--compare needs a model file that names its oracle".into()));
    }
    let model = stored.rebuild()?;
    let numerical = |e: &dyn std::fmt::Display| CliError::Numerical(e.to_string());

    let quad = quad_spec(quad_kind, nq, quad_seed);
    let m = stats::moments(&model, &quad).map_err(|e| numerical(&e))?;
    let curve = stats::cdf(&model, cdf_nodes, cdf_mc, cdf_seed).map_err(|e| numerical(&e))?;
    let model_n = model.num_samples();

    let stat_rows: Vec<Vec<String>> = [
        ("expectation", m.mean),
        ("variance", m.variance),
        ("expectation_stderr", m.mean_stderr),
        ("variance_stderr", m.variance_stderr),
    ]
    .iter()
    .map(|(name, v)| {
        vec![
            name.to_string(),
            num(*v),
            quad.kind_name().to_string(),
            nq.to_string(),
            model_n.to_string(),
        ]
    })
    .collect();
    let cdf_rows: Vec<Vec<String>> = curve
        .nodes
        .iter()
        .zip(&curve.probs)
        .map(|(y, p)| vec![num(*y), num(*p)])
        .collect();

    let mut comparison = Vec::new();
    if let Some(spec) = &stored.oracle {
        if !compare.is_empty() {
            let oracle = spec.oracle();
            let mean_of = |q: &QuadratureSpec| -> Result<f64, CliError> {
                let v = stats::oracle_values(&oracle, q).map_err(|e| numerical(&e))?;
                Ok(stats::sample_moments(&v).mean)
            };
            let reference = mean_of(&QuadratureSpec::Halton { n: reference_n })?;
            let mut row = |method: &str, calls: usize, e: f64| {
                comparison.push(vec![
                    method.to_string(),
                    calls.to_string(),
                    num(e),
                    num(reference),
                    num((e - reference).abs()),
                ]);
            };
            row("ssc", model_n, m.mean);
            for kind in &compare {
                let e = mean_of(&quad_spec(*kind, model_n, quad_seed))?;
                row(if *kind == QuadArg::Mc { "mc" } else { "qmc" }, model_n, e);
            }
        }
    }

    create_out_dir(&out)?;
    write_csv(
        &out.join(STATS_CSV),
        &["statistic", "value", "quad_kind", "quad_n", "model_n"],
        &stat_rows,
    )?;
    write_csv(&out.join(CDF_CSV), &["y", "probability"], &cdf_rows)?;
    if !comparison.is_empty() {
        write_csv(
            &out.join(COMPARISON_CSV),
            &["method", "oracle_calls", "expectation", "reference", "abs_error"],
            &comparison,
        )?;
    }
    println!(
        "expectation={} (stderr {}) variance={} (stderr {})",
        num(m.mean),
        num(m.mean_stderr),
        num(m.variance),
        num(m.variance_stderr)
    );
    Ok(())
}
