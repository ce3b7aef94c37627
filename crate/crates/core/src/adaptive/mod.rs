//! The adaptive refinement driver.
//!
//! A model starts from the cube corners and center, then repeatedly refines
//! the simplices with the largest error estimates. Each step places one new
//! sample per selected simplex, inserts the samples into the Delaunay
//! triangulation, evaluates the oracle, and refits every simplex that was
//! created or whose stencil admits one of the new samples.

pub mod placement;

use std::collections::HashSet;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::estimators::{
    estimate_last_point, estimate_mc_l1, estimate_volume_order, global_aggregate, EstimatorPolicy,
    DEFAULT_N_MC_LOCAL,
};
use crate::geometry::{GeometryError, SimplexId, Triangulation};
use crate::oracle::{Evaluation, Oracle, OracleError};
use crate::samples::SampleSet;
use crate::surrogate::{
    basis::{MAX_DEGREE, MAX_DIM},
    build_local_surrogate, linear_fallback, Fallback, LecMode, LocalSurrogate, Mode,
    SurrogateConfig, SurrogateError,
};

pub use placement::{is_boundary_simplex, place_new_point};

/// Forced refinement of multi-region simplices only applies while their
/// volume is at least this fraction of the mean simplex volume.
pub const FORCED_REFINE_VOLUME_FLOOR: f64 = 0.01;

/// Number of simplices refined per step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BatchSize {
    Absolute(usize),
    /// Fraction of the current sample count, rounded, at least one.
    Fraction(f64),
}

impl BatchSize {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            BatchSize::Absolute(k) => k.max(1),
            BatchSize::Fraction(f) => ((f * n as f64).round() as usize).max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildConfig {
    pub p_max: usize,
    pub mode: Mode,
    pub lec: LecMode,
    pub estimator: EstimatorPolicy,
    pub m_ref: BatchSize,
    /// Maximum number of oracle calls, initial samples included.
    pub budget: usize,
    /// Stop once the global aggregate is at or below this value. Ignored by
    /// the volume-order policy.
    pub tolerance: f64,
    pub seed: u64,
    pub n_mc_local: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            p_max: 2,
            mode: Mode::Improved,
            lec: LecMode::Off,
            estimator: EstimatorPolicy::MonteCarloL1,
            m_ref: BatchSize::Absolute(1),
            budget: 1000,
            tolerance: 0.0,
            seed: 0,
            n_mc_local: DEFAULT_N_MC_LOCAL,
        }
    }
}

impl BuildConfig {
    pub fn validate(&self, d: usize) -> Result<(), BuildError> {
        let bad = |msg: String| Err(BuildError::InvalidConfig(msg));
        if d == 0 || d > MAX_DIM {
            return bad(format!("dimension must be in 1..={MAX_DIM}, got {d}"));
        }
        if self.p_max == 0 || self.p_max > MAX_DEGREE {
            return bad(format!("p_max must be in 1..={MAX_DEGREE}, got {}", self.p_max));
        }
        let initial = SampleSet::initial_count(d);
        if self.budget < initial {
            return bad(format!("budget {} is below the {initial} initial samples", self.budget));
        }
        match self.m_ref {
            BatchSize::Absolute(0) => return bad("m_ref must be positive".into()),
            BatchSize::Fraction(f) if !(f > 0.0 && f.is_finite()) => {
                return bad(format!("m_ref fraction must be positive, got {f}"))
            }
            _ => {}
        }
        if !(self.tolerance >= 0.0) {
            return bad(format!("tolerance must be non-negative, got {}", self.tolerance));
        }
        if self.estimator == EstimatorPolicy::MonteCarloL1 && self.n_mc_local == 0 {
            return bad("n_mc_local must be positive".into());
        }
        Ok(())
    }

    pub fn surrogate_config(&self) -> SurrogateConfig {
        SurrogateConfig {
            p_max: self.p_max,
            mode: self.mode,
            lec: self.lec,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub step: usize,
    pub n_samples: usize,
    pub n_simplices: usize,
    pub aggregate_estimate: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error("oracle budget exhausted")]
    BudgetExhausted,
    #[error("no new sample could be placed in any selected simplex")]
    PlacementFailure,
}

/// Piecewise polynomial approximation over a Delaunay triangulation of the
/// evaluated samples.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    config: BuildConfig,
    samples: SampleSet,
    /// Per sample: `|f(x) - g_parent(x)|` at insertion time.
    hierarchical: Vec<f64>,
    tri: Triangulation,
    /// Indexed by simplex id; `Some` exactly for live simplices.
    locals: Vec<Option<LocalSurrogate>>,
    estimates: Vec<f64>,
    aggregate: f64,
    log: Vec<LogEntry>,
    step: usize,
    rng: ChaCha8Rng,
    started: Instant,
    skipped_placements: usize,
}

fn evaluate_all<O: Oracle>(oracle: &O, points: &[Vec<f64>]) -> Result<Vec<Evaluation>, OracleError> {
    points.par_iter().map(|x| oracle.evaluate(x)).collect()
}

impl SurrogateModel {
    /// Evaluates the cube corners and center and fits the initial model.
    pub fn initialize<O: Oracle>(oracle: &O, config: BuildConfig) -> Result<Self, BuildError> {
        let d = oracle.dimension();
        config.validate(d)?;
        let tri = Triangulation::unit_cube(d);
        let points: Vec<Vec<f64>> = (0..tri.num_points()).map(|i| tri.point(i).to_vec()).collect();
        let evals = evaluate_all(oracle, &points)?;
        let mut samples = SampleSet::new(d);
        for (x, e) in points.iter().zip(&evals) {
            samples.push(x, e.value, e.label);
        }
        let center = 1usize << d;
        // The center lies on the main diagonal shared by every Kuhn simplex,
        // where the corner interpolant is the mean of the diagonal endpoints.
        let corner_prediction = 0.5 * (samples.value(0) + samples.value(center - 1));
        let mut hierarchical = vec![0.0; samples.len()];
        hierarchical[center] = (samples.value(center) - corner_prediction).abs();
        Self::assemble(config, samples, hierarchical, tri)
    }

    /// Rebuilds a model from samples stored in insertion order. The first
    /// `2^d + 1` samples must be the cube corners and center.
    pub fn from_samples(
        config: BuildConfig,
        samples: SampleSet,
        hierarchical: Vec<f64>,
    ) -> Result<Self, BuildError> {
        let d = samples.dim();
        config.validate(d)?;
        if hierarchical.len() != samples.len() {
            return Err(BuildError::InvalidConfig(
                "hierarchical error count does not match the sample count".into(),
            ));
        }
        let mut tri = Triangulation::unit_cube(d);
        let initial = tri.num_points();
        if samples.len() < initial {
            return Err(BuildError::InvalidConfig("fewer samples than initial points".into()));
        }
        for i in 0..initial {
            if samples.point(i) != tri.point(i) {
                return Err(BuildError::InvalidConfig(format!(
                    "sample {i} is not the expected corner or center"
                )));
            }
        }
        for i in initial..samples.len() {
            tri.insert(samples.point(i))?;
        }
        Self::assemble(config, samples, hierarchical, tri)
    }

    fn assemble(
        config: BuildConfig,
        samples: SampleSet,
        hierarchical: Vec<f64>,
        tri: Triangulation,
    ) -> Result<Self, BuildError> {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut model = Self {
            config,
            samples,
            hierarchical,
            tri,
            locals: Vec::new(),
            estimates: Vec::new(),
            aggregate: 0.0,
            log: Vec::new(),
            step: 0,
            rng,
            started: Instant::now(),
            skipped_placements: 0,
        };
        let ids: Vec<SimplexId> = model.tri.simplex_ids().collect();
        model.refit(&ids)?;
        model.push_log();
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.samples.dim()
    }

    pub fn config(&self) -> &BuildConfig {
        &self.config
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn num_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn hierarchical_errors(&self) -> &[f64] {
        &self.hierarchical
    }

    pub fn triangulation(&self) -> &Triangulation {
        &self.tri
    }

    pub fn local(&self, id: SimplexId) -> Option<&LocalSurrogate> {
        self.locals.get(id.index()).and_then(|l| l.as_ref())
    }

    pub fn estimate(&self, id: SimplexId) -> f64 {
        self.estimates[id.index()]
    }

    pub fn aggregate(&self) -> f64 {
        self.aggregate
    }

    /// Aggregate recomputed from the per-simplex estimates.
    pub fn recompute_aggregate(&self) -> f64 {
        global_aggregate(
            self.config.estimator,
            self.tri.simplex_ids().map(|id| self.estimates[id.index()]),
        )
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    /// Selected simplices abandoned because no admissible point was found.
    pub fn skipped_placements(&self) -> usize {
        self.skipped_placements
    }

    /// Simplices whose vertices span three or more region labels.
    pub fn pending_refinement(&self) -> Vec<SimplexId> {
        self.tri
            .simplex_ids()
            .filter(|&id| self.is_forced(id))
            .collect()
    }

    fn is_forced(&self, id: SimplexId) -> bool {
        self.local(id)
            .map_or(false, |l| l.fallback == Some(Fallback::MoreThanTwoRegions))
    }

    /// True once the budget is spent or the tolerance is met.
    pub fn is_done(&self) -> bool {
        if self.samples.len() >= self.config.budget {
            return true;
        }
        self.config.estimator != EstimatorPolicy::VolumeOrder && self.aggregate <= self.config.tolerance
    }

    fn push_log(&mut self) {
        self.log.push(LogEntry {
            step: self.step,
            n_samples: self.samples.len(),
            n_simplices: self.tri.num_simplices(),
            aggregate_estimate: self.aggregate,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        });
    }

    fn estimate_for(&self, id: SimplexId, local: &LocalSurrogate) -> f64 {
        let vol = self.tri.volume(id);
        match self.config.estimator {
            EstimatorPolicy::LastPoint => {
                let newest = *self.tri.vertices(id).iter().max().expect("simplex has vertices");
                estimate_last_point(vol, self.hierarchical[newest])
            }
            EstimatorPolicy::MonteCarloL1 => {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    self.config
                        .seed
                        .wrapping_add((self.samples.len() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
                );
                rng.set_stream(id.index() as u64);
                estimate_mc_l1(
                    &self.tri.simplex_points(id),
                    vol,
                    local,
                    self.config.n_mc_local,
                    &mut rng,
                )
            }
            EstimatorPolicy::VolumeOrder => estimate_volume_order(vol, local.degree(), self.dim()),
        }
    }

    /// Refits the given live simplices and recomputes the aggregate.
    fn refit(&mut self, ids: &[SimplexId]) -> Result<(), BuildError> {
        let bound = self.tri.id_bound();
        self.locals.resize(bound, None);
        self.estimates.resize(bound, 0.0);
        let config = self.config.surrogate_config();
        let fitted: Vec<Result<(SimplexId, LocalSurrogate, f64), SurrogateError>> = ids
            .par_iter()
            .map(|&id| {
                let local = match build_local_surrogate(&self.tri, &self.samples, id, &config) {
                    Err(SurrogateError::MoreThanTwoRegions(_)) => {
                        linear_fallback(&self.tri, &self.samples, id, Fallback::MoreThanTwoRegions)
                    }
                    other => other,
                }?;
                let est = self.estimate_for(id, &local);
                Ok((id, local, est))
            })
            .collect();
        for item in fitted {
            let (id, local, est) = item?;
            self.locals[id.index()] = Some(local);
            self.estimates[id.index()] = est;
        }
        self.aggregate = self.recompute_aggregate();
        Ok(())
    }

    /// Simplices to refine this step: forced multi-region simplices above the
    /// volume floor first, then by decreasing estimate, ties by smaller id.
    fn select(&self, count: usize) -> Vec<SimplexId> {
        let mut ids: Vec<SimplexId> = self.tri.simplex_ids().collect();
        let floor = FORCED_REFINE_VOLUME_FLOOR / ids.len() as f64;
        let forced = |id: SimplexId| self.is_forced(id) && self.tri.volume(id) >= floor;
        ids.sort_by(|&a, &b| {
            forced(b)
                .cmp(&forced(a))
                .then(self.estimates[b.index()].total_cmp(&self.estimates[a.index()]))
                .then(a.cmp(&b))
        });
        ids.truncate(count);
        ids
    }

    /// Performs one refinement step with batch size `m_ref`.
    pub fn refine_step<O: Oracle>(mut self, oracle: &O) -> Result<Self, BuildError> {
        let n = self.samples.len();
        if n >= self.config.budget {
            return Err(BuildError::BudgetExhausted);
        }
        let count = self
            .config
            .m_ref
            .resolve(n)
            .min(self.config.budget - n)
            .min(self.tri.num_simplices());
        let selected = self.select(count);

        let mut proposals: Vec<Vec<f64>> = Vec::with_capacity(selected.len());
        let mut predictions: Vec<f64> = Vec::with_capacity(selected.len());
        for &id in &selected {
            match place_new_point(&self.tri, id, &proposals, &mut self.rng) {
                Some(x) => {
                    let local = self.locals[id.index()].as_ref().expect("live simplex is fitted");
                    predictions.push(local.eval(&x));
                    proposals.push(x);
                }
                None => self.skipped_placements += 1,
            }
        }

        let mut accepted = Vec::with_capacity(proposals.len());
        let mut accepted_predictions = Vec::with_capacity(proposals.len());
        let mut created: Vec<SimplexId> = Vec::new();
        for (x, pred) in proposals.into_iter().zip(predictions) {
            match self.tri.insert(&x) {
                Ok(outcome) => {
                    created.extend(outcome.created);
                    accepted.push(x);
                    accepted_predictions.push(pred);
                }
                Err(GeometryError::DegeneratePoint { .. }) => self.skipped_placements += 1,
                Err(e) => return Err(e.into()),
            }
        }
        if accepted.is_empty() {
            return Err(BuildError::PlacementFailure);
        }

        let evals = evaluate_all(oracle, &accepted)?;
        for ((x, e), pred) in accepted.iter().zip(&evals).zip(accepted_predictions) {
            self.samples.push(x, e.value, e.label);
            self.hierarchical.push((e.value - pred).abs());
        }

        let created: HashSet<SimplexId> =
            created.into_iter().filter(|&id| self.tri.is_alive(id)).collect();
        for (i, slot) in self.locals.iter_mut().enumerate() {
            if slot.is_some() && !self.tri.is_alive(SimplexId(i)) {
                *slot = None;
                self.estimates[i] = 0.0;
            }
        }
        let mut to_fit: Vec<SimplexId> = self
            .tri
            .simplex_ids()
            .filter(|id| {
                created.contains(id)
                    || self.locals[id.index()].as_ref().map_or(true, |local| {
                        let c = self.tri.centroid(*id);
                        accepted
                            .iter()
                            .zip(&evals)
                            .any(|(x, e)| local.admits(c, x, e.label))
                    })
            })
            .collect();
        to_fit.sort();
        self.refit(&to_fit)?;
        self.step += 1;
        self.push_log();
        Ok(self)
    }

    /// Evaluates the surrogate at `x`. Points on shared faces use the
    /// surrogate of the smallest containing simplex id.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, GeometryError> {
        self.check_point(x)?;
        let start = self.tri.locate(x)?;
        let id = self.tri.locate_canonical(x, Some(start))?;
        Ok(self.locals[id.index()].as_ref().expect("live simplex is fitted").eval(x))
    }

    fn check_point(&self, x: &[f64]) -> Result<(), GeometryError> {
        if x.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
            return Err(GeometryError::OutsideDomain);
        }
        Ok(())
    }

    /// Evaluates the surrogate at many points given as a flat coordinate
    /// array. Points are visited in grid-cell order so consecutive walks are
    /// short; results are returned in input order.
    pub fn evaluate_many(&self, points: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let d = self.dim();
        assert_eq!(points.len() % d, 0, "flat point array has a ragged tail");
        let n = points.len() / d;
        let cells = ((self.tri.num_simplices() as f64).powf(1.0 / d as f64).ceil() as usize).max(1);
        let key = |i: usize| -> Vec<usize> {
            points[i * d..(i + 1) * d]
                .iter()
                .map(|&t| ((t * cells as f64) as usize).min(cells - 1))
                .collect()
        };
        let mut order: Vec<(Vec<usize>, usize)> = (0..n).map(|i| (key(i), i)).collect();
        order.par_sort_unstable();
        let chunks: Vec<Result<Vec<(usize, f64)>, GeometryError>> = order
            .par_chunks(2048)
            .map(|chunk| {
                let mut hint = None;
                let mut out = Vec::with_capacity(chunk.len());
                for &(_, i) in chunk {
                    let x = &points[i * d..(i + 1) * d];
                    self.check_point(x)?;
                    let id = self.tri.locate_canonical(x, hint)?;
                    hint = Some(id);
                    out.push((i, self.locals[id.index()].as_ref().expect("live simplex is fitted").eval(x)));
                }
                Ok(out)
            })
            .collect();
        let mut values = vec![0.0; n];
        for chunk in chunks {
            for (i, v) in chunk? {
                values[i] = v;
            }
        }
        Ok(values)
    }
}

/// Builds a model: initialization followed by refinement steps until the
/// budget is spent or the tolerance is met.
pub fn build<O: Oracle>(oracle: &O, config: BuildConfig) -> Result<SurrogateModel, BuildError> {
    let mut model = SurrogateModel::initialize(oracle, config)?;
    while !model.is_done() {
        model = model.refine_step(oracle)?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests;
