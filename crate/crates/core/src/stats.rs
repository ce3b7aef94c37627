//! Statistics of the input-to-output pushforward under a uniform density:
//! moments and CDFs evaluated on the surrogate, plus the quadrature rules
//! used for them. Nothing here calls an oracle.

use rayon::prelude::*;

use crate::adaptive::SurrogateModel;
use crate::experiment::uniform_points;
use crate::geometry::GeometryError;
use crate::oracle::{Oracle, OracleError};

/// Bases of the Halton sequence, one per coordinate.
pub const HALTON_PRIMES: [u64; 6] = [2, 3, 5, 7, 11, 13];
/// Negative variances down to this value are rounding noise and read as 0.
pub const VARIANCE_SLACK: f64 = 1e-12;
/// Value ranges narrower than this give a point-mass CDF.
pub const DEGENERATE_RANGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadratureSpec {
    /// `n` uniform random nodes from a seeded generator.
    MonteCarlo { n: usize, seed: u64 },
    /// The first `n` Halton points.
    Halton { n: usize },
}

impl QuadratureSpec {
    pub fn n(&self) -> usize {
        match *self {
            QuadratureSpec::MonteCarlo { n, .. } | QuadratureSpec::Halton { n } => n,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            QuadratureSpec::MonteCarlo { .. } => "mc",
            QuadratureSpec::Halton { .. } => "qmc",
        }
    }

    /// Quadrature nodes as a flat row-major array of `n` points.
    pub fn nodes(&self, d: usize) -> Vec<f64> {
        assert!(self.n() >= 1, "quadrature needs at least one node");
        match *self {
            QuadratureSpec::MonteCarlo { n, seed } => uniform_points(d, n, seed),
            QuadratureSpec::Halton { n } => halton_sequence(d, n),
        }
    }
}

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut x = 0.0;
    while index > 0 {
        x += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    x
}

/// Halton points with indices `1..=n` as a flat row-major array.
pub fn halton_sequence(d: usize, n: usize) -> Vec<f64> {
    assert!(d >= 1 && d <= HALTON_PRIMES.len(), "Halton sequence supports 1 <= d <= 6");
    (1..=n as u64)
        .flat_map(|i| HALTON_PRIMES[..d].iter().map(move |&b| radical_inverse(i, b)))
        .collect()
}

/// Mean and variance of a sample with standard errors that treat the
/// sample as independent draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub mean_stderr: f64,
    pub variance_stderr: f64,
}

pub fn sample_moments(values: &[f64]) -> Moments {
    assert!(!values.is_empty(), "moments of an empty sample");
    let n = values.len();
    let nf = n as f64;
    let mean = values.par_iter().sum::<f64>() / nf;
    let (m2, m4) = values
        .par_iter()
        .map(|v| {
            let c2 = (v - mean) * (v - mean);
            (c2, c2 * c2)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let mut variance = m2 / nf;
    if variance < 0.0 && variance >= -VARIANCE_SLACK {
        variance = 0.0;
    }
    let m4 = m4 / nf;
    Moments {
        n,
        mean,
        variance,
        mean_stderr: (variance / nf).sqrt(),
        variance_stderr: ((m4 - variance * variance).max(0.0) / nf).sqrt(),
    }
}

/// Expectation and variance of the surrogate on one shared node set.
pub fn moments(model: &SurrogateModel, quad: &QuadratureSpec) -> Result<Moments, GeometryError> {
    let values = model.evaluate_many(&quad.nodes(model.dim()))?;
    Ok(sample_moments(&values))
}

pub fn expectation(model: &SurrogateModel, quad: &QuadratureSpec) -> Result<f64, GeometryError> {
    moments(model, quad).map(|m| m.mean)
}

pub fn variance(model: &SurrogateModel, quad: &QuadratureSpec) -> Result<f64, GeometryError> {
    moments(model, quad).map(|m| m.variance)
}

/// Oracle values at the quadrature nodes, for direct reference estimates.
pub fn oracle_values<O: Oracle>(oracle: &O, quad: &QuadratureSpec) -> Result<Vec<f64>, OracleError> {
    let d = oracle.dimension();
    quad.nodes(d)
        .par_chunks(d)
        .map(|x| oracle.evaluate(x).map(|e| e.value))
        .collect()
}

/// Piecewise-linear CDF through `(nodes[i], probs[i])`; 0 below the first
/// node and 1 from the last node on.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfCurve {
    pub nodes: Vec<f64>,
    pub probs: Vec<f64>,
}

impl CdfCurve {
    pub fn eval(&self, y: f64) -> f64 {
        let last = self.nodes.len() - 1;
        if y < self.nodes[0] {
            return 0.0;
        }
        if y >= self.nodes[last] {
            return 1.0;
        }
        let k = self.nodes.partition_point(|&t| t <= y) - 1;
        let (y0, y1) = (self.nodes[k], self.nodes[k + 1]);
        let t = (y - y0) / (y1 - y0);
        (self.probs[k] + t * (self.probs[k + 1] - self.probs[k])).clamp(0.0, 1.0)
    }
}

/// Empirical CDF of `values` at `n_nodes` equidistant nodes spanning their
/// range. All nodes share the same sample, so the probabilities are
/// non-decreasing and the last one is 1.
pub fn cdf_from_values(values: &[f64], n_nodes: usize) -> CdfCurve {
    assert!(n_nodes >= 2, "a CDF needs at least two nodes");
    assert!(!values.is_empty(), "CDF of an empty sample");
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < DEGENERATE_RANGE {
        return CdfCurve {
            nodes: vec![lo, lo],
            probs: vec![1.0, 1.0],
        };
    }
    let mut sorted = values.to_vec();
    sorted.par_sort_unstable_by(f64::total_cmp);
    let h = (hi - lo) / (n_nodes - 1) as f64;
    let nodes: Vec<f64> = (0..n_nodes)
        .map(|i| if i == n_nodes - 1 { hi } else { lo + i as f64 * h })
        .collect();
    let probs = nodes
        .iter()
        .map(|&y| sorted.partition_point(|&v| v <= y) as f64 / sorted.len() as f64)
        .collect();
    CdfCurve { nodes, probs }
}

/// CDF of the surrogate from `n_mc` uniform draws generated from `seed`.
pub fn cdf(
    model: &SurrogateModel,
    n_nodes: usize,
    n_mc: usize,
    seed: u64,
) -> Result<CdfCurve, GeometryError> {
    let values = model.evaluate_many(&uniform_points(model.dim(), n_mc, seed))?;
    Ok(cdf_from_values(&values, n_nodes))
}
