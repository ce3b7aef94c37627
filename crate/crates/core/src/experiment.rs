//! Convergence experiments: true-error probes, budget ladders, log-log
//! slopes and rank correlation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::adaptive::{BuildConfig, BuildError, SurrogateModel};
use crate::geometry::GeometryError;
use crate::oracle::{Oracle, OracleError};

/// Reference oracle values at fixed uniform random points.
#[derive(Debug, Clone)]
pub struct ErrorProbe {
    dim: usize,
    points: Vec<f64>,
    values: Vec<f64>,
}

/// Uniform points in `[0,1]^d` as a flat array.
pub fn uniform_points(d: usize, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * d).map(|_| rng.gen::<f64>()).collect()
}

impl ErrorProbe {
    pub fn new<O: Oracle>(oracle: &O, n: usize, seed: u64) -> Result<Self, OracleError> {
        let d = oracle.dimension();
        let points = uniform_points(d, n, seed);
        let values = points
            .par_chunks(d)
            .map(|x| oracle.evaluate(x).map(|e| e.value))
            .collect::<Result<Vec<f64>, _>>()?;
        Ok(Self {
            dim: d,
            points,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Mean absolute error of the model at the probe points.
    pub fn l1_error(&self, model: &SurrogateModel) -> Result<f64, GeometryError> {
        let g = model.evaluate_many(&self.points)?;
        let sum: f64 = g.iter().zip(&self.values).map(|(a, b)| (a - b).abs()).sum();
        Ok(sum / self.values.len() as f64)
    }
}

/// Roughly geometric integer ladder from `start` to `end` inclusive with
/// `per_decade` rungs per factor of ten.
pub fn geometric_ladder(start: usize, end: usize, per_decade: usize) -> Vec<usize> {
    assert!(start >= 1 && end >= start && per_decade >= 1);
    let ratio = 10f64.powf(1.0 / per_decade as f64);
    let mut out = vec![start];
    let mut x = start as f64;
    loop {
        x *= ratio;
        let k = x.round() as usize;
        if k >= end {
            break;
        }
        if k > *out.last().unwrap() {
            out.push(k);
        }
    }
    if *out.last().unwrap() != end {
        out.push(end);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergencePoint {
    pub n: usize,
    pub l1_error: f64,
    pub aggregate: f64,
}

/// Runs one adaptive build up to the largest checkpoint and records the
/// true error whenever the sample count first reaches a checkpoint.
pub fn convergence_run<O: Oracle>(
    oracle: &O,
    config: BuildConfig,
    probe: &ErrorProbe,
    checkpoints: &[usize],
) -> Result<(SurrogateModel, Vec<ConvergencePoint>), BuildError> {
    let budget = checkpoints.iter().copied().max().unwrap_or(config.budget);
    let config = BuildConfig { budget, ..config };
    let mut model = SurrogateModel::initialize(oracle, config)?;
    let mut out = Vec::new();
    let mut next = 0;
    loop {
        while next < checkpoints.len() && model.num_samples() >= checkpoints[next] {
            if out.last().map_or(true, |p: &ConvergencePoint| p.n != model.num_samples()) {
                out.push(ConvergencePoint {
                    n: model.num_samples(),
                    l1_error: probe.l1_error(&model)?,
                    aggregate: model.aggregate(),
                });
            }
            next += 1;
        }
        if model.is_done() || next >= checkpoints.len() {
            break;
        }
        model = model.refine_step(oracle)?;
    }
    Ok((model, out))
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "need at least two points for a slope");
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Slope of the points whose `n` lies in `[lo, hi]`.
pub fn slope_in_range(points: &[ConvergencePoint], lo: usize, hi: usize) -> f64 {
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.n >= lo && p.n <= hi)
        .map(|p| (p.n as f64, p.l1_error))
        .unzip();
    loglog_slope(&x, &y)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ra = ranks(a);
    let rb = ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [10.0, 20.0, 40.0, 80.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
        assert!((loglog_slope(&x, &y) + 1.5).abs() < 1e-12);
    }

    #[test]
    fn ladder_is_increasing_and_bounded() {
        let l = geometric_ladder(20, 1500, 8);
        assert_eq!(l[0], 20);
        assert_eq!(*l.last().unwrap(), 1500);
        assert!(l.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn spearman_extremes_and_ties() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        // ranks (1.5, 1.5, 3) vs (1, 2, 3): hand-computed correlation sqrt(3)/2
        let r = spearman(&[5.0, 5.0, 7.0], &[1.0, 2.0, 3.0]);
        assert!((r - 3f64.sqrt() / 2.0).abs() < 1e-12);
    }
}
