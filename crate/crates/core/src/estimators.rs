//! Per-simplex error estimators and their global aggregates.

use rand::Rng;

use crate::geometry::{from_barycentric, sample_barycentric};
use crate::surrogate::LocalSurrogate;

/// Default number of interior Monte Carlo points per simplex.
pub const DEFAULT_N_MC_LOCAL: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorPolicy {
    /// `vol * h^2` with `h` the hierarchical error of the newest vertex.
    LastPoint,
    /// `vol * mean |g - g_lower|^((p+1)/p)` over interior draws.
    MonteCarloL1,
    /// `vol^((p+1)/d + 1)`; depends on geometry only.
    VolumeOrder,
}

pub fn estimate_last_point(volume: f64, hierarchical_error: f64) -> f64 {
    volume * hierarchical_error * hierarchical_error
}

/// Monte Carlo l1-type estimate of `|g - g_lower|^((p+1)/p)` over the simplex.
pub fn estimate_mc_l1_with<R, G, L>(
    vertices: &[&[f64]],
    volume: f64,
    g: G,
    lower: L,
    degree: usize,
    n_mc: usize,
    rng: &mut R,
) -> f64
where
    R: Rng + ?Sized,
    G: Fn(&[f64]) -> f64,
    L: Fn(&[f64]) -> f64,
{
    if n_mc == 0 {
        return 0.0;
    }
    let d = vertices.len() - 1;
    let p = degree.max(1) as f64;
    let exponent = (p + 1.0) / p;
    let mut sum = 0.0;
    for _ in 0..n_mc {
        let x = from_barycentric(vertices, &sample_barycentric(d, rng));
        sum += (g(&x) - lower(&x)).abs().powf(exponent);
    }
    volume * sum / n_mc as f64
}

/// Monte Carlo estimate comparing a local surrogate with its lower-degree
/// comparator. Never evaluates the underlying function.
pub fn estimate_mc_l1<R: Rng + ?Sized>(
    vertices: &[&[f64]],
    volume: f64,
    local: &LocalSurrogate,
    n_mc: usize,
    rng: &mut R,
) -> f64 {
    estimate_mc_l1_with(
        vertices,
        volume,
        |x| local.eval(x),
        |x| local.eval_lower(x),
        local.degree(),
        n_mc,
        rng,
    )
}

pub fn estimate_volume_order(volume: f64, degree: usize, d: usize) -> f64 {
    volume.powf((degree as f64 + 1.0) / d as f64 + 1.0)
}

/// Square root of the sum for `LastPoint`, plain sum otherwise.
pub fn global_aggregate<I: IntoIterator<Item = f64>>(policy: EstimatorPolicy, estimates: I) -> f64 {
    let total: f64 = estimates.into_iter().sum();
    match policy {
        EstimatorPolicy::LastPoint => total.sqrt(),
        EstimatorPolicy::MonteCarloL1 | EstimatorPolicy::VolumeOrder => total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn last_point_arithmetic() {
        assert_eq!(estimate_last_point(0.25, 0.0), 0.0);
        assert!((estimate_last_point(0.25, 0.1) - 0.0025).abs() < 1e-15);
    }

    #[test]
    fn last_point_aggregate_is_root_of_sum() {
        let parts = [0.04, 0.09];
        assert_eq!(global_aggregate(EstimatorPolicy::LastPoint, parts), 0.13f64.sqrt());
        assert_eq!(global_aggregate(EstimatorPolicy::LastPoint, [0.09]), 0.3);
        // three-simplex toy case summed by hand
        let parts = [estimate_last_point(0.5, 0.2), estimate_last_point(0.25, 0.4), estimate_last_point(0.25, 0.0)];
        let hand = (0.5f64 * 0.04 + 0.25 * 0.16).sqrt();
        assert!((global_aggregate(EstimatorPolicy::LastPoint, parts) - hand).abs() < 1e-15);
    }

    #[test]
    fn volume_order_values() {
        assert_eq!(estimate_volume_order(1.0, 3, 2), 1.0);
        assert!((estimate_volume_order(0.25, 1, 2) - 0.0625).abs() < 1e-15);
        assert!((estimate_volume_order(0.5, 3, 4) - 0.25).abs() < 1e-15);
        let total = global_aggregate(EstimatorPolicy::VolumeOrder, [estimate_volume_order(0.25, 1, 2); 4]);
        assert!((total - 0.25).abs() < 1e-15);
        assert!(estimate_volume_order(0.1, 2, 2) < estimate_volume_order(0.2, 2, 2));
    }

    #[test]
    fn mc_l1_is_zero_for_identical_fits() {
        let tri: [&[f64]; 3] = [&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = estimate_mc_l1_with(&tri, 0.5, |x| x[0], |x| x[0], 2, 100, &mut rng);
        assert_eq!(e, 0.0);
    }

    #[test]
    fn mc_l1_linear_against_zero_on_unit_interval() {
        let seg: [&[f64]; 2] = [&[0.0], &[1.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = estimate_mc_l1_with(&seg, 1.0, |x| x[0], |_| 0.0, 1, 10_000, &mut rng);
        // E[x^2] = 1/3 with standard error sqrt(4/45 / 10^4) ~ 0.003
        assert!((e - 1.0 / 3.0).abs() < 0.012, "{e}");
    }

    #[test]
    fn mc_l1_aggregate_is_additive() {
        let a: [&[f64]; 3] = [&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0]];
        let b: [&[f64]; 3] = [&[0.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]];
        let g = |x: &[f64]| x[0] * x[1];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ea = estimate_mc_l1_with(&a, 0.5, g, |_| 0.0, 2, 500, &mut rng);
        let eb = estimate_mc_l1_with(&b, 0.5, g, |_| 0.0, 2, 500, &mut rng);
        assert_eq!(global_aggregate(EstimatorPolicy::MonteCarloL1, [ea, eb]), ea + eb);
    }
}
