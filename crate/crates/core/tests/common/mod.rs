//! Property checkers shared by the property suite and the acceptance run.
//! Reference values are computed independently of the library code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssc_core::adaptive::{BatchSize, BuildConfig, SurrogateModel};
use ssc_core::estimators::EstimatorPolicy;
use ssc_core::geometry::{from_barycentric, sample_barycentric, SimplexId, Triangulation};
use ssc_core::oracle::{Evaluation, Oracle, OracleError};
use ssc_core::samples::{RegionLabel, SampleSet};
use ssc_core::surrogate::lec::barycentric_lattice;
use ssc_core::surrogate::{lebesgue_constant, monomial_basis, Frame, Polynomial, SurrogateKind, LEBESGUE_LIMIT};
use ssc_core::testbed::TestOracle;
use statrs::distribution::{ChiSquared, ContinuousCDF};

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

pub fn config(p: usize, budget: usize, seed: u64) -> BuildConfig {
    BuildConfig {
        p_max: p,
        budget,
        seed,
        ..BuildConfig::default()
    }
}

pub fn random_interior(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(0.0..1.0)).collect()).collect()
}

/// Circumcenter from `2 (v_i - v_0) . c = |v_i|^2 - |v_0|^2`, solved by
/// Gaussian elimination with partial pivoting.
pub fn circumcenter(v: &[&[f64]]) -> Vec<f64> {
    let d = v.len() - 1;
    let mut a: Vec<Vec<f64>> = (1..=d)
        .map(|i| {
            let mut row: Vec<f64> = (0..d).map(|k| 2.0 * (v[i][k] - v[0][k])).collect();
            let rhs: f64 = (0..d).map(|k| v[i][k] * v[i][k] - v[0][k] * v[0][k]).sum();
            row.push(rhs);
            row
        })
        .collect();
    for c in 0..d {
        let piv = (c..d).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        for r in c + 1..d {
            let f = a[r][c] / a[c][c];
            for k in c..=d {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    let mut x = vec![0.0; d];
    for r in (0..d).rev() {
        let s: f64 = (r + 1..d).map(|k| a[r][k] * x[k]).sum();
        x[r] = (a[r][d] - s) / a[r][r];
    }
    x
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Number of (simplex, point) pairs with the point strictly inside the
/// simplex's circumsphere.
pub fn delaunay_violations(tri: &Triangulation) -> usize {
    let mut bad = 0;
    for id in tri.simplex_ids() {
        let verts = tri.simplex_points(id);
        let c = circumcenter(&verts);
        let r2 = dist2(&c, verts[0]);
        for i in 0..tri.num_points() {
            if tri.vertices(id).contains(&i) {
                continue;
            }
            if dist2(&c, tri.point(i)) < r2 * (1.0 - 1e-9) {
                bad += 1;
            }
        }
    }
    bad
}

pub fn vertices_are_exactly_the_points(tri: &Triangulation) -> bool {
    let mut seen = vec![false; tri.num_points()];
    for id in tri.simplex_ids() {
        for &v in tri.vertices(id) {
            seen[v] = true;
        }
    }
    seen.iter().all(|&s| s)
}

/// Inserts `n` random points and checks the empty-circumsphere property by
/// brute force, vertex coverage and the partition of unity.
pub fn check_delaunay(d: usize, n: usize, seed: u64) -> Result<(), String> {
    let mut tri = Triangulation::unit_cube(d);
    for p in random_interior(d, n, seed) {
        tri.insert(&p).map_err(|e| e.to_string())?;
    }
    let bad = delaunay_violations(&tri);
    ensure!(bad == 0, "d={d} n={n} seed={seed}: {bad} circumsphere violations");
    ensure!(vertices_are_exactly_the_points(&tri), "d={d}: a point is not a vertex");
    ensure!((tri.total_volume() - 1.0).abs() <= 1e-9, "d={d}: volumes sum to {}", tri.total_volume());
    Ok(())
}

/// Partition of unity checked every `every` insertions of `n` random points.
pub fn check_volume_partition(d: usize, n: usize, every: usize, seed: u64) -> Result<(), String> {
    let mut tri = Triangulation::unit_cube(d);
    for (k, p) in random_interior(d, n, seed).iter().enumerate() {
        tri.insert(p).map_err(|e| e.to_string())?;
        if k % every == 0 || k + 1 == n {
            let v = tri.total_volume();
            ensure!((v - 1.0).abs() <= 1e-9, "d={d} after {} insertions volumes sum to {v}", k + 1);
        }
    }
    ensure!(vertices_are_exactly_the_points(&tri), "d={d}: a point is not a vertex");
    Ok(())
}

/// After every build step: partition of unity, sample/vertex agreement and
/// interpolation of every stencil sample to `1e-8 (1 + |f|)`.
pub fn check_build_invariants(
    d: usize,
    p: usize,
    budget: usize,
    estimator: EstimatorPolicy,
    seed: u64,
) -> Result<(), String> {
    let oracle = TestOracle::clipped(d, 0.7);
    let cfg = BuildConfig { estimator, ..config(p, budget, seed) };
    let mut model = SurrogateModel::initialize(&oracle, cfg).map_err(|e| e.to_string())?;
    loop {
        let tri = model.triangulation();
        let n = model.num_samples();
        ensure!((tri.total_volume() - 1.0).abs() <= 1e-9, "d={d} n={n}: volumes sum to {}", tri.total_volume());
        ensure!(vertices_are_exactly_the_points(tri), "d={d} n={n}: a sample is not a vertex");
        ensure!(tri.num_points() == n, "d={d}: {} points for {n} samples", tri.num_points());
        let s = model.samples();
        for id in tri.simplex_ids() {
            let g = model.local(id).ok_or_else(|| format!("simplex {id:?} has no surrogate"))?;
            if g.fallback.is_some() {
                continue;
            }
            for (k, st) in g.stencils.iter().enumerate() {
                for &i in &st.point_ids {
                    let f = s.value(i);
                    let got = match &g.kind {
                        SurrogateKind::OneSided { poly } => poly.eval(s.point(i)),
                        SurrogateKind::TwoSided { poly_low, poly_high, .. } => [poly_low, poly_high][k].eval(s.point(i)),
                    };
                    ensure!(
                        (got - f).abs() <= 1e-8 * (1.0 + f.abs()),
                        "d={d} n={n} simplex {id:?}: sample {i} fitted {got} vs {f}"
                    );
                }
            }
        }
        if model.is_done() {
            return Ok(());
        }
        model = model.refine_step(&oracle).map_err(|e| e.to_string())?;
    }
}

/// Two builds with the same configuration agree bit for bit in every
/// build-log column except wall time and in every sample.
pub fn check_determinism(d: usize, p: usize, m_ref: BatchSize, seed: u64) -> Result<(), String> {
    let oracle = TestOracle::clipped(d, 0.7);
    let cfg = BuildConfig { m_ref, ..config(p, 60, seed) };
    let a = ssc_core::adaptive::build(&oracle, cfg.clone()).map_err(|e| e.to_string())?;
    let b = ssc_core::adaptive::build(&oracle, cfg).map_err(|e| e.to_string())?;
    let strip = |m: &SurrogateModel| -> Vec<(usize, usize, usize, u64)> {
        m.log().iter().map(|e| (e.step, e.n_samples, e.n_simplices, e.aggregate_estimate.to_bits())).collect()
    };
    ensure!(strip(&a) == strip(&b), "d={d} p={p} seed={seed}: build logs differ");
    for i in 0..a.num_samples() {
        ensure!(a.samples().point(i) == b.samples().point(i), "sample {i} differs");
    }
    Ok(())
}

/// Negating every sample value flips each combiner and negates the
/// surrogate pointwise.
pub fn check_negation(p: usize, seed: u64) -> Result<(), String> {
    let oracle = TestOracle::clipped(2, 0.7);
    let model = ssc_core::adaptive::build(&oracle, config(p, 80, seed)).map_err(|e| e.to_string())?;
    let s = model.samples();
    let mut neg = SampleSet::new(2);
    for i in 0..s.len() {
        neg.push(s.point(i), -s.value(i), s.label(i));
    }
    let flipped = SurrogateModel::from_samples(model.config().clone(), neg, model.hierarchical_errors().to_vec())
        .map_err(|e| e.to_string())?;
    for id in model.triangulation().simplex_ids() {
        if let (SurrogateKind::TwoSided { combine: a, .. }, SurrogateKind::TwoSided { combine: b, .. }) =
            (&model.local(id).unwrap().kind, &flipped.local(id).unwrap().kind)
        {
            ensure!(a != b, "simplex {id:?} kept combiner {a:?}");
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
    for _ in 0..300 {
        let x = [rng.gen::<f64>(), rng.gen::<f64>()];
        let (g, h) = (model.evaluate(&x).unwrap(), flipped.evaluate(&x).unwrap());
        ensure!((g + h).abs() <= 1e-9 * (1.0 + g.abs()), "x={x:?}: g={g}, negated model gives {h}");
    }
    Ok(())
}

pub struct PolynomialOracle(pub Polynomial);

impl Oracle for PolynomialOracle {
    fn dimension(&self) -> usize {
        self.0.frame().dim()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation, OracleError> {
        Ok(Evaluation {
            value: self.0.eval(x),
            label: RegionLabel(0),
        })
    }
}

pub fn polynomial_oracle(d: usize, p: usize, seed: u64) -> PolynomialOracle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<f64> = monomial_basis(d, p).iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
    PolynomialOracle(Polynomial::new(Frame::identity(d), p, coeffs))
}

fn full_degree_lebesgue(model: &SurrogateModel, id: SimplexId, p: usize) -> f64 {
    let tri = model.triangulation();
    let d = tri.dim();
    let g = model.local(id).unwrap();
    let st = g.plans[0].stencil(d, p).unwrap();
    let pts: Vec<&[f64]> = st.point_ids.iter().map(|&i| model.samples().point(i)).collect();
    let frame = Frame::fitted(tri.centroid(id), &pts);
    let verts = tri.simplex_points(id);
    let probe: Vec<Vec<f64>> = barycentric_lattice(d, 2 * p + 2)
        .iter()
        .map(|w| from_barycentric(&verts, w))
        .collect();
    lebesgue_constant(&frame, p, &pts, &probe)
}

/// Builds on a random global polynomial of degree `p`, checks reproduction
/// to 1e-7 on every full-degree simplex and a Lebesgue justification for
/// every lowered one. Returns (lowered, total) simplex counts.
pub fn check_reproduction(d: usize, p: usize, seed: u64) -> Result<(usize, usize), String> {
    let oracle = polynomial_oracle(d, p, seed);
    let model = ssc_core::adaptive::build(&oracle, config(p, 90, seed)).map_err(|e| e.to_string())?;
    let tri = model.triangulation();
    let mut lowered = 0;
    let mut total = 0;
    for id in tri.simplex_ids() {
        total += 1;
        let g = model.local(id).unwrap();
        if g.degree() < p {
            // only a poorly poised or singular full-degree stencil may lower the degree
            let lambda = full_degree_lebesgue(&model, id, p);
            ensure!(lambda > LEBESGUE_LIMIT, "d={d} p={p} seed={seed}: degree lowered at Lebesgue constant {lambda}");
            lowered += 1;
            continue;
        }
        let verts = tri.simplex_points(id);
        for w in barycentric_lattice(d, 5) {
            let x = from_barycentric(&verts, &w);
            let f = oracle.0.eval(&x);
            let g_x = g.eval(&x);
            ensure!(
                (g_x - f).abs() <= 1e-7 * (1.0 + f.abs()),
                "d={d} p={p} seed={seed}: {g_x} vs {f} at {x:?}"
            );
        }
    }
    Ok((lowered, total))
}

/// Pooled fraction of lowered simplices over seeds `0..seeds` must not
/// exceed 5%.
pub fn check_lowering_is_rare(d: usize, p: usize, seeds: u64) -> Result<(), String> {
    let (mut lowered, mut total) = (0, 0);
    for seed in 0..seeds {
        let (l, t) = check_reproduction(d, p, seed)?;
        lowered += l;
        total += t;
    }
    ensure!(lowered * 20 <= total, "d={d} p={p}: {lowered} of {total} simplices lowered");
    Ok(())
}

/// Mean, variance and covariance of Dirichlet(1, ..., 1) weights on a
/// d-simplex.
fn dirichlet_moments(d: usize) -> (f64, f64, f64) {
    let k = (d + 1) as f64;
    (1.0 / k, d as f64 / (k * k * (k + 1.0)), -1.0 / (k * k * (k + 1.0)))
}

pub fn check_sampler_moments(d: usize, n: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Vec<f64>> = (0..n).map(|_| sample_barycentric(d, &mut rng)).collect();
    let (mean, var, cov) = dirichlet_moments(d);
    for i in 0..=d {
        let m = draws.iter().map(|w| w[i]).sum::<f64>() / n as f64;
        ensure!((m - mean).abs() <= 4.0 * (var / n as f64).sqrt(), "d={d}: mean {m} vs {mean}");
        let v = draws.iter().map(|w| (w[i] - mean).powi(2)).sum::<f64>() / n as f64;
        ensure!((v - var).abs() <= 0.03 * var, "d={d}: variance {v} vs {var}");
    }
    let c = draws.iter().map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / n as f64;
    ensure!((c - cov).abs() <= 0.05 * cov.abs(), "d={d}: covariance {c} vs {cov}");
    for w in &draws {
        ensure!(w.iter().all(|&x| x > 0.0), "weight not strictly positive: {w:?}");
        ensure!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12, "weights do not sum to one: {w:?}");
    }
    Ok(())
}

/// Kolmogorov-Smirnov test at level 0.01 of the first weight against its
/// Beta(1, d) law.
pub fn check_sampler_ks(d: usize, n: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| sample_barycentric(d, &mut rng)[0]).collect();
    x.sort_by(f64::total_cmp);
    let cdf = |t: f64| 1.0 - (1.0 - t).powi(d as i32);
    let ks = x
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let f = cdf(t);
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    ensure!(ks <= 1.628 / (n as f64).sqrt(), "d={d}: KS statistic {ks}");
    Ok(())
}

/// Uniform barycentric weights from the spacings of sorted uniforms.
fn sorted_spacings(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut u: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
    u.sort_by(f64::total_cmp);
    let mut w = Vec::with_capacity(d + 1);
    let mut prev = 0.0;
    for &t in &u {
        w.push(t - prev);
        prev = t;
    }
    w.push(1.0 - prev);
    w
}

/// Chi-square homogeneity test at level 0.01 against the sorted-spacings
/// construction over the cells `floor(10 w_i)`, `i < d`.
pub fn check_sampler_chi_square(d: usize, n: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ref_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1_000_003));
    let cell = |w: &[f64]| -> usize { w[..d].iter().fold(0, |acc, &x| acc * 10 + ((x * 10.0) as usize).min(9)) };
    let cells = 10usize.pow(d as u32);
    let mut a = vec![0u64; cells];
    let mut b = vec![0u64; cells];
    for _ in 0..n {
        a[cell(&sample_barycentric(d, &mut rng))] += 1;
        b[cell(&sorted_spacings(d, &mut ref_rng))] += 1;
    }
    let (mut stat, mut used) = (0.0, 0usize);
    for k in 0..cells {
        let tot = (a[k] + b[k]) as f64;
        if tot < 10.0 {
            continue;
        }
        let e = tot / 2.0;
        stat += (a[k] as f64 - e).powi(2) / e + (b[k] as f64 - e).powi(2) / e;
        used += 1;
    }
    let critical = ChiSquared::new((used - 1) as f64).unwrap().inverse_cdf(0.99);
    ensure!(stat <= critical, "d={d}: chi-square {stat} above {critical} over {used} cells");
    Ok(())
}
