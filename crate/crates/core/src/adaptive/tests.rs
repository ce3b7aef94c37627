use super::*;
use crate::oracle::CountingOracle;
use crate::samples::RegionLabel;
use crate::testbed::{ConstantOracle, TestOracle};

fn config(p_max: usize, budget: usize) -> BuildConfig {
    BuildConfig {
        p_max,
        budget,
        seed: 3,
        ..BuildConfig::default()
    }
}

#[test]
fn initial_models_have_corners_and_center() {
    for (d, n, m) in [(2usize, 5usize, Some(4usize)), (3, 9, None), (4, 17, None)] {
        let model = SurrogateModel::initialize(&TestOracle::smooth(d), config(2, 100)).unwrap();
        assert_eq!(model.num_samples(), n);
        if let Some(m) = m {
            assert_eq!(model.triangulation().num_simplices(), m);
        }
        assert_eq!(model.log().len(), 1);
        assert!((model.triangulation().total_volume() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn center_bootstrap_error() {
    let model = SurrogateModel::initialize(&TestOracle::smooth(2), config(1, 100)).unwrap();
    // corners are zero, the center is one
    assert_eq!(model.hierarchical_errors(), &[0.0, 0.0, 0.0, 0.0, 1.0]);
    let policy_model = SurrogateModel::initialize(
        &TestOracle::smooth(2),
        BuildConfig {
            estimator: EstimatorPolicy::LastPoint,
            ..config(1, 100)
        },
    )
    .unwrap();
    // four triangles of volume 1/4 with h = 1
    assert!((policy_model.aggregate() - 1.0).abs() < 1e-15);
}

#[test]
fn minimal_budget_returns_the_initial_model() {
    let oracle = CountingOracle::new(TestOracle::smooth(3));
    let model = build(&oracle, config(2, 9)).unwrap();
    assert_eq!(model.num_samples(), 9);
    assert_eq!(model.log().len(), 1);
    assert_eq!(oracle.calls(), 9);
}

#[test]
fn single_step_adds_one_sample() {
    let oracle = TestOracle::clipped(2, 0.7);
    let model = SurrogateModel::initialize(&oracle, config(2, 100)).unwrap();
    let model = model.refine_step(&oracle).unwrap();
    assert_eq!(model.num_samples(), 6);
    assert_eq!(model.log().len(), 2);
    assert!((model.triangulation().total_volume() - 1.0).abs() < 1e-9);
}

#[test]
fn budget_is_respected_and_every_call_is_a_sample() {
    for m_ref in [BatchSize::Absolute(1), BatchSize::Absolute(7), BatchSize::Fraction(0.9)] {
        let oracle = CountingOracle::new(TestOracle::clipped(2, 0.7));
        let model = build(&oracle, BuildConfig { m_ref, ..config(3, 123) }).unwrap();
        assert_eq!(model.num_samples(), 123);
        assert_eq!(oracle.calls(), 123);
        let log = model.log();
        assert!(log.windows(2).all(|w| w[0].n_samples < w[1].n_samples));
    }
}

#[test]
fn invariants_hold_after_every_step() {
    let oracle = TestOracle::clipped(2, 0.7);
    let mut model = SurrogateModel::initialize(&oracle, config(3, 150)).unwrap();
    while !model.is_done() {
        model = model.refine_step(&oracle).unwrap();
        let tri = model.triangulation();
        assert!((tri.total_volume() - 1.0).abs() < 1e-9);
        let mut seen = vec![false; model.num_samples()];
        for id in tri.simplex_ids() {
            assert!(model.local(id).is_some());
            assert!(model.estimate(id) >= 0.0);
            for &v in tri.vertices(id) {
                seen[v] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        let recomputed = model.recompute_aggregate();
        assert!((recomputed - model.aggregate()).abs() <= 1e-12 * recomputed.abs().max(1e-300));
    }
}

#[test]
fn builds_are_deterministic() {
    let oracle = TestOracle::clipped(2, 0.7);
    let a = build(&oracle, config(3, 120)).unwrap();
    let b = build(&oracle, config(3, 120)).unwrap();
    assert_eq!(a.samples().values(), b.samples().values());
    for i in 0..a.num_samples() {
        assert_eq!(a.samples().point(i), b.samples().point(i));
    }
    let strip = |m: &SurrogateModel| -> Vec<(usize, usize, usize, u64)> {
        m.log()
            .iter()
            .map(|e| (e.step, e.n_samples, e.n_simplices, e.aggregate_estimate.to_bits()))
            .collect()
    };
    assert_eq!(strip(&a), strip(&b));
    let c = build(&oracle, BuildConfig { seed: 4, ..config(3, 120) }).unwrap();
    assert_ne!(a.samples().point(50), c.samples().point(50));
}

#[test]
fn model_interpolates_its_samples() {
    let oracle = TestOracle::smooth(2);
    let model = build(&oracle, config(3, 80)).unwrap();
    for i in 0..model.num_samples() {
        let f = model.samples().value(i);
        let g = model.evaluate(model.samples().point(i)).unwrap();
        assert!((g - f).abs() <= 1e-8 * (1.0 + f.abs()), "sample {i}");
    }
}

#[test]
fn batch_evaluation_matches_pointwise() {
    let oracle = TestOracle::clipped(2, 0.7);
    let model = build(&oracle, config(3, 100)).unwrap();
    let pts: Vec<f64> = (0..500)
        .flat_map(|i| [(i as f64 * 0.6180339887).fract(), (i as f64 * 0.7548776662).fract()])
        .collect();
    let many = model.evaluate_many(&pts).unwrap();
    for i in 0..500 {
        assert_eq!(many[i], model.evaluate(&pts[2 * i..2 * i + 2]).unwrap());
    }
    assert!(matches!(model.evaluate(&[1.5, 0.2]), Err(GeometryError::OutsideDomain)));
}

#[test]
fn constant_oracle_converges_immediately() {
    let oracle = ConstantOracle { dim: 2, value: 2.5 };
    let model = build(&oracle, BuildConfig { tolerance: 1e-12, ..config(3, 100) }).unwrap();
    assert_eq!(model.num_samples(), 5);
    assert_eq!(model.evaluate(&[0.3, 0.9]).unwrap(), 2.5);
}

#[test]
fn volume_order_ignores_tolerance() {
    let oracle = TestOracle::smooth(2);
    let model = build(
        &oracle,
        BuildConfig {
            estimator: EstimatorPolicy::VolumeOrder,
            tolerance: 1e3,
            ..config(1, 40)
        },
    )
    .unwrap();
    assert_eq!(model.num_samples(), 40);
}

struct Quadrants;

impl Oracle for Quadrants {
    fn dimension(&self) -> usize {
        2
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation, OracleError> {
        let label = (x[0] > 0.37) as u64 + 2 * (x[1] > 0.61) as u64;
        Ok(Evaluation {
            value: x[0] + x[1],
            label: RegionLabel(label),
        })
    }
}

#[test]
fn multi_region_simplices_are_refined_first() {
    let model = SurrogateModel::initialize(&Quadrants, config(2, 200)).unwrap();
    let pending = model.pending_refinement();
    assert!(!pending.is_empty());
    let model = model.refine_step(&Quadrants).unwrap();
    // the single new point lies in a formerly pending simplex
    let x = model.samples().point(5).to_vec();
    let tri = Triangulation::unit_cube(2);
    assert!(pending.iter().any(|&id| tri.contains(id, &x)));
}

#[test]
fn invalid_configs_are_rejected() {
    let oracle = TestOracle::smooth(2);
    for bad in [
        BuildConfig { p_max: 0, ..config(2, 100) },
        BuildConfig { budget: 4, ..config(2, 100) },
        BuildConfig { m_ref: BatchSize::Absolute(0), ..config(2, 100) },
        BuildConfig { m_ref: BatchSize::Fraction(-0.5), ..config(2, 100) },
        BuildConfig { tolerance: f64::NAN, ..config(2, 100) },
    ] {
        assert!(matches!(
            SurrogateModel::initialize(&oracle, bad),
            Err(BuildError::InvalidConfig(_))
        ));
    }
}

#[test]
fn rebuild_from_samples_reproduces_the_model() {
    let oracle = TestOracle::clipped(2, 0.7);
    let model = build(&oracle, config(3, 90)).unwrap();
    let copy = SurrogateModel::from_samples(
        model.config().clone(),
        model.samples().clone(),
        model.hierarchical_errors().to_vec(),
    )
    .unwrap();
    assert_eq!(copy.triangulation().num_simplices(), model.triangulation().num_simplices());
    for k in 0..200 {
        let x = [(k as f64 * 0.131).fract(), (k as f64 * 0.377).fract()];
        assert_eq!(copy.evaluate(&x).unwrap(), model.evaluate(&x).unwrap());
    }
}
