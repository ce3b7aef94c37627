use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::geometry::Triangulation;

fn build<F: Fn(&[f64]) -> (f64, u64)>(
    mut tri: Triangulation,
    extra: &[Vec<f64>],
    f: F,
) -> (Triangulation, SampleSet) {
    let mut s = SampleSet::new(tri.dim());
    for i in 0..tri.num_points() {
        let p = tri.point(i).to_vec();
        let (v, l) = f(&p);
        s.push(&p, v, RegionLabel(l));
    }
    for p in extra {
        tri.insert(p).unwrap();
        let (v, l) = f(p);
        s.push(p, v, RegionLabel(l));
    }
    (tri, s)
}

fn random_points(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(0.02..0.98)).collect())
        .collect()
}

fn cfg(p_max: usize, mode: Mode, lec: LecMode) -> SurrogateConfig {
    SurrogateConfig { p_max, mode, lec }
}

fn clipped(x: &[f64]) -> (f64, u64) {
    let s: f64 = x.iter().map(|&t| (std::f64::consts::PI * t).sin()).product();
    if s < 0.7 {
        (s, 1)
    } else {
        (0.7, 2)
    }
}

#[test]
fn kink_in_one_dimension_is_reproduced() {
    let f = |x: &[f64]| {
        if x[0] < 0.7 {
            (x[0], 1)
        } else {
            (0.7, 2)
        }
    };
    let (tri, s) = build(
        Triangulation::unit_cube_corners(1),
        &[vec![0.6], vec![0.8]],
        f,
    );
    let id = tri.locate_canonical(&[0.7], None).unwrap();
    assert!((tri.volume(id) - 0.2).abs() < 1e-12);
    for p_max in 1..=3 {
        let g = build_local_surrogate(&tri, &s, id, &cfg(p_max, Mode::Improved, LecMode::Off))
            .unwrap();
        match &g.kind {
            SurrogateKind::TwoSided { combine, .. } => assert_eq!(*combine, Combine::Min),
            other => panic!("expected a two-sided surrogate, got {other:?}"),
        }
        assert!(!g.combine_mismatch);
        for k in 0..=20 {
            let x = 0.6 + 0.2 * k as f64 / 20.0;
            assert!((g.eval(&[x]) - x.min(0.7)).abs() < 1e-12, "x={x}");
        }
    }
}

#[test]
fn single_region_matches_unrestricted_fit() {
    let pts = random_points(2, 30, 11);
    let f = |x: &[f64]| ((3.0 * x[0]).sin() + x[1] * x[1], 1);
    let (tri, s) = build(Triangulation::unit_cube(2), &pts, f);
    for id in tri.simplex_ids() {
        let a = build_local_surrogate(&tri, &s, id, &cfg(3, Mode::Improved, LecMode::Off)).unwrap();
        let b = build_local_surrogate(&tri, &s, id, &cfg(3, Mode::Original, LecMode::Off)).unwrap();
        let c = tri.centroid(id);
        assert_eq!(a.eval(c), b.eval(c));
        assert_eq!(a.stencils[0].point_ids, b.stencils[0].point_ids);
    }
}

#[test]
fn fits_interpolate_their_stencils() {
    let pts = random_points(2, 60, 5);
    let (tri, s) = build(Triangulation::unit_cube(2), &pts, clipped);
    for mode in [Mode::Original, Mode::Improved] {
        for id in tri.simplex_ids() {
            let g = match build_local_surrogate(&tri, &s, id, &cfg(4, mode, LecMode::Off)) {
                Ok(g) => g,
                Err(SurrogateError::MoreThanTwoRegions(_)) => continue,
                Err(e) => panic!("{e}"),
            };
            for (k, st) in g.stencils.iter().enumerate() {
                for &i in &st.point_ids {
                    let f = s.value(i);
                    let got = match &g.kind {
                        SurrogateKind::OneSided { poly } => poly.eval(s.point(i)),
                        SurrogateKind::TwoSided {
                            poly_low, poly_high, ..
                        } => [poly_low, poly_high][k].eval(s.point(i)),
                    };
                    assert!((got - f).abs() <= 1e-8 * (1.0 + f.abs()));
                }
            }
            if !g.combine_mismatch && g.fallback.is_none() {
                for st in &g.stencils {
                    for &i in &st.point_ids {
                        let f = s.value(i);
                        assert!((g.eval(s.point(i)) - f).abs() <= COMBINE_TOL * (1.0 + f.abs()));
                    }
                }
            }
        }
    }
}

/// Lebesgue constant of the full-degree unrestricted stencil over the simplex.
fn full_degree_lebesgue(tri: &Triangulation, s: &SampleSet, id: SimplexId, p: usize) -> f64 {
    let d = tri.dim();
    let st = plan_stencil(tri, s, id, p, None).unwrap().stencil(d, p).unwrap();
    let pts: Vec<&[f64]> = st.point_ids.iter().map(|&i| s.point(i)).collect();
    let frame = Frame::fitted(&tri.centroid(id), &pts);
    let verts = tri.simplex_points(id);
    let probe: Vec<Vec<f64>> = lec::barycentric_lattice(d, 2 * p + 2)
        .iter()
        .map(|w| crate::geometry::from_barycentric(&verts, w))
        .collect();
    lebesgue_constant(&frame, p, &pts, &probe)
}

#[test]
fn polynomials_are_reproduced() {
    for (d, p, seed) in [(2usize, 2usize, 1u64), (2, 3, 2), (3, 2, 3)] {
        let basis = monomial_basis(d, p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<f64> = basis.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        let poly = Polynomial::new(Frame::identity(d), p, coeffs);
        let pts = random_points(d, 40, seed + 10);
        let (tri, s) = build(Triangulation::unit_cube(d), &pts, |x| (poly.eval(x), 1));
        let mut rejected = 0;
        for id in tri.simplex_ids() {
            let g = build_local_surrogate(&tri, &s, id, &cfg(p, Mode::Improved, LecMode::Off))
                .unwrap();
            if g.degrees[0] < p {
                // only a poorly poised full-degree stencil may lower the degree
                assert!(full_degree_lebesgue(&tri, &s, id, p) > LEBESGUE_LIMIT);
                rejected += 1;
                continue;
            }
            let mut probe = ChaCha8Rng::seed_from_u64(seed + id.index() as u64);
            for _ in 0..10 {
                let x = tri.sample_in(id, &mut probe);
                assert!((g.eval(&x) - poly.eval(&x)).abs() < 1e-7, "d={d} p={p}");
            }
        }
        assert!(rejected * 20 <= tri.num_simplices(), "d={d} p={p}: {rejected} rejected");
    }
}

#[test]
fn poorly_poised_stencil_lowers_the_degree() {
    // six nodes on the unit circle: every conic through them is x^2 + y^2 - 1,
    // so the quadratic interpolation problem is singular; a small radial
    // perturbation makes it solvable but wildly amplifying
    let mut coords = Vec::new();
    for k in 0..6 {
        let t = k as f64 * std::f64::consts::PI / 3.0 + 0.1;
        let r = if k == 0 { 1.0 + 1e-4 } else { 1.0 };
        coords.push(vec![0.5 + 0.4 * r * t.cos(), 0.5 + 0.4 * r * t.sin()]);
    }
    let pts: Vec<&[f64]> = coords.iter().map(|c| c.as_slice()).collect();
    let frame = Frame::fitted(&[0.5, 0.5], &pts);
    let probe = vec![vec![0.5, 0.5]];
    let lam = lebesgue_constant(&frame, 2, &pts, &probe);
    assert!(lam > 1e3, "lambda {lam}");
    // a well spread stencil: vertices and edge midpoints of a triangle
    let good = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]];
    let pts: Vec<&[f64]> = good.iter().map(|c| c.as_slice()).collect();
    let frame = Frame::fitted(&[1.0 / 3.0, 1.0 / 3.0], &pts);
    let probe: Vec<Vec<f64>> = lec::barycentric_lattice(2, 6)
        .iter()
        .map(|w| crate::geometry::from_barycentric(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]], w))
        .collect();
    // quadratic Lagrange interpolation on the P2 nodes has constant 5/3
    let lam = lebesgue_constant(&frame, 2, &pts, &probe);
    assert!((lam - 5.0 / 3.0).abs() < 1e-9, "lambda {lam}");
}

#[test]
fn negation_flips_the_combiner() {
    let pts = random_points(2, 80, 9);
    let (tri, s) = build(Triangulation::unit_cube(2), &pts, clipped);
    let (_, neg) = build(Triangulation::unit_cube(2), &pts, |x| {
        let (v, l) = clipped(x);
        (-v, l)
    });
    let mut two_sided = 0;
    for id in tri.simplex_ids() {
        let a = build_local_surrogate(&tri, &s, id, &cfg(2, Mode::Improved, LecMode::Off));
        let b = build_local_surrogate(&tri, &neg, id, &cfg(2, Mode::Improved, LecMode::Off));
        let (a, b) = match (a, b) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(ea), Err(eb)) => {
                assert_eq!(ea, eb);
                continue;
            }
            other => panic!("inconsistent outcomes: {other:?}"),
        };
        if let (
            SurrogateKind::TwoSided { combine: ca, .. },
            SurrogateKind::TwoSided { combine: cb, .. },
        ) = (&a.kind, &b.kind)
        {
            if !a.combine_mismatch {
                assert_ne!(ca, cb);
            }
            two_sided += 1;
        }
        let c = tri.centroid(id);
        assert!((a.eval(c) + b.eval(c)).abs() < 1e-9);
    }
    assert!(two_sided > 0);
}

#[test]
fn three_labels_are_rejected() {
    let (tri, s) = build(Triangulation::unit_cube(2), &[], |x| {
        let l = if x == [0.0, 0.0] {
            1
        } else if x == [1.0, 0.0] {
            2
        } else {
            3
        };
        (x[0], l)
    });
    let id = tri.locate_canonical(&[0.5, 0.1], None).unwrap();
    assert_eq!(
        build_local_surrogate(&tri, &s, id, &cfg(2, Mode::Improved, LecMode::Off)).unwrap_err(),
        SurrogateError::MoreThanTwoRegions(3)
    );
    let g = linear_fallback(&tri, &s, id, Fallback::MoreThanTwoRegions).unwrap();
    assert!((g.eval(&[0.5, 0.1]) - 0.5).abs() < 1e-12);
    // original mode ignores labels
    assert!(build_local_surrogate(&tri, &s, id, &cfg(2, Mode::Original, LecMode::Off)).is_ok());
}

#[test]
fn strict_lec_lowers_the_degree_on_a_kink() {
    let pts = random_points(2, 80, 21);
    let (tri, s) = build(Triangulation::unit_cube(2), &pts, clipped);
    let mut reduced = 0;
    for id in tri.simplex_ids() {
        let g = build_local_surrogate(&tri, &s, id, &cfg(4, Mode::Original, LecMode::Strict)).unwrap();
        if g.lec_reduced {
            reduced += 1;
            assert!(g.degree() < 4);
        }
        let vals: Vec<f64> = tri.vertices(id).iter().map(|&i| s.value(i)).collect();
        assert!(lec_check(
            |x| g.eval(x),
            g.degree(),
            &tri.simplex_points(id),
            &vals,
            LecMode::Strict
        ));
    }
    assert!(reduced > 0);
}

#[test]
fn effective_lec_rules() {
    assert_eq!(effective_lec(Mode::Original, LecMode::Strict, 2), LecMode::Strict);
    assert_eq!(effective_lec(Mode::Improved, LecMode::Strict, 2), LecMode::Off);
    assert_eq!(effective_lec(Mode::Improved, LecMode::Delta, 3), LecMode::Off);
    assert_eq!(effective_lec(Mode::Improved, LecMode::Delta, 4), LecMode::Delta);
    assert_eq!(effective_lec(Mode::Original, LecMode::Delta, 4), LecMode::Delta);
    assert_eq!(effective_lec(Mode::Original, LecMode::Off, 5), LecMode::Off);
}

#[test]
fn admission_radius_predicts_stencil_changes() {
    let pts = random_points(2, 40, 31);
    let f = |x: &[f64]| (x[0] * x[1], 1);
    let (tri, s) = build(Triangulation::unit_cube(2), &pts, f);
    let config = cfg(3, Mode::Improved, LecMode::Off);
    let before: Vec<_> = tri
        .simplex_ids()
        .map(|id| (id, build_local_surrogate(&tri, &s, id, &config).unwrap()))
        .collect();
    let mut tri2 = tri.clone();
    let mut s2 = s.clone();
    let q = vec![0.41, 0.57];
    let out = tri2.insert(&q).unwrap();
    s2.push(&q, f(&q).0, RegionLabel(1));
    for (id, old) in before {
        if out.removed.contains(&id) {
            continue;
        }
        let new = build_local_surrogate(&tri2, &s2, id, &config).unwrap();
        let admitted = old.admits(tri.centroid(id), &q, RegionLabel(1));
        assert_eq!(admitted, new.plans != old.plans, "simplex {id:?}");
    }
}
