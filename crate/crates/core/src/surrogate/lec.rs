//! Local extremum conservation checks on a barycentric lattice.

use crate::geometry::from_barycentric;

/// How strictly local extrema of a fit are tied to the vertex values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LecMode {
    Off,
    Strict,
    Delta,
}

/// Absolute slack of the strict check, relative to the vertex magnitudes.
pub const STRICT_TOL: f64 = 1e-9;

/// Barycentric weights whose entries are multiples of `1/order` for a
/// `d`-simplex, vertices included.
pub fn barycentric_lattice(d: usize, order: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut counts = vec![0usize; d + 1];
    fill_lattice(&mut out, &mut counts, 0, order, order);
    out
}

fn fill_lattice(
    out: &mut Vec<Vec<f64>>,
    counts: &mut Vec<usize>,
    k: usize,
    remaining: usize,
    order: usize,
) {
    if k == counts.len() - 1 {
        counts[k] = remaining;
        out.push(counts.iter().map(|&c| c as f64 / order as f64).collect());
        return;
    }
    for c in 0..=remaining {
        counts[k] = c;
        fill_lattice(out, counts, k + 1, remaining - c, order);
    }
}

/// Checks the extrema of `g` over the simplex, sampled on the lattice of
/// order `2 degree + 2`, against the vertex values.
pub fn lec_check<G: Fn(&[f64]) -> f64>(
    g: G,
    degree: usize,
    vertices: &[&[f64]],
    vertex_values: &[f64],
    mode: LecMode,
) -> bool {
    if mode == LecMode::Off {
        return true;
    }
    let d = vertices.len() - 1;
    let f_min = vertex_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let f_max = vertex_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut g_min = f64::INFINITY;
    let mut g_max = f64::NEG_INFINITY;
    for w in barycentric_lattice(d, 2 * degree.max(1) + 2) {
        let v = g(&from_barycentric(vertices, &w));
        if !v.is_finite() {
            return false;
        }
        g_min = g_min.min(v);
        g_max = g_max.max(v);
    }
    let slack = match mode {
        LecMode::Off => unreachable!(),
        LecMode::Strict => STRICT_TOL * (1.0 + f_min.abs().max(f_max.abs())),
        LecMode::Delta => 0.5 * (f_max - f_min),
    };
    g_min + slack >= f_min && g_max - slack <= f_max
}
