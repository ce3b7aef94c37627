//! Where a refined simplex receives its new sample.

use rand::Rng;

use crate::geometry::{distance_squared, sample_in_simplex, SimplexId, Triangulation, COINCIDENT_TOL};

/// Rejection retries before a placement is abandoned.
pub const MAX_PLACEMENT_RETRIES: usize = 100;

/// Axis and side (0 or 1) of a cube face containing every given point.
fn shared_face(points: &[&[f64]]) -> Option<(usize, f64)> {
    let d = points[0].len();
    (0..d).find_map(|k| {
        [0.0, 1.0]
            .into_iter()
            .find(|&side| points.iter().all(|p| p[k] == side))
            .map(|side| (k, side))
    })
}

/// True if some facet of the simplex lies on the cube boundary, i.e. its
/// `d` vertices share a coordinate pinned to 0 or 1.
pub fn is_boundary_simplex(tri: &Triangulation, id: SimplexId) -> bool {
    !boundary_facets(tri, id).is_empty()
}

/// Local indices of the vertices opposite boundary facets.
fn boundary_facets(tri: &Triangulation, id: SimplexId) -> Vec<usize> {
    let pts = tri.simplex_points(id);
    (0..pts.len())
        .filter(|&skip| {
            let facet: Vec<&[f64]> = pts
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != skip)
                .map(|(_, p)| *p)
                .collect();
            shared_face(&facet).is_some()
        })
        .collect()
}

/// Longest edge of the simplex as global sample indices, lower index
/// first. Length ties go to the lexicographically smaller index pair.
pub fn longest_edge(tri: &Triangulation, id: SimplexId) -> (usize, usize) {
    let verts = tri.vertices(id);
    let mut best: Option<(f64, usize, usize)> = None;
    for a in 0..verts.len() {
        for b in (a + 1)..verts.len() {
            let (i, j) = (verts[a].min(verts[b]), verts[a].max(verts[b]));
            let len = distance_squared(tri.point(i), tri.point(j));
            let better = match best {
                None => true,
                Some((bl, bi, bj)) => len > bl || (len == bl && (i, j) < (bi, bj)),
            };
            if better {
                best = Some((len, i, j));
            }
        }
    }
    let (_, i, j) = best.expect("a simplex has at least one edge");
    (i, j)
}

/// `x0 + (1 + u)/3 (x1 - x0)`: the middle third of the edge.
pub fn middle_third(x0: &[f64], x1: &[f64], u: f64) -> Vec<f64> {
    let t = (1.0 + u) / 3.0;
    x0.iter().zip(x1).map(|(a, b)| a + t * (b - a)).collect()
}

/// Draws one candidate point for refining `id`: the middle third of the
/// longest edge for boundary simplices, a uniform point in the face-centroid
/// subsimplex otherwise.
pub fn propose_point<R: Rng + ?Sized>(tri: &Triangulation, id: SimplexId, rng: &mut R) -> Vec<f64> {
    if is_boundary_simplex(tri, id) {
        let (i, j) = longest_edge(tri, id);
        let u: f64 = rng.gen();
        return middle_third(tri.point(i), tri.point(j), u);
    }
    let sub = tri
        .subsimplex(id)
        .expect("live simplices are non-degenerate");
    let refs: Vec<&[f64]> = sub.iter().map(|p| p.as_slice()).collect();
    sample_in_simplex(&refs, rng).expect("subsimplex of a live simplex is non-degenerate")
}

/// Proposes a point at least `COINCIDENT_TOL` away from every sample and
/// every point in `pending`, or `None` after the retry budget.
pub fn place_new_point<R: Rng + ?Sized>(
    tri: &Triangulation,
    id: SimplexId,
    pending: &[Vec<f64>],
    rng: &mut R,
) -> Option<Vec<f64>> {
    let tol2 = COINCIDENT_TOL * COINCIDENT_TOL;
    for _ in 0..MAX_PLACEMENT_RETRIES {
        let x = propose_point(tri, id, rng);
        let clash_sample = tri
            .nearest_point(&x)
            .map_or(false, |(_, dist2)| dist2 < tol2);
        let clash_pending = pending.iter().any(|p| distance_squared(p, &x) < tol2);
        if !clash_sample && !clash_pending {
            return Some(x);
        }
    }
    None
}
