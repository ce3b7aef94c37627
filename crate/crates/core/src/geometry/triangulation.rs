//! Incremental Delaunay triangulation of point sets in the unit cube.
//!
//! Points are inserted one at a time with the Bowyer–Watson scheme: walk to
//! the simplex containing the new point, grow the conflict cavity through
//! facet neighbors using the in-sphere predicate, and cone the cavity
//! boundary to the new vertex.
//!
//! The cube corners are always the first vertices, so the convex hull is the
//! whole domain and no point is ever inserted outside the current hull.
//! Points may land exactly on the cube boundary; cavity facets lying on the
//! hull and coplanar with the new point are dropped instead of being coned.
//!
//! Ties in the in-sphere test resolve as "no conflict". This is the
//! symbolic perturbation in which later points are lifted further off the
//! paraboloid, so every near-cospherical configuration is decided by vertex
//! insertion order.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;

use super::{
    distance_squared, edge_matrix, factorial, from_barycentric, sample_barycentric,
    subsimplex, GeometryError, COINCIDENT_TOL,
};
use crate::linalg;

/// Relative tolerance of the in-sphere determinant, scaled by the Hadamard
/// bound of the lifted matrix.
const INSPHERE_TOL: f64 = 1e-10;
/// Relative tolerance below which a coned simplex counts as flat.
const ORIENT_TOL: f64 = 1e-12;
/// Barycentric slack accepted by point location.
const LOCATE_TOL: f64 = 1e-12;

/// Stable identifier of a simplex. Identifiers are never reused, so a dead
/// simplex keeps its id and newer simplices always compare greater.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SimplexId(pub usize);

impl SimplexId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
struct Cell {
    vertices: Vec<usize>,
    /// `neighbors[i]` shares the facet opposite `vertices[i]`.
    neighbors: Vec<Option<SimplexId>>,
    volume: f64,
    centroid: Vec<f64>,
    /// Inverse of the edge matrix, for barycentric coordinates.
    inv_edges: Vec<f64>,
    alive: bool,
}

/// Result of a successful insertion.
#[derive(Debug, Clone)]
pub struct InsertOutcome {
    pub vertex: usize,
    pub removed: Vec<SimplexId>,
    pub created: Vec<SimplexId>,
}

#[derive(Debug)]
pub struct Triangulation {
    dim: usize,
    coords: Vec<f64>,
    cells: Vec<Cell>,
    alive: usize,
    generation: u64,
    insphere_sign: f64,
    hint: AtomicUsize,
}

impl Clone for Triangulation {
    fn clone(&self) -> Self {
        Self {
            dim: self.dim,
            coords: self.coords.clone(),
            cells: self.cells.clone(),
            alive: self.alive,
            generation: self.generation,
            insphere_sign: self.insphere_sign,
            hint: AtomicUsize::new(self.hint.load(Ordering::Relaxed)),
        }
    }
}

/// Corner `i` of the unit cube has coordinate `k` equal to bit `k` of `i`.
pub fn cube_corner(d: usize, i: usize) -> Vec<f64> {
    (0..d).map(|k| ((i >> k) & 1) as f64).collect()
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; d], &mut out);
    out
}

fn facet_key(vertices: &[usize], skip: usize) -> Vec<usize> {
    let mut key: Vec<usize> = vertices
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != skip)
        .map(|(_, &v)| v)
        .collect();
    key.sort_unstable();
    key
}

impl Triangulation {
    /// Kuhn triangulation of the `2^d` cube corners (`d!` simplices).
    pub fn unit_cube_corners(d: usize) -> Self {
        assert!((1..=6).contains(&d), "dimension must be between 1 and 6");
        let n = 1usize << d;
        let mut coords = Vec::with_capacity(n * d);
        for i in 0..n {
            coords.extend(cube_corner(d, i));
        }
        let mut tri = Self {
            dim: d,
            coords,
            cells: Vec::new(),
            alive: 0,
            generation: 0,
            insphere_sign: 1.0,
            hint: AtomicUsize::new(0),
        };
        tri.insphere_sign = tri.reference_insphere_sign();

        let mut cells = Vec::new();
        for perm in permutations(d) {
            let mut verts = Vec::with_capacity(d + 1);
            let mut corner = 0usize;
            verts.push(corner);
            for &axis in &perm {
                corner |= 1 << axis;
                verts.push(corner);
            }
            let mut cell = tri.make_cell(verts);
            if tri.signed_det(&cell.vertices) < 0.0 {
                cell.vertices.swap(0, 1);
                cell = tri.make_cell(cell.vertices);
            }
            cells.push(cell);
        }
        let mut facets: HashMap<Vec<usize>, (usize, usize)> = HashMap::new();
        for c in 0..cells.len() {
            for i in 0..=d {
                let key = facet_key(&cells[c].vertices, i);
                if let Some((oc, oi)) = facets.remove(&key) {
                    cells[c].neighbors[i] = Some(SimplexId(oc));
                    cells[oc].neighbors[oi] = Some(SimplexId(c));
                } else {
                    facets.insert(key, (c, i));
                }
            }
        }
        tri.alive = cells.len();
        tri.cells = cells;
        tri
    }

    /// Delaunay triangulation of the cube corners plus the cube center.
    pub fn unit_cube(d: usize) -> Self {
        let mut tri = Self::unit_cube_corners(d);
        let center = vec![0.5; d];
        tri.insert(&center)
            .expect("cube center insertion cannot fail");
        tri
    }

    fn reference_insphere_sign(&self) -> f64 {
        let d = self.dim;
        let mut verts = vec![vec![0.0; d]];
        for k in 0..d {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            verts.push(e);
        }
        let refs: Vec<&[f64]> = verts.iter().map(|v| v.as_slice()).collect();
        let inside = vec![1.0 / (d as f64 + 1.0); d];
        let (det, _) = insphere_det(&refs, &inside);
        det.signum()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_points(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn num_simplices(&self) -> usize {
        self.alive
    }

    /// Number of simplex ids ever allocated, dead or alive.
    pub fn id_bound(&self) -> usize {
        self.cells.len()
    }

    /// Incremented on every successful insertion.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn is_alive(&self, id: SimplexId) -> bool {
        self.cells.get(id.0).is_some_and(|c| c.alive)
    }

    /// Alive simplices in increasing id order.
    pub fn simplex_ids(&self) -> impl Iterator<Item = SimplexId> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.alive)
            .map(|(i, _)| SimplexId(i))
    }

    pub fn vertices(&self, id: SimplexId) -> &[usize] {
        &self.cells[id.0].vertices
    }

    pub fn neighbors(&self, id: SimplexId) -> &[Option<SimplexId>] {
        &self.cells[id.0].neighbors
    }

    pub fn volume(&self, id: SimplexId) -> f64 {
        self.cells[id.0].volume
    }

    pub fn centroid(&self, id: SimplexId) -> &[f64] {
        &self.cells[id.0].centroid
    }

    pub fn simplex_points(&self, id: SimplexId) -> Vec<&[f64]> {
        self.cells[id.0]
            .vertices
            .iter()
            .map(|&v| self.point(v))
            .collect()
    }

    pub fn total_volume(&self) -> f64 {
        self.simplex_ids().map(|id| self.volume(id)).sum()
    }

    pub fn barycentric(&self, id: SimplexId, p: &[f64]) -> Vec<f64> {
        let cell = &self.cells[id.0];
        let d = self.dim;
        let origin = self.point(cell.vertices[0]);
        let rel: Vec<f64> = (0..d).map(|r| p[r] - origin[r]).collect();
        let tail = linalg::mat_vec(&cell.inv_edges, d, d, &rel);
        let mut out = Vec::with_capacity(d + 1);
        out.push(1.0 - tail.iter().sum::<f64>());
        out.extend(tail);
        out
    }

    pub fn contains(&self, id: SimplexId, p: &[f64]) -> bool {
        self.barycentric(id, p).iter().all(|&l| l >= -LOCATE_TOL)
    }

    /// The face-centroid subsimplex of a simplex.
    pub fn subsimplex(&self, id: SimplexId) -> Result<Vec<Vec<f64>>, GeometryError> {
        subsimplex(&self.simplex_points(id))
    }

    /// Uniform random point strictly inside the simplex.
    pub fn sample_in<R: Rng + ?Sized>(&self, id: SimplexId, rng: &mut R) -> Vec<f64> {
        let w = sample_barycentric(self.dim, rng);
        from_barycentric(&self.simplex_points(id), &w)
    }

    fn signed_det(&self, vertices: &[usize]) -> f64 {
        let pts: Vec<&[f64]> = vertices.iter().map(|&v| self.point(v)).collect();
        linalg::determinant(&edge_matrix(&pts), self.dim)
    }

    fn make_cell(&self, vertices: Vec<usize>) -> Cell {
        let d = self.dim;
        let pts: Vec<&[f64]> = vertices.iter().map(|&v| self.point(v)).collect();
        let edges = edge_matrix(&pts);
        let det = linalg::determinant(&edges, d);
        let inv_edges = linalg::inverse(&edges, d).unwrap_or_else(|| vec![0.0; d * d]);
        let centroid = super::centroid(&pts);
        Cell {
            neighbors: vec![None; d + 1],
            vertices,
            volume: det.abs() / factorial(d),
            centroid,
            inv_edges,
            alive: true,
        }
    }

    fn first_alive(&self) -> Option<SimplexId> {
        self.cells.iter().position(|c| c.alive).map(SimplexId)
    }

    /// Locates a simplex containing `p` using the shared walk hint.
    pub fn locate(&self, p: &[f64]) -> Result<SimplexId, GeometryError> {
        let hint = SimplexId(self.hint.load(Ordering::Relaxed));
        let found = self.locate_from(p, Some(hint))?;
        self.hint.store(found.0, Ordering::Relaxed);
        Ok(found)
    }

    /// Visibility walk from `start` toward `p`, falling back to a linear
    /// scan if the walk leaves the hull or fails to terminate.
    pub fn locate_from(
        &self,
        p: &[f64],
        start: Option<SimplexId>,
    ) -> Result<SimplexId, GeometryError> {
        if p.len() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got: p.len(),
            });
        }
        let mut current = match start {
            Some(s) if self.is_alive(s) => s,
            _ => self.first_alive().ok_or(GeometryError::PointLocationFailure)?,
        };
        let max_steps = self.alive + 16;
        for _ in 0..max_steps {
            let bary = self.barycentric(current, p);
            let (imin, lmin) = bary
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, l)| if l < acc.1 { (i, l) } else { acc });
            if lmin >= -LOCATE_TOL {
                return Ok(current);
            }
            match self.cells[current.0].neighbors[imin] {
                Some(next) => current = next,
                None => break,
            }
        }
        self.simplex_ids()
            .find(|&id| self.contains(id, p))
            .ok_or(GeometryError::PointLocationFailure)
    }

    /// Locates `p` and breaks ties on shared facets, ridges and vertices by
    /// returning the smallest id among all simplices containing `p`.
    pub fn locate_canonical(
        &self,
        p: &[f64],
        start: Option<SimplexId>,
    ) -> Result<SimplexId, GeometryError> {
        let found = self.locate_from(p, start)?;
        let bary = self.barycentric(found, p);
        if bary.iter().all(|&l| l > LOCATE_TOL) {
            return Ok(found);
        }
        let mut best = found;
        let mut seen = HashSet::from([found]);
        let mut queue = VecDeque::from([found]);
        while let Some(id) = queue.pop_front() {
            let bary = self.barycentric(id, p);
            for (i, &l) in bary.iter().enumerate() {
                if l > LOCATE_TOL {
                    continue;
                }
                if let Some(nb) = self.cells[id.0].neighbors[i] {
                    if seen.insert(nb) && self.contains(nb, p) {
                        best = best.min(nb);
                        queue.push_back(nb);
                    }
                }
            }
        }
        Ok(best)
    }

    fn in_conflict(&self, id: SimplexId, p: &[f64]) -> bool {
        let pts = self.simplex_points(id);
        let (det, scale) = insphere_det(&pts, p);
        self.insphere_sign * det > INSPHERE_TOL * scale
    }

    /// True if `p` lies strictly inside the circumsphere of the simplex,
    /// using the same tolerance as insertion.
    pub fn circumsphere_contains(&self, id: SimplexId, p: &[f64]) -> bool {
        self.in_conflict(id, p)
    }

    /// Index and distance of the sample nearest to `p`.
    pub fn nearest_point(&self, p: &[f64]) -> Option<(usize, f64)> {
        (0..self.num_points())
            .map(|i| (i, distance_squared(self.point(i), p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, d2)| (i, d2.sqrt()))
    }

    /// Inserts `p` and restores the Delaunay property. On error the
    /// triangulation is left unchanged.
    pub fn insert(&mut self, p: &[f64]) -> Result<InsertOutcome, GeometryError> {
        let d = self.dim;
        if p.len() != d {
            return Err(GeometryError::DimensionMismatch {
                expected: d,
                got: p.len(),
            });
        }
        if p.iter().any(|&x| !x.is_finite() || !(0.0..=1.0).contains(&x)) {
            return Err(GeometryError::OutsideDomain);
        }
        if let Some((existing, distance)) = self.nearest_point(p) {
            if distance <= COINCIDENT_TOL {
                return Err(GeometryError::DegeneratePoint { existing, distance });
            }
        }
        let start = self.locate(p)?;

        // Conflict region by breadth-first search from the containing cell.
        let mut cavity: HashSet<SimplexId> = HashSet::from([start]);
        let mut queue = VecDeque::from([start]);
        let mut tested: HashSet<SimplexId> = HashSet::from([start]);
        while let Some(id) = queue.pop_front() {
            for nb in self.cells[id.0].neighbors.iter().flatten() {
                if tested.insert(*nb) && self.in_conflict(*nb, p) {
                    cavity.insert(*nb);
                    queue.push_back(*nb);
                }
            }
        }

        // Grow the cavity until it is star-shaped with respect to p.
        let (boundary, skipped_hull) = loop {
            let mut grow = Vec::new();
            let mut boundary = Vec::new();
            let mut skipped = Vec::new();
            let mut ordered: Vec<SimplexId> = cavity.iter().copied().collect();
            ordered.sort_unstable();
            for &id in &ordered {
                let cell = &self.cells[id.0];
                for i in 0..=d {
                    let nb = cell.neighbors[i];
                    if nb.is_some_and(|n| cavity.contains(&n)) {
                        continue;
                    }
                    let (det, scale) = self.coned_orientation(&cell.vertices, i, p);
                    let flat = det <= ORIENT_TOL * scale;
                    match (nb, flat) {
                        (_, false) => boundary.push((id, i, nb)),
                        (Some(n), true) => grow.push(n),
                        (None, true) => {
                            if det < -ORIENT_TOL * scale {
                                return Err(GeometryError::PredicateFailure(
                                    "point lies beyond a hull facet".into(),
                                ));
                            }
                            skipped.push((id, i));
                        }
                    }
                }
            }
            if grow.is_empty() {
                break (boundary, skipped);
            }
            for n in grow {
                cavity.insert(n);
            }
        };

        let new_vertex = self.num_points();
        // Vertices of the cavity must survive as vertices of new simplices.
        let old_vertices: HashSet<usize> = cavity
            .iter()
            .flat_map(|id| self.cells[id.0].vertices.iter().copied())
            .collect();
        let mut new_vertices: HashSet<usize> = HashSet::new();
        for &(id, i, _) in &boundary {
            for (k, &v) in self.cells[id.0].vertices.iter().enumerate() {
                if k != i {
                    new_vertices.insert(v);
                }
            }
        }
        if !old_vertices.is_subset(&new_vertices) {
            return Err(GeometryError::PredicateFailure(
                "cavity swallowed an existing vertex".into(),
            ));
        }

        // Build the new cells against a scratch copy of the coordinates.
        self.coords.extend_from_slice(p);
        let base = self.cells.len();
        let mut new_cells: Vec<Cell> = Vec::with_capacity(boundary.len());
        let mut outer_links: Vec<(SimplexId, SimplexId, usize)> = Vec::new();
        for (k, &(id, i, nb)) in boundary.iter().enumerate() {
            let mut verts = self.cells[id.0].vertices.clone();
            verts[i] = new_vertex;
            let mut cell = self.make_cell(verts);
            cell.neighbors[i] = nb;
            if let Some(n) = nb {
                outer_links.push((n, id, base + k));
            }
            new_cells.push(cell);
        }
        let mut open: HashMap<Vec<usize>, (usize, usize)> = HashMap::new();
        for c in 0..new_cells.len() {
            for i in 0..=d {
                if new_cells[c].vertices[i] == new_vertex {
                    continue;
                }
                let key = facet_key(&new_cells[c].vertices, i);
                if let Some((oc, oi)) = open.remove(&key) {
                    new_cells[c].neighbors[i] = Some(SimplexId(base + oc));
                    new_cells[oc].neighbors[oi] = Some(SimplexId(base + c));
                } else {
                    open.insert(key, (c, i));
                }
            }
        }
        let mut hull_ridges: HashSet<Vec<usize>> = HashSet::new();
        for &(id, i) in &skipped_hull {
            let facet = facet_key(&self.cells[id.0].vertices, i);
            for skip in 0..facet.len() {
                hull_ridges.insert(facet_key(&facet, skip));
            }
        }
        let unmatched_ok = open.keys().all(|key| {
            let ridge: Vec<usize> = key.iter().copied().filter(|&v| v != new_vertex).collect();
            hull_ridges.contains(&ridge)
        });
        let removed_volume: f64 = cavity.iter().map(|id| self.cells[id.0].volume).sum();
        let created_volume: f64 = new_cells.iter().map(|c| c.volume).sum();
        let volume_ok =
            (removed_volume - created_volume).abs() <= 1e-9 * removed_volume.max(1e-300);
        if !unmatched_ok || !volume_ok {
            self.coords.truncate(self.coords.len() - d);
            return Err(GeometryError::PredicateFailure(format!(
                "cavity retriangulation inconsistent (volume {removed_volume:e} -> {created_volume:e})"
            )));
        }

        // Commit.
        let mut removed: Vec<SimplexId> = cavity.into_iter().collect();
        removed.sort_unstable();
        for id in &removed {
            self.cells[id.0].alive = false;
        }
        let created: Vec<SimplexId> = (base..base + new_cells.len()).map(SimplexId).collect();
        self.cells.extend(new_cells);
        for (outer, old, new) in outer_links {
            let slot = self.cells[outer.0]
                .neighbors
                .iter()
                .position(|&n| n == Some(old))
                .expect("outer neighbor must point back into the cavity");
            self.cells[outer.0].neighbors[slot] = Some(SimplexId(new));
        }
        self.alive = self.alive + created.len() - removed.len();
        self.generation += 1;
        self.hint.store(created[0].0, Ordering::Relaxed);
        Ok(InsertOutcome {
            vertex: new_vertex,
            removed,
            created,
        })
    }

    /// Orientation determinant of the simplex obtained by replacing vertex
    /// `skip` with `p`, together with its magnitude scale.
    fn coned_orientation(&self, vertices: &[usize], skip: usize, p: &[f64]) -> (f64, f64) {
        let pts: Vec<&[f64]> = vertices
            .iter()
            .enumerate()
            .map(|(k, &v)| if k == skip { p } else { self.point(v) })
            .collect();
        let edges = edge_matrix(&pts);
        let det = linalg::determinant(&edges, self.dim);
        let d = self.dim;
        let scale: f64 = (0..d)
            .map(|c| (0..d).map(|r| edges[r * d + c].powi(2)).sum::<f64>().sqrt())
            .product();
        (det, scale)
    }
}

/// Lifted in-sphere determinant of `p` against the simplex and the
/// Hadamard bound of its rows.
fn insphere_det(vertices: &[&[f64]], p: &[f64]) -> (f64, f64) {
    let d = p.len();
    let n = d + 1;
    let mut m = vec![0.0; n * n];
    let mut scale = 1.0;
    for (r, v) in vertices.iter().enumerate() {
        let mut norm2 = 0.0;
        let mut lift = 0.0;
        for c in 0..d {
            let x = v[c] - p[c];
            m[r * n + c] = x;
            lift += x * x;
        }
        m[r * n + d] = lift;
        for c in 0..n {
            norm2 += m[r * n + c] * m[r * n + c];
        }
        scale *= norm2.sqrt();
    }
    (linalg::determinant(&m, n), scale)
}
