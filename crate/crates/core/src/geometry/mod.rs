//! Point-set and simplex geometry in arbitrary dimension.
//!
//! Points are plain coordinate slices in `[0,1]^d`. The incremental
//! Delaunay triangulation lives in [`triangulation`]; this module holds the
//! free-standing simplex helpers: volumes, centroids, barycentric
//! coordinates, the face-centroid subsimplex and uniform sampling.

pub mod triangulation;

use rand::distributions::Open01;
use rand::Rng;
use thiserror::Error;

use crate::linalg::{self, Lu};

pub use triangulation::{InsertOutcome, SimplexId, Triangulation};

/// Euclidean distance below which two samples are considered coincident.
pub const COINCIDENT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point coincides with existing sample {existing} (distance {distance:e})")]
    DegeneratePoint { existing: usize, distance: f64 },
    #[error("degenerate configuration could not be resolved: {0}")]
    PredicateFailure(String),
    #[error("simplex is degenerate (zero volume)")]
    DegenerateSimplex,
    #[error("point lies outside the unit cube")]
    OutsideDomain,
    #[error("point has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no simplex contains the query point")]
    PointLocationFailure,
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Edge matrix `[x_1 - x_0, ..., x_d - x_0]`, row-major with one column per
/// edge.
pub(crate) fn edge_matrix(vertices: &[&[f64]]) -> Vec<f64> {
    let d = vertices.len() - 1;
    let origin = vertices[0];
    let mut m = vec![0.0; d * d];
    for (c, v) in vertices[1..].iter().enumerate() {
        for r in 0..d {
            m[r * d + c] = v[r] - origin[r];
        }
    }
    m
}

/// Signed `d!`-scaled volume: `det(x_1 - x_0, ..., x_d - x_0)`.
pub fn orientation(vertices: &[&[f64]]) -> f64 {
    let d = vertices.len() - 1;
    linalg::determinant(&edge_matrix(vertices), d)
}

/// Volume of the simplex spanned by `d+1` points of dimension `d`.
/// Degenerate simplices have volume zero.
pub fn simplex_volume(vertices: &[&[f64]]) -> f64 {
    let d = vertices.len() - 1;
    orientation(vertices).abs() / factorial(d)
}

pub fn centroid(vertices: &[&[f64]]) -> Vec<f64> {
    let d = vertices[0].len();
    let k = vertices.len() as f64;
    (0..d)
        .map(|r| vertices.iter().map(|v| v[r]).sum::<f64>() / k)
        .collect()
}

/// Barycentric coordinates of `p` with respect to the simplex, or `None`
/// for a degenerate simplex.
pub fn barycentric(vertices: &[&[f64]], p: &[f64]) -> Option<Vec<f64>> {
    let d = vertices.len() - 1;
    let lu = Lu::new(&edge_matrix(vertices), d);
    let rhs: Vec<f64> = (0..d).map(|r| p[r] - vertices[0][r]).collect();
    let tail = lu.solve(&rhs)?;
    let mut out = Vec::with_capacity(d + 1);
    out.push(1.0 - tail.iter().sum::<f64>());
    out.extend(tail);
    Some(out)
}

/// Maps barycentric weights onto the simplex vertices.
pub fn from_barycentric(vertices: &[&[f64]], weights: &[f64]) -> Vec<f64> {
    let d = vertices[0].len();
    let mut p = vec![0.0; d];
    for (v, w) in vertices.iter().zip(weights) {
        for r in 0..d {
            p[r] += w * v[r];
        }
    }
    p
}

/// Uniform draw from the standard simplex `{s_i >= 0, sum s_i <= 1}`.
///
/// Uses `d+1` independent unit exponentials `e_i = -ln(u_i)` normalized by
/// their sum and drops the last component. The uniforms are drawn from the
/// open interval so every component is strictly positive.
pub fn sample_unit_simplex<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let weights = sample_barycentric(d, rng);
    weights[..d].to_vec()
}

/// Uniform barycentric weights (Dirichlet(1, ..., 1)) for a `d`-simplex.
pub fn sample_barycentric<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..=d)
        .map(|_| {
            let u: f64 = rng.sample(Open01);
            -u.ln()
        })
        .collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Uniform random point strictly inside a non-degenerate simplex.
pub fn sample_in_simplex<R: Rng + ?Sized>(
    vertices: &[&[f64]],
    rng: &mut R,
) -> Result<Vec<f64>, GeometryError> {
    if simplex_volume(vertices) <= 0.0 {
        return Err(GeometryError::DegenerateSimplex);
    }
    let d = vertices.len() - 1;
    let w = sample_barycentric(d, rng);
    Ok(from_barycentric(vertices, &w))
}

/// The subsimplex whose vertex `l` is the centroid of the facet opposite
/// vertex `l`. Its volume is `vol / d^d`.
pub fn subsimplex(vertices: &[&[f64]]) -> Result<Vec<Vec<f64>>, GeometryError> {
    if simplex_volume(vertices) <= 0.0 {
        return Err(GeometryError::DegenerateSimplex);
    }
    let d = vertices.len() - 1;
    let dim = vertices[0].len();
    let sum: Vec<f64> = (0..dim)
        .map(|r| vertices.iter().map(|v| v[r]).sum())
        .collect();
    Ok(vertices
        .iter()
        .map(|v| (0..dim).map(|r| (sum[r] - v[r]) / d as f64).collect())
        .collect())
}

pub fn distance_squared(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
