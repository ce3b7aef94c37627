//! Nearest-neighbour stencils around a simplex centroid.

use std::cmp::Ordering;

use crate::geometry::{distance_squared, SimplexId, Triangulation};
use crate::samples::{RegionLabel, SampleSet};

use super::basis::basis_size;
use super::SurrogateError;

/// Sample indices used for one polynomial fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub point_ids: Vec<usize>,
    pub degree: usize,
    /// `None` when every sample is a candidate.
    pub region: Option<RegionLabel>,
}

/// Candidate ordering for every degree up to `p_max`: the (in-region)
/// simplex vertices followed by the remaining candidates by increasing
/// centroid distance, ties to the lower sample index. The stencil of degree
/// `p` is the prefix of length `N_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilPlan {
    pub ordered: Vec<usize>,
    pub n_vertices: usize,
    pub p_max: usize,
    pub region: Option<RegionLabel>,
    /// Squared centroid distance a new candidate must undercut to enter the
    /// degree-`p_max` stencil. Infinite when the candidate pool was too small
    /// and negative when no padding was needed.
    pub admission_radius2: f64,
}

impl StencilPlan {
    pub fn stencil(&self, d: usize, p: usize) -> Result<Stencil, SurrogateError> {
        let n = basis_size(d, p);
        if self.ordered.len() < n {
            return Err(SurrogateError::InsufficientPoints {
                needed: n,
                available: self.ordered.len(),
            });
        }
        Ok(Stencil {
            point_ids: self.ordered[..n].to_vec(),
            degree: p,
            region: self.region,
        })
    }

    /// True if a new sample at `x` with `label` would change this plan.
    pub fn admits(&self, centroid: &[f64], x: &[f64], label: RegionLabel) -> bool {
        if self.admission_radius2 < 0.0 {
            return false;
        }
        if let Some(r) = self.region {
            if r != label {
                return false;
            }
        }
        self.admission_radius2.is_infinite() || distance_squared(centroid, x) < self.admission_radius2
    }
}

/// Orders stencil candidates for `simplex` up to degree `p_max`, restricted
/// to samples labelled `region` when given. Fails with `InsufficientPoints`
/// if a restricted pool cannot supply even a linear stencil.
pub fn plan_stencil(
    tri: &Triangulation,
    samples: &SampleSet,
    simplex: SimplexId,
    p_max: usize,
    region: Option<RegionLabel>,
) -> Result<StencilPlan, SurrogateError> {
    let d = tri.dim();
    let in_region = |i: usize| region.map_or(true, |r| samples.label(i) == r);
    let vertices: Vec<usize> = tri
        .vertices(simplex)
        .iter()
        .copied()
        .filter(|&v| in_region(v))
        .collect();
    let centroid = tri.centroid(simplex);
    let target = basis_size(d, p_max);
    let needed = target.saturating_sub(vertices.len());

    let mut pool: Vec<(f64, usize)> = (0..samples.len())
        .filter(|&i| in_region(i) && !vertices.contains(&i))
        .map(|i| (distance_squared(centroid, samples.point(i)), i))
        .collect();
    let by_distance = |a: &(f64, usize), b: &(f64, usize)| {
        a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
    };
    let admission_radius2 = if needed == 0 {
        pool.clear();
        -1.0
    } else if pool.len() < needed {
        pool.sort_by(by_distance);
        f64::INFINITY
    } else {
        if pool.len() > needed {
            pool.select_nth_unstable_by(needed - 1, by_distance);
            pool.truncate(needed);
        }
        pool.sort_by(by_distance);
        pool[needed - 1].0
    };

    let mut ordered = vertices;
    let n_vertices = ordered.len();
    ordered.extend(pool.iter().map(|&(_, i)| i));
    if region.is_some() && ordered.len() < d + 1 {
        return Err(SurrogateError::InsufficientPoints {
            needed: d + 1,
            available: ordered.len(),
        });
    }
    Ok(StencilPlan {
        ordered,
        n_vertices,
        p_max,
        region,
        admission_radius2,
    })
}
