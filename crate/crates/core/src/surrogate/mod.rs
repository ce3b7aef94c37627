//! Per-simplex polynomial surrogates.
//!
//! In original mode every simplex gets one interpolant on a nearest-neighbour
//! stencil, lowering the degree until the system is solvable and, if
//! enabled, extremum conserving. In improved mode stencils are restricted
//! to the region labels of the simplex vertices; a simplex whose vertices
//! carry two labels is approximated by the pointwise maximum or minimum of
//! two one-sided interpolants.

pub mod basis;
pub mod fit;
pub mod lec;
pub mod stencil;

use thiserror::Error;

use crate::geometry::{from_barycentric, SimplexId, Triangulation};
use crate::samples::{RegionLabel, SampleSet};

pub use basis::{basis_size, monomial_basis, Frame, MultiIndex, Polynomial};
pub use fit::{fit_interpolant, fit_least_squares, lebesgue_constant, LEBESGUE_LIMIT};
pub use lec::{lec_check, LecMode};
pub use stencil::{plan_stencil, Stencil, StencilPlan};

/// Relative mismatch tolerated when choosing the two-sided combiner.
pub const COMBINE_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurrogateError {
    #[error("interpolation system is singular, ill-conditioned or poorly poised")]
    SingularSystem,
    #[error("stencil needs {needed} points but only {available} are available")]
    InsufficientPoints { needed: usize, available: usize },
    #[error("simplex vertices span {0} region labels")]
    MoreThanTwoRegions(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Original,
    Improved,
}

/// Extremum conservation actually applied for a mode and dimension: strict
/// only in original mode, delta only for `d >= 4`.
pub fn effective_lec(mode: Mode, lec: LecMode, d: usize) -> LecMode {
    match (mode, lec) {
        (_, LecMode::Off) => LecMode::Off,
        (Mode::Original, LecMode::Strict) => LecMode::Strict,
        (Mode::Improved, LecMode::Strict) => LecMode::Off,
        (_, LecMode::Delta) if d >= 4 => LecMode::Delta,
        (_, LecMode::Delta) => LecMode::Off,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Combine {
    Max,
    Min,
}

impl Combine {
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            Combine::Max => a.max(b),
            Combine::Min => a.min(b),
        }
    }
}

#[derive(Debug, Clone)]
pub enum SurrogateKind {
    OneSided {
        poly: Polynomial,
    },
    /// `poly_low` belongs to the smaller of the two region labels.
    TwoSided {
        poly_low: Polynomial,
        poly_high: Polynomial,
        combine: Combine,
    },
}

impl SurrogateKind {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            SurrogateKind::OneSided { poly } => poly.eval(x),
            SurrogateKind::TwoSided {
                poly_low,
                poly_high,
                combine,
            } => combine.apply(poly_low.eval(x), poly_high.eval(x)),
        }
    }
}

/// Why a simplex fell back to the unrestricted linear interpolant on its
/// vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    /// One side of a two-region simplex could not support a linear fit.
    InsufficientPoints,
    /// The vertices carry three or more labels; the simplex must be refined.
    MoreThanTwoRegions,
}

#[derive(Debug, Clone)]
pub struct LocalSurrogate {
    pub simplex: SimplexId,
    pub kind: SurrogateKind,
    /// Lower-degree comparator on the same stencil(s), same combiner.
    pub lower: SurrogateKind,
    /// Degree of each side, in the order of `stencils`.
    pub degrees: Vec<usize>,
    pub stencils: Vec<Stencil>,
    pub plans: Vec<StencilPlan>,
    pub lec_reduced: bool,
    /// Neither combiner matched every stencil sample within tolerance.
    pub combine_mismatch: bool,
    pub fallback: Option<Fallback>,
}

impl LocalSurrogate {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.kind.eval(x)
    }

    pub fn eval_lower(&self, x: &[f64]) -> f64 {
        self.lower.eval(x)
    }

    /// Smallest side degree.
    pub fn degree(&self) -> usize {
        self.degrees.iter().copied().min().unwrap_or(1)
    }

    /// True if a new sample at `x` with `label` would alter any stencil.
    pub fn admits(&self, centroid: &[f64], x: &[f64], label: RegionLabel) -> bool {
        self.plans.iter().any(|p| p.admits(centroid, x, label))
    }
}

/// Degree, extremum mode and method used to build local surrogates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateConfig {
    pub p_max: usize,
    pub mode: Mode,
    pub lec: LecMode,
}

struct SideFit {
    poly: Polynomial,
    lower: Polynomial,
    stencil: Stencil,
    lec_reduced: bool,
}

struct SimplexView<'a> {
    id: SimplexId,
    vertices: Vec<&'a [f64]>,
    values: Vec<f64>,
    centroid: &'a [f64],
}

fn min_of(values: &[f64]) -> f64 {
    values.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Fits from degree `p_start` downward on prefixes of `plan`. When `lec` is
/// active the fit must also pass the extremum check over the simplex.
/// Rejects stencils whose interpolant amplifies data perturbations by more
/// than `LEBESGUE_LIMIT` somewhere on the simplex. Such stencils are exact
/// at the nodes yet arbitrarily wrong in between, e.g. six points close to
/// a conic for a quadratic.
fn well_poised(view: &SimplexView, frame: &Frame, degree: usize, points: &[&[f64]]) -> bool {
    let d = view.vertices.len() - 1;
    let probe: Vec<Vec<f64>> = lec::barycentric_lattice(d, 2 * degree + 2)
        .iter()
        .map(|w| from_barycentric(&view.vertices, w))
        .collect();
    fit::lebesgue_constant(frame, degree, points, &probe) <= LEBESGUE_LIMIT
}

fn fit_side(
    samples: &SampleSet,
    view: &SimplexView,
    plan: &StencilPlan,
    p_start: usize,
    lec: LecMode,
    comparator_floor: f64,
) -> Result<SideFit, SurrogateError> {
    let d = samples.dim();
    let mut lec_reduced = false;
    let mut last_err = SurrogateError::SingularSystem;
    for p in (1..=p_start).rev() {
        let stencil = match plan.stencil(d, p) {
            Ok(s) => s,
            Err(e) => {
                last_err = e;
                continue;
            }
        };
        let pts: Vec<&[f64]> = stencil.point_ids.iter().map(|&i| samples.point(i)).collect();
        let vals: Vec<f64> = stencil.point_ids.iter().map(|&i| samples.value(i)).collect();
        let frame = Frame::fitted(view.centroid, &pts);
        let poly = match fit_interpolant(&frame, p, &pts, &vals) {
            Ok(poly) => poly,
            Err(e) => {
                last_err = e;
                continue;
            }
        };
        if p > 1 && !well_poised(view, &frame, p, &pts) {
            last_err = SurrogateError::SingularSystem;
            continue;
        }
        if p > 1 && !lec_check(|x| poly.eval(x), p, &view.vertices, &view.values, lec) {
            lec_reduced = true;
            continue;
        }
        let lower = if p == 1 {
            Polynomial::constant(d, comparator_floor)
        } else {
            fit_least_squares(&frame, p - 1, &pts, &vals)
                .unwrap_or_else(|| Polynomial::constant(d, comparator_floor))
        };
        return Ok(SideFit {
            poly,
            lower,
            stencil,
            lec_reduced,
        });
    }
    Err(last_err)
}

/// Unrestricted linear interpolant on the simplex vertices. Its plan admits
/// every new sample so the simplex is refitted as soon as anything changes.
pub fn linear_fallback(
    tri: &Triangulation,
    samples: &SampleSet,
    id: SimplexId,
    reason: Fallback,
) -> Result<LocalSurrogate, SurrogateError> {
    let d = tri.dim();
    let ids = tri.vertices(id).to_vec();
    let pts: Vec<&[f64]> = ids.iter().map(|&i| samples.point(i)).collect();
    let vals: Vec<f64> = ids.iter().map(|&i| samples.value(i)).collect();
    let frame = Frame::fitted(tri.centroid(id), &pts);
    let poly = fit_interpolant(&frame, 1, &pts, &vals)?;
    let stencil = Stencil {
        point_ids: ids.clone(),
        degree: 1,
        region: None,
    };
    let plan = StencilPlan {
        ordered: ids,
        n_vertices: d + 1,
        p_max: 1,
        region: None,
        admission_radius2: f64::INFINITY,
    };
    Ok(LocalSurrogate {
        simplex: id,
        kind: SurrogateKind::OneSided { poly },
        lower: SurrogateKind::OneSided {
            poly: Polynomial::constant(d, min_of(&vals)),
        },
        degrees: vec![1],
        stencils: vec![stencil],
        plans: vec![plan],
        lec_reduced: false,
        combine_mismatch: false,
        fallback: Some(reason),
    })
}

/// Builds the local surrogate of one simplex.
pub fn build_local_surrogate(
    tri: &Triangulation,
    samples: &SampleSet,
    id: SimplexId,
    config: &SurrogateConfig,
) -> Result<LocalSurrogate, SurrogateError> {
    assert!(config.p_max >= 1, "p_max must be at least 1");
    let d = tri.dim();
    let vertex_ids = tri.vertices(id);
    let view = SimplexView {
        id,
        vertices: vertex_ids.iter().map(|&i| samples.point(i)).collect(),
        values: vertex_ids.iter().map(|&i| samples.value(i)).collect(),
        centroid: tri.centroid(id),
    };
    let lec = effective_lec(config.mode, config.lec, d);

    let mut labels: Vec<RegionLabel> = vertex_ids.iter().map(|&i| samples.label(i)).collect();
    labels.sort();
    labels.dedup();

    match (config.mode, labels.len()) {
        (Mode::Original, _) => one_sided(tri, samples, &view, config.p_max, None, lec),
        (Mode::Improved, 1) => one_sided(tri, samples, &view, config.p_max, Some(labels[0]), lec),
        (Mode::Improved, 2) => {
            match two_sided(tri, samples, &view, config.p_max, [labels[0], labels[1]], lec) {
                Err(SurrogateError::InsufficientPoints { .. }) | Err(SurrogateError::SingularSystem) => {
                    linear_fallback(tri, samples, id, Fallback::InsufficientPoints)
                }
                other => other,
            }
        }
        (Mode::Improved, k) => Err(SurrogateError::MoreThanTwoRegions(k)),
    }
}

fn one_sided(
    tri: &Triangulation,
    samples: &SampleSet,
    view: &SimplexView,
    p_max: usize,
    region: Option<RegionLabel>,
    lec: LecMode,
) -> Result<LocalSurrogate, SurrogateError> {
    let plan = plan_stencil(tri, samples, view.id, p_max, region)?;
    let side = fit_side(samples, view, &plan, p_max, lec, min_of(&view.values))?;
    Ok(LocalSurrogate {
        simplex: view.id,
        kind: SurrogateKind::OneSided { poly: side.poly },
        lower: SurrogateKind::OneSided { poly: side.lower },
        degrees: vec![side.stencil.degree],
        stencils: vec![side.stencil],
        plans: vec![plan],
        lec_reduced: side.lec_reduced,
        combine_mismatch: false,
        fallback: None,
    })
}

/// Worst relative mismatch of `combine` over the given stencil samples.
fn combine_mismatch(
    samples: &SampleSet,
    ids: &[usize],
    low: &Polynomial,
    high: &Polynomial,
    combine: Combine,
) -> f64 {
    ids.iter()
        .map(|&i| {
            let x = samples.point(i);
            let f = samples.value(i);
            (combine.apply(low.eval(x), high.eval(x)) - f).abs() / (1.0 + f.abs())
        })
        .fold(0.0, f64::max)
}

fn two_sided(
    tri: &Triangulation,
    samples: &SampleSet,
    view: &SimplexView,
    p_max: usize,
    labels: [RegionLabel; 2],
    lec: LecMode,
) -> Result<LocalSurrogate, SurrogateError> {
    let vertex_ids = tri.vertices(view.id);
    let side_floor = |label: RegionLabel| {
        min_of(
            &vertex_ids
                .iter()
                .filter(|&&i| samples.label(i) == label)
                .map(|&i| samples.value(i))
                .collect::<Vec<_>>(),
        )
    };
    let plans = [
        plan_stencil(tri, samples, view.id, p_max, Some(labels[0]))?,
        plan_stencil(tri, samples, view.id, p_max, Some(labels[1]))?,
    ];
    let floors = [side_floor(labels[0]), side_floor(labels[1])];

    let mut cap = p_max;
    let mut lec_reduced = false;
    loop {
        // One-sided fits extrapolate past their region, so extremum checks
        // apply to the combined surrogate only.
        let low = fit_side(samples, view, &plans[0], cap, LecMode::Off, floors[0])?;
        let high = fit_side(samples, view, &plans[1], cap, LecMode::Off, floors[1])?;

        let mut union: Vec<usize> = low.stencil.point_ids.clone();
        union.extend(&high.stencil.point_ids);
        let mismatch_max = combine_mismatch(samples, &union, &low.poly, &high.poly, Combine::Max);
        let (combine, flagged) = if mismatch_max <= COMBINE_TOL {
            (Combine::Max, false)
        } else {
            let mismatch_min =
                combine_mismatch(samples, &union, &low.poly, &high.poly, Combine::Min);
            if mismatch_min <= COMBINE_TOL {
                (Combine::Min, false)
            } else {
                // Distant stencil samples are dominated by extrapolation
                // error, so the simplex's own vertices decide first.
                let at_vertices = |c| combine_mismatch(samples, vertex_ids, &low.poly, &high.poly, c);
                let key_max = (at_vertices(Combine::Max), mismatch_max);
                let key_min = (at_vertices(Combine::Min), mismatch_min);
                if key_min < key_max {
                    (Combine::Min, true)
                } else {
                    (Combine::Max, true)
                }
            }
        };

        let kind = SurrogateKind::TwoSided {
            poly_low: low.poly,
            poly_high: high.poly,
            combine,
        };
        let degree = low.stencil.degree.max(high.stencil.degree);
        if degree > 1 && !lec_check(|x| kind.eval(x), degree, &view.vertices, &view.values, lec) {
            lec_reduced = true;
            cap = degree - 1;
            continue;
        }
        return Ok(LocalSurrogate {
            simplex: view.id,
            kind,
            lower: SurrogateKind::TwoSided {
                poly_low: low.lower,
                poly_high: high.lower,
                combine,
            },
            degrees: vec![low.stencil.degree, high.stencil.degree],
            stencils: vec![low.stencil, high.stencil],
            plans: plans.to_vec(),
            lec_reduced,
            combine_mismatch: flagged,
            fallback: None,
        });
    }
}

#[cfg(test)]
mod tests;
