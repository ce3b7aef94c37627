//! Interpolation and least-squares fits in the monomial basis.

use crate::linalg::{self, Lu};

use super::basis::{basis_row, basis_size, monomial_basis, Frame, Polynomial};
use super::SurrogateError;

/// Largest accepted max/min pivot ratio of the interpolation matrix.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Largest accepted Lebesgue constant of a stencil over its simplex.
pub const LEBESGUE_LIMIT: f64 = 1e3;
/// Relative residual bound `|g(x_i) - f_i| <= RESIDUAL_TOL (1 + |f_i|)`.
pub const RESIDUAL_TOL: f64 = 1e-8;

fn design_matrix(frame: &Frame, degree: usize, points: &[&[f64]]) -> Vec<f64> {
    let basis = monomial_basis(frame.dim(), degree);
    points
        .iter()
        .flat_map(|x| basis_row(frame, &basis, degree, x))
        .collect()
}

/// Solves the square interpolation problem `g(x_i) = f_i` for a degree
/// `degree` polynomial. `points.len()` must equal the basis size.
pub fn fit_interpolant(
    frame: &Frame,
    degree: usize,
    points: &[&[f64]],
    values: &[f64],
) -> Result<Polynomial, SurrogateError> {
    let n = basis_size(frame.dim(), degree);
    assert_eq!(points.len(), n, "stencil size must match the basis size");
    assert_eq!(values.len(), n);
    let a = design_matrix(frame, degree, points);
    let lu = Lu::new(&a, n);
    if lu.is_singular() || lu.pivot_ratio() > CONDITION_LIMIT {
        return Err(SurrogateError::SingularSystem);
    }
    let mut c = lu.solve(values).ok_or(SurrogateError::SingularSystem)?;
    let r: Vec<f64> = linalg::mat_vec(&a, n, n, &c)
        .iter()
        .zip(values)
        .map(|(ac, f)| f - ac)
        .collect();
    if let Some(dc) = lu.solve(&r) {
        for (ci, di) in c.iter_mut().zip(dc) {
            *ci += di;
        }
    }
    let fitted = linalg::mat_vec(&a, n, n, &c);
    for (g, f) in fitted.iter().zip(values) {
        if !g.is_finite() || (g - f).abs() > RESIDUAL_TOL * (1.0 + f.abs()) {
            return Err(SurrogateError::SingularSystem);
        }
    }
    Ok(Polynomial::new(frame.clone(), degree, c))
}

/// Largest Lebesgue function value `sum_i |l_i(x)|` of the interpolation
/// problem over `probe`, where `l_i` are the Lagrange polynomials of the
/// stencil. Infinite if the stencil is singular.
pub fn lebesgue_constant(frame: &Frame, degree: usize, points: &[&[f64]], probe: &[Vec<f64>]) -> f64 {
    let n = basis_size(frame.dim(), degree);
    let a = design_matrix(frame, degree, points);
    let Some(inv) = linalg::inverse(&a, n) else {
        return f64::INFINITY;
    };
    let basis = monomial_basis(frame.dim(), degree);
    let mut worst = 0.0f64;
    let mut ell = vec![0.0; n];
    for x in probe {
        let phi = basis_row(frame, &basis, degree, x);
        ell.iter_mut().for_each(|v| *v = 0.0);
        for (k, &pk) in phi.iter().enumerate() {
            for (l, row) in ell.iter_mut().zip(&inv[k * n..(k + 1) * n]) {
                *l += pk * row;
            }
        }
        worst = worst.max(ell.iter().map(|v| v.abs()).sum());
    }
    worst
}

/// Least-squares fit of a degree `degree` polynomial to at least as many
/// points as basis functions. `None` if the design matrix is rank deficient.
pub fn fit_least_squares(
    frame: &Frame,
    degree: usize,
    points: &[&[f64]],
    values: &[f64],
) -> Option<Polynomial> {
    let cols = basis_size(frame.dim(), degree);
    let rows = points.len();
    if rows < cols {
        return None;
    }
    let a = design_matrix(frame, degree, points);
    let c = linalg::least_squares(&a, rows, cols, values)?;
    if c.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(Polynomial::new(frame.clone(), degree, c))
}
