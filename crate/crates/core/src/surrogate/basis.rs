//! Monomial bases and polynomials in a shifted and scaled local frame.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Highest supported polynomial degree.
pub const MAX_DEGREE: usize = 10;
/// Highest supported dimension.
pub const MAX_DIM: usize = 6;

/// Exponent multi-index of one monomial.
pub type MultiIndex = Vec<u8>;

/// Number of monomials of total degree at most `p` in `d` variables,
/// `(d+p)! / (d! p!)`.
pub fn basis_size(d: usize, p: usize) -> usize {
    let mut c: u128 = 1;
    for k in 1..=d as u128 {
        c = c * (p as u128 + k) / k;
    }
    c as usize
}

fn build_basis(d: usize, p: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(basis_size(d, p));
    for total in 0..=p {
        let mut current = vec![0u8; d];
        push_degree(&mut out, &mut current, 0, total);
    }
    out
}

// Emits all multi-indices of exactly `remaining` total degree over
// coordinates `k..`, larger leading exponents first.
fn push_degree(out: &mut Vec<MultiIndex>, current: &mut MultiIndex, k: usize, remaining: usize) {
    let d = current.len();
    if k == d - 1 {
        current[k] = remaining as u8;
        out.push(current.clone());
        current[k] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        current[k] = e as u8;
        push_degree(out, current, k + 1, remaining - e);
    }
    current[k] = 0;
}

/// All multi-indices with total degree at most `p`, ordered by total degree
/// and then lexicographically with larger leading exponents first. Cached
/// per `(d, p)`.
pub fn monomial_basis(d: usize, p: usize) -> Arc<Vec<MultiIndex>> {
    assert!(d >= 1 && d <= MAX_DIM, "dimension {d} unsupported");
    assert!(p <= MAX_DEGREE, "degree {p} unsupported");
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Vec<MultiIndex>>>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry((d, p))
        .or_insert_with(|| Arc::new(build_basis(d, p)))
        .clone()
}

/// Affine local coordinates `z_k = (x_k - center_k) / scale_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Frame {
    pub fn identity(d: usize) -> Self {
        Self {
            center: vec![0.0; d],
            scale: vec![1.0; d],
        }
    }

    /// Frame centered at `center` with per-axis half-widths of the bounding
    /// box of `points`. Zero widths are replaced by one.
    pub fn fitted(center: &[f64], points: &[&[f64]]) -> Self {
        let d = center.len();
        let scale = (0..d)
            .map(|k| {
                let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p[k]), hi.max(p[k]))
                });
                let half = 0.5 * (hi - lo);
                if half > 0.0 && half.is_finite() {
                    half
                } else {
                    1.0
                }
            })
            .collect();
        Self {
            center: center.to_vec(),
            scale,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Powers `z_k^e` for `e = 0..=p`, one row of `MAX_DEGREE + 1` per axis.
    pub(crate) fn powers(&self, x: &[f64], p: usize) -> [[f64; MAX_DEGREE + 1]; MAX_DIM] {
        let mut pw = [[0.0; MAX_DEGREE + 1]; MAX_DIM];
        for k in 0..self.dim() {
            let z = (x[k] - self.center[k]) / self.scale[k];
            pw[k][0] = 1.0;
            for e in 1..=p {
                pw[k][e] = pw[k][e - 1] * z;
            }
        }
        pw
    }
}

/// Evaluates every basis monomial at `x` in the given frame.
pub fn basis_row(frame: &Frame, basis: &[MultiIndex], p: usize, x: &[f64]) -> Vec<f64> {
    let pw = frame.powers(x, p);
    basis
        .iter()
        .map(|alpha| {
            alpha
                .iter()
                .enumerate()
                .map(|(k, &e)| pw[k][e as usize])
                .product()
        })
        .collect()
}

/// A polynomial `sum_k c_k psi_k(z)` in the monomial basis of some frame.
#[derive(Debug, Clone)]
pub struct Polynomial {
    degree: usize,
    frame: Frame,
    basis: Arc<Vec<MultiIndex>>,
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(frame: Frame, degree: usize, coeffs: Vec<f64>) -> Self {
        let basis = monomial_basis(frame.dim(), degree);
        assert_eq!(basis.len(), coeffs.len(), "coefficient count mismatch");
        Self {
            degree,
            frame,
            basis,
            coeffs,
        }
    }

    pub fn constant(d: usize, value: f64) -> Self {
        Self::new(Frame::identity(d), 0, vec![value])
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn exponents(&self) -> &[MultiIndex] {
        &self.basis
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.degree == 0 {
            return self.coeffs[0];
        }
        let pw = self.frame.powers(x, self.degree);
        self.basis
            .iter()
            .zip(&self.coeffs)
            .map(|(alpha, c)| {
                let mut term = *c;
                for (k, &e) in alpha.iter().enumerate() {
                    term *= pw[k][e as usize];
                }
                term
            })
            .sum()
    }
}
