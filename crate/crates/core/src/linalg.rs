//! Small dense linear algebra used by the geometric predicates and the
//! local interpolation problems. Matrices are row-major `Vec<f64>`.

/// LU factorization with partial pivoting of a square matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    /// Factorizes the `n x n` row-major matrix `a`.
    pub fn new(a: &[f64], n: usize) -> Self {
        assert_eq!(a.len(), n * n, "matrix size mismatch");
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..n {
            let mut piv = k;
            let mut best = lu[k * n + k].abs();
            for r in (k + 1)..n {
                let v = lu[r * n + k].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if piv != k {
                for c in 0..n {
                    lu.swap(k * n + c, piv * n + c);
                }
                perm.swap(k, piv);
                sign = -sign;
            }
            let pivot = lu[k * n + k];
            if pivot == 0.0 {
                singular = true;
                continue;
            }
            for r in (k + 1)..n {
                let factor = lu[r * n + k] / pivot;
                lu[r * n + k] = factor;
                if factor != 0.0 {
                    for c in (k + 1)..n {
                        lu[r * n + c] -= factor * lu[k * n + c];
                    }
                }
            }
        }
        Self {
            n,
            lu,
            perm,
            sign,
            singular,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// True if elimination hit an exactly zero pivot.
    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn determinant(&self) -> f64 {
        let mut det = self.sign;
        for k in 0..self.n {
            det *= self.lu[k * self.n + k];
        }
        det
    }

    /// Ratio of the largest to the smallest pivot magnitude, a cheap
    /// condition estimate. Infinite when a pivot vanished.
    pub fn pivot_ratio(&self) -> f64 {
        let mut max = 0.0f64;
        let mut min = f64::INFINITY;
        for k in 0..self.n {
            let p = self.lu[k * self.n + k].abs();
            max = max.max(p);
            min = min.min(p);
        }
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// Solves `A x = b`. Returns `None` if the factorization is singular.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        if self.singular {
            return None;
        }
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let mut s = x[r];
            for c in 0..r {
                s -= self.lu[r * n + c] * x[c];
            }
            x[r] = s;
        }
        for r in (0..n).rev() {
            let mut s = x[r];
            for c in (r + 1)..n {
                s -= self.lu[r * n + c] * x[c];
            }
            x[r] = s / self.lu[r * n + r];
        }
        Some(x)
    }
}

/// Determinant of a small square matrix.
pub fn determinant(a: &[f64], n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => Lu::new(a, n).determinant(),
    }
}

/// `y = A x` for a row-major `rows x cols` matrix.
pub fn mat_vec(a: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|r| {
            a[r * cols..(r + 1) * cols]
                .iter()
                .zip(x)
                .map(|(aij, xj)| aij * xj)
                .sum()
        })
        .collect()
}

/// Inverse of a square matrix, or `None` if singular.
pub fn inverse(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let lu = Lu::new(a, n);
    if lu.is_singular() {
        return None;
    }
    let mut inv = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for c in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[c] = 1.0;
        let col = lu.solve(&e)?;
        for r in 0..n {
            inv[r * n + c] = col[r];
        }
    }
    Some(inv)
}

/// Least-squares solution of an overdetermined `rows x cols` system via
/// Householder QR. Returns `None` when the matrix is numerically rank
/// deficient.
pub fn least_squares(a: &[f64], rows: usize, cols: usize, b: &[f64]) -> Option<Vec<f64>> {
    assert!(rows >= cols);
    let mut r = a.to_vec();
    let mut rhs = b.to_vec();
    let mut diag_max = 0.0f64;
    for k in 0..cols {
        let norm: f64 = (k..rows).map(|i| r[i * cols + k].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return None;
        }
        let alpha = if r[k * cols + k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|i| r[i * cols + k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for c in k..cols {
                let dot: f64 = (k..rows).map(|i| v[i - k] * r[i * cols + c]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in k..rows {
                    r[i * cols + c] -= f * v[i - k];
                }
            }
            let dot: f64 = (k..rows).map(|i| v[i - k] * rhs[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..rows {
                rhs[i] -= f * v[i - k];
            }
        }
        diag_max = diag_max.max(r[k * cols + k].abs());
    }
    let mut x = vec![0.0; cols];
    for k in (0..cols).rev() {
        let d = r[k * cols + k];
        if d.abs() <= 1e-13 * diag_max {
            return None;
        }
        let mut s = rhs[k];
        for c in (k + 1)..cols {
            s -= r[k * cols + c] * x[c];
        }
        x[k] = s / d;
    }
    Some(x)
}
