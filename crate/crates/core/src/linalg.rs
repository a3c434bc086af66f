//! Small dense complex matrices and a one-sided Jacobi SVD.
//!
//! Sized for MIMO channel matrices (a handful of antennas), so everything is
//! a plain row-major `Vec` and O(n³) loops.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, " {:+.6}{:+.6}i", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CMatrix { rows, cols, data }
    }

    /// Builds a matrix from row-major values.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                expected: format!("{} entries", rows * cols),
                found: format!("{}", data.len()),
            });
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn diag(values: &[Complex64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |r, c| if r == c { values[r] } else { Complex64::new(0.0, 0.0) })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_column(&mut self, c: usize, values: &[Complex64]) {
        for (r, v) in values.iter().enumerate() {
            self[(r, c)] = *v;
        }
    }

    /// The first `n` columns.
    pub fn leading_columns(&self, n: usize) -> Self {
        Self::from_fn(self.rows, n.min(self.cols), |r, c| self[(r, c)])
    }

    pub fn try_mul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::Shape {
                expected: format!("{} rows", self.cols),
                found: format!("{} rows", other.rows),
            });
        }
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..other.cols {
                    out.data[r * other.cols + c] += a * other[(k, c)];
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖A*A − I‖_max`: how far the columns are from orthonormal.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.adjoint() * self;
        g.sub(&CMatrix::identity(self.cols)).max_abs()
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl Mul<&CMatrix> for &CMatrix {
    type Output = CMatrix;

    /// Panics on incompatible shapes; use [`CMatrix::try_mul`] for a checked product.
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.try_mul(rhs).expect("matrix dimensions must agree")
    }
}

impl Mul<&CMatrix> for CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        &self * rhs
    }
}

/// `H = U·diag(S)·V*` with `U` (m×m) and `V` (n×n) unitary and `S` holding
/// the `min(m, n)` singular values in non-increasing order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

impl Svd {
    /// Rebuilds `U S V*`.
    pub fn reconstruct(&self) -> CMatrix {
        let (m, n) = (self.u.rows(), self.v.rows());
        let s = CMatrix::from_fn(m, n, |r, c| {
            if r == c {
                Complex64::new(self.s[r], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        &(&self.u * &s) * &self.v.adjoint()
    }
}

pub const JACOBI_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// One-sided (Hestenes) Jacobi SVD.
///
/// Column pairs of a working copy of `H` are rotated until mutually
/// orthogonal; the accumulated rotations form `V`, the column norms are the
/// singular values and the normalized columns span `U`.
pub fn svd(h: &CMatrix) -> Svd {
    let (m, n) = (h.rows(), h.cols());
    let mut w = h.clone();
    let mut v = CMatrix::identity(n);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = Complex64::new(0.0, 0.0);
                for r in 0..m {
                    let (a, b) = (w[(r, p)], w[(r, q)]);
                    alpha += a.norm_sqr();
                    beta += b.norm_sqr();
                    gamma += a.conj() * b;
                }
                let g = gamma.norm();
                if g <= JACOBI_TOL * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                // Rotate the phase out of gamma, then a real Jacobi rotation.
                let ph = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..m {
                    let a = w[(r, p)];
                    let b = w[(r, q)] * ph.conj();
                    w[(r, p)] = a * c - b * s;
                    w[(r, q)] = a * s + b * c;
                }
                for r in 0..n {
                    let a = v[(r, p)];
                    let b = v[(r, q)] * ph.conj();
                    v[(r, p)] = a * c - b * s;
                    v[(r, q)] = a * s + b * c;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n)
        .map(|c| (0..m).map(|r| w[(r, c)].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));

    let k = m.min(n);
    let v_sorted = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    let s: Vec<f64> = order.iter().take(k).map(|&c| norms[c]).collect();

    let scale = s.first().copied().unwrap_or(0.0);
    let mut u_cols: Vec<Vec<Complex64>> = Vec::with_capacity(m);
    for (j, &c) in order.iter().take(k).enumerate() {
        if s[j] > scale * 1e-14 && s[j] > 0.0 {
            u_cols.push((0..m).map(|r| w[(r, c)] / s[j]).collect());
        } else {
            break;
        }
    }
    complete_basis(&mut u_cols, m);
    let u = CMatrix::from_fn(m, m, |r, c| u_cols[c][r]);
    Svd { u, s, v: v_sorted }
}

/// Extends orthonormal columns to a full basis of `C^m` by Gram-Schmidt
/// over the standard basis vectors.
fn complete_basis(cols: &mut Vec<Vec<Complex64>>, m: usize) {
    let mut e = 0;
    while cols.len() < m && e < m {
        let mut x = vec![Complex64::new(0.0, 0.0); m];
        x[e] = Complex64::new(1.0, 0.0);
        for _ in 0..2 {
            for q in cols.iter() {
                let proj: Complex64 = q.iter().zip(&x).map(|(a, b)| a.conj() * b).sum();
                for (xi, qi) in x.iter_mut().zip(q) {
                    *xi -= proj * qi;
                }
            }
        }
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(x.into_iter().map(|z| z / norm).collect());
        }
        e += 1;
    }
}
