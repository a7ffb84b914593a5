//! Dense real symmetric linear algebra.
//!
//! Everything here works at desk scale (n up to about 64) and favours
//! simple, auditable kernels: an unblocked Cholesky factorization,
//! triangular solves, a cyclic Jacobi eigensolver and an LU factorization
//! used only where a non-symmetric determinant is needed.
//!
//! Determinants are only ever produced in log form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold below which a Cholesky pivot is treated as zero.
pub const PIVOT_FLOOR: f64 = 1e-12;
/// Sweep budget for the cyclic Jacobi eigensolver.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Jacobi stops when the off-diagonal Frobenius mass falls below this
/// fraction of the input's Frobenius norm.
pub const JACOBI_TOL: f64 = 1e-12;

/// General dense row-major matrix. Used for off-diagonal blocks, factors
/// and non-symmetric intermediate products.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: other.rows });
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Mat, f: impl Fn(f64, f64) -> f64) -> Result<Mat> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                got: other.rows * other.cols,
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Mat { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `log|det|` and sign via LU with partial pivoting. `None` for an
    /// exactly singular (or non-square) matrix.
    pub fn log_abs_det(&self) -> Option<(f64, f64)> {
        if self.rows != self.cols {
            return None;
        }
        let n = self.rows;
        let mut a = self.data.clone();
        let mut sign = 1.0;
        let mut logdet = 0.0;
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
                .unwrap();
            let pivot = a[pivot_row * n + col];
            if pivot == 0.0 || !pivot.is_finite() {
                return None;
            }
            if pivot_row != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot_row * n + j);
                }
                sign = -sign;
            }
            if pivot < 0.0 {
                sign = -sign;
            }
            logdet += pivot.abs().ln();
            for r in (col + 1)..n {
                let factor = a[r * n + col] / pivot;
                if factor == 0.0 {
                    continue;
                }
                for j in col..n {
                    a[r * n + j] -= factor * a[col * n + j];
                }
            }
        }
        Some((sign, logdet))
    }
}

/// Dense real symmetric matrix, stored full and row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymMatrixRepr", into = "SymMatrixRepr")]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SymMatrixRepr {
    n: usize,
    data: Vec<f64>,
}

impl TryFrom<SymMatrixRepr> for SymMatrix {
    type Error = Error;

    fn try_from(r: SymMatrixRepr) -> Result<Self> {
        SymMatrix::new(r.n, r.data)
    }
}

impl From<SymMatrix> for SymMatrixRepr {
    fn from(m: SymMatrix) -> Self {
        SymMatrixRepr { n: m.n, data: m.data }
    }
}

impl SymMatrix {
    /// Builds a symmetric matrix from `n*n` row-major entries, storing
    /// `(a_ij + a_ji) / 2` in both triangles.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMatrix("dimension must be at least 1".into()));
        }
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: data.len() });
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!("non-finite entry {bad}")));
        }
        let mut m = Self { n, data };
        m.symmetrize();
        Ok(m)
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::new(n, data)
    }

    /// Symmetric part `(M + Mᵀ)/2` of a square matrix.
    pub fn from_mat(m: &Mat) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::DimensionMismatch { expected: m.rows(), got: m.cols() });
        }
        Self::new(m.rows(), m.as_slice().to_vec())
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut data = vec![0.0; n * n];
        for (i, v) in values.iter().enumerate() {
            data[i * n + i] = *v;
        }
        Self { n, data }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self::new(n, data)
    }

    fn symmetrize(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = v;
                self.data[j * n + i] = v;
            }
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn to_mat(&self) -> Mat {
        Mat { rows: self.n, cols: self.n, data: self.data.clone() }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn check_same_dim(&self, other: &SymMatrix) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        Ok(())
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.check_same_dim(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(SymMatrix { n: self.n, data })
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.check_same_dim(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(SymMatrix { n: self.n, data })
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix { n: self.n, data: self.data.iter().map(|v| v * s).collect() }
    }

    /// `self + s·I`.
    pub fn shift(&self, s: f64) -> SymMatrix {
        let mut out = self.clone();
        for i in 0..self.n {
            out.data[i * self.n + i] += s;
        }
        out
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        self.to_mat().matmul(other)
    }

    /// Congruence `Xᵀ·self·X`, symmetrized.
    pub fn congruence(&self, x: &Mat) -> Result<SymMatrix> {
        let ax = self.matmul(x)?;
        let out = x.transpose().matmul(&ax)?;
        SymMatrix::from_mat(&out)
    }

    /// Principal submatrix on the index range `start..start+len`.
    pub fn principal(&self, start: usize, len: usize) -> SymMatrix {
        let mut data = Vec::with_capacity(len * len);
        for i in start..start + len {
            data.extend_from_slice(&self.data[i * self.n + start..i * self.n + start + len]);
        }
        SymMatrix { n: len, data }
    }

    /// Rectangular block `rows × cols` starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, rows: usize, c0: usize, cols: usize) -> Mat {
        Mat::from_fn(rows, cols, |i, j| self.get(r0 + i, c0 + j))
    }

    /// Smallest eigenvalue (Jacobi).
    pub fn min_eig(&self) -> Result<f64> {
        let eig = sym_eigen(self)?;
        Ok(*eig.lambda.last().unwrap())
    }
}

/// A symmetric matrix that has passed the Cholesky positivity test, with
/// its lower factor and log-determinant cached.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix {
    base: SymMatrix,
    chol: Mat,
    logdet: f64,
}

impl SpdMatrix {
    pub fn matrix(&self) -> &SymMatrix {
        &self.base
    }

    pub fn into_matrix(self) -> SymMatrix {
        self.base
    }

    pub fn n(&self) -> usize {
        self.base.n
    }

    /// Lower-triangular `L` with `A = L·Lᵀ`.
    pub fn chol_factor(&self) -> &Mat {
        &self.chol
    }

    pub fn log_det(&self) -> f64 {
        self.logdet
    }

    /// Solves `L·X = B` by forward substitution.
    pub fn solve_lower(&self, b: &Mat) -> Result<Mat> {
        let n = self.n();
        if b.rows() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.rows() });
        }
        let l = &self.chol;
        let mut x = b.clone();
        for c in 0..b.cols() {
            for i in 0..n {
                let mut s = x.get(i, c);
                for k in 0..i {
                    s -= l.get(i, k) * x.get(k, c);
                }
                x.set(i, c, s / l.get(i, i));
            }
        }
        Ok(x)
    }

    /// Solves `A·X = B` through the two triangular systems.
    pub fn solve(&self, b: &Mat) -> Result<Mat> {
        let y = self.solve_lower(b)?;
        let n = self.n();
        let l = &self.chol;
        let mut x = y;
        for c in 0..x.cols() {
            for i in (0..n).rev() {
                let mut s = x.get(i, c);
                for k in (i + 1)..n {
                    s -= l.get(k, i) * x.get(k, c);
                }
                x.set(i, c, s / l.get(i, i));
            }
        }
        Ok(x)
    }

    /// `A⁻¹ = L⁻ᵀ·L⁻¹`.
    pub fn inverse(&self) -> SymMatrix {
        let n = self.n();
        let linv = self
            .solve_lower(&Mat::identity(n))
            .expect("factor dimension matches by construction");
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                // L⁻¹ is lower triangular: only rows k >= max(i, j) contribute.
                let mut s = 0.0;
                for k in i..n {
                    s += linv.get(k, i) * linv.get(k, j);
                }
                data[i * n + j] = s;
                data[j * n + i] = s;
            }
        }
        SymMatrix { n, data }
    }
}

/// Cholesky factorization `A = L·Lᵀ`.
///
/// Fails with [`Error::NotPositiveDefinite`] when a pivot (the would-be
/// `L_jj²`) is at or below `PIVOT_FLOOR · max(1, ‖A‖_max)`.
pub fn cholesky(a: &SymMatrix) -> Result<SpdMatrix> {
    let n = a.n;
    let floor = PIVOT_FLOOR * a.max_abs().max(1.0);
    let mut l = Mat::zeros(n, n);
    let mut logdet = 0.0;
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if d.is_nan() || d <= floor {
            return Err(Error::NotPositiveDefinite { row: j, pivot: d });
        }
        let ljj = d.sqrt();
        l.set(j, j, ljj);
        logdet += 2.0 * ljj.ln();
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / ljj);
        }
    }
    Ok(SpdMatrix { base: a.clone(), chol: l, logdet })
}

/// `log det A = 2·Σ log L_ii`.
pub fn log_det(a: &SpdMatrix) -> f64 {
    a.log_det()
}

pub fn invert(a: &SpdMatrix) -> SymMatrix {
    a.inverse()
}

/// Orthogonal eigendecomposition `A = Q·diag(λ)·Qᵀ`, eigenvalues descending.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenDecomp {
    /// Eigenvectors as columns.
    pub q: Mat,
    pub lambda: Vec<f64>,
}

impl EigenDecomp {
    /// Rebuilds `Q·diag(f(λ))·Qᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.lambda.len();
        let mapped: Vec<f64> = self.lambda.iter().map(|&l| f(l)).collect();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..n).map(|k| self.q.get(i, k) * mapped[k] * self.q.get(j, k)).sum();
                data[i * n + j] = s;
                data[j * n + i] = s;
            }
        }
        SymMatrix { n, data }
    }
}

fn off_diagonal_mass(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigensolver.
///
/// Sweeps over all `(p, q)` pairs in row order, annihilating each
/// off-diagonal entry with a plane rotation, until the off-diagonal
/// Frobenius mass is at most `JACOBI_TOL · ‖A‖_F`.
pub fn sym_eigen(a: &SymMatrix) -> Result<EigenDecomp> {
    let n = a.n;
    let mut m = a.data.clone();
    let mut q = Mat::identity(n);
    let target = JACOBI_TOL * a.frobenius();

    let mut converged = false;
    let mut off = off_diagonal_mass(&m, n);
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apq = m[p * n + r];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[r * n + r];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    if k == p || k == r {
                        continue;
                    }
                    let akp = m[k * n + p];
                    let akq = m[k * n + r];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    m[k * n + p] = new_kp;
                    m[p * n + k] = new_kp;
                    m[k * n + r] = new_kq;
                    m[r * n + k] = new_kq;
                }
                m[p * n + p] = app - t * apq;
                m[r * n + r] = aqq + t * apq;
                m[p * n + r] = 0.0;
                m[r * n + p] = 0.0;

                for k in 0..n {
                    let qkp = q.get(k, p);
                    let qkq = q.get(k, r);
                    q.set(k, p, c * qkp - s * qkq);
                    q.set(k, r, s * qkp + c * qkq);
                }
            }
        }
        off = off_diagonal_mass(&m, n);
    }
    if !converged && off > target {
        return Err(Error::NoConvergence { sweeps: JACOBI_MAX_SWEEPS, off });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[y * n + y].total_cmp(&m[x * n + x]));
    let lambda = order.iter().map(|&i| m[i * n + i]).collect();
    let q = Mat::from_fn(n, n, |i, j| q.get(i, order[j]));
    Ok(EigenDecomp { q, lambda })
}

/// Square root of a PSD matrix, `Q·diag(√max(λ,0))·Qᵀ`.
pub fn psd_sqrt(a: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eigen(a)?;
    Ok(eig.reconstruct_with(|l| l.max(0.0).sqrt()))
}

/// The unique SPD square root of an SPD matrix.
pub fn spd_sqrt(a: &SpdMatrix) -> Result<SpdMatrix> {
    cholesky(&psd_sqrt(a.matrix())?)
}

/// Evidence for a Loewner comparison `A ≥ B`: the smallest eigenvalue of
/// `A − B` together with the scale used to judge it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoewnerEvidence {
    pub min_eig: f64,
    /// `‖A − B‖_max`.
    pub diff_max: f64,
}

impl LoewnerEvidence {
    /// `A ≥ B` up to `tol · (1 + ‖A − B‖_max)`.
    pub fn is_geq(&self, tol: f64) -> bool {
        self.min_eig >= -tol * (1.0 + self.diff_max)
    }

    /// `A > B` strictly, beyond the same tolerance band.
    pub fn is_gt(&self, tol: f64) -> bool {
        self.min_eig > tol * (1.0 + self.diff_max)
    }
}

pub fn loewner_cmp(a: &SymMatrix, b: &SymMatrix) -> Result<LoewnerEvidence> {
    let diff = a.sub(b)?;
    Ok(LoewnerEvidence { min_eig: diff.min_eig()?, diff_max: diff.max_abs() })
}
