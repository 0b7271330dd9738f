//! Dense symmetric linear algebra kernels.
//!
//! Everything here works on row-major `f64` storage. The recursion only ever
//! needs `M^{-1}` through triangular solves against a Cholesky factor, so no
//! routine in this module forms an explicit inverse.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used by [`cholesky`] to accept a matrix as symmetric.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Default relative stopping tolerance for power iteration.
pub const POWER_TOL: f64 = 1e-10;

/// Default iteration budget for power iteration.
pub const POWER_MAX_ITER: usize = 10_000;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Row-major dense matrix of 64-bit floats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting length mismatches
    /// and non-finite values.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(rows.len(), cols, data)
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `out = self * x`.
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x, &mut out);
        out
    }

    /// `out = self^T * y`.
    pub fn matvec_transposed_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Largest `|S(i,j) - S(j,i)|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Replaces the matrix with `(S + S^T) / 2`.
    pub fn symmetrize(&mut self) {
        let n = self.rows;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg;
            }
        }
    }

    /// Returns `self + shift * I`.
    pub fn shifted(&self, shift: f64) -> DenseMatrix {
        let mut out = self.clone();
        for i in 0..self.rows.min(self.cols) {
            out.data[i * self.cols + i] += shift;
        }
        out
    }

    fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }
}

/// Lower-triangular Cholesky factor `L` with `L L^T = M`.
///
/// The strict upper triangle is stored as zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerFactor {
    dim: usize,
    data: Vec<f64>,
}

impl LowerFactor {
    /// Factor of the identity.
    pub fn identity(dim: usize) -> Self {
        let DenseMatrix { data, .. } = DenseMatrix::identity(dim);
        Self { dim, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// Smallest diagonal entry of `L` squared, a cheap lower proxy for the
    /// conditioning of `L L^T`.
    pub fn min_pivot(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.get(i, i) * self.get(i, i))
            .fold(f64::INFINITY, f64::min)
    }

    /// Overwrites `b` with `L^{-1} b` (forward substitution).
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.dim);
        let n = self.dim;
        for j in 0..n {
            let row = &self.data[j * n..j * n + j];
            let s = b[j] - dot(row, &b[..j]);
            b[j] = s / self.data[j * n + j];
        }
    }

    /// Overwrites `b` with `L^{-T} b` (backward substitution).
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.dim);
        let n = self.dim;
        for j in (0..n).rev() {
            b[j] /= self.data[j * n + j];
            let bj = b[j];
            if bj == 0.0 {
                continue;
            }
            for (i, bi) in b.iter_mut().enumerate().take(j) {
                *bi -= self.data[j * n + i] * bj;
            }
        }
    }

    /// Overwrites `b` with `M^{-1} b` where `M = L L^T`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        self.solve_lower_in_place(b);
        self.solve_upper_in_place(b);
    }

    /// `L L^T` as a dense matrix.
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.dim;
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let k = j + 1;
                let v = dot(&self.data[i * n..i * n + k], &self.data[j * n..j * n + k]);
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        out
    }
}

/// Positive diagonal matrix stored as its diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiagonalMatrix {
    entries: Vec<f64>,
}

impl DiagonalMatrix {
    pub fn new(entries: Vec<f64>) -> Self {
        Self { entries }
    }

    pub fn scaled_identity(dim: usize, value: f64) -> Self {
        Self {
            entries: vec![value; dim],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    pub fn min(&self) -> f64 {
        self.entries.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.entries.iter().all(|&d| d > 0.0 && d.is_finite())
    }
}

/// Cholesky factorization of a symmetric matrix.
///
/// Rejects matrices whose asymmetry exceeds `1e-10 * max|S|`; only the lower
/// triangle is read afterwards.
pub fn cholesky(s: &DenseMatrix) -> Result<LowerFactor> {
    s.require_square()?;
    let asym = s.max_asymmetry();
    if asym > SYMMETRY_TOLERANCE * s.max_abs() {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    cholesky_lower(s, 0.0)
}

/// Factors `S + shift * I` reading only the lower triangle of `S`.
pub(crate) fn cholesky_lower(s: &DenseMatrix, shift: f64) -> Result<LowerFactor> {
    let n = s.rows();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let (head, tail) = l.split_at_mut(i * n);
            let li = &mut tail[..n];
            let lj: &[f64] = if j == i {
                &li[..j]
            } else {
                &head[j * n..j * n + j]
            };
            let s_ij = s.get(i, j) - dot(&li[..j], lj);
            if j == i {
                let pivot = s_ij + shift;
                if pivot.is_nan() || pivot <= 0.0 || !pivot.is_finite() {
                    return Err(Error::NotPositiveDefinite { index: i, pivot });
                }
                li[i] = pivot.sqrt();
            } else {
                li[j] = s_ij / head[j * n + j];
            }
        }
    }
    Ok(LowerFactor { dim: n, data: l })
}

/// `Gamma = W M^{-1} W^T` with `M = L L^T`, computed as the Gram matrix of
/// the rows of `W L^{-T}`.
///
/// The result is exactly symmetric: only the upper triangle is computed and
/// mirrored.
pub fn gamma_matrix(w: &DenseMatrix, m: &LowerFactor) -> Result<DenseMatrix> {
    if w.cols() != m.dim() {
        return Err(Error::DimensionMismatch(format!(
            "weight has {} columns but M has dimension {}",
            w.cols(),
            m.dim()
        )));
    }
    let rows = w.rows();
    let cols = w.cols();
    // Row i of `y` solves L y_i = w_i.
    let mut y = w.as_slice().to_vec();
    for chunk in y.chunks_mut(cols.max(1)).take(rows) {
        m.solve_lower_in_place(chunk);
    }
    let mut gamma = DenseMatrix::zeros(rows, rows);
    for i in 0..rows {
        let yi = &y[i * cols..(i + 1) * cols];
        for j in i..rows {
            let v = dot(yi, &y[j * cols..(j + 1) * cols]);
            gamma.set(i, j, v);
            gamma.set(j, i, v);
        }
    }
    Ok(gamma)
}

/// Result of a converged power iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerEstimate {
    /// Rayleigh quotient at the returned unit vector.
    pub sigma: f64,
    /// `|A v - sigma v|` at the returned unit vector.
    pub residual: f64,
    pub iterations: usize,
}

/// Dominant eigenvalue of a symmetric PSD matrix.
///
/// Starts from the normalized all-ones vector. If that vector lies in the
/// kernel while the trace is nonzero, restarts once from the normalized
/// `(1, 2, ..., n)`.
pub fn power_iteration(a: &DenseMatrix, tol: f64, max_iter: usize) -> Result<PowerEstimate> {
    a.require_square()?;
    let trace: f64 = a.diagonal().iter().sum();
    power_iteration_op(
        a.rows(),
        |x, out| a.matvec_into(x, out),
        Some(trace),
        tol,
        max_iter,
    )
}

/// Power iteration on a symmetric PSD operator given only through
/// matrix-vector products.
///
/// `trace_hint` gates the restart: `None` means the trace is unknown and a
/// zero estimate always triggers the restart.
pub fn power_iteration_op<F>(
    n: usize,
    mut apply: F,
    trace_hint: Option<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<PowerEstimate>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if n == 0 {
        return Ok(PowerEstimate {
            sigma: 0.0,
            residual: 0.0,
            iterations: 0,
        });
    }
    let ones = vec![1.0 / (n as f64).sqrt(); n];
    let first = run_power(&ones, &mut apply, tol, max_iter);

    let zero_estimate = match &first {
        Ok(est) => {
            let scale = trace_hint.map_or(0.0, f64::abs);
            est.sigma.abs() <= f64::EPSILON * scale || est.sigma == 0.0
        }
        Err(_) => false,
    };
    let wants_restart = zero_estimate
        && n > 1
        && match trace_hint {
            Some(t) => t != 0.0,
            None => true,
        };
    if !wants_restart {
        return first;
    }
    let norm = ((n * (n + 1) * (2 * n + 1)) as f64 / 6.0).sqrt();
    let ramp: Vec<f64> = (1..=n).map(|i| i as f64 / norm).collect();
    run_power(&ramp, &mut apply, tol, max_iter)
}

fn run_power<F>(start: &[f64], apply: &mut F, tol: f64, max_iter: usize) -> Result<PowerEstimate>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = start.len();
    let mut v = start.to_vec();
    let mut w = vec![0.0; n];
    let mut prev = f64::NAN;
    let mut sigma = 0.0;
    let mut residual = f64::INFINITY;
    for iter in 1..=max_iter.max(1) {
        apply(&v, &mut w);
        sigma = dot(&v, &w);
        residual = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - sigma * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        let wnorm = norm2(&w);
        let settled = (sigma - prev).abs() <= tol * sigma.abs() && residual <= tol * sigma.abs();
        if wnorm == 0.0 || settled || residual == 0.0 {
            return Ok(PowerEstimate {
                sigma,
                residual,
                iterations: iter,
            });
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wnorm;
        }
        prev = sigma;
    }
    Err(Error::NotConverged {
        sigma,
        residual,
        iterations: max_iter,
    })
}

/// Absolute row sums `sum_j |G(i,j)|`.
pub fn row_abs_sums(g: &DenseMatrix) -> Vec<f64> {
    (0..g.rows())
        .map(|i| g.row(i).iter().map(|v| v.abs()).sum())
        .collect()
}

/// Row sums of `Q^{-1} |G| Q` for `Q = diag(q)`.
pub fn scaled_row_sums(g: &DenseMatrix, q: &[f64]) -> Result<Vec<f64>> {
    if q.len() != g.cols() || !g.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "scaling of length {} for {}x{} matrix",
            q.len(),
            g.rows(),
            g.cols()
        )));
    }
    if let Some((index, &value)) = q.iter().enumerate().find(|(_, &v)| v.is_nan() || v <= 0.0) {
        return Err(Error::NonPositiveScaling { index, value });
    }
    Ok((0..g.rows())
        .map(|i| {
            g.row(i)
                .iter()
                .zip(q)
                .enumerate()
                .map(|(j, (v, qj))| {
                    if j == i {
                        v.abs()
                    } else {
                        (qj / q[i]) * v.abs()
                    }
                })
                .sum()
        })
        .collect())
}

/// Default shift for [`psd_check`]: `1e-8 * (1 + max|diag S|)`.
pub fn default_psd_shift(s: &DenseMatrix) -> f64 {
    let d = s.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    1e-8 * (1.0 + d)
}

/// `true` iff `S + shift * I` admits a Cholesky factorization.
pub fn psd_check(s: &DenseMatrix, shift: f64) -> bool {
    s.is_square() && cholesky_lower(s, shift).is_ok()
}

/// Largest eigenvalue of symmetric `a` by a dense symmetric eigensolver,
/// with the residual of its eigenvector. `None` if the solver does not
/// converge.
pub fn dense_top_eigen(a: &DenseMatrix) -> Option<PowerEstimate> {
    let n = a.rows();
    if n == 0 || !a.is_square() {
        return None;
    }
    let m = nalgebra::DMatrix::from_row_slice(n, n, a.as_slice());
    let eig = m.try_symmetric_eigen(f64::EPSILON, 0)?;
    let (k, &sigma) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))?;
    let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
    let av = a.matvec(&v);
    let residual = av
        .iter()
        .zip(&v)
        .map(|(x, y)| (x - sigma * y).powi(2))
        .sum::<f64>()
        .sqrt();
    Some(PowerEstimate {
        sigma,
        residual,
        iterations: 0,
    })
}

/// `max_i sum_j |G(i,j)|`, an upper bound on the spectral norm of symmetric `G`.
pub fn spectral_upper_bound(g: &DenseMatrix) -> f64 {
    row_abs_sums(g).into_iter().fold(0.0, f64::max)
}
