//! Dense real matrix kernel: least squares, Cholesky, and symmetric
//! (generalized) eigen-solving.
//!
//! Everything here is sized for small econometric systems (a handful of
//! variables, a few hundred observations), so the routines favour
//! straightforward, accurate algorithms over blocked ones.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use thiserror::Error;

/// Relative pivot below which a cross-product matrix is treated as singular.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix data has length {len}, expected {rows}x{cols}")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("design matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },
    #[error("least squares needs more observations ({rows}) than regressors ({cols})")]
    Underdetermined { rows: usize, cols: usize },
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is singular")]
    Singular,
}

/// Row-major dense matrix of finite reals.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::ShapeMismatch { rows, cols, len: data.len() });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite { row: pos / cols.max(1), col: pos % cols.max(1) });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds from row slices. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn column_vector(values: &[f64]) -> Self {
        Self { rows: values.len(), cols: 1, data: values.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows);
        for (i, v) in values.iter().enumerate() {
            self[(i, j)] = *v;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let rrow = rhs.row(k);
                let orow = out.row_mut(i);
                for (o, b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self' * rhs` without materializing the transpose.
    pub fn tr_matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.rows, rhs.rows, "tr_matmul dimension mismatch");
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        for t in 0..self.rows {
            let a = self.row(t);
            let b = rhs.row(t);
            for (i, ai) in a.iter().enumerate() {
                if *ai == 0.0 {
                    continue;
                }
                let orow = out.row_mut(i);
                for (o, bj) in orow.iter_mut().zip(b) {
                    *o += ai * bj;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn add(&self, rhs: &Matrix) -> Matrix {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    fn zip_with(&self, rhs: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    /// Horizontal concatenation; either side may have zero columns.
    pub fn hstack(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.rows, rhs.rows, "hstack row mismatch");
        let cols = self.cols + rhs.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(rhs.row(i));
        }
        Matrix { rows: self.rows, cols, data }
    }

    pub fn vstack(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.cols, "vstack column mismatch");
        let mut data = self.data.clone();
        data.extend_from_slice(&rhs.data);
        Matrix { rows: self.rows + rhs.rows, cols: self.cols, data }
    }

    /// Rows `start..end` as a new matrix.
    pub fn row_range(&self, start: usize, end: usize) -> Matrix {
        Matrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    pub fn column_range(&self, start: usize, end: usize) -> Matrix {
        let mut out = Matrix::zeros(self.rows, end - start);
        for i in 0..self.rows {
            out.row_mut(i).copy_from_slice(&self.row(i)[start..end]);
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for i in 0..self.rows {
            for j in 0..i {
                if (self[(i, j)] - self[(j, i)]).abs() > rel_tol * scale {
                    return false;
                }
            }
        }
        true
    }

    fn symmetrized(&self) -> Matrix {
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in 0..i {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    fn require_square(&self) -> Result<usize, LinalgError> {
        if self.rows != self.cols {
            return Err(LinalgError::NotSquare { rows: self.rows, cols: self.cols });
        }
        Ok(self.rows)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs)
    }
}

/// Result of a multi-equation least-squares regression.
#[derive(Debug, Clone)]
pub struct OlsFit {
    /// Regressors x equations.
    pub coefficients: Matrix,
    /// T x equations.
    pub residuals: Matrix,
    /// `E'E / T`.
    pub residual_covariance: Matrix,
    /// `(X'X)^{-1}`, used for coefficient standard errors.
    pub xtx_inv: Matrix,
}

impl OlsFit {
    pub fn nobs(&self) -> usize {
        self.residuals.rows()
    }

    /// Residual covariance with the `T - p` divisor.
    pub fn unbiased_covariance(&self) -> Matrix {
        let t = self.residuals.rows() as f64;
        let p = self.coefficients.rows() as f64;
        self.residual_covariance.scale(t / (t - p))
    }
}

/// Least squares of every column of `y` on `x` via Householder QR on the
/// column-equilibrated design.
pub fn ols(x: &Matrix, y: &Matrix) -> Result<OlsFit, LinalgError> {
    let (t, p) = (x.rows(), x.cols());
    assert_eq!(t, y.rows(), "ols row mismatch");
    let n = y.cols();
    if p == 0 {
        let residuals = y.clone();
        let residual_covariance = residuals.tr_matmul(&residuals).scale(1.0 / t as f64);
        return Ok(OlsFit {
            coefficients: Matrix::zeros(0, n),
            residuals,
            residual_covariance,
            xtx_inv: Matrix::zeros(0, 0),
        });
    }
    if t <= p {
        return Err(LinalgError::Underdetermined { rows: t, cols: p });
    }

    // Column norms; a zero column is rank deficient outright.
    let mut norms = vec![0.0; p];
    for (j, norm) in norms.iter_mut().enumerate() {
        *norm = (0..t).map(|i| x[(i, j)].powi(2)).sum::<f64>().sqrt();
        if *norm == 0.0 {
            return Err(LinalgError::RankDeficient { column: j });
        }
    }
    let mut a = x.clone();
    for i in 0..t {
        for j in 0..p {
            a[(i, j)] /= norms[j];
        }
    }
    let mut qty = y.clone();

    // Householder reflections, applied to both A and Y.
    let mut rdiag = vec![0.0; p];
    for j in 0..p {
        let alpha_norm = (j..t).map(|i| a[(i, j)].powi(2)).sum::<f64>().sqrt();
        let alpha = if a[(j, j)] > 0.0 { -alpha_norm } else { alpha_norm };
        let mut v: Vec<f64> = (j..t).map(|i| a[(i, j)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        rdiag[j] = alpha;
        if vnorm2 > 0.0 {
            for c in j..p {
                let dot: f64 = (j..t).map(|i| v[i - j] * a[(i, c)]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in j..t {
                    a[(i, c)] -= f * v[i - j];
                }
            }
            for c in 0..n {
                let dot: f64 = (j..t).map(|i| v[i - j] * qty[(i, c)]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in j..t {
                    qty[(i, c)] -= f * v[i - j];
                }
            }
        }
        a[(j, j)] = alpha;
    }

    // R'R is the equilibrated cross product, so r_jj^2 are its Cholesky pivots.
    let largest = rdiag.iter().fold(0.0f64, |m, r| m.max(r * r));
    if let Some(col) = rdiag.iter().position(|r| r * r <= RANK_TOLERANCE * largest) {
        return Err(LinalgError::RankDeficient { column: col });
    }

    let mut r = Matrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            r[(i, j)] = a[(i, j)];
        }
    }
    let qty_top = qty.row_range(0, p);
    let scaled_coef = solve_upper(&r, &qty_top);
    let mut coefficients = scaled_coef;
    for j in 0..p {
        for c in 0..n {
            coefficients[(j, c)] /= norms[j];
        }
    }

    let residuals = y.sub(&x.matmul(&coefficients));
    let residual_covariance = residuals.tr_matmul(&residuals).scale(1.0 / t as f64).symmetrized();

    // (X'X)^{-1} = D^{-1} R^{-1} R^{-T} D^{-1}
    let r_inv = solve_upper(&r, &Matrix::identity(p));
    let mut xtx_inv = r_inv.matmul(&r_inv.transpose());
    for i in 0..p {
        for j in 0..p {
            xtx_inv[(i, j)] /= norms[i] * norms[j];
        }
    }

    Ok(OlsFit { coefficients, residuals, residual_covariance, xtx_inv })
}

fn solve_upper(r: &Matrix, b: &Matrix) -> Matrix {
    let p = r.rows();
    let mut x = Matrix::zeros(p, b.cols());
    for c in 0..b.cols() {
        for i in (0..p).rev() {
            let mut s = b[(i, c)];
            for k in i + 1..p {
                s -= r[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / r[(i, i)];
        }
    }
    x
}

/// Solves `L X = B` for lower-triangular `L`.
pub fn solve_lower(l: &Matrix, b: &Matrix) -> Matrix {
    let p = l.rows();
    let mut x = Matrix::zeros(p, b.cols());
    for c in 0..b.cols() {
        for i in 0..p {
            let mut s = b[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Lower-triangular `L` with `A = L L'`.
pub fn cholesky(a: &Matrix) -> Result<Matrix, LinalgError> {
    let n = a.require_square()?;
    if !a.is_symmetric(1e-9) {
        return Err(LinalgError::NotSymmetric);
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { pivot: j });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(a: &Matrix) -> Result<Matrix, LinalgError> {
    let l = cholesky(a)?;
    let l_inv = solve_lower(&l, &Matrix::identity(a.rows()));
    Ok(l_inv.tr_matmul(&l_inv).symmetrized())
}

/// `ln |A|` for symmetric positive definite `A`.
pub fn spd_log_det(a: &Matrix) -> Result<f64, LinalgError> {
    let l = cholesky(a)?;
    Ok((0..a.rows()).map(|i| 2.0 * l[(i, i)].ln()).sum())
}

/// General square solve `A X = B` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix, LinalgError> {
    let n = a.require_square()?;
    assert_eq!(b.rows(), n);
    let mut m = a.clone();
    let mut x = b.clone();
    let scale = a.max_abs();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .unwrap_or(col);
        if m[(piv, col)].abs() <= 1e-13 * scale.max(f64::MIN_POSITIVE) {
            return Err(LinalgError::Singular);
        }
        if piv != col {
            for j in 0..n {
                m.data.swap(piv * n + j, col * n + j);
            }
            for j in 0..x.cols() {
                let c = x.cols();
                x.data.swap(piv * c + j, col * c + j);
            }
        }
        for i in col + 1..n {
            let f = m[(i, col)] / m[(col, col)];
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m[(i, j)] -= f * m[(col, j)];
            }
            for j in 0..x.cols() {
                x[(i, j)] -= f * x[(col, j)];
            }
        }
    }
    for c in 0..x.cols() {
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in i + 1..n {
                s -= m[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / m[(i, i)];
        }
    }
    Ok(x)
}

pub fn inverse(a: &Matrix) -> Result<Matrix, LinalgError> {
    solve(a, &Matrix::identity(a.rows()))
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues (unsorted) and eigenvectors as matrix columns.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix), LinalgError> {
    let n = a.require_square()?;
    let mut m = a.symmetrized();
    let mut v = Matrix::identity(n);
    let norm = m.frobenius().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * norm {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| m[(i, i)]).collect();
    Ok((values, v))
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

/// Solves `A v = λ B v` for symmetric PSD `A` and symmetric PD `B`.
///
/// Reduces through `B = L L'` to the standard problem on `L^{-1} A L^{-T}`
/// and back-transforms with `L^{-T}`, so the eigenvectors come out
/// B-orthonormal. Pairs are sorted by descending eigenvalue.
pub fn generalized_sym_eig(a: &Matrix, b: &Matrix) -> Result<Vec<EigenPair>, LinalgError> {
    let n = a.require_square()?;
    assert_eq!(b.rows(), n, "generalized_sym_eig dimension mismatch");
    let l = cholesky(b)?;
    let l_inv_a = solve_lower(&l, a);
    let c = solve_lower(&l, &l_inv_a.transpose()).symmetrized();
    let (values, y) = symmetric_eigen(&c)?;
    let lt = l.transpose();
    let vectors = solve_upper(&lt, &y);

    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut pairs: Vec<EigenPair> = values
        .into_iter()
        .enumerate()
        .map(|(i, value)| {
            // Round-off can push a zero eigenvalue of a PSD matrix slightly negative.
            let value = if value < 0.0 && value.abs() <= 1e-10 * scale { 0.0 } else { value };
            EigenPair { value, vector: vectors.column(i) }
        })
        .collect();
    pairs.sort_by(|x, y| y.value.total_cmp(&x.value));
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(matches!(Matrix::new(2, 2, vec![1.0; 3]), Err(LinalgError::ShapeMismatch { .. })));
        assert!(matches!(
            Matrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(LinalgError::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn ols_mean_of_y() {
        let x = Matrix::column_vector(&[1.0; 4]);
        let y = Matrix::column_vector(&[1.0, 2.0, 3.0, 4.0]);
        let fit = ols(&x, &y).unwrap();
        assert_abs_diff_eq!(fit.coefficients[(0, 0)], 2.5, epsilon = 1e-12);
        // E'E/T = (2.25 + 0.25 + 0.25 + 2.25) / 4
        assert_abs_diff_eq!(fit.residual_covariance[(0, 0)], 1.25, epsilon = 1e-12);
    }

    #[test]
    fn ols_identity_case() {
        // T must exceed p, so stack the identity over a zero block.
        let x = Matrix::identity(3);
        let y = Matrix::identity(3);
        assert!(matches!(ols(&x, &y), Err(LinalgError::Underdetermined { .. })));
        let x = Matrix::identity(3).vstack(&Matrix::from_rows(&[[1.0, 1.0, 1.0]]));
        let y = Matrix::identity(3).vstack(&Matrix::from_rows(&[[1.0, 1.0, 1.0]]));
        let fit = ols(&x, &y).unwrap();
        assert!(fit.coefficients.sub(&Matrix::identity(3)).max_abs() < 1e-12);
        assert!(fit.residuals.max_abs() < 1e-12);
    }

    #[test]
    fn ols_hand_solved_line() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]]);
        let y = Matrix::column_vector(&[1.0, 3.0, 5.0]);
        let fit = ols(&x, &y).unwrap();
        assert_abs_diff_eq!(fit.coefficients[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.coefficients[(1, 0)], 2.0, epsilon = 1e-12);
        // (X'X)^{-1} for [[3,3],[3,5]] is [[5,-3],[-3,3]]/6
        assert_abs_diff_eq!(fit.xtx_inv[(0, 0)], 5.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.xtx_inv[(0, 1)], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn ols_detects_collinearity() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [4.0, 8.0]]);
        let y = Matrix::column_vector(&[1.0, 2.0, 3.0, 5.0]);
        assert!(matches!(ols(&x, &y), Err(LinalgError::RankDeficient { column: 1 })));
    }

    #[test]
    fn ols_tolerates_badly_scaled_columns() {
        let rows: Vec<[f64; 3]> =
            (0..30).map(|i| [1.0, 1e5 * (i as f64).sin(), 1e-3 * (i as f64 * 0.3).cos()]).collect();
        let x = Matrix::from_rows(&rows);
        let y = Matrix::column_vector(&(0..30).map(|i| i as f64).collect::<Vec<_>>());
        let fit = ols(&x, &y).unwrap();
        let recon = x.matmul(&fit.coefficients).add(&fit.residuals);
        assert!(recon.sub(&y).max_abs() < 1e-10 * y.max_abs());
    }

    #[test]
    fn cholesky_cases() {
        assert_eq!(cholesky(&Matrix::identity(3)).unwrap(), Matrix::identity(3));
        let l = cholesky(&Matrix::from_rows(&[[4.0, 2.0], [2.0, 5.0]])).unwrap();
        let expected = Matrix::from_rows(&[[2.0, 0.0], [1.0, 2.0]]);
        assert!(l.sub(&expected).max_abs() < 1e-14);
        assert!(matches!(
            cholesky(&Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]])),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
        assert!(matches!(
            cholesky(&Matrix::from_rows(&[[1.0, 0.5], [0.2, 1.0]])),
            Err(LinalgError::NotSymmetric)
        ));
    }

    #[test]
    fn generalized_eigen_cases() {
        let pairs = generalized_sym_eig(&Matrix::identity(2), &Matrix::identity(2)).unwrap();
        assert_abs_diff_eq!(pairs[0].value, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pairs[1].value, 1.0, epsilon = 1e-14);

        let pairs = generalized_sym_eig(&Matrix::diag(&[3.0, 1.0]), &Matrix::identity(2)).unwrap();
        assert_abs_diff_eq!(pairs[0].value, 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pairs[1].value, 1.0, epsilon = 1e-14);
        let v0 = &pairs[0].vector;
        assert_abs_diff_eq!(v0[0].abs(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v0[1], 0.0, epsilon = 1e-14);

        let pairs = generalized_sym_eig(&Matrix::diag(&[2.0, 2.0]), &Matrix::diag(&[4.0, 1.0])).unwrap();
        // λᵢ = Aᵢᵢ / Bᵢᵢ, sorted descending
        assert_abs_diff_eq!(pairs[0].value, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pairs[1].value, 0.5, epsilon = 1e-14);

        assert!(matches!(
            generalized_sym_eig(&Matrix::identity(2), &Matrix::diag(&[1.0, -1.0])),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn solve_and_inverse() {
        let a = Matrix::from_rows(&[[0.0, 2.0], [3.0, 1.0]]);
        let inv = inverse(&a).unwrap();
        assert!(a.matmul(&inv).sub(&Matrix::identity(2)).max_abs() < 1e-14);
        assert!(matches!(inverse(&Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]])), Err(LinalgError::Singular)));
    }

    #[test]
    fn log_det_matches_product_of_diagonal() {
        let a = Matrix::diag(&[2.0, 3.0, 0.5]);
        assert_abs_diff_eq!(spd_log_det(&a).unwrap(), 3.0f64.ln(), epsilon = 1e-14);
    }
}
