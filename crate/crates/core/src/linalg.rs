//! Small dense linear algebra: row-major matrices, Cholesky factorisation,
//! triangular solves and a thin Householder QR for least squares.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::domain(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Single-column matrix.
    pub fn column(values: &[T]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ x`.
    pub fn tr_matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * xi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(orow) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn add_to_diagonal(&mut self, v: T) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] = self[(i, i)] + v;
        }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = a`.
///
/// Only the lower triangle of `a` is read. A pivot that is not positive
/// relative to machine precision is reported with its index and value.
pub fn cholesky<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    if a.rows != a.cols {
        return Err(Error::domain(format!(
            "cholesky needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s = a[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
            if i == j {
                // pivots at rounding level mean the matrix is singular in
                // working precision
                if !(s > T::epsilon() * a[(i, i)].abs()) || !s.is_finite() {
                    return Err(Error::numeric(format!(
                        "matrix is not positive definite: pivot {i} is {s}"
                    )));
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solves `L x = b` in place for lower-triangular `L`.
pub fn solve_lower_in_place<T: Scalar>(l: &Matrix<T>, b: &mut [T]) {
    let n = l.rows;
    debug_assert_eq!(b.len(), n);
    for i in 0..n {
        let s = b[i] - dot(&l.row(i)[..i], &b[..i]);
        b[i] = s / l[(i, i)];
    }
}

/// Solves `Lᵀ x = b` in place for lower-triangular `L`.
pub fn solve_lower_transpose_in_place<T: Scalar>(l: &Matrix<T>, b: &mut [T]) {
    let n = l.rows;
    debug_assert_eq!(b.len(), n);
    for i in (0..n).rev() {
        let xi = b[i] / l[(i, i)];
        b[i] = xi;
        // column i of Lᵀ above the diagonal is row i of L left of it
        for (bk, &lik) in b[..i].iter_mut().zip(&l.row(i)[..i]) {
            *bk = *bk - lik * xi;
        }
    }
}

/// Solves `(L Lᵀ) x = b` given the Cholesky factor.
pub fn cholesky_solve<T: Scalar>(l: &Matrix<T>, b: &[T]) -> Vec<T> {
    let mut x = b.to_vec();
    solve_lower_in_place(l, &mut x);
    solve_lower_transpose_in_place(l, &mut x);
    x
}

/// `L⁻¹ B` column by column.
pub fn solve_lower_matrix<T: Scalar>(l: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let bt = b.transpose();
    let mut out = Matrix::zeros(b.cols, b.rows);
    for j in 0..b.cols {
        let mut col = bt.row(j).to_vec();
        solve_lower_in_place(l, &mut col);
        out.row_mut(j).copy_from_slice(&col);
    }
    out.transpose()
}

/// Explicit inverse from a Cholesky factor.
pub fn cholesky_inverse<T: Scalar>(l: &Matrix<T>) -> Matrix<T> {
    let n = l.rows;
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![T::zero(); n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = T::zero());
        e[j] = T::one();
        let col = cholesky_solve(l, &e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    inv
}

/// Thin Householder QR of a tall `n×p` matrix (`n ≥ p`).
#[derive(Debug, Clone)]
pub struct ThinQr<T> {
    /// Householder vectors below the diagonal, `R` on and above it.
    packed: Matrix<T>,
    diag_r: Vec<T>,
}

impl<T: Scalar> ThinQr<T> {
    /// Factorises `a`, failing if its columns are numerically dependent.
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        let (n, p) = (a.rows, a.cols);
        if n < p {
            return Err(Error::domain(format!(
                "least squares needs at least as many rows ({n}) as columns ({p})"
            )));
        }
        let mut qr = a.clone();
        let mut diag_r = vec![T::zero(); p];
        let col_scale: Vec<T> = (0..p)
            .map(|j| (0..n).map(|i| a[(i, j)] * a[(i, j)]).sum::<T>().sqrt())
            .collect();
        for k in 0..p {
            let norm = (k..n).map(|i| qr[(i, k)] * qr[(i, k)]).sum::<T>().sqrt();
            let rank_tol = T::of(1e-10) * col_scale[k].max(T::min_positive_value());
            if norm <= rank_tol {
                return Err(Error::domain(format!(
                    "covariate matrix is rank deficient at column {k}"
                )));
            }
            let alpha = if qr[(k, k)] > T::zero() { -norm } else { norm };
            for i in k..n {
                qr[(i, k)] = qr[(i, k)] / (-alpha);
            }
            qr[(k, k)] = qr[(k, k)] + T::one();
            // v = qr[k.., k], with v_k = 1 + |x_k|/norm, H = I - v vᵀ / v_k
            for j in k + 1..p {
                let s = (k..n).map(|i| qr[(i, k)] * qr[(i, j)]).sum::<T>() / qr[(k, k)];
                for i in k..n {
                    qr[(i, j)] = qr[(i, j)] - s * qr[(i, k)];
                }
            }
            diag_r[k] = alpha;
        }
        Ok(Self { packed: qr, diag_r })
    }

    pub fn ncols(&self) -> usize {
        self.packed.cols
    }

    /// Applies `Qᵀ` to `b` in place.
    fn apply_qt(&self, b: &mut [T]) {
        let (n, p) = (self.packed.rows, self.packed.cols);
        for k in 0..p {
            let s = (k..n).map(|i| self.packed[(i, k)] * b[i]).sum::<T>() / self.packed[(k, k)];
            for i in k..n {
                b[i] = b[i] - s * self.packed[(i, k)];
            }
        }
    }

    fn r(&self, i: usize, j: usize) -> T {
        if i == j {
            self.diag_r[i]
        } else {
            self.packed[(i, j)]
        }
    }

    /// `argmin_x ‖A x − b‖₂`.
    pub fn solve_least_squares(&self, b: &[T]) -> Vec<T> {
        let mut qtb = b.to_vec();
        self.apply_qt(&mut qtb);
        let p = self.ncols();
        let mut x = qtb[..p].to_vec();
        for i in (0..p).rev() {
            let s = (i + 1..p).map(|j| self.r(i, j) * x[j]).sum::<T>();
            x[i] = (x[i] - s) / self.r(i, i);
        }
        x
    }

    /// Solves `Rᵀ y = u`, so that `‖y‖² = uᵀ (AᵀA)⁻¹ u`.
    pub fn solve_rt(&self, u: &[T]) -> Vec<T> {
        let p = self.ncols();
        let mut y = u.to_vec();
        for i in 0..p {
            let s = (0..i).map(|j| self.r(j, i) * y[j]).sum::<T>();
            y[i] = (y[i] - s) / self.r(i, i);
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> Matrix<f64> {
        let b = Matrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 5) as f64 + if i == j { 1.0 } else { 0.0 });
        let mut a = b.matmul(&b.transpose());
        a.add_to_diagonal(0.5);
        a
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = spd(6);
        let l = cholesky(&a).unwrap();
        let r = l.matmul(&l.transpose());
        for i in 0..6 {
            for j in 0..6 {
                assert!((r[(i, j)] - a[(i, j)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cholesky_names_failing_pivot() {
        let a = Matrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        match cholesky(&a) {
            Err(Error::Numeric(msg)) => assert!(msg.contains("pivot 1"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn triangular_solves_invert() {
        let a = spd(5);
        let l = cholesky(&a).unwrap();
        let b = vec![1.0, -2.0, 0.5, 3.0, 0.0];
        let x = cholesky_solve(&l, &b);
        let ax = a.matvec(&x);
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
        let inv = cholesky_inverse(&l);
        let id = inv.matmul(&a);
        for i in 0..5 {
            for j in 0..5 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - e).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn qr_least_squares_fits_line() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let a = Matrix::from_fn(5, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let b: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let qr = ThinQr::new(&a).unwrap();
        let beta = qr.solve_least_squares(&b);
        assert!((beta[0] - 2.0).abs() < 1e-12);
        assert!((beta[1] + 0.5).abs() < 1e-12);
        // uᵀ(AᵀA)⁻¹u against the normal equations
        let ata = a.transpose().matmul(&a);
        let l = cholesky(&ata).unwrap();
        let u = [0.3, -1.2];
        let direct = dot(&u, &cholesky_solve(&l, &u));
        let y = qr.solve_rt(&u);
        assert!((dot(&y, &y) - direct).abs() < 1e-12);
    }

    #[test]
    fn qr_rejects_dependent_columns() {
        let a = Matrix::from_fn(4, 2, |i, _| i as f64);
        assert!(matches!(ThinQr::new(&a), Err(Error::Domain(_))));
    }
}
