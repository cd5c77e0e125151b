//! Rapid approximate Kriging prediction onto a regular grid.
//!
//! Every off-grid covariance `k(·, s_i)` is replaced by a combination of
//! grid-centred covariances over the `2L × 2L` block around `s_i`, with
//! weights `A_i = K_N⁻¹ k_i` that make the approximation exact on the block.
//! Prediction for a coefficient vector `c` then reduces to a sparse scatter
//! `c* = Aᵀc` followed by a discrete convolution of `c*` with the lag filter,
//! carried out on a circulant embedding with the FFT.
//!
//! Everything that depends only on locations (the factor of `K_N`, the rows
//! of `A`, the filter spectrum) lives in [`RapidSetup`] and is built once.

use std::cell::Cell;

use log::warn;
use num_complex::Complex;
use rayon::prelude::*;

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::fft::{next_smooth_23, Fft2d};
use crate::geom::Point;
use crate::gridding::PaddedGrid;
use crate::linalg::{cholesky, cholesky_inverse, cholesky_solve, dot, Matrix};
use crate::scalar::Scalar;

/// Ridge factor applied to `K_N` (times `σ²(2L)²`) when its Cholesky fails.
pub const KN_RIDGE_FACTOR: f64 = 1e-12;

/// Offsets within this many grid spacings of a node count as on the node.
pub const ON_NODE_TOL: f64 = 1e-10;

thread_local! {
    static SETUP_BUILDS: Cell<usize> = const { Cell::new(0) };
}

/// Number of [`RapidSetup`]s built on the calling thread so far.
pub fn setup_builds_on_this_thread() -> usize {
    SETUP_BUILDS.with(Cell::get)
}

/// Sparse `n × N` interpolation weights, stored row-compressed with exactly
/// `(2L)²` entries per row in canonical neighbourhood order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseWeights<T> {
    width: usize,
    cols: usize,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseWeights<T> {
    pub fn rows(&self) -> usize {
        self.indices.len() / self.width
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Nonzeros per row.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Column indices and weights of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = i * self.width..(i + 1) * self.width;
        (&self.indices[r.clone()], &self.values[r])
    }

    /// `Aᵀ c`, as a scatter-add over rows.
    pub fn transpose_apply(&self, c: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for (i, &ci) in c.iter().enumerate() {
            let (idx, w) = self.row(i);
            for (&q, &a) in idx.iter().zip(w) {
                out[q] = out[q] + a * ci;
            }
        }
        out
    }

    /// `A g` for a field `g` on the padded grid.
    pub fn apply(&self, g: &[T]) -> Vec<T> {
        (0..self.rows())
            .map(|i| {
                let (idx, w) = self.row(i);
                idx.iter().zip(w).fold(T::zero(), |acc, (&q, &a)| acc + a * g[q])
            })
            .collect()
    }
}

/// Factorised covariance of the canonical `2L × 2L` block, shared by every
/// neighbourhood because the covariance is stationary.
#[derive(Debug, Clone)]
pub struct BlockKernel<T: Scalar> {
    order: usize,
    spacing: (T, T),
    chol: Matrix<T>,
    ridge: T,
}

impl<T: Scalar> BlockKernel<T> {
    pub fn new(model: &CovarianceModel<T>, spacing: (T, T), order: usize) -> Result<Self> {
        if order < 1 {
            return Err(Error::domain("neighbour order must be at least 1"));
        }
        let side = 2 * order;
        let m = side * side;
        let node = |k: usize| (T::of_usize(k % side) * spacing.0, T::of_usize(k / side) * spacing.1);
        let mut kn = Matrix::zeros(m, m);
        for a in 0..m {
            let (xa, ya) = node(a);
            for b in 0..=a {
                let (xb, yb) = node(b);
                let v = model.cov_dist((xa - xb).hypot(ya - yb));
                kn[(a, b)] = v;
                kn[(b, a)] = v;
            }
        }
        let (chol, ridge) = match cholesky(&kn) {
            Ok(l) => (l, T::zero()),
            Err(first) => {
                let ridge = T::of(KN_RIDGE_FACTOR) * model.sigma2() * T::of_usize(m);
                warn!("neighbour covariance for L = {order} is numerically singular ({first}); adding ridge {ridge}");
                kn.add_to_diagonal(ridge);
                let l = cholesky(&kn).map_err(|e| {
                    Error::numeric(format!(
                        "neighbour covariance for L = {order} is not positive definite even with ridge {ridge} ({e}); \
                         reduce L or use a coarser grid"
                    ))
                })?;
                (l, ridge)
            }
        };
        Ok(Self {
            order,
            spacing,
            chol,
            ridge,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn size(&self) -> usize {
        self.chol.rows()
    }

    pub fn ridge(&self) -> T {
        self.ridge
    }

    /// Lower Cholesky factor of `K_N`.
    pub fn chol(&self) -> &Matrix<T> {
        &self.chol
    }

    /// Explicit `K_N⁻¹`.
    pub fn inverse(&self) -> Matrix<T> {
        cholesky_inverse(&self.chol)
    }

    /// Rebuilds `K_N` (without any ridge) for residual checks.
    pub fn matrix(&self, model: &CovarianceModel<T>) -> Matrix<T> {
        let side = 2 * self.order;
        let m = side * side;
        Matrix::from_fn(m, m, |a, b| {
            let dx = T::of((a % side) as f64 - (b % side) as f64) * self.spacing.0;
            let dy = T::of((a / side) as f64 - (b / side) as f64) * self.spacing.1;
            model.cov_dist(dx.hypot(dy))
        })
    }

    /// Covariances `k_i` between a location at `offset` inside the central
    /// box and the block nodes, in canonical order.
    pub fn cross_cov(&self, model: &CovarianceModel<T>, offset: (T, T)) -> Vec<T> {
        let side = 2 * self.order;
        let lo = T::of_usize(self.order - 1);
        (0..side * side)
            .map(|k| {
                let dx = (T::of_usize(k % side) - lo - offset.0) * self.spacing.0;
                let dy = (T::of_usize(k / side) - lo - offset.1) * self.spacing.1;
                model.cov_dist(dx.hypot(dy))
            })
            .collect()
    }

    /// Interpolation weights for a location at `offset` inside the central
    /// box, together with `k_i`.
    ///
    /// A location on a block node gets the exact unit vector for that node.
    pub fn weights(&self, model: &CovarianceModel<T>, offset: (T, T)) -> (Vec<T>, Vec<T>) {
        let k = self.cross_cov(model, offset);
        let side = 2 * self.order;
        let tol = T::of(ON_NODE_TOL);
        let snap = |d: T| {
            if d.abs() <= tol {
                Some(self.order - 1)
            } else if (T::one() - d).abs() <= tol {
                Some(self.order)
            } else {
                None
            }
        };
        let w = match (snap(offset.0), snap(offset.1)) {
            (Some(bx), Some(by)) => {
                let mut e = vec![T::zero(); side * side];
                e[by * side + bx] = T::one();
                e
            }
            _ => cholesky_solve(&self.chol, &k),
        };
        (w, k)
    }
}

/// Location-dependent precomputation for rapid prediction, reusable across
/// any number of coefficient vectors.
#[derive(Debug, Clone)]
pub struct RapidSetup<T: Scalar> {
    model: CovarianceModel<T>,
    grid: PaddedGrid<T>,
    block: BlockKernel<T>,
    weights: SparseWeights<T>,
    cond_var: Vec<T>,
    embed_dims: (usize, usize),
    filter_spectrum: Vec<Complex<T>>,
    fft: Fft2d<T>,
}

/// Circulant embedding size for an `m1 × m2` array: `2m − 1` per axis,
/// rounded up to a 2-3-smooth length.
pub fn embedding_dims(m1: usize, m2: usize) -> (usize, usize) {
    (next_smooth_23(2 * m1 - 1), next_smooth_23(2 * m2 - 1))
}

/// Lag filter `σ²φ(α·lag)` laid out on a `p1 × p2` torus, where the lag of
/// index `k` is its minimal wrapped displacement.
pub fn torus_filter<T: Scalar>(
    model: &CovarianceModel<T>,
    spacing: (T, T),
    dims: (usize, usize),
) -> Vec<T> {
    let (p1, p2) = dims;
    let mut out = Vec::with_capacity(p1 * p2);
    for y in 0..p2 {
        let ly = T::of_usize(y.min(p2 - y)) * spacing.1;
        for x in 0..p1 {
            let lx = T::of_usize(x.min(p1 - x)) * spacing.0;
            out.push(model.cov_dist(lx.hypot(ly)));
        }
    }
    out
}

impl<T: Scalar> RapidSetup<T> {
    /// Precomputes `K_N`, the rows of `A` and the filter spectrum.
    pub fn build(
        model: CovarianceModel<T>,
        grid: &PaddedGrid<T>,
        order: usize,
        obs_locs: &[Point<T>],
    ) -> Result<Self> {
        SETUP_BUILDS.with(|c| c.set(c.get() + 1));
        if order < 1 || order > grid.order() {
            return Err(Error::domain(format!(
                "neighbour order {order} does not match the grid padding (built for L = {})",
                grid.order()
            )));
        }
        let block = BlockKernel::new(&model, grid.spacing(), order)?;
        let width = block.size();

        let rows: Vec<(Vec<usize>, Vec<T>, T)> = obs_locs
            .par_iter()
            .map(|loc| {
                let nb = grid.neighborhood(loc, order)?;
                let (w, k) = block.weights(&model, nb.local_offset);
                let cv = model.sigma2() - dot(&k, &w);
                Ok((nb.indices, w, cv))
            })
            .collect::<Result<_>>()?;
        let mut indices = Vec::with_capacity(rows.len() * width);
        let mut values = Vec::with_capacity(rows.len() * width);
        let mut cond_var = Vec::with_capacity(rows.len());
        for (idx, w, cv) in rows {
            indices.extend(idx);
            values.extend(w);
            cond_var.push(cv);
        }
        let weights = SparseWeights {
            width,
            cols: grid.total_len(),
            indices,
            values,
        };

        let (m1, m2) = grid.total_dims();
        let embed_dims = embedding_dims(m1, m2);
        let fft = Fft2d::new(embed_dims.0, embed_dims.1);
        let mut filter_spectrum: Vec<Complex<T>> = torus_filter(&model, grid.spacing(), embed_dims)
            .into_iter()
            .map(|v| Complex::new(v, T::zero()))
            .collect();
        fft.forward(&mut filter_spectrum);

        Ok(Self {
            model,
            grid: grid.clone(),
            block,
            weights,
            cond_var,
            embed_dims,
            filter_spectrum,
            fft,
        })
    }

    pub fn model(&self) -> &CovarianceModel<T> {
        &self.model
    }

    pub fn grid(&self) -> &PaddedGrid<T> {
        &self.grid
    }

    pub fn order(&self) -> usize {
        self.block.order()
    }

    pub fn block(&self) -> &BlockKernel<T> {
        &self.block
    }

    /// Explicit `K_N⁻¹`.
    pub fn kn_inv(&self) -> Matrix<T> {
        self.block.inverse()
    }

    pub fn weights(&self) -> &SparseWeights<T> {
        &self.weights
    }

    /// `σ² − k_iᵀ K_N⁻¹ k_i` for each observation: the variance of the field at
    /// `s_i` left over after conditioning on its neighbourhood.
    pub fn conditional_variances(&self) -> &[T] {
        &self.cond_var
    }

    pub fn n_obs(&self) -> usize {
        self.weights.rows()
    }

    pub fn embed_dims(&self) -> (usize, usize) {
        self.embed_dims
    }

    pub fn filter_spectrum(&self) -> &[Complex<T>] {
        &self.filter_spectrum
    }

    /// `c* = Aᵀ c` on the padded grid.
    pub fn scatter(&self, c: &[T]) -> Result<Vec<T>> {
        if c.len() != self.n_obs() {
            return Err(Error::domain(format!(
                "coefficient vector has length {}, setup has {} observations",
                c.len(),
                self.n_obs()
            )));
        }
        Ok(self.weights.transpose_apply(c))
    }

    /// `Σ_q φ(s_j − s_q) c*_q` for every padded grid point `j`, by FFT.
    pub fn convolve(&self, c_star: &[T]) -> Result<Vec<T>> {
        let (m1, m2) = self.grid.total_dims();
        if c_star.len() != m1 * m2 {
            return Err(Error::domain(format!(
                "grid weights have length {}, padded grid has {}",
                c_star.len(),
                m1 * m2
            )));
        }
        let (p1, p2) = self.embed_dims;
        let zero = Complex::new(T::zero(), T::zero());
        let mut buf = vec![zero; p1 * p2];
        for iy in 0..m2 {
            for ix in 0..m1 {
                buf[iy * p1 + ix] = Complex::new(c_star[iy * m1 + ix], T::zero());
            }
        }
        self.fft.forward(&mut buf);
        for (b, f) in buf.iter_mut().zip(&self.filter_spectrum) {
            *b = *b * *f;
        }
        self.fft.inverse(&mut buf);
        let scale = T::one() / T::of_usize(p1 * p2);
        let mut out = Vec::with_capacity(m1 * m2);
        for iy in 0..m2 {
            for ix in 0..m1 {
                out.push(buf[iy * p1 + ix].re * scale);
            }
        }
        Ok(out)
    }

    /// Approximate spatial component `ĝ` on the interior grid.
    pub fn predict_spatial(&self, c: &[T]) -> Result<Vec<T>> {
        let padded = self.convolve(&self.scatter(c)?)?;
        Ok(self.interior(&padded))
    }

    /// Restricts a padded-grid field to the interior block.
    pub fn interior(&self, padded: &[T]) -> Vec<T> {
        let (m1, m2) = self.grid.interior_dims();
        let mut out = Vec::with_capacity(m1 * m2);
        for jy in 0..m2 {
            for jx in 0..m1 {
                out.push(padded[self.grid.interior_to_padded(jx, jy)]);
            }
        }
        out
    }

    /// Rapid prediction `X_j β̂ + ĝ_approx(s_j)` on the interior grid.
    pub fn predict(&self, c: &[T], beta_hat: &[T], grid_x: &Matrix<T>) -> Result<Vec<T>> {
        let n_grid = self.grid.interior_len();
        if grid_x.rows() != n_grid || grid_x.cols() != beta_hat.len() {
            return Err(Error::domain(format!(
                "grid covariates are {}x{}, expected {n_grid}x{}",
                grid_x.rows(),
                grid_x.cols(),
                beta_hat.len()
            )));
        }
        let mut g = self.predict_spatial(c)?;
        for (j, v) in g.iter_mut().enumerate() {
            *v = *v + dot(grid_x.row(j), beta_hat);
        }
        Ok(g)
    }
}

/// Builds the reusable setup for rapid prediction.
pub fn build_setup<T: Scalar>(
    model: CovarianceModel<T>,
    grid: &PaddedGrid<T>,
    order: usize,
    obs_locs: &[Point<T>],
) -> Result<RapidSetup<T>> {
    RapidSetup::build(model, grid, order, obs_locs)
}

/// Rapid grid prediction for coefficients `c` and fixed effects `β̂`.
pub fn predict_rapid<T: Scalar>(
    setup: &RapidSetup<T>,
    c: &[T],
    beta_hat: &[T],
    grid_x: &Matrix<T>,
) -> Result<Vec<T>> {
    setup.predict(c, beta_hat, grid_x)
}

/// Worst-case kernel approximation error over a set of evaluation points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelApproxError<T> {
    /// `sup |k_approx(s, s*) − k(s, s*)|`.
    pub sup: T,
    /// Evaluation point attaining the supremum.
    pub argmax: Point<T>,
}

/// `sup_s |k_approx(s, s*) − k(s, s*)|` over `eval_points`, where
/// `k_approx(·, s*)` interpolates `k(·, s*)` from the order-`order` block
/// around `s*`.
pub fn kernel_approx_error<T: Scalar>(
    model: &CovarianceModel<T>,
    grid: &PaddedGrid<T>,
    order: usize,
    s_star: &Point<T>,
    eval_points: &[Point<T>],
) -> Result<KernelApproxError<T>> {
    let block = BlockKernel::new(model, grid.spacing(), order)?;
    let nb = grid.neighborhood(s_star, order)?;
    let (w, _) = block.weights(model, nb.local_offset);
    let nodes: Vec<Point<T>> = nb.indices.iter().map(|&q| grid.point(q)).collect();
    let mut best = KernelApproxError {
        sup: T::zero(),
        argmax: *s_star,
    };
    for s in eval_points {
        let approx = nodes
            .iter()
            .zip(&w)
            .fold(T::zero(), |acc, (q, &a)| acc + model.cov(s, q) * a);
        let err = (approx - model.cov(s, s_star)).abs();
        if err > best.sup {
            best = KernelApproxError { sup: err, argmax: *s };
        }
    }
    Ok(best)
}
