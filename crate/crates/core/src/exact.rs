//! Exact universal Kriging.
//!
//! With `M = K + τ²I` factorised as `L Lᵀ`, the fixed effects are the GLS
//! estimate `β̂ = (XᵀM⁻¹X)⁻¹XᵀM⁻¹z`, computed as the least-squares solution of
//! the whitened system `L⁻¹X β ≈ L⁻¹z`, and the Kriging coefficients are
//! `c = M⁻¹(z − Xβ̂)`. Nothing is ever inverted explicitly.

use log::warn;
use rayon::prelude::*;

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::linalg::{
    cholesky, dot, solve_lower_in_place, solve_lower_matrix, solve_lower_transpose_in_place,
    Matrix, ThinQr,
};
use crate::scalar::Scalar;

/// Relative size of the diagonal ridge used when `M` is numerically singular.
pub const RIDGE_FACTOR: f64 = 1e-10;

/// Variances in `[-VARIANCE_TOL·σ², 0)` are rounding noise and clamp to zero.
pub const VARIANCE_TOL: f64 = 1e-10;

/// A fitted universal Kriging model.
#[derive(Debug, Clone)]
pub struct KrigingFit<T: Scalar> {
    model: CovarianceModel<T>,
    obs_locs: Vec<Point<T>>,
    z: Vec<T>,
    x: Matrix<T>,
    chol_m: Matrix<T>,
    whitened_x: Matrix<T>,
    qr: ThinQr<T>,
    beta_hat: Vec<T>,
    c: Vec<T>,
    ridge: T,
}

/// Single intercept column, the simplest covariate design.
pub fn intercept_column<T: Scalar>(n: usize) -> Matrix<T> {
    Matrix::from_fn(n, 1, |_, _| T::one())
}

fn factor_with_retry<T: Scalar>(mut m: Matrix<T>) -> Result<(Matrix<T>, T)> {
    match cholesky(&m) {
        Ok(l) => Ok((l, T::zero())),
        Err(first) => {
            let n = m.rows();
            let ridge = T::of(RIDGE_FACTOR) * m.trace() / T::of_usize(n);
            warn!("Cholesky of K + tau^2 I failed ({first}); retrying with ridge {ridge}");
            m.add_to_diagonal(ridge);
            let l = cholesky(&m).map_err(|e| {
                Error::numeric(format!("Cholesky failed even with ridge {ridge}: {e}"))
            })?;
            Ok((l, ridge))
        }
    }
}

impl<T: Scalar> KrigingFit<T> {
    /// Fits fixed effects and Kriging coefficients.
    pub fn fit(
        model: CovarianceModel<T>,
        obs_locs: &[Point<T>],
        z: &[T],
        x: &Matrix<T>,
    ) -> Result<Self> {
        let n = obs_locs.len();
        if n == 0 {
            return Err(Error::domain("no observations"));
        }
        if z.len() != n {
            return Err(Error::domain(format!(
                "{} observation values for {n} locations",
                z.len()
            )));
        }
        if x.rows() != n {
            return Err(Error::domain(format!(
                "covariate matrix has {} rows for {n} observations",
                x.rows()
            )));
        }
        let p = x.cols();
        if p < 1 || p > n {
            return Err(Error::domain(format!(
                "need 1 <= p <= n covariate columns, got p = {p}, n = {n}"
            )));
        }
        let mut m = model.cov_matrix_sym(obs_locs)?;
        m.add_to_diagonal(model.tau2());
        let (chol_m, ridge) = factor_with_retry(m)?;
        let whitened_x = solve_lower_matrix(&chol_m, x);
        let qr = ThinQr::new(&whitened_x)?;
        let mut fit = Self {
            model,
            obs_locs: obs_locs.to_vec(),
            z: z.to_vec(),
            x: x.clone(),
            chol_m,
            whitened_x,
            qr,
            beta_hat: Vec::new(),
            c: Vec::new(),
            ridge,
        };
        let (beta, c) = fit.coefficients_for(z)?;
        fit.beta_hat = beta;
        fit.c = c;
        Ok(fit)
    }

    /// GLS coefficients and Kriging weights for new data at the same
    /// locations, reusing the factorisation.
    pub fn coefficients_for(&self, z: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        if z.len() != self.n() {
            return Err(Error::domain(format!(
                "{} values supplied for {} observation locations",
                z.len(),
                self.n()
            )));
        }
        let mut wz = z.to_vec();
        solve_lower_in_place(&self.chol_m, &mut wz);
        let beta = self.qr.solve_least_squares(&wz);
        let fixed = self.x.matvec(&beta);
        let mut c: Vec<T> = z.iter().zip(&fixed).map(|(&zi, &fi)| zi - fi).collect();
        solve_lower_in_place(&self.chol_m, &mut c);
        solve_lower_transpose_in_place(&self.chol_m, &mut c);
        Ok((beta, c))
    }

    pub fn model(&self) -> &CovarianceModel<T> {
        &self.model
    }

    pub fn obs_locs(&self) -> &[Point<T>] {
        &self.obs_locs
    }

    pub fn z(&self) -> &[T] {
        &self.z
    }

    pub fn covariates(&self) -> &Matrix<T> {
        &self.x
    }

    /// Lower Cholesky factor of `K + τ²I` (plus ridge, if one was needed).
    pub fn chol_m(&self) -> &Matrix<T> {
        &self.chol_m
    }

    pub fn beta_hat(&self) -> &[T] {
        &self.beta_hat
    }

    pub fn c(&self) -> &[T] {
        &self.c
    }

    /// Diagonal ridge added to `M`; zero when the first factorisation worked.
    pub fn ridge(&self) -> T {
        self.ridge
    }

    pub fn n(&self) -> usize {
        self.obs_locs.len()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    fn check_targets(&self, targets: &[Point<T>], target_x: &Matrix<T>) -> Result<()> {
        if target_x.rows() != targets.len() {
            return Err(Error::domain(format!(
                "{} covariate rows for {} prediction targets",
                target_x.rows(),
                targets.len()
            )));
        }
        if target_x.cols() != self.p() {
            return Err(Error::domain(format!(
                "target covariates have {} columns, the fit used {}",
                target_x.cols(),
                self.p()
            )));
        }
        Ok(())
    }

    /// Exact prediction `X_j β̂ + Σ_i k(s_j, s_i) c_i`.
    pub fn predict(&self, targets: &[Point<T>], target_x: &Matrix<T>) -> Result<Vec<T>> {
        self.predict_with(&self.beta_hat, &self.c, targets, target_x)
    }

    /// Exact prediction for arbitrary coefficient vectors at this fit's
    /// observation locations.
    pub fn predict_with(
        &self,
        beta: &[T],
        c: &[T],
        targets: &[Point<T>],
        target_x: &Matrix<T>,
    ) -> Result<Vec<T>> {
        self.check_targets(targets, target_x)?;
        if beta.len() != self.p() || c.len() != self.n() {
            return Err(Error::domain("coefficient vectors do not match the fit"));
        }
        let model = &self.model;
        let obs = &self.obs_locs;
        Ok(targets
            .par_iter()
            .enumerate()
            .map(|(j, t)| {
                let spatial = obs
                    .iter()
                    .zip(c)
                    .fold(T::zero(), |acc, (o, &ci)| acc + model.cov(t, o) * ci);
                dot(target_x.row(j), beta) + spatial
            })
            .collect())
    }

    /// Universal Kriging standard errors of the noise-free field,
    /// `sqrt(σ² − kᵀM⁻¹k + uᵀ(XᵀM⁻¹X)⁻¹u)` with `u = x − XᵀM⁻¹k`.
    pub fn standard_errors(&self, targets: &[Point<T>], target_x: &Matrix<T>) -> Result<Vec<T>> {
        self.check_targets(targets, target_x)?;
        let sigma2 = self.model.sigma2();
        let tol = T::of(VARIANCE_TOL) * sigma2;
        targets
            .par_iter()
            .enumerate()
            .map(|(j, t)| {
                let mut w: Vec<T> = self.obs_locs.iter().map(|o| self.model.cov(t, o)).collect();
                solve_lower_in_place(&self.chol_m, &mut w);
                let xw = self.whitened_x.tr_matvec(&w);
                let u: Vec<T> = target_x.row(j).iter().zip(&xw).map(|(&a, &b)| a - b).collect();
                let y = self.qr.solve_rt(&u);
                let var = sigma2 - dot(&w, &w) + dot(&y, &y);
                if var < -tol {
                    return Err(Error::numeric(format!(
                        "negative prediction variance {var} at target {j}"
                    )));
                }
                Ok(var.max(T::zero()).sqrt())
            })
            .collect()
    }
}

/// Fits the exact universal Kriging model.
pub fn fit<T: Scalar>(
    model: CovarianceModel<T>,
    obs_locs: &[Point<T>],
    z: &[T],
    x: &Matrix<T>,
) -> Result<KrigingFit<T>> {
    KrigingFit::fit(model, obs_locs, z, x)
}

/// Exact predictions at `targets`.
pub fn predict_exact<T: Scalar>(
    fit: &KrigingFit<T>,
    targets: &[Point<T>],
    target_x: &Matrix<T>,
) -> Result<Vec<T>> {
    fit.predict(targets, target_x)
}

/// Exact prediction standard errors at `targets`.
pub fn kriging_se_exact<T: Scalar>(
    fit: &KrigingFit<T>,
    targets: &[Point<T>],
    target_x: &Matrix<T>,
) -> Result<Vec<T>> {
    fit.standard_errors(targets, target_x)
}
