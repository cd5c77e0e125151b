//! Stationary isotropic Matérn covariance.
//!
//! The correlation is `φ(d) = d^ν K_ν(d) / (2^{ν−1} Γ(ν))` and the covariance
//! between two locations is `σ² φ(α ‖s − s'‖)`. The scale `α` multiplies the
//! distance; a quoted *range* `ρ` corresponds to `α = 1/ρ`.

use crate::bessel::{bessel_k_scaled, ln_gamma};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Scaled distances below this are treated as zero; `φ(0) = 1` exactly.
pub const ZERO_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Smoothness<T> {
    Half,
    ThreeHalves,
    FiveHalves,
    General { ln_norm: T },
}

impl<T: Scalar> Smoothness<T> {
    fn new(nu: T) -> Self {
        if nu == T::of(0.5) {
            Smoothness::Half
        } else if nu == T::of(1.5) {
            Smoothness::ThreeHalves
        } else if nu == T::of(2.5) {
            Smoothness::FiveHalves
        } else {
            Smoothness::General {
                ln_norm: ln_norm(nu),
            }
        }
    }
}

fn ln_norm<T: Scalar>(nu: T) -> T {
    (nu - T::one()) * T::LN_2() + ln_gamma(nu)
}

fn check_smoothness<T: Scalar>(nu: T) -> Result<()> {
    if !(nu > T::zero()) || !nu.is_finite() {
        return Err(Error::domain(format!("smoothness must be positive, got {nu}")));
    }
    Ok(())
}

fn check_distance<T: Scalar>(d: T) -> Result<()> {
    if !(d >= T::zero()) || !d.is_finite() {
        return Err(Error::domain(format!("distance must be nonnegative, got {d}")));
    }
    Ok(())
}

#[inline]
fn phi_general<T: Scalar>(d: T, nu: T, ln_norm: T) -> T {
    let v = (nu * d.ln() - d - ln_norm).exp() * bessel_k_scaled(nu, d);
    v.min(T::one())
}

#[inline]
fn phi_with<T: Scalar>(d: T, nu: T, kind: Smoothness<T>) -> T {
    if d < T::of(ZERO_DISTANCE) {
        return T::one();
    }
    match kind {
        Smoothness::Half => (-d).exp(),
        Smoothness::ThreeHalves => (T::one() + d) * (-d).exp(),
        Smoothness::FiveHalves => (T::one() + d + d * d / T::of(3.0)) * (-d).exp(),
        Smoothness::General { ln_norm } => phi_general(d, nu, ln_norm),
    }
}

/// Matérn correlation `φ(d)` at scaled distance `d` and smoothness `ν`.
///
/// Half-integer orders 1/2, 3/2 and 5/2 use their closed forms; every other
/// order goes through [`matern_phi_bessel`].
pub fn matern_phi<T: Scalar>(d: T, nu: T) -> Result<T> {
    check_smoothness(nu)?;
    check_distance(d)?;
    Ok(phi_with(d, nu, Smoothness::new(nu)))
}

/// Matérn correlation evaluated through the Bessel routine for every order.
pub fn matern_phi_bessel<T: Scalar>(d: T, nu: T) -> Result<T> {
    check_smoothness(nu)?;
    check_distance(d)?;
    if d < T::of(ZERO_DISTANCE) {
        return Ok(T::one());
    }
    Ok(phi_general(d, nu, ln_norm(nu)))
}

/// Matérn covariance parameters: process variance `σ²`, distance scale `α`,
/// smoothness `ν` and nugget variance `τ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceModel<T> {
    sigma2: T,
    alpha: T,
    nu: T,
    tau2: T,
    kind: Smoothness<T>,
}

impl<T: Scalar> CovarianceModel<T> {
    pub fn new(sigma2: T, alpha: T, nu: T, tau2: T) -> Result<Self> {
        if !(sigma2 > T::zero()) || !sigma2.is_finite() {
            return Err(Error::domain(format!("process variance must be positive, got {sigma2}")));
        }
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return Err(Error::domain(format!("scale must be positive, got {alpha}")));
        }
        check_smoothness(nu)?;
        if !(tau2 >= T::zero()) || !tau2.is_finite() {
            return Err(Error::domain(format!("nugget variance must be nonnegative, got {tau2}")));
        }
        Ok(Self {
            sigma2,
            alpha,
            nu,
            tau2,
            kind: Smoothness::new(nu),
        })
    }

    /// Same process with the scale given as a range `ρ = 1/α`.
    pub fn with_range(sigma2: T, range: T, nu: T, tau2: T) -> Result<Self> {
        if !(range > T::zero()) {
            return Err(Error::domain(format!("range must be positive, got {range}")));
        }
        Self::new(sigma2, T::one() / range, nu, tau2)
    }

    pub fn sigma2(&self) -> T {
        self.sigma2
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn nu(&self) -> T {
        self.nu
    }

    pub fn tau2(&self) -> T {
        self.tau2
    }

    pub fn with_tau2(&self, tau2: T) -> Result<Self> {
        Self::new(self.sigma2, self.alpha, self.nu, tau2)
    }

    pub fn with_sigma2(&self, sigma2: T) -> Result<Self> {
        Self::new(sigma2, self.alpha, self.nu, self.tau2)
    }

    /// Correlation at scaled distance `d = α r`.
    #[inline]
    pub fn phi(&self, d: T) -> T {
        phi_with(d, self.nu, self.kind)
    }

    /// Correlation at distance `r`.
    #[inline]
    pub fn correlation(&self, r: T) -> T {
        self.phi(self.alpha * r)
    }

    /// Covariance at distance `r`.
    #[inline]
    pub fn cov_dist(&self, r: T) -> T {
        self.sigma2 * self.correlation(r)
    }

    /// Noise-free covariance between two locations.
    #[inline]
    pub fn cov(&self, s: &Point<T>, s2: &Point<T>) -> T {
        self.cov_dist(s.dist(s2))
    }

    /// Covariance matrix with entry `(i, l) = cov(a[i], b[l])`.
    pub fn cov_matrix(&self, a: &[Point<T>], b: &[Point<T>]) -> Result<Matrix<T>> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::domain("covariance matrix needs nonempty location lists"));
        }
        Ok(Matrix::from_fn(a.len(), b.len(), |i, l| self.cov(&a[i], &b[l])))
    }

    /// Symmetric covariance matrix of one location set; only half the
    /// kernel evaluations are performed.
    pub fn cov_matrix_sym(&self, a: &[Point<T>]) -> Result<Matrix<T>> {
        if a.is_empty() {
            return Err(Error::domain("covariance matrix needs a nonempty location list"));
        }
        let n = a.len();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.sigma2;
            for l in 0..i {
                let v = self.cov(&a[i], &a[l]);
                m[(i, l)] = v;
                m[(l, i)] = v;
            }
        }
        Ok(m)
    }

    /// Distance at which the correlation drops to `target`.
    pub fn correlation_distance(&self, target: T) -> Result<T> {
        Ok(range_from_correlation(self.nu, target, T::one())? / self.alpha)
    }
}

/// Scale `α` such that `φ(α · dist) = target_corr`.
///
/// `φ` is decreasing in its argument, so the root is bracketed by doubling
/// and then refined by bisection.
pub fn range_from_correlation<T: Scalar>(nu: T, target_corr: T, dist: T) -> Result<T> {
    check_smoothness(nu)?;
    if !(target_corr > T::zero() && target_corr < T::one()) {
        return Err(Error::domain(format!(
            "target correlation must lie in (0, 1), got {target_corr}"
        )));
    }
    if !(dist > T::zero()) || !dist.is_finite() {
        return Err(Error::domain(format!("distance must be positive, got {dist}")));
    }
    let kind = Smoothness::new(nu);
    let f = |x: T| phi_with(x, nu, kind) - target_corr;

    let mut lo = T::zero();
    let mut hi = T::one();
    let mut doublings = 0;
    while f(hi) > T::zero() {
        lo = hi;
        hi = hi + hi;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::numeric(format!(
                "could not bracket correlation {target_corr} for smoothness {nu}"
            )));
        }
    }
    for _ in 0..200 {
        let mid = T::of(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = T::of(0.5) * (lo + hi);
    let tol = T::of(1e-10).max(T::of(100.0) * T::epsilon());
    let resid = f(x).abs();
    if !(resid <= tol) {
        return Err(Error::numeric(format!(
            "root finding for correlation {target_corr} stalled with residual {resid}"
        )));
    }
    Ok(x / dist)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_at_zero_is_one() {
        assert_eq!(matern_phi(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(matern_phi_bessel(0.0, 0.7).unwrap(), 1.0);
    }

    #[test]
    fn phi_closed_form_examples() {
        let e = (-1.0f64).exp();
        assert!((matern_phi(1.0, 0.5).unwrap() - e).abs() < 1e-15);
        assert!((matern_phi(1.0, 1.5).unwrap() - 2.0 * e).abs() < 1e-15);
        assert!((matern_phi_bessel(1.0f64, 0.5).unwrap() - 0.367_879_441_171_442_3).abs() < 1e-14);
        assert!((matern_phi_bessel(1.0f64, 1.5).unwrap() - 0.735_758_882_342_884_6).abs() < 1e-14);
    }

    #[test]
    fn bessel_path_matches_closed_forms() {
        for i in 1..=1000 {
            let d = i as f64 * 0.01;
            let e = (-d).exp();
            assert!((matern_phi_bessel(d, 0.5).unwrap() - e).abs() < 1e-12, "d={d}");
            assert!((matern_phi_bessel(d, 1.5).unwrap() - (1.0 + d) * e).abs() < 1e-12, "d={d}");
            let five = (1.0 + d + d * d / 3.0) * e;
            assert!((matern_phi_bessel(d, 2.5).unwrap() - five).abs() < 1e-12, "d={d}");
        }
    }

    #[test]
    fn phi_rejects_bad_inputs() {
        assert!(matches!(matern_phi(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(matern_phi(1.0, -1.0), Err(Error::Domain(_))));
        assert!(matches!(matern_phi(-0.1, 1.0), Err(Error::Domain(_))));
        assert!(matches!(matern_phi(f64::NAN, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn phi_is_nonincreasing() {
        for nu in [0.5, 1.0, 1.5, 2.5, 0.3, 3.7] {
            let mut prev = 1.0;
            for i in 0..=50 {
                let v = matern_phi(i as f64 * 0.1, nu).unwrap();
                assert!(v <= prev && v > 0.0, "nu={nu} i={i}");
                prev = v;
            }
        }
    }

    #[test]
    fn cov_examples() {
        let p = Point::new(0.3, 0.4);
        let m = CovarianceModel::new(2.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(m.cov(&p, &p), 2.0);
        let m = CovarianceModel::new(1.0, 1.0, 0.5, 0.0).unwrap();
        let q = Point::new(1.3, 0.4);
        assert!((m.cov(&p, &q) - (-1.0f64).exp()).abs() < 1e-15);
        let m = CovarianceModel::new(1.0, 2.0, 0.5, 0.0).unwrap();
        let q = Point::new(0.3, 0.9);
        assert!((m.cov(&p, &q) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(m.cov(&p, &q), m.cov(&q, &p));
    }

    #[test]
    fn model_validation() {
        assert!(CovarianceModel::new(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(CovarianceModel::new(1.0, 0.0, 1.0, 0.0).is_err());
        assert!(CovarianceModel::new(1.0, 1.0, 0.0, 0.0).is_err());
        assert!(CovarianceModel::new(1.0, 1.0, 1.0, -0.1).is_err());
        let m = CovarianceModel::with_range(1.0, 0.25, 1.0, 0.0).unwrap();
        assert_eq!(m.alpha(), 4.0);
    }

    #[test]
    fn cov_matrix_shapes() {
        let m = CovarianceModel::new(1.0, 3.0, 1.0, 0.0).unwrap();
        let p = [Point::new(0.1, 0.2)];
        let k = m.cov_matrix(&p, &p).unwrap();
        assert_eq!(k.as_slice(), &[1.0]);
        let q = [Point::new(0.1, 0.2), Point::new(0.5, 0.9)];
        let k = m.cov_matrix(&q, &q).unwrap();
        assert_eq!(k[(0, 0)], 1.0);
        assert_eq!(k[(1, 1)], 1.0);
        assert_eq!(k[(0, 1)], k[(1, 0)]);
        assert!(matches!(m.cov_matrix(&[], &q), Err(Error::Domain(_))));
    }

    #[test]
    fn range_examples() {
        let a = range_from_correlation(0.5, (-1.0f64).exp(), 1.0).unwrap();
        assert!((a - 1.0).abs() < 1e-9);
        let a = range_from_correlation(0.5, 0.7, 0.2).unwrap();
        assert!((a - (-(0.7f64).ln() / 0.2)).abs() < 1e-8);
        assert!((a - 1.783_374_719_693_66).abs() < 1e-8);
        let a = range_from_correlation(1.0, 0.7, 0.4).unwrap();
        assert!((matern_phi(0.4 * a, 1.0f64).unwrap() - 0.7).abs() < 1e-10);
        assert!(range_from_correlation(1.0, 1.0, 0.4).is_err());
        assert!(range_from_correlation(1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn f32_model_evaluates() {
        let m = CovarianceModel::<f32>::new(1.0, 1.0, 1.0, 0.0).unwrap();
        let v = m.cov_dist(1.0);
        assert!((v - 0.601_907_2 * 1.0).abs() < 1e-5);
    }
}
