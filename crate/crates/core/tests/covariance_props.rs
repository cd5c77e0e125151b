use nalgebra::DMatrix;
use proptest::prelude::*;
use rapidkrig_core::{matern_phi, range_from_correlation, CovarianceModel, Point};

fn points(coords: &[(f64, f64)]) -> Vec<Point<f64>> {
    coords.iter().map(|&(x, y)| Point::new(x, y)).collect()
}

#[test]
fn phi_is_nonincreasing_on_ladder() {
    for nu in [0.5, 1.0, 1.5, 2.5] {
        let mut prev = 1.0;
        for k in 0..=50 {
            let d = 0.1 * k as f64;
            let v = matern_phi(d, nu).unwrap();
            assert!(v <= prev + 1e-15, "nu={nu}, d={d}: {v} > {prev}");
            assert!(v > 0.0 && v <= 1.0);
            prev = v;
        }
    }
}

#[test]
fn bad_arguments_are_domain_errors() {
    assert!(matern_phi(1.0, 0.0).is_err());
    assert!(matern_phi(-1.0, 1.0).is_err());
    assert!(CovarianceModel::new(0.0, 1.0, 1.0, 0.0).is_err());
    assert!(CovarianceModel::new(1.0, 1.0, 1.0, -0.1).is_err());
    let m = CovarianceModel::new(1.0, 1.0, 1.0, 0.0).unwrap();
    assert!(m.cov_matrix(&[], &points(&[(0.0, 0.0)])).is_err());
}

#[test]
fn cov_examples() {
    let m = CovarianceModel::new(2.0, 1.0, 0.5, 0.0).unwrap();
    let s = Point::new(0.3, 0.4);
    assert_eq!(m.cov(&s, &s), 2.0);
    let one = CovarianceModel::new(1.0, 1.0, 0.5, 0.0).unwrap();
    let e = (-1.0f64).exp();
    assert!((one.cov(&Point::new(0.0, 0.0), &Point::new(0.6, 0.8)) - e).abs() < 1e-15);
    let two = CovarianceModel::new(1.0, 2.0, 0.5, 0.0).unwrap();
    assert!((two.cov(&Point::new(0.0, 0.0), &Point::new(0.3, 0.4)) - e).abs() < 1e-15);

    let k = one.cov_matrix_sym(&points(&[(0.1, 0.1), (0.1, 0.1)])).unwrap();
    assert_eq!(k[(0, 0)], 1.0);
    assert_eq!(k[(0, 1)], 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cov_matrix_is_symmetric_psd(
        coords in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..50),
        nu in prop::sample::select(vec![0.5, 1.0, 1.5, 2.5, 0.8]),
        alpha in 0.5f64..20.0,
        sigma2 in 0.1f64..5.0,
    ) {
        let pts = points(&coords);
        let m = CovarianceModel::new(sigma2, alpha, nu, 0.0).unwrap();
        let k = m.cov_matrix(&pts, &pts).unwrap();
        let n = pts.len();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((k[(i, j)] - k[(j, i)]).abs() <= 1e-14);
            }
        }
        let dm = DMatrix::from_fn(n, n, |i, j| k[(i, j)]);
        let min_eig = dm.symmetric_eigen().eigenvalues.min();
        prop_assert!(min_eig >= -1e-10 * sigma2, "min eigenvalue {}", min_eig);
    }

    #[test]
    fn range_round_trip(
        nu in prop::sample::select(vec![0.5, 1.0, 1.5, 2.5, 0.7, 3.2]),
        corr in 0.05f64..0.95,
        dist in 0.01f64..5.0,
    ) {
        let alpha = range_from_correlation(nu, corr, dist).unwrap();
        let back = matern_phi(alpha * dist, nu).unwrap();
        prop_assert!((back - corr).abs() < 1e-9, "{} vs {}", back, corr);
    }
}

#[test]
fn range_examples() {
    let a: f64 = range_from_correlation(0.5, (-1.0f64).exp(), 1.0).unwrap();
    assert!((a - 1.0).abs() < 1e-9);
    let a: f64 = range_from_correlation(0.5, 0.7, 0.2).unwrap();
    assert!((a - 1.78337471969366).abs() < 1e-9);
    let a: f64 = range_from_correlation(1.0, 0.7, 0.4).unwrap();
    assert!((matern_phi(0.4 * a, 1.0).unwrap() - 0.7).abs() < 1e-10);
}
