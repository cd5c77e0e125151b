use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rapidkrig_core::gridding::dense_candidates;
use rapidkrig_core::{
    intercept_column, kernel_approx_error, CovarianceModel, KrigingFit, PaddedGrid, Point, RapidSetup, Rect,
};

fn random_points(rng: &mut StdRng, n: usize) -> Vec<Point<f64>> {
    (0..n)
        .map(|_| Point::new(rng.random::<f64>(), rng.random::<f64>()))
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn fft_convolution_matches_direct_sum() {
    let mut rng = StdRng::seed_from_u64(10);
    let model = CovarianceModel::new(1.0, 4.0, 1.5, 0.0).unwrap();
    for (m1, m2) in [(4, 4), (5, 7), (8, 8), (11, 6), (16, 16)] {
        let obs = random_points(&mut rng, 3);
        let grid = PaddedGrid::build(Rect::unit(), (m1, m2), 2, &obs).unwrap();
        let setup = RapidSetup::build(model, &grid, 2, &obs).unwrap();
        let pts = grid.all_points();
        for _ in 0..5 {
            let c_star: Vec<f64> = (0..grid.total_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = setup.convolve(&c_star).unwrap();
            let direct: Vec<f64> = pts
                .iter()
                .map(|p| pts.iter().zip(&c_star).map(|(q, &c)| model.cov(p, q) * c).sum())
                .collect();
            let diff: Vec<f64> = fast.iter().zip(&direct).map(|(a, b)| a - b).collect();
            assert!(max_abs(&diff) <= 1e-10 * max_abs(&direct), "{m1}x{m2}");
        }
    }
}

#[test]
fn filter_spectrum_is_real() {
    let obs = [Point::new(0.21f64, 0.77)];
    let grid = PaddedGrid::build(Rect::unit(), (9, 13), 2, &obs).unwrap();
    let setup = RapidSetup::build(CovarianceModel::new(1.0, 3.0, 1.0, 0.0).unwrap(), &grid, 2, &obs).unwrap();
    let re = setup.filter_spectrum().iter().fold(0.0f64, |m, c| m.max(c.re.abs()));
    let im = setup.filter_spectrum().iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
    assert!(im < 1e-10 * re);
    let (p1, p2) = setup.embed_dims();
    assert!(p1 >= 2 * grid.total_dims().0 - 1 && p2 >= 2 * grid.total_dims().1 - 1);
}

#[test]
fn interpolation_condition_holds_on_every_row() {
    let mut rng = StdRng::seed_from_u64(11);
    let model = CovarianceModel::new(1.0, 3.0, 1.0, 0.0).unwrap();
    let obs = random_points(&mut rng, 5);
    let grid = PaddedGrid::build(Rect::unit(), (12, 12), 2, &obs).unwrap();
    let setup = RapidSetup::build(model, &grid, 2, &obs).unwrap();
    for (i, s) in obs.iter().enumerate() {
        let (idx, w) = setup.weights().row(i);
        let nodes: Vec<Point<f64>> = idx.iter().map(|&q| grid.point(q)).collect();
        for p in &nodes {
            let approx: f64 = nodes.iter().zip(w).map(|(q, a)| model.cov(p, q) * a).sum();
            assert!((approx - model.cov(p, s)).abs() < 1e-8);
        }
    }
}

#[test]
fn on_grid_observations_reproduce_exact_prediction() {
    let mut rng = StdRng::seed_from_u64(12);
    let base = PaddedGrid::build(Rect::unit(), (20, 20), 2, &[]).unwrap();
    let obs: Vec<Point<f64>> = (0..25)
        .map(|_| base.point(base.index(rng.random_range(0..20), rng.random_range(0..20))))
        .collect();
    let z: Vec<f64> = obs.iter().map(|p| (3.0 * p.x).sin() + p.y + 0.1 * rng.random::<f64>()).collect();
    for nu in [0.5, 1.5] {
        let model = CovarianceModel::new(2.0, 5.0, nu, 0.1).unwrap();
        let fit = KrigingFit::fit(model, &obs, &z, &intercept_column(obs.len())).unwrap();
        let grid = PaddedGrid::build(Rect::unit(), (20, 20), 2, &obs).unwrap();
        let setup = RapidSetup::build(model, &grid, 2, &obs).unwrap();
        let gx = intercept_column(grid.interior_len());
        let rapid = setup.predict(fit.c(), fit.beta_hat(), &gx).unwrap();
        let exact = fit.predict(&grid.interior_points(), &gx).unwrap();
        let diff: Vec<f64> = rapid.iter().zip(&exact).map(|(a, b)| a - b).collect();
        assert!(max_abs(&diff) < 1e-8 * max_abs(&exact), "nu={nu}: {}", max_abs(&diff));
    }
}

#[test]
fn prediction_is_linear_and_setup_is_reusable() {
    let mut rng = StdRng::seed_from_u64(13);
    let model = CovarianceModel::new(1.0, 4.0, 1.0, 0.0).unwrap();
    let obs = random_points(&mut rng, 30);
    let grid = PaddedGrid::build(Rect::unit(), (24, 18), 4, &obs).unwrap();
    let setup = RapidSetup::build(model, &grid, 4, &obs).unwrap();
    let gx = intercept_column(grid.interior_len());
    let c1: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
    let c2: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
    let a = -0.6;
    let c3: Vec<f64> = c1.iter().zip(&c2).map(|(u, v)| a * u + v).collect();
    let beta = [0.8];
    let p1 = setup.predict(&c1, &beta, &gx).unwrap();
    let p2 = setup.predict(&c2, &beta, &gx).unwrap();
    let p3 = setup.predict(&c3, &beta, &gx).unwrap();
    for j in 0..p1.len() {
        // the fixed part enters once on each side
        let lhs = p3[j] - beta[0];
        let rhs = a * (p1[j] - beta[0]) + (p2[j] - beta[0]);
        assert!((lhs - rhs).abs() < 1e-10);
    }

    let rebuilt = RapidSetup::build(model, &grid, 4, &obs).unwrap();
    assert_eq!(rebuilt.filter_spectrum(), setup.filter_spectrum());
    let q1 = rebuilt.predict(&c1, &beta, &gx).unwrap();
    let q2 = RapidSetup::build(model, &grid, 4, &obs).unwrap().predict(&c2, &beta, &gx).unwrap();
    for j in 0..p1.len() {
        assert!((q1[j] - p1[j]).abs() < 1e-12);
        assert!((q2[j] - p2[j]).abs() < 1e-12);
    }
}

#[test]
fn dimension_mismatches_are_domain_errors() {
    let obs = [Point::new(0.4, 0.4)];
    let grid = PaddedGrid::build(Rect::unit(), (8, 8), 2, &obs).unwrap();
    let setup = RapidSetup::build(CovarianceModel::new(1.0, 3.0, 1.0, 0.0).unwrap(), &grid, 2, &obs).unwrap();
    let gx = intercept_column(grid.interior_len());
    assert!(setup.predict(&[1.0, 2.0], &[0.0], &gx).is_err());
    assert!(setup.predict(&[1.0], &[0.0], &intercept_column(3)).is_err());
    assert!(setup.convolve(&[0.0; 3]).is_err());
}

#[test]
fn order_sweep_does_not_increase_error() {
    let mut rng = StdRng::seed_from_u64(14);
    let obs = random_points(&mut rng, 60);
    let z: Vec<f64> = obs.iter().map(|p| (4.0 * p.x).cos() * p.y + 0.2 * rng.random::<f64>()).collect();
    let model = CovarianceModel::with_range(1.0, 0.2, 1.0, 0.05).unwrap();
    let fit = KrigingFit::fit(model, &obs, &z, &intercept_column(60)).unwrap();
    let dims = (40, 40);
    let exact_grid = PaddedGrid::build(Rect::unit(), dims, 8, &obs).unwrap();
    let gx = intercept_column(exact_grid.interior_len());
    let exact = fit.predict(&exact_grid.interior_points(), &gx).unwrap();
    let mut last = f64::INFINITY;
    for l in [2, 4, 8] {
        let grid = PaddedGrid::build(Rect::unit(), dims, l, &obs).unwrap();
        let setup = RapidSetup::build(model, &grid, l, &obs).unwrap();
        let rapid = setup.predict(fit.c(), fit.beta_hat(), &gx).unwrap();
        let err = rapid.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum::<f64>() / exact.len() as f64;
        assert!(err <= last, "L={l}: {err} > {last}");
        last = err;
    }
}

#[test]
fn kernel_error_shrinks_with_refinement_and_smoothness() {
    let lambda = |nu: f64, m: usize| {
        let model = CovarianceModel::with_range(1.0, 0.25, nu, 0.0).unwrap();
        let grid = PaddedGrid::build(Rect::unit(), (m, m), 2, &[]).unwrap();
        let h = grid.spacing().0;
        // s* at the centre of the central box
        let c = grid.point(grid.index(m / 2, m / 2));
        let s_star = Point::new(c.x + 0.5 * h, c.y + 0.5 * h);
        let eval = dense_candidates(&Rect::unit(), 81);
        kernel_approx_error(&model, &grid, 2, &s_star, &eval).unwrap().sup
    };
    assert!(lambda(2.5, 40) < lambda(2.5, 20));
    assert!(lambda(1.5, 30) < lambda(0.5, 30));
}
