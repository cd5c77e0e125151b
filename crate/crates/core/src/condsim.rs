//! Fast conditional simulation on the prediction grid.
//!
//! A draw is `f̂(z) + g − ĝ(z_sim)`: an unconditional field `g` on the padded
//! grid (circulant embedding), simulated data `z_sim` at the observation
//! sites obtained by conditioning on each site's `2L × 2L` grid block, and a
//! Kriging correction that refits `z_sim` with the same covariates and reuses
//! both the exact factorisation and the rapid setup. By linearity the two
//! predictions collapse into one call with coefficients `(β̂ − β̂_sim, c − c_sim)`.

use log::warn;
use num_complex::Complex;
use rayon::prelude::*;

use crate::covariance::{range_from_correlation, CovarianceModel};
use crate::error::{Error, Result};
use crate::exact::KrigingFit;
use crate::fft::{next_smooth_23, Fft2d};
use crate::geom::Point;
use crate::gridding::PaddedGrid;
use crate::linalg::Matrix;
use crate::rapid::{embedding_dims, torus_filter, RapidSetup};
use crate::rng::{sub_seed, NormalStream, STREAM_GRID, STREAM_LOCAL, STREAM_NUGGET};
use crate::scalar::Scalar;

/// Eigenvalues below `−NEGATIVE_EIG_TOL · λ_max` mean the embedding is not a
/// valid covariance on the torus.
pub const NEGATIVE_EIG_TOL: f64 = 1e-8;

/// Lags beyond the distance where the correlation falls to this value are
/// treated as negligible when sizing the sampling torus.
pub const EMBED_CORR_CUTOFF: f64 = 1e-6;

/// The decay-based torus is capped at this multiple of the minimal embedding
/// per axis; the doubling fallback still applies on top.
pub const MAX_EMBED_GROWTH: usize = 4;

/// Conditional variances below `−COND_VAR_TOL · σ²` are a numerical error.
pub const COND_VAR_TOL: f64 = 1e-10;

/// Circulant-embedding sampler for stationary fields on a padded grid.
#[derive(Debug, Clone)]
pub struct UnconditionalSampler<T: Scalar> {
    dims: (usize, usize),
    embed_dims: (usize, usize),
    sqrt_eig: Vec<T>,
    fft: Fft2d<T>,
}

impl<T: Scalar> UnconditionalSampler<T> {
    /// Prepares the square-root spectrum for the padded extent of `grid`.
    ///
    /// The torus is at least the prediction embedding size and, up to
    /// [`MAX_EMBED_GROWTH`] times that, large enough for the kernel to decay
    /// to [`EMBED_CORR_CUTOFF`] within half a period. If the spectrum still
    /// has significantly negative eigenvalues it is doubled once per axis.
    pub fn new(model: &CovarianceModel<T>, grid: &PaddedGrid<T>) -> Result<Self> {
        let dims = grid.total_dims();
        let mut embed = sampling_torus(model, grid);
        let mut attempt = 0;
        loop {
            let fft = Fft2d::new(embed.0, embed.1);
            let mut spec: Vec<Complex<T>> = torus_filter(model, grid.spacing(), embed)
                .into_iter()
                .map(|v| Complex::new(v, T::zero()))
                .collect();
            fft.forward(&mut spec);
            let max = spec.iter().map(|c| c.re).fold(T::zero(), T::max);
            let min = spec.iter().map(|c| c.re).fold(T::infinity(), T::min);
            if min < -T::of(NEGATIVE_EIG_TOL) * max {
                if attempt == 0 {
                    warn!(
                        "circulant embedding {}x{} has eigenvalue {min} (max {max}); doubling the torus",
                        embed.0, embed.1
                    );
                    embed = (2 * embed.0, 2 * embed.1);
                    attempt += 1;
                    continue;
                }
                return Err(Error::numeric(format!(
                    "circulant embedding {}x{} is not nonnegative definite: most negative eigenvalue {min} (max {max})",
                    embed.0, embed.1
                )));
            }
            let scale = T::one() / T::of_usize(embed.0 * embed.1);
            let sqrt_eig = spec
                .iter()
                .map(|c| (c.re.max(T::zero()) * scale).sqrt())
                .collect();
            return Ok(Self {
                dims,
                embed_dims: embed,
                sqrt_eig,
                fft,
            });
        }
    }

    /// Padded grid dimensions of the fields produced.
    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn embed_dims(&self) -> (usize, usize) {
        self.embed_dims
    }

    /// One mean-zero field on the padded grid, row-major with `x` fastest.
    pub fn sample(&self, seed: u64) -> Vec<T> {
        let mut normals = NormalStream::new(seed, STREAM_GRID);
        let mut buf: Vec<Complex<T>> = self
            .sqrt_eig
            .iter()
            .map(|&s| {
                let re = normals.next::<T>();
                let im = normals.next::<T>();
                Complex::new(re * s, im * s)
            })
            .collect();
        self.fft.forward(&mut buf);
        let (m1, m2) = self.dims;
        let p1 = self.embed_dims.0;
        let mut out = Vec::with_capacity(m1 * m2);
        for iy in 0..m2 {
            out.extend(buf[iy * p1..iy * p1 + m1].iter().map(|c| c.re));
        }
        out
    }
}

fn sampling_torus<T: Scalar>(model: &CovarianceModel<T>, grid: &PaddedGrid<T>) -> (usize, usize) {
    let (m1, m2) = grid.total_dims();
    let min = embedding_dims(m1, m2);
    let reach = range_from_correlation(model.nu(), T::of(EMBED_CORR_CUTOFF), T::one())
        .map(|x| x / model.alpha())
        .ok();
    let (h1, h2) = grid.spacing();
    let axis = |min: usize, h: T| {
        let want = match reach {
            Some(r) => 2 * (r / h).ceil().to_usize().unwrap_or(usize::MAX / 4).min(usize::MAX / 4) + 1,
            None => min,
        };
        next_smooth_23(want.clamp(min, MAX_EMBED_GROWTH * min))
    };
    (axis(min.0, h1), axis(min.1, h2))
}

/// One unconditional draw on the padded grid.
pub fn sim_unconditional_grid<T: Scalar>(
    model: &CovarianceModel<T>,
    grid: &PaddedGrid<T>,
    seed: u64,
) -> Result<Vec<T>> {
    Ok(UnconditionalSampler::new(model, grid)?.sample(seed))
}

/// Simulated process values and data at the observation sites.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsSimulation<T> {
    /// Noise-free field values `g_sim(s_i)`.
    pub field: Vec<T>,
    /// Simulated data `g_sim(s_i) + ε_i`.
    pub data: Vec<T>,
}

/// Draws the field at each observation site given the grid field on its
/// neighbourhood, then adds measurement error.
pub fn sim_obs_local<T: Scalar>(
    setup: &RapidSetup<T>,
    grid_field: &[T],
    seed: u64,
) -> Result<ObsSimulation<T>> {
    if grid_field.len() != setup.grid().total_len() {
        return Err(Error::domain(format!(
            "grid field has length {}, padded grid has {}",
            grid_field.len(),
            setup.grid().total_len()
        )));
    }
    let model = setup.model();
    let tol = T::of(COND_VAR_TOL) * model.sigma2();
    let nugget_sd = model.tau2().sqrt();
    let mut local = NormalStream::new(seed, STREAM_LOCAL);
    let mut nugget = NormalStream::new(seed, STREAM_NUGGET);
    let mean = setup.weights().apply(grid_field);
    let mut field = Vec::with_capacity(mean.len());
    let mut data = Vec::with_capacity(mean.len());
    for (i, (&m, &v)) in mean.iter().zip(setup.conditional_variances()).enumerate() {
        if v < -tol {
            return Err(Error::numeric(format!(
                "negative conditional variance {v} at observation {i}"
            )));
        }
        let g = m + v.max(T::zero()).sqrt() * local.next::<T>();
        field.push(g);
        data.push(g + nugget_sd * nugget.next::<T>());
    }
    Ok(ObsSimulation { field, data })
}

/// How the Kriging correction is evaluated on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predictor {
    Rapid,
    Exact,
}

/// Everything needed to produce conditional draws for one data set.
pub struct ConditionalSimulator<'a, T: Scalar> {
    fit: &'a KrigingFit<T>,
    setup: &'a RapidSetup<T>,
    grid_x: &'a Matrix<T>,
    sampler: UnconditionalSampler<T>,
    predictor: Predictor,
    grid_points: Vec<Point<T>>,
}

impl<'a, T: Scalar> ConditionalSimulator<'a, T> {
    pub fn new(
        fit: &'a KrigingFit<T>,
        setup: &'a RapidSetup<T>,
        grid_x: &'a Matrix<T>,
        predictor: Predictor,
    ) -> Result<Self> {
        if fit.n() != setup.n_obs() {
            return Err(Error::domain(format!(
                "fit has {} observations but the setup has {}",
                fit.n(),
                setup.n_obs()
            )));
        }
        if fit.model() != setup.model() {
            return Err(Error::domain("fit and setup use different covariance models"));
        }
        let grid = setup.grid();
        if grid_x.rows() != grid.interior_len() || grid_x.cols() != fit.p() {
            return Err(Error::domain(format!(
                "grid covariates are {}x{}, expected {}x{}",
                grid_x.rows(),
                grid_x.cols(),
                grid.interior_len(),
                fit.p()
            )));
        }
        let grid_points = match predictor {
            Predictor::Exact => grid.interior_points(),
            Predictor::Rapid => Vec::new(),
        };
        Ok(Self {
            fit,
            setup,
            grid_x,
            sampler: UnconditionalSampler::new(setup.model(), grid)?,
            predictor,
            grid_points,
        })
    }

    pub fn sampler(&self) -> &UnconditionalSampler<T> {
        &self.sampler
    }

    /// One conditional draw on the interior grid.
    pub fn draw(&self, seed: u64) -> Result<Vec<T>> {
        let g = self.sampler.sample(seed);
        let obs = sim_obs_local(self.setup, &g, seed)?;
        let (beta_sim, c_sim) = self.fit.coefficients_for(&obs.data)?;
        let beta: Vec<T> = self
            .fit
            .beta_hat()
            .iter()
            .zip(&beta_sim)
            .map(|(&a, &b)| a - b)
            .collect();
        let c: Vec<T> = self.fit.c().iter().zip(&c_sim).map(|(&a, &b)| a - b).collect();
        let mut out = match self.predictor {
            Predictor::Rapid => self.setup.predict(&c, &beta, self.grid_x)?,
            Predictor::Exact => self.fit.predict_with(&beta, &c, &self.grid_points, self.grid_x)?,
        };
        for (o, gi) in out.iter_mut().zip(self.setup.interior(&g)) {
            *o = *o + gi;
        }
        Ok(out)
    }
}

/// One conditional draw using the rapid predictor.
pub fn conditional_draw<T: Scalar>(
    fit: &KrigingFit<T>,
    setup: &RapidSetup<T>,
    grid_x: &Matrix<T>,
    seed: u64,
) -> Result<Vec<T>> {
    ConditionalSimulator::new(fit, setup, grid_x, Predictor::Rapid)?.draw(seed)
}

/// A set of conditional draws with pointwise summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<T> {
    pub draws: Vec<Vec<T>>,
    pub seed: u64,
    pub n_draws: usize,
    /// Interior grid dimensions of each draw.
    pub dims: (usize, usize),
    pub mean_field: Vec<T>,
    /// Pointwise sample standard deviation (`n − 1` denominator).
    pub empirical_se: Vec<T>,
}

impl<T: Scalar> Ensemble<T> {
    /// Assembles summaries from draws in index order.
    pub fn from_draws(draws: Vec<Vec<T>>, seed: u64, dims: (usize, usize)) -> Result<Self> {
        let n = draws.len();
        if n < 2 {
            return Err(Error::domain("an ensemble needs at least two draws"));
        }
        let len = draws[0].len();
        let inv_n = T::one() / T::of_usize(n);
        let mut mean = vec![T::zero(); len];
        for d in &draws {
            for (m, &v) in mean.iter_mut().zip(d) {
                *m = *m + v;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m * inv_n);
        let mut ss = vec![T::zero(); len];
        for d in &draws {
            for ((s, &v), &m) in ss.iter_mut().zip(d).zip(&mean) {
                *s = *s + (v - m) * (v - m);
            }
        }
        let inv_dof = T::one() / T::of_usize(n - 1);
        let se = ss.into_iter().map(|s| (s * inv_dof).sqrt()).collect();
        Ok(Self {
            draws,
            seed,
            n_draws: n,
            dims,
            mean_field: mean,
            empirical_se: se,
        })
    }
}

/// `n_draws` conditional draws; draw `j` uses sub-seed `seed ^ splitmix64(j)`.
pub fn generate_ensemble<T: Scalar>(
    sim: &ConditionalSimulator<'_, T>,
    n_draws: usize,
    seed: u64,
) -> Result<Ensemble<T>> {
    if n_draws < 2 {
        return Err(Error::domain("an ensemble needs at least two draws"));
    }
    let draws = (0..n_draws as u64)
        .into_par_iter()
        .map(|j| sim.draw(sub_seed(seed, j)))
        .collect::<Result<Vec<_>>>()?;
    Ensemble::from_draws(draws, seed, sim.setup.grid().interior_dims())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::intercept_column;
    use crate::geom::Rect;

    #[test]
    fn on_node_site_copies_grid_value() {
        let model = CovarianceModel::new(1.0, 4.0, 1.5, 0.0).unwrap();
        let obs = [Point::new(0.5, 0.5), Point::new(0.27, 0.61)];
        let grid = PaddedGrid::build(Rect::unit(), (11, 11), 2, &obs).unwrap();
        let setup = RapidSetup::build(model, &grid, 2, &obs).unwrap();
        let g = sim_unconditional_grid(&model, &grid, 3).unwrap();
        let sim = sim_obs_local(&setup, &g, 3).unwrap();
        assert_eq!(sim.field[0], g[grid.interior_to_padded(5, 5)]);
        assert_eq!(sim.data, sim.field);
    }

    #[test]
    fn ensemble_is_deterministic() {
        let model = CovarianceModel::new(1.0, 4.0, 1.0, 0.05).unwrap();
        let obs: Vec<_> = (0..6)
            .map(|i| Point::new(0.1 + 0.13 * i as f64, 0.8 - 0.11 * i as f64))
            .collect();
        let z: Vec<f64> = (0..6).map(|i| (i as f64).sin()).collect();
        let x = intercept_column(6);
        let fit = KrigingFit::fit(model, &obs, &z, &x).unwrap();
        let grid = PaddedGrid::build(Rect::unit(), (10, 10), 2, &obs).unwrap();
        let setup = RapidSetup::build(model, &grid, 2, &obs).unwrap();
        let gx = intercept_column(grid.interior_len());
        let sim = ConditionalSimulator::new(&fit, &setup, &gx, Predictor::Rapid).unwrap();
        let a = generate_ensemble(&sim, 3, 11).unwrap();
        let b = generate_ensemble(&sim, 3, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.draws[0], a.draws[1]);
        assert!(a.empirical_se.iter().all(|&s| s >= 0.0));
        assert!(generate_ensemble(&sim, 1, 11).is_err());
    }

    #[test]
    fn exact_and_rapid_corrections_agree_on_grid_nodes() {
        let model = CovarianceModel::new(1.0, 4.0, 0.5, 0.1).unwrap();
        let grid0 = PaddedGrid::build(Rect::unit(), (9, 9), 2, &[]).unwrap();
        let obs: Vec<_> = [(2, 3), (5, 5), (7, 1), (4, 8)]
            .iter()
            .map(|&(i, j)| grid0.point(grid0.index(i, j)))
            .collect();
        let z = [0.3f64, -1.0, 0.7, 0.1];
        let x = intercept_column(4);
        let fit = KrigingFit::fit(model, &obs, &z, &x).unwrap();
        let grid = PaddedGrid::build(Rect::unit(), (9, 9), 2, &obs).unwrap();
        let setup = RapidSetup::build(model, &grid, 2, &obs).unwrap();
        let gx = intercept_column(grid.interior_len());
        let fast = ConditionalSimulator::new(&fit, &setup, &gx, Predictor::Rapid).unwrap();
        let slow = ConditionalSimulator::new(&fit, &setup, &gx, Predictor::Exact).unwrap();
        let (a, b) = (fast.draw(5).unwrap(), slow.draw(5).unwrap());
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
    }
}
