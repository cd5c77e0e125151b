//! Exact universal Kriging, rapid FFT-based prediction onto regular grids,
//! and fast conditional simulation, over a stationary Matérn covariance.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `*64` and
//! `*32` aliases below name the common instantiations.

pub mod bessel;
pub mod condsim;
pub mod covariance;
pub mod error;
pub mod exact;
pub mod fft;
pub mod geom;
pub mod gridding;
pub mod linalg;
pub mod rapid;
pub mod rng;
pub mod scalar;

pub use condsim::{
    conditional_draw, generate_ensemble, sim_obs_local, sim_unconditional_grid,
    ConditionalSimulator, Ensemble, Predictor, UnconditionalSampler,
};
pub use covariance::{matern_phi, matern_phi_bessel, range_from_correlation, CovarianceModel};
pub use error::{Error, Result};
pub use exact::{intercept_column, kriging_se_exact, predict_exact, KrigingFit};
pub use geom::{Point, Rect};
pub use gridding::{Neighborhood, PaddedGrid, Padding};
pub use linalg::Matrix;
pub use rapid::{build_setup, kernel_approx_error, predict_rapid, RapidSetup};
pub use scalar::Scalar;

pub type CovarianceModel64 = CovarianceModel<f64>;
pub type PaddedGrid64 = PaddedGrid<f64>;
pub type KrigingFit64 = KrigingFit<f64>;
pub type RapidSetup64 = RapidSetup<f64>;
pub type Ensemble64 = Ensemble<f64>;
pub type Point64 = Point<f64>;
pub type Matrix64 = Matrix<f64>;

pub type CovarianceModel32 = CovarianceModel<f32>;
pub type PaddedGrid32 = PaddedGrid<f32>;
pub type KrigingFit32 = KrigingFit<f32>;
pub type RapidSetup32 = RapidSetup<f32>;
pub type Ensemble32 = Ensemble<f32>;
pub type Point32 = Point<f32>;
pub type Matrix32 = Matrix<f32>;
