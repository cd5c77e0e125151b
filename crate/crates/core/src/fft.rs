//! Two-dimensional complex FFT over row-major arrays, and the 2-3-smooth
//! sizes used for circulant embeddings.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Scalar;

/// Smallest integer `≥ n` whose only prime factors are 2 and 3.
pub fn next_smooth_23(n: usize) -> usize {
    let n = n.max(1);
    let mut best = usize::MAX;
    let mut p2 = 1usize;
    while p2 < best {
        let mut m = p2;
        while m < n {
            m *= 3;
        }
        best = best.min(m);
        if p2 >= n {
            break;
        }
        p2 *= 2;
    }
    best
}

/// Planned forward and inverse transforms for a `nx × ny` array stored
/// row-major with `x` fastest. Inverse transforms are unnormalised.
#[derive(Clone)]
pub struct Fft2d<T: Scalar> {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<T>>,
    inv_x: Arc<dyn Fft<T>>,
    fwd_y: Arc<dyn Fft<T>>,
    inv_y: Arc<dyn Fft<T>>,
}

impl<T: Scalar> fmt::Debug for Fft2d<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2d")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .finish()
    }
}

impl<T: Scalar> Fft2d<T> {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx,
            ny,
            fwd_x: planner.plan_fft_forward(nx),
            inv_x: planner.plan_fft_inverse(nx),
            fwd_y: planner.plan_fft_forward(ny),
            inv_y: planner.plan_fft_inverse(ny),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, buf: &mut [Complex<T>]) {
        self.run(buf, &self.fwd_x, &self.fwd_y);
    }

    pub fn inverse(&self, buf: &mut [Complex<T>]) {
        self.run(buf, &self.inv_x, &self.inv_y);
    }

    fn run(&self, buf: &mut [Complex<T>], along_x: &Arc<dyn Fft<T>>, along_y: &Arc<dyn Fft<T>>) {
        assert_eq!(buf.len(), self.len());
        along_x.process(buf);
        let mut cols = vec![Complex::new(T::zero(), T::zero()); self.len()];
        transpose(buf, &mut cols, self.nx, self.ny);
        along_y.process(&mut cols);
        transpose(&cols, buf, self.ny, self.nx);
    }
}

/// `dst[x * ny + y] = src[y * nx + x]`, blocked for cache reuse.
fn transpose<T: Copy>(src: &[T], dst: &mut [T], nx: usize, ny: usize) {
    const B: usize = 32;
    for yb in (0..ny).step_by(B) {
        for xb in (0..nx).step_by(B) {
            for y in yb..(yb + B).min(ny) {
                for x in xb..(xb + B).min(nx) {
                    dst[x * ny + y] = src[y * nx + x];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_sizes() {
        assert_eq!(next_smooth_23(1), 1);
        assert_eq!(next_smooth_23(5), 6);
        assert_eq!(next_smooth_23(7), 8);
        assert_eq!(next_smooth_23(39), 48);
        assert_eq!(next_smooth_23(199), 216);
        assert_eq!(next_smooth_23(713), 729);
        assert_eq!(next_smooth_23(1024), 1024);
        for n in 1..2000 {
            let m = next_smooth_23(n);
            assert!(m >= n);
            let mut r = m;
            while r % 2 == 0 {
                r /= 2;
            }
            while r % 3 == 0 {
                r /= 3;
            }
            assert_eq!(r, 1);
            // nothing smaller qualifies
            for k in n..m {
                let mut r = k;
                while r % 2 == 0 {
                    r /= 2;
                }
                while r % 3 == 0 {
                    r /= 3;
                }
                assert_ne!(r, 1, "{k} is smooth but {m} was returned for {n}");
            }
        }
    }

    #[test]
    fn round_trip_and_dft_agree() {
        let (nx, ny) = (6, 4);
        let fft = Fft2d::<f64>::new(nx, ny);
        let data: Vec<Complex<f64>> = (0..nx * ny)
            .map(|i| Complex::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut buf = data.clone();
        fft.forward(&mut buf);
        // direct DFT of one coefficient
        let (kx, ky) = (2usize, 3usize);
        let mut direct = Complex::new(0.0, 0.0);
        for y in 0..ny {
            for x in 0..nx {
                let ang = -2.0 * std::f64::consts::PI
                    * ((kx * x) as f64 / nx as f64 + (ky * y) as f64 / ny as f64);
                direct += data[y * nx + x] * Complex::new(ang.cos(), ang.sin());
            }
        }
        assert!((buf[ky * nx + kx] - direct).norm() < 1e-12);
        fft.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&data) {
            assert!((a / (nx * ny) as f64 - b).norm() < 1e-14);
        }
    }
}
