//! Centered two-dimensional discrete Fourier transform in physical units.
//!
//! Forward transform uses the `e^{+2πi x·u}` kernel:
//! `V[k] = Δx² Σ_j I[j] e^{2πi x_j·u_k}`; the inverse uses `Δu²` and the
//! opposite sign. Since `Δx·Δu·N = 1`, the pair is unitary between the
//! pixel-weighted and cell-weighted L₂ spaces (Parseval holds with no extra
//! factor). Index `N/2` on each axis is the origin.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::Result;
use crate::freq_domain::Grid;

#[derive(Clone)]
pub struct SpectralTransform {
    grid: Grid,
    plus: Arc<dyn Fft<f64>>,
    minus: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralTransform").field("grid", &self.grid).finish()
    }
}

impl SpectralTransform {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        // rustfft's "inverse" direction carries the + sign.
        let plus = planner.plan_fft_inverse(grid.n());
        let minus = planner.plan_fft_forward(grid.n());
        Self { grid, plus, minus }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Image → spectrum.
    pub fn forward(&self, image: &Array2<Complex64>) -> Result<Array2<Complex64>> {
        self.grid.check_shape(image.dim())?;
        let dx = self.grid.pixel_size();
        Ok(self.apply(image, &self.plus, dx * dx))
    }

    /// Spectrum → image.
    pub fn inverse(&self, spectrum: &Array2<Complex64>) -> Result<Array2<Complex64>> {
        self.grid.check_shape(spectrum.dim())?;
        let du = self.grid.cell_size();
        Ok(self.apply(spectrum, &self.minus, du * du))
    }

    pub fn forward_real(&self, image: &Array2<f64>) -> Result<Array2<Complex64>> {
        self.forward(&image.mapv(|v| Complex64::new(v, 0.0)))
    }

    fn apply(&self, input: &Array2<Complex64>, fft: &Arc<dyn Fft<f64>>, scale: f64) -> Array2<Complex64> {
        let n = self.grid.n();
        let mut work = roll_half(input);
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(work.as_slice_mut().expect("standard layout"), &mut scratch);
        let mut work = work.reversed_axes().as_standard_layout().into_owned();
        fft.process_with_scratch(work.as_slice_mut().expect("standard layout"), &mut scratch);
        let work = work.reversed_axes();
        let mut out = Array2::zeros((n, n));
        let h = n / 2;
        for ((i, j), v) in out.indexed_iter_mut() {
            *v = work[((i + h) % n, (j + h) % n)] * scale;
        }
        out
    }
}

/// Cyclic shift by half the grid on both axes (fftshift for even sizes).
fn roll_half(a: &Array2<Complex64>) -> Array2<Complex64> {
    let (n, m) = a.dim();
    let (hn, hm) = (n / 2, m / 2);
    Array2::from_shape_fn((n, m), |(i, j)| a[((i + hn) % n, (j + hm) % m)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn direct_forward(grid: &Grid, image: &Array2<Complex64>) -> Array2<Complex64> {
        let n = grid.n();
        let dx = grid.pixel_size();
        Array2::from_shape_fn((n, n), |(k, l)| {
            let (u, v) = (grid.coord(k), grid.coord(l));
            let mut acc = Complex64::default();
            for ((i, j), f) in image.indexed_iter() {
                let phase = 2.0 * PI * (grid.image_coord(i) * u + grid.image_coord(j) * v);
                acc += f * Complex64::from_polar(1.0, phase);
            }
            acc * dx * dx
        })
    }

    fn test_image(n: usize) -> Array2<Complex64> {
        Array2::from_shape_fn((n, n), |(i, j)| {
            Complex64::new(((i * 7 + j * 3) % 11) as f64 - 4.0, ((i + 2 * j) % 5) as f64 * 0.25)
        })
    }

    #[test]
    fn matches_direct_summation() {
        let grid = Grid::new(8, 3.0).unwrap();
        let t = SpectralTransform::new(grid.clone());
        let img = test_image(8);
        let fast = t.forward(&img).unwrap();
        let slow = direct_forward(&grid, &img);
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let grid = Grid::new(16, 40.0).unwrap();
        let t = SpectralTransform::new(grid.clone());
        let img = test_image(16);
        let spec = t.forward(&img).unwrap();
        let back = t.inverse(&spec).unwrap();
        for (a, b) in img.iter().zip(back.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
        let e_img: f64 = img.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.pixel_area();
        let e_spec: f64 = spec.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.cell_area();
        assert!((e_img - e_spec).abs() <= 1e-12 * e_img);
    }

    #[test]
    fn constant_image_has_dc_spectrum() {
        let grid = Grid::new(16, 5.0).unwrap();
        let t = SpectralTransform::new(grid.clone());
        let img = Array2::from_elem((16, 16), Complex64::new(2.0, 0.0));
        let spec = t.forward(&img).unwrap();
        let dc = spec[(8, 8)];
        let flux = 2.0 * 256.0 * grid.pixel_area();
        assert!((dc.re - flux).abs() < 1e-12 * flux);
        for ((i, j), v) in spec.indexed_iter() {
            if (i, j) != (8, 8) {
                assert!(v.norm() < 1e-12 * flux);
            }
        }
    }

    #[test]
    fn shape_is_checked() {
        let t = SpectralTransform::new(Grid::new(8, 1.0).unwrap());
        assert!(t.forward(&Array2::zeros((4, 4))).is_err());
    }
}
