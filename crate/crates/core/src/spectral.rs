//! 2-D FFT plumbing on row-major buffers.
//!
//! Spectra are kept in transposed layout (`kx` outer, `ky` inner), which
//! saves one transpose per direction. Every pointwise spectral multiplier
//! in the crate is built in that same layout.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::field::Grid;

pub struct Fft2 {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    work: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd_x = planner.plan_fft_forward(nx);
        let inv_x = planner.plan_fft_inverse(nx);
        let fwd_y = planner.plan_fft_forward(ny);
        let inv_y = planner.plan_fft_inverse(ny);
        let scratch_len = [&fwd_x, &inv_x, &fwd_y, &inv_y]
            .iter()
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Fft2 {
            nx,
            ny,
            fwd_x,
            inv_x,
            fwd_y,
            inv_y,
            scratch: vec![Complex64::default(); scratch_len],
            work: vec![Complex64::default(); nx * ny],
        }
    }

    pub fn for_grid(grid: &Grid) -> Self {
        Fft2::new(grid.nx, grid.ny)
    }

    /// Unnormalised forward transform; on return `data` holds the spectrum
    /// in `[kx][ky]` layout.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.nx * self.ny);
        self.fwd_x.process_with_scratch(data, &mut self.scratch);
        transpose(data, &mut self.work, self.ny, self.nx);
        self.fwd_y.process_with_scratch(&mut self.work, &mut self.scratch);
        data.copy_from_slice(&self.work);
    }

    /// Unnormalised inverse of [`Fft2::forward`]; the result is scaled by `nx·ny`.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.nx * self.ny);
        self.inv_y.process_with_scratch(data, &mut self.scratch);
        transpose(data, &mut self.work, self.nx, self.ny);
        self.inv_x.process_with_scratch(&mut self.work, &mut self.scratch);
        data.copy_from_slice(&self.work);
    }
}

/// `dst[c][r] = src[r][c]` for a `rows × cols` source.
pub(crate) fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const BLOCK: usize = 32;
    for rb in (0..rows).step_by(BLOCK) {
        for cb in (0..cols).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(rows) {
                for c in cb..(cb + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Linear (non-periodic) convolution of real `nx × ny` maps with a fixed
/// radially tabulated kernel, via zero padding to `2nx × 2ny`.
pub struct PaddedConvolver {
    nx: usize,
    ny: usize,
    px: usize,
    py: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    /// Kernel spectrum in `[kx][ky]` layout, pre-divided by `px·py`.
    kernel_hat: Vec<Complex64>,
    rows: Vec<Complex64>,
    cols: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl PaddedConvolver {
    /// `kernel(x, y)` is sampled at minimum-image offsets of the padded grid
    /// and multiplied by `weight` (typically the cell area times a coupling).
    pub fn new(grid: &Grid, weight: Complex64, kernel: impl Fn(f64, f64) -> Complex64) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let (px, py) = (2 * nx, 2 * ny);
        let mut planner = FftPlanner::new();
        let fwd_x = planner.plan_fft_forward(px);
        let inv_x = planner.plan_fft_inverse(px);
        let fwd_y = planner.plan_fft_forward(py);
        let inv_y = planner.plan_fft_inverse(py);
        let scratch_len = [&fwd_x, &inv_x, &fwd_y, &inv_y]
            .iter()
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        let offset = |i: usize, n: usize, d: f64| if i < n / 2 { i as f64 * d } else { (i as f64 - n as f64) * d };
        let mut raster: Vec<Complex64> = (0..py)
            .flat_map(|iy| {
                let y = offset(iy, py, grid.dy);
                let kernel = &kernel;
                (0..px).map(move |ix| kernel(offset(ix, px, grid.dx), y) * weight)
            })
            .collect();
        let mut scratch = vec![Complex64::default(); scratch_len];
        fwd_x.process_with_scratch(&mut raster, &mut scratch);
        let mut kernel_hat = vec![Complex64::default(); px * py];
        transpose(&raster, &mut kernel_hat, py, px);
        fwd_y.process_with_scratch(&mut kernel_hat, &mut scratch);
        let norm = 1.0 / (px * py) as f64;
        kernel_hat.iter_mut().for_each(|k| *k *= norm);
        PaddedConvolver {
            nx,
            ny,
            px,
            py,
            fwd_x,
            inv_x,
            fwd_y,
            inv_y,
            kernel_hat,
            rows: vec![Complex64::default(); px * py],
            cols: vec![Complex64::default(); px * py],
            scratch,
        }
    }

    /// Writes `(kernel ⊛ map)` sampled on the original grid into `out`.
    pub fn convolve(&mut self, map: &[f64], out: &mut [Complex64]) {
        let (nx, ny, px, py) = (self.nx, self.ny, self.px, self.py);
        debug_assert_eq!(map.len(), nx * ny);
        debug_assert_eq!(out.len(), nx * ny);
        // Rows iy >= ny are identically zero; only the first ny rows are transformed.
        let zero = Complex64::default();
        for iy in 0..ny {
            let row = &mut self.rows[iy * px..(iy + 1) * px];
            for ix in 0..nx {
                row[ix] = Complex64::new(map[iy * nx + ix], 0.0);
            }
            row[nx..].fill(zero);
        }
        self.fwd_x.process_with_scratch(&mut self.rows[..ny * px], &mut self.scratch);
        // cols[kx][iy], zero-padded in iy
        for kx in 0..px {
            let col = &mut self.cols[kx * py..(kx + 1) * py];
            for iy in 0..ny {
                col[iy] = self.rows[iy * px + kx];
            }
            col[ny..].fill(zero);
        }
        self.fwd_y.process_with_scratch(&mut self.cols, &mut self.scratch);
        for (c, k) in self.cols.iter_mut().zip(&self.kernel_hat) {
            *c *= k;
        }
        self.inv_y.process_with_scratch(&mut self.cols, &mut self.scratch);
        // back to rows, keeping only iy < ny
        for iy in 0..ny {
            for kx in 0..px {
                self.rows[iy * px + kx] = self.cols[kx * py + iy];
            }
        }
        self.inv_x.process_with_scratch(&mut self.rows[..ny * px], &mut self.scratch);
        for iy in 0..ny {
            out[iy * nx..(iy + 1) * nx].copy_from_slice(&self.rows[iy * px..iy * px + nx]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_round_trip() {
        let (nx, ny) = (8, 4);
        let mut fft = Fft2::new(nx, ny);
        let orig: Vec<Complex64> = (0..nx * ny).map(|i| Complex64::new(i as f64, (i * i) as f64 * 0.1)).collect();
        let mut d = orig.clone();
        fft.forward(&mut d);
        fft.inverse(&mut d);
        for (a, b) in d.iter().zip(&orig) {
            assert!((a / (nx * ny) as f64 - b).norm() < 1e-12);
        }
    }

    #[test]
    fn spectrum_layout_is_transposed() {
        // plane wave e^{i 2π x/nx · 1}: single peak at kx = 1, ky = 0
        let (nx, ny) = (8, 4);
        let mut fft = Fft2::new(nx, ny);
        let mut d: Vec<Complex64> = (0..ny)
            .flat_map(|_| (0..nx).map(|ix| Complex64::from_polar(1.0, std::f64::consts::TAU * ix as f64 / nx as f64)))
            .collect();
        fft.forward(&mut d);
        let peak = d.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap().0;
        assert_eq!(peak, ny); // index kx·ny + ky with kx = 1, ky = 0
    }

    #[test]
    fn transpose_rectangular() {
        let src: Vec<Complex64> = (0..6).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let mut dst = vec![Complex64::default(); 6];
        transpose(&src, &mut dst, 2, 3);
        let re: Vec<f64> = dst.iter().map(|c| c.re).collect();
        assert_eq!(re, vec![0.0, 3.0, 1.0, 4.0, 2.0, 5.0]);
    }
}
