//! Stability and beam diagnostics.
//!
//! All fields are assumed to be centred on the origin; the RMS radius is
//! measured about `(0, 0)` rather than the beam centroid.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ComplexField;

/// One row of a run's metric series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecord {
    /// Propagation distance, µm.
    pub z: f64,
    /// Fidelity against the input field.
    pub j: f64,
    pub power: f64,
    /// max|U|²/Ω_p0².
    pub peak_intensity: f64,
    /// µm.
    pub rms_radius: f64,
}

impl RunRecord {
    pub const CSV_HEADER: &'static str = "z_um,J,power,peak_over_Ip0,rms_radius_um";
}

/// Overlap fidelity |∫U·conj(U₀)|² / (∫|U|² ∫|U₀|²), bounded to [0, 1].
pub fn fidelity(u: &ComplexField, u0: &ComplexField) -> Result<f64> {
    if u.grid != u0.grid {
        return Err(Error::Mismatch("fidelity of fields on different grids".into()));
    }
    let mut overlap = Complex64::new(0.0, 0.0);
    let mut pu = 0.0;
    let mut p0 = 0.0;
    for (a, b) in u.data.iter().zip(&u0.data) {
        overlap += a * b.conj();
        pu += a.norm_sqr();
        p0 += b.norm_sqr();
    }
    if pu == 0.0 || p0 == 0.0 {
        return Err(Error::ZeroPower);
    }
    Ok((overlap.norm_sqr() / (pu * p0)).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamStats {
    pub power: f64,
    pub peak_intensity: f64,
    pub rms_radius: f64,
}

pub fn beam_stats(u: &ComplexField, omega_p0: f64) -> Result<BeamStats> {
    let grid = &u.grid;
    let mut sum = 0.0;
    let mut moment = 0.0;
    let mut peak: f64 = 0.0;
    for ((x, y), v) in grid.coords().zip(&u.data) {
        let i = v.norm_sqr();
        sum += i;
        moment += (x * x + y * y) * i;
        peak = peak.max(i);
    }
    if sum == 0.0 {
        return Err(Error::ZeroPower);
    }
    Ok(BeamStats {
        power: sum * grid.cell_area(),
        peak_intensity: peak / (omega_p0 * omega_p0),
        rms_radius: (moment / sum).sqrt(),
    })
}

pub fn record(u: &ComplexField, u0: &ComplexField, omega_p0: f64) -> Result<RunRecord> {
    let stats = beam_stats(u, omega_p0)?;
    Ok(RunRecord {
        z: u.z,
        j: fidelity(u, u0)?,
        power: stats.power,
        peak_intensity: stats.peak_intensity,
        rms_radius: stats.rms_radius,
    })
}

/// Number of intensity maxima met on a circle of radius `r` (sampled
/// with bilinear interpolation at `samples` angles).
pub fn petal_count(u: &ComplexField, r: f64, samples: usize) -> usize {
    let ring: Vec<f64> = (0..samples)
        .map(|k| {
            let phi = std::f64::consts::TAU * k as f64 / samples as f64;
            bilinear_intensity(u, r * phi.cos(), r * phi.sin())
        })
        .collect();
    let peak = ring.iter().cloned().fold(0.0, f64::max);
    (0..samples)
        .filter(|&k| {
            let prev = ring[(k + samples - 1) % samples];
            let next = ring[(k + 1) % samples];
            ring[k] > prev && ring[k] >= next && ring[k] > 1e-3 * peak
        })
        .count()
}

/// |U|² at an arbitrary point by bilinear interpolation (0 outside the window).
pub fn bilinear_intensity(u: &ComplexField, x: f64, y: f64) -> f64 {
    let g = &u.grid;
    let fx = x / g.dx + (g.nx / 2) as f64;
    let fy = y / g.dy + (g.ny / 2) as f64;
    if fx < 0.0 || fy < 0.0 || fx >= (g.nx - 1) as f64 || fy >= (g.ny - 1) as f64 {
        return 0.0;
    }
    let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
    let (tx, ty) = (fx - ix as f64, fy - iy as f64);
    let v = |i: usize, j: usize| u.get(i, j).norm_sqr();
    (1.0 - tx) * (1.0 - ty) * v(ix, iy) + tx * (1.0 - ty) * v(ix + 1, iy) + (1.0 - tx) * ty * v(ix, iy + 1) + tx * ty * v(ix + 1, iy + 1)
}
