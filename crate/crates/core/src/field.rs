//! Transverse grid and the vortex / optical-Ferris-wheel input fields.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::PhysicalParams;

/// Uniform transverse lattice centred on the origin. Sample `(ix, iy)` sits
/// at `((ix − nx/2)·dx, (iy − ny/2)·dy)`, so the origin is a grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64) -> Result<Self> {
        for (name, n) in [("nx", nx), ("ny", ny)] {
            if n < 2 || !n.is_power_of_two() {
                return Err(Error::invalid(name, format!("must be a power of two >= 2, got {n}")));
            }
        }
        for (name, d) in [("dx", dx), ("dy", dy)] {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::invalid(name, format!("must be > 0, got {d}")));
            }
        }
        Ok(Grid { nx, ny, dx, dy })
    }

    /// Square grid with `n` samples per side spanning `extent` µm.
    pub fn square(n: usize, extent: f64) -> Result<Self> {
        Grid::new(n, n, extent / n as f64, extent / n as f64)
    }

    /// 256² grid spanning 16 R0 for |l| ≤ 3 and 24 R0 beyond.
    pub fn default_for(r0: f64, max_winding: u32) -> Self {
        let extent = if max_winding <= 3 { 16.0 * r0 } else { 24.0 * r0 };
        Grid::square(256, extent).expect("valid default grid")
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extent_x(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn extent_y(&self) -> f64 {
        self.ny as f64 * self.dy
    }

    pub fn x(&self, ix: usize) -> f64 {
        (ix as f64 - (self.nx / 2) as f64) * self.dx
    }

    pub fn y(&self, iy: usize) -> f64 {
        (iy as f64 - (self.ny / 2) as f64) * self.dy
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    /// Iterator over `(x, y)` in storage order.
    pub fn coords(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.ny).flat_map(move |iy| (0..self.nx).map(move |ix| (self.x(ix), self.y(iy))))
    }

    /// Angular wave numbers along x in FFT order.
    pub fn kx(&self) -> Vec<f64> {
        wave_numbers(self.nx, self.dx)
    }

    pub fn ky(&self) -> Vec<f64> {
        wave_numbers(self.ny, self.dy)
    }

    /// Warning text when the window is narrower than 8 R0.
    pub fn extent_warning(&self, r0: f64) -> Option<String> {
        let narrow = self.extent_x().min(self.extent_y());
        (narrow < 8.0 * r0).then(|| format!("grid extent {narrow} um is below 8 R0 = {} um", 8.0 * r0))
    }
}

pub(crate) fn wave_numbers(n: usize, d: f64) -> Vec<f64> {
    let dk = TAU / (n as f64 * d);
    (0..n)
        .map(|i| if i < n.div_ceil(2) { i as f64 } else { i as f64 - n as f64 } * dk)
        .collect()
}

/// Complex envelope U(x, y) at propagation distance `z`, in rad·µs⁻¹.
/// Samples are stored row by row (`y` outer, `x` inner).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: Grid,
    pub z: f64,
    pub data: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: Grid) -> Self {
        ComplexField {
            grid,
            z: 0.0,
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> Complex64) -> Self {
        ComplexField {
            grid,
            z: 0.0,
            data: grid.coords().map(|(x, y)| f(x, y)).collect(),
        }
    }

    pub fn from_data(grid: Grid, z: f64, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Mismatch(format!("{} samples for a {}x{} grid", data.len(), grid.nx, grid.ny)));
        }
        Ok(ComplexField { grid, z, data })
    }

    pub fn get(&self, ix: usize, iy: usize) -> Complex64 {
        self.data[self.grid.index(ix, iy)]
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.data.iter().map(|u| u.norm_sqr()).collect()
    }

    /// Σ|U|²·dx·dy
    pub fn power(&self) -> f64 {
        self.data.iter().map(|u| u.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    pub fn max_amplitude(&self) -> f64 {
        self.data.iter().map(|u| u.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|u| u.is_finite())
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        ComplexField {
            grid: self.grid,
            z: self.z,
            data: self.data.iter().map(|u| u * a).collect(),
        }
    }
}

/// Ω_p0·(r/R0)^|l|·exp(−r²/R0²)·exp(ilφ) without the e^{ik_p z} carrier.
pub fn vortex_amplitude(p: &PhysicalParams, l: i32, x: f64, y: f64) -> Complex64 {
    let r2 = x * x + y * y;
    let rho = r2.sqrt() / p.r0;
    // φ at the origin is taken as 0
    let phi = if r2 == 0.0 { 0.0 } else { y.atan2(x) };
    let radial = p.omega_p0 * rho.powi(l.abs()) * (-r2 / (p.r0 * p.r0)).exp();
    Complex64::from_polar(radial, l as f64 * phi)
}

fn warn_extent(grid: &Grid, p: &PhysicalParams) {
    if let Some(w) = grid.extent_warning(p.r0) {
        log::warn!("{w}");
    }
}

pub fn make_vortex(grid: Grid, p: &PhysicalParams, l: i32) -> ComplexField {
    warn_extent(&grid, p);
    ComplexField::from_fn(grid, |x, y| vortex_amplitude(p, l, x, y))
}

/// Coherent superposition of two vortices; `l1 = −l2` gives an optical
/// Ferris wheel with `2|l|` azimuthal petals.
pub fn make_ofw(grid: Grid, p: &PhysicalParams, l1: i32, l2: i32) -> ComplexField {
    warn_extent(&grid, p);
    ComplexField::from_fn(grid, |x, y| vortex_amplitude(p, l1, x, y) + vortex_amplitude(p, l2, x, y))
}
