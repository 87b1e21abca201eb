//! Symmetric split-step integrator for the nonlocal envelope equation
//!
//! ```text
//! i ∂U/∂z + ∇⊥²U/(2k_p) + Φ[U] U = 0,
//! Φ[U](r) = κ N_a ∫ ρ⁽³²⁾(|r − r′|) |U(r′)|² d²r′   (reduced)
//!         + κ ρ⁽¹⁾ + κ ρ⁽³¹⁾ |U|²                   (full)
//! ```
//!
//! One step: half a diffraction step in k-space, a full nonlinear phase
//! step `U ← U·exp(i dz Φ)`, another diffraction half step. When Φ has an
//! imaginary part the intensity is not constant during the phase step, so
//! Φ is averaged between the start and a predicted end of that step.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ComplexField, Grid};
use crate::metrics::{self, RunRecord};
use crate::params::PhysicalParams;
use crate::response::{build_kernel_table, KernelTable, ResponseCoefficients};
use crate::quadrature::QuadratureOptions;
use crate::spectral::{Fft2, PaddedConvolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Nonlocal term only.
    Reduced,
    /// Linear, local Kerr and nonlocal terms.
    Full,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "reduced" => Some(Mode::Reduced),
            "full" => Some(Mode::Full),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Reduced => "reduced",
            Mode::Full => "full",
        }
    }
}

/// Which part of the nonlocal kernel enters the phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelPart {
    #[default]
    Complex,
    /// Re(kernel) only; the nonlinear step is then unitary.
    RealOnly,
}

impl KernelPart {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "complex" => Some(KernelPart::Complex),
            "real" => Some(KernelPart::RealOnly),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelPart::Complex => "complex",
            KernelPart::RealOnly => "real",
        }
    }
}

/// Super-Gaussian absorbing layer along the window edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorbingBoundary {
    /// Layer width as a fraction of the window extent.
    pub width_fraction: f64,
    /// Absorption rate at the outer edge, µm⁻¹.
    pub strength: f64,
    pub exponent: i32,
}

impl Default for AbsorbingBoundary {
    fn default() -> Self {
        AbsorbingBoundary {
            width_fraction: 0.1,
            strength: 0.5,
            exponent: 8,
        }
    }
}

impl AbsorbingBoundary {
    /// Per-step multiplicative mask on `grid` for step length `dz`.
    pub fn mask(&self, grid: &Grid, dz: f64) -> Vec<f64> {
        let profile = |coord: f64, extent: f64| {
            let w = self.width_fraction * extent;
            let depth = (coord.abs() - (0.5 * extent - w)).max(0.0);
            if w <= 0.0 || depth == 0.0 {
                0.0
            } else {
                (depth / w).min(1.0).powi(self.exponent)
            }
        };
        let (ex, ey) = (grid.extent_x(), grid.extent_y());
        grid.coords()
            .map(|(x, y)| (-self.strength * dz * (profile(x, ex) + profile(y, ey))).exp())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationConfig {
    pub dz: f64,
    pub z_end: f64,
    pub mode: Mode,
    pub record_every: usize,
    pub absorbing_boundary: Option<AbsorbingBoundary>,
    pub kernel_part: KernelPart,
}

impl PropagationConfig {
    /// Default step `l_diff/200`, absorbing boundary on.
    pub fn new(p: &PhysicalParams, z_end: f64) -> Self {
        PropagationConfig {
            dz: p.k_p() * p.r0 * p.r0 / 200.0,
            z_end,
            mode: Mode::Reduced,
            record_every: 1,
            absorbing_boundary: Some(AbsorbingBoundary::default()),
            kernel_part: KernelPart::Complex,
        }
    }

    pub fn validate(&self, p: &PhysicalParams) -> Result<()> {
        if !(self.dz > 0.0 && self.dz.is_finite()) {
            return Err(Error::invalid("dz", format!("must be > 0, got {}", self.dz)));
        }
        if !(self.z_end >= 0.0 && self.z_end.is_finite()) {
            return Err(Error::invalid("z_end", format!("must be >= 0, got {}", self.z_end)));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every", "must be >= 1"));
        }
        let l_diff = p.k_p() * p.r0 * p.r0;
        if self.dz > l_diff / 50.0 {
            log::warn!("dz = {} um exceeds l_diff/50 = {} um", self.dz, l_diff / 50.0);
        }
        Ok(())
    }

    /// Shrinks `dz` so that a whole number of steps lands on `z_end`.
    pub fn fitted(mut self) -> Self {
        if self.z_end > 0.0 && self.dz > 0.0 {
            let n = (self.z_end / self.dz - 1e-9).ceil().max(1.0);
            self.dz = self.z_end / n;
        }
        self
    }

    pub fn steps(&self) -> usize {
        (self.z_end / self.dz).round() as usize
    }
}

/// The nonlocal response rasterised and transformed once for a grid.
pub struct NonlocalOperator {
    grid: Grid,
    convolver: PaddedConvolver,
    intensity: Vec<f64>,
    /// Whether the rasterised kernel has an imaginary part.
    complex: bool,
}

impl NonlocalOperator {
    /// `coupling` multiplies the convolution, normally κ·N_a.
    pub fn new(grid: &Grid, table: &KernelTable, coupling: f64) -> Result<Self> {
        Self::with_part(grid, table, coupling, KernelPart::Complex)
    }

    pub fn with_part(grid: &Grid, table: &KernelTable, coupling: f64, part: KernelPart) -> Result<Self> {
        let reach = grid.extent_x().hypot(grid.extent_y());
        if table.r_max() < reach {
            return Err(Error::Mismatch(format!(
                "kernel table reaches {} um but the padded grid needs {} um",
                table.r_max(),
                reach
            )));
        }
        let weight = Complex64::new(coupling * grid.cell_area(), 0.0);
        let complex = part == KernelPart::Complex && coupling != 0.0 && table.values.iter().any(|v| v.im != 0.0);
        let convolver = PaddedConvolver::new(grid, weight, |x, y| {
            let k = table.interpolate(x.hypot(y));
            match part {
                KernelPart::Complex => k,
                KernelPart::RealOnly => Complex64::new(k.re, 0.0),
            }
        });
        Ok(NonlocalOperator {
            grid: *grid,
            convolver,
            intensity: vec![0.0; grid.len()],
            complex,
        })
    }

    /// Zero kernel; used for linear-diffraction checks.
    pub fn zero(grid: &Grid) -> Self {
        NonlocalOperator {
            grid: *grid,
            convolver: PaddedConvolver::new(grid, Complex64::new(0.0, 0.0), |_, _| Complex64::new(0.0, 0.0)),
            intensity: vec![0.0; grid.len()],
            complex: false,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Writes `coupling · (kernel ⊛ |U|²)` into `out`.
    pub fn phase_into(&mut self, field: &ComplexField, out: &mut [Complex64]) -> Result<()> {
        if field.grid != self.grid {
            return Err(Error::Mismatch("field and kernel raster are on different grids".into()));
        }
        for (i, u) in self.intensity.iter_mut().zip(&field.data) {
            *i = u.norm_sqr();
        }
        self.convolver.convolve(&self.intensity, out);
        Ok(())
    }

    /// Writes `coupling · (kernel ⊛ intensity)` into `out`.
    pub fn phase_from_intensity(&mut self, intensity: &[f64], out: &mut [Complex64]) {
        self.convolver.convolve(intensity, out);
    }

    pub fn is_complex(&self) -> bool {
        self.complex
    }
}

/// Kernel table reaching the padded-grid diagonal with 256 graded samples.
pub fn kernel_table_for_grid(p: &PhysicalParams, grid: &Grid, opts: &QuadratureOptions) -> Result<KernelTable> {
    let reach = grid.extent_x().hypot(grid.extent_y());
    build_kernel_table(p, reach.max(10.0 * p.blockade_radius()), 256, opts)
}

/// `κN_a (ρ⁽³²⁾ ⊛ |U|²)` on the field's grid.
pub fn nonlocal_phase(field: &ComplexField, table: &KernelTable, p: &PhysicalParams) -> Result<Vec<Complex64>> {
    let mut op = NonlocalOperator::new(&field.grid, table, p.kappa() * p.n_a)?;
    let mut out = vec![Complex64::default(); field.grid.len()];
    op.phase_into(field, &mut out)?;
    Ok(out)
}

/// Reusable integrator state for one grid, parameter set and step size.
pub struct SplitStep {
    cfg: PropagationConfig,
    nonlocal: NonlocalOperator,
    fft: Fft2,
    /// exp(−i dz k⊥²/(4k_p)) / (nx·ny), transposed spectral layout.
    half_step: Vec<Complex64>,
    mask: Option<Vec<f64>>,
    /// κρ⁽¹⁾ and κρ⁽³¹⁾ in full mode.
    local: Option<(Complex64, Complex64)>,
    phase: Vec<Complex64>,
    /// Average Φ over the start and a predicted end of the nonlinear step
    /// (needed for second order when Φ is complex, since |U|² then changes
    /// within the step).
    corrected: bool,
    predicted: Vec<f64>,
    phase_end: Vec<Complex64>,
}

impl SplitStep {
    pub fn new(grid: &Grid, cfg: &PropagationConfig, p: &PhysicalParams, nonlocal: NonlocalOperator) -> Result<Self> {
        cfg.validate(p)?;
        if nonlocal.grid() != grid {
            return Err(Error::Mismatch("kernel raster built for a different grid".into()));
        }
        let k_p = p.k_p();
        let norm = 1.0 / grid.len() as f64;
        let (kx, ky) = (grid.kx(), grid.ky());
        let half_step = kx
            .iter()
            .flat_map(|&a| ky.iter().map(move |&b| Complex64::from_polar(norm, -cfg.dz * (a * a + b * b) / (4.0 * k_p))))
            .collect();
        let local = (cfg.mode == Mode::Full).then(|| {
            let c = ResponseCoefficients::new(p);
            let kappa = p.kappa();
            (kappa * c.rho1, kappa * c.rho31)
        });
        let corrected = nonlocal.is_complex() || local.is_some_and(|(_, kerr)| kerr.im != 0.0);
        let scratch = if corrected { grid.len() } else { 0 };
        Ok(SplitStep {
            corrected,
            predicted: vec![0.0; scratch],
            phase_end: vec![Complex64::default(); scratch],
            cfg: cfg.clone(),
            nonlocal,
            fft: Fft2::for_grid(grid),
            half_step,
            mask: cfg.absorbing_boundary.map(|b| b.mask(grid, cfg.dz)),
            local,
            phase: vec![Complex64::default(); grid.len()],
        })
    }

    /// Builds the kernel table and raster for `p` on `grid`.
    pub fn for_params(grid: &Grid, cfg: &PropagationConfig, p: &PhysicalParams, opts: &QuadratureOptions) -> Result<Self> {
        let table = kernel_table_for_grid(p, grid, opts)?;
        let op = NonlocalOperator::with_part(grid, &table, p.kappa() * p.n_a, cfg.kernel_part)?;
        SplitStep::new(grid, cfg, p, op)
    }

    pub fn config(&self) -> &PropagationConfig {
        &self.cfg
    }

    fn diffract_half(&mut self, field: &mut ComplexField) {
        self.fft.forward(&mut field.data);
        for (u, m) in field.data.iter_mut().zip(&self.half_step) {
            *u *= m;
        }
        self.fft.inverse(&mut field.data);
    }

    /// Advances `field` by one step of `dz` in place.
    /// A field that overflows, or loses all of its power in one step, is
    /// reported as [`Error::Divergence`].
    pub fn step(&mut self, field: &mut ComplexField) -> Result<()> {
        let dz = self.cfg.dz;
        let had_power = field.data.iter().any(|u| *u != Complex64::default());
        self.diffract_half(field);
        self.nonlocal.phase_into(field, &mut self.phase)?;
        let i_dz = Complex64::new(0.0, dz);
        let (lin, kerr) = self.local.unwrap_or_default();
        if self.corrected {
            // |U|² at the end of an explicit step, then the trapezoidal mean of Φ
            for ((p, u), phi) in self.predicted.iter_mut().zip(&field.data).zip(&self.phase) {
                let i0 = u.norm_sqr();
                *p = i0 * (-2.0 * dz * (phi + lin + kerr * i0).im).exp();
            }
            self.nonlocal.phase_from_intensity(&self.predicted, &mut self.phase_end);
            for (((u, phi0), phi1), i1) in field.data.iter_mut().zip(&self.phase).zip(&self.phase_end).zip(&self.predicted) {
                let mean_i = 0.5 * (u.norm_sqr() + i1);
                *u *= (i_dz * (0.5 * (phi0 + phi1) + lin + kerr * mean_i)).exp();
            }
        } else if self.local.is_none() {
            for (u, phi) in field.data.iter_mut().zip(&self.phase) {
                *u *= (i_dz * phi).exp();
            }
        } else {
            for (u, phi) in field.data.iter_mut().zip(&self.phase) {
                *u *= (i_dz * (phi + lin + kerr * u.norm_sqr())).exp();
            }
        }
        self.diffract_half(field);
        if let Some(mask) = &self.mask {
            for (u, m) in field.data.iter_mut().zip(mask) {
                *u *= m;
            }
        }
        field.z += dz;
        let (finite, max_amplitude) = field
            .data
            .iter()
            .fold((true, 0.0f64), |(ok, m), u| if u.is_finite() { (ok, m.max(u.norm())) } else { (false, m) });
        if !finite || (had_power && max_amplitude == 0.0) {
            return Err(Error::Divergence {
                z: field.z,
                max_amplitude: if finite { 0.0 } else { f64::INFINITY },
            });
        }
        Ok(())
    }

    /// Steps from `field.z` to `cfg.z_end`, calling `on_record` at the start,
    /// every `record_every` steps and at the end. On divergence the error is
    /// returned and the records gathered so far are kept in `records`.
    pub fn run(
        &mut self,
        input: &ComplexField,
        p: &PhysicalParams,
        records: &mut Vec<RunRecord>,
        mut on_record: impl FnMut(&RunRecord, &ComplexField),
    ) -> Result<ComplexField> {
        let mut field = input.clone();
        let steps = self.cfg.steps();
        let record = |f: &ComplexField, records: &mut Vec<RunRecord>, cb: &mut dyn FnMut(&RunRecord, &ComplexField)| -> Result<()> {
            let rec = metrics::record(f, input, p.omega_p0)?;
            cb(&rec, f);
            records.push(rec);
            Ok(())
        };
        record(&field, records, &mut on_record)?;
        for n in 1..=steps {
            self.step(&mut field)?;
            if n % self.cfg.record_every == 0 || n == steps {
                record(&field, records, &mut on_record)?;
            }
        }
        Ok(field)
    }
}

/// Result of [`propagate`].
#[derive(Debug, Clone)]
pub struct Propagation {
    pub field: ComplexField,
    pub records: Vec<RunRecord>,
}

/// Propagates `input` to `cfg.z_end` with a kernel table for `p`.
pub fn propagate(
    input: &ComplexField,
    cfg: &PropagationConfig,
    p: &PhysicalParams,
    table: &KernelTable,
    on_record: impl FnMut(&RunRecord, &ComplexField),
) -> std::result::Result<Propagation, (Error, Vec<RunRecord>)> {
    let setup = || -> Result<SplitStep> {
        let op = NonlocalOperator::with_part(&input.grid, table, p.kappa() * p.n_a, cfg.kernel_part)?;
        SplitStep::new(&input.grid, cfg, p, op)
    };
    let mut stepper = setup().map_err(|e| (e, Vec::new()))?;
    let mut records = Vec::new();
    match stepper.run(input, p, &mut records, on_record) {
        Ok(field) => Ok(Propagation { field, records }),
        Err(e) => Err((e, records)),
    }
}
