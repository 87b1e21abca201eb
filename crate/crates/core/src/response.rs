//! Steady-state response of the Rydberg-EIT medium.
//!
//! The probe coherence is expanded to third order in the probe field:
//! a linear coefficient, a local Kerr coefficient and a nonlocal kernel
//! generated by the van der Waals interaction `V(s) = C6/s⁶` between
//! Rydberg atoms separated by `s = √(R² + z′²)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::params::{KernelForm, PhysicalParams};
use crate::quadrature::{integrate, QuadratureOptions};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative size of the discarded z′ tail of the kernel integral.
const TAIL_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseCoefficients {
    /// Linear coefficient (rad·µs⁻¹)⁻¹.
    pub rho1: Complex64,
    /// Local Kerr coefficient (rad·µs⁻¹)⁻³.
    pub rho31: Complex64,
}

impl ResponseCoefficients {
    pub fn new(p: &PhysicalParams) -> Self {
        ResponseCoefficients {
            rho1: linear_coefficient(p),
            rho31: local_kerr_coefficient(p),
        }
    }
}

/// ρ⁽¹⁾ = 2iΓ_r / (4Ω_c² + Γ′Γ_r)
pub fn linear_coefficient(p: &PhysicalParams) -> Complex64 {
    let gp = p.gamma_prime();
    2.0 * I * p.gamma_r / (4.0 * p.omega_c * p.omega_c + gp * p.gamma_r)
}

/// Denominator of the local Kerr coefficient; even in Δ.
pub fn local_kerr_denominator(p: &PhysicalParams) -> f64 {
    let (ge, gr, oc, d) = (p.gamma_e, p.gamma_r, p.omega_c, p.delta);
    let inner = ge * ge * gr * gr + 8.0 * ge * ge * oc * oc + 4.0 * gr * gr * d * d + 16.0 * oc.powi(4);
    ge * inner * inner
}

/// ρ⁽³¹⁾ = 16iΓ_r²(4iΩ_c² + Γ_r(iΓ_e − 2Δ))² / (Γ_e(Γ_e²Γ_r² + 8Γ_e²Ω_c² + 4Γ_r²Δ² + 16Ω_c⁴)²)
pub fn local_kerr_coefficient(p: &PhysicalParams) -> Complex64 {
    let (ge, gr, oc, d) = (p.gamma_e, p.gamma_r, p.omega_c, p.delta);
    let bracket = 4.0 * I * oc * oc + gr * Complex64::new(-2.0 * d, ge);
    16.0 * I * gr * gr * bracket * bracket / local_kerr_denominator(p)
}

/// Constants of the nonlocal kernel integrand.
#[derive(Debug, Clone, Copy)]
pub struct KernelConstants {
    /// Overall prefactor multiplying the z′ integral (including the phase
    /// selected by [`KernelForm`]).
    pub prefactor: Complex64,
    /// `B = 4Ω_c² − Γ′(Γ′+Γ_r)`, multiplies the interaction in the denominator.
    pub b: Complex64,
    /// `D₀ = 4Γ′Ω_c² + Γ_r B`, the interaction-free denominator.
    pub d0: Complex64,
    /// Sign with which `iV` enters the denominator.
    pub shift_sign: f64,
    pub c6: f64,
}

impl KernelConstants {
    pub fn new(p: &PhysicalParams) -> Self {
        let gp = p.gamma_prime();
        let gr = p.gamma_r;
        let oc2 = p.omega_c * p.omega_c;
        let printed = 256.0 * (gp + gr) * oc2 * oc2 / ((4.0 * I * oc2 - gp * gr) * (4.0 * oc2 + gp * gr).norm_sqr());
        let b = 4.0 * oc2 - gp * (gp + gr);
        let d0 = 4.0 * gp * oc2 + gr * b;
        let (prefactor, shift_sign) = match p.kernel_form {
            KernelForm::Printed => (printed, 1.0),
            KernelForm::Dispersive => (-I * printed, -1.0),
        };
        KernelConstants {
            prefactor,
            b,
            d0,
            shift_sign,
            c6: p.c6,
        }
    }

    /// `V/(D₀ ± iVB)` at squared separation `s2`, written as
    /// `1/(D₀/V ± iB)` so that `s → 0` (V → ∞) is regular.
    pub fn integrand(&self, s2: f64) -> Complex64 {
        if self.c6 == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let inv_v = s2 * s2 * s2 / self.c6;
        1.0 / (self.d0 * inv_v + self.shift_sign * I * self.b)
    }

    /// Value of the integrand in the blockade limit `V → ∞`.
    pub fn core_limit(&self) -> Complex64 {
        1.0 / (self.shift_sign * I * self.b)
    }

    /// `A` in `kernel(R) ≈ A/R⁵` at large `R`, from
    /// `∫dz′/(R²+z′²)³ = 3π/(8R⁵)`.
    pub fn tail_coefficient(&self) -> Complex64 {
        self.prefactor * self.c6 * (3.0 * PI / 8.0) / self.d0
    }

    /// Separation at which `|V B| = |D₀|`; the integrand changes character there.
    pub fn knee_radius(&self) -> f64 {
        (self.c6.abs() * self.b.norm() / self.d0.norm()).powf(1.0 / 6.0)
    }
}

/// Nonlocal kernel ρ⁽³²⁾(R): prefactor × ∫ V/(D₀ ± iVB) dz′ over the whole
/// line, evaluated as twice the half-line integral.
pub fn nonlocal_kernel(p: &PhysicalParams, radius: f64, opts: &QuadratureOptions) -> Result<Complex64> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::invalid("radius", format!("must be finite and >= 0, got {radius}")));
    }
    let kc = KernelConstants::new(p);
    Ok(kc.prefactor * 2.0 * half_line_integral(&kc, radius, opts)?)
}

fn half_line_integral(kc: &KernelConstants, radius: f64, opts: &QuadratureOptions) -> Result<Complex64> {
    if kc.c6 == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let r2 = radius * radius;
    let f = |z: f64| kc.integrand(r2 + z * z);
    let knee = kc.knee_radius();
    let scale = knee.max(radius);
    let mut breaks: Vec<f64> = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0].iter().map(|m| m * scale).collect();
    if knee > radius {
        // z′ at which s crosses the knee
        let zk = (knee * knee - r2).sqrt();
        breaks.extend([0.8 * zk, zk, 1.25 * zk]);
    }
    breaks.sort_by(f64::total_cmp);
    let mut upper = 64.0 * scale;
    let mut total = integrate(f, 0.0, upper, &breaks, opts)?.value;
    // Beyond `upper` the integrand is bounded by |C6|/(|D₀| z⁶).
    let tail_bound = |z: f64| kc.c6.abs() / (5.0 * kc.d0.norm() * z.powi(5));
    while tail_bound(upper) > TAIL_CUTOFF * total.norm() {
        total += integrate(f, upper, 4.0 * upper, &[], opts)?.value;
        upper *= 4.0;
    }
    Ok(total)
}

/// Radial tabulation of the nonlocal kernel with monotone-cubic
/// interpolation and an `A/R⁵` tail.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    pub radii: Vec<f64>,
    pub values: Vec<Complex64>,
    pub tail_coefficient: Complex64,
    slopes_re: Vec<f64>,
    slopes_im: Vec<f64>,
}

impl KernelTable {
    /// Assembles a table from samples. Radii must start at 0 and increase
    /// strictly.
    pub fn from_samples(radii: Vec<f64>, values: Vec<Complex64>, tail_coefficient: Complex64) -> Result<Self> {
        if radii.len() != values.len() || radii.len() < 2 {
            return Err(Error::Mismatch(format!(
                "kernel table needs >= 2 matching samples, got {} radii and {} values",
                radii.len(),
                values.len()
            )));
        }
        if radii[0] != 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Mismatch("kernel table radii must start at 0 and increase strictly".into()));
        }
        let re: Vec<f64> = values.iter().map(|v| v.re).collect();
        let im: Vec<f64> = values.iter().map(|v| v.im).collect();
        let slopes_re = monotone_slopes(&radii, &re);
        let slopes_im = monotone_slopes(&radii, &im);
        Ok(KernelTable {
            radii,
            values,
            tail_coefficient,
            slopes_re,
            slopes_im,
        })
    }

    pub fn r_max(&self) -> f64 {
        *self.radii.last().expect("non-empty table")
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn interpolate(&self, radius: f64) -> Complex64 {
        let r = radius.abs();
        let rmax = self.r_max();
        if r > rmax {
            return self.tail_coefficient / r.powi(5);
        }
        let j = match self.radii.partition_point(|&x| x <= r) {
            0 => 0,
            k if k >= self.radii.len() => self.radii.len() - 2,
            k => k - 1,
        };
        let (x0, x1) = (self.radii[j], self.radii[j + 1]);
        let h = x1 - x0;
        let t = (r - x0) / h;
        let re = hermite(t, h, self.values[j].re, self.values[j + 1].re, self.slopes_re[j], self.slopes_re[j + 1]);
        let im = hermite(t, h, self.values[j].im, self.values[j + 1].im, self.slopes_im[j], self.slopes_im[j + 1]);
        Complex64::new(re, im)
    }

    /// `∫₀^∞ kernel(R) dR`: exact integral of the cubic interpolant plus
    /// the analytic `A/(4 R_max⁴)` tail.
    pub fn line_integral(&self) -> Complex64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for j in 0..self.radii.len() - 1 {
            let h = self.radii[j + 1] - self.radii[j];
            re += 0.5 * h * (self.values[j].re + self.values[j + 1].re) + h * h * (self.slopes_re[j] - self.slopes_re[j + 1]) / 12.0;
            im += 0.5 * h * (self.values[j].im + self.values[j + 1].im) + h * h * (self.slopes_im[j] - self.slopes_im[j + 1]) / 12.0;
        }
        Complex64::new(re, im) + self.tail_coefficient / (4.0 * self.r_max().powi(4))
    }
}

fn hermite(t: f64, h: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * m1
}

/// Fritsch–Carlson slopes for a shape-preserving cubic Hermite interpolant.
fn monotone_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let secants: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let mut m = vec![0.0; n];
    m[0] = secants[0];
    m[n - 1] = secants[n - 2];
    for i in 1..n - 1 {
        if secants[i - 1] * secants[i] <= 0.0 {
            m[i] = 0.0;
        } else {
            // weighted harmonic mean (Fritsch–Butland), handles uneven spacing
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let w1 = 2.0 * h1 + h0;
            let w2 = h1 + 2.0 * h0;
            m[i] = (w1 + w2) / (w1 / secants[i - 1] + w2 / secants[i]);
        }
    }
    for i in 0..n - 1 {
        if secants[i] == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let a = m[i] / secants[i];
        let b = m[i + 1] / secants[i];
        let s = a * a + b * b;
        if s > 9.0 {
            let tau = 3.0 / s.sqrt();
            m[i] = tau * a * secants[i];
            m[i + 1] = tau * b * secants[i];
        }
    }
    m
}

/// Graded radial mesh on `[0, r_max]` with point density ∝ 1/(R + R_b/8).
pub fn graded_radii(r_max: f64, n_samples: usize, r_b: f64) -> Vec<f64> {
    let a = (r_b / 8.0).max(1e-12 * r_max);
    let span = ((r_max + a) / a).ln();
    let mut radii: Vec<f64> = (0..n_samples)
        .map(|i| a * ((span * i as f64 / (n_samples - 1) as f64).exp() - 1.0))
        .collect();
    radii[0] = 0.0;
    radii[n_samples - 1] = r_max;
    radii
}

/// Samples [`nonlocal_kernel`] on a graded mesh and records the analytic tail.
pub fn build_kernel_table(p: &PhysicalParams, r_max: f64, n_samples: usize, opts: &QuadratureOptions) -> Result<KernelTable> {
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(Error::invalid("r_max", format!("must be > 0, got {r_max}")));
    }
    if n_samples < 16 {
        return Err(Error::invalid("n_samples", format!("must be >= 16, got {n_samples}")));
    }
    p.validate()?;
    let radii = graded_radii(r_max, n_samples, p.blockade_radius());
    let values = radii
        .par_iter()
        .map(|&r| {
            nonlocal_kernel(p, r, opts).map_err(|e| Error::KernelSample {
                radius: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tail = KernelConstants::new(p).tail_coefficient();
    KernelTable::from_samples(radii, values, tail)
}

/// Hex SHA-256 over every input that determines a kernel table.
pub fn kernel_cache_key(p: &PhysicalParams, r_max: f64, n_samples: usize, rel_tol: f64) -> String {
    let mut h = Sha256::new();
    for v in [p.lambda_p, p.gamma_e, p.gamma_r, p.omega_c, p.delta, p.c6, r_max, rel_tol] {
        h.update(v.to_le_bytes());
    }
    h.update((n_samples as u64).to_le_bytes());
    h.update(p.kernel_form.name().as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Linear, local and nonlocal potential strengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialStrengths {
    /// −κρ⁽¹⁾/Ω_p0²
    pub k1: Complex64,
    /// −κρ⁽³¹⁾
    pub k2: Complex64,
    /// −κN_a∫ρ⁽³²⁾(R)dR
    pub k3: Complex64,
}

/// Default radial extent of tables used for potential strengths, in blockade radii.
pub const POTENTIAL_TABLE_EXTENT: f64 = 40.0;
pub const POTENTIAL_TABLE_SAMPLES: usize = 256;

pub fn potential_strengths(p: &PhysicalParams, opts: &QuadratureOptions) -> Result<PotentialStrengths> {
    p.validate()?;
    if p.omega_p0 == 0.0 {
        return Err(Error::invalid("omega_p0", "K1 is normalised by Ω_p0² and needs a nonzero probe"));
    }
    let table = build_kernel_table(p, POTENTIAL_TABLE_EXTENT * p.blockade_radius(), POTENTIAL_TABLE_SAMPLES, opts)?;
    Ok(potential_strengths_with_table(p, &table))
}

pub fn potential_strengths_with_table(p: &PhysicalParams, table: &KernelTable) -> PotentialStrengths {
    let kappa = p.kappa();
    let coeffs = ResponseCoefficients::new(p);
    PotentialStrengths {
        k1: -kappa * coeffs.rho1 / (p.omega_p0 * p.omega_p0),
        k2: -kappa * coeffs.rho31,
        k3: -kappa * p.n_a * table.line_integral(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ghz_to_angular;
    use approx::assert_relative_eq;

    fn opts() -> QuadratureOptions {
        QuadratureOptions::default()
    }

    #[test]
    fn linear_coefficient_vanishes_without_rydberg_decay() {
        let p = PhysicalParams { gamma_r: 1e-300, ..Default::default() };
        assert!(linear_coefficient(&p).norm() < 1e-300);
        assert!(local_kerr_coefficient(&p).norm() < 1e-300);
    }

    #[test]
    fn coefficients_shrink_with_rydberg_decay() {
        let base = PhysicalParams::default();
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for s in [1.0, 1e-2, 1e-4, 1e-6] {
            let p = PhysicalParams { gamma_r: base.gamma_r * s, ..base.clone() };
            let now = (linear_coefficient(&p).norm(), local_kerr_coefficient(&p).norm());
            assert!(now.0 < prev.0 && now.1 < prev.1);
            prev = now;
        }
        assert!(prev.0 < 1e-10 && prev.1 < 1e-20);
    }

    #[test]
    fn linear_coefficient_on_resonance_is_absorptive() {
        let p = PhysicalParams { delta: 0.0, ..Default::default() };
        let r = linear_coefficient(&p);
        assert_eq!(r.re, 0.0);
        assert!(r.im > 0.0);
    }

    #[test]
    fn kerr_denominator_even_in_detuning() {
        let p = PhysicalParams::default();
        let q = PhysicalParams { delta: -p.delta, ..p.clone() };
        assert_eq!(local_kerr_denominator(&p), local_kerr_denominator(&q));
    }

    #[test]
    fn core_limit_is_finite_and_matches_quadrature_start() {
        for form in [KernelForm::Printed, KernelForm::Dispersive] {
            let p = PhysicalParams { kernel_form: form, ..Default::default() };
            let kc = KernelConstants::new(&p);
            assert!(kc.core_limit().is_finite());
            assert_eq!(kc.integrand(0.0), kc.core_limit());
            // continuity of the integrand towards s = 0
            let near = kc.integrand(1e-6);
            assert!((near - kc.core_limit()).norm() < 1e-12 * kc.core_limit().norm());
            assert!(nonlocal_kernel(&p, 0.0, &opts()).unwrap().is_finite());
        }
    }

    #[test]
    fn kernel_survives_vanishing_rydberg_decay() {
        let p = PhysicalParams { gamma_r: 1e-12, ..Default::default() };
        assert!(KernelConstants::new(&p).prefactor.norm() > 1.0);
        assert!(nonlocal_kernel(&p, 1.0, &opts()).unwrap().norm() > 0.0);
    }

    #[test]
    fn rejects_negative_radius() {
        assert!(nonlocal_kernel(&PhysicalParams::default(), -1.0, &opts()).is_err());
    }

    #[test]
    fn table_reproduces_nodes_and_tail() {
        let p = PhysicalParams::default();
        let rb = p.blockade_radius();
        let t = build_kernel_table(&p, rb, 16, &opts()).unwrap();
        for (r, v) in t.radii.iter().zip(&t.values) {
            assert_eq!(t.interpolate(*r), *v);
        }
        let r = 1.5 * t.r_max();
        assert_eq!(t.interpolate(r), t.tail_coefficient / r.powi(5));
    }

    #[test]
    fn table_validation() {
        let p = PhysicalParams::default();
        assert!(build_kernel_table(&p, 10.0, 8, &opts()).is_err());
        assert!(build_kernel_table(&p, 0.0, 32, &opts()).is_err());
        let bad = KernelTable::from_samples(vec![0.0, 1.0, 1.0], vec![Complex64::default(); 3], Complex64::default());
        assert!(bad.is_err());
    }

    #[test]
    fn graded_mesh_is_denser_near_origin() {
        let r = graded_radii(100.0, 64, 9.0);
        assert_eq!(r[0], 0.0);
        assert_eq!(*r.last().unwrap(), 100.0);
        assert!(r[1] - r[0] < r[63] - r[62]);
    }

    #[test]
    fn kerr_is_quadratic_in_density() {
        let p = PhysicalParams { delta: ghz_to_angular(-1.0), ..Default::default() };
        let q = p.with_density(2.0 * p.n_a);
        let a = potential_strengths(&p, &opts()).unwrap();
        let b = potential_strengths(&q, &opts()).unwrap();
        assert_relative_eq!(b.k3.norm() / a.k3.norm(), 4.0, max_relative = 1e-12);
        assert_relative_eq!(b.k2.norm() / a.k2.norm(), 2.0, max_relative = 1e-12);
        assert_relative_eq!(b.k1.norm() / a.k1.norm(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn cache_key_tracks_inputs() {
        let p = PhysicalParams::default();
        let k = kernel_cache_key(&p, 100.0, 64, 1e-8);
        assert_eq!(k.len(), 64);
        assert_eq!(k, kernel_cache_key(&p, 100.0, 64, 1e-8));
        assert_ne!(k, kernel_cache_key(&p, 100.0, 65, 1e-8));
        let q = PhysicalParams { kernel_form: KernelForm::Printed, ..p };
        assert_ne!(k, kernel_cache_key(&q, 100.0, 64, 1e-8));
    }
}
