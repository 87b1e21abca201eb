//! The nonlocal kernel against an independent brute-force evaluation.

use num_complex::Complex64;
use solitonlab::quadrature::QuadratureOptions;
use solitonlab::{nonlocal_kernel, KernelForm, PhysicalParams};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Prefactor, denominator constants and sign, written out from the raw
/// parameters without going through the library's helpers.
fn constants(p: &PhysicalParams) -> (Complex64, Complex64, Complex64, f64) {
    let gp = Complex64::new(p.gamma_e, -2.0 * p.delta);
    let gr = p.gamma_r;
    let oc2 = p.omega_c * p.omega_c;
    let printed = 256.0 * (gp + gr) * oc2 * oc2 / ((4.0 * I * oc2 - gp * gr) * (4.0 * oc2 + gp * gr).norm_sqr());
    let b = 4.0 * oc2 - gp * (gp + gr);
    let d0 = 4.0 * gp * oc2 + gr * b;
    match p.kernel_form {
        KernelForm::Printed => (printed, b, d0, 1.0),
        KernelForm::Dispersive => (-I * printed, b, d0, -1.0),
    }
}

/// 10⁶-interval trapezoid over the whole z′ line, mapped onto a finite
/// interval by z′ = R tan θ (the integrand vanishes like cos⁴θ at ±π/2).
fn brute_force(p: &PhysicalParams, radius: f64) -> Complex64 {
    let (pref, b, d0, sign) = constants(p);
    let half = std::f64::consts::FRAC_PI_2;
    let n = 1_000_000usize;
    let h = 2.0 * half / n as f64;
    let f = |theta: f64| {
        let c = theta.cos();
        if c <= 0.0 {
            return Complex64::default();
        }
        let s2 = radius * radius / (c * c);
        let v = p.c6 / (s2 * s2 * s2);
        v / (d0 + sign * I * v * b) * radius / (c * c)
    };
    let mut sum = Complex64::default();
    for k in 1..n {
        sum += f(-half + k as f64 * h);
    }
    pref * sum * h
}

/// 10⁶-interval trapezoid on z′ ∈ [−10R_b, 10R_b]; outside the window the
/// integrand is V/D₀ to within |VB/D₀|² < 1e-10, integrated in closed form.
fn windowed(p: &PhysicalParams, radius: f64) -> Complex64 {
    let (pref, b, d0, sign) = constants(p);
    let zmax = 10.0 * p.blockade_radius();
    let n = 1_000_000usize;
    let h = 2.0 * zmax / n as f64;
    let f = |z: f64| {
        let v = p.c6 / (radius * radius + z * z).powi(3);
        v / (d0 + sign * I * v * b)
    };
    let mut sum = 0.5 * (f(-zmax) + f(zmax));
    for k in 1..n {
        sum += f(-zmax + k as f64 * h);
    }
    // ∫_Z^∞ dz/(R²+z²)³ from the antiderivative
    let (r, z) = (radius, zmax);
    let q = r * r + z * z;
    let upper = 3.0 * std::f64::consts::PI / (16.0 * r.powi(5));
    let at_z = z / (4.0 * r * r * q * q) + 3.0 * z / (8.0 * r.powi(4) * q) + 3.0 * (z / r).atan() / (8.0 * r.powi(5));
    let tail = 2.0 * p.c6 / d0 * (upper - at_z);
    pref * (sum * h + tail)
}

fn check_form(form: KernelForm) {
    let p = PhysicalParams { kernel_form: form, ..PhysicalParams::default() };
    let rb = p.blockade_radius();
    let opts = QuadratureOptions::default();
    for m in [0.5, 1.0, 2.0] {
        let got = nonlocal_kernel(&p, m * rb, &opts).unwrap();
        for (name, want) in [("mapped", brute_force(&p, m * rb)), ("windowed", windowed(&p, m * rb))] {
            let rel = (got - want).norm() / want.norm();
            assert!(rel < 1e-6, "{form:?} {name} R = {m} R_b: {got} vs {want} (rel {rel:.2e})");
        }
    }
}

#[test]
fn kernel_matches_trapezoid_dispersive() {
    check_form(KernelForm::Dispersive);
}

#[test]
fn kernel_matches_trapezoid_printed() {
    check_form(KernelForm::Printed);
}

#[test]
fn kernel_obeys_inverse_fifth_power_tail() {
    for form in [KernelForm::Dispersive, KernelForm::Printed] {
        let p = PhysicalParams { kernel_form: form, ..PhysicalParams::default() };
        let (pref, _, d0, _) = constants(&p);
        let r = 20.0 * p.blockade_radius();
        let tail = pref * p.c6 * 3.0 * std::f64::consts::PI / (8.0 * d0 * r.powi(5));
        let got = nonlocal_kernel(&p, r, &QuadratureOptions::default()).unwrap();
        let rel = (got - tail).norm() / tail.norm();
        assert!(rel < 1e-3, "{form:?}: {got} vs {tail} (rel {rel:.2e})");
    }
}

#[test]
fn kernel_is_finite_at_origin_and_decays() {
    let p = PhysicalParams::default();
    let rb = p.blockade_radius();
    let opts = QuadratureOptions::default();
    let k: Vec<f64> = [0.0, 1.0, 2.0, 4.0, 8.0].iter().map(|m| nonlocal_kernel(&p, m * rb, &opts).unwrap().norm()).collect();
    assert!(k[0].is_finite() && k[0] > 0.0);
    assert!(k.windows(2).skip(1).all(|w| w[1] < w[0]), "{k:?}");
}
