//! Physical constants, unit conventions and derived quantities.
//!
//! Unit system used throughout the crate:
//!
//! * lengths in micrometres (µm),
//! * times in microseconds (µs),
//! * every rate, detuning and Rabi frequency as an angular frequency (rad·µs⁻¹).
//!
//! Frequencies are usually quoted as `X/2π` in hertz. The `*_over_2pi_*`
//! constructors take such numbers and multiply by 2π exactly once.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Conversion of a `/2π` value in MHz to rad·µs⁻¹.
pub fn mhz_to_angular(value_over_2pi_mhz: f64) -> f64 {
    TAU * value_over_2pi_mhz
}

/// Conversion of a `/2π` value in GHz to rad·µs⁻¹.
pub fn ghz_to_angular(value_over_2pi_ghz: f64) -> f64 {
    TAU * 1.0e3 * value_over_2pi_ghz
}

/// Inverse of [`ghz_to_angular`].
pub fn angular_to_ghz(angular: f64) -> f64 {
    angular / (TAU * 1.0e3)
}

/// Inverse of [`mhz_to_angular`].
pub fn angular_to_mhz(angular: f64) -> f64 {
    angular / TAU
}

/// Densities quoted in cm⁻³ converted to µm⁻³.
pub fn per_cm3_to_per_um3(density: f64) -> f64 {
    density * 1.0e-12
}

/// Closed-form phase convention used for the nonlocal response kernel.
///
/// `Printed` evaluates the closed form literally. `Dispersive` applies a
/// `-i` phase to the prefactor and enters the interaction shift as `-iV`
/// in the denominator, which makes the weak-interaction tail real and the
/// red-detuned side (Δ < 0) attractive and non-resonant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum KernelForm {
    Printed,
    #[default]
    Dispersive,
}

impl KernelForm {
    pub fn name(self) -> &'static str {
        match self {
            KernelForm::Printed => "printed",
            KernelForm::Dispersive => "dispersive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "printed" => Some(KernelForm::Printed),
            "dispersive" => Some(KernelForm::Dispersive),
            _ => None,
        }
    }
}

/// Atomic, laser and medium parameters. All frequency-like fields are
/// angular frequencies in rad·µs⁻¹.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    /// Probe wavelength, µm.
    pub lambda_p: f64,
    pub gamma_e: f64,
    pub gamma_r: f64,
    pub omega_c: f64,
    pub omega_p0: f64,
    /// One-photon detuning Δ (signed).
    pub delta: f64,
    /// Van der Waals coefficient, rad·µs⁻¹·µm⁶ (signed).
    pub c6: f64,
    /// Atomic density, µm⁻³.
    pub n_a: f64,
    /// Probe waist, µm.
    pub r0: f64,
    /// Coupling constant κ at density `n_a`. `None` derives it from Γ_e.
    pub kappa_override: Option<f64>,
    pub kernel_form: KernelForm,
}

impl Default for PhysicalParams {
    /// ⁸⁸Sr 5s60s ¹S₀ parameters: Γ_e/2π = 16 MHz, Γ_r/2π = 16.7 kHz,
    /// Ω_c = Γ_e, Ω_p0 = 0.2 Γ_e, Δ/2π = −2 GHz, C6/2π = −81.6 GHz·µm⁶,
    /// N_a = 2×10¹² cm⁻³, R0 = 3 µm, λ_p = 461 nm.
    fn default() -> Self {
        let gamma_e = mhz_to_angular(16.0);
        PhysicalParams {
            lambda_p: 0.461,
            gamma_e,
            gamma_r: mhz_to_angular(0.0167),
            omega_c: gamma_e,
            omega_p0: 0.2 * gamma_e,
            delta: ghz_to_angular(-2.0),
            c6: ghz_to_angular(-81.6),
            n_a: per_cm3_to_per_um3(2.0e12),
            r0: 3.0,
            kappa_override: None,
            kernel_form: KernelForm::Dispersive,
        }
    }
}

/// Quantities computed once from [`PhysicalParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    /// Probe wave number, µm⁻¹.
    pub k_p: f64,
    /// Diffraction length k_p·R0², µm.
    pub l_diff: f64,
    /// EIT linewidth Ω_c²/|Δ + iΓ_e/2|.
    pub delta_eit: f64,
    /// Blockade radius, µm.
    pub r_b: f64,
    /// Propagation coupling κ, rad·µs⁻¹·µm⁻¹.
    pub kappa: f64,
    /// Γ′ = Γ_e − 2iΔ.
    pub gamma_prime: Complex64,
}

impl PhysicalParams {
    /// Builds parameters from the `/2π` values customarily quoted for
    /// rates (MHz) and detunings/C6 (GHz, GHz·µm⁶). Density in cm⁻³.
    #[allow(clippy::too_many_arguments)]
    pub fn from_over_2pi(
        lambda_p_um: f64,
        gamma_e_mhz: f64,
        gamma_r_mhz: f64,
        omega_c_mhz: f64,
        omega_p0_mhz: f64,
        delta_ghz: f64,
        c6_ghz_um6: f64,
        n_a_per_cm3: f64,
        r0_um: f64,
    ) -> Result<Self> {
        let p = PhysicalParams {
            lambda_p: lambda_p_um,
            gamma_e: mhz_to_angular(gamma_e_mhz),
            gamma_r: mhz_to_angular(gamma_r_mhz),
            omega_c: mhz_to_angular(omega_c_mhz),
            omega_p0: mhz_to_angular(omega_p0_mhz),
            delta: ghz_to_angular(delta_ghz),
            c6: ghz_to_angular(c6_ghz_um6),
            n_a: per_cm3_to_per_um3(n_a_per_cm3),
            r0: r0_um,
            kappa_override: None,
            kernel_form: KernelForm::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_p", self.lambda_p),
            ("r0", self.r0),
            ("omega_c", self.omega_c),
            ("gamma_e", self.gamma_e),
            ("gamma_r", self.gamma_r),
            ("n_a", self.n_a),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(field, format!("must be finite and > 0, got {v}")));
            }
        }
        for (field, v) in [("omega_p0", self.omega_p0), ("delta", self.delta), ("c6", self.c6)] {
            if !v.is_finite() {
                return Err(Error::invalid(field, format!("must be finite, got {v}")));
            }
        }
        if let Some(k) = self.kappa_override {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::invalid("kappa_override", format!("must be > 0, got {k}")));
            }
        }
        Ok(())
    }

    /// Copy with a new density. An explicit κ is rescaled with the density,
    /// since κ ∝ N_a.
    pub fn with_density(&self, n_a: f64) -> Self {
        let mut p = self.clone();
        p.kappa_override = self.kappa_override.map(|k| k * n_a / self.n_a);
        p.n_a = n_a;
        p
    }

    pub fn gamma_prime(&self) -> Complex64 {
        Complex64::new(self.gamma_e, -2.0 * self.delta)
    }

    pub fn k_p(&self) -> f64 {
        TAU / self.lambda_p
    }

    pub fn delta_eit(&self) -> f64 {
        self.omega_c * self.omega_c / Complex64::new(self.delta, 0.5 * self.gamma_e).norm()
    }

    pub fn blockade_radius(&self) -> f64 {
        (self.c6.abs() / self.delta_eit()).powf(1.0 / 6.0)
    }

    /// κ = N_a k_p µ²/(ħε₀) with µ eliminated through
    /// Γ_e = k_p³µ²/(3πε₀ħ), i.e. κ = 3π N_a Γ_e / k_p².
    pub fn kappa(&self) -> f64 {
        match self.kappa_override {
            Some(k) => k,
            None => {
                let k = self.k_p();
                3.0 * PI * self.n_a * self.gamma_e / (k * k)
            }
        }
    }

    pub fn derive(&self) -> Result<DerivedParams> {
        self.validate()?;
        let k_p = self.k_p();
        Ok(DerivedParams {
            k_p,
            l_diff: k_p * self.r0 * self.r0,
            delta_eit: self.delta_eit(),
            r_b: self.blockade_radius(),
            kappa: self.kappa(),
            gamma_prime: self.gamma_prime(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn diffraction_length_for_strontium_probe() {
        let d = PhysicalParams::default().derive().unwrap();
        assert_relative_eq!(d.l_diff, 122.665, max_relative = 1e-4);
    }

    #[test]
    fn identity_scaling() {
        let p = PhysicalParams {
            lambda_p: TAU,
            r0: 1.0,
            ..Default::default()
        };
        let d = p.derive().unwrap();
        assert_relative_eq!(d.k_p, 1.0, epsilon = 1e-15);
        assert_relative_eq!(d.l_diff, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn blockade_radius_exceeds_waist() {
        let d = PhysicalParams::default().derive().unwrap();
        // (|C6|/δ_EIT)^(1/6) evaluated independently in extended precision: 9.2771364408...
        assert!((d.r_b - 9.277_136_44).abs() < 1e-6, "r_b = {}", d.r_b);
        assert!(d.r_b > 3.0);
        let again = (PhysicalParams::default().c6.abs() / d.delta_eit).powf(1.0 / 6.0);
        assert_relative_eq!(again, d.r_b, max_relative = 1e-12);
    }

    #[test]
    fn rejects_non_positive_fields_by_name() {
        for (field, p) in [
            ("lambda_p", PhysicalParams { lambda_p: 0.0, ..Default::default() }),
            ("r0", PhysicalParams { r0: -1.0, ..Default::default() }),
            ("omega_c", PhysicalParams { omega_c: 0.0, ..Default::default() }),
        ] {
            match p.derive() {
                Err(Error::InvalidParameter { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected error for {field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn over_2pi_round_trip() {
        let p = PhysicalParams::from_over_2pi(0.461, 16.0, 0.0167, 16.0, 3.2, -2.0, -81.6, 2e12, 3.0)
            .unwrap();
        assert_eq!(p.gamma_e, TAU * 16.0);
        assert_eq!(p.delta, TAU * 1.0e3 * -2.0);
        assert_eq!(p.c6, TAU * 1.0e3 * -81.6);
        assert_relative_eq!(angular_to_mhz(p.gamma_e), 16.0, max_relative = 1e-15);
        assert_relative_eq!(angular_to_ghz(p.delta), -2.0, max_relative = 1e-15);
        assert_eq!(p, PhysicalParams::default());
    }

    #[test]
    fn blockade_radius_even_in_detuning() {
        let p = PhysicalParams::default();
        let q = PhysicalParams { delta: -p.delta, ..p.clone() };
        assert_eq!(p.delta_eit(), q.delta_eit());
        assert_eq!(p.blockade_radius(), q.blockade_radius());
        let z = PhysicalParams { delta: 0.0, ..p };
        assert!(z.derive().unwrap().r_b.is_finite());
    }

    #[test]
    fn derived_kappa_value() {
        let d = PhysicalParams::default().derive().unwrap();
        assert_relative_eq!(d.kappa, 10.201, max_relative = 1e-3);
    }

    #[test]
    fn density_rescales_explicit_kappa() {
        let p = PhysicalParams { kappa_override: Some(30.0), ..Default::default() };
        let q = p.with_density(1.0);
        assert_relative_eq!(q.kappa(), 15.0, max_relative = 1e-15);
        let derived = PhysicalParams::default().with_density(1.0);
        assert_relative_eq!(derived.kappa(), PhysicalParams::default().kappa() / 2.0, max_relative = 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn kappa_positive(na in 1e-3f64..10.0, lam in 0.1f64..2.0, ge in 1.0f64..1e3) {
            let p = PhysicalParams { n_a: na, lambda_p: lam, gamma_e: ge, ..Default::default() };
            proptest::prop_assert!(p.derive().unwrap().kappa > 0.0);
        }

        #[test]
        fn ghz_round_trip(v in -10.0f64..10.0) {
            proptest::prop_assert!((angular_to_ghz(ghz_to_angular(v)) - v).abs() <= 1e-15 * v.abs().max(1.0));
        }
    }
}
