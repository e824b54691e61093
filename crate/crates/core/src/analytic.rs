//! Closed-form Gaussian model of the ghost image: widths, image position,
//! resolution, the pinhole-camera quantities and the mode count.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::setup::ValidatedSetup;
use crate::spdc::SINC_GAUSSIAN_FACTOR;

/// `γ = 0.455/4`. The 0.455 is the sinc-to-Gaussian width factor
/// ([`SINC_GAUSSIAN_FACTOR`]); the 1/4 comes from `u = Δk_z l_z/2` together
/// with the paraxial `Δk_z`. Do not divide by 4 again at the use sites.
pub const GAMMA: f64 = SINC_GAUSSIAN_FACTOR / 4.0;

/// Default visibility threshold for two-slit resolution.
pub const DEFAULT_THRESHOLD: f64 = 0.4;

/// Ratio that "much larger than" has to reach before the far-field
/// magnification is considered valid.
pub const FAR_FIELD_RATIO: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("alpha denominator vanishes (|den| = {0:.3e})")]
    DegenerateAlpha(f64),
    #[error("Re(1/alpha1) = {0:.3e} is not positive")]
    NonPositiveRealPart(f64),
    #[error("Re(alpha2/alpha1) = {0:.3e} is too small to image")]
    ZeroMagnification(f64),
    #[error("threshold must lie in (0, 1), got {0}")]
    InvalidThreshold(f64),
    #[error("{name} must be finite and positive, got {value}")]
    InvalidInput { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alphas {
    /// [m²]
    pub alpha1: Complex64,
    /// dimensionless
    pub alpha2: Complex64,
}

impl Alphas {
    /// `Re(α₁⁻¹)`, must be positive.
    pub fn re_inv_alpha1(&self) -> Result<f64, AnalyticError> {
        let r = self.alpha1.inv().re;
        if r > 0.0 && r.is_finite() {
            Ok(r)
        } else {
            Err(AnalyticError::NonPositiveRealPart(r))
        }
    }

    /// `Re(α₁⁻¹ α₂)`.
    pub fn re_ratio(&self) -> f64 {
        (self.alpha2 / self.alpha1).re
    }

    pub fn sigma_g(&self) -> Result<f64, AnalyticError> {
        Ok((2.0 * self.re_inv_alpha1()?).powf(-0.5))
    }

    pub fn magnification(&self) -> Result<f64, AnalyticError> {
        Ok(self.re_ratio() / self.re_inv_alpha1()?)
    }

    pub fn resolution(&self, threshold: f64) -> Result<f64, AnalyticError> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(AnalyticError::InvalidThreshold(threshold));
        }
        let r = self.re_inv_alpha1()?;
        let q = self.re_ratio();
        if !(q.abs() >= 1e-30) {
            return Err(AnalyticError::ZeroMagnification(q));
        }
        Ok(2.0 * (-(threshold / 2.0).ln() * r).sqrt() / q.abs())
    }
}

/// `α₁, α₂` for the object at distance `d`; `d = ∞` gives `α₂ = 0`.
pub fn alphas_at(setup: &ValidatedSetup, d: f64) -> Result<Alphas, AnalyticError> {
    let sp2 = setup.sigma_p * setup.sigma_p;
    let c = GAMMA * setup.l_z / PI;
    let numerator = sp2 - c * setup.lambda_p;
    let alpha2 = if d.is_infinite() {
        Complex64::new(0.0, 0.0)
    } else {
        let den = Complex64::new(sp2 + c * (setup.lambda_s - setup.lambda_p), d * setup.lambda_s / (2.0 * PI));
        if !(den.norm() >= 1e-30) {
            return Err(AnalyticError::DegenerateAlpha(den.norm()));
        }
        numerator / den
    };
    let alpha1 = Complex64::new(sp2 + c * (setup.lambda_i - setup.lambda_p), setup.lambda_i * setup.z_i / (2.0 * PI))
        - numerator * alpha2;
    if !(alpha1.norm() >= 1e-30) {
        return Err(AnalyticError::DegenerateAlpha(alpha1.norm()));
    }
    Ok(Alphas { alpha1, alpha2 })
}

pub fn alphas(setup: &ValidatedSetup) -> Result<Alphas, AnalyticError> {
    alphas_at(setup, setup.d)
}

/// Width of the Gaussian ghost image of an infinitesimal slit.
pub fn sigma_g(setup: &ValidatedSetup) -> Result<f64, AnalyticError> {
    alphas(setup)?.sigma_g()
}

/// `x₀/a`, independent of the slit position `a`.
pub fn magnification(setup: &ValidatedSetup) -> Result<f64, AnalyticError> {
    alphas(setup)?.magnification()
}

/// Ghost-image position of an infinitesimal slit at `a`.
pub fn image_position(setup: &ValidatedSetup, a: f64) -> Result<f64, AnalyticError> {
    Ok(a * magnification(setup)?)
}

pub fn resolution(setup: &ValidatedSetup, threshold: f64) -> Result<f64, AnalyticError> {
    alphas(setup)?.resolution(threshold)
}

/// `N = σ_S / R`.
pub fn n_modes(setup: &ValidatedSetup, sigma_s: f64, threshold: f64) -> Result<f64, AnalyticError> {
    if !(sigma_s.is_finite() && sigma_s > 0.0) {
        return Err(AnalyticError::InvalidInput { name: "sigma_s", value: sigma_s });
    }
    Ok(sigma_s / resolution(setup, threshold)?)
}

/// Effective source size playing the role of the pinhole.
pub fn pinhole_sigma0(setup: &ValidatedSetup) -> f64 {
    let s = setup.setup();
    (s.sigma_p * s.sigma_p / 2.0 + GAMMA * (s.lambda_i / s.lambda_s) * s.lambda_p * s.l_z / (2.0 * PI)).sqrt()
}

/// Ghost-image width for an object at infinity,
/// `σ_G² = σ₀² + σ₀⁻² (z_I λ_I / 4π)²`.
pub fn sigma_g_far_field(setup: &ValidatedSetup) -> f64 {
    far_field_width(pinhole_sigma0(setup), setup.z_i, setup.lambda_i)
}

fn far_field_width(sigma_0: f64, z_i: f64, lambda_i: f64) -> f64 {
    let b = z_i * lambda_i / (4.0 * PI);
    (sigma_0 * sigma_0 + b * b / (sigma_0 * sigma_0)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalSource {
    pub sigma_0_star: f64,
    pub sigma_g_min: f64,
}

/// Source size minimizing the far-field width, `σ₀*² = z_I λ_I / 4π`, and the
/// resulting width `√2 σ₀*`.
pub fn optimal_source(z_i: f64, lambda_i: f64) -> Result<OptimalSource, AnalyticError> {
    for (name, value) in [("z_i", z_i), ("lambda_i", lambda_i)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(AnalyticError::InvalidInput { name, value });
        }
    }
    let sigma_0_star = (z_i * lambda_i / (4.0 * PI)).sqrt();
    Ok(OptimalSource { sigma_0_star, sigma_g_min: 2f64.sqrt() * sigma_0_star })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldMagnification {
    pub value: f64,
    /// Smallest of the ratios behind the far-field approximation.
    pub validity_ratio: f64,
    pub warnings: Vec<String>,
}

/// `x₀/a ≈ −(z_I/d)(λ_I/λ_S)`, with the conditions it relies on checked.
pub fn magnification_farfield(setup: &ValidatedSetup) -> FarFieldMagnification {
    let s = setup.setup();
    let sp2 = s.sigma_p * s.sigma_p;
    let crystal = GAMMA * s.l_z / PI * (s.lambda_s.max(s.lambda_i) - s.lambda_p);
    let signal = s.d * s.lambda_s / (2.0 * PI);
    let idler = s.z_i * s.lambda_i / (2.0 * PI);
    let ratios = [
        ("sigma_p^2 vs crystal term", sp2 / crystal.abs()),
        ("d*lambda_s/2pi vs sigma_p^2", signal / sp2),
        ("z_i*lambda_i/2pi vs sigma_p^2", idler / sp2),
    ];
    let warnings = ratios
        .iter()
        .filter(|(_, r)| *r < FAR_FIELD_RATIO)
        .map(|(what, r)| format!("far-field condition weak: {what} ratio {r:.3}"))
        .collect();
    FarFieldMagnification {
        value: -(s.z_i / s.d) * (s.lambda_i / s.lambda_s),
        validity_ratio: ratios.iter().map(|(_, r)| *r).fold(f64::INFINITY, f64::min),
        warnings,
    }
}

/// Everything the closed-form model says about one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticReport {
    pub alpha1: Complex64,
    pub alpha2: Complex64,
    pub sigma_g: f64,
    pub magnification: f64,
    pub sigma_0: f64,
    pub resolution_r: f64,
    pub n_modes: Option<f64>,
    pub sigma_s_used: Option<f64>,
    pub threshold: f64,
    pub far_field: FarFieldMagnification,
    pub warnings: Vec<String>,
}

impl AnalyticReport {
    pub fn new(setup: &ValidatedSetup, threshold: f64, sigma_s: Option<f64>) -> Result<Self, AnalyticError> {
        let a = alphas(setup)?;
        let sigma_g = a.sigma_g()?;
        let magnification = a.magnification()?;
        let resolution_r = a.resolution(threshold)?;
        let n_modes = match sigma_s {
            Some(s) if s.is_finite() && s > 0.0 => Some(s / resolution_r),
            Some(s) => return Err(AnalyticError::InvalidInput { name: "sigma_s", value: s }),
            None => None,
        };
        let mut warnings = Vec::new();
        if magnification >= 0.0 {
            warnings.push(format!("magnification {magnification:.4} is not negative"));
        }
        Ok(AnalyticReport {
            alpha1: a.alpha1,
            alpha2: a.alpha2,
            sigma_g,
            magnification,
            sigma_0: pinhole_sigma0(setup),
            resolution_r,
            n_modes,
            sigma_s_used: sigma_s,
            threshold,
            far_field: magnification_farfield(setup),
            warnings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setup::OpticalSetup;
    use proptest::prelude::*;

    fn reference(sigma_p: f64, d: f64) -> ValidatedSetup {
        OpticalSetup { z_s: d.max(1.2), ..OpticalSetup::reference(sigma_p, d) }.validate().unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    // Values from a 40-digit evaluation of the same closed forms.
    #[test]
    fn alphas_match_high_precision_oracle() {
        let a = alphas(&reference(167e-6, 0.3)).unwrap();
        assert!(rel(a.alpha1.re, 1.650_765_640_215_624_7e-8) < 1e-10);
        assert!(rel(a.alpha1.im, 1.807_791_708_642_853_6e-7) < 1e-12);
        assert!(rel(a.alpha2.re, 0.410_016_486_709_870_04) < 1e-12);
        assert!(rel(a.alpha2.im, -0.490_700_137_073_673_94) < 1e-12);

        let s = reference(258e-6, 1.0);
        assert!(rel(sigma_g(&s).unwrap(), 6.459_228_417_995_323e-4) < 1e-11);
        assert!(rel(magnification(&s).unwrap(), -1.496_252_619_986_105_9) < 1e-11);
        assert!(rel(resolution(&s, 0.4).unwrap(), 1.549_022_857_016_503_2e-3) < 1e-11);

        let s = reference(100e-6, 0.1);
        assert!(rel(sigma_g(&s).unwrap(), 1.625_200_721_064_894_6e-3) < 1e-10);
        assert!(rel(magnification(&s).unwrap(), -14.694_181_934_651_874) < 1e-10);
    }

    #[test]
    fn non_degenerate_oracle() {
        let s = OpticalSetup { lambda_s: 600e-9, lambda_i: 840e-9, ..OpticalSetup::reference(200e-6, 0.5) }
            .validate()
            .unwrap();
        assert!(rel(sigma_g(&s).unwrap(), 1.019_536_824_166_984_2e-3) < 1e-10);
        assert!(rel(magnification(&s).unwrap(), -4.176_239_707_214_847_6) < 1e-10);
        assert!(rel(resolution(&s, 0.4).unwrap(), 8.759_909_217_731_531e-4) < 1e-10);
    }

    #[test]
    fn thin_crystal_limit() {
        let s = reference(167e-6, 0.3).modified(|o| o.l_z = 1e-15).unwrap();
        let a = alphas(&s).unwrap();
        let sp2 = s.sigma_p * s.sigma_p;
        let expected = Complex64::new(sp2, 0.0) / Complex64::new(sp2, s.d * s.lambda_s / (2.0 * PI));
        assert!((a.alpha2 - expected).norm() < 1e-9);
        assert!(rel(pinhole_sigma0(&s), s.sigma_p / 2f64.sqrt()) < 1e-9);
    }

    #[test]
    fn infinite_distance_limit() {
        let s = reference(167e-6, 0.3);
        let a = alphas_at(&s, f64::INFINITY).unwrap();
        assert_eq!(a.alpha2, Complex64::new(0.0, 0.0));
        let c = GAMMA * s.l_z / PI;
        let expected =
            Complex64::new(s.sigma_p.powi(2) + c * (s.lambda_i - s.lambda_p), s.lambda_i * s.z_i / (2.0 * PI));
        assert!((a.alpha1 - expected).norm() / expected.norm() < 1e-15);
        assert!(rel(a.sigma_g().unwrap(), sigma_g_far_field(&s)) < 1e-9);
    }

    #[test]
    fn sigma_g_converges_to_far_field() {
        for d in [50.0, 100.0, 1000.0] {
            let s = reference(258e-6, d);
            assert!(rel(sigma_g(&s).unwrap(), sigma_g_far_field(&s)) < 0.01, "d = {d}");
        }
    }

    #[test]
    fn sigma0_arithmetic() {
        let s = reference(167e-6, 0.3);
        assert!(rel(pinhole_sigma0(&s), 1.181_672_927_189_056_8e-4) < 1e-12);
        let direct = (167e-6f64.powi(2) / 2.0 + (0.455 / 4.0) * 350e-9 * 3e-3 / (2.0 * PI)).sqrt();
        assert!(rel(pinhole_sigma0(&s), direct) < 1e-14);
        assert!(pinhole_sigma0(&s) >= s.sigma_p / 2f64.sqrt());
    }

    #[test]
    fn optimal_source_values() {
        let o = optimal_source(1.5, 700e-9).unwrap();
        assert!(rel(o.sigma_0_star, 2.890_611_442_640_554e-4) < 1e-12);
        assert!(rel(far_field_width(o.sigma_0_star, 1.5, 700e-9), o.sigma_g_min) < 1e-12);
        let q = optimal_source(6.0, 700e-9).unwrap();
        assert!(rel(q.sigma_0_star, 2.0 * o.sigma_0_star) < 1e-12);
        assert!(matches!(optimal_source(0.0, 700e-9), Err(AnalyticError::InvalidInput { .. })));
    }

    #[test]
    fn far_field_magnification() {
        let m = magnification_farfield(&reference(167e-6, 0.3));
        assert_eq!(m.value, -5.0);
        let s = reference(167e-6, 1.5);
        assert_eq!(magnification_farfield(&s).value, -1.0);
        let m = magnification_farfield(&reference(258e-6, 1.0));
        assert_eq!(m.value, -1.5);
        assert!(!m.warnings.is_empty());
        assert!(rel(magnification(&reference(258e-6, 1.0)).unwrap(), m.value) > 0.0);
    }

    #[test]
    fn magnification_approaches_far_field_when_valid() {
        // Narrow pump, long distances: all three ratios ≥ 30.
        let s = OpticalSetup { z_s: 20.0, z_i: 20.0, ..OpticalSetup::reference(60e-6, 10.0) }.validate().unwrap();
        let ff = magnification_farfield(&s);
        assert!(ff.validity_ratio >= 30.0, "{}", ff.validity_ratio);
        assert!(rel(magnification(&s).unwrap(), ff.value) < 0.05);
    }

    #[test]
    fn resolution_identity_and_errors() {
        let s = reference(258e-6, 1.0);
        for th in [0.1, 0.4, 0.8] {
            let r = resolution(&s, th).unwrap();
            let sg = sigma_g(&s).unwrap();
            let m = magnification(&s).unwrap();
            let other = 2.0 * sg * (-2.0 * (th / 2.0).ln()).sqrt() / m.abs();
            assert!(rel(r, other) < 1e-12);
        }
        assert_eq!(resolution(&s, 1.0), Err(AnalyticError::InvalidThreshold(1.0)));
        assert_eq!(resolution(&s, 0.0), Err(AnalyticError::InvalidThreshold(0.0)));
        let a = alphas_at(&s, f64::INFINITY).unwrap();
        assert!(matches!(a.resolution(0.4), Err(AnalyticError::ZeroMagnification(_))));
    }

    #[test]
    fn mode_count() {
        let s = reference(258e-6, 1.0);
        let r = resolution(&s, 0.4).unwrap();
        assert!(rel(n_modes(&s, r, 0.4).unwrap(), 1.0) < 1e-15);
        assert!(matches!(n_modes(&s, -1.0, 0.4), Err(AnalyticError::InvalidInput { .. })));
    }

    #[test]
    fn image_position_is_linear() {
        let s = reference(167e-6, 0.3);
        assert_eq!(image_position(&s, 0.0).unwrap(), 0.0);
        let m = magnification(&s).unwrap();
        assert!(rel(image_position(&s, 470e-6).unwrap(), 470e-6 * m) < 1e-15);
    }

    #[test]
    fn report_fields() {
        let s = reference(258e-6, 1.0);
        let r = AnalyticReport::new(&s, 0.4, Some(6e-3)).unwrap();
        assert!(r.sigma_g > 0.0 && r.resolution_r > 0.0 && r.magnification < 0.0);
        assert!(rel(r.n_modes.unwrap(), 6e-3 / r.resolution_r) < 1e-15);
        assert!(r.warnings.is_empty());
    }

    proptest! {
        #[test]
        fn magnification_always_negative(sp in 50e-6f64..800e-6, d in 0.05f64..2.0) {
            let s = reference(sp, d);
            prop_assert!(magnification(&s).unwrap() < 0.0);
        }

        // Scaling σ_P² and every λz/2π, λl_z term by the same factor scales α₁ by it.
        #[test]
        fn alpha1_scales_as_area(sp in 60e-6f64..600e-6, d in 0.1f64..1.5, f in 0.25f64..4.0) {
            let s = reference(sp, d);
            let t = s
                .modified(|o| {
                    o.sigma_p *= f.sqrt();
                    o.l_z *= f;
                    o.d *= f;
                    o.z_s *= f;
                    o.z_i *= f;
                })
                .unwrap();
            let (a, b) = (alphas(&s).unwrap(), alphas(&t).unwrap());
            prop_assert!((b.alpha1 - a.alpha1 * f).norm() <= 1e-12 * b.alpha1.norm());
            prop_assert!((b.alpha2 - a.alpha2).norm() <= 1e-12);
        }

        #[test]
        fn far_field_identity_holds_off_degeneracy(ls in 500e-9f64..1000e-9, li in 500e-9f64..1000e-9, sp in 60e-6f64..600e-6) {
            let lp = 1.0 / (1.0 / ls + 1.0 / li);
            let s = OpticalSetup { lambda_p: lp, lambda_s: ls, lambda_i: li, ..OpticalSetup::reference(sp, 0.3) }
                .validate()
                .unwrap();
            let a = alphas_at(&s, f64::INFINITY).unwrap();
            prop_assert!((a.sigma_g().unwrap() - sigma_g_far_field(&s)).abs() <= 1e-9 * sigma_g_far_field(&s));
        }
    }
}
