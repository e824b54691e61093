//! One-dimensional profiles: Gaussian least-squares fit, moment width and
//! peak finding.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::fourier::pairwise_sum;

pub const FIT_MAX_ITERATIONS: usize = 200;
pub const FIT_TOLERANCE: f64 = 1e-10;
/// Largest acceptable |residual| relative to the profile peak.
pub const FIT_RESIDUAL_LIMIT: f64 = 0.2;
/// A maximum counts as dominant above this fraction of the global maximum.
pub const PEAK_MIN_HEIGHT: f64 = 0.25;
/// and with at least this prominence, also relative to the global maximum.
pub const PEAK_MIN_PROMINENCE: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("profile needs at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("coordinates and values differ in length ({coords} vs {values})")]
    LengthMismatch { coords: usize, values: usize },
    #[error("profile contains non-finite or negative values")]
    InvalidValues,
    #[error("profile has zero total mass")]
    ZeroMass,
    #[error("Gaussian fit diverged (max residual {residual:.3e} of peak)")]
    FitDiverged { residual: f64 },
    #[error("expected two dominant maxima, found {found}")]
    NotBimodal { found: usize },
}

/// Sampled non-negative profile on uniformly spaced coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile1D {
    coords: Vec<f64>,
    values: Vec<f64>,
    label: String,
}

impl Profile1D {
    pub fn new(coords: Vec<f64>, values: Vec<f64>, label: impl Into<String>) -> Result<Self, ProfileError> {
        if coords.len() != values.len() {
            return Err(ProfileError::LengthMismatch { coords: coords.len(), values: values.len() });
        }
        if coords.len() < 2 {
            return Err(ProfileError::TooShort { needed: 2, got: coords.len() });
        }
        if values.iter().chain(&coords).any(|v| !v.is_finite()) || values.iter().any(|&v| v < 0.0) {
            return Err(ProfileError::InvalidValues);
        }
        Ok(Profile1D { coords, values, label: label.into() })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.coords[1] - self.coords[0]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `Σ values · step`.
    pub fn mass(&self) -> f64 {
        pairwise_sum(&self.values) * self.step()
    }

    /// Linear interpolation at `x`, zero outside the sampled range.
    pub fn value_at(&self, x: f64) -> f64 {
        let t = (x - self.coords[0]) / self.step();
        if t < 0.0 || t > (self.len() - 1) as f64 {
            return 0.0;
        }
        let j = (t.floor() as usize).min(self.len() - 2);
        let f = t - j as f64;
        self.values[j] * (1.0 - f) + self.values[j + 1] * f
    }

    /// First moment and standard deviation of the profile as a density.
    pub fn moments(&self) -> Result<(f64, f64), ProfileError> {
        let total = pairwise_sum(&self.values);
        if !(total > 0.0) {
            return Err(ProfileError::ZeroMass);
        }
        let first: Vec<f64> = self.coords.iter().zip(&self.values).map(|(x, v)| x * v).collect();
        let mean = pairwise_sum(&first) / total;
        let second: Vec<f64> =
            self.coords.iter().zip(&self.values).map(|(x, v)| (x - mean) * (x - mean) * v).collect();
        Ok((mean, (pairwise_sum(&second) / total).sqrt()))
    }
}

/// `√(⟨x²⟩ − ⟨x⟩²)` of the profile treated as a density.
pub fn moment_width(profile: &Profile1D) -> Result<f64, ProfileError> {
    profile.moments().map(|(_, w)| w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
    pub residual_rms: f64,
    /// Largest |residual| divided by the profile peak.
    pub residual_max: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn model(p: &Vector3<f64>, x: f64) -> (f64, Vector3<f64>) {
    let (a, c, s) = (p[0], p[1], p[2]);
    let u = (x - c) / s;
    let g = (-0.5 * u * u).exp();
    let v = a * g;
    (v, Vector3::new(g, v * u / s, v * u * u / s))
}

fn sum_sq(profile: &Profile1D, p: &Vector3<f64>) -> f64 {
    let r: Vec<f64> = profile.coords.iter().zip(&profile.values).map(|(&x, &y)| (model(p, x).0 - y).powi(2)).collect();
    pairwise_sum(&r)
}

/// Least-squares fit of `A·exp(−(x−x₀)²/(2σ²))`, started from the moments
/// and refined with Levenberg–Marquardt.
pub fn fit_gaussian(profile: &Profile1D) -> Result<GaussianFit, ProfileError> {
    if profile.len() < 8 {
        return Err(ProfileError::TooShort { needed: 8, got: profile.len() });
    }
    let peak = profile.max();
    if !(peak > 0.0) {
        return Err(ProfileError::ZeroMass);
    }
    let (mean, width) = profile.moments()?;
    let min_width = 0.25 * profile.step().abs();
    let mut p = Vector3::new(peak, mean, width.max(min_width));
    let mut cost = sum_sq(profile, &p);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < FIT_MAX_ITERATIONS {
        iterations += 1;
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for (&x, &y) in profile.coords.iter().zip(&profile.values) {
            let (v, g) = model(&p, x);
            jtj += g * g.transpose();
            jtr += g * (y - v);
        }
        let mut accepted = false;
        for _ in 0..50 {
            let mut damped = jtj;
            for i in 0..3 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(f64::MIN_POSITIVE);
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p + step;
            trial[2] = trial[2].abs().max(min_width);
            let trial_cost = sum_sq(profile, &trial);
            if trial_cost.is_finite() && trial_cost <= cost {
                // The center may sit at 0, so its change is measured against the width.
                let change = ((trial[0] - p[0]) / p[0])
                    .abs()
                    .max(((trial[1] - p[1]) / p[2]).abs())
                    .max(((trial[2] - p[2]) / p[2]).abs());
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if change < FIT_TOLERANCE {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No descent direction left: the fit sits at a minimum.
            converged = true;
        }
        if converged {
            break;
        }
    }

    let residuals: Vec<f64> = profile.coords.iter().zip(&profile.values).map(|(&x, &y)| model(&p, x).0 - y).collect();
    let residual_max = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs())) / peak;
    let residual_rms = (cost / profile.len() as f64).sqrt();
    if !(p.iter().all(|v| v.is_finite())) || residual_max > FIT_RESIDUAL_LIMIT {
        return Err(ProfileError::FitDiverged { residual: residual_max });
    }
    Ok(GaussianFit {
        center: p[1],
        width: p[2].abs(),
        amplitude: p[0],
        residual_rms,
        residual_max,
        iterations,
        converged,
    })
}

/// Indices of local maxima whose height is at least 25% of the global
/// maximum and whose prominence is at least 5% of it, ordered by position.
pub fn dominant_maxima(profile: &Profile1D) -> Vec<usize> {
    let v = &profile.values;
    let n = v.len();
    let top = profile.max();
    if !(top > 0.0) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut j = 0;
    while j < n {
        // Treat a run of equal samples as one candidate located at its middle.
        let mut end = j;
        while end + 1 < n && v[end + 1] == v[j] {
            end += 1;
        }
        let left_lower = j == 0 || v[j - 1] < v[j];
        let right_lower = end + 1 == n || v[end + 1] < v[j];
        if left_lower && right_lower && v[j] >= PEAK_MIN_HEIGHT * top {
            let h = v[j];
            let mut left_min = h;
            let mut k = j;
            while k > 0 && v[k - 1] <= h {
                k -= 1;
                left_min = left_min.min(v[k]);
            }
            let mut right_min = h;
            let mut k = end;
            while k + 1 < n && v[k + 1] <= h {
                k += 1;
                right_min = right_min.min(v[k]);
            }
            // Prominence: height above the higher of the two surrounding minima.
            let prominence = h - left_min.max(right_min);
            if prominence >= PEAK_MIN_PROMINENCE * top {
                out.push((j + end) / 2);
            }
        }
        j = end + 1;
    }
    out
}

/// `G(midpoint)/max G` for a profile with exactly two dominant maxima.
pub fn midpoint_ratio(profile: &Profile1D) -> Result<f64, ProfileError> {
    let peaks = dominant_maxima(profile);
    if peaks.len() != 2 {
        return Err(ProfileError::NotBimodal { found: peaks.len() });
    }
    let mid = 0.5 * (profile.coords[peaks[0]] + profile.coords[peaks[1]]);
    Ok(profile.value_at(mid) / profile.max())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(n: usize, dx: f64) -> Vec<f64> {
        (0..n).map(|j| (j as f64 - (n / 2) as f64) * dx).collect()
    }

    fn gaussian(x: &[f64], c: f64, s: f64, a: f64) -> Vec<f64> {
        x.iter().map(|&x| a * (-(x - c) * (x - c) / (2.0 * s * s)).exp()).collect()
    }

    #[test]
    fn exact_gaussian_recovered() {
        let x = axis(512, 20e-6);
        let p = Profile1D::new(x.clone(), gaussian(&x, 1e-3, 0.3e-3, 2.5), "x").unwrap();
        let f = fit_gaussian(&p).unwrap();
        assert!((f.center - 1e-3).abs() / 1e-3 < 1e-6);
        assert!((f.width - 0.3e-3).abs() / 0.3e-3 < 1e-6);
        assert!((f.amplitude - 2.5).abs() / 2.5 < 1e-6);
        assert!(f.residual_max < 1e-8);
        assert!(f.converged);
    }

    #[test]
    fn perturbed_gaussian_recovered() {
        let x = axis(512, 20e-6);
        let clean = gaussian(&x, 1e-3, 0.3e-3, 1.0);
        // Deterministic uniform perturbation in [-1%, 1%] of the peak.
        let mut state = 0x2545_f491_4f6c_dd1du64;
        let noisy: Vec<f64> = clean
            .iter()
            .map(|v| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                let u = (state >> 11) as f64 / (1u64 << 53) as f64;
                (v + 0.01 * (2.0 * u - 1.0)).max(0.0)
            })
            .collect();
        let f = fit_gaussian(&Profile1D::new(x, noisy, "x").unwrap()).unwrap();
        assert!((f.center - 1e-3).abs() / 1e-3 < 0.02);
        assert!((f.width - 0.3e-3).abs() / 0.3e-3 < 0.02);
    }

    #[test]
    fn top_hat_is_rejected_by_the_fit() {
        let x = axis(512, 10e-6);
        let v: Vec<f64> = x.iter().map(|&x| if x.abs() <= 1e-3 { 1.0 } else { 0.0 }).collect();
        let p = Profile1D::new(x, v, "x").unwrap();
        match fit_gaussian(&p) {
            Err(ProfileError::FitDiverged { residual }) => assert!(residual > FIT_RESIDUAL_LIMIT),
            other => panic!("expected FitDiverged, got {other:?}"),
        }
    }

    #[test]
    fn moment_widths() {
        let x = axis(1024, 10e-6);
        let g = Profile1D::new(x.clone(), gaussian(&x, 0.0, 0.3e-3, 1.0), "x").unwrap();
        assert!((moment_width(&g).unwrap() - 0.3e-3).abs() / 0.3e-3 < 1e-6);

        // 201 samples of step dx: the discrete uniform variance is (n²−1)dx²/12.
        let w = 2e-3;
        let v: Vec<f64> = x.iter().map(|&x| if x.abs() <= w / 2.0 + 1e-12 { 1.0 } else { 0.0 }).collect();
        let hat = Profile1D::new(x.clone(), v, "x").unwrap();
        let m = moment_width(&hat).unwrap();
        assert!((m - w / 12f64.sqrt()).abs() / (w / 12f64.sqrt()) < 0.01);

        let zero = Profile1D::new(x.clone(), vec![0.0; x.len()], "x").unwrap();
        assert_eq!(moment_width(&zero), Err(ProfileError::ZeroMass));
    }

    #[test]
    fn fit_and_moment_agree_for_gaussians() {
        let x = axis(2048, 5e-6);
        for s in [50e-6, 0.3e-3, 1e-3] {
            let p = Profile1D::new(x.clone(), gaussian(&x, 2e-4, s, 1.0), "x").unwrap();
            let f = fit_gaussian(&p).unwrap();
            let m = moment_width(&p).unwrap();
            assert!((f.width - m).abs() / m < 0.01);
        }
    }

    #[test]
    fn invalid_profiles_rejected() {
        assert!(matches!(Profile1D::new(vec![0.0, 1.0], vec![1.0], "x"), Err(ProfileError::LengthMismatch { .. })));
        assert_eq!(Profile1D::new(vec![0.0, 1.0], vec![1.0, -1.0], "x"), Err(ProfileError::InvalidValues));
        let short = Profile1D::new(axis(4, 1.0), vec![0.0, 1.0, 2.0, 1.0], "x").unwrap();
        assert!(matches!(fit_gaussian(&short), Err(ProfileError::TooShort { .. })));
    }

    fn pair(x: &[f64], sep: f64, s: f64) -> Profile1D {
        let a = gaussian(x, -sep / 2.0, s, 1.0);
        let b = gaussian(x, sep / 2.0, s, 1.0);
        Profile1D::new(x.to_vec(), a.iter().zip(&b).map(|(a, b)| a + b).collect(), "x").unwrap()
    }

    #[test]
    fn midpoint_ratio_of_separated_pair_is_small() {
        let x = axis(2048, 1e-6);
        let r = midpoint_ratio(&pair(&x, 100e-6, 10e-6)).unwrap();
        assert!(r < 1e-5);
    }

    #[test]
    fn coincident_pair_is_not_bimodal() {
        let x = axis(2048, 1e-6);
        assert_eq!(midpoint_ratio(&pair(&x, 0.0, 10e-6)), Err(ProfileError::NotBimodal { found: 1 }));
    }

    #[test]
    fn small_ripples_are_not_dominant() {
        let x = axis(1024, 1e-6);
        let mut p = pair(&x, 200e-6, 20e-6).values().to_vec();
        for (j, v) in p.iter_mut().enumerate() {
            *v += 0.01 * ((j as f64) * 0.7).sin().abs();
        }
        let prof = Profile1D::new(x, p, "x").unwrap();
        assert_eq!(dominant_maxima(&prof).len(), 2);
    }
}
