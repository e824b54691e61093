//! Biphoton spectral amplitude
//! `ψ(k_xS, k_xI) = φ_P(k_xS + k_xI) · PM(Δk_z l_z / 2)`.

use ndarray::Array2;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::fourier::norm_sqr;
use crate::grid::{SpectralGrid, PUMP_COVERAGE_SIGMAS};
use crate::setup::{PhaseMatchingModel, PropagationMode, ValidatedSetup};

/// Width factor of the Gaussian fit to `sinc`: `sinc(u) ≈ exp(−0.455·u)` for
/// the (non-negative) phase-matching argument `u = Δk_z l_z / 2`, which is
/// itself quadratic in the transverse wave vectors.
pub const SINC_GAUSSIAN_FACTOR: f64 = 0.455;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpdcError {
    #[error("{axis} axis covers |k| ≤ {k_max:.3e} 1/m but the pump spectrum needs {needed:.3e} 1/m")]
    GridUndersampled { axis: &'static str, k_max: f64, needed: f64 },
    #[error("amplitude vanishes on the grid")]
    ZeroAmplitude,
}

/// Marker for transverse wave vectors that do not propagate along z.
#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("evanescent component (negative k_z² radicand)")]
pub struct Evanescent;

/// Which domain each axis of a [`BiphotonAmplitude`] is currently in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// Both axes in wave-vector space.
    KK,
    /// Signal in position space, idler in wave-vector space.
    XK,
    /// Signal in wave-vector space, idler in position space.
    KX,
    /// Both axes in position space.
    XX,
}

impl Representation {
    pub fn signal_in_k(self) -> bool {
        matches!(self, Representation::KK | Representation::KX)
    }

    pub fn idler_in_k(self) -> bool {
        matches!(self, Representation::KK | Representation::XK)
    }

    pub fn from_flags(signal_in_k: bool, idler_in_k: bool) -> Self {
        match (signal_in_k, idler_in_k) {
            (true, true) => Representation::KK,
            (false, true) => Representation::XK,
            (true, false) => Representation::KX,
            (false, false) => Representation::XX,
        }
    }
}

/// Complex two-photon field on a grid. Rows index the signal axis, columns
/// the idler axis.
#[derive(Debug, Clone)]
pub struct BiphotonAmplitude {
    pub data: Array2<Complex64>,
    pub grid: SpectralGrid,
    pub representation: Representation,
}

impl BiphotonAmplitude {
    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(self.data.iter().copied())
    }
}

/// Gaussian pump spectrum with unit peak, `exp(−σ_P² q² / 2)`.
pub fn pump_spectrum(q: f64, setup: &ValidatedSetup) -> f64 {
    (-setup.sigma_p * setup.sigma_p * q * q / 2.0).exp()
}

/// Longitudinal phase mismatch `Δk_z = k_zP − k_zS − k_zI` with transverse
/// phase matching `k_xP = k_s + k_i`.
pub fn phase_mismatch(k_s: f64, k_i: f64, setup: &ValidatedSetup) -> Result<f64, Evanescent> {
    let d = setup.derived();
    let q = k_s + k_i;
    match setup.propagation_mode {
        PropagationMode::Paraxial => {
            Ok(k_s * k_s / (2.0 * d.k_s) + k_i * k_i / (2.0 * d.k_i) - q * q / (2.0 * d.k_p))
        }
        PropagationMode::Exact => {
            let rp = d.k_p * d.k_p - q * q;
            let rs = d.k_s * d.k_s - k_s * k_s;
            let ri = d.k_i * d.k_i - k_i * k_i;
            if rp < 0.0 || rs < 0.0 || ri < 0.0 {
                return Err(Evanescent);
            }
            Ok(rp.sqrt() - rs.sqrt() - ri.sqrt())
        }
    }
}

/// Phase-matching factor for the mismatch `dkz`: `sinc(u)` or its Gaussian
/// surrogate `exp(−0.455·|u|)`, with `u = Δk_z l_z / 2`.
pub fn phase_matching_amplitude(dkz: f64, setup: &ValidatedSetup) -> f64 {
    let u = dkz * setup.l_z / 2.0;
    match setup.pm_model {
        PhaseMatchingModel::Sinc => {
            if u == 0.0 {
                1.0
            } else {
                u.sin() / u
            }
        }
        // Δk_z ≥ 0 for every propagating pair; |u| only guards roundoff.
        PhaseMatchingModel::Gaussian => (-SINC_GAUSSIAN_FACTOR * u.abs()).exp(),
    }
}

/// Unnormalized `ψ(k_s, k_i)`; evanescent samples are zero.
pub fn amplitude_at(k_s: f64, k_i: f64, setup: &ValidatedSetup) -> f64 {
    match phase_mismatch(k_s, k_i, setup) {
        Ok(dkz) => pump_spectrum(k_s + k_i, setup) * phase_matching_amplitude(dkz, setup),
        Err(Evanescent) => 0.0,
    }
}

/// Unnormalized column of ψ at idler sample `m`, over all signal samples.
pub fn amplitude_column(grid: &SpectralGrid, setup: &ValidatedSetup, m: usize) -> Vec<Complex64> {
    let k_i = grid.idler.k(m);
    (0..grid.signal.len()).map(|j| Complex64::new(amplitude_at(grid.signal.k(j), k_i, setup), 0.0)).collect()
}

pub fn check_pump_coverage(grid: &SpectralGrid, setup: &ValidatedSetup) -> Result<(), SpdcError> {
    let needed = PUMP_COVERAGE_SIGMAS / setup.sigma_p;
    for (axis, a) in [("signal", &grid.signal), ("idler", &grid.idler)] {
        if a.k_max() < needed {
            return Err(SpdcError::GridUndersampled { axis, k_max: a.k_max(), needed });
        }
    }
    Ok(())
}

/// ψ on the grid in the KK representation, normalized so that
/// `Σ |ψ|² dk_s dk_i = 1`.
pub fn psi_spdc(grid: &SpectralGrid, setup: &ValidatedSetup) -> Result<BiphotonAmplitude, SpdcError> {
    check_pump_coverage(grid, setup)?;
    let (ns, ni) = grid.shape();
    let ks = grid.signal.wavenumbers();
    let ki = grid.idler.wavenumbers();
    let mut data = Array2::<Complex64>::zeros((ns, ni));
    data.axis_iter_mut(ndarray::Axis(0)).into_par_iter().enumerate().for_each(|(j, mut row)| {
        for (m, v) in row.iter_mut().enumerate() {
            *v = Complex64::new(amplitude_at(ks[j], ki[m], setup), 0.0);
        }
    });
    let mass = norm_sqr(data.iter().copied()) * grid.signal.dk() * grid.idler.dk();
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(SpdcError::ZeroAmplitude);
    }
    let scale = 1.0 / mass.sqrt();
    data.mapv_inplace(|v| v * scale);
    Ok(BiphotonAmplitude { data, grid: *grid, representation: Representation::KK })
}
