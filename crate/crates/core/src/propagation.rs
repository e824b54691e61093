//! Free-space angular-spectrum transfer functions `h(k_x; z, λ)`.

use std::f64::consts::PI;

use ndarray::Axis;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::setup::PropagationMode;
use crate::spdc::BiphotonAmplitude;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("{axis} axis must be in wave-vector space for propagation")]
    WrongRepresentation { axis: &'static str },
    #[error("propagation distance must be finite and non-negative, got {0}")]
    NegativeDistance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldAxis {
    Signal,
    Idler,
}

const TWO_PI_HI: f64 = 2.0 * PI;
// 2π − fl(2π)
const TWO_PI_LO: f64 = 2.449_293_598_294_706_4e-16;

/// `exp(i·beta·z)` with the product formed exactly and reduced modulo 2π in
/// double-double precision. Phases of 10⁷ rad are routine here, and this keeps
/// `h(z₁)h(z₂) = h(z₁+z₂)` exact whenever `z₁ + z₂` is.
fn unit_phasor(beta: f64, z: f64) -> Complex64 {
    let p = beta * z;
    let e = beta.mul_add(z, -p);
    let turns = (p / TWO_PI_HI).round();
    let r = (-turns).mul_add(TWO_PI_HI, p) - turns * TWO_PI_LO + e;
    Complex64::new(r.cos(), r.sin())
}

/// Longitudinal wave number used by the transfer function, or `None` for an
/// evanescent component in exact mode.
pub fn longitudinal_k(k_x: f64, lambda: f64, mode: PropagationMode) -> Option<f64> {
    let k = 2.0 * PI / lambda;
    match mode {
        PropagationMode::Paraxial => Some(k - k_x * k_x / (2.0 * k)),
        PropagationMode::Exact => {
            let r = k * k - k_x * k_x;
            (r >= 0.0).then(|| r.sqrt())
        }
    }
}

/// `exp(i k_z z)`; exact mode returns 0 for `|k_x| > k`. The global phase
/// `exp(i k z)` is kept.
pub fn transfer(k_x: f64, z: f64, lambda: f64, mode: PropagationMode) -> Complex64 {
    match longitudinal_k(k_x, lambda, mode) {
        Some(kz) => unit_phasor(kz, z),
        None => Complex64::new(0.0, 0.0),
    }
}

/// Multiplies `field` by the transfer function along one axis.
pub fn apply_transfer(
    field: &mut BiphotonAmplitude,
    axis: FieldAxis,
    z: f64,
    lambda: f64,
    mode: PropagationMode,
) -> Result<(), PropagationError> {
    if !(z.is_finite() && z >= 0.0) {
        return Err(PropagationError::NegativeDistance(z));
    }
    let rep = field.representation;
    match axis {
        FieldAxis::Signal => {
            if !rep.signal_in_k() {
                return Err(PropagationError::WrongRepresentation { axis: "signal" });
            }
            let h: Vec<Complex64> =
                field.grid.signal.wavenumbers().into_iter().map(|k| transfer(k, z, lambda, mode)).collect();
            field.data.axis_iter_mut(Axis(0)).into_par_iter().zip(h.par_iter()).for_each(|(mut row, hj)| {
                row.mapv_inplace(|v| v * hj);
            });
        }
        FieldAxis::Idler => {
            if !rep.idler_in_k() {
                return Err(PropagationError::WrongRepresentation { axis: "idler" });
            }
            let h: Vec<Complex64> =
                field.grid.idler.wavenumbers().into_iter().map(|k| transfer(k, z, lambda, mode)).collect();
            field.data.axis_iter_mut(Axis(0)).into_par_iter().for_each(|mut row| {
                for (v, hm) in row.iter_mut().zip(&h) {
                    *v *= hm;
                }
            });
        }
    }
    Ok(())
}
