//! Physical parameters of the lensless ghost-imaging experiment.
//!
//! All lengths are SI meters. The crystal and the surrounding medium have
//! refractive index 1, so every wave number is simply `2π/λ`.

use std::f64::consts::PI;

use thiserror::Error;

/// Speed of light in vacuum [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Relative tolerance on `1/λ_P = 1/λ_S + 1/λ_I`.
pub const ENERGY_TOLERANCE: f64 = 1e-9;

/// The pump Rayleigh length should exceed the crystal thickness by this factor.
pub const COLLIMATION_MARGIN: f64 = 10.0;

/// How longitudinal wave numbers are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PropagationMode {
    /// `k_z ≈ k − k_x²/(2k)`
    #[default]
    Paraxial,
    /// `k_z = (k² − k_x²)^{1/2}`
    Exact,
}

impl PropagationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PropagationMode::Paraxial => "paraxial",
            PropagationMode::Exact => "exact",
        }
    }
}

impl std::str::FromStr for PropagationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "paraxial" => Ok(PropagationMode::Paraxial),
            "exact" => Ok(PropagationMode::Exact),
            other => Err(format!("unknown propagation mode `{other}` (expected paraxial|exact)")),
        }
    }
}

/// Longitudinal phase-matching profile of the crystal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseMatchingModel {
    /// `sinc(Δk_z l_z / 2)`
    #[default]
    Sinc,
    /// Gaussian surrogate of the sinc, the one the closed-form model is built on.
    Gaussian,
}

impl PhaseMatchingModel {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseMatchingModel::Sinc => "sinc",
            PhaseMatchingModel::Gaussian => "gaussian",
        }
    }
}

impl std::str::FromStr for PhaseMatchingModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sinc" => Ok(PhaseMatchingModel::Sinc),
            "gaussian" | "gauss" => Ok(PhaseMatchingModel::Gaussian),
            other => Err(format!("unknown phase-matching model `{other}` (expected sinc|gaussian)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SetupError {
    #[error("energy not conserved: 1/λ_P = {inv_p:.9e} 1/m but 1/λ_S + 1/λ_I = {inv_si:.9e} 1/m")]
    EnergyMismatch { inv_p: f64, inv_si: f64 },
    #[error("`{name}` must be a finite positive length, got {value}")]
    NonPositiveLength { name: &'static str, value: f64 },
    #[error("bucket detector (z_s = {z_s} m) must not lie before the object (d = {d} m)")]
    GeometryOrder { d: f64, z_s: f64 },
    #[error("pump is not collimated: Rayleigh length {rayleigh} m does not exceed crystal thickness {l_z} m")]
    PumpNotCollimated { rayleigh: f64, l_z: f64 },
}

/// All parameters of one experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalSetup {
    /// Pump wavelength [m].
    pub lambda_p: f64,
    /// Signal wavelength [m].
    pub lambda_s: f64,
    /// Idler wavelength [m].
    pub lambda_i: f64,
    /// Crystal thickness [m].
    pub l_z: f64,
    /// Pump width in position space [m].
    pub sigma_p: f64,
    /// Crystal-to-object distance [m].
    pub d: f64,
    /// Crystal-to-bucket-detector distance [m].
    pub z_s: f64,
    /// Crystal-to-resolving-detector distance [m].
    pub z_i: f64,
    pub propagation_mode: PropagationMode,
    pub pm_model: PhaseMatchingModel,
}

impl OpticalSetup {
    /// Degenerate 350 nm → 700 nm + 700 nm source with a 3 mm crystal and the
    /// detectors at `z_S = 1.2 m`, `z_I = 1.5 m`.
    pub fn reference(sigma_p: f64, d: f64) -> Self {
        OpticalSetup {
            lambda_p: 350e-9,
            lambda_s: 700e-9,
            lambda_i: 700e-9,
            l_z: 3e-3,
            sigma_p,
            d,
            z_s: 1.2,
            z_i: 1.5,
            propagation_mode: PropagationMode::Paraxial,
            pm_model: PhaseMatchingModel::Sinc,
        }
    }

    pub fn with_pm_model(mut self, pm_model: PhaseMatchingModel) -> Self {
        self.pm_model = pm_model;
        self
    }

    pub fn with_mode(mut self, mode: PropagationMode) -> Self {
        self.propagation_mode = mode;
        self
    }

    pub fn validate(self) -> Result<ValidatedSetup, SetupError> {
        validate_setup(self)
    }
}

/// Quantities derived once from a validated setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derived {
    pub omega_p: f64,
    pub omega_s: f64,
    pub omega_i: f64,
    pub k_p: f64,
    pub k_s: f64,
    pub k_i: f64,
    /// `2π σ_P² / λ_P` [m].
    pub pump_rayleigh_length: f64,
}

/// A setup whose invariants have been checked.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedSetup {
    setup: OpticalSetup,
    derived: Derived,
    warnings: Vec<String>,
}

impl ValidatedSetup {
    pub fn setup(&self) -> &OpticalSetup {
        &self.setup
    }

    pub fn derived(&self) -> &Derived {
        &self.derived
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Re-validates a modified copy of the parameters.
    pub fn modified(&self, f: impl FnOnce(&mut OpticalSetup)) -> Result<ValidatedSetup, SetupError> {
        let mut s = self.setup;
        f(&mut s);
        validate_setup(s)
    }
}

impl std::ops::Deref for ValidatedSetup {
    type Target = OpticalSetup;

    fn deref(&self) -> &OpticalSetup {
        &self.setup
    }
}

fn check_length(name: &'static str, value: f64) -> Result<(), SetupError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(SetupError::NonPositiveLength { name, value })
    }
}

pub fn validate_setup(setup: OpticalSetup) -> Result<ValidatedSetup, SetupError> {
    let lengths = [
        ("lambda_p", setup.lambda_p),
        ("lambda_s", setup.lambda_s),
        ("lambda_i", setup.lambda_i),
        ("l_z", setup.l_z),
        ("sigma_p", setup.sigma_p),
        ("d", setup.d),
        ("z_s", setup.z_s),
        ("z_i", setup.z_i),
    ];
    for (name, value) in lengths {
        check_length(name, value)?;
    }

    let inv_p = 1.0 / setup.lambda_p;
    let inv_si = 1.0 / setup.lambda_s + 1.0 / setup.lambda_i;
    if (inv_p - inv_si).abs() > ENERGY_TOLERANCE * inv_p {
        return Err(SetupError::EnergyMismatch { inv_p, inv_si });
    }

    if setup.z_s < setup.d {
        return Err(SetupError::GeometryOrder { d: setup.d, z_s: setup.z_s });
    }

    let pump_rayleigh_length = 2.0 * PI * setup.sigma_p * setup.sigma_p / setup.lambda_p;
    if pump_rayleigh_length <= setup.l_z {
        return Err(SetupError::PumpNotCollimated { rayleigh: pump_rayleigh_length, l_z: setup.l_z });
    }
    let mut warnings = Vec::new();
    if pump_rayleigh_length < COLLIMATION_MARGIN * setup.l_z {
        warnings.push(format!(
            "pump Rayleigh length {:.3e} m is less than {}x the crystal thickness {:.3e} m",
            pump_rayleigh_length, COLLIMATION_MARGIN, setup.l_z
        ));
    }

    let k = |lambda: f64| 2.0 * PI / lambda;
    let omega = |lambda: f64| 2.0 * PI * SPEED_OF_LIGHT / lambda;
    let derived = Derived {
        omega_p: omega(setup.lambda_p),
        omega_s: omega(setup.lambda_s),
        omega_i: omega(setup.lambda_i),
        k_p: k(setup.lambda_p),
        k_s: k(setup.lambda_s),
        k_i: k(setup.lambda_i),
        pump_rayleigh_length,
    };

    Ok(ValidatedSetup { setup, derived, warnings })
}
