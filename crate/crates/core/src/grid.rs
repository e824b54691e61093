//! Paired position / wave-vector sampling of the signal and idler axes.

use std::f64::consts::PI;

use thiserror::Error;

use crate::analytic::{self, AnalyticError};
use crate::objects::ObjectSpec;
use crate::setup::ValidatedSetup;

pub const MIN_SAMPLES: usize = 64;
pub const MAX_SAMPLES: usize = 1 << 16;

/// Finest object feature that can still be put on a grid [m].
pub const MIN_FEATURE: f64 = 1e-8;

/// Phase-matching argument `Δk_z l_z / 2` up to which the source spectrum is
/// kept on the grid. The Gaussian surrogate has decayed to ~1e-4 there and the
/// sinc envelope to 1/20.
pub const PM_COVERAGE_ARGUMENT: f64 = 20.0;

/// Pump spectrum coverage in units of its width `1/σ_P`.
pub const PUMP_COVERAGE_SIGMAS: f64 = 6.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("sample count {n} must be a power of two in [{MIN_SAMPLES}, {MAX_SAMPLES}]")]
    InvalidSize { n: usize },
    #[error("window must be a finite positive length, got {window}")]
    InvalidWindow { window: f64 },
    #[error("object feature {feature:.3e} m is below the resolvable limit {MIN_FEATURE:e} m")]
    ObjectUnresolvable { feature: f64 },
    #[error("automatic grid needs {needed} samples on the {axis} axis (limit {MAX_SAMPLES})")]
    TooLarge { axis: &'static str, needed: usize },
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

/// One uniformly sampled axis, centered on zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAxis {
    n: usize,
    dx: f64,
}

impl SampledAxis {
    pub fn new(n: usize, dx: f64) -> Result<Self, GridError> {
        if !n.is_power_of_two() || !(MIN_SAMPLES..=MAX_SAMPLES).contains(&n) {
            return Err(GridError::InvalidSize { n });
        }
        if !(dx.is_finite() && dx > 0.0) {
            return Err(GridError::InvalidWindow { window: dx * n as f64 });
        }
        Ok(SampledAxis { n, dx })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / (self.n as f64 * self.dx)
    }

    pub fn window(&self) -> f64 {
        self.n as f64 * self.dx
    }

    /// Largest wave number magnitude on the axis, `π/dx`.
    pub fn k_max(&self) -> f64 {
        PI / self.dx
    }

    /// Index of the zero sample.
    pub fn center(&self) -> usize {
        self.n / 2
    }

    pub fn x(&self, j: usize) -> f64 {
        (j as f64 - self.center() as f64) * self.dx
    }

    pub fn k(&self, m: usize) -> f64 {
        (m as f64 - self.center() as f64) * self.dk()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|m| self.k(m)).collect()
    }

    /// Nearest sample to `x`, if `x` lies inside the sampled interval.
    pub fn nearest_index(&self, x: f64) -> Option<usize> {
        let idx = (x / self.dx).round() + self.center() as f64;
        if idx >= 0.0 && idx < self.n as f64 {
            Some(idx as usize)
        } else {
            None
        }
    }

    /// Whether `[lo, hi]` lies strictly inside the sampled positions.
    pub fn contains_interval(&self, lo: f64, hi: f64) -> bool {
        lo > self.x(0) && hi < self.x(self.n - 1)
    }
}

/// Sampling of the (signal, idler) plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralGrid {
    pub signal: SampledAxis,
    pub idler: SampledAxis,
}

impl SpectralGrid {
    pub fn new(signal: SampledAxis, idler: SampledAxis) -> Self {
        SpectralGrid { signal, idler }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.signal.len(), self.idler.len())
    }

    /// Smallest grid that is at least as fine and as wide as each input on
    /// both axes.
    pub fn union(grids: &[SpectralGrid]) -> Result<SpectralGrid, GridError> {
        let merge = |axes: Vec<SampledAxis>, name: &'static str| {
            let dx = axes.iter().map(|a| a.dx).fold(f64::INFINITY, f64::min);
            let window = axes.iter().map(|a| a.window()).fold(0.0, f64::max);
            axis_for(window, dx, name)
        };
        Ok(SpectralGrid {
            signal: merge(grids.iter().map(|g| g.signal).collect(), "signal")?,
            idler: merge(grids.iter().map(|g| g.idler).collect(), "idler")?,
        })
    }
}

/// Grid with `dx = window / n` on each axis.
pub fn make_grid(n_s: usize, n_i: usize, window_s: f64, window_i: f64) -> Result<SpectralGrid, GridError> {
    for w in [window_s, window_i] {
        if !(w.is_finite() && w > 0.0) {
            return Err(GridError::InvalidWindow { window: w });
        }
    }
    Ok(SpectralGrid {
        signal: SampledAxis::new(n_s, window_s / n_s as f64)?,
        idler: SampledAxis::new(n_i, window_i / n_i as f64)?,
    })
}

/// Keeps `dx` and rounds the sample count up to a power of two.
fn axis_for(window: f64, dx: f64, axis: &'static str) -> Result<SampledAxis, GridError> {
    let needed = (window / dx).ceil().max(1.0);
    if !needed.is_finite() || needed > MAX_SAMPLES as f64 {
        return Err(GridError::TooLarge { axis, needed: needed.min(usize::MAX as f64) as usize });
    }
    let n = (needed as usize).next_power_of_two().max(MIN_SAMPLES);
    SampledAxis::new(n, dx)
}

/// Transverse wave number at which the collinear phase-matching argument
/// reaches [`PM_COVERAGE_ARGUMENT`] for anti-correlated pairs `k_xI = −k_xS`.
pub fn phase_matching_extent(setup: &ValidatedSetup) -> f64 {
    let d = setup.derived();
    let curvature = 0.5 / d.k_s + 0.5 / d.k_i;
    (2.0 * PM_COVERAGE_ARGUMENT / (setup.l_z * curvature)).sqrt()
}

/// Wave-number half-width both axes must resolve for an object of half
/// extent `half_extent` at distance `d` (infinite for unbounded objects).
pub fn required_k_extent(setup: &ValidatedSetup, half_extent: f64) -> f64 {
    let sigma_0 = analytic::pinhole_sigma0(setup);
    let geometric = setup.derived().k_s * (half_extent + 6.0 * sigma_0) / setup.d;
    let pm = phase_matching_extent(setup);
    geometric.min(pm) + PUMP_COVERAGE_SIGMAS / setup.sigma_p
}

/// Heuristic grid for imaging `object` at the configured distance.
///
/// * signal step: `dx_s ≤ min(feature/4, σ_G/4, π/K)` where `K` covers the
///   part of the source spectrum that can reach the object;
/// * signal window: contains the object and everything the retained spectrum
///   can illuminate at distance `d`, so the periodic field does not wrap onto
///   the object;
/// * idler window: `≥ max(fov_i, 2(|x₀(a_max)| + 6σ_G))`.
pub fn auto_grid(setup: &ValidatedSetup, object: &ObjectSpec, fov_i: f64) -> Result<SpectralGrid, GridError> {
    if !(fov_i.is_finite() && fov_i > 0.0) {
        return Err(GridError::InvalidWindow { window: fov_i });
    }
    let feature = object.finest_feature();
    if let Some(f) = feature {
        if !(f >= MIN_FEATURE) {
            return Err(GridError::ObjectUnresolvable { feature: f });
        }
    }
    let half_extent = object.half_extent();
    let sigma_g = analytic::sigma_g(setup)?;
    let magnification = analytic::magnification(setup)?;
    let sigma_0 = analytic::pinhole_sigma0(setup);
    let derived = setup.derived();

    let k_needed = required_k_extent(setup, half_extent);
    let dx_s = feature
        .map(|f| f / 4.0)
        .unwrap_or(f64::INFINITY)
        .min(sigma_g / 4.0)
        .min(PI / k_needed);
    // Before the object the field is band-limited by the source spectrum, even
    // when the object forces a finer step.
    let source_k = phase_matching_extent(setup) + PUMP_COVERAGE_SIGMAS / setup.sigma_p;
    let reach_s = setup.d * (PI / dx_s).min(source_k) / derived.k_s + 6.0 * sigma_0;
    let mut window_s = 2.0 * 1.1 * reach_s;
    if half_extent.is_finite() {
        window_s = window_s.max(2.5 * half_extent);
    }

    let dx_i = (sigma_g / 4.0).min(PI / k_needed);
    let window_i = if half_extent.is_finite() {
        2.0 * (magnification.abs() * half_extent + 6.0 * sigma_g)
    } else {
        2.0 * 1.1 * (setup.z_i * (PI / dx_i) / derived.k_i + 6.0 * sigma_0)
    }
    .max(fov_i);

    Ok(SpectralGrid {
        signal: axis_for(window_s, dx_s, "signal")?,
        idler: axis_for(window_i, dx_i, "idler")?,
    })
}

/// Grid for the unobstructed signal illumination at the object plane. Only
/// the signal axis carries positions; the idler axis is summed in k-space, so
/// its step just has to resolve the pump spectrum.
pub fn illumination_grid(setup: &ValidatedSetup) -> Result<SpectralGrid, GridError> {
    let k_extent = phase_matching_extent(setup) + PUMP_COVERAGE_SIGMAS / setup.sigma_p;
    let sigma_0 = analytic::pinhole_sigma0(setup);
    let dx_s = PI / k_extent;
    let reach = setup.d * k_extent / setup.derived().k_s + 6.0 * sigma_0;
    let signal = axis_for(2.0 * 1.1 * reach, dx_s, "signal")?;
    // Four idler samples per pump width 1/σ_P across the same wave-number band.
    let dk_i = 0.25 / setup.sigma_p;
    let n_i = (2.0 * k_extent / dk_i).ceil();
    let window_i = 2.0 * PI / dk_i;
    let idler = axis_for(window_i, window_i / n_i, "idler")?;
    Ok(SpectralGrid { signal, idler })
}
