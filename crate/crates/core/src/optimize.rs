//! Pump-width optimization: coarse scan followed by golden-section search.

use rayon::prelude::*;
use thiserror::Error;

use crate::analytic::{self, AnalyticError};
use crate::setup::{SetupError, ValidatedSetup};

pub const SCAN_POINTS: usize = 32;
pub const RELATIVE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("invalid bounds [{lo:e}, {hi:e}] m")]
    BoundsInvalid { lo: f64, hi: f64 },
    #[error(transparent)]
    Setup(#[from] SetupError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    SigmaG,
    /// Two-slit resolution at the given visibility threshold.
    Resolution,
}

impl std::str::FromStr for Objective {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sigma_g" => Ok(Objective::SigmaG),
            "resolution" => Ok(Objective::Resolution),
            other => Err(format!("unknown objective '{other}' (expected sigma_g or resolution)")),
        }
    }
}

impl Objective {
    pub fn as_str(self) -> &'static str {
        match self {
            Objective::SigmaG => "sigma_g",
            Objective::Resolution => "resolution",
        }
    }

    pub fn evaluate(self, setup: &ValidatedSetup, threshold: f64) -> Result<f64, AnalyticError> {
        match self {
            Objective::SigmaG => analytic::sigma_g(setup),
            Objective::Resolution => analytic::resolution(setup, threshold),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpOptimum {
    pub sigma_p_star: f64,
    pub value: f64,
    /// The scan found more than one local minimum; the result is the
    /// refined best one.
    pub multimodal: bool,
    /// The minimizer sits on a bound of the search interval.
    pub at_bound: bool,
}

/// Minimizes `objective` over `σ_P ∈ bounds`, all other parameters fixed.
pub fn optimize_pump_width(
    setup: &ValidatedSetup,
    objective: Objective,
    bounds: (f64, f64),
    threshold: f64,
) -> Result<PumpOptimum, OptimizeError> {
    let (lo, hi) = bounds;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
        return Err(OptimizeError::BoundsInvalid { lo, hi });
    }
    let eval = |sp: f64| -> Result<f64, OptimizeError> {
        let s = setup.modified(|o| o.sigma_p = sp)?;
        Ok(objective.evaluate(&s, threshold)?)
    };
    let xs: Vec<f64> = (0..SCAN_POINTS).map(|j| lo + (hi - lo) * j as f64 / (SCAN_POINTS - 1) as f64).collect();
    let ys: Vec<f64> = xs.par_iter().map(|&x| eval(x)).collect::<Result<_, _>>()?;

    let local_minima = (0..SCAN_POINTS)
        .filter(|&j| (j == 0 || ys[j] < ys[j - 1]) && (j + 1 == SCAN_POINTS || ys[j] <= ys[j + 1]))
        .count();
    // Lowest index wins ties, so the result does not depend on scheduling.
    let best = (0..SCAN_POINTS).fold(0, |b, j| if ys[j] < ys[b] { j } else { b });
    let a = xs[best.saturating_sub(1)];
    let b = xs[(best + 1).min(SCAN_POINTS - 1)];
    let (x, fx) = golden_section(&eval, a, b, RELATIVE_TOLERANCE)?;
    let (x, fx) = if fx <= ys[best] { (x, fx) } else { (xs[best], ys[best]) };
    Ok(PumpOptimum {
        sigma_p_star: x,
        value: fx,
        multimodal: local_minima > 1,
        at_bound: (x - lo) <= 2.0 * RELATIVE_TOLERANCE * x || (hi - x) <= 2.0 * RELATIVE_TOLERANCE * x,
    })
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization on `[a, b]` until the bracket is shorter than
/// `tol` times its midpoint.
pub fn golden_section<F, E>(f: &F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64), E>
where
    F: Fn(f64) -> Result<f64, E>,
{
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol * (0.5 * (a + b)).abs() {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}
