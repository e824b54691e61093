//! Object transmission functions `T_o(x_S)` on the signal axis.

use std::io::Read;
use std::path::Path;

use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::grid::{SampledAxis, SpectralGrid};

/// Slack on the `|T| ≤ 1` bound for tabulated values before clamping.
pub const VALUE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ObjectError {
    #[error("object at [{lo:.4e}, {hi:.4e}] m lies outside the signal window ±{half_window:.4e} m")]
    OutOfWindow { lo: f64, hi: f64, half_window: f64 },
    #[error("slit width {width:.3e} m is below two samples ({two_dx:.3e} m); use a delta slit")]
    SlitTooNarrow { width: f64, two_dx: f64 },
    #[error("slit separation {separation:.3e} m must exceed the slit width {width:.3e} m")]
    OverlappingSlits { separation: f64, width: f64 },
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("line {line}: x = {x} does not increase")]
    NonMonotonicX { line: usize, x: f64 },
    #[error("line {line}: transmission {value} outside [0, 1]")]
    ValueOutOfRange { line: usize, value: f64 },
    #[error("cannot read object file: {0}")]
    Io(#[from] std::io::Error),
}

/// Sampled complex transmission on the signal axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectTransmission {
    samples: Vec<Complex64>,
    descriptor: String,
    /// For delta slits: requested minus realized position [m].
    snap_distance: Option<f64>,
}

impl ObjectTransmission {
    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn snap_distance(&self) -> Option<f64> {
        self.snap_distance
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Fully open aperture, `T ≡ 1`.
    pub fn uniform(grid: &SpectralGrid) -> Self {
        ObjectTransmission {
            samples: vec![Complex64::new(1.0, 0.0); grid.signal.len()],
            descriptor: "uniform".into(),
            snap_distance: None,
        }
    }

    /// Fraction of a unit plane wave's power that is transmitted.
    pub fn power_fraction(&self) -> f64 {
        self.samples.iter().map(|t| t.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

fn check_in_window(axis: &SampledAxis, lo: f64, hi: f64) -> Result<(), ObjectError> {
    if axis.contains_interval(lo, hi) {
        Ok(())
    } else {
        Err(ObjectError::OutOfWindow { lo, hi, half_window: axis.window() / 2.0 })
    }
}

/// Tolerance on the slit edges, so an edge falling on a sample counts as inside.
fn edge_slack(dx: f64) -> f64 {
    1e-9 * dx
}

/// Unit transmission on `|x − center| ≤ width/2`, zero elsewhere.
pub fn slit(center: f64, width: f64, grid: &SpectralGrid) -> Result<ObjectTransmission, ObjectError> {
    let axis = &grid.signal;
    if width < 2.0 * axis.dx() {
        return Err(ObjectError::SlitTooNarrow { width, two_dx: 2.0 * axis.dx() });
    }
    check_in_window(axis, center - width / 2.0, center + width / 2.0)?;
    let half = width / 2.0 + edge_slack(axis.dx());
    let samples = (0..axis.len())
        .map(|j| if (axis.x(j) - center).abs() <= half { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
        .collect();
    Ok(ObjectTransmission {
        samples,
        descriptor: format!("slit(center={center:e} m, width={width:e} m)"),
        snap_distance: None,
    })
}

/// Discrete delta at the sample nearest to `a`, normalized so that
/// `Σ T f dx ≈ f(a)`.
pub fn delta_slit(a: f64, grid: &SpectralGrid) -> Result<ObjectTransmission, ObjectError> {
    let axis = &grid.signal;
    check_in_window(axis, a, a)?;
    let j = axis.nearest_index(a).expect("inside window");
    let mut samples = vec![Complex64::new(0.0, 0.0); axis.len()];
    samples[j] = Complex64::new(1.0 / axis.dx(), 0.0);
    Ok(ObjectTransmission {
        samples,
        descriptor: format!("delta_slit(a={a:e} m)"),
        snap_distance: Some(a - axis.x(j)),
    })
}

/// Two unit slits centered at `±separation/2`.
pub fn double_slit(separation: f64, width: f64, grid: &SpectralGrid) -> Result<ObjectTransmission, ObjectError> {
    if separation <= width {
        return Err(ObjectError::OverlappingSlits { separation, width });
    }
    let axis = &grid.signal;
    if width < 2.0 * axis.dx() {
        return Err(ObjectError::SlitTooNarrow { width, two_dx: 2.0 * axis.dx() });
    }
    let c = separation / 2.0;
    check_in_window(axis, -c - width / 2.0, c + width / 2.0)?;
    let half = width / 2.0 + edge_slack(axis.dx());
    // |x| − c is odd-symmetric in x, so mirrored samples get identical values.
    let samples = (0..axis.len())
        .map(|j| {
            let x = axis.x(j);
            if (x.abs() - c).abs() <= half {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(ObjectTransmission {
        samples,
        descriptor: format!("double_slit(separation={separation:e} m, width={width:e} m)"),
        snap_distance: None,
    })
}

/// One row of a tabulated object: position, amplitude transmission, and an
/// optional phase in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TabulatedPoint {
    pub x: f64,
    pub transmission: f64,
    pub phase: f64,
}

/// Parses the object CSV: `x [m], transmission in [0, 1]` per row, with an
/// optional third column holding a phase in radians. `#` starts a comment and
/// a non-numeric first row is taken as a header.
pub fn parse_table(reader: impl Read) -> Result<Vec<TabulatedPoint>, ObjectError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut points: Vec<TabulatedPoint> = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| ObjectError::ParseError {
            line: e.position().map(|p| p.line() as usize).unwrap_or(idx + 1),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(idx + 1);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if !(2..=3).contains(&record.len()) {
            return Err(ObjectError::ParseError {
                line,
                message: format!("expected 2 or 3 columns, found {}", record.len()),
            });
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if points.is_empty() && idx == 0 => continue,
            Err(e) => return Err(ObjectError::ParseError { line, message: e.to_string() }),
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ObjectError::ParseError { line, message: "non-finite value".into() });
        }
        let (x, t) = (values[0], values[1]);
        if let Some(prev) = points.last() {
            if x <= prev.x {
                return Err(ObjectError::NonMonotonicX { line, x });
            }
        }
        if !(-VALUE_TOLERANCE..=1.0 + VALUE_TOLERANCE).contains(&t) {
            return Err(ObjectError::ValueOutOfRange { line, value: t });
        }
        points.push(TabulatedPoint { x, transmission: t.clamp(0.0, 1.0), phase: values.get(2).copied().unwrap_or(0.0) });
    }
    if points.len() < 2 {
        return Err(ObjectError::ParseError { line: 0, message: "need at least two data rows".into() });
    }
    Ok(points)
}

/// Piecewise-linear interpolation of a table onto the signal axis; positions
/// outside the table get zero transmission.
pub fn from_table(points: &[TabulatedPoint], grid: &SpectralGrid, descriptor: &str) -> ObjectTransmission {
    let axis = &grid.signal;
    let samples = (0..axis.len())
        .map(|j| {
            let x = axis.x(j);
            let first = points[0];
            let last = points[points.len() - 1];
            if x < first.x || x > last.x {
                return Complex64::new(0.0, 0.0);
            }
            let hi = points.partition_point(|p| p.x < x).max(1).min(points.len() - 1);
            let (p0, p1) = (points[hi - 1], points[hi]);
            let s = ((x - p0.x) / (p1.x - p0.x)).clamp(0.0, 1.0);
            let t = (p0.transmission + s * (p1.transmission - p0.transmission)).clamp(0.0, 1.0);
            let phase = p0.phase + s * (p1.phase - p0.phase);
            Complex64::from_polar(t, phase)
        })
        .collect();
    ObjectTransmission { samples, descriptor: descriptor.to_string(), snap_distance: None }
}

pub fn from_file(path: &Path, grid: &SpectralGrid) -> Result<ObjectTransmission, ObjectError> {
    let file = std::fs::File::open(path)?;
    let points = parse_table(file)?;
    Ok(from_table(&points, grid, &format!("file({})", path.display())))
}

/// Grid-independent description of an object, used to size grids before the
/// object is sampled.
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectSpec {
    Uniform,
    Slit { center: f64, width: f64 },
    DeltaSlit { center: f64 },
    /// Two deltas at `±a`.
    DeltaPair { a: f64 },
    DoubleSlit { separation: f64, width: f64 },
    Table { points: Vec<TabulatedPoint>, label: String },
}

impl ObjectSpec {
    pub fn from_file(path: &Path) -> Result<Self, ObjectError> {
        let points = parse_table(std::fs::File::open(path)?)?;
        Ok(ObjectSpec::Table { points, label: path.display().to_string() })
    }

    /// Smallest feature the grid must resolve, if any.
    pub fn finest_feature(&self) -> Option<f64> {
        match self {
            ObjectSpec::Uniform | ObjectSpec::DeltaSlit { .. } | ObjectSpec::DeltaPair { .. } => None,
            ObjectSpec::Slit { width, .. } => Some(*width),
            ObjectSpec::DoubleSlit { separation, width } => Some(width.min(separation - width)),
            ObjectSpec::Table { points, .. } => {
                points.windows(2).map(|w| w[1].x - w[0].x).fold(None, |acc: Option<f64>, v| {
                    Some(acc.map_or(v, |a| a.min(v)))
                })
            }
        }
    }

    /// Largest `|x|` with nonzero transmission (infinite for an open aperture).
    pub fn half_extent(&self) -> f64 {
        match self {
            ObjectSpec::Uniform => f64::INFINITY,
            ObjectSpec::Slit { center, width } => center.abs() + width / 2.0,
            ObjectSpec::DeltaSlit { center } => center.abs(),
            ObjectSpec::DeltaPair { a } => a.abs(),
            ObjectSpec::DoubleSlit { separation, width } => separation / 2.0 + width / 2.0,
            ObjectSpec::Table { points, .. } => {
                let n = points.len();
                points
                    .iter()
                    .enumerate()
                    .filter(|(i, p)| {
                        p.transmission > 0.0
                            || (*i > 0 && points[i - 1].transmission > 0.0)
                            || (*i + 1 < n && points[i + 1].transmission > 0.0)
                    })
                    .map(|(_, p)| p.x.abs())
                    .fold(0.0, f64::max)
            }
        }
    }

    pub fn sample(&self, grid: &SpectralGrid) -> Result<ObjectTransmission, ObjectError> {
        match self {
            ObjectSpec::Uniform => Ok(ObjectTransmission::uniform(grid)),
            ObjectSpec::Slit { center, width } => slit(*center, *width, grid),
            ObjectSpec::DeltaSlit { center } => delta_slit(*center, grid),
            ObjectSpec::DeltaPair { a } => {
                let mut plus = delta_slit(*a, grid)?;
                let minus = delta_slit(-*a, grid)?;
                for (p, m) in plus.samples.iter_mut().zip(minus.samples) {
                    *p += m;
                }
                plus.descriptor = format!("delta_pair(a=±{a:e} m)");
                Ok(plus)
            }
            ObjectSpec::DoubleSlit { separation, width } => double_slit(*separation, *width, grid),
            ObjectSpec::Table { points, label } => {
                let first = points[0].x;
                let last = points[points.len() - 1].x;
                let extent = self.half_extent();
                if extent > 0.0 {
                    check_in_window(&grid.signal, (-extent).max(first), extent.min(last))?;
                }
                Ok(from_table(points, grid, &format!("file({label})")))
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ObjectSpec::Uniform => "uniform".into(),
            ObjectSpec::Slit { center, width } => format!("slit(center={center:e} m, width={width:e} m)"),
            ObjectSpec::DeltaSlit { center } => format!("delta_slit(a={center:e} m)"),
            ObjectSpec::DeltaPair { a } => format!("delta_pair(a=±{a:e} m)"),
            ObjectSpec::DoubleSlit { separation, width } => {
                format!("double_slit(separation={separation:e} m, width={width:e} m)")
            }
            ObjectSpec::Table { label, .. } => format!("file({label})"),
        }
    }
}
