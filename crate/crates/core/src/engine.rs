//! Joint spatial probability at the detector planes, the bucket-detector
//! ghost pattern and the signal illumination at the object.

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::fourier::{pairwise_sum, transform_2d, transform_axis, CenteredDft, Direction};
use crate::grid::SpectralGrid;
use crate::objects::ObjectTransmission;
use crate::profile::{fit_gaussian, moment_width, midpoint_ratio, GaussianFit, Profile1D, ProfileError};
use crate::propagation::{apply_transfer, transfer, FieldAxis, PropagationError};
use crate::setup::{OpticalSetup, ValidatedSetup};
use crate::spdc::{amplitude_column, check_pump_coverage, BiphotonAmplitude, Representation, SpdcError};

/// Probability fraction within [`SENTINEL_SAMPLES`] of a window edge that
/// counts as wrap-around.
pub const SENTINEL_FRACTION: f64 = 1e-3;
pub const SENTINEL_SAMPLES: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("{plane}: {fraction:.3e} of the probability lies within {SENTINEL_SAMPLES} samples of the window edge; enlarge the window")]
    GridUndersampled { plane: &'static str, fraction: f64 },
    #[error("amplitude must be in the kk representation, got {0:?}")]
    WrongRepresentation(Representation),
    #[error("object has {object} samples but the signal axis has {grid}")]
    GridMismatch { object: usize, grid: usize },
    #[error("field vanishes after the object")]
    ZeroTransmission,
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Spdc(#[from] SpdcError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// `|Ψ(x_S, x_I)|²` at the detector planes, normalized to
/// `Σ JSP dx_s dx_i = 1`. Rows index `x_S`, columns `x_I`.
#[derive(Debug, Clone)]
pub struct JspResult {
    pub jsp: Array2<f64>,
    pub grid: SpectralGrid,
    pub setup: OpticalSetup,
    pub object: String,
    /// `Σ|Ψ|² dk_s dk_i` before normalization, in the units of the input ψ.
    pub raw_mass: f64,
    /// Same quantity for the input amplitude.
    pub input_mass: f64,
    /// Probability fraction near the `x_S` edges at the bucket plane. The bucket
    /// detector integrates it regardless, so this is reported, not fatal.
    pub bucket_edge_fraction: f64,
}

impl JspResult {
    pub fn bucket_plane_aliased(&self) -> bool {
        self.bucket_edge_fraction >= SENTINEL_FRACTION
    }

    pub fn mass(&self) -> f64 {
        pairwise_sum(self.jsp.as_slice().expect("standard layout")) * self.grid.signal.dx() * self.grid.idler.dx()
    }
}

/// `G(x_I) = Σ_{x_S} JSP dx_s` with its provenance.
#[derive(Debug, Clone)]
pub struct GhostPattern {
    pub profile: Profile1D,
    pub setup: OpticalSetup,
    pub object: String,
}

fn edge_fraction(marginal: &[f64]) -> f64 {
    let total = pairwise_sum(marginal);
    if !(total > 0.0) {
        return 0.0;
    }
    let n = marginal.len();
    let w = SENTINEL_SAMPLES.min(n / 2);
    let edge: f64 = marginal[..w].iter().chain(&marginal[n - w..]).sum();
    edge / total
}

/// Per-row sums of `|field|²` (signal marginal, summed over the idler axis).
fn row_marginal(field: &Array2<Complex64>) -> Vec<f64> {
    field
        .axis_iter(Axis(0))
        .into_par_iter()
        .map(|row| pairwise_sum(&row.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>()))
        .collect()
}

/// Per-column sums of a real matrix, accumulated row by row in a fixed tree
/// order.
fn column_sums(m: &Array2<f64>) -> Vec<f64> {
    fn rec(m: &Array2<f64>, lo: usize, hi: usize) -> Vec<f64> {
        if hi - lo <= 8 {
            let mut acc = vec![0.0; m.ncols()];
            for r in lo..hi {
                for (a, v) in acc.iter_mut().zip(m.row(r)) {
                    *a += v;
                }
            }
            return acc;
        }
        let mid = lo + (hi - lo) / 2;
        let (mut a, b) = rayon::join(|| rec(m, lo, mid), || rec(m, mid, hi));
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
        a
    }
    rec(m, 0, m.nrows())
}

/// Propagates ψ through the object to both detector planes.
///
/// The `k_S` convolution with the object spectrum is carried out as a product
/// in position space: transform the signal axis to `x_S` at the object
/// plane, multiply by `T_o`, transform back.
pub fn compute_jsp(
    psi: &BiphotonAmplitude,
    object: &ObjectTransmission,
    setup: &ValidatedSetup,
) -> Result<JspResult, EngineError> {
    if psi.representation != Representation::KK {
        return Err(EngineError::WrongRepresentation(psi.representation));
    }
    let grid = psi.grid;
    if object.len() != grid.signal.len() {
        return Err(EngineError::GridMismatch { object: object.len(), grid: grid.signal.len() });
    }
    let input_mass = psi.norm_sqr() * grid.signal.dk() * grid.idler.dk();
    let mode = setup.propagation_mode;
    let mut field = psi.clone();

    apply_transfer(&mut field, FieldAxis::Signal, setup.d, setup.lambda_s, mode)?;
    transform_axis(&mut field.data, 0, Direction::Inverse);
    field.representation = Representation::XK;

    let fraction = edge_fraction(&row_marginal(&field.data));
    if fraction >= SENTINEL_FRACTION {
        return Err(EngineError::GridUndersampled { plane: "signal axis at the object plane", fraction });
    }

    let t = object.samples();
    field.data.axis_iter_mut(Axis(0)).into_par_iter().zip(t.par_iter()).for_each(|(mut row, tj)| {
        row.mapv_inplace(|v| v * tj);
    });

    transform_axis(&mut field.data, 0, Direction::Forward);
    field.representation = Representation::KK;
    apply_transfer(&mut field, FieldAxis::Signal, setup.z_s - setup.d, setup.lambda_s, mode)?;
    apply_transfer(&mut field, FieldAxis::Idler, setup.z_i, setup.lambda_i, mode)?;
    transform_2d(&mut field.data, Direction::Inverse);
    field.representation = Representation::XX;

    let mut jsp = field.data.mapv(|v| v.norm_sqr());
    drop(field);
    let total = pairwise_sum(jsp.as_slice().expect("standard layout"));
    if !(total > 0.0 && total.is_finite()) {
        return Err(EngineError::ZeroTransmission);
    }
    let raw_mass = total * grid.signal.dk() * grid.idler.dk();

    let idler_marginal = column_sums(&jsp);
    let fraction = edge_fraction(&idler_marginal);
    if fraction >= SENTINEL_FRACTION {
        return Err(EngineError::GridUndersampled { plane: "idler axis at the idler detector", fraction });
    }
    let signal_marginal: Vec<f64> =
        jsp.axis_iter(Axis(0)).map(|r| pairwise_sum(r.as_slice().expect("standard layout"))).collect();
    let bucket_edge_fraction = edge_fraction(&signal_marginal);

    let scale = 1.0 / (total * grid.signal.dx() * grid.idler.dx());
    jsp.mapv_inplace(|v| v * scale);
    Ok(JspResult {
        jsp,
        grid,
        setup: *setup.setup(),
        object: object.descriptor().to_string(),
        raw_mass,
        input_mass,
        bucket_edge_fraction,
    })
}

/// Bucket-detector pattern on the idler axis, with unit mass.
pub fn ghost_pattern(result: &JspResult) -> GhostPattern {
    let dx_s = result.grid.signal.dx();
    let values: Vec<f64> = column_sums(&result.jsp).into_iter().map(|v| v * dx_s).collect();
    let profile = Profile1D::new(result.grid.idler.positions(), values, "x_I [m]")
        .expect("JSP columns are finite and non-negative");
    GhostPattern { profile, setup: result.setup, object: result.object.clone() }
}

/// Midpoint-to-maximum ratio of a two-lobed ghost pattern. Two slits count
/// as resolved when this is at or below the resolution threshold.
pub fn visibility(pattern: &GhostPattern) -> Result<f64, EngineError> {
    Ok(midpoint_ratio(&pattern.profile)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlluminationWidth {
    /// Gaussian-fit width, or the moment width if the fit failed.
    pub sigma_s: f64,
    pub moment_width: f64,
    pub fit: Option<GaussianFit>,
    /// The fit failed and `sigma_s` is the moment width.
    pub used_moment_fallback: bool,
    pub marginal: Profile1D,
}

fn summarize_illumination(axis_x: Vec<f64>, marginal: Vec<f64>) -> Result<IlluminationWidth, EngineError> {
    let fraction = edge_fraction(&marginal);
    if fraction >= SENTINEL_FRACTION {
        return Err(EngineError::GridUndersampled { plane: "signal axis at the object plane", fraction });
    }
    let profile = Profile1D::new(axis_x, marginal, "x_S [m]")?;
    let moment = moment_width(&profile)?;
    let (sigma_s, fit) = match fit_gaussian(&profile) {
        Ok(f) => (f.width, Some(f)),
        Err(ProfileError::FitDiverged { .. }) => (moment, None),
        Err(e) => return Err(e.into()),
    };
    Ok(IlluminationWidth { sigma_s, moment_width: moment, used_moment_fallback: fit.is_none(), fit, marginal: profile })
}

/// Width of the signal illumination at the object plane from the full ψ.
pub fn illumination_width(psi: &BiphotonAmplitude, setup: &ValidatedSetup) -> Result<IlluminationWidth, EngineError> {
    if psi.representation != Representation::KK {
        return Err(EngineError::WrongRepresentation(psi.representation));
    }
    let mut field = psi.clone();
    apply_transfer(&mut field, FieldAxis::Signal, setup.d, setup.lambda_s, setup.propagation_mode)?;
    transform_axis(&mut field.data, 0, Direction::Inverse);
    // The idler stays at the crystal; by Parseval its k_I sum is the x_I sum.
    summarize_illumination(psi.grid.signal.positions(), row_marginal(&field.data))
}

/// Same quantity as [`illumination_width`] without holding ψ in memory: each
/// idler column is built, propagated and accumulated on its own.
pub fn illumination_width_streamed(setup: &ValidatedSetup, grid: &SpectralGrid) -> Result<IlluminationWidth, EngineError> {
    check_pump_coverage(grid, setup)?;
    const CHUNK: usize = 16;
    let ns = grid.signal.len();
    let dft = CenteredDft::new(ns);
    let h: Vec<Complex64> = grid
        .signal
        .wavenumbers()
        .into_iter()
        .map(|k| transfer(k, setup.d, setup.lambda_s, setup.propagation_mode))
        .collect();
    let columns: Vec<usize> = (0..grid.idler.len()).collect();
    let partials: Vec<Vec<f64>> = columns
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; ns];
            for &m in chunk {
                let mut col = amplitude_column(grid, setup, m);
                for (v, hj) in col.iter_mut().zip(&h) {
                    *v *= hj;
                }
                dft.inverse(&mut col);
                for (a, v) in acc.iter_mut().zip(&col) {
                    *a += v.norm_sqr();
                }
            }
            acc
        })
        .collect();
    let mut marginal = vec![0.0; ns];
    for p in &partials {
        for (a, v) in marginal.iter_mut().zip(p) {
            *a += v;
        }
    }
    summarize_illumination(grid.signal.positions(), marginal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic;
    use crate::grid::{auto_grid, illumination_grid, make_grid};
    use crate::objects::{delta_slit, ObjectSpec};
    use crate::setup::{PhaseMatchingModel, PropagationMode};
    use crate::spdc::psi_spdc;

    fn gaussian_setup(sigma_p: f64, d: f64) -> ValidatedSetup {
        OpticalSetup::reference(sigma_p, d).with_pm_model(PhaseMatchingModel::Gaussian).validate().unwrap()
    }

    #[test]
    fn open_aperture_preserves_mass() {
        let s = gaussian_setup(167e-6, 0.3);
        let g = auto_grid(&s, &ObjectSpec::Uniform, 1e-3).unwrap();
        let psi = psi_spdc(&g, &s).unwrap();
        let r = compute_jsp(&psi, &ObjectTransmission::uniform(&g), &s).unwrap();
        assert!((r.raw_mass - r.input_mass).abs() < 1e-12);
        assert!((r.mass() - 1.0).abs() < 1e-12);
        assert!(r.jsp.iter().all(|&v| v >= 0.0));
        let gp = ghost_pattern(&r);
        assert!((gp.profile.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_representation_and_mismatched_object() {
        let s = gaussian_setup(167e-6, 0.3);
        let g = make_grid(128, 128, 128.0 * 25e-6, 128.0 * 40e-6).unwrap();
        let mut psi = psi_spdc(&g, &s).unwrap();
        let other = make_grid(256, 128, 256.0 * 25e-6, 128.0 * 40e-6).unwrap();
        assert!(matches!(
            compute_jsp(&psi, &ObjectTransmission::uniform(&other), &s),
            Err(EngineError::GridMismatch { .. })
        ));
        psi.representation = Representation::XK;
        assert!(matches!(
            compute_jsp(&psi, &ObjectTransmission::uniform(&g), &s),
            Err(EngineError::WrongRepresentation(Representation::XK))
        ));
    }

    #[test]
    fn small_window_trips_the_sentinel() {
        let s = gaussian_setup(167e-6, 0.3);
        // 64 × 5 µm signal window is far narrower than the illumination.
        let g = make_grid(64, 64, 64.0 * 5e-6, 64.0 * 5e-6).unwrap();
        let psi = psi_spdc(&g, &s).unwrap();
        assert!(matches!(
            compute_jsp(&psi, &ObjectTransmission::uniform(&g), &s),
            Err(EngineError::GridUndersampled { .. })
        ));
    }

    #[test]
    fn delta_slit_image_matches_closed_form() {
        let s = gaussian_setup(167e-6, 0.3);
        let spec = ObjectSpec::DeltaSlit { center: 300e-6 };
        let g = auto_grid(&s, &spec, 1e-3).unwrap();
        let psi = psi_spdc(&g, &s).unwrap();
        let obj = spec.sample(&g).unwrap();
        let a = 300e-6 - obj.snap_distance().unwrap();
        let gp = ghost_pattern(&compute_jsp(&psi, &obj, &s).unwrap());
        let fit = fit_gaussian(&gp.profile).unwrap();
        let x0 = analytic::image_position(&s, a).unwrap();
        let sg = analytic::sigma_g(&s).unwrap();
        assert!((fit.center - x0).abs() / x0.abs() < 1e-3, "{} vs {}", fit.center, x0);
        assert!((fit.width - sg).abs() / sg < 1e-3, "{} vs {}", fit.width, sg);
        assert!(fit.center < 0.0);
    }

    #[test]
    fn ghost_pattern_independent_of_signal_detector_distance() {
        let s = gaussian_setup(167e-6, 0.3);
        let spec = ObjectSpec::DoubleSlit { separation: 940e-6, width: 50e-6 };
        let g = auto_grid(&s, &spec, 1e-3).unwrap();
        let psi = psi_spdc(&g, &s).unwrap();
        let obj = spec.sample(&g).unwrap();
        let a = ghost_pattern(&compute_jsp(&psi, &obj, &s.modified(|o| o.z_s = 0.6).unwrap()).unwrap());
        let b = ghost_pattern(&compute_jsp(&psi, &obj, &s.modified(|o| o.z_s = 1.2).unwrap()).unwrap());
        let peak = a.profile.max();
        for (x, y) in a.profile.values().iter().zip(b.profile.values()) {
            assert!((x - y).abs() <= 1e-10 * peak);
        }
    }

    #[test]
    fn symmetric_object_gives_symmetric_pattern() {
        let s = gaussian_setup(167e-6, 0.3);
        let spec = ObjectSpec::DoubleSlit { separation: 940e-6, width: 50e-6 };
        let g = auto_grid(&s, &spec, 1e-3).unwrap();
        let psi = psi_spdc(&g, &s).unwrap();
        let obj = spec.sample(&g).unwrap();
        let gp = ghost_pattern(&compute_jsp(&psi, &obj, &s).unwrap());
        let v = gp.profile.values();
        let n = v.len();
        let peak = gp.profile.max();
        for j in 1..n / 2 {
            assert!((v[n / 2 + j] - v[n / 2 - j]).abs() <= 1e-10 * peak);
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let s = gaussian_setup(167e-6, 0.3);
        let g = make_grid(256, 256, 256.0 * 25e-6, 256.0 * 40e-6).unwrap();
        let psi = psi_spdc(&g, &s).unwrap();
        let obj = delta_slit(200e-6, &g).unwrap();
        let a = compute_jsp(&psi, &obj, &s).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| compute_jsp(&psi, &obj, &s).unwrap());
        assert_eq!(a.jsp, b.jsp);
    }

    #[test]
    fn illumination_width_streamed_matches_full() {
        let s = gaussian_setup(258e-6, 0.3);
        let g = illumination_grid(&s).unwrap();
        let streamed = illumination_width_streamed(&s, &g).unwrap();
        if g.signal.len() * g.idler.len() <= 1 << 22 {
            let full = illumination_width(&psi_spdc(&g, &s).unwrap(), &s).unwrap();
            assert!((full.sigma_s - streamed.sigma_s).abs() / full.sigma_s < 1e-10);
        }
        assert!(!streamed.used_moment_fallback);
        assert!((streamed.sigma_s - streamed.moment_width).abs() / streamed.moment_width < 0.05);
    }

    #[test]
    fn illumination_at_the_crystal_matches_source_marginal() {
        // At d = 0 the marginal is the x_S marginal of the two-photon source;
        // the oracle builds |ψ(x_S, x_I)|² directly and takes its moment width.
        let s = gaussian_setup(300e-6, 0.3);
        let g = make_grid(512, 512, 512.0 * 10e-6, 512.0 * 10e-6).unwrap();
        let s0 = s.modified(|o| o.d = 1e-300).unwrap();
        let w = illumination_width(&psi_spdc(&g, &s0).unwrap(), &s0).unwrap();
        let mut f = psi_spdc(&g, &s0).unwrap().data;
        transform_2d(&mut f, Direction::Inverse);
        let prof = Profile1D::new(
            g.signal.positions(),
            f.axis_iter(Axis(0)).map(|r| r.iter().map(|v| v.norm_sqr()).sum()).collect(),
            "x",
        )
        .unwrap();
        let oracle = moment_width(&prof).unwrap();
        assert!((w.moment_width - oracle).abs() / oracle < 1e-9);
        assert!((w.sigma_s - oracle).abs() / oracle < 0.05);
        let sigma_0 = analytic::pinhole_sigma0(&s);
        assert!(w.sigma_s > 0.5 * sigma_0 && w.sigma_s < 4.0 * sigma_0);
    }

    #[test]
    fn illumination_grows_with_distance_and_shrinks_with_crystal_length() {
        let width = |sp: f64, d: f64, lz: f64| {
            let s = gaussian_setup(sp, d).modified(|o| o.l_z = lz).unwrap();
            illumination_width_streamed(&s, &illumination_grid(&s).unwrap()).unwrap().sigma_s
        };
        let (w1, w2, w3) = (width(258e-6, 0.1, 3e-3), width(258e-6, 0.3, 3e-3), width(258e-6, 1.0, 3e-3));
        assert!(w1 < w2 && w2 < w3, "{w1} {w2} {w3}");
        assert!(width(258e-6, 0.3, 1e-3) > width(258e-6, 0.3, 5e-3));
    }

    #[test]
    fn visibility_of_resolved_and_unresolved_pairs() {
        let s = gaussian_setup(167e-6, 0.3);
        let r = analytic::resolution(&s, 0.4).unwrap();
        let spec = ObjectSpec::DeltaPair { a: r / 2.0 };
        let g = auto_grid(&s, &spec, 1e-3).unwrap();
        let psi = psi_spdc(&g, &s).unwrap();
        let obj = spec.sample(&g).unwrap();
        let gp = ghost_pattern(&compute_jsp(&psi, &obj, &s).unwrap());
        let v = visibility(&gp).unwrap();
        assert!((v - 0.4).abs() < 0.05, "{v}");

        let spec = ObjectSpec::DeltaPair { a: r / 8.0 };
        let obj = spec.sample(&g).unwrap();
        let gp = ghost_pattern(&compute_jsp(&psi, &obj, &s).unwrap());
        assert!(matches!(visibility(&gp), Err(EngineError::Profile(ProfileError::NotBimodal { .. }))));
    }

    #[test]
    fn exact_mode_close_to_paraxial_for_delta_slit() {
        let s = gaussian_setup(167e-6, 0.3);
        let e = s.modified(|o| o.propagation_mode = PropagationMode::Exact).unwrap();
        let g = make_grid(512, 256, 512.0 * 12.5e-6, 256.0 * 60e-6).unwrap();
        let obj = delta_slit(300e-6, &g).unwrap();
        let fp = fit_gaussian(&ghost_pattern(&compute_jsp(&psi_spdc(&g, &s).unwrap(), &obj, &s).unwrap()).profile)
            .unwrap();
        let fe = fit_gaussian(&ghost_pattern(&compute_jsp(&psi_spdc(&g, &e).unwrap(), &obj, &e).unwrap()).profile)
            .unwrap();
        assert!((fp.center - fe.center).abs() < 0.01 * fp.width);
        assert!((fp.width - fe.width).abs() / fp.width < 0.01);
    }
}
