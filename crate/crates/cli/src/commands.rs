//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use ghostpin::analytic::{self, AnalyticReport};
use ghostpin::engine::{illumination_width_streamed, GhostPattern};
use ghostpin::grid::illumination_grid;
use ghostpin::optimize::{optimize_pump_width, PumpOptimum};
use ghostpin::profile::{dominant_maxima, midpoint_ratio};
use ghostpin::{
    auto_grid, compute_jsp, fit_gaussian, ghost_pattern, make_grid, psi_spdc, EngineError, GridError, JspResult,
    ObjectSpec, OpticalSetup, Profile1D, ProfileError, SpectralGrid, ValidatedSetup,
};
use serde_json::{json, Value};

use crate::config::{RunConfig, SigmaPPolicy};
use crate::output::{self, fmt_f64, Provenance};
use crate::CliError;

/// Everything a command needs besides its own options.
pub struct Context {
    pub config: RunConfig,
    /// Directory relative object paths are resolved against.
    pub base: PathBuf,
    pub out: PathBuf,
    pub threads: usize,
    pub command: String,
}

impl Context {
    fn provenance(&self) -> Provenance {
        Provenance { command: self.command.clone(), config: self.config.to_ini(), threads: self.threads }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(format!("{}{name}", self.config.output.prefix))
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Output(format!("{}: {e}", path.display()))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn validated(setup: OpticalSetup) -> Result<ValidatedSetup, CliError> {
    setup.validate().map_err(|e| CliError::Config(e.to_string()))
}

fn grid_error(e: GridError) -> CliError {
    match e {
        GridError::TooLarge { .. } | GridError::Analytic(_) => CliError::Numerical(e.to_string()),
        _ => CliError::Config(e.to_string()),
    }
}

/// The configured grid, or the automatic one when no sizes are given.
pub fn build_grid(config: &RunConfig, setup: &ValidatedSetup, spec: &ObjectSpec) -> Result<SpectralGrid, CliError> {
    let g = &config.grid;
    match (g.n_s, g.n_i, g.window_s, g.window_i) {
        (None, None, None, None) => auto_grid(setup, spec, g.fov_i).map_err(grid_error),
        (Some(ns), Some(ni), Some(ws), Some(wi)) => make_grid(ns, ni, ws, wi).map_err(grid_error),
        _ => Err(CliError::Config("[grid] n_s, n_i, window_s and window_i must all be set or all be auto".into())),
    }
}

pub fn run_engine(setup: &ValidatedSetup, spec: &ObjectSpec, grid: &SpectralGrid) -> Result<JspResult, CliError> {
    let object = spec.sample(grid).map_err(|e| CliError::Config(e.to_string()))?;
    let psi = psi_spdc(grid, setup).map_err(|e| CliError::Numerical(e.to_string()))?;
    compute_jsp(&psi, &object, setup).map_err(|e| CliError::Numerical(e.to_string()))
}

fn engine_warnings(setup: &ValidatedSetup, result: &JspResult) -> Vec<String> {
    let mut w = setup.warnings().to_vec();
    if result.bucket_plane_aliased() {
        w.push(format!(
            "signal field reaches the window edge at the bucket plane (edge fraction {:.3e}); the bucket sum is unaffected",
            result.bucket_edge_fraction
        ));
    }
    w
}

fn engine_meta(setup: &ValidatedSetup, result: &JspResult) -> Value {
    json!({
        "setup": output::setup_json(setup),
        "grid": output::grid_json(&result.grid),
        "object": result.object,
        "normalization": "sum(JSP) * dx_s * dx_i = 1",
        "raw_mass": result.raw_mass,
        "input_mass": result.input_mass,
        "warnings": engine_warnings(setup, result),
    })
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Value::Object(x), Value::Object(y)) = (&mut a, b) {
        x.extend(y);
    }
    a
}

/// Writes the binned JSP as CSV and, if enabled, as a graymap.
fn emit_jsp(ctx: &Context, stem: &str, setup: &ValidatedSetup, result: &JspResult) -> Result<Vec<PathBuf>, CliError> {
    let max = ctx.config.output.jsp_max_export;
    let (m, xs, xi) =
        output::bin_matrix(&result.jsp, &result.grid.signal.positions(), &result.grid.idler.positions(), max);
    let meta = merge(
        engine_meta(setup, result),
        json!({ "export_shape": [m.nrows(), m.ncols()], "export": "block mean of the normalized JSP; rows x_S, columns x_I" }),
    );
    let prov = ctx.provenance();
    let csv = ctx.path(&format!("{stem}.csv"));
    output::write_matrix_csv(&csv, &m, &xs, &xi).map_err(io_err(&csv))?;
    output::write_sidecar(&csv, &prov.sidecar(&csv, meta.clone())).map_err(io_err(&csv))?;
    let mut files = vec![csv];
    if ctx.config.output.pgm {
        let pgm = ctx.path(&format!("{stem}.pgm"));
        output::write_pgm(&pgm, &m).map_err(io_err(&pgm))?;
        let meta = merge(meta, json!({ "scale": format!("log10, floor {} of max", output::PGM_FLOOR) }));
        output::write_sidecar(&pgm, &prov.sidecar(&pgm, meta)).map_err(io_err(&pgm))?;
        files.push(pgm);
    }
    Ok(files)
}

pub fn cmd_jsp(ctx: &Context) -> Result<(), CliError> {
    let setup = validated(ctx.config.setup)?;
    let spec = ctx.config.object_spec(&ctx.base)?;
    let grid = build_grid(&ctx.config, &setup, &spec)?;
    let result = run_engine(&setup, &spec, &grid)?;
    ensure_dir(&ctx.out)?;
    for f in emit_jsp(ctx, "jsp", &setup, &result)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}

/// Two fitted peaks of a bimodal ghost pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct GhostSummary {
    pub centers: [f64; 2],
    pub widths: [f64; 2],
    pub visibility: f64,
}

/// Fits one Gaussian to each side of the midpoint between the two dominant
/// maxima. `Ok(None)` when the pattern is not bimodal.
pub fn summarize_ghost(pattern: &GhostPattern) -> Result<Option<GhostSummary>, CliError> {
    let p = &pattern.profile;
    let peaks = dominant_maxima(p);
    if peaks.len() != 2 {
        return Ok(None);
    }
    let visibility = midpoint_ratio(p).map_err(|e| CliError::Numerical(e.to_string()))?;
    let split = (peaks[0] + peaks[1]) / 2;
    let side = |lo: usize, hi: usize, guess: usize| -> Result<(f64, f64), CliError> {
        let sub = Profile1D::new(p.coords()[lo..hi].to_vec(), p.values()[lo..hi].to_vec(), p.label())
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        match fit_gaussian(&sub) {
            Ok(f) => Ok((f.center, f.width)),
            // A peak that is not Gaussian enough still has a location.
            Err(ProfileError::FitDiverged { .. }) => Ok((p.coords()[guess], f64::NAN)),
            Err(e) => Err(CliError::Numerical(e.to_string())),
        }
    };
    let (c0, w0) = side(0, split, peaks[0])?;
    let (c1, w1) = side(split, p.len(), peaks[1])?;
    Ok(Some(GhostSummary { centers: [c0, c1], widths: [w0, w1], visibility }))
}

fn write_ghost(ctx: &Context, stem: &str, setup: &ValidatedSetup, result: &JspResult) -> Result<GhostPattern, CliError> {
    let pattern = ghost_pattern(result);
    let summary = summarize_ghost(&pattern)?;
    let prov = ctx.provenance();
    let csv = ctx.path(&format!("{stem}.csv"));
    let rows: Vec<Vec<f64>> = pattern.profile.coords().iter().zip(pattern.profile.values()).map(|(x, g)| vec![*x, *g]).collect();
    output::write_csv(&csv, &["x_i_m".into(), "g_per_m".into()], &rows).map_err(io_err(&csv))?;
    let peaks = dominant_maxima(&pattern.profile).len();
    let meta = merge(
        engine_meta(setup, result),
        json!({
            "ghost_normalization": "sum(G) * dx_i = 1",
            "bimodal": summary.is_some(),
            "dominant_maxima": peaks,
        }),
    );
    output::write_sidecar(&csv, &prov.sidecar(&csv, meta)).map_err(io_err(&csv))?;
    println!("wrote {}", csv.display());
    match summary {
        Some(s) => {
            let path = ctx.path(&format!("{stem}_summary.csv"));
            let header: Vec<String> = ["center_1_m", "width_1_m", "center_2_m", "width_2_m", "visibility"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            let row = vec![s.centers[0], s.widths[0], s.centers[1], s.widths[1], s.visibility];
            output::write_csv(&path, &header, &[row]).map_err(io_err(&path))?;
            output::write_sidecar(&path, &prov.sidecar(&path, json!({ "source": csv.file_name().map(|n| n.to_string_lossy().into_owned()) })))
                .map_err(io_err(&path))?;
            println!(
                "peaks at {} m and {} m, widths {} m and {} m, visibility {}",
                fmt_f64(s.centers[0]),
                fmt_f64(s.centers[1]),
                fmt_f64(s.widths[0]),
                fmt_f64(s.widths[1]),
                fmt_f64(s.visibility)
            );
            println!("wrote {}", path.display());
        }
        None => println!("not bimodal ({peaks} dominant maxima); no peak summary written"),
    }
    Ok(pattern)
}

pub fn cmd_ghost(ctx: &Context) -> Result<(), CliError> {
    let setup = validated(ctx.config.setup)?;
    let spec = ctx.config.object_spec(&ctx.base)?;
    let grid = build_grid(&ctx.config, &setup, &spec)?;
    let result = run_engine(&setup, &spec, &grid)?;
    ensure_dir(&ctx.out)?;
    write_ghost(ctx, "ghost", &setup, &result)?;
    Ok(())
}

fn analytic_err(e: analytic::AnalyticError) -> CliError {
    CliError::Numerical(e.to_string())
}

fn fmt_complex(z: ghostpin::Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{} {sign} {}i", fmt_f64(z.re), fmt_f64(z.im.abs()))
}

pub fn report_text(report: &AnalyticReport) -> String {
    let mut rows: Vec<(&str, String)> = vec![
        ("alpha1", fmt_complex(report.alpha1)),
        ("alpha2", fmt_complex(report.alpha2)),
        ("sigma_g_m", fmt_f64(report.sigma_g)),
        ("x0_over_a", fmt_f64(report.magnification)),
        ("sigma_0_m", fmt_f64(report.sigma_0)),
        ("threshold", fmt_f64(report.threshold)),
        ("resolution_m", fmt_f64(report.resolution_r)),
        ("far_field_x0_over_a", fmt_f64(report.far_field.value)),
        ("far_field_validity", fmt_f64(report.far_field.validity_ratio)),
    ];
    if let (Some(n), Some(s)) = (report.n_modes, report.sigma_s_used) {
        rows.push(("sigma_s_m", fmt_f64(s)));
        rows.push(("n_modes", fmt_f64(n)));
    }
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in rows {
        out.push_str(&format!("{k:<width$}  {v}\n"));
    }
    for w in report.warnings.iter().chain(&report.far_field.warnings) {
        out.push_str(&format!("warning: {w}\n"));
    }
    out
}

pub fn cmd_analytic(ctx: &Context) -> Result<(), CliError> {
    let setup = validated(ctx.config.setup)?;
    let report = AnalyticReport::new(&setup, ctx.config.run.threshold, ctx.config.run.sigma_s).map_err(analytic_err)?;
    print!("{}", report_text(&report));
    ensure_dir(&ctx.out)?;
    let path = ctx.path("analytic.csv");
    let mut header: Vec<String> = [
        "alpha1_re", "alpha1_im", "alpha2_re", "alpha2_im", "sigma_g_m", "x0_over_a", "sigma_0_m", "threshold",
        "resolution_m", "far_field_x0_over_a",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut row = vec![
        report.alpha1.re,
        report.alpha1.im,
        report.alpha2.re,
        report.alpha2.im,
        report.sigma_g,
        report.magnification,
        report.sigma_0,
        report.threshold,
        report.resolution_r,
        report.far_field.value,
    ];
    if let (Some(n), Some(s)) = (report.n_modes, report.sigma_s_used) {
        header.extend(["sigma_s_m".to_string(), "n_modes".to_string()]);
        row.extend([s, n]);
    }
    output::write_csv(&path, &header, &[row]).map_err(io_err(&path))?;
    let warnings: Vec<&String> = setup.warnings().iter().chain(&report.warnings).chain(&report.far_field.warnings).collect();
    let meta = json!({ "setup": output::setup_json(&setup), "warnings": warnings });
    output::write_sidecar(&path, &ctx.provenance().sidecar(&path, meta)).map_err(io_err(&path))?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Evenly spaced sweep values, endpoints included.
pub fn sweep_values(min: f64, max: f64, points: usize) -> Result<Vec<f64>, CliError> {
    if points < 2 || !(min.is_finite() && max.is_finite() && min > 0.0 && max > min) {
        return Err(CliError::Config(format!(
            "invalid sweep: [{}, {}] m with {points} points (need 0 < min < max and at least 2 points)",
            fmt_f64(min),
            fmt_f64(max)
        )));
    }
    Ok((0..points).map(|j| min + (max - min) * j as f64 / (points - 1) as f64).collect())
}

fn optimum(setup: &ValidatedSetup, config: &RunConfig) -> Result<PumpOptimum, CliError> {
    let r = &config.run;
    optimize_pump_width(setup, r.objective, (r.bounds_min, r.bounds_max), r.threshold).map_err(|e| match e {
        ghostpin::optimize::OptimizeError::BoundsInvalid { .. } | ghostpin::optimize::OptimizeError::Setup(_) => {
            CliError::Config(e.to_string())
        }
        other => CliError::Numerical(other.to_string()),
    })
}

/// One sweep row: axis value, σ_P, σ_G, x₀/a, σ₀, R and optionally σ_S, N.
pub fn sweep_row(config: &RunConfig, value: f64) -> Result<Vec<f64>, CliError> {
    let r = &config.run;
    let mut raw = config.setup;
    r.sweep_axis.apply(&mut raw, value);
    let mut setup = validated(raw)?;
    if r.sigma_p_policy == SigmaPPolicy::Optimal {
        let best = optimum(&setup, config)?;
        setup = validated(OpticalSetup { sigma_p: best.sigma_p_star, ..raw })?;
    }
    let report = AnalyticReport::new(&setup, r.threshold, None).map_err(analytic_err)?;
    let mut row =
        vec![value, setup.sigma_p, report.sigma_g, report.magnification, report.sigma_0, report.resolution_r];
    if r.sweep_engine {
        let grid = illumination_grid(&setup).map_err(grid_error)?;
        let w = illumination_width_streamed(&setup, &grid).map_err(|e: EngineError| CliError::Numerical(e.to_string()))?;
        row.push(w.sigma_s);
        row.push(w.sigma_s / report.resolution_r);
    }
    Ok(row)
}

pub fn sweep_header(config: &RunConfig) -> Vec<String> {
    let axis = config.run.sweep_axis.as_str();
    let mut h = vec![
        format!("{axis}_m"),
        "sigma_p_m".into(),
        "sigma_g_m".into(),
        "x0_over_a".into(),
        "sigma_0_m".into(),
        "resolution_m".into(),
    ];
    if config.run.sweep_engine {
        h.extend(["sigma_s_m".to_string(), "n_modes".to_string()]);
    }
    h
}

pub fn cmd_sweep(ctx: &Context) -> Result<(), CliError> {
    let r = &ctx.config.run;
    let (Some(min), Some(max)) = (r.sweep_min, r.sweep_max) else {
        return Err(CliError::Config("[run] sweep_min and sweep_max are required for sweep".into()));
    };
    let values = sweep_values(min, max, r.sweep_points)?;
    let rows = values.iter().map(|&v| sweep_row(&ctx.config, v)).collect::<Result<Vec<_>, _>>()?;
    ensure_dir(&ctx.out)?;
    let path = ctx.path(&format!("sweep_{}.csv", r.sweep_axis.as_str()));
    output::write_csv(&path, &sweep_header(&ctx.config), &rows).map_err(io_err(&path))?;
    let setup = validated(ctx.config.setup)?;
    let meta = json!({
        "setup": output::setup_json(&setup),
        "sweep_axis": r.sweep_axis.as_str(),
        "sigma_p_policy": r.sigma_p_policy.as_str(),
        "sigma_s": if r.sweep_engine { "Gaussian-fit width of the engine's signal marginal at the object plane" } else { "not computed" },
    });
    output::write_sidecar(&path, &ctx.provenance().sidecar(&path, meta)).map_err(io_err(&path))?;
    println!("wrote {} ({} rows)", path.display(), rows.len());
    Ok(())
}

pub fn cmd_optimize(ctx: &Context) -> Result<(), CliError> {
    let setup = validated(ctx.config.setup)?;
    let best = optimum(&setup, &ctx.config)?;
    let r = &ctx.config.run;
    println!("objective     {}", r.objective.as_str());
    println!("sigma_p_star  {} m", fmt_f64(best.sigma_p_star));
    println!("value         {} m", fmt_f64(best.value));
    if best.multimodal {
        println!("warning: the coarse scan found several local minima");
    }
    if best.at_bound {
        println!("warning: the minimizer lies on a search bound");
    }
    ensure_dir(&ctx.out)?;
    let path = ctx.path("optimize.csv");
    let header: Vec<String> = ["sigma_p_star_m", "value_m", "multimodal", "at_bound", "bounds_min_m", "bounds_max_m"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let row = vec![
        best.sigma_p_star,
        best.value,
        f64::from(u8::from(best.multimodal)),
        f64::from(u8::from(best.at_bound)),
        r.bounds_min,
        r.bounds_max,
    ];
    output::write_csv(&path, &header, &[row]).map_err(io_err(&path))?;
    let meta = json!({ "setup": output::setup_json(&setup), "objective": r.objective.as_str() });
    output::write_sidecar(&path, &ctx.provenance().sidecar(&path, meta)).map_err(io_err(&path))?;
    println!("wrote {}", path.display());
    Ok(())
}

pub mod reproduce;
