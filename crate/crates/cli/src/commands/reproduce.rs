//! Built-in parameter sets for the three figures and their check files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ghostpin::analytic::{self, alphas_at, optimal_source, GAMMA};
use ghostpin::engine::illumination_width_streamed;
use ghostpin::grid::illumination_grid;
use ghostpin::optimize::Objective;
use ghostpin::{auto_grid, ghost_pattern, make_grid, ObjectSpec, OpticalSetup, PhaseMatchingModel, SpectralGrid};
use serde_json::json;

use super::{
    emit_jsp, ensure_dir, grid_error, io_err, optimum, run_engine, summarize_ghost, sweep_header, sweep_row,
    sweep_values, validated, write_ghost, Context,
};
use crate::config::{ObjectConfig, RunConfig, SigmaPPolicy, SweepAxis};
use crate::output;
use crate::CliError;

pub const ILLUSTRATIVE_OBJECT: &str = include_str!("../../data/illustrative_object.csv");
const ILLUSTRATIVE_NAME: &str = "illustrative_object.csv";

const DOUBLE_SLIT: ObjectConfig = ObjectConfig::DoubleSlit { separation: 940e-6, width: 50e-6 };
const FIG2_PUMPS: [(f64, &str); 4] = [(58e-6, "58um"), (102e-6, "102um"), (167e-6, "167um"), (800e-6, "800um")];
const DISTANCES: [(f64, &str); 3] = [(0.1, "10cm"), (0.3, "30cm"), (1.0, "100cm")];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
}

impl Figure {
    pub fn as_str(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
        }
    }
}

/// Mode and phase-matching overrides from the command line.
pub type Adjust<'a> = &'a dyn Fn(&mut OpticalSetup);

#[derive(Default)]
struct Checks {
    lines: Vec<(bool, String)>,
}

impl Checks {
    fn add(&mut self, criterion: u32, pass: bool, detail: String) {
        self.lines.push((pass, format!("criterion {criterion:02}: {detail}")));
    }

    fn write(&self, path: &Path) -> Result<usize, CliError> {
        let mut text = String::new();
        for (pass, line) in &self.lines {
            let _ = writeln!(text, "{} {line}", if *pass { "PASS" } else { "FAIL" });
        }
        fs::write(path, text).map_err(io_err(path))?;
        Ok(self.lines.iter().filter(|(p, _)| !p).count())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn reference(sigma_p: f64, d: f64, adjust: Adjust) -> OpticalSetup {
    let mut s = OpticalSetup { z_s: d.max(1.2), ..OpticalSetup::reference(sigma_p, d) };
    adjust(&mut s);
    s
}

/// Context for one panel, with its config saved next to the outputs so the
/// panel can be rerun on its own.
fn panel(out: &Path, threads: usize, config: RunConfig, name: &str, command: &str) -> Result<Context, CliError> {
    let ini = out.join(format!("{name}.ini"));
    fs::write(&ini, config.to_ini()).map_err(io_err(&ini))?;
    Ok(Context {
        config,
        base: out.to_path_buf(),
        out: out.to_path_buf(),
        threads,
        command: format!("{command} --config {name}.ini"),
    })
}

fn pin_grid(config: &mut RunConfig, grid: &SpectralGrid) -> Result<SpectralGrid, CliError> {
    let (ns, ni) = grid.shape();
    let (ws, wi) = (grid.signal.window(), grid.idler.window());
    config.grid.n_s = Some(ns);
    config.grid.n_i = Some(ni);
    config.grid.window_s = Some(ws);
    config.grid.window_i = Some(wi);
    make_grid(ns, ni, ws, wi).map_err(grid_error)
}

pub fn run(figure: Figure, out: &Path, threads: usize, adjust: Adjust) -> Result<(), CliError> {
    ensure_dir(out)?;
    let mut checks = Checks::default();
    match figure {
        Figure::Fig2 => fig2(out, threads, adjust, &mut checks)?,
        Figure::Fig3 => fig3(out, threads, adjust, &mut checks)?,
        Figure::Fig4 => fig4(out, threads, adjust, &mut checks)?,
    }
    let path = out.join(format!("{}_checks.txt", figure.as_str()));
    let failed = checks.write(&path)?;
    for (pass, line) in &checks.lines {
        println!("{} {line}", if *pass { "PASS" } else { "FAIL" });
    }
    println!("wrote {} ({failed} failed)", path.display());
    Ok(())
}

fn write_table(
    path: &Path,
    header: Vec<String>,
    rows: &[Vec<f64>],
    command: &str,
    threads: usize,
    meta: serde_json::Value,
) -> Result<(), CliError> {
    output::write_csv(path, &header, rows).map_err(io_err(path))?;
    let prov = output::Provenance { command: command.into(), config: String::new(), threads };
    output::write_sidecar(path, &prov.sidecar(path, meta)).map_err(io_err(path))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn fig2(out: &Path, threads: usize, adjust: Adjust, checks: &mut Checks) -> Result<(), CliError> {
    let spec = ObjectSpec::DoubleSlit { separation: 940e-6, width: 50e-6 };
    let setups = FIG2_PUMPS
        .iter()
        .map(|(sp, _)| validated(reference(*sp, 0.3, adjust)))
        .collect::<Result<Vec<_>, _>>()?;
    // One grid for all four panels so their ghost patterns share an x_I axis.
    let grids = setups.iter().map(|s| auto_grid(s, &spec, 5e-3)).collect::<Result<Vec<_>, _>>().map_err(grid_error)?;
    let union = SpectralGrid::union(&grids).map_err(grid_error)?;

    let mut curves: Vec<Vec<f64>> = Vec::new();
    let mut x_i = Vec::new();
    for ((_, label), setup) in FIG2_PUMPS.iter().zip(&setups) {
        let mut config = RunConfig::new(*setup.setup());
        config.object = Some(DOUBLE_SLIT);
        config.output.prefix = format!("fig2_{label}_");
        let grid = pin_grid(&mut config, &union)?;
        let ctx = panel(out, threads, config, &format!("fig2_{label}"), "ghostpin jsp")?;
        let result = run_engine(setup, &spec, &grid)?;
        for f in emit_jsp(&ctx, "jsp", setup, &result)? {
            println!("wrote {}", f.display());
        }
        let pattern = ghost_pattern(&result);
        x_i = pattern.profile.coords().to_vec();
        curves.push(pattern.profile.values().to_vec());
        match (*label, summarize_ghost(&pattern)?) {
            ("167um", Some(s)) => {
                let positions_ok = s.centers.iter().all(|c| rel(c.abs(), 2.35e-3) <= 0.05) && s.centers[0] * s.centers[1] < 0.0;
                checks.add(
                    6,
                    positions_ok && s.visibility < 0.4,
                    format!(
                        "sigma_P = 167 um peaks at {:.3} / {:.3} mm (target +/-2.35 mm +/- 5%), midpoint ratio {:.3} (target < 0.4)",
                        s.centers[0] * 1e3,
                        s.centers[1] * 1e3,
                        s.visibility
                    ),
                );
            }
            ("167um", None) => checks.add(6, false, "sigma_P = 167 um ghost pattern is not bimodal".into()),
            (l, s) => println!("sigma_P = {l}: {}", if s.is_some() { "two resolved maxima" } else { "not bimodal" }),
        }
    }
    let mut header = vec!["x_i_m".to_string()];
    header.extend(FIG2_PUMPS.iter().map(|(_, l)| format!("g_{l}_per_m")));
    let rows: Vec<Vec<f64>> =
        x_i.iter().enumerate().map(|(j, x)| std::iter::once(*x).chain(curves.iter().map(|c| c[j])).collect()).collect();
    write_table(
        &out.join("fig2_ghost.csv"),
        header,
        &rows,
        "ghostpin reproduce fig2",
        threads,
        json!({ "grid": output::grid_json(&union), "normalization": "sum(G) * dx_i = 1 per column", "panels": FIG2_PUMPS.iter().map(|(_, l)| format!("fig2_{l}.ini")).collect::<Vec<_>>() }),
    )?;

    let s = validated(reference(167e-6, 0.3, adjust))?;
    let m = analytic::magnification_farfield(&s).value;
    checks.add(1, m == -5.0, format!("far-field magnification {m:?} (target -5 exactly)"));
    let z = s.derived().pump_rayleigh_length;
    checks.add(5, rel(z, 0.5) <= 0.01, format!("pump Rayleigh length {z:.4} m (target 0.5 m +/- 1%)"));

    // z_S invariance on the 167 µm panel's own grid.
    let own = auto_grid(&s, &spec, 5e-3).map_err(grid_error)?;
    let a = ghost_pattern(&run_engine(&s.modified(|o| o.z_s = 0.6).map_err(|e| CliError::Config(e.to_string()))?, &spec, &own)?);
    let b = ghost_pattern(&run_engine(&s, &spec, &own)?);
    let diff = a.profile.values().iter().zip(b.profile.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        / a.profile.max();
    checks.add(9, diff <= 1e-10, format!("ghost patterns at z_S = 0.6 and 1.2 m differ by {diff:.2e} (target <= 1e-10)"));
    Ok(())
}

fn sigma_p_axis() -> Result<Vec<f64>, CliError> {
    sweep_values(50e-6, 800e-6, 200)
}

fn fig3(out: &Path, threads: usize, adjust: Adjust, checks: &mut Checks) -> Result<(), CliError> {
    let pumps = sigma_p_axis()?;
    let mut widths = vec![Vec::new(); pumps.len()];
    let mut mags = vec![Vec::new(); pumps.len()];
    let mut all_negative = true;
    for (j, &sp) in pumps.iter().enumerate() {
        widths[j].push(sp);
        mags[j].push(sp);
        for (d, _) in DISTANCES {
            let s = validated(reference(sp, d, adjust))?;
            let a = analytic::alphas(&s).map_err(super::analytic_err)?;
            let m = a.magnification().map_err(super::analytic_err)?;
            all_negative &= m < 0.0;
            widths[j].push(a.sigma_g().map_err(super::analytic_err)?);
            mags[j].push(m);
        }
        let s = validated(reference(sp, 1.0, adjust))?;
        let far = alphas_at(&s, f64::INFINITY).map_err(super::analytic_err)?;
        widths[j].push(far.sigma_g().map_err(super::analytic_err)?);
        mags[j].push(0.0);
    }
    let header = |q: &str| -> Vec<String> {
        let mut h = vec!["sigma_p_m".to_string()];
        h.extend(DISTANCES.iter().map(|(_, l)| format!("{q}_d{l}")));
        h.push(format!("{q}_dinf"));
        h
    };
    let meta = json!({ "setup": "350 nm -> 700 + 700 nm, l_z = 3 mm, z_I = 1.5 m", "distances_m": [0.1, 0.3, 1.0, "inf"] });
    write_table(&out.join("fig3_sigma_g.csv"), header("sigma_g_m"), &widths, "ghostpin reproduce fig3", threads, meta.clone())?;
    write_table(&out.join("fig3_magnification.csv"), header("x0_over_a"), &mags, "ghostpin reproduce fig3", threads, meta)?;

    let mut minima = Vec::new();
    for (d, label) in DISTANCES {
        let mut config = RunConfig::new(reference(167e-6, d, adjust));
        config.run.objective = Objective::SigmaG;
        let s = validated(config.setup)?;
        let best = optimum(&s, &config)?;
        panel(out, threads, config, &format!("fig3_optimize_d{label}"), "ghostpin optimize")?;
        minima.push(vec![d, best.sigma_p_star, best.value]);
        if d == 0.3 {
            checks.add(
                7,
                rel(best.sigma_p_star, 167e-6) <= 0.15 && !best.at_bound,
                format!("argmin sigma_G at d = 30 cm: {:.2} um (target 167 um +/- 15%)", best.sigma_p_star * 1e6),
            );
        }
    }
    write_table(
        &out.join("fig3_minima.csv"),
        vec!["d_m".into(), "sigma_p_star_m".into(), "sigma_g_min_m".into()],
        &minima,
        "ghostpin reproduce fig3",
        threads,
        json!({ "objective": "sigma_g", "bounds_m": [50e-6, 800e-6] }),
    )?;

    let base = reference(167e-6, 0.3, adjust);
    let m = analytic::magnification_farfield(&validated(base)?).value;
    checks.add(1, m == -5.0, format!("far-field magnification {m:?} (target -5 exactly)"));
    let opt = optimal_source(base.z_i, base.lambda_i).map_err(super::analytic_err)?;
    let crystal = GAMMA * (base.lambda_i / base.lambda_s) * base.lambda_p * base.l_z / (2.0 * std::f64::consts::PI);
    let s = validated(OpticalSetup { sigma_p: (2.0 * (opt.sigma_0_star.powi(2) - crystal)).sqrt(), ..base })?;
    let width = alphas_at(&s, f64::INFINITY).and_then(|a| a.sigma_g()).map_err(super::analytic_err)?;
    let err = rel(width, 2f64.sqrt() * analytic::pinhole_sigma0(&s));
    checks.add(8, err <= 1e-9, format!("sigma_G(d = inf) at the optimal source vs sqrt2 sigma_0: {err:.2e} (target <= 1e-9)"));
    checks.add(
        12,
        all_negative,
        format!("x0/a < 0 at all {} swept points", pumps.len() * DISTANCES.len()),
    );
    Ok(())
}

fn fig4(out: &Path, threads: usize, adjust: Adjust, checks: &mut Checks) -> Result<(), CliError> {
    let pumps = sigma_p_axis()?;
    let mut rows = Vec::new();
    for &sp in &pumps {
        let mut row = vec![sp];
        for (d, _) in DISTANCES {
            let s = validated(reference(sp, d, adjust))?;
            row.push(analytic::resolution(&s, ghostpin::DEFAULT_THRESHOLD).map_err(super::analytic_err)?);
        }
        rows.push(row);
    }
    let mut header = vec!["sigma_p_m".to_string()];
    header.extend(DISTANCES.iter().map(|(_, l)| format!("resolution_m_d{l}")));
    write_table(
        &out.join("fig4_resolution.csv"),
        header,
        &rows,
        "ghostpin reproduce fig4",
        threads,
        json!({ "threshold": ghostpin::DEFAULT_THRESHOLD }),
    )?;

    // Locus of the resolution minimum as the object distance varies.
    let mut locus = RunConfig::new(reference(167e-6, 0.1, adjust));
    locus.setup.z_s = 3.0;
    locus.run.sweep_axis = SweepAxis::D;
    locus.run.sweep_min = Some(0.05);
    locus.run.sweep_max = Some(3.0);
    locus.run.sweep_points = 60;
    locus.run.sigma_p_policy = SigmaPPolicy::Optimal;
    locus.run.objective = Objective::Resolution;
    locus.output.prefix = "fig4_minima_".into();
    let values = sweep_values(0.05, 3.0, 60)?;
    let minima = values.iter().map(|&v| sweep_row(&locus, v)).collect::<Result<Vec<_>, _>>()?;
    let ctx = panel(out, threads, locus, "fig4_minima", "ghostpin sweep")?;
    write_table(&ctx.path("sweep_d.csv"), sweep_header(&ctx.config), &minima, &ctx.command, threads, json!({ "config": ctx.config.to_ini() }))?;

    // Mode count against crystal thickness with σ_P re-optimized for R.
    let mut modes = RunConfig::new(reference(258e-6, 1.0, adjust));
    modes.setup.pm_model = PhaseMatchingModel::Gaussian;
    adjust(&mut modes.setup);
    modes.run.sweep_axis = SweepAxis::Lz;
    modes.run.sweep_min = Some(0.5e-3);
    modes.run.sweep_max = Some(10e-3);
    modes.run.sweep_points = 20;
    modes.run.sweep_engine = true;
    modes.run.sigma_p_policy = SigmaPPolicy::Optimal;
    modes.run.objective = Objective::Resolution;
    modes.output.prefix = "fig4_modes_".into();
    let values = sweep_values(0.5e-3, 10e-3, 20)?;
    let n_rows = values.iter().map(|&v| sweep_row(&modes, v)).collect::<Result<Vec<_>, _>>()?;
    let ctx = panel(out, threads, modes, "fig4_modes", "ghostpin sweep")?;
    write_table(&ctx.path("sweep_l_z.csv"), sweep_header(&ctx.config), &n_rows, &ctx.command, threads, json!({ "config": ctx.config.to_ini() }))?;
    let n: Vec<f64> = n_rows.iter().map(|r| r[7]).collect();
    let monotone = n.windows(2).all(|w| w[1] < w[0]);

    // Headline numbers at d = 1 m, σ_P = 258 µm.
    let s = validated(reference(258e-6, 1.0, adjust))?;
    let m = analytic::magnification(&s).map_err(super::analytic_err)?;
    checks.add(2, (m - -1.2).abs() <= 0.05, format!("x0/a = {m:.5} at d = 1 m, sigma_P = 258 um (target -1.2 +/- 0.05)"));
    let r = analytic::resolution(&s, ghostpin::DEFAULT_THRESHOLD).map_err(super::analytic_err)?;
    checks.add(3, rel(r, 1.5e-3) <= 0.05, format!("R = {:.4} mm (target 1.5 mm +/- 5%)", r * 1e3));
    let mut g = *s.setup();
    g.pm_model = PhaseMatchingModel::Gaussian;
    adjust(&mut g);
    let g = validated(g)?;
    let w = illumination_width_streamed(&g, &illumination_grid(&g).map_err(grid_error)?)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let n_head = w.sigma_s / r;
    checks.add(
        4,
        (n_head - 10.0).abs() <= 2.0,
        format!("N = {n_head:.3} from sigma_S = {:.4} mm (target 10 +/- 2)", w.sigma_s * 1e3),
    );
    checks.add(
        12,
        monotone && minima.iter().all(|row| row[3] < 0.0),
        format!(
            "N decreasing over l_z = 0.5..10 mm: {monotone} (N from {:.3} to {:.3}); x0/a < 0 along the minima locus",
            n[0],
            n[n.len() - 1]
        ),
    );

    // Complex object, qualitative only.
    let object_path = out.join(ILLUSTRATIVE_NAME);
    fs::write(&object_path, ILLUSTRATIVE_OBJECT).map_err(io_err(&object_path))?;
    let mut config = RunConfig::new(*s.setup());
    config.object = Some(ObjectConfig::File { path: ILLUSTRATIVE_NAME.into() });
    config.output.prefix = "fig4_complex_".into();
    let spec = config.object_spec(out)?;
    let ctx = panel(out, threads, config, "fig4_complex", "ghostpin ghost")?;
    let grid = super::build_grid(&ctx.config, &s, &spec)?;
    let result = run_engine(&s, &spec, &grid)?;
    write_ghost(&ctx, "ghost", &s, &result)?;
    for f in emit_jsp(&ctx, "jsp", &s, &result)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}
