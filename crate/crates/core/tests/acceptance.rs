//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line for each; exits non-zero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use ghostpin::analytic::{self, alphas_at, optimal_source, GAMMA};
use ghostpin::engine::{compute_jsp, ghost_pattern, illumination_width_streamed, visibility};
use ghostpin::grid::{auto_grid, illumination_grid, SpectralGrid};
use ghostpin::optimize::{optimize_pump_width, Objective};
use ghostpin::profile::{dominant_maxima, fit_gaussian};
use ghostpin::{psi_spdc, ObjectSpec, ObjectTransmission, OpticalSetup, PhaseMatchingModel, PropagationMode, ValidatedSetup};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn reference(sigma_p: f64, d: f64) -> OpticalSetup {
    OpticalSetup { z_s: d.max(1.2), ..OpticalSetup::reference(sigma_p, d) }
}

fn gaussian(sigma_p: f64, d: f64) -> ValidatedSetup {
    reference(sigma_p, d).with_pm_model(PhaseMatchingModel::Gaussian).validate().unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c01_far_field_magnification() -> Outcome {
    let s = reference(167e-6, 0.3).validate().unwrap();
    let m = analytic::magnification_farfield(&s).value;
    outcome(m == -5.0, format!("-(z_I/d)(lambda_I/lambda_S) = {m:?} (target -5.000, exact)"))
}

fn c02_closed_form_magnification() -> Outcome {
    let s = reference(258e-6, 1.0).validate().unwrap();
    let m = analytic::magnification(&s).unwrap();
    outcome((m - -1.2).abs() <= 0.05, format!("x0/a = {m:.5} (target -1.2 +/- 0.05)"))
}

fn c03_resolution() -> Outcome {
    let s = reference(258e-6, 1.0).validate().unwrap();
    let r = analytic::resolution(&s, 0.4).unwrap();
    outcome(rel(r, 1.5e-3) <= 0.05, format!("R = {:.4} mm (target 1.5 mm +/- 5%)", r * 1e3))
}

fn c04_mode_count() -> Outcome {
    let s = gaussian(258e-6, 1.0);
    let w = illumination_width_streamed(&s, &illumination_grid(&s).unwrap()).unwrap();
    let n = analytic::n_modes(&s, w.sigma_s, 0.4).unwrap();
    outcome(
        (n - 10.0).abs() <= 2.0,
        format!(
            "N = {n:.3} with sigma_S = {:.4} mm (Gaussian fit{}), R = {:.4} mm (target 10 +/- 2)",
            w.sigma_s * 1e3,
            if w.used_moment_fallback { ", moment fallback" } else { "" },
            analytic::resolution(&s, 0.4).unwrap() * 1e3
        ),
    )
}

fn c05_rayleigh_length() -> Outcome {
    let s = reference(167e-6, 0.3).validate().unwrap();
    let z = s.derived().pump_rayleigh_length;
    outcome(rel(z, 0.5) <= 0.01, format!("2 pi sigma_P^2 / lambda_P = {:.4} m (target 0.5 m +/- 1%)", z))
}

fn c06_double_slit_image() -> Outcome {
    let s = reference(167e-6, 0.3).with_mode(PropagationMode::Exact).validate().unwrap();
    let spec = ObjectSpec::DoubleSlit { separation: 940e-6, width: 50e-6 };
    let g = auto_grid(&s, &spec, 5e-3).unwrap();
    let psi = psi_spdc(&g, &s).unwrap();
    let gp = ghost_pattern(&compute_jsp(&psi, &spec.sample(&g).unwrap(), &s).unwrap());
    let peaks = dominant_maxima(&gp.profile);
    let xs: Vec<f64> = peaks.iter().map(|&j| gp.profile.coords()[j]).collect();
    let positions_ok = xs.len() == 2 && xs.iter().all(|x| rel(x.abs(), 2.35e-3) <= 0.05) && xs[0] * xs[1] < 0.0;
    let v = visibility(&gp);
    let v_ok = matches!(v, Ok(v) if v < 0.4);
    outcome(
        positions_ok && v_ok,
        format!(
            "maxima at {:?} mm (target +/-2.35 mm +/- 5%), midpoint ratio {:?} (target < 0.4), grid {}x{}",
            xs.iter().map(|x| (x * 1e6).round() / 1e3).collect::<Vec<_>>(),
            v.map(|v| (v * 1e4).round() / 1e4),
            g.signal.len(),
            g.idler.len()
        ),
    )
}

fn c07_sigma_g_minimum() -> Outcome {
    let s = reference(167e-6, 0.3).validate().unwrap();
    let o = optimize_pump_width(&s, Objective::SigmaG, (50e-6, 800e-6), 0.4).unwrap();
    outcome(
        rel(o.sigma_p_star, 167e-6) <= 0.15 && !o.at_bound,
        format!("argmin sigma_G = {:.2} um (target 167 um +/- 15%)", o.sigma_p_star * 1e6),
    )
}

fn c08_pinhole_optimum() -> Outcome {
    let base = reference(167e-6, 0.3);
    let opt = optimal_source(base.z_i, base.lambda_i).unwrap();
    // Pump width whose source size equals the optimum.
    let crystal = GAMMA * (base.lambda_i / base.lambda_s) * base.lambda_p * base.l_z / (2.0 * std::f64::consts::PI);
    let sigma_p = (2.0 * (opt.sigma_0_star.powi(2) - crystal)).sqrt();
    let s = OpticalSetup { sigma_p, ..base }.validate().unwrap();
    let s0 = analytic::pinhole_sigma0(&s);
    let width = alphas_at(&s, f64::INFINITY).unwrap().sigma_g().unwrap();
    let err = rel(width, 2f64.sqrt() * s0);
    outcome(err <= 1e-9, format!("sigma_G(d=inf) / (sqrt2 sigma_0) - 1 = {err:.2e} (target <= 1e-9)"))
}

fn c09_signal_distance_invariance() -> Outcome {
    let s = reference(167e-6, 0.3).validate().unwrap();
    let spec = ObjectSpec::DoubleSlit { separation: 940e-6, width: 50e-6 };
    let g = auto_grid(&s, &spec, 5e-3).unwrap();
    let psi = psi_spdc(&g, &s).unwrap();
    let obj = spec.sample(&g).unwrap();
    let pattern = |z_s: f64| {
        let t = s.modified(|o| o.z_s = z_s).unwrap();
        ghost_pattern(&compute_jsp(&psi, &obj, &t).unwrap()).profile
    };
    let (a, b) = (pattern(0.6), pattern(1.2));
    let diff = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / a.max();
    outcome(diff <= 1e-10, format!("relative L-inf difference z_S = 0.6 vs 1.2 m: {diff:.2e} (target <= 1e-10)"))
}

fn c10_unitarity() -> Outcome {
    let base = gaussian(167e-6, 0.3);
    // Distances are kept short enough that an open aperture fits a desk-scale
    // grid without tripping the wrap-around sentinels.
    let combos: Vec<(f64, f64)> =
        [0.1, 0.2, 0.3].iter().flat_map(|&d| [0.1, 0.2, 0.3].iter().map(move |&z| (d, z))).collect();
    let setups: Vec<ValidatedSetup> =
        combos.iter().map(|&(d, z_i)| base.modified(|o| { o.d = d; o.z_s = d.max(1.2); o.z_i = z_i }).unwrap()).collect();
    let grids: Vec<SpectralGrid> = setups.iter().map(|s| auto_grid(s, &ObjectSpec::Uniform, 1e-3).unwrap()).collect();
    let g = SpectralGrid::union(&grids).unwrap();
    let psi = psi_spdc(&g, &base).unwrap();
    let open = ObjectTransmission::uniform(&g);
    let masses: Vec<f64> = setups.iter().map(|s| compute_jsp(&psi, &open, s).unwrap().raw_mass).collect();
    let spread = masses.iter().map(|m| rel(*m, masses[0])).fold(0.0, f64::max);
    outcome(
        spread <= 1e-10,
        format!("max relative JSP mass change over 9 (d, z_I) pairs: {spread:.2e} (target <= 1e-10), grid {}x{}", g.signal.len(), g.idler.len()),
    )
}

fn c11_delta_slit_agreement() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut where_ = String::new();
    for sp in [100e-6, 167e-6, 300e-6, 500e-6] {
        for d in [0.1, 0.3, 1.0] {
            let s = gaussian(sp, d);
            let spec = ObjectSpec::DeltaSlit { center: 300e-6 };
            let g = auto_grid(&s, &spec, 1e-3).unwrap();
            let psi = psi_spdc(&g, &s).unwrap();
            let obj = spec.sample(&g).unwrap();
            let a = 300e-6 - obj.snap_distance().unwrap();
            let fit = fit_gaussian(&ghost_pattern(&compute_jsp(&psi, &obj, &s).unwrap()).profile).unwrap();
            let ec = rel(fit.center, analytic::image_position(&s, a).unwrap());
            let ew = rel(fit.width, analytic::sigma_g(&s).unwrap());
            if ec.max(ew) > worst {
                worst = ec.max(ew);
                where_ = format!("sigma_P = {:.0} um, d = {d} m", sp * 1e6);
            }
        }
    }
    outcome(worst <= 0.05, format!("worst relative deviation of fitted center/width: {worst:.2e} at {where_} (target <= 5%)"))
}

fn c12_inversion_and_mode_trend() -> Outcome {
    let mut positive = 0;
    for i in 0..16 {
        for j in 0..16 {
            let sp = 50e-6 + 750e-6 * i as f64 / 15.0;
            let d = 0.05 + 1.95 * j as f64 / 15.0;
            if analytic::magnification(&reference(sp, d).validate().unwrap()).unwrap() >= 0.0 {
                positive += 1;
            }
        }
    }
    let mut modes = Vec::new();
    for lz in [0.5e-3, 1e-3, 2e-3, 3e-3, 5e-3, 10e-3] {
        let s = gaussian(258e-6, 1.0).modified(|o| o.l_z = lz).unwrap();
        let best = optimize_pump_width(&s, Objective::Resolution, (50e-6, 800e-6), 0.4).unwrap();
        let s = s.modified(|o| o.sigma_p = best.sigma_p_star).unwrap();
        let w = illumination_width_streamed(&s, &illumination_grid(&s).unwrap()).unwrap();
        modes.push(analytic::n_modes(&s, w.sigma_s, 0.4).unwrap());
    }
    let monotone = modes.windows(2).all(|w| w[1] < w[0]);
    outcome(
        positive == 0 && monotone,
        format!(
            "non-negative x0/a at {positive}/256 samples; N(l_z = 0.5..10 mm) = {:?}",
            modes.iter().map(|n| (n * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("far-field magnification", c01_far_field_magnification),
        ("closed-form magnification at d = 1 m", c02_closed_form_magnification),
        ("resolution at d = 1 m", c03_resolution),
        ("mode count at d = 1 m", c04_mode_count),
        ("pump Rayleigh length", c05_rayleigh_length),
        ("double-slit ghost image", c06_double_slit_image),
        ("sigma_G minimum location", c07_sigma_g_minimum),
        ("pinhole optimum identity", c08_pinhole_optimum),
        ("z_S invariance", c09_signal_distance_invariance),
        ("unitarity", c10_unitarity),
        ("delta-slit analytic/numeric agreement", c11_delta_slit_agreement),
        ("inversion and mode-count trend", c12_inversion_and_mode_trend),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = format!("criterion {:02}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|p| id.contains(p.as_str()) || name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(f));
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("panicked: {}", e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())),
        };
        if !pass {
            failed += 1;
        }
        println!("{id} [{}] {name}: {detail} ({secs:.1} s)", if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
