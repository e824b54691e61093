//! File emission: CSV tables, graymap previews and JSON sidecars.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ghostpin::{SpectralGrid, ValidatedSetup};
use ndarray::Array2;
use serde_json::{json, Value};

/// Relative floor of the logarithmic graymap scale.
pub const PGM_FLOOR: f64 = 1e-6;

/// Shortest decimal that parses back to `v`. Scientific notation outside
/// `[1e-4, 1e16)` keeps very small and very large values compact.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()
}

/// Block-averages `m` so that neither axis exceeds `max` samples. Returns
/// the reduced matrix with the mean coordinate of each block.
pub fn bin_matrix(m: &Array2<f64>, xs: &[f64], xi: &[f64], max: usize) -> (Array2<f64>, Vec<f64>, Vec<f64>) {
    let max = max.max(1);
    let fs = m.nrows().div_ceil(max);
    let fi = m.ncols().div_ceil(max);
    let bin_coords = |c: &[f64], f: usize| -> Vec<f64> {
        c.chunks(f).map(|b| b.iter().sum::<f64>() / b.len() as f64).collect()
    };
    let (bs, bi) = (bin_coords(xs, fs), bin_coords(xi, fi));
    let mut out = Array2::zeros((bs.len(), bi.len()));
    for ((r, c), v) in out.indexed_iter_mut() {
        let rows = r * fs..((r + 1) * fs).min(m.nrows());
        let cols = c * fi..((c + 1) * fi).min(m.ncols());
        let count = (rows.len() * cols.len()) as f64;
        let mut acc = 0.0;
        for i in rows {
            for j in cols.clone() {
                acc += m[[i, j]];
            }
        }
        *v = acc / count;
    }
    (out, bs, bi)
}

/// Matrix CSV: the first row holds `x_I`, the first column `x_S`.
pub fn write_matrix_csv(path: &Path, m: &Array2<f64>, xs: &[f64], xi: &[f64]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["x_s\\x_i".to_string()];
    header.extend(xi.iter().map(|v| fmt_f64(*v)));
    w.write_record(&header)?;
    for (row, x) in m.rows().into_iter().zip(xs) {
        let mut rec = vec![fmt_f64(*x)];
        rec.extend(row.iter().map(|v| fmt_f64(*v)));
        w.write_record(&rec)?;
    }
    w.flush()
}

/// 8-bit binary graymap, rows along `x_S`, log-scaled down to
/// [`PGM_FLOOR`] of the maximum.
pub fn write_pgm(path: &Path, m: &Array2<f64>) -> std::io::Result<()> {
    let max = m.iter().cloned().fold(0.0, f64::max);
    let mut f = fs::File::create(path)?;
    write!(f, "P5\n{} {}\n255\n", m.ncols(), m.nrows())?;
    let span = -PGM_FLOOR.log10();
    let bytes: Vec<u8> = m
        .iter()
        .map(|&v| {
            if !(max > 0.0) || !(v > 0.0) {
                return 0;
            }
            let level = ((v / max).max(PGM_FLOOR).log10() + span) / span;
            (level * 255.0).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    f.write_all(&bytes)?;
    f.flush()
}

pub fn grid_json(grid: &SpectralGrid) -> Value {
    json!({
        "n_s": grid.signal.len(),
        "n_i": grid.idler.len(),
        "dx_s_m": grid.signal.dx(),
        "dx_i_m": grid.idler.dx(),
        "window_s_m": grid.signal.window(),
        "window_i_m": grid.idler.window(),
    })
}

pub fn setup_json(setup: &ValidatedSetup) -> Value {
    let s = setup.setup();
    json!({
        "lambda_p_m": s.lambda_p,
        "lambda_s_m": s.lambda_s,
        "lambda_i_m": s.lambda_i,
        "l_z_m": s.l_z,
        "sigma_p_m": s.sigma_p,
        "d_m": s.d,
        "z_s_m": s.z_s,
        "z_i_m": s.z_i,
        "mode": s.propagation_mode.as_str(),
        "pm": s.pm_model.as_str(),
        "pump_rayleigh_length_m": setup.derived().pump_rayleigh_length,
    })
}

/// Metadata shared by every file a command writes.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub command: String,
    pub config: String,
    pub threads: usize,
}

impl Provenance {
    pub fn sidecar(&self, file: &Path, extra: Value) -> Value {
        let mut v = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "threads": self.threads,
            "file": file.file_name().map(|n| n.to_string_lossy().into_owned()),
            "config": self.config,
        });
        if let (Value::Object(base), Value::Object(more)) = (&mut v, extra) {
            base.extend(more);
        }
        v
    }
}

pub fn sidecar_path(file: &Path) -> PathBuf {
    let mut name = file.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

pub fn write_sidecar(file: &Path, meta: &Value) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(meta).map_err(std::io::Error::other)?;
    fs::write(sidecar_path(file), text + "\n")
}
