//! Run configuration: a sectioned key-value file with unit-suffixed lengths.
//!
//! ```ini
//! [setup]
//! sigma_p = 167um
//! d = 30cm
//!
//! [object]
//! type = double_slit
//! separation = 940um
//! width = 50um
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ghostpin::optimize::Objective;
use ghostpin::{ObjectSpec, OpticalSetup, PhaseMatchingModel, PropagationMode};
use ini::{Ini, ParseOption};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key '{key}' in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("duplicate key '{key}' in [{section}]")]
    DuplicateKey { section: String, key: String },
    #[error("missing key '{key}' in [{section}]")]
    MissingKey { section: String, key: String },
    #[error("[{section}] {key} = '{value}': {message}")]
    BadValue { section: String, key: String, value: String, message: String },
    #[error("no [object] section; this command needs an object")]
    MissingObject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SigmaP,
    D,
    Lz,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::SigmaP => "sigma_p",
            SweepAxis::D => "d",
            SweepAxis::Lz => "l_z",
        }
    }

    pub fn apply(self, setup: &mut OpticalSetup, value: f64) {
        match self {
            SweepAxis::SigmaP => setup.sigma_p = value,
            SweepAxis::D => setup.d = value,
            SweepAxis::Lz => setup.l_z = value,
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sigma_p" => Ok(SweepAxis::SigmaP),
            "d" => Ok(SweepAxis::D),
            "l_z" => Ok(SweepAxis::Lz),
            other => Err(format!("unknown sweep axis '{other}' (expected sigma_p, d or l_z)")),
        }
    }
}

/// How `σ_P` is chosen at each sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaPPolicy {
    Fixed,
    /// Re-optimized for the run objective at every point.
    Optimal,
}

impl SigmaPPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            SigmaPPolicy::Fixed => "fixed",
            SigmaPPolicy::Optimal => "optimal",
        }
    }
}

impl std::str::FromStr for SigmaPPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(SigmaPPolicy::Fixed),
            "optimal" => Ok(SigmaPPolicy::Optimal),
            other => Err(format!("unknown policy '{other}' (expected fixed or optimal)")),
        }
    }
}

/// `None` in a count or window means "auto".
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub n_s: Option<usize>,
    pub n_i: Option<usize>,
    pub window_s: Option<f64>,
    pub window_i: Option<f64>,
    pub fov_i: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n_s: None, n_i: None, window_s: None, window_i: None, fov_i: 5e-3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectConfig {
    Uniform,
    Slit { center: f64, width: f64 },
    DeltaSlit { center: f64 },
    DeltaPair { a: f64 },
    DoubleSlit { separation: f64, width: f64 },
    /// Path as written; relative paths resolve against the config directory.
    File { path: String },
}

impl ObjectConfig {
    pub fn to_spec(&self, base: &Path) -> Result<ObjectSpec, ghostpin::ObjectError> {
        Ok(match self {
            ObjectConfig::Uniform => ObjectSpec::Uniform,
            ObjectConfig::Slit { center, width } => ObjectSpec::Slit { center: *center, width: *width },
            ObjectConfig::DeltaSlit { center } => ObjectSpec::DeltaSlit { center: *center },
            ObjectConfig::DeltaPair { a } => ObjectSpec::DeltaPair { a: *a },
            ObjectConfig::DoubleSlit { separation, width } => {
                ObjectSpec::DoubleSlit { separation: *separation, width: *width }
            }
            ObjectConfig::File { path } => ObjectSpec::from_file(&base.join(path))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub threshold: f64,
    pub sweep_axis: SweepAxis,
    pub sweep_min: Option<f64>,
    pub sweep_max: Option<f64>,
    pub sweep_points: usize,
    /// Also compute `σ_S` and `N` with the numerical engine.
    pub sweep_engine: bool,
    pub sigma_p_policy: SigmaPPolicy,
    pub objective: Objective,
    pub bounds_min: f64,
    pub bounds_max: f64,
    pub sigma_s: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            threshold: ghostpin::DEFAULT_THRESHOLD,
            sweep_axis: SweepAxis::SigmaP,
            sweep_min: None,
            sweep_max: None,
            sweep_points: 200,
            sweep_engine: false,
            sigma_p_policy: SigmaPPolicy::Fixed,
            objective: Objective::Resolution,
            bounds_min: 50e-6,
            bounds_max: 800e-6,
            sigma_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: String,
    pub prefix: String,
    pub jsp_max_export: usize,
    pub pgm: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into(), prefix: String::new(), jsp_max_export: 512, pgm: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub setup: OpticalSetup,
    pub grid: GridConfig,
    pub object: Option<ObjectConfig>,
    pub run: RunOptions,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn new(setup: OpticalSetup) -> Self {
        RunConfig {
            setup,
            grid: GridConfig::default(),
            object: None,
            run: RunOptions::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let opt = ParseOption { enabled_escape: false, ..ParseOption::default() };
        let ini = Ini::load_from_str_opt(text, opt).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let mut seen_sections = BTreeSet::new();
        let mut sections: Vec<Section> = Vec::new();
        for (name, props) in ini.iter() {
            let Some(name) = name else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(ConfigError::UnknownKey { section: "(none)".into(), key: k.into() });
                }
                continue;
            };
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::UnknownSection(name.into()));
            }
            if !seen_sections.insert(name.to_string()) {
                return Err(ConfigError::Syntax(format!("section [{name}] appears twice")));
            }
            let mut entries: Vec<(String, String)> = Vec::new();
            for (k, v) in props.iter() {
                if entries.iter().any(|(e, _)| e == k) {
                    return Err(ConfigError::DuplicateKey { section: name.into(), key: k.into() });
                }
                entries.push((k.to_string(), strip_inline_comment(v).to_string()));
            }
            sections.push(Section { name: name.to_string(), entries, used: BTreeSet::new() });
        }
        let take = |name: &str, sections: &mut Vec<Section>| -> Option<Section> {
            sections.iter().position(|s| s.name == name).map(|i| sections.remove(i))
        };

        let mut s = take("setup", &mut sections).ok_or(ConfigError::MissingKey {
            section: "setup".into(),
            key: "sigma_p".into(),
        })?;
        let base = OpticalSetup::reference(s.require_length("sigma_p")?, s.require_length("d")?);
        let setup = OpticalSetup {
            lambda_p: s.length("lambda_p")?.unwrap_or(base.lambda_p),
            lambda_s: s.length("lambda_s")?.unwrap_or(base.lambda_s),
            lambda_i: s.length("lambda_i")?.unwrap_or(base.lambda_i),
            l_z: s.length("l_z")?.unwrap_or(base.l_z),
            z_s: s.length("z_s")?.unwrap_or(base.z_s),
            z_i: s.length("z_i")?.unwrap_or(base.z_i),
            propagation_mode: s.parsed("mode", parse_mode)?.unwrap_or(base.propagation_mode),
            pm_model: s.parsed("pm", parse_pm)?.unwrap_or(base.pm_model),
            ..base
        };
        s.finish()?;

        let mut grid = GridConfig::default();
        if let Some(mut g) = take("grid", &mut sections) {
            grid.n_s = g.parsed("n_s", parse_count_or_auto)?.flatten();
            grid.n_i = g.parsed("n_i", parse_count_or_auto)?.flatten();
            grid.window_s = g.parsed("window_s", parse_length_or_auto)?.flatten();
            grid.window_i = g.parsed("window_i", parse_length_or_auto)?.flatten();
            grid.fov_i = g.length("fov_i")?.unwrap_or(grid.fov_i);
            g.finish()?;
        }

        let object = match take("object", &mut sections) {
            None => None,
            Some(mut o) => {
                let kind = o.require("type")?;
                let obj = match kind.as_str() {
                    "uniform" => ObjectConfig::Uniform,
                    "slit" => ObjectConfig::Slit {
                        center: o.length("center")?.unwrap_or(0.0),
                        width: o.require_length("width")?,
                    },
                    "delta_slit" => ObjectConfig::DeltaSlit { center: o.length("center")?.unwrap_or(0.0) },
                    "delta_pair" => ObjectConfig::DeltaPair { a: o.require_length("a")? },
                    "double_slit" => ObjectConfig::DoubleSlit {
                        separation: o.require_length("separation")?,
                        width: o.require_length("width")?,
                    },
                    "file" => ObjectConfig::File { path: o.require("path")? },
                    other => {
                        return Err(o.bad(
                            "type",
                            other,
                            "expected uniform, slit, delta_slit, delta_pair, double_slit or file",
                        ))
                    }
                };
                o.finish()?;
                Some(obj)
            }
        };

        let mut run = RunOptions::default();
        if let Some(mut r) = take("run", &mut sections) {
            run.threshold = r.parsed("threshold", parse_plain)?.unwrap_or(run.threshold);
            run.sweep_axis = r.parsed("sweep_axis", |v| v.parse())?.unwrap_or(run.sweep_axis);
            run.sweep_min = r.length("sweep_min")?;
            run.sweep_max = r.length("sweep_max")?;
            run.sweep_points = r.parsed("sweep_points", parse_count)?.unwrap_or(run.sweep_points);
            run.sweep_engine = r.parsed("sweep_engine", parse_bool)?.unwrap_or(run.sweep_engine);
            run.sigma_p_policy = r.parsed("sigma_p_policy", |v| v.parse())?.unwrap_or(run.sigma_p_policy);
            run.objective = r.parsed("objective", |v| v.parse())?.unwrap_or(run.objective);
            run.bounds_min = r.length("bounds_min")?.unwrap_or(run.bounds_min);
            run.bounds_max = r.length("bounds_max")?.unwrap_or(run.bounds_max);
            run.sigma_s = r.length("sigma_s")?;
            r.finish()?;
        }

        let mut output = OutputConfig::default();
        if let Some(mut o) = take("output", &mut sections) {
            output.dir = o.get("dir").unwrap_or(output.dir);
            output.prefix = o.get("prefix").unwrap_or(output.prefix);
            output.jsp_max_export = o.parsed("jsp_max_export", parse_count)?.unwrap_or(output.jsp_max_export);
            output.pgm = o.parsed("pgm", parse_bool)?.unwrap_or(output.pgm);
            o.finish()?;
        }

        Ok(RunConfig { setup, grid, object, run, output })
    }

    /// Canonical text form. Lengths are written in meters with the shortest
    /// decimal that parses back to the same value.
    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        let s = &self.setup;
        let _ = writeln!(out, "[setup]");
        for (k, v) in [
            ("lambda_p", s.lambda_p),
            ("lambda_s", s.lambda_s),
            ("lambda_i", s.lambda_i),
            ("l_z", s.l_z),
            ("sigma_p", s.sigma_p),
            ("d", s.d),
            ("z_s", s.z_s),
            ("z_i", s.z_i),
        ] {
            let _ = writeln!(out, "{k} = {}", meters(v));
        }
        let _ = writeln!(out, "mode = {}", s.propagation_mode.as_str());
        let _ = writeln!(out, "pm = {}", s.pm_model.as_str());

        let g = &self.grid;
        let _ = writeln!(out, "\n[grid]");
        let count = |n: Option<usize>| n.map_or("auto".to_string(), |n| n.to_string());
        let window = |w: Option<f64>| w.map_or("auto".to_string(), meters);
        let _ = writeln!(out, "n_s = {}", count(g.n_s));
        let _ = writeln!(out, "n_i = {}", count(g.n_i));
        let _ = writeln!(out, "window_s = {}", window(g.window_s));
        let _ = writeln!(out, "window_i = {}", window(g.window_i));
        let _ = writeln!(out, "fov_i = {}", meters(g.fov_i));

        if let Some(o) = &self.object {
            let _ = writeln!(out, "\n[object]");
            match o {
                ObjectConfig::Uniform => {
                    let _ = writeln!(out, "type = uniform");
                }
                ObjectConfig::Slit { center, width } => {
                    let _ = writeln!(out, "type = slit\ncenter = {}\nwidth = {}", meters(*center), meters(*width));
                }
                ObjectConfig::DeltaSlit { center } => {
                    let _ = writeln!(out, "type = delta_slit\ncenter = {}", meters(*center));
                }
                ObjectConfig::DeltaPair { a } => {
                    let _ = writeln!(out, "type = delta_pair\na = {}", meters(*a));
                }
                ObjectConfig::DoubleSlit { separation, width } => {
                    let _ = writeln!(
                        out,
                        "type = double_slit\nseparation = {}\nwidth = {}",
                        meters(*separation),
                        meters(*width)
                    );
                }
                ObjectConfig::File { path } => {
                    let _ = writeln!(out, "type = file\npath = \"{path}\"");
                }
            }
        }

        let r = &self.run;
        let _ = writeln!(out, "\n[run]");
        let _ = writeln!(out, "threshold = {}", r.threshold);
        let _ = writeln!(out, "sweep_axis = {}", r.sweep_axis.as_str());
        if let Some(v) = r.sweep_min {
            let _ = writeln!(out, "sweep_min = {}", meters(v));
        }
        if let Some(v) = r.sweep_max {
            let _ = writeln!(out, "sweep_max = {}", meters(v));
        }
        let _ = writeln!(out, "sweep_points = {}", r.sweep_points);
        let _ = writeln!(out, "sweep_engine = {}", r.sweep_engine);
        let _ = writeln!(out, "sigma_p_policy = {}", r.sigma_p_policy.as_str());
        let _ = writeln!(out, "objective = {}", r.objective.as_str());
        let _ = writeln!(out, "bounds_min = {}", meters(r.bounds_min));
        let _ = writeln!(out, "bounds_max = {}", meters(r.bounds_max));
        if let Some(v) = r.sigma_s {
            let _ = writeln!(out, "sigma_s = {}", meters(v));
        }

        let o = &self.output;
        let _ = writeln!(out, "\n[output]");
        let _ = writeln!(out, "dir = \"{}\"", o.dir);
        let _ = writeln!(out, "prefix = \"{}\"", o.prefix);
        let _ = writeln!(out, "jsp_max_export = {}", o.jsp_max_export);
        let _ = writeln!(out, "pgm = {}", o.pgm);
        out
    }

    pub fn object_spec(&self, base: &Path) -> Result<ObjectSpec, crate::CliError> {
        let obj = self.object.as_ref().ok_or(ConfigError::MissingObject)?;
        obj.to_spec(base).map_err(|e| crate::CliError::Config(e.to_string()))
    }

    /// Output directory, relative to the working directory unless overridden.
    pub fn output_dir(&self, overridden: Option<&PathBuf>) -> PathBuf {
        overridden.cloned().unwrap_or_else(|| PathBuf::from(&self.output.dir))
    }
}

const SECTIONS: [&str; 5] = ["setup", "grid", "object", "run", "output"];

const KEYS: [(&str, &[&str]); 5] = [
    ("setup", &["lambda_p", "lambda_s", "lambda_i", "l_z", "sigma_p", "d", "z_s", "z_i", "mode", "pm"]),
    ("grid", &["n_s", "n_i", "window_s", "window_i", "fov_i"]),
    ("object", &["type", "center", "width", "separation", "a", "path"]),
    (
        "run",
        &[
            "threshold",
            "sweep_axis",
            "sweep_min",
            "sweep_max",
            "sweep_points",
            "sweep_engine",
            "sigma_p_policy",
            "objective",
            "bounds_min",
            "bounds_max",
            "sigma_s",
        ],
    ),
    ("output", &["dir", "prefix", "jsp_max_export", "pgm"]),
];

struct Section {
    name: String,
    entries: Vec<(String, String)>,
    used: BTreeSet<String>,
}

impl Section {
    fn get(&mut self, key: &str) -> Option<String> {
        self.used.insert(key.to_string());
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone())
    }

    fn require(&mut self, key: &str) -> Result<String, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError::MissingKey { section: self.name.clone(), key: key.into() })
    }

    fn bad(&self, key: &str, value: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::BadValue {
            section: self.name.clone(),
            key: key.into(),
            value: value.into(),
            message: message.into(),
        }
    }

    fn parsed<T>(&mut self, key: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => f(&v).map(Some).map_err(|m| self.bad(key, &v, m)),
        }
    }

    fn length(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.parsed(key, parse_length)
    }

    fn require_length(&mut self, key: &str) -> Result<f64, ConfigError> {
        let v = self.require(key)?;
        parse_length(&v).map_err(|m| self.bad(key, &v, m))
    }

    /// Rejects keys that were never asked for.
    fn finish(self) -> Result<(), ConfigError> {
        let allowed = KEYS.iter().find(|(s, _)| *s == self.name).map(|(_, k)| *k).unwrap_or(&[]);
        for (k, _) in &self.entries {
            if !self.used.contains(k) || !allowed.contains(&k.as_str()) {
                return Err(ConfigError::UnknownKey { section: self.name.clone(), key: k.clone() });
            }
        }
        Ok(())
    }
}

/// Drops a trailing `; ...` or `# ...` comment that follows whitespace.
fn strip_inline_comment(v: &str) -> &str {
    let cut = v
        .char_indices()
        .find(|&(i, c)| (c == ';' || c == '#') && v[..i].ends_with(char::is_whitespace))
        .map_or(v.len(), |(i, _)| i);
    v[..cut].trim()
}

/// Shortest round-trip decimal in meters.
pub fn meters(v: f64) -> String {
    format!("{v}m")
}

/// A number with an optional length unit: `nm`, `um`, `µm`, `mm`, `cm` or
/// `m`. A bare number is in meters.
pub fn parse_length(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let units: [(&str, f64); 6] = [("nm", 1e-9), ("um", 1e-6), ("µm", 1e-6), ("mm", 1e-3), ("cm", 1e-2), ("m", 1.0)];
    let (number, scale) = units
        .iter()
        .find_map(|(u, f)| s.strip_suffix(u).map(|n| (n.trim_end(), *f)))
        .unwrap_or((s, 1.0));
    let v: f64 = number.parse().map_err(|_| format!("not a length: '{s}'"))?;
    if !v.is_finite() {
        return Err(format!("not a finite length: '{s}'"));
    }
    // Multiplying by 1.0 would be exact anyway; skipping it keeps `-0` intact.
    Ok(if scale == 1.0 { v } else { v * scale })
}

fn parse_length_or_auto(s: &str) -> Result<Option<f64>, String> {
    if s == "auto" {
        Ok(None)
    } else {
        parse_length(s).map(Some)
    }
}

fn parse_plain(s: &str) -> Result<f64, String> {
    s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| format!("not a number: '{s}'"))
}

fn parse_count(s: &str) -> Result<usize, String> {
    s.parse().map_err(|_| format!("not a non-negative integer: '{s}'"))
}

fn parse_count_or_auto(s: &str) -> Result<Option<usize>, String> {
    if s == "auto" {
        Ok(None)
    } else {
        parse_count(s).map(Some)
    }
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("not a boolean: '{s}'")),
    }
}

pub fn parse_mode(s: &str) -> Result<PropagationMode, String> {
    match s {
        "paraxial" => Ok(PropagationMode::Paraxial),
        "exact" => Ok(PropagationMode::Exact),
        _ => Err(format!("unknown mode '{s}' (expected paraxial or exact)")),
    }
}

pub fn parse_pm(s: &str) -> Result<PhaseMatchingModel, String> {
    match s {
        "sinc" => Ok(PhaseMatchingModel::Sinc),
        "gaussian" => Ok(PhaseMatchingModel::Gaussian),
        _ => Err(format!("unknown phase-matching model '{s}' (expected sinc or gaussian)")),
    }
}
