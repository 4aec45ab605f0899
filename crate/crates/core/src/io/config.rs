//! Sectioned `key = value` run configuration.
//!
//! ```text
//! [coefficients]
//! preset = mbba        # optional; explicit keys below override it
//! mu1 = 1.0
//! [grid]
//! dim = 2
//! n = 64
//! domain_length = 6.283185307179586
//! [time]
//! dt = auto            # or a number
//! t_end = 1.0
//! output_every = 10
//! [initial_data]
//! preset = random_smooth
//! amplitude = 0.1
//! [run]
//! mode = full
//! seed = 7
//! output_dir = out
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::diagnostics::ElasticConvention;
use crate::dynamics::Integrator;
use crate::error::{QshError, Result};
use crate::io::presets::{PresetParams, PRESET_NAMES};
use crate::params::{preset_mbba, Coefficients, Regime, COEFFICIENT_KEYS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RunMode {
    Full,
    QOnly,
    TwistwaveCompare,
    Validate,
}

impl FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" => Ok(RunMode::Full),
            "q_only" => Ok(RunMode::QOnly),
            "twistwave_compare" => Ok(RunMode::TwistwaveCompare),
            "validate" => Ok(RunMode::Validate),
            other => Err(format!(
                "mode must be full, q_only, twistwave_compare or validate, got `{other}`"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum InitialData {
    Preset { name: String, params: PresetParams },
    Snapshot(PathBuf),
}

/// Radial settings used by `twistwave_compare`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwistwaveConfig {
    pub cells: usize,
    /// Outer radius; defaults to `domain_length/2 − 2h`.
    pub radius: Option<f64>,
    /// Bump width of the initial profile; defaults to `domain_length/12`.
    pub width: Option<f64>,
    pub amplitude: f64,
    pub sample_every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub coefficients: Coefficients,
    pub coefficient_preset: Option<String>,
    pub dim: usize,
    pub n: usize,
    pub domain_length: f64,
    /// `None` selects the CFL step.
    pub dt: Option<f64>,
    pub cfl_safety: f64,
    pub t_end: f64,
    pub output_every: usize,
    /// Times at which snapshots are written, besides the final state.
    pub snapshot_times: Vec<f64>,
    pub integrator: Integrator,
    pub initial_data: InitialData,
    pub mode: RunMode,
    pub mollifier_n: Option<u32>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub regime: Regime,
    pub elastic_convention: ElasticConvention,
    pub twistwave: TwistwaveConfig,
    pub warnings: Vec<String>,
}

/// Keys accepted per section (coefficients are listed separately).
const GRID_KEYS: [&str; 3] = ["dim", "n", "domain_length"];
const TIME_KEYS: [&str; 6] = ["dt", "cfl_safety", "t_end", "output_every", "snapshot_times", "integrator"];
const INITIAL_KEYS: [&str; 7] = ["preset", "snapshot", "amplitude", "w_amplitude", "k0", "width", "seed"];
const RUN_KEYS: [&str; 6] = ["mode", "mollifier_n", "seed", "output_dir", "regime", "elastic_convention"];
const TWIST_KEYS: [&str; 5] = ["cells", "radius", "width", "amplitude", "sample_every"];

fn known(section: &str, key: &str) -> bool {
    match section {
        "coefficients" => key == "preset" || key == "mbba_mu1" || COEFFICIENT_KEYS.contains(&key),
        "grid" => GRID_KEYS.contains(&key),
        "time" => TIME_KEYS.contains(&key),
        "initial_data" => INITIAL_KEYS.contains(&key),
        "run" => RUN_KEYS.contains(&key),
        "twistwave" => TWIST_KEYS.contains(&key),
        _ => false,
    }
}

/// `section.key → (value, line)`; overrides use line 0.
#[derive(Debug, Default)]
struct Table {
    path: PathBuf,
    entries: BTreeMap<String, (String, usize)>,
}

impl Table {
    fn parse(path: &Path, text: &str) -> Result<Table> {
        let mut table = Table {
            path: path.to_path_buf(),
            entries: BTreeMap::new(),
        };
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split(['#', ';']).next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| table.error(line, "unterminated section header"))?;
                let name = name.trim();
                if !["coefficients", "grid", "time", "initial_data", "run", "twistwave"].contains(&name) {
                    return Err(table.error(line, &format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| table.error(line, "expected `key = value`"))?;
            let key = key.trim();
            let value = value.trim();
            let sec = section
                .as_deref()
                .ok_or_else(|| table.error(line, "key outside of any section"))?;
            if key.is_empty() {
                return Err(table.error(line, "empty key"));
            }
            if !known(sec, key) {
                return Err(QshError::UnknownKey {
                    key: format!("{sec}.{key}"),
                    line,
                });
            }
            let full = format!("{sec}.{key}");
            if table.entries.contains_key(&full) {
                return Err(table.error(line, &format!("duplicate key `{key}`")));
            }
            table.entries.insert(full, (value.to_string(), line));
        }
        Ok(table)
    }

    fn override_with(&mut self, spec: &str) -> Result<()> {
        let (key, value) = spec.split_once('=').ok_or_else(|| {
            QshError::InvalidArgument(format!("override `{spec}` is not `section.key=value`"))
        })?;
        let key = key.trim();
        let (sec, name) = key.split_once('.').ok_or_else(|| {
            QshError::InvalidArgument(format!("override key `{key}` needs a `section.` prefix"))
        })?;
        if !known(sec, name) {
            return Err(QshError::UnknownKey {
                key: key.to_string(),
                line: 0,
            });
        }
        self.entries.insert(key.to_string(), (value.trim().to_string(), 0));
        Ok(())
    }

    fn error(&self, line: usize, message: &str) -> QshError {
        QshError::Parse {
            path: self.path.clone(),
            line,
            message: message.to_string(),
        }
    }

    fn raw(&self, key: &str) -> Option<&(String, usize)> {
        self.entries.get(key)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some((value, line)) => value
                .parse::<T>()
                .map(Some)
                .map_err(|e| self.error(*line, &format!("bad value for `{key}`: {e}"))),
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.parsed::<f64>(key)?.unwrap_or(default))
    }
}

/// Reads and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    load_config_with(path, &[])
}

/// [`load_config`] with `section.key=value` overrides applied on top.
pub fn load_config_with(path: impl AsRef<Path>, overrides: &[String]) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| QshError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(path, &text, base, overrides)
}

/// Parses config text; relative snapshot paths resolve against `base`.
pub fn parse_config(path: &Path, text: &str, base: &Path, overrides: &[String]) -> Result<RunConfig> {
    let mut table = Table::parse(path, text)?;
    for spec in overrides {
        table.override_with(spec)?;
    }
    let mut warnings = Vec::new();

    let dim = table.parsed::<usize>("grid.dim")?.unwrap_or(2);
    if dim != 2 && dim != 3 {
        return Err(line_error(&table, "grid.dim", "dim must be 2 or 3"));
    }
    let n = table.parsed::<usize>("grid.n")?.unwrap_or(64);
    if n < 8 || n % 2 != 0 {
        return Err(line_error(&table, "grid.n", "n must be even and at least 8"));
    }
    let domain_length = table.f64_or("grid.domain_length", 2.0 * PI)?;
    if !(domain_length > 0.0) {
        return Err(line_error(&table, "grid.domain_length", "domain_length must be positive"));
    }

    let coefficient_preset = table.raw("coefficients.preset").map(|(v, _)| v.clone());
    let mut coefficients = match coefficient_preset.as_deref() {
        None => Coefficients::default(),
        Some("mbba") => {
            let mu1 = table.f64_or("coefficients.mbba_mu1", table.f64_or("coefficients.mu1", 1.0)?)?;
            let (c, w) = preset_mbba(mu1)?;
            warnings.extend(w);
            c
        }
        Some(other) => {
            return Err(line_error(
                &table,
                "coefficients.preset",
                &format!("unknown coefficient preset `{other}`"),
            ))
        }
    };
    for key in COEFFICIENT_KEYS {
        if let Some(v) = table.parsed::<f64>(&format!("coefficients.{key}"))? {
            if coefficient_preset.is_some() && key != "mu1" {
                warnings.push(format!("coefficient `{key}` overrides the preset value"));
            }
            coefficients.set(key, v);
        }
    }
    coefficients.dim = dim;

    let dt = match table.raw("time.dt") {
        None => None,
        Some((v, _)) if v == "auto" => None,
        Some(_) => {
            let dt = table.parsed::<f64>("time.dt")?.unwrap();
            if !(dt > 0.0) {
                return Err(line_error(&table, "time.dt", "dt must be positive or `auto`"));
            }
            Some(dt)
        }
    };
    let cfl_safety = table.f64_or("time.cfl_safety", crate::dynamics::CFL_SAFETY)?;
    let t_end = table
        .parsed::<f64>("time.t_end")?
        .ok_or_else(|| QshError::MissingKey("time.t_end".into()))?;
    if !(t_end > 0.0) {
        return Err(line_error(&table, "time.t_end", "t_end must be positive"));
    }
    let output_every = table.parsed::<usize>("time.output_every")?.unwrap_or(1);
    if output_every < 1 {
        return Err(line_error(&table, "time.output_every", "output_every must be at least 1"));
    }
    let snapshot_times = match table.raw("time.snapshot_times") {
        None => Vec::new(),
        Some((v, line)) => v
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| table.error(*line, &format!("bad snapshot time `{s}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let integrator = match table.raw("time.integrator").map(|(v, _)| v.as_str()) {
        None | Some("rk4") => Integrator::Rk4,
        Some("if_rk4") => Integrator::IfRk4,
        Some(other) => {
            return Err(line_error(
                &table,
                "time.integrator",
                &format!("integrator must be rk4 or if_rk4, got `{other}`"),
            ))
        }
    };

    let seed = match table.parsed::<u64>("run.seed")? {
        Some(s) => s,
        None => table.parsed::<u64>("initial_data.seed")?.unwrap_or(0),
    };
    let initial_data = match table.raw("initial_data.snapshot") {
        Some((p, line)) => {
            if table.raw("initial_data.preset").is_some() {
                return Err(table.error(*line, "give either a preset or a snapshot, not both"));
            }
            let p = PathBuf::from(p);
            let p = if p.is_absolute() { p } else { base.join(p) };
            if !p.exists() {
                return Err(table.error(*line, &format!("snapshot {} does not exist", p.display())));
            }
            InitialData::Snapshot(p)
        }
        None => {
            let name = table
                .raw("initial_data.preset")
                .map(|(v, _)| v.clone())
                .unwrap_or_else(|| "zero".to_string());
            if !PRESET_NAMES.contains(&name.as_str()) {
                return Err(QshError::UnknownPreset(name));
            }
            let defaults = PresetParams::default();
            InitialData::Preset {
                name,
                params: PresetParams {
                    amplitude: table.f64_or("initial_data.amplitude", defaults.amplitude)?,
                    w_amplitude: table.parsed("initial_data.w_amplitude")?,
                    k0: table.f64_or("initial_data.k0", defaults.k0)?,
                    seed,
                    width: table.parsed("initial_data.width")?,
                },
            }
        }
    };

    let mode = table.parsed::<RunMode>("run.mode")?.unwrap_or(RunMode::Full);
    let mollifier_n = table.parsed::<u32>("run.mollifier_n")?;
    let output_dir = table
        .raw("run.output_dir")
        .map(|(v, _)| PathBuf::from(v))
        .unwrap_or_else(|| PathBuf::from("qsh_output"));
    let regime = table.parsed::<Regime>("run.regime")?.unwrap_or(Regime::EnergyDecay);
    let elastic_convention = table
        .parsed::<ElasticConvention>("run.elastic_convention")?
        .unwrap_or_default();

    let twistwave = TwistwaveConfig {
        cells: table.parsed::<usize>("twistwave.cells")?.unwrap_or(512),
        radius: table.parsed("twistwave.radius")?,
        width: table.parsed("twistwave.width")?,
        amplitude: table.f64_or("twistwave.amplitude", 0.1)?,
        sample_every: table.parsed::<usize>("twistwave.sample_every")?.unwrap_or(10),
    };

    Ok(RunConfig {
        coefficients,
        coefficient_preset,
        dim,
        n,
        domain_length,
        dt,
        cfl_safety,
        t_end,
        output_every,
        snapshot_times,
        integrator,
        initial_data,
        mode,
        mollifier_n,
        seed,
        output_dir,
        regime,
        elastic_convention,
        twistwave,
        warnings,
    })
}

fn line_error(table: &Table, key: &str, message: &str) -> QshError {
    let line = table.raw(key).map(|(_, l)| *l).unwrap_or(0);
    table.error(line, message)
}
