//! Line-oriented run configuration: `[section]` headers, `key = value`
//! pairs and `#` comments.

use std::collections::HashSet;
use std::path::PathBuf;

use crate::erk::{builtin_scheme, LimiterMode};
use crate::error::{Error, Result};
use crate::io::SnapshotFormat;
use crate::scenarios::{scenario_by_name, Cone};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: String,
    pub final_time: Option<f64>,
    pub cones: Option<Vec<Cone>>,
    pub cells: Option<usize>,
    pub distortion: Option<f64>,
    pub seed: u64,
    pub scheme: String,
    pub cfl: Option<f64>,
    pub tau_max: f64,
    /// Overrides the scenario's default.
    pub relax: Option<bool>,
    pub eps_reg: f64,
    pub h_max_ref: Option<f64>,
    pub limiter: LimiterMode,
    pub mass_correction: bool,
    pub indicator: bool,
    pub output_dir: Option<PathBuf>,
    /// Simulated time between snapshots; `None` writes only the final state.
    pub cadence: Option<f64>,
    pub formats: Vec<SnapshotFormat>,
    /// Compute error indicators against the exact solution.
    pub errors: bool,
}

impl RunConfig {
    pub fn new(scenario: &str) -> Self {
        RunConfig {
            scenario: scenario.to_string(),
            final_time: None,
            cones: None,
            cells: None,
            distortion: None,
            seed: 1,
            scheme: "RK(3,3;1)".into(),
            cfl: None,
            tau_max: 1.0,
            relax: None,
            eps_reg: 1e-4,
            h_max_ref: None,
            limiter: LimiterMode::Convex,
            mass_correction: true,
            indicator: true,
            output_dir: None,
            cadence: None,
            formats: vec![SnapshotFormat::Csv],
            errors: true,
        }
    }

    /// Range checks shared by the parser and programmatic construction.
    pub fn validate(&self) -> Result<()> {
        scenario_by_name(&self.scenario)?;
        builtin_scheme(&self.scheme)?;
        if let Some(c) = self.cfl {
            if !(c > 0.0 && c <= 1.0) {
                return Err(Error::Config(format!("cfl must lie in (0, 1], got {c}")));
            }
        }
        if let Some(t) = self.final_time {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("final_time must be positive, got {t}")));
            }
        }
        if let Some(c) = self.cadence {
            if !(c > 0.0) {
                return Err(Error::Config(format!("cadence must be positive, got {c}")));
            }
        }
        if let Some(n) = self.cells {
            if n == 0 {
                return Err(Error::Config("cells must be positive".into()));
            }
        }
        if let Some(d) = self.distortion {
            if !(0.0..0.5).contains(&d) {
                return Err(Error::Config(format!("distortion must lie in [0, 0.5), got {d}")));
            }
        }
        if !(self.tau_max > 0.0) {
            return Err(Error::Config(format!("tau_max must be positive, got {}", self.tau_max)));
        }
        if !(self.eps_reg >= 0.0) {
            return Err(Error::Config(format!("eps_reg must be non-negative, got {}", self.eps_reg)));
        }
        if let Some(h) = self.h_max_ref {
            if !(h > 0.0) {
                return Err(Error::Config(format!("h_max_ref must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, got `{v}`")),
    }
}

fn parse_num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("`{v}`: {e}"))
}

/// `x, y, height, slope; ...`
fn parse_cones(v: &str) -> std::result::Result<Vec<Cone>, String> {
    v.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|c| {
            let f: Vec<f64> = c.split(',').map(|s| parse_num::<f64>(s.trim())).collect::<std::result::Result<_, _>>()?;
            if f.len() != 4 || !(f[3] > 0.0) {
                return Err(format!("cone `{}` needs `x, y, height, slope` with slope > 0", c.trim()));
            }
            Ok(Cone { center: [f[0], f[1]], height: f[2], slope: f[3] })
        })
        .collect()
}

/// Parse and validate a configuration file's text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::new("");
    let mut section = String::new();
    let mut seen = HashSet::new();
    let mut scenario_line = None;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: line_no, msg };
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| err(format!("malformed section header `{line}`")))?;
            section = name.trim().to_ascii_lowercase();
            if !["scenario", "mesh", "time", "solver", "output"].contains(&section.as_str()) {
                return Err(err(format!("unknown section `{section}`")));
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim().trim_matches('"');
        if section.is_empty() {
            return Err(err(format!("key `{key}` outside of a section")));
        }
        if !seen.insert(format!("{section}.{key}")) {
            return Err(err(format!("duplicate key `{key}` in [{section}]")));
        }
        let r: std::result::Result<(), String> = (|| {
            match (section.as_str(), key.as_str()) {
                ("scenario", "name") => {
                    cfg.scenario = value.to_string();
                    scenario_line = Some(line_no);
                }
                ("scenario", "final_time") => cfg.final_time = Some(parse_num(value)?),
                ("scenario", "cones") => cfg.cones = Some(parse_cones(value)?),
                ("mesh", "cells") => cfg.cells = Some(parse_num(value)?),
                ("mesh", "distortion") => cfg.distortion = Some(parse_num(value)?),
                ("mesh", "seed") => cfg.seed = parse_num(value)?,
                ("time", "scheme") => cfg.scheme = value.to_string(),
                ("time", "cfl") => cfg.cfl = Some(parse_num(value)?),
                ("time", "tau_max") => cfg.tau_max = parse_num(value)?,
                ("solver", "relax") => cfg.relax = Some(parse_bool(value)?),
                ("solver", "eps_reg") => cfg.eps_reg = parse_num(value)?,
                ("solver", "h_max_ref") => cfg.h_max_ref = Some(parse_num(value)?),
                ("solver", "limiter") => {
                    cfg.limiter = match value.to_ascii_lowercase().as_str() {
                        "convex" => LimiterMode::Convex,
                        "unlimited" | "none" => LimiterMode::Unlimited,
                        "low_order" | "low-order" => LimiterMode::LowOrder,
                        _ => return Err(format!("limiter must be convex, unlimited or low_order, got `{value}`")),
                    }
                }
                ("solver", "mass_correction") => cfg.mass_correction = parse_bool(value)?,
                ("solver", "indicator") => cfg.indicator = parse_bool(value)?,
                ("output", "directory") => cfg.output_dir = Some(PathBuf::from(value)),
                ("output", "cadence") => cfg.cadence = Some(parse_num(value)?),
                ("output", "format") => {
                    cfg.formats = match value.to_ascii_lowercase().as_str() {
                        "csv" => vec![SnapshotFormat::Csv],
                        "vtk" => vec![SnapshotFormat::Vtk],
                        "both" => vec![SnapshotFormat::Csv, SnapshotFormat::Vtk],
                        _ => return Err(format!("format must be csv, vtk or both, got `{value}`")),
                    }
                }
                ("output", "errors") => cfg.errors = parse_bool(value)?,
                _ => return Err(format!("unknown key `{key}` in [{section}]")),
            }
            Ok(())
        })();
        r.map_err(err)?;
    }
    if cfg.scenario.is_empty() {
        return Err(Error::Config("missing required key `scenario` (`name = ...` under [scenario])".into()));
    }
    cfg.validate().map_err(|e| match (e, scenario_line) {
        (Error::UnknownScenario(s), Some(line)) => Error::Parse { line, msg: format!("unknown scenario `{s}`") },
        (e, _) => e,
    })?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_file() {
        let cfg = parse_config(
            "# vortex run\n[scenario]\nname = vortex\n\n[time]\ncfl = 0.9   # comment\nscheme = ssp33\n[solver]\nrelax = off\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario, "vortex");
        assert_eq!(cfg.cfl, Some(0.9));
        assert_eq!(cfg.scheme, "ssp33");
        assert_eq!(cfg.relax, Some(false));
    }

    #[test]
    fn missing_scenario_is_named() {
        let e = parse_config("[time]\ncfl = 0.5\n").unwrap_err();
        assert!(e.to_string().contains("scenario"), "{e}");
    }

    #[test]
    fn range_and_key_errors() {
        let e = parse_config("[scenario]\nname = vortex\n[time]\ncfl = 1.5\n").unwrap_err();
        assert!(e.to_string().contains("cfl"), "{e}");
        let e = parse_config("[scenario]\nname = vortex\n[time]\nspeed = 3\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }), "{e}");
        let e = parse_config("[scenario]\nname = vortex\n[output]\ncadence = 0\n").unwrap_err();
        assert!(e.to_string().contains("cadence"));
        let e = parse_config("[scenario]\nname = vortex\n[time]\ncfl = fast\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }));
        let e = parse_config("[scenario]\nname = lake\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let e = parse_config("[time]\nscheme = RK(7,7;1)\n[scenario]\nname = vortex\n").unwrap_err();
        assert!(matches!(e, Error::UnknownScheme(_)));
        assert!(parse_config("name = vortex\n").is_err());
        assert!(parse_config("[scenario]\nname = vortex\nname = vortex\n").is_err());
    }

    #[test]
    fn cones_key() {
        let cfg = parse_config("[scenario]\nname = three_bumps\ncones = 1,2,0.5,4; 3,4,2,1\n").unwrap();
        let c = cfg.cones.unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].center, [3.0, 4.0]);
        assert!(parse_config("[scenario]\nname = three_bumps\ncones = 1,2,3\n").is_err());
    }
}
