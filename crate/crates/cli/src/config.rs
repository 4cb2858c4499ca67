//! JSON run configuration.

use std::path::{Path, PathBuf};

use crystalwalk::kernels::{HorizontalRows, TransitionTable};
use crystalwalk::{GeometryParams, LatticeKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable consulted when neither the flag nor the config sets a seed.
pub const SEED_ENV: &str = "CRYSTALWALK_SEED";

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] serde_json::Error),
    #[error("{key}: {constraint}")]
    Invalid { key: String, constraint: String },
    #[error("unknown builtin config `{0}` (known: symmetric-ice, symmetric-graphite, zigzag, vertical-ice)")]
    UnknownBuiltin(String),
}

impl ConfigError {
    fn invalid(key: &str, constraint: impl std::fmt::Display) -> Self {
        Self::Invalid { key: key.to_string(), constraint: constraint.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Summary,
    Trajectory,
}

/// Rows as written in the file; the lattice decides which shape is legal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RowsSpec {
    Ice([[f64; 3]; 2]),
    Graphite([[[f64; 3]; 2]; 2]),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub trajectory: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: LatticeKind,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub h: f64,
    pub p: f64,
    #[serde(default = "half")]
    pub alpha: f64,
    /// Uniform rows when absent.
    #[serde(default)]
    pub horizontal: Option<RowsSpec>,
    #[serde(default)]
    pub steps: Option<u64>,
    #[serde(default)]
    pub replicates: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub output: OutputPaths,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.table()?;
        Ok(cfg)
    }

    /// A file path, or `builtin:NAME`.
    pub fn load(source: &str) -> Result<Self, ConfigError> {
        if let Some(name) = source.strip_prefix("builtin:") {
            return builtin(name);
        }
        let path = Path::new(source);
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.to_path_buf(), source: e })?;
        Self::from_json(&text)
    }

    /// Validated transition table.
    pub fn table(&self) -> Result<TransitionTable, ConfigError> {
        let geometry = GeometryParams::new(self.a, self.h).map_err(|e| {
            let key = if !(self.a > 0.0 && self.a.is_finite()) { "a" } else { "h" };
            ConfigError::invalid(key, e)
        })?;
        let mut table = TransitionTable::symmetric(self.lattice, geometry, self.p, self.alpha);
        match (&self.horizontal, self.lattice) {
            (None, _) => {}
            (Some(RowsSpec::Ice(rows)), LatticeKind::Ice1h) => table.horizontal = HorizontalRows::Ice(*rows),
            (Some(RowsSpec::Graphite(rows)), LatticeKind::Graphite2h) => {
                table.horizontal = HorizontalRows::Graphite(*rows)
            }
            (Some(_), LatticeKind::Ice1h) => {
                return Err(ConfigError::invalid("horizontal", "ice expects 2 rows of 3 probabilities"))
            }
            (Some(_), LatticeKind::Graphite2h) => {
                return Err(ConfigError::invalid("horizontal", "graphite expects 2×2 rows of 3 probabilities"))
            }
        }
        table.validate().map_err(|e| {
            let key = match &e {
                crystalwalk::KernelError::Range { what, .. } if what == "p" || what == "alpha" => what.clone(),
                _ => "horizontal".to_string(),
            };
            ConfigError::invalid(&key, e)
        })?;
        Ok(table)
    }
}

/// Flag, then config, then [`SEED_ENV`], then [`DEFAULT_SEED`].
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>, env: Option<&str>) -> Result<u64, ConfigError> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| ConfigError::invalid(SEED_ENV, format!("`{v}` is not an unsigned integer"))),
        None => Ok(DEFAULT_SEED),
    }
}

pub const BUILTINS: [&str; 4] = ["symmetric-ice", "symmetric-graphite", "zigzag", "vertical-ice"];

/// Reference configurations. The symmetric ones use a = h = 1, p = 1/5,
/// α = 1/2 and uniform rows.
pub fn builtin(name: &str) -> Result<RunConfig, ConfigError> {
    let base = |lattice, a, p, horizontal| RunConfig {
        lattice,
        a,
        h: 1.0,
        p,
        alpha: 0.5,
        horizontal,
        steps: None,
        replicates: None,
        seed: None,
        mode: Mode::Summary,
        output: OutputPaths::default(),
    };
    Ok(match name {
        "symmetric-ice" => base(LatticeKind::Ice1h, 1.0, 0.2, None),
        "symmetric-graphite" => base(LatticeKind::Graphite2h, 1.0, 0.2, None),
        // Always H0: the walk alternates between two points.
        "zigzag" => base(LatticeKind::Ice1h, 1.5, 0.0, Some(RowsSpec::Ice([[1.0, 0.0, 0.0]; 2]))),
        "vertical-ice" => base(LatticeKind::Ice1h, 1.0, 1.0, None),
        _ => return Err(ConfigError::UnknownBuiltin(name.to_string())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_defaults() {
        let c = RunConfig::from_json(r#"{"lattice": "graphite", "p": 0.2}"#).unwrap();
        assert_eq!(c.lattice, LatticeKind::Graphite2h);
        assert_eq!((c.a, c.h, c.alpha), (1.0, 1.0, 0.5));
        assert_eq!(c.table().unwrap(), TransitionTable::symmetric(LatticeKind::Graphite2h, GeometryParams::unit(), 0.2, 0.5));
    }

    #[test]
    fn unknown_key_rejected() {
        let e = RunConfig::from_json(r#"{"lattice": "ice", "p": 0.2, "beta": 1}"#).unwrap_err();
        assert!(e.to_string().contains("unknown field `beta`"), "{e}");
        let e = RunConfig::from_json(r#"{"lattice": "ice", "p": 0.2, "output": {"plot": "x"}}"#).unwrap_err();
        assert!(e.to_string().contains("plot"), "{e}");
    }

    #[test]
    fn bad_row_names_residual() {
        let e = RunConfig::from_json(
            r#"{"lattice": "ice", "p": 0.2, "horizontal": [[0.3, 0.3, 0.3], [0.2, 0.3, 0.3]]}"#,
        )
        .unwrap_err();
        let msg = e.to_string();
        assert!(msg.starts_with("horizontal: row 0"), "{msg}");
        assert!(msg.contains("residual"), "{msg}");
    }

    #[test]
    fn wrong_row_shape() {
        let e = RunConfig::from_json(r#"{"lattice": "graphite", "p": 0.2, "horizontal": [[0.8, 0, 0], [0.8, 0, 0]]}"#)
            .unwrap_err();
        assert!(e.to_string().starts_with("horizontal: graphite"), "{e}");
    }

    #[test]
    fn range_errors_name_key() {
        let e = RunConfig::from_json(r#"{"lattice": "ice", "p": 1.5}"#).unwrap_err();
        assert!(e.to_string().starts_with("p:"), "{e}");
        let e = RunConfig::from_json(r#"{"lattice": "ice", "p": 0.2, "alpha": 1}"#).unwrap_err();
        assert!(e.to_string().starts_with("alpha:"), "{e}");
        let e = RunConfig::from_json(r#"{"lattice": "ice", "p": 0.2, "h": -1}"#).unwrap_err();
        assert!(e.to_string().starts_with("h:"), "{e}");
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(3), Some(4), Some("5")).unwrap(), 3);
        assert_eq!(resolve_seed(None, Some(4), Some("5")).unwrap(), 4);
        assert_eq!(resolve_seed(None, None, Some(" 5 ")).unwrap(), 5);
        assert_eq!(resolve_seed(None, None, None).unwrap(), DEFAULT_SEED);
        assert!(resolve_seed(None, None, Some("x")).is_err());
    }

    #[test]
    fn builtins_validate() {
        for name in BUILTINS {
            builtin(name).unwrap().table().unwrap();
        }
        assert!(RunConfig::load("builtin:nope").is_err());
    }

    #[test]
    fn round_trip() {
        let c = builtin("zigzag").unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
    }
}
