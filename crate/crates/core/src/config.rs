//! Run configuration: one JSON document that fully describes a solve or a
//! batch.
//!
//! Absent keys take their default values. Loading merges the document over
//! [`RunConfig::default`] key by key, so a file may override a single nested
//! field. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::discretizer::DEFAULT_AUDIT_SUBSTEPS;
use crate::error::{Error, Result};
use crate::montecarlo::{BatchOptions, DispersionSpec};
use crate::scp::landing::LandingSetup;
use crate::scp::ScpSettings;

pub const SCHEMA_VERSION: u32 = 1;

/// The configuration shipped as `default.cfg`.
pub const DEFAULT_CFG: &str = include_str!("../../../default.cfg");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub batch_size: usize,
    pub workers: usize,
    pub audit_substeps: usize,
    /// `montecarlo` exits successfully only when at least this fraction of
    /// runs converges.
    pub converged_floor: f64,
    pub dump_trajectories: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            workers: 1,
            audit_substeps: DEFAULT_AUDIT_SUBSTEPS,
            converged_floor: 0.95,
            dump_trajectories: false,
        }
    }
}

impl McConfig {
    pub fn batch_options(&self) -> BatchOptions {
        BatchOptions {
            batch_size: self.batch_size,
            workers: self.workers,
            audit_substeps: self.audit_substeps,
            keep_trajectories: self.dump_trajectories,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub landing: LandingSetup<f64>,
    pub scp: ScpSettings,
    pub dispersion: DispersionSpec,
    pub montecarlo: McConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            landing: LandingSetup::nominal(),
            scp: ScpSettings::default(),
            dispersion: DispersionSpec::default(),
            montecarlo: McConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if !user.is_object() {
            return Err(Error::Parse("configuration must be a JSON object".into()));
        }
        let mut doc = serde_json::to_value(RunConfig::default()).map_err(|e| Error::Parse(e.to_string()))?;
        merge(&mut doc, user);
        let cfg: RunConfig = serde_json::from_value(doc).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json_string()?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        self.landing.validate()?;
        self.scp.validate()?;
        self.dispersion.validate()?;
        let mc = &self.montecarlo;
        if mc.batch_size == 0 {
            return Err(Error::validation("montecarlo.batch_size", "must be at least 1"));
        }
        if mc.workers == 0 {
            return Err(Error::validation("montecarlo.workers", "must be at least 1"));
        }
        if mc.audit_substeps == 0 {
            return Err(Error::validation("montecarlo.audit_substeps", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&mc.converged_floor) {
            return Err(Error::validation("montecarlo.converged_floor", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(e: Error) -> String {
        match e {
            Error::Validation { key, .. } => key,
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn shipped_default_matches_code_default() {
        let cfg = RunConfig::from_json_str(DEFAULT_CFG).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig::from_json_str(DEFAULT_CFG).unwrap();
        let again = RunConfig::from_json_str(&cfg.to_json_string().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn empty_object_is_all_defaults() {
        assert_eq!(RunConfig::from_json_str("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn nested_override_keeps_siblings() {
        let cfg = RunConfig::from_json_str(r#"{"landing": {"grid": {"N": 12}}}"#).unwrap();
        assert_eq!(cfg.landing.grid.n, 12);
        assert_eq!(cfg.landing.grid.steps, RunConfig::default().landing.grid.steps);
    }

    #[test]
    fn single_node_grid_rejected() {
        let e = RunConfig::from_json_str(r#"{"landing": {"grid": {"N": 1}}}"#).unwrap_err();
        assert_eq!(key_of(e), "grid.N");
    }

    #[test]
    fn thrust_bounds_ordered() {
        let e = RunConfig::from_json_str(r#"{"landing": {"vehicle": {"t_min": 6.0, "t_max": 5.0}}}"#).unwrap_err();
        assert_eq!(key_of(e), "vehicle.t_min");
    }

    #[test]
    fn unknown_key_is_a_parse_error() {
        let e = RunConfig::from_json_str(r#"{"scp": {"max_iter": 3}}"#).unwrap_err();
        assert!(matches!(e, Error::Parse(_)));
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(RunConfig::from_json_str("{"), Err(Error::Parse(_))));
        assert!(matches!(RunConfig::from_json_str("[1]"), Err(Error::Parse(_))));
    }

    #[test]
    fn wrong_schema_version() {
        let e = RunConfig::from_json_str(r#"{"schema_version": 7}"#).unwrap_err();
        assert_eq!(key_of(e), "schema_version");
    }

    #[test]
    fn floor_out_of_range() {
        let e = RunConfig::from_json_str(r#"{"montecarlo": {"converged_floor": 1.5}}"#).unwrap_err();
        assert_eq!(key_of(e), "montecarlo.converged_floor");
    }

    #[test]
    fn save_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        let mut cfg = RunConfig::default();
        cfg.montecarlo.batch_size = 4;
        cfg.save(&p).unwrap();
        assert_eq!(RunConfig::load(&p).unwrap(), cfg);
    }

    #[test]
    fn missing_file_is_io() {
        assert!(matches!(RunConfig::load("/nonexistent/x.json"), Err(Error::Io(_))));
    }
}
