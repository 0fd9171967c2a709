//! Run configuration: a strict JSON schema (unknown keys are rejected) with
//! defaults matching the desk-scale workbench setup.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::evolution::{ForcingSpec, Scheme};
use crate::grid::Grid;
use crate::zoo::ModelName;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: ModelName,
    /// Model parameters; `null` or absent selects the catalog defaults.
    #[serde(default)]
    pub params: Option<Value>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub h: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { n: 8, h: 1.0 / 9.0 }
    }
}

impl GridSection {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n, self.h)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Energy-ledger CSV path.
    #[serde(default)]
    pub energy_csv: Option<PathBuf>,
    /// Snapshot cadence in steps; 0 disables snapshots.
    #[serde(default)]
    pub snapshot_every: usize,
    /// Path prefix for snapshot files (`<prefix>_NNNNNN.txt` plus a JSON
    /// sidecar describing the layout).
    #[serde(default)]
    pub snapshot_prefix: Option<PathBuf>,
    /// Machine-readable run report path.
    #[serde(default)]
    pub report_json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSection {
    pub to: ModelName,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_horizon() -> f64 {
    1.0
}

fn default_scheme() -> Scheme {
    Scheme::Midpoint
}

fn default_rho() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub forcing: Option<ForcingSpec>,
    #[serde(default)]
    pub outputs: OutputSection,
    /// Exponential weight for the causality/norm diagnostics.
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Optional reduction edge for `derive`.
    #[serde(default)]
    pub edge: Option<EdgeSection>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("invalid configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.grid()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config("dt must be positive and finite".into()));
        }
        if !(self.horizon > self.dt) {
            return Err(Error::Config("T must exceed dt".into()));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Config("rho must be positive and finite".into()));
        }
        if let Some(f) = &self.forcing {
            let onset = f.onset();
            if !(0.0..self.horizon).contains(&onset) {
                return Err(Error::Config(format!(
                    "forcing onset {onset} must lie in [0, T)"
                )));
            }
        }
        if self.outputs.snapshot_every > 0 && self.outputs.snapshot_prefix.is_none() {
            return Err(Error::Config(
                "snapshot_every > 0 requires snapshot_prefix".into(),
            ));
        }
        Ok(())
    }

    /// Number of time steps covering `[0, T]`.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round().max(1.0) as usize
    }
}
