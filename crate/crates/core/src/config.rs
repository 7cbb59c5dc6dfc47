//! Run configuration. The on-disk format is TOML restricted to flat
//! `key = value` pairs under fixed section headers; see `docs/config.md`.

use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dims: usize,
    pub half_extent: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub id: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct HypothesesConfig {
    pub c1: Option<f64>,
    pub eig_tol: f64,
    pub form_samples: usize,
    pub form_cap: f64,
}

impl Default for HypothesesConfig {
    fn default() -> Self {
        Self {
            c1: None,
            eig_tol: 1e-9,
            form_samples: 100,
            form_cap: 100.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct NormsConfig {
    pub delta: f64,
}

impl Default for NormsConfig {
    fn default() -> Self {
        Self { delta: 0.05 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub lambda_start: f64,
    pub lambda_stop: f64,
    pub lambda_count: usize,
    pub mu_start: f64,
    pub mu_count: usize,
    pub floor_multiplier: f64,
    pub sigmas: Vec<f64>,
    pub offsets: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambda_start: 0.0,
            lambda_stop: 2.0,
            lambda_count: 21,
            mu_start: 1.0,
            mu_count: 16,
            floor_multiplier: 3.0,
            sigmas: vec![1.0, 2.0],
            offsets: vec![0.0, 5.0],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TraceConfig {
    pub lambda: f64,
    pub mu: f64,
    pub eps_count: usize,
    /// Explicit schedule; overrides eps_count when nonempty.
    pub schedule: Vec<f64>,
    pub quadrature_nodes: usize,
    pub resolvent_bound_samples: usize,
    pub window_count: usize,
    pub window_samples: usize,
    pub identity_samples: usize,
    pub sigma: f64,
    pub offset: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu: 0.5,
            eps_count: 12,
            schedule: Vec::new(),
            quadrature_nodes: 16,
            resolvent_bound_samples: 6,
            window_count: 8,
            window_samples: 4,
            identity_samples: 20,
            sigma: 1.0,
            offset: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothConfig {
    /// `lmax`, `one`, `zero`, or `scaled_lmax:<factor>`.
    pub weight: String,
    pub lanczos_steps: usize,
    pub samples: usize,
    pub domination_cap: f64,
}

impl Default for SmoothConfig {
    fn default() -> Self {
        Self {
            weight: "lmax".into(),
            lanczos_steps: 40,
            samples: 1,
            domination_cap: 10.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub threads: Option<usize>,
    pub output_dir: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 7,
            threads: None,
            output_dir: "laplab-out".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub potential: PotentialConfig,
    #[serde(default)]
    pub hypotheses: HypothesesConfig,
    #[serde(default)]
    pub norms: NormsConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default)]
    pub smooth: SmoothConfig,
    #[serde(default)]
    pub run: RunSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical text: every field spelled out, fixed order.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of SHA-256 over the canonical text.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn minimal(dims: usize, half_extent: f64, points: usize, potential: &str) -> Self {
        Self {
            grid: GridConfig { dims, half_extent, points },
            potential: PotentialConfig { id: potential.into() },
            hypotheses: HypothesesConfig::default(),
            norms: NormsConfig::default(),
            sweep: SweepConfig::default(),
            trace: TraceConfig::default(),
            smooth: SmoothConfig::default(),
            run: RunSection::default(),
        }
    }
}
