//! Experiment configuration: parsing, group resolution and hashing.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use quasirigid::kleinian::GroupSpec;
use quasirigid::qc::DiffeoField;
use quasirigid::scattering::experiment::SweepFamily;
use quasirigid::scattering::{ProbeQuadrature, Truncation};

/// A group given inline or as a path relative to the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupSource {
    Path(PathBuf),
    Inline(GroupSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitSection {
    /// Word length of the fixed-point sample.
    pub word_len: usize,
    /// Largest radius of the orbital-counting fit.
    pub r_max: f64,
    /// Word length of the orbit enumeration.
    pub orbit_max_len: usize,
}

impl Default for LimitSection {
    fn default() -> Self {
        Self { word_len: 8, r_max: 12.0, orbit_max_len: 11 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    /// Point pairs `[[x_re, x_im], [y_re, y_im]]`.
    #[serde(default)]
    pub pairs: Vec<[[f64; 2]; 2]>,
    /// Also assemble and export the operator matrix on the grid.
    #[serde(default)]
    pub matrix: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub family: SweepFamily,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FsigmaSection {
    pub sigma: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub samples: usize,
}

impl Default for FsigmaSection {
    fn default() -> Self {
        Self { sigma: 1.0, lambda_min: 1.0, lambda_max: 8.0, samples: 64 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub k: f64,
    pub d: f64,
    pub sigma: f64,
    #[serde(default)]
    pub epsilons: Vec<f64>,
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self { k: 2.0, d: 1.0, sigma: 1.0, epsilons: Vec::new() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub sigma: f64,
    pub a: f64,
    #[serde(default)]
    pub quadrature: ProbeQuadrature,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self { sigma: 1.0, a: 0.4, quadrature: ProbeQuadrature::default() }
    }
}

fn default_s() -> [f64; 2] {
    [quasirigid::scattering::DEFAULT_S, 0.0]
}

fn default_grid_n() -> usize {
    quasirigid::scattering::experiment::DEFAULT_GRID_N
}

fn default_max_len() -> usize {
    Truncation::default().max_len
}

fn default_prune_tol() -> f64 {
    Truncation::DEFAULT_PRUNE_TOL
}

fn default_dilatation_grid() -> usize {
    quasirigid::qc::DEFAULT_GRID
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub group: Option<GroupSource>,
    #[serde(default)]
    pub diffeo: Option<DiffeoField>,
    /// Spectral parameter `[re, im]`.
    #[serde(default = "default_s")]
    pub s: [f64; 2],
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    #[serde(default = "default_prune_tol")]
    pub prune_tol: f64,
    /// Nodes per side of the dilatation sample grid.
    #[serde(default = "default_dilatation_grid")]
    pub dilatation_grid: usize,
    /// Output directory, relative to the config file; `--out` overrides it.
    /// Not part of the config hash.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    /// Recorded for provenance; no command samples randomly.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub limit: LimitSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub fsigma: FsigmaSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub probe: ProbeSection,
}

impl ExperimentConfig {
    /// Reads the config and inlines a group given by path.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(GroupSource::Path(p)) = &cfg.group {
            let full = path.parent().unwrap_or(Path::new(".")).join(p);
            let text = std::fs::read_to_string(&full).with_context(|| format!("reading group {}", full.display()))?;
            let spec: GroupSpec =
                serde_json::from_str(&text).with_context(|| format!("parsing group {}", full.display()))?;
            cfg.group = Some(GroupSource::Inline(spec));
        }
        if let Some(out) = &cfg.out {
            cfg.out = Some(path.parent().unwrap_or(Path::new(".")).join(out));
        }
        if cfg.grid_n == 0 || cfg.dilatation_grid == 0 {
            bail!("grid sizes must be positive");
        }
        if cfg.prune_tol.is_nan() || cfg.prune_tol < 0.0 {
            bail!("prune_tol must be nonnegative");
        }
        Ok(cfg)
    }

    pub fn group_spec(&self) -> Result<&GroupSpec> {
        match &self.group {
            Some(GroupSource::Inline(g)) => Ok(g),
            Some(GroupSource::Path(_)) => bail!("group path was not resolved"),
            None => bail!("config has no group"),
        }
    }

    pub fn truncation(&self) -> Truncation {
        Truncation { max_len: self.max_len, prune_tol: self.prune_tol }
    }

    /// SHA-256 of the canonical (sorted-key, compact) JSON of the resolved
    /// config.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
