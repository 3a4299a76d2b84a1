//! The analysis configuration: every tolerance, schedule and seed in one
//! place. Files are TOML (or JSON); missing keys take their defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cones::ConeConfig;
use crate::error::{contract, Error, Result};
use crate::rng::derive_seed;
use crate::setmodel::SetOracle;

pub const SEED_ENV: &str = "CONEWRIGHT_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DensityConfig {
    /// Absolute radii; when absent the schedule is `r0 * ratio^j * scale`.
    pub radii: Option<Vec<f64>>,
    pub r0: f64,
    pub ratio: f64,
    pub count: usize,
    pub n_mc: usize,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self { radii: None, r0: 0.1, ratio: 0.5, count: 8, n_mc: crate::density::DEFAULT_N_MC }
    }
}

impl DensityConfig {
    pub fn schedule(&self, oracle: &SetOracle) -> Vec<f64> {
        match &self.radii {
            Some(r) => r.clone(),
            None => (0..self.count).map(|j| self.r0 * oracle.scale() * self.ratio.powi(j as i32)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Sphere distance within which a paratangent direction counts as tangent.
    pub coincide_tol: f64,
    /// Number of final tiers an excess direction must appear in when the
    /// paratangent estimate has not converged.
    pub excess_tiers: usize,
    /// Fraction of probes whose tangent estimates must converge.
    pub convergence_quorum: f64,
    /// Extra tiers tried at probes whose tangent estimate did not converge.
    pub refine_tiers: usize,
    /// Adjacency radius as a multiple of the median nearest-probe distance.
    pub eta_factor: f64,
    pub density_threshold: f64,
    /// Added to twice the standard error when comparing θ with the threshold.
    pub density_margin: f64,
    /// Largest `|π(p) - π(q)| / |p - q|` of a projection collision.
    pub collision_ratio: f64,
    /// Collision points must be this many sampling resolutions apart.
    pub separation_factor: f64,
    /// Positional accuracy of oracle samples, relative to the ball radius.
    pub sample_resolution: f64,
    /// Samples per radius of the injectivity check.
    pub injectivity_samples: usize,
    /// Initial collision candidates with a ratio above this are not refined.
    pub refine_below: f64,
    pub openness_samples: usize,
    /// Grid cell of the openness check, relative to the ball radius.
    pub openness_grid: f64,
    /// Probes per chart; the oracle's own default when absent.
    pub probes_per_chart: Option<usize>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            coincide_tol: 0.1,
            excess_tiers: 3,
            convergence_quorum: 0.9,
            refine_tiers: 4,
            eta_factor: 2.0,
            density_threshold: 1.5,
            density_margin: 0.05,
            collision_ratio: 1e-3,
            separation_factor: 10.0,
            sample_resolution: 1e-6,
            injectivity_samples: 1000,
            refine_below: 0.5,
            openness_samples: 4000,
            openness_grid: 0.05,
            probes_per_chart: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub seed: u64,
    /// Cone settings; `r0` is in units of the set's scale and `seed` is
    /// replaced by one derived from the top-level seed.
    pub cones: ConeConfig,
    pub density: DensityConfig,
    pub classifier: ClassifierConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            cones: ConeConfig::default(),
            density: DensityConfig::default(),
            classifier: ClassifierConfig::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Reads a TOML file, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
        } else {
            Self::from_toml(&text)
        }
    }

    /// Cone settings for `oracle`, scaled and seeded.
    pub fn cone_config(&self, oracle: &SetOracle) -> ConeConfig {
        ConeConfig { r0: self.cones.r0 * oracle.scale(), seed: derive_seed(self.seed, &[0x636f_6e65]), ..self.cones }
    }

    pub fn density_seed(&self) -> u64 {
        derive_seed(self.seed, &[0x6465_6e73])
    }

    pub fn validate(&self) -> Result<()> {
        self.cones.validate()?;
        let d = &self.density;
        if d.n_mc < 2 || d.radii.is_none() && (d.count < 4 || !(d.r0 > 0.0) || !(d.ratio > 0.0 && d.ratio < 1.0)) {
            return Err(contract(format!("invalid density configuration {d:?}")));
        }
        let c = &self.classifier;
        let ok = c.coincide_tol > 0.0
            && c.excess_tiers >= 1
            && c.excess_tiers <= self.cones.tiers
            && (0.0..=1.0).contains(&c.convergence_quorum)
            && c.eta_factor > 0.0
            && c.collision_ratio > 0.0
            && c.injectivity_samples >= 16
            && c.openness_samples >= 1
            && c.openness_grid > 0.0;
        if ok {
            Ok(())
        } else {
            Err(contract(format!("invalid classifier configuration {c:?}")))
        }
    }
}

/// The seed from the environment, if set and numeric.
pub fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| contract(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}
