//! Experiment configuration (one JSON file) and the model it describes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::{build_tree, teugels_basis, Atom, LevyMeasure, ScenarioTree, TeugelsBasis, TreeOptions, DEFAULT_RANK_TOL};
use crate::regulated::{make_barrier, Barrier, BarrierSpec};
use crate::solver::{DriverPair, DriverSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub levy: LevyConfig,
    pub grid: GridConfig,
    pub drivers: DriversConfig,
    pub barrier: BarrierSpec,
    pub penalty: PenaltyConfig,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub picard: PicardConfig,
}

fn default_beta() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyConfig {
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "N")]
    pub steps: usize,
    pub scenarios: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriversConfig {
    pub f: DriverSpec,
    pub g: DriverSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyConfig {
    Schedule(Vec<u64>),
    Geometric { start: u64, factor: u64, count: usize },
}

impl PenaltyConfig {
    pub fn levels(&self) -> Vec<u64> {
        match *self {
            PenaltyConfig::Schedule(ref v) => v.clone(),
            PenaltyConfig::Geometric { start, factor, count } => {
                let mut out = Vec::with_capacity(count);
                let mut n = start;
                for _ in 0..count {
                    out.push(n);
                    n = n.saturating_mul(factor);
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            formats: default_formats(),
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

/// Outer fixed-point loop settings; `n` defaults to the last penalty level.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardConfig {
    #[serde(default)]
    pub n: Option<u64>,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_iters() -> usize {
    20
}

fn default_tol() -> f64 {
    1e-8
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            n: None,
            max_iters: default_iters(),
            tol: default_tol(),
        }
    }
}

/// Everything a subcommand needs, built from a validated config.
#[derive(Debug, Clone)]
pub struct Model {
    pub measure: LevyMeasure,
    pub basis: TeugelsBasis,
    pub tree: ScenarioTree,
    pub drivers: DriverPair,
    pub barrier_spec: BarrierSpec,
    pub barrier: Barrier,
    pub schedule: Vec<u64>,
    pub beta: f64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Check every invariant and report the first offending field.
    pub fn validate(&self) -> Result<()> {
        let measure = LevyMeasure::new(self.levy.atoms.clone())
            .map_err(|e| Error::config("levy.atoms", e.to_string()))?;
        let g = &self.grid;
        if !(g.horizon > 0.0 && g.horizon.is_finite()) {
            return Err(Error::config("grid.T", "must be positive"));
        }
        if g.steps == 0 {
            return Err(Error::config("grid.N", "must be at least 1"));
        }
        if g.scenarios == 0 {
            return Err(Error::config("grid.scenarios", "must be at least 1"));
        }
        let ldt = measure.total_intensity() * g.horizon / g.steps as f64;
        if ldt >= 1.0 {
            return Err(Error::config(
                "grid.N",
                format!("λ·T/N = {ldt} must be below 1; increase N"),
            ));
        }
        match self.drivers.g.alpha {
            None => return Err(Error::config("drivers.g.alpha", "missing")),
            Some(a) if !(a > 0.0 && a < 0.5) => {
                return Err(Error::config("drivers.g.alpha", format!("{a} is not in (0, 1/2)")))
            }
            _ => {}
        }
        if self.drivers.f.lipschitz < 0.0 || !self.drivers.f.lipschitz.is_finite() {
            return Err(Error::config("drivers.f.L", "must be finite and nonnegative"));
        }
        if self.drivers.g.lipschitz < 0.0 || !self.drivers.g.lipschitz.is_finite() {
            return Err(Error::config("drivers.g.L", "must be finite and nonnegative"));
        }
        let dt = g.horizon / g.steps as f64;
        for (i, j) in self.barrier.right_jumps.iter().enumerate() {
            let k = j.t / dt;
            if !(j.t >= 0.0 && j.t < g.horizon) || (k - k.round()).abs() > 1e-9 {
                return Err(Error::config(
                    format!("barrier.right_jumps[{i}].t"),
                    format!("{} is not a grid time before T", j.t),
                ));
            }
        }
        let levels = self.penalty.levels();
        let field = match self.penalty {
            PenaltyConfig::Schedule(_) => "penalty.schedule",
            PenaltyConfig::Geometric { .. } => "penalty.geometric",
        };
        if levels.is_empty() {
            return Err(Error::config(field, "no penalty levels"));
        }
        if levels[0] == 0 || levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config(field, "levels must be positive and strictly increasing"));
        }
        if !(self.beta > 0.0) {
            return Err(Error::config("beta", "must be positive"));
        }
        if let Some(f) = self.output.formats.iter().find(|f| *f != "csv" && *f != "json") {
            return Err(Error::config("output.formats", format!("unknown format {f:?}")));
        }
        if self.picard.max_iters == 0 || !(self.picard.tol > 0.0) {
            return Err(Error::config("picard", "need max_iters ≥ 1 and tol > 0"));
        }
        Ok(())
    }

    /// Validate and build the model; `seed` overrides the grid seed.
    pub fn build(&self, seed: Option<u64>) -> Result<Model> {
        self.validate()?;
        let measure = LevyMeasure::new(self.levy.atoms.clone())?;
        let basis = teugels_basis(&measure, DEFAULT_RANK_TOL)?;
        let g = &self.grid;
        let opts = TreeOptions::new(g.horizon, g.steps, g.scenarios, seed.unwrap_or(g.seed));
        let tree = build_tree(&measure, &basis, opts)?;
        let drivers = DriverPair::new(self.drivers.f.clone(), self.drivers.g.clone()).map_err(|e| {
            let msg = e.to_string();
            let field = if msg.contains("f:") { "drivers.f.L" } else { "drivers.g" };
            Error::config(field, msg)
        })?;
        let barrier = make_barrier(&self.barrier, &tree).map_err(|e| Error::config("barrier", e.to_string()))?;
        Ok(Model {
            measure,
            basis,
            tree,
            drivers,
            barrier_spec: self.barrier.clone(),
            barrier,
            schedule: self.penalty.levels(),
            beta: self.beta,
        })
    }
}
