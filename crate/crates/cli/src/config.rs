use std::path::Path;

use anyhow::Context;
use holelab::process::{ProcessSpec, RawProcessSpec};
use serde::{Deserialize, Serialize};

/// Experiment file: a process spec plus the knobs of the subcommands.
/// Unknown keys are rejected.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec: Option<RawProcessSpec>,
    pub replicates: Option<usize>,
    pub delta: Option<f64>,
    pub k: Option<usize>,
    pub kappa: Option<f64>,
    pub epsilon_grid: Option<Vec<f64>>,
    pub grid_n: Option<usize>,
    pub quantity: Option<String>,
    /// Slope margin of the rate check.
    pub tolerance: Option<f64>,
    /// Overrides the predicted slope.
    pub theoretical: Option<f64>,
    pub trials: Option<usize>,
    pub functionals: Option<Vec<String>>,
    /// Spacing threshold of the `spaced_capacity` functional.
    pub spacing: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if let Some(g) = &self.epsilon_grid {
            if g.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
                anyhow::bail!("epsilon_grid entries must lie in (0, 1)");
            }
        }
        if self.replicates == Some(0) {
            anyhow::bail!("replicates must be positive");
        }
        if let Some(n) = self.grid_n {
            if n < 3 {
                anyhow::bail!("grid_n must be at least 3");
            }
        }
        if let Some(s) = &self.spec {
            ProcessSpec::try_from(s.clone())?;
        }
        Ok(())
    }

    /// The process spec with the seed override applied.
    pub fn process(&self, seed: Option<u64>) -> anyhow::Result<ProcessSpec> {
        let raw = self.spec.clone().context("config has no \"spec\" section")?;
        let mut spec = ProcessSpec::try_from(raw)?;
        if let Some(s) = seed {
            spec.master_seed = s;
        }
        Ok(spec)
    }
}
