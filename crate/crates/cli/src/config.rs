use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use unfold_ipm::imaging::{DegradationConfig, MetricOptions};
use unfold_ipm::objective::DEFAULT_DELTA;
use unfold_ipm::prox::BoxBounds;
use unfold_ipm::solver::{
    log_grid, IpmSchedule, DEFAULT_ITERATIONS, DEFAULT_MU0, DEFAULT_MU_DECAY, DEFAULT_X0_MARGIN,
};
use unfold_ipm::training::TrainConfig;
use unfold_ipm::Problem;

/// Solver settings; `gamma0` left unset means `0.9 / L` for the problem at hand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub gamma0: Option<f64>,
    pub mu0: f64,
    pub mu_decay: f64,
    pub iterations: usize,
    pub x0_margin: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            gamma0: None,
            mu0: DEFAULT_MU0,
            mu_decay: DEFAULT_MU_DECAY,
            iterations: DEFAULT_ITERATIONS,
            x0_margin: DEFAULT_X0_MARGIN,
        }
    }
}

impl ScheduleConfig {
    pub fn resolve(&self, problem: &Problem, lambda: f64) -> IpmSchedule<f64> {
        let auto = IpmSchedule::heuristic(problem, lambda);
        IpmSchedule {
            gamma0: self.gamma0.unwrap_or(auto.gamma0),
            mu0: self.mu0,
            mu_decay: self.mu_decay,
            iterations: self.iterations,
            x0_margin: self.x0_margin,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub degradation: DegradationConfig,
    pub schedule: ScheduleConfig,
    pub train: TrainConfig,
    pub lambda: f64,
    pub lambda_grid: Vec<f64>,
    pub delta: f64,
    #[serde(rename = "box")]
    pub bounds: BoxBounds<f64>,
    pub border_exclude: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            degradation: DegradationConfig::default(),
            schedule: ScheduleConfig::default(),
            train: TrainConfig::default(),
            lambda: 2e-3,
            lambda_grid: log_grid(1e-4, 1e-1, 7),
            delta: DEFAULT_DELTA,
            bounds: BoxBounds::unit(),
            border_exclude: MetricOptions::default().border,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {} (JSON, keys as in RunConfig)", path.display()))
    }

    /// Propagates the single seed to every component that draws randomness.
    pub fn finalize(mut self) -> Self {
        self.degradation.seed = self.seed;
        self.train.seed = self.seed;
        self.train.eval_border = self.border_exclude;
        self
    }

    pub fn metric(&self) -> MetricOptions {
        MetricOptions {
            border: self.border_exclude,
        }
    }
}

pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>().with_context(|| format!("invalid lambda {s:?} in grid"))
        })
        .collect()
}
