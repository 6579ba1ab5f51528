//! Experiment configuration files.
//!
//! A config is TOML with an optional top-level `preset` naming one of the
//! built-in hyperparameter tables; every key left out takes the preset's
//! value. Unknown keys are rejected.
//!
//! ```toml
//! preset = "compass"
//! seeds = [0, 1, 2]
//!
//! [train]
//! num_options = 1   # ExIt
//!
//! [run]
//! total_steps = 50000
//! ```

use std::path::PathBuf;

use optit_core::envs::{default_wall_penalty, Compass, HierElectricProcMaze, ProcMaze, WallMode};
use optit_core::learn::{LossVariant, TrainConfig};
use optit_core::nn::AdamWConfig;
use optit_core::search::SearchConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Compass,
    Procmaze,
    ElectricProcmaze,
    HierElectricProcmaze,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvBlock {
    pub kind: EnvKind,
    /// Grid width (base maze width for the hierarchical env).
    pub width: usize,
    /// Episode timeout in environment steps.
    pub timeout: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller_width: Option<usize>,
    /// Overrides the frozen default wall penalty of electric mazes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_penalty: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchBlock {
    pub simulation_budget: usize,
    pub rollout_length: usize,
    pub beta: f64,
    pub variance_decay: f64,
    pub discount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainBlock {
    pub num_options: usize,
    pub segment_length: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub grad_updates_per_env_step: f64,
    pub workers: usize,
    pub training_start: u64,
    /// One of `optit`, `exit_sampled_seq`, `exit_sampled_indep`,
    /// `exit_exact_indep`, `mean_ce`.
    pub loss: String,
    pub step_size: f64,
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub policy_output_scale: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub window_episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    /// Aggregate environment steps per seed.
    pub total_steps: u64,
    /// Steps between metrics rows.
    pub metrics_interval: u64,
    /// Steps between intermediate checkpoints; 0 writes only the final one.
    pub checkpoint_interval: u64,
    /// Write executed (observation, action) trajectories.
    pub dump_trajectories: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub step_sizes: Vec<f64>,
    pub betas: Vec<f64>,
    /// Trailing fraction of training whose mean return ranks the cells.
    pub select_last_fraction: f64,
}

impl Default for SweepBlock {
    fn default() -> Self {
        SweepBlock { step_sizes: vec![6.25e-5, 1.25e-4, 2.5e-4, 5e-4, 1e-3], betas: vec![0.01, 0.1, 1.0], select_last_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: String,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub env: EnvBlock,
    pub search: SearchBlock,
    pub train: TrainBlock,
    pub run: RunBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
}

pub const PRESETS: [&str; 3] = ["electric_procmaze7", "compass", "hier_electric_procmaze5"];

/// Built-in hyperparameter tables.
pub fn preset(name: &str) -> Result<ExperimentConfig, ConfigError> {
    let base = ExperimentConfig {
        preset: name.into(),
        seeds: (0..5).collect(),
        output_dir: PathBuf::from("runs").join(name),
        env: EnvBlock { kind: EnvKind::ElectricProcmaze, width: 7, timeout: 120, controller_width: None, wall_penalty: None },
        search: SearchBlock { simulation_budget: 1000, rollout_length: 5, beta: 0.1, variance_decay: 0.99, discount: 0.99 },
        train: TrainBlock {
            num_options: 5,
            segment_length: 5,
            batch_size: 250,
            buffer_capacity: 100_000,
            grad_updates_per_env_step: 16.0,
            workers: 16,
            training_start: 100,
            loss: "optit".into(),
            step_size: 1.25e-4,
            hidden_layers: 3,
            hidden_units: 400,
            policy_output_scale: 0.1,
            adam_beta1: 0.9,
            adam_beta2: 0.99,
            adam_eps: 1e-5,
            weight_decay: 1e-6,
            window_episodes: 100,
        },
        run: RunBlock { total_steps: 500_000, metrics_interval: 5_000, checkpoint_interval: 0, dump_trajectories: false },
        sweep: None,
    };
    match name {
        "electric_procmaze7" => Ok(base),
        "compass" => Ok(ExperimentConfig {
            env: EnvBlock { kind: EnvKind::Compass, width: 15, timeout: 20, controller_width: None, wall_penalty: None },
            search: SearchBlock { simulation_budget: 50, rollout_length: 20, beta: 0.01, ..base.search },
            train: TrainBlock { num_options: 4, segment_length: 20, ..base.train },
            ..base
        }),
        "hier_electric_procmaze5" => Ok(ExperimentConfig {
            env: EnvBlock { kind: EnvKind::HierElectricProcmaze, width: 5, timeout: 960, controller_width: Some(8), wall_penalty: None },
            search: SearchBlock { rollout_length: 8, beta: 0.01, ..base.search },
            train: TrainBlock { segment_length: 8, hidden_units: 800, ..base.train },
            ..base
        }),
        _ => Err(ConfigError::UnknownPreset(name.into())),
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl ExperimentConfig {
    /// Parses config text over its preset (`electric_procmaze7` if unnamed).
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let over: toml::Table = toml::from_str(text)?;
        let name = match over.get("preset") {
            Some(toml::Value::String(s)) => s.clone(),
            Some(_) => return Err(ConfigError::Invalid("preset must be a string".into())),
            None => PRESETS[0].into(),
        };
        let mut base = toml::Table::try_from(preset(&name)?)?;
        merge(&mut base, over);
        let cfg: ExperimentConfig = base.try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    pub fn loss_variant(&self) -> Result<LossVariant, ConfigError> {
        LossVariant::from_name(&self.train.loss).ok_or_else(|| ConfigError::Invalid(format!("unknown loss {:?}", self.train.loss)))
    }

    pub fn search_config(&self) -> SearchConfig {
        let s = &self.search;
        SearchConfig {
            simulation_budget: s.simulation_budget,
            rollout_length: s.rollout_length,
            beta: s.beta,
            variance_decay: s.variance_decay,
            discount: s.discount,
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig, ConfigError> {
        let t = &self.train;
        Ok(TrainConfig {
            num_options: t.num_options,
            segment_length: t.segment_length,
            batch_size: t.batch_size,
            buffer_capacity: t.buffer_capacity,
            grad_updates_per_env_step: t.grad_updates_per_env_step,
            workers: t.workers,
            training_start: t.training_start,
            loss_variant: self.loss_variant()?,
            step_size: t.step_size,
            hidden_layers: t.hidden_layers,
            hidden_units: t.hidden_units,
            policy_output_scale: t.policy_output_scale,
            adam: AdamWConfig { beta1: t.adam_beta1, beta2: t.adam_beta2, eps: t.adam_eps, weight_decay: t.weight_decay },
            timeout: self.env.timeout,
            window_episodes: t.window_episodes,
        })
    }

    pub fn build_env(&self) -> Result<AnyEnv, ConfigError> {
        let e = &self.env;
        let bad = |err: optit_core::env::EnvError| ConfigError::Invalid(err.to_string());
        let gamma = self.search.discount;
        let electric = || -> Result<ProcMaze, ConfigError> {
            let penalty = match e.wall_penalty {
                Some(p) => p,
                None => default_wall_penalty(e.width)
                    .ok_or_else(|| ConfigError::Invalid(format!("no default wall penalty for width {}; set env.wall_penalty", e.width)))?,
            };
            Ok(ProcMaze::new(e.width, WallMode::Electric { penalty }).map_err(bad)?.with_discount(gamma))
        };
        Ok(match e.kind {
            EnvKind::Compass => AnyEnv::Compass(Compass::new(e.width).map_err(bad)?.with_discount(gamma)),
            EnvKind::Procmaze => AnyEnv::Maze(ProcMaze::new(e.width, WallMode::Blocking).map_err(bad)?.with_discount(gamma)),
            EnvKind::ElectricProcmaze => AnyEnv::Maze(electric()?),
            EnvKind::HierElectricProcmaze => {
                let cw = e.controller_width.ok_or_else(|| ConfigError::Invalid("hierarchical env needs controller_width".into()))?;
                AnyEnv::Hier(HierElectricProcMaze::new(electric()?, cw).map_err(bad)?)
            }
        })
    }

    /// Rejects inconsistent settings before anything runs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |m: String| Err(ConfigError::Invalid(m));
        if self.seeds.is_empty() {
            return inv("seeds must not be empty".into());
        }
        if self.run.total_steps == 0 || self.run.metrics_interval == 0 {
            return inv("run.total_steps and run.metrics_interval must be positive".into());
        }
        let env = self.build_env()?;
        let train = self.train_config()?;
        train.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.search_config()
            .rollouts_per_pair(env.num_actions(), train.num_options)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(s) = &self.sweep {
            if s.step_sizes.is_empty() || s.betas.is_empty() {
                return inv("sweep grids must not be empty".into());
            }
            if !(s.select_last_fraction > 0.0 && s.select_last_fraction <= 1.0) {
                return inv("sweep.select_last_fraction must lie in (0, 1]".into());
            }
        }
        Ok(())
    }
}

/// The configured environment.
#[derive(Debug, Clone)]
pub enum AnyEnv {
    Compass(Compass),
    Maze(ProcMaze),
    Hier(HierElectricProcMaze),
}

impl AnyEnv {
    pub fn num_actions(&self) -> usize {
        use optit_core::Environment;
        match self {
            AnyEnv::Compass(e) => e.spec().num_actions,
            AnyEnv::Maze(e) => e.spec().num_actions,
            AnyEnv::Hier(e) => e.spec().num_actions,
        }
    }
}

/// Evaluates `$body` with `$e` bound to the concrete environment.
#[macro_export]
macro_rules! with_env {
    ($env:expr, $e:ident => $body:expr) => {
        match $env {
            $crate::config::AnyEnv::Compass($e) => $body,
            $crate::config::AnyEnv::Maze($e) => $body,
            $crate::config::AnyEnv::Hier($e) => $body,
        }
    };
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_the_hyperparameter_table() {
        let epm = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(epm, preset("electric_procmaze7").unwrap());
        assert_eq!((epm.search.simulation_budget, epm.search.rollout_length, epm.train.num_options), (1000, 5, 5));
        assert_eq!((epm.train.batch_size, epm.train.buffer_capacity, epm.train.training_start), (250, 100_000, 100));
        assert_eq!((epm.train.hidden_layers, epm.train.hidden_units, epm.train.workers), (3, 400, 16));
        assert_eq!((epm.train.step_size, epm.search.beta, epm.train.grad_updates_per_env_step), (1.25e-4, 0.1, 16.0));
        assert_eq!((epm.train.adam_beta1, epm.train.adam_beta2, epm.train.adam_eps, epm.train.weight_decay), (0.9, 0.99, 1e-5, 1e-6));
        assert_eq!((epm.search.variance_decay, epm.search.discount, epm.env.timeout), (0.99, 0.99, 120));

        let c = ExperimentConfig::from_toml("preset = \"compass\"").unwrap();
        assert_eq!((c.search.simulation_budget, c.search.rollout_length, c.train.num_options, c.search.beta), (50, 20, 4, 0.01));
        assert_eq!((c.env.width, c.env.timeout, c.train.segment_length, c.train.hidden_units), (15, 20, 20, 400));

        let h = ExperimentConfig::from_toml("preset = \"hier_electric_procmaze5\"").unwrap();
        assert_eq!((h.search.rollout_length, h.train.hidden_units, h.search.beta, h.env.width), (8, 800, 0.01, 5));
        assert_eq!(h.seeds, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn overrides_and_rejections() {
        let c = ExperimentConfig::from_toml("preset = \"compass\"\nseeds = [7]\n[train]\nnum_options = 1\n").unwrap();
        assert_eq!((c.train.num_options, c.seeds.clone(), c.train.batch_size), (1, vec![7], 250));
        assert!(ExperimentConfig::from_toml("[train]\nnum_optionz = 1").is_err());
        assert!(ExperimentConfig::from_toml("preset = \"nope\"").is_err());
        assert!(ExperimentConfig::from_toml("[train]\nloss = \"exit_exact_indep\"").is_err());
        assert!(ExperimentConfig::from_toml("[search]\nsimulation_budget = 10").is_err());
        assert!(ExperimentConfig::from_toml("[env]\nwidth = 13").is_err());
        assert!(ExperimentConfig::from_toml("[env]\nwidth = 13\nwall_penalty = 60.0").is_ok());
    }

    #[test]
    fn round_trip() {
        for name in PRESETS {
            let mut cfg = preset(name).unwrap();
            cfg.sweep = Some(SweepBlock::default());
            let text = cfg.to_toml().unwrap();
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
        }
    }
}
