//! Offline analyses behind `optit analyze`.

use optit_core::analysis::{
    direct_path, directional_structure, greedy_enters_wall, option_diversity, option_grids, posterior_ce_demo,
    solve_random_policy_q, value_iteration, BellmanError, CompassView, ControllerView, DiversityConfig, DiversityReport, MazeView,
    OptionGrids, TabularMdp,
};
use optit_core::envs::{generate_maze, ProcMaze};
use optit_core::nn::{AdamW, AdamWConfig, HeadLayout, Init, MlpConfig, NnError, PolicyNet};
use optit_core::termination::{network_log_likelihood, psi_of, termination_loss, TerminationError, Trajectory};
use optit_core::{Environment, Executor, StreamKey};
use serde::Serialize;
use serde_json::json;

use crate::checkpoint::Checkpoint;
use crate::config::{AnyEnv, ConfigError};
use crate::trajectory::TrajectoryRecord;

#[derive(Debug, thiserror::Error)]
pub enum AnalyzeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Bellman(#[from] BellmanError),
    #[error(transparent)]
    Termination(#[from] TerminationError),
    #[error(transparent)]
    Env(#[from] optit_core::env::EnvError),
    #[error("{0}")]
    Unsupported(String),
}

/// Per-cell modal actions of a checkpoint's options. Mazes and the
/// controller grid need a fixed instance, drawn from `instance_seed`.
pub fn checkpoint_grids(ck: &Checkpoint, instance_seed: u64) -> Result<OptionGrids, AnalyzeError> {
    let mut rng = StreamKey::root(instance_seed).rng();
    Ok(match ck.config.build_env()? {
        AnyEnv::Compass(env) => option_grids(&ck.policy, &CompassView { env })?,
        AnyEnv::Maze(env) => {
            let state = generate_maze(env.width(), &mut rng)?;
            option_grids(&ck.policy, &MazeView { env, state })?
        }
        AnyEnv::Hier(env) => {
            let state = env.reset(&mut rng);
            option_grids(&ck.policy, &ControllerView { env, state })?
        }
    })
}

pub fn grids_json(g: &OptionGrids) -> serde_json::Value {
    let dominant: Vec<_> = directional_structure(g)
        .into_iter()
        .map(|(a, share)| json!({ "action": optit_core::action::NAMES[a], "share": share }))
        .collect();
    json!({ "width": g.width, "options": g.options.len(), "dominant": dominant })
}

pub fn diversity(ck: &Checkpoint, config: &DiversityConfig, seed: u64, exec: &impl Executor) -> Result<DiversityReport, AnalyzeError> {
    match ck.config.build_env()? {
        AnyEnv::Hier(env) => Ok(option_diversity(&env, &ck.policy, config, StreamKey::root(seed), exec)?),
        _ => Err(AnalyzeError::Unsupported("option diversity needs a hierarchical checkpoint".into())),
    }
}

pub fn diversity_json(r: &DiversityReport) -> serde_json::Value {
    json!({
        "num_options": r.num_options,
        "n_states": r.n_states,
        "option_freqs": r.option_freqs,
        "overall_freqs": r.overall_freqs,
        "entropy": r.entropy,
        "conditional_entropies": r.conditional_entropies,
        "mi_marginal": r.mi_marginal,
        "mi_marginal_ci95": r.mi_marginal_ci95,
        "mi_state": r.mi_state,
        "mi_state_ci95": r.mi_state_ci95,
        "coverage": r.coverage,
        "discarded": r.discarded,
        "bounds_hold": r.bounds_hold(1e-9),
    })
}

pub fn ce_demo_json(k: usize, width: usize, max_depth: usize) -> serde_json::Value {
    let r = posterior_ce_demo(k, width);
    let paths: Vec<_> = (1..=max_depth)
        .map(|d| {
            let p = direct_path(d);
            json!({ "depth": d, "single_policy": p.single_policy, "matching_option": p.matching_option, "mixture": p.mixture,
                    "option_ratio": p.option_ratio(), "mixture_ratio": p.mixture_ratio() })
        })
        .collect();
    json!({ "states": r.states, "single_policy_ce": r.single_policy_ce, "mixture_ce": r.mixture_ce, "ratio": r.ratio, "direct_paths": paths })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BellmanRow {
    pub instance: usize,
    pub agent: usize,
    pub goal: usize,
    pub random_greedy_enters_wall: bool,
    pub optimal_enters_wall: bool,
    pub random_residual: f64,
    pub optimal_residual: f64,
}

/// Greedy-of-random against optimal policies on generated electric mazes.
pub fn bellman_report(width: usize, instances: usize, discount: f64, seed: u64) -> Result<Vec<BellmanRow>, AnalyzeError> {
    let env = ProcMaze::electric(width)?;
    let key = StreamKey::root(seed);
    (0..instances)
        .map(|i| {
            let s = generate_maze(width, &mut key.child(i as u64).rng())?;
            let mdp = TabularMdp::from_maze(&env, &s, discount)?;
            let q = solve_random_policy_q(&mdp)?;
            let opt = value_iteration(&mdp, 1e-12, 1_000_000)?;
            Ok(BellmanRow {
                instance: i,
                agent: s.agent,
                goal: s.goal,
                random_greedy_enters_wall: greedy_enters_wall(&mdp, &q, &s),
                optimal_enters_wall: greedy_enters_wall(&mdp, &opt, &s),
                random_residual: q.random_policy_residual(&mdp),
                optimal_residual: opt.optimality_residual(&mdp),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentConfig {
    pub num_options: usize,
    pub num_actions: usize,
    /// Steps per training window cut from each episode.
    pub window: usize,
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub updates: usize,
    pub batch: usize,
    pub step_size: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentReport {
    pub windows: usize,
    pub initial_nll_per_step: f64,
    pub final_nll_per_step: f64,
    pub mean_termination: f64,
}

/// Cuts episodes into windows of at most `window` steps.
pub fn windows_of(records: &[TrajectoryRecord], window: usize) -> Result<Vec<Trajectory<f64>>, AnalyzeError> {
    let mut out = Vec::new();
    for r in records {
        let len = r.observations.len();
        let mut start = 0;
        while start + 1 < len {
            let end = (start + window).min(len - 1);
            let inputs: Vec<f64> = r.observations[start..=end].iter().flatten().map(|&b| b as f64).collect();
            let actions: Vec<usize> = r.actions[start..end].iter().map(|&a| a as usize).collect();
            let dim = r.observations[start].len();
            out.push(Trajectory::new(dim, inputs, actions)?);
            start = end;
        }
    }
    Ok(out)
}

/// Fits options with learned termination to dumped trajectories.
pub fn fit_segmentation(records: &[TrajectoryRecord], c: &SegmentConfig) -> Result<SegmentReport, AnalyzeError> {
    let data = windows_of(records, c.window)?;
    if data.is_empty() {
        return Err(AnalyzeError::Unsupported("no trajectory has two or more steps".into()));
    }
    let dim = data[0].dim;
    let mut rng = StreamKey::root(c.seed).rng();
    let mut policy = PolicyNet::new(
        MlpConfig::new(dim, c.hidden_layers, c.hidden_units)?,
        HeadLayout::new(c.num_options, c.num_actions, true)?,
        Init::RandomOutput(0.1),
        &mut rng,
    );
    let steps: usize = data.iter().map(|t| t.steps()).sum();
    let nll = |p: &PolicyNet<f64>| -> Result<f64, AnalyzeError> {
        let mut s = 0.0;
        for t in &data {
            s -= network_log_likelihood(p, t)?;
        }
        Ok(s / steps as f64)
    };
    let initial = nll(&policy)?;
    let mut opt = AdamW::new(&policy.mlp, AdamWConfig::default());
    use rand::Rng as _;
    for _ in 0..c.updates {
        let batch: Vec<Trajectory<f64>> = (0..c.batch).map(|_| data[rng.random_range(0..data.len())].clone()).collect();
        let l = termination_loss(&policy, &batch)?;
        opt.step(&mut policy.mlp, &l.grads, c.step_size);
    }
    let mut psi_sum = 0.0;
    let mut psi_n = 0usize;
    for t in &data {
        for k in 1..=t.steps() {
            let p = psi_of(&policy, &t.inputs[k * dim..(k + 1) * dim])?;
            psi_sum += p.iter().sum::<f64>();
            psi_n += p.len();
        }
    }
    Ok(SegmentReport { windows: data.len(), initial_nll_per_step: initial, final_nll_per_step: nll(&policy)?, mean_termination: psi_sum / psi_n as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bellman_report_rows() {
        let rows = bellman_report(5, 4, 1.0, 0).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| !r.optimal_enters_wall && r.random_residual < 1e-8 && r.optimal_residual < 1e-8));
    }

    #[test]
    fn ce_demo_values() {
        let v = ce_demo_json(20, 15, 3);
        let l4 = 4f64.ln();
        assert!((v["single_policy_ce"].as_f64().unwrap() - 20.0 * l4).abs() < 1e-12);
        assert!((v["mixture_ce"].as_f64().unwrap() - l4).abs() < 1e-12);
        assert_eq!(v["direct_paths"][2]["option_ratio"].as_f64().unwrap(), 64.0);
    }

    #[test]
    fn segmentation_windows_and_fit() {
        // alternate between two actions in blocks; observations are a counter
        let rec = |seed: u32| TrajectoryRecord {
            observations: (0..13).map(|k| (0..4).map(|b| ((k + seed) >> b & 1) as u8).collect()).collect(),
            actions: (0..13).map(|k| if (k / 4) % 2 == 0 { 0 } else { 3 }).collect(),
        };
        let recs = vec![rec(0), rec(1)];
        let w = windows_of(&recs, 5).unwrap();
        // 12 steps per episode cut as 5 + 5 + 2
        assert_eq!(w.iter().map(|t| t.steps()).collect::<Vec<_>>(), vec![5, 5, 2, 5, 5, 2]);
        let c = SegmentConfig { num_options: 2, num_actions: 4, window: 5, hidden_layers: 1, hidden_units: 8, updates: 60, batch: 4, step_size: 1e-2, seed: 1 };
        let r = fit_segmentation(&recs, &c).unwrap();
        assert!(r.final_nll_per_step < r.initial_nll_per_step);
        assert!(r.mean_termination > 0.0 && r.mean_termination < 1.0);
    }
}
