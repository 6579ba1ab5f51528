//! Step-size x temperature grid sweeps.
//!
//! Each cell is an ordinary multi-seed run in `root/alpha_<a>_beta_<b>`;
//! cells share nothing and may run in parallel. Cells are ranked by the
//! seed-averaged mean windowed return over the trailing fraction of
//! training.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{ExperimentConfig, SweepBlock};
use crate::metrics::trailing_mean;
use crate::parallel::PoolExecutor;
use crate::runner::{run_experiment, RunError, RunOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub step_size: f64,
    pub beta: f64,
    pub dir: PathBuf,
    /// Trailing mean return per seed (NaN for failed seeds).
    pub seed_scores: Vec<f64>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    /// Index of the best cell, if any cell scored.
    pub best: Option<usize>,
}

pub fn cell_dir(root: &Path, step_size: f64, beta: f64) -> PathBuf {
    root.join(format!("alpha_{step_size:e}_beta_{beta:e}"))
}

pub fn cell_config(base: &ExperimentConfig, step_size: f64, beta: f64) -> ExperimentConfig {
    let mut c = base.clone();
    c.train.step_size = step_size;
    c.search.beta = beta;
    c.sweep = None;
    c
}

/// Highest finite score; ties keep the earlier cell.
pub fn select_best(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_finite() && best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Runs the grid (the config's sweep block, or the default grid) with up to
/// `cell_threads` cells at once, and writes `sweep.csv` and
/// `selected.toml` into `root`.
pub fn run_sweep(config: &ExperimentConfig, root: &Path, opts: &RunOptions, cell_threads: usize) -> Result<SweepReport, RunError> {
    config.validate()?;
    let grid = config.sweep.clone().unwrap_or_default();
    let SweepBlock { step_sizes, betas, select_last_fraction } = &grid;
    let pairs: Vec<(f64, f64)> = step_sizes.iter().flat_map(|&a| betas.iter().map(move |&b| (a, b))).collect();
    let pool = PoolExecutor::new(cell_threads).map_err(|e| RunError::Pool(e.to_string()))?;
    let total = config.run.total_steps;
    let cells: Vec<SweepCell> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(a, b)| {
                let dir = cell_dir(root, a, b);
                let outcomes = run_experiment(&cell_config(config, a, b), &dir, opts);
                let seed_scores: Vec<f64> = outcomes
                    .iter()
                    .map(|(_, r)| r.as_ref().map_or(f64::NAN, |o| trailing_mean(&o.rows, total, *select_last_fraction)))
                    .collect();
                let ok: Vec<f64> = seed_scores.iter().copied().filter(|s| s.is_finite()).collect();
                let score = if ok.is_empty() { f64::NAN } else { ok.iter().sum::<f64>() / ok.len() as f64 };
                SweepCell { step_size: a, beta: b, dir, seed_scores, score }
            })
            .collect()
    });
    let best = select_best(&cells.iter().map(|c| c.score).collect::<Vec<_>>());
    std::fs::create_dir_all(root)?;
    let mut w = csv::Writer::from_path(root.join("sweep.csv")).map_err(crate::metrics::MetricsError::from)?;
    w.write_record(["step_size", "beta", "score", "seeds_ok", "dir"]).map_err(crate::metrics::MetricsError::from)?;
    for c in &cells {
        let ok = c.seed_scores.iter().filter(|s| s.is_finite()).count();
        w.write_record([c.step_size.to_string(), c.beta.to_string(), c.score.to_string(), ok.to_string(), c.dir.display().to_string()])
            .map_err(crate::metrics::MetricsError::from)?;
    }
    w.flush()?;
    if let Some(b) = best {
        let sel = cell_config(config, cells[b].step_size, cells[b].beta);
        std::fs::write(root.join("selected.toml"), sel.to_toml()?)?;
    }
    Ok(SweepReport { cells, best })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection() {
        assert_eq!(select_best(&[0.1, f64::NAN, 0.3, 0.3, -1.0]), Some(2));
        assert_eq!(select_best(&[f64::NAN]), None);
        assert_eq!(select_best(&[]), None);
    }

    #[test]
    fn default_grid_is_the_published_one() {
        let g = SweepBlock::default();
        assert_eq!(g.step_sizes, vec![0.0000625, 0.000125, 0.00025, 0.0005, 0.001]);
        assert_eq!(g.betas, vec![0.01, 0.1, 1.0]);
        assert_eq!(g.select_last_fraction, 100_000.0 / 500_000.0);
    }
}
