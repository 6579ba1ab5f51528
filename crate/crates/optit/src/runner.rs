//! Training runs: one seed into one output directory.
//!
//! A seed directory holds `metrics.csv`, `checkpoint.bin` (plus
//! `checkpoint_<steps>.bin` at intermediate intervals), optionally
//! `trajectories.bin`, and `manifest.json`, which every other file names.
//!
//! Synchronous mode ticks all workers in lockstep and is bitwise
//! reproducible. Concurrent mode runs one thread per worker feeding a
//! learner through a bounded queue; workers pick up fresh parameter
//! snapshots at episode boundaries.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc, RwLock};
use std::time::Instant;

use optit_core::learn::{
    mean_sigma, Actor, Learner, MetricsRow, ReturnWindows, StepRecord, TrainConfig, TrainError, Trainer, UpdateCredit,
};
use optit_core::nn::{PolicyNet, ValueNet};
use optit_core::search::{RunningVariance, SearchConfig};
use optit_core::{Environment, Executor, Sequential, StreamKey};

use crate::checkpoint::{Checkpoint, CheckpointError, CheckpointMeta};
use crate::config::{ConfigError, ExperimentConfig};
use crate::manifest::{self, RunManifest};
use crate::metrics::{MetricsError, MetricsWriter};
use crate::parallel::PoolExecutor;
use crate::trajectory::{TrajectoryError, TrajectoryRecord, TrajectoryWriter};
use crate::with_env;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error("worker thread failed: {0}")]
    Worker(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub synchronous: bool,
    /// Search threads in synchronous mode (0 = one per core, 1 = inline).
    pub threads: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { synchronous: true, threads: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub dir: PathBuf,
    pub rows: Vec<MetricsRow>,
    pub total_env_steps: u64,
    pub updates: u64,
    pub episodes: u64,
    pub policy: PolicyNet<f32>,
    pub value: ValueNet<f32>,
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const TRAJECTORY_FILE: &str = "trajectories.bin";

pub fn seed_dir(root: &Path, seed: u64) -> PathBuf {
    root.join(format!("seed_{seed}"))
}

/// Output files shared by both modes.
struct Outputs {
    dir: PathBuf,
    metrics: MetricsWriter<std::fs::File>,
    trajectories: Option<(TrajectoryWriter<std::io::BufWriter<std::fs::File>>, Vec<TrajectoryRecord>)>,
    rows: Vec<MetricsRow>,
    files: Vec<String>,
    config: ExperimentConfig,
    seed: u64,
    next_checkpoint: u64,
}

impl Outputs {
    fn create(dir: &Path, config: &ExperimentConfig, seed: u64) -> Result<Self, RunError> {
        std::fs::create_dir_all(dir)?;
        let metrics = MetricsWriter::create(&dir.join(METRICS_FILE), manifest::FILE_NAME)?;
        let mut files = vec![METRICS_FILE.to_owned()];
        let trajectories = if config.run.dump_trajectories {
            files.push(TRAJECTORY_FILE.into());
            let f = std::io::BufWriter::new(std::fs::File::create(dir.join(TRAJECTORY_FILE))?);
            let empty = TrajectoryRecord { observations: Vec::new(), actions: Vec::new() };
            Some((TrajectoryWriter::new(f)?, vec![empty; config.train.workers]))
        } else {
            None
        };
        let interval = config.run.checkpoint_interval;
        Ok(Outputs {
            dir: dir.to_owned(),
            metrics,
            trajectories,
            rows: Vec::new(),
            files,
            config: config.clone(),
            seed,
            next_checkpoint: if interval == 0 { u64::MAX } else { interval },
        })
    }

    fn step(&mut self, rec: &StepRecord) -> Result<(), RunError> {
        if let Some((w, open)) = &mut self.trajectories {
            let t = &mut open[rec.worker];
            t.observations.push(rec.entry.observation.bits().to_vec());
            t.actions.push(rec.action as u32);
            if rec.finished.is_some() {
                w.write(t)?;
                t.observations.clear();
                t.actions.clear();
            }
        }
        Ok(())
    }

    fn row(&mut self, row: MetricsRow) -> Result<(), RunError> {
        self.metrics.write(&row)?;
        self.rows.push(row);
        Ok(())
    }

    fn checkpoint(&self, policy: &PolicyNet<f32>, value: &ValueNet<f32>, steps: u64, updates: u64, name: &str) -> Result<(), RunError> {
        let meta = CheckpointMeta {
            seed: self.seed,
            total_env_steps: steps,
            updates,
            num_options: policy.layout.num_options,
            num_actions: policy.layout.num_actions,
            termination: policy.layout.termination,
        };
        Checkpoint { config: self.config.clone(), meta, policy: policy.clone(), value: value.clone() }.save(&self.dir.join(name))?;
        Ok(())
    }

    fn maybe_checkpoint(&mut self, policy: &PolicyNet<f32>, value: &ValueNet<f32>, steps: u64, updates: u64) -> Result<(), RunError> {
        if steps >= self.next_checkpoint && steps < self.config.run.total_steps {
            let name = format!("checkpoint_{steps}.bin");
            self.checkpoint(policy, value, steps, updates, &name)?;
            self.files.push(name);
            while self.next_checkpoint <= steps {
                self.next_checkpoint += self.config.run.checkpoint_interval;
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        mut self,
        policy: PolicyNet<f32>,
        value: ValueNet<f32>,
        steps: u64,
        updates: u64,
        episodes: u64,
        opts: &RunOptions,
        started: (u64, Instant),
    ) -> Result<SeedOutcome, RunError> {
        self.checkpoint(&policy, &value, steps, updates, CHECKPOINT_FILE)?;
        self.files.push(CHECKPOINT_FILE.into());
        if let Some((w, _)) = self.trajectories.take() {
            w.into_inner()?;
        }
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            build: manifest::build_id(),
            seed: self.seed,
            mode: if opts.synchronous { "synchronous" } else { "concurrent" }.into(),
            threads: opts.threads,
            config: self.config.to_toml()?,
            started_unix: started.0,
            wall_clock_secs: started.1.elapsed().as_secs_f64(),
            total_env_steps: steps,
            updates,
            episodes,
            outputs: self.files.clone(),
        }
        .save(&self.dir)?;
        Ok(SeedOutcome { seed: self.seed, dir: self.dir, rows: self.rows, total_env_steps: steps, updates, episodes, policy, value })
    }
}

/// Trains one seed of `config` into `dir`.
pub fn run_seed(config: &ExperimentConfig, seed: u64, dir: &Path, opts: &RunOptions) -> Result<SeedOutcome, RunError> {
    config.validate()?;
    let search = config.search_config();
    let train = config.train_config()?;
    with_env!(config.build_env()?, env => {
        if opts.synchronous {
            if opts.threads == 1 {
                run_synchronous(env, search, train, config, seed, dir, opts, &Sequential)
            } else {
                let pool = PoolExecutor::new(opts.threads).map_err(|e| RunError::Pool(e.to_string()))?;
                run_synchronous(env, search, train, config, seed, dir, opts, &pool)
            }
        } else {
            run_concurrent(env, search, train, config, seed, dir, opts)
        }
    })
}

#[allow(clippy::too_many_arguments)]
fn run_synchronous<E: Environment, X: Executor>(
    env: E,
    search: SearchConfig,
    train: TrainConfig,
    config: &ExperimentConfig,
    seed: u64,
    dir: &Path,
    opts: &RunOptions,
    exec: &X,
) -> Result<SeedOutcome, RunError> {
    let started = (manifest::unix_now(), Instant::now());
    let mut out = Outputs::create(dir, config, seed)?;
    let mut t = Trainer::new(env, search, train, seed)?;
    let (total, interval) = (config.run.total_steps, config.run.metrics_interval);
    let mut next_row = interval;
    while t.total_env_steps() < total {
        for rec in t.tick(exec)? {
            out.step(&rec)?;
        }
        let steps = t.total_env_steps();
        if steps >= next_row || steps >= total {
            out.row(t.metrics())?;
            while next_row <= steps {
                next_row += interval;
            }
        }
        out.maybe_checkpoint(t.policy(), t.value(), steps, t.updates())?;
    }
    let (steps, updates, episodes) = (t.total_env_steps(), t.updates(), t.episodes_completed());
    out.finish(t.policy().clone(), t.value().clone(), steps, updates, episodes, opts, started)
}

struct Snapshot {
    policy: PolicyNet<f32>,
    value: ValueNet<f32>,
}

enum Msg {
    Step(Box<StepRecord>, RunningVariance),
    Failed(String),
}

fn run_concurrent<E: Environment + 'static>(
    env: E,
    search: SearchConfig,
    train: TrainConfig,
    config: &ExperimentConfig,
    seed: u64,
    dir: &Path,
    opts: &RunOptions,
) -> Result<SeedOutcome, RunError> {
    train.validate()?;
    search.rollouts_per_pair(env.spec().num_actions, train.num_options).map_err(TrainError::from)?;
    let started = (manifest::unix_now(), Instant::now());
    let mut out = Outputs::create(dir, config, seed)?;
    let key = StreamKey::root(seed);
    let mut learner = Learner::new(env.spec(), &train, key)?;
    let snapshot = Arc::new(RwLock::new(Arc::new(Snapshot { policy: learner.policy.clone(), value: learner.value.clone() })));
    let stop = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::sync_channel::<Msg>(4 * train.workers);
    let workers = train.workers;
    let handles: Vec<_> = (0..workers)
        .map(|w| {
            let (env, snapshot, stop, tx) = (env.clone(), snapshot.clone(), stop.clone(), tx.clone());
            std::thread::spawn(move || {
                let mut actor = Actor::new(&env, key, w, search.variance_decay);
                let mut current = snapshot.read().unwrap().clone();
                while !stop.load(Ordering::Relaxed) {
                    if actor.step == 0 {
                        current = snapshot.read().unwrap().clone();
                    }
                    let msg = actor
                        .search(&env, &current.policy, &current.value, &search)
                        .map_err(|e| e.to_string())
                        .and_then(|(r, sigma)| actor.apply(&env, r, sigma, train.timeout, workers).map_err(|e| e.to_string()));
                    let msg = match msg {
                        Ok(rec) => Msg::Step(Box::new(rec), actor.sigma),
                        Err(e) => Msg::Failed(e),
                    };
                    let failed = matches!(msg, Msg::Failed(_));
                    if tx.send(msg).is_err() || failed {
                        break;
                    }
                }
            })
        })
        .collect();
    drop(tx);

    let result = (|| -> Result<(u64, u64), RunError> {
        let mut windows = ReturnWindows::new(workers, train.window_episodes);
        let mut credit = UpdateCredit::new(&train);
        let mut sigmas = vec![RunningVariance::new(search.variance_decay); workers];
        let (total, interval) = (config.run.total_steps, config.run.metrics_interval);
        let (mut steps, mut episodes, mut next_row) = (0u64, 0u64, interval);
        while steps < total {
            let (rec, sigma) = match rx.recv().map_err(|_| RunError::Worker("all workers stopped".into()))? {
                Msg::Step(rec, sigma) => (rec, sigma),
                Msg::Failed(e) => return Err(RunError::Worker(e)),
            };
            sigmas[rec.worker] = sigma;
            out.step(&rec)?;
            if let Some(ret) = rec.finished {
                windows.push(rec.worker, ret);
                episodes += 1;
            }
            learner.ingest(rec.worker, rec.entry);
            steps += 1;
            let due = credit.earn(1, steps);
            for _ in 0..due {
                learner.learn_step()?;
            }
            if due > 0 {
                *snapshot.write().unwrap() = Arc::new(Snapshot { policy: learner.policy.clone(), value: learner.value.clone() });
            }
            if steps >= next_row || steps >= total {
                let (mean, ci) = windows.summary();
                let (lp, lv) = learner.take_losses();
                out.row(MetricsRow {
                    total_env_steps: steps,
                    windowed_return_mean: mean,
                    windowed_return_ci95: ci,
                    loss_policy: lp,
                    loss_value: lv,
                    sigma_bar: mean_sigma(sigmas.iter()),
                })?;
                next_row += interval;
            }
            out.maybe_checkpoint(&learner.policy, &learner.value, steps, learner.updates())?;
        }
        Ok((steps, episodes))
    })();
    stop.store(true, Ordering::Relaxed);
    drop(rx);
    for h in handles {
        h.join().map_err(|_| RunError::Worker("worker thread panicked".into()))?;
    }
    let (steps, episodes) = result?;
    let updates = learner.updates();
    out.finish(learner.policy.clone(), learner.value.clone(), steps, updates, episodes, opts, started)
}

/// Runs every configured seed into `root/seed_<s>`. A failing seed does
/// not stop the others; its error is returned in place of an outcome.
pub fn run_experiment(config: &ExperimentConfig, root: &Path, opts: &RunOptions) -> Vec<(u64, Result<SeedOutcome, RunError>)> {
    config.seeds.iter().map(|&s| (s, run_seed(config, s, &seed_dir(root, s), opts))).collect()
}
