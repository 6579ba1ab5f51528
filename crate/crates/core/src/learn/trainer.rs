//! Synchronous actor/learner loop.
//!
//! One tick advances every worker by one environment step: all workers
//! search from their current state (in parallel through the executor), then
//! their results are applied in worker order, then the learner performs the
//! updates earned by those steps. Workers always search with the learner's
//! current parameters, so a fixed seed gives bitwise-identical runs.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec::Vec;

use super::buffer::{Boundary, BufferEntry, ReplayBuffer};
use super::loss::{policy_loss, value_loss, LossBatch, LossVariant};
use crate::env::{EnvError, Environment, MdpSpec};
use crate::exec::{Executor, Sequential};
use crate::math::{ci95, mean_var, Scalar};
use crate::nn::{AdamW, AdamWConfig, HeadLayout, Init, MlpConfig, NnError, PolicyNet, ValueNet};
use crate::rng::{Rng, StreamKey};
use crate::search::{mcs_with_options, RunningVariance, SearchConfig, SearchError, SearchResult};

const STREAM_INIT: u64 = 0;
const STREAM_ENV: u64 = 1;
const STREAM_SEARCH: u64 = 2;
const STREAM_LEARN: u64 = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("training configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub num_options: usize,
    /// Segment length `K` for sequence losses.
    pub segment_length: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Gradient updates per aggregate environment step (may be fractional).
    pub grad_updates_per_env_step: f64,
    pub workers: usize,
    /// Aggregate environment steps before learning starts.
    pub training_start: u64,
    pub loss_variant: LossVariant,
    /// Policy step size; the value network uses twice this.
    pub step_size: f64,
    pub hidden_layers: usize,
    pub hidden_units: usize,
    /// Scale of the random policy output layer; 0 gives a zero layer.
    pub policy_output_scale: f64,
    pub adam: AdamWConfig,
    /// Episode timeout in environment steps.
    pub timeout: usize,
    /// Trailing episodes per worker in the windowed return.
    pub window_episodes: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if self.num_options == 0 || self.segment_length == 0 || self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("options, segment length, batch size and buffer capacity must be positive");
        }
        if self.workers == 0 || self.timeout == 0 || self.window_episodes == 0 {
            return bad("workers, timeout and window must be positive");
        }
        if self.hidden_layers == 0 || self.hidden_units == 0 {
            return bad("network sizes must be positive");
        }
        if !(self.grad_updates_per_env_step >= 0.0) || !self.grad_updates_per_env_step.is_finite() {
            return bad("grad_updates_per_env_step must be finite and non-negative");
        }
        if !(self.policy_output_scale >= 0.0) {
            return bad("policy_output_scale must be non-negative");
        }
        if !(self.step_size > 0.0) {
            return bad("step size must be positive");
        }
        if self.loss_variant.requires_single_option() && self.num_options != 1 {
            return bad("ExIt loss variants need num_options = 1");
        }
        Ok(())
    }
}

/// One metrics window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub total_env_steps: u64,
    pub windowed_return_mean: f64,
    pub windowed_return_ci95: f64,
    pub loss_policy: f64,
    pub loss_value: f64,
    pub sigma_bar: f64,
}

/// Per-worker acting state: the current episode plus the worker's running
/// return scale and random streams.
#[derive(Debug, Clone)]
pub struct Actor<S> {
    pub worker: usize,
    pub state: S,
    pub episode_id: u64,
    pub episodes: u64,
    pub step: usize,
    pub ret: f64,
    pub sigma: RunningVariance,
    env_rng: Rng,
    searches: u64,
    key: StreamKey,
}

/// What one environment step produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub worker: usize,
    pub entry: BufferEntry,
    pub action: usize,
    pub reward: f64,
    /// Undiscounted return if the episode ended on this step.
    pub finished: Option<f64>,
}

impl<S: Clone> Actor<S> {
    pub fn new<E: Environment<State = S>>(env: &E, key: StreamKey, worker: usize, variance_decay: f64) -> Self {
        let mut env_rng = key.path(&[STREAM_ENV, worker as u64]).rng();
        Actor {
            worker,
            state: env.reset(&mut env_rng),
            episode_id: worker as u64,
            episodes: 0,
            step: 0,
            ret: 0.0,
            sigma: RunningVariance::new(variance_decay),
            env_rng,
            searches: 0,
            key,
        }
    }

    /// Searches from the current state without touching the actor; the
    /// updated return scale comes back with the result.
    pub fn search<E: Environment<State = S>, T: Scalar>(
        &self,
        env: &E,
        policy: &PolicyNet<T>,
        value: &ValueNet<T>,
        config: &SearchConfig,
    ) -> Result<(SearchResult, RunningVariance), SearchError> {
        let mut sigma = self.sigma;
        let key = self.key.path(&[STREAM_SEARCH, self.worker as u64, self.searches]);
        let r = mcs_with_options(env, policy, value, &mut sigma, &self.state, config, key, &Sequential)?;
        Ok((r, sigma))
    }

    /// Executes the search's action and starts a new episode on terminal or
    /// timeout. `workers` spaces the episode ids of different actors.
    pub fn apply<E: Environment<State = S>>(
        &mut self,
        env: &E,
        result: SearchResult,
        sigma: RunningVariance,
        timeout: usize,
        workers: usize,
    ) -> Result<StepRecord, EnvError> {
        self.sigma = sigma;
        self.searches += 1;
        let tr = env.step(&self.state, result.a_tilde, &mut self.env_rng)?;
        let mut entry = BufferEntry {
            observation: env.observe(&self.state),
            pi_tilde: result.pi_tilde,
            v_tilde: result.v_tilde,
            episode_id: self.episode_id,
            step_index: self.step,
            boundary: Boundary::None,
            next: None,
        };
        self.ret += tr.reward;
        self.step += 1;
        self.state = tr.next_state;
        let mut finished = None;
        if tr.terminal || self.step >= timeout {
            entry.boundary = if tr.terminal { Boundary::TerminalNext } else { Boundary::TimeoutNext };
            finished = Some(self.ret);
            self.episodes += 1;
            self.episode_id = self.episodes * workers as u64 + self.worker as u64;
            self.step = 0;
            self.ret = 0.0;
            self.state = env.reset(&mut self.env_rng);
        }
        Ok(StepRecord { worker: self.worker, entry, action: result.a_tilde, reward: tr.reward, finished })
    }
}

/// Trailing episode returns of each worker.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnWindows {
    capacity: usize,
    windows: Vec<VecDeque<f64>>,
}

impl ReturnWindows {
    pub fn new(workers: usize, capacity: usize) -> Self {
        ReturnWindows { capacity, windows: (0..workers).map(|_| VecDeque::new()).collect() }
    }

    pub fn push(&mut self, worker: usize, ret: f64) {
        let w = &mut self.windows[worker];
        if w.len() == self.capacity {
            w.pop_front();
        }
        w.push_back(ret);
    }

    /// All windows pooled in worker order.
    pub fn pooled(&self) -> Vec<f64> {
        self.windows.iter().flat_map(|w| w.iter().copied()).collect()
    }

    /// Mean and 95% half-width of the pooled returns (NaN when empty).
    pub fn summary(&self) -> (f64, f64) {
        let r = self.pooled();
        match r.len() {
            0 => (f64::NAN, f64::NAN),
            1 => (r[0], 0.0),
            _ => (mean_var(&r).0, ci95(&r)),
        }
    }
}

/// The learner: networks, optimizers and the replay buffer.
#[derive(Debug, Clone)]
pub struct Learner {
    pub policy: PolicyNet<f32>,
    pub value: ValueNet<f32>,
    policy_opt: AdamW<f32>,
    value_opt: AdamW<f32>,
    buffer: ReplayBuffer,
    last_seq: Vec<Option<u64>>,
    rng: Rng,
    config: TrainConfig,
    observation_dim: usize,
    num_actions: usize,
    updates: u64,
    loss_sums: (f64, f64, u64),
}

impl Learner {
    /// Initializes networks from the seed's init stream.
    pub fn new(spec: MdpSpec, config: &TrainConfig, key: StreamKey) -> Result<Self, TrainError> {
        config.validate()?;
        let mut init_rng = key.child(STREAM_INIT).rng();
        let mlp = MlpConfig::new(spec.observation_dim, config.hidden_layers, config.hidden_units)?;
        let layout = HeadLayout::new(config.num_options, spec.num_actions, false)?;
        let init = if config.policy_output_scale > 0.0 { Init::RandomOutput(config.policy_output_scale) } else { Init::ZeroOutput };
        let policy = PolicyNet::new(mlp, layout, init, &mut init_rng);
        let value = ValueNet::new(mlp, Init::ZeroOutput, &mut init_rng);
        Ok(Learner {
            policy_opt: AdamW::new(&policy.mlp, config.adam),
            value_opt: AdamW::new(&value.mlp, config.adam),
            policy,
            value,
            buffer: ReplayBuffer::new(config.buffer_capacity),
            last_seq: alloc::vec![None; config.workers],
            rng: key.child(STREAM_LEARN).rng(),
            config: *config,
            observation_dim: spec.observation_dim,
            num_actions: spec.num_actions,
            updates: 0,
            loss_sums: (0.0, 0.0, 0),
        })
    }

    /// Appends a worker's entry, linking it to that worker's previous entry
    /// when both belong to the same episode.
    pub fn ingest(&mut self, worker: usize, entry: BufferEntry) {
        let prev = if entry.step_index == 0 { None } else { self.last_seq[worker] };
        let ends = entry.boundary != Boundary::None;
        let seq = self.buffer.push(entry, prev);
        self.last_seq[worker] = if ends { None } else { Some(seq) };
    }

    /// One gradient update of the policy and value networks.
    pub fn learn_step(&mut self) -> Result<(f64, f64), TrainError> {
        if self.buffer.is_empty() {
            return Err(TrainError::Config("learning from an empty buffer".into()));
        }
        let variant = self.config.loss_variant;
        let segments = self.buffer.sample_segments(self.config.batch_size, variant.segment_length(self.config.segment_length), &mut self.rng);
        let batch = LossBatch::<f32>::from_segments(&segments, self.observation_dim, self.num_actions);
        let p = policy_loss(variant, &self.policy, &batch, &mut self.rng)?;
        let v = value_loss(&self.value, &batch)?;
        self.policy_opt.step(&mut self.policy.mlp, &p.grads, self.config.step_size);
        self.value_opt.step(&mut self.value.mlp, &v.grads, 2.0 * self.config.step_size);
        self.updates += 1;
        self.loss_sums.0 += p.loss;
        self.loss_sums.1 += v.loss;
        self.loss_sums.2 += 1;
        Ok((p.loss, v.loss))
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    /// Mean losses since the last call (NaN when no update happened).
    pub fn take_losses(&mut self) -> (f64, f64) {
        let (lp, lv, c) = core::mem::take(&mut self.loss_sums);
        if c == 0 {
            (f64::NAN, f64::NAN)
        } else {
            (lp / c as f64, lv / c as f64)
        }
    }
}

/// Fractional update accounting: each environment step earns
/// `grad_updates_per_env_step` updates once `training_start` steps have passed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateCredit {
    rate: f64,
    start: u64,
    credit: f64,
}

impl UpdateCredit {
    pub fn new(config: &TrainConfig) -> Self {
        UpdateCredit { rate: config.grad_updates_per_env_step, start: config.training_start, credit: 0.0 }
    }

    /// Records `steps` new environment steps bringing the total to `total`;
    /// returns the number of updates now due.
    pub fn earn(&mut self, steps: u64, total: u64) -> u64 {
        if total < self.start {
            return 0;
        }
        self.credit += steps as f64 * self.rate;
        let due = libm::floor(self.credit);
        self.credit -= due;
        due as u64
    }
}

pub struct Trainer<E: Environment> {
    env: E,
    search: SearchConfig,
    config: TrainConfig,
    learner: Learner,
    actors: Vec<Actor<E::State>>,
    windows: ReturnWindows,
    credit: UpdateCredit,
    total_env_steps: u64,
}

impl<E: Environment> Trainer<E> {
    pub fn new(env: E, search: SearchConfig, config: TrainConfig, seed: u64) -> Result<Self, TrainError> {
        config.validate()?;
        let spec = env.spec();
        search.rollouts_per_pair(spec.num_actions, config.num_options)?;
        let key = StreamKey::root(seed);
        let learner = Learner::new(spec, &config, key)?;
        let actors = (0..config.workers).map(|w| Actor::new(&env, key, w, search.variance_decay)).collect();
        Ok(Trainer {
            learner,
            actors,
            windows: ReturnWindows::new(config.workers, config.window_episodes),
            credit: UpdateCredit::new(&config),
            env,
            search,
            config,
            total_env_steps: 0,
        })
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn search_config(&self) -> &SearchConfig {
        &self.search
    }

    pub fn learner(&self) -> &Learner {
        &self.learner
    }

    pub fn policy(&self) -> &PolicyNet<f32> {
        &self.learner.policy
    }

    pub fn value(&self) -> &ValueNet<f32> {
        &self.learner.value
    }

    pub fn total_env_steps(&self) -> u64 {
        self.total_env_steps
    }

    pub fn updates(&self) -> u64 {
        self.learner.updates
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.learner.buffer
    }

    pub fn episodes_completed(&self) -> u64 {
        self.actors.iter().map(|a| a.episodes).sum()
    }

    /// One environment step for every worker, then the earned updates.
    pub fn tick<X: Executor>(&mut self, exec: &X) -> Result<Vec<StepRecord>, TrainError> {
        let (env, policy, value, search) = (&self.env, &self.learner.policy, &self.learner.value, &self.search);
        let actors = &self.actors;
        let results = exec.map(actors.len(), |w| actors[w].search(env, policy, value, search));
        let mut records = Vec::with_capacity(results.len());
        let n = self.actors.len();
        for (actor, res) in self.actors.iter_mut().zip(results) {
            let (r, sigma) = res?;
            let rec = actor.apply(&self.env, r, sigma, self.config.timeout, n)?;
            self.learner.ingest(rec.worker, rec.entry.clone());
            if let Some(ret) = rec.finished {
                self.windows.push(rec.worker, ret);
            }
            records.push(rec);
        }
        self.total_env_steps += n as u64;
        for _ in 0..self.credit.earn(n as u64, self.total_env_steps) {
            self.learner.learn_step()?;
        }
        Ok(records)
    }

    pub fn learn_step(&mut self) -> Result<(f64, f64), TrainError> {
        self.learner.learn_step()
    }

    /// Trailing returns of every worker, pooled in worker order.
    pub fn windowed_returns(&self) -> Vec<f64> {
        self.windows.pooled()
    }

    /// Mean running return scale over workers.
    pub fn sigma_bar(&self) -> f64 {
        mean_sigma(self.actors.iter().map(|a| &a.sigma))
    }

    /// Current metrics; mean losses cover the updates since the last call.
    pub fn metrics(&mut self) -> MetricsRow {
        let (mean, ci) = self.windows.summary();
        let (lp, lv) = self.learner.take_losses();
        MetricsRow {
            total_env_steps: self.total_env_steps,
            windowed_return_mean: mean,
            windowed_return_ci95: ci,
            loss_policy: lp,
            loss_value: lv,
            sigma_bar: self.sigma_bar(),
        }
    }

    /// Ticks until at least `total_steps` aggregate steps, emitting a metrics
    /// row each time another `interval` steps have passed and at the end.
    /// `on_tick` sees every step record.
    pub fn run_with<X: Executor, F: FnMut(&MetricsRow), G: FnMut(&StepRecord)>(
        &mut self,
        total_steps: u64,
        interval: u64,
        exec: &X,
        mut on_row: F,
        mut on_step: G,
    ) -> Result<(), TrainError> {
        let interval = interval.max(1);
        let mut next = self.total_env_steps + interval;
        while self.total_env_steps < total_steps {
            for rec in self.tick(exec)? {
                on_step(&rec);
            }
            if self.total_env_steps >= next || self.total_env_steps >= total_steps {
                let row = self.metrics();
                on_row(&row);
                while next <= self.total_env_steps {
                    next += interval;
                }
            }
        }
        Ok(())
    }

    pub fn run<X: Executor, F: FnMut(&MetricsRow)>(&mut self, total_steps: u64, interval: u64, exec: &X, on_row: F) -> Result<(), TrainError> {
        self.run_with(total_steps, interval, exec, on_row, |_| {})
    }
}

/// Mean of the clamped running return scales.
pub fn mean_sigma<'a>(sigmas: impl Iterator<Item = &'a RunningVariance>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in sigmas {
        s += v.sigma_bar();
        n += 1;
    }
    s / n.max(1) as f64
}
