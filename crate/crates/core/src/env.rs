//! The generative-model contract shared by every environment, plus episode
//! execution with timeouts and return accounting.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;
use core::hash::Hash;

use crate::math::Scalar;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("step called on a terminal state")]
    TerminalStep,
    #[error("action {action} out of range for {num_actions} actions")]
    InvalidAction { action: usize, num_actions: usize },
    #[error("invalid environment configuration: {0}")]
    InvalidConfig(String),
}

/// Sizes and discount of an MDP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdpSpec {
    pub num_actions: usize,
    pub observation_dim: usize,
    pub discount: f64,
}

impl MdpSpec {
    pub fn new(num_actions: usize, observation_dim: usize, discount: f64) -> Result<Self, EnvError> {
        if num_actions < 2 {
            return Err(EnvError::InvalidConfig("need at least two actions".into()));
        }
        if observation_dim == 0 {
            return Err(EnvError::InvalidConfig("observation_dim must be positive".into()));
        }
        if !(0.0..=1.0).contains(&discount) {
            return Err(EnvError::InvalidConfig("discount must lie in [0, 1]".into()));
        }
        Ok(MdpSpec { num_actions, observation_dim, discount })
    }
}

/// A flat binary observation vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Observation {
    bits: Vec<u8>,
}

impl Observation {
    /// Fails if any entry is not 0 or 1.
    pub fn from_bits(bits: Vec<u8>) -> Option<Self> {
        bits.iter().all(|&b| b <= 1).then_some(Observation { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn write_into<T: Scalar>(&self, out: &mut [T]) {
        debug_assert_eq!(out.len(), self.bits.len());
        for (o, &b) in out.iter_mut().zip(&self.bits) {
            *o = if b == 1 { T::one() } else { T::zero() };
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub next_state: S,
    pub reward: f64,
    pub terminal: bool,
}

/// A simulator answering `(s, a) -> (s', r)` queries.
///
/// States are plain values: cloning a state and stepping the clone never
/// affects the original, so rollouts may run on clones from any thread.
pub trait Environment: Clone + Send + Sync {
    type State: Clone + PartialEq + Eq + Hash + Debug + Send + Sync;

    fn spec(&self) -> MdpSpec;

    /// Samples a non-terminal start state.
    fn reset(&self, rng: &mut Rng) -> Self::State;

    fn is_terminal(&self, state: &Self::State) -> bool;

    /// Samples a transition. Stepping a terminal state is an error.
    fn step(&self, state: &Self::State, action: usize, rng: &mut Rng) -> Result<Transition<Self::State>, EnvError>;

    /// Writes the 0/1 observation of `state` into `out` (length `observation_dim`).
    fn encode<T: Scalar>(&self, state: &Self::State, out: &mut [T]);

    fn observe(&self, state: &Self::State) -> Observation {
        let mut buf = vec![0u8; self.spec().observation_dim];
        self.encode_bits(state, &mut buf);
        Observation { bits: buf }
    }

    fn encode_bits(&self, state: &Self::State, out: &mut [u8]) {
        let mut tmp = vec![0f32; out.len()];
        self.encode(state, &mut tmp);
        for (o, t) in out.iter_mut().zip(tmp) {
            *o = (t > 0.5) as u8;
        }
    }

    /// Common precondition check for `step` implementations.
    fn check_step(&self, state: &Self::State, action: usize) -> Result<(), EnvError> {
        if self.is_terminal(state) {
            return Err(EnvError::TerminalStep);
        }
        let num_actions = self.spec().num_actions;
        if action >= num_actions {
            return Err(EnvError::InvalidAction { action, num_actions });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EpisodeEnd {
    Terminal,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStep<S> {
    pub state: S,
    pub observation: Observation,
    pub action: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord<S> {
    pub steps: Vec<EpisodeStep<S>>,
    pub final_state: S,
    pub undiscounted_return: f64,
    pub ended_by: EpisodeEnd,
}

impl<S> EpisodeRecord<S> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Recomputes the return from the step rewards.
    pub fn verify(&self) -> bool {
        let sum: f64 = self.steps.iter().map(|s| s.reward).sum();
        sum == self.undiscounted_return
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EpisodeError<X> {
    #[error("timeout must be at least 1")]
    ZeroTimeout,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("action source failed: {0:?}")]
    Source(X),
}

/// Runs one episode from a fresh start state until it terminates or
/// `timeout` steps have been taken.
pub fn run_episode<E, F, X>(
    env: &E,
    mut action_source: F,
    timeout: usize,
    rng: &mut Rng,
) -> Result<EpisodeRecord<E::State>, EpisodeError<X>>
where
    E: Environment,
    F: FnMut(&E::State, &Observation, &mut Rng) -> Result<usize, X>,
{
    if timeout == 0 {
        return Err(EpisodeError::ZeroTimeout);
    }
    let mut state = env.reset(rng);
    let mut steps = Vec::new();
    let mut total = 0.0;
    loop {
        let observation = env.observe(&state);
        let action = action_source(&state, &observation, rng).map_err(EpisodeError::Source)?;
        let tr = env.step(&state, action, rng)?;
        total += tr.reward;
        steps.push(EpisodeStep { state, observation, action, reward: tr.reward });
        state = tr.next_state;
        if tr.terminal {
            return Ok(EpisodeRecord { steps, final_state: state, undiscounted_return: total, ended_by: EpisodeEnd::Terminal });
        }
        if steps.len() == timeout {
            return Ok(EpisodeRecord { steps, final_state: state, undiscounted_return: total, ended_by: EpisodeEnd::Timeout });
        }
    }
}
