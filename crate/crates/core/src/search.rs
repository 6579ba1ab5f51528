//! Monte-Carlo search in the joint space of first actions and options.
//!
//! The budget is split evenly: every `(action, option)` pair receives
//! `M = budget / (A * N)` rollouts. A rollout takes the first action, then
//! follows the option policy stochastically for up to `K - 1` more steps and
//! bootstraps from the value network. Rollouts are simulated in lockstep so
//! each policy step is a single batched forward pass; every rollout draws
//! from its own random stream, so the result does not depend on how rollouts
//! are chunked across threads.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::env::{EnvError, Environment};
use crate::exec::Executor;
use crate::math::{sample_index, softmax_into, Scalar};
use crate::nn::{Activations, NnError, PolicyNet, ValueNet};
use crate::rng::{Rng, StreamKey};

/// Rollouts per executor task.
pub const ROLLOUT_CHUNK: usize = 64;

/// Lower clamp applied to the running return scale.
pub const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("search configuration error: {0}")]
    Config(String),
    #[error("search started from a terminal state")]
    TerminalRoot,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub simulation_budget: usize,
    /// Rollout length `K`, counting the first action.
    pub rollout_length: usize,
    /// Entropy regularization factor.
    pub beta: f64,
    pub variance_decay: f64,
    pub discount: f64,
}

impl SearchConfig {
    /// Rollouts per `(action, option)` pair.
    pub fn rollouts_per_pair(&self, num_actions: usize, num_options: usize) -> Result<usize, SearchError> {
        if self.rollout_length == 0 {
            return Err(SearchError::Config("rollout_length must be positive".into()));
        }
        if !(self.beta > 0.0) {
            return Err(SearchError::Config("beta must be positive".into()));
        }
        if !(self.variance_decay >= 0.0 && self.variance_decay < 1.0) {
            return Err(SearchError::Config("variance_decay must lie in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(SearchError::Config("discount must lie in [0, 1]".into()));
        }
        let pairs = num_actions * num_options;
        if self.simulation_budget < pairs {
            return Err(SearchError::Config(format!(
                "simulation budget {} is smaller than actions x options = {}",
                self.simulation_budget, pairs
            )));
        }
        Ok(self.simulation_budget / pairs)
    }
}

/// Exponentially weighted average of per-search rollout-return variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunningVariance {
    pub sigma_bar_sq: f64,
    pub decay: f64,
}

impl RunningVariance {
    pub fn new(decay: f64) -> Self {
        RunningVariance { sigma_bar_sq: 1.0, decay }
    }

    /// Clamped square root used as the temperature scale.
    pub fn sigma_bar(&self) -> f64 {
        libm::sqrt(self.sigma_bar_sq).max(SIGMA_FLOOR)
    }

    /// Folds in the sample variance of `returns` (needs at least two).
    pub fn update(&mut self, returns: &[f64]) -> Result<(), SearchError> {
        if returns.len() < 2 {
            return Err(SearchError::Config("variance update needs at least two returns".into()));
        }
        let (_, var) = crate::math::mean_var(returns);
        self.sigma_bar_sq = self.decay * self.sigma_bar_sq + (1.0 - self.decay) * var;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub num_actions: usize,
    pub num_options: usize,
    /// Mean bootstrapped return, `num_options x num_actions` row-major.
    pub q_hat: Vec<f64>,
    /// Joint search distribution, same layout as `q_hat`.
    pub p_tilde: Vec<f64>,
    /// Search policy over actions.
    pub pi_tilde: Vec<f64>,
    pub a_tilde: usize,
    pub v_tilde: f64,
    pub rollouts: usize,
    /// Scale used for this search's temperature.
    pub sigma_bar: f64,
}

impl SearchResult {
    pub fn q(&self, action: usize, option: usize) -> f64 {
        self.q_hat[option * self.num_actions + action]
    }

    pub fn p(&self, action: usize, option: usize) -> f64 {
        self.p_tilde[option * self.num_actions + action]
    }
}

/// Turns a `num_options x num_actions` table of `Q̂` into the search outputs
/// at temperature `sigma_bar * beta`.
pub fn summarize(q_hat: Vec<f64>, num_actions: usize, num_options: usize, sigma_bar: f64, beta: f64, rollouts: usize) -> SearchResult {
    let temperature = sigma_bar * beta;
    let max = q_hat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p_tilde: Vec<f64> = q_hat.iter().map(|q| libm::exp((q - max) / temperature)).collect();
    let z: f64 = p_tilde.iter().sum();
    p_tilde.iter_mut().for_each(|p| *p /= z);
    let mut pi_tilde = vec![0.0; num_actions];
    for n in 0..num_options {
        for a in 0..num_actions {
            pi_tilde[a] += p_tilde[n * num_actions + a];
        }
    }
    // first maximum in (a, n) order
    let (mut a_tilde, mut v_tilde) = (0, f64::NEG_INFINITY);
    for a in 0..num_actions {
        for n in 0..num_options {
            if q_hat[n * num_actions + a] > v_tilde {
                v_tilde = q_hat[n * num_actions + a];
                a_tilde = a;
            }
        }
    }
    SearchResult { num_actions, num_options, q_hat, p_tilde, pi_tilde, a_tilde, v_tilde, rollouts, sigma_bar }
}

/// Simulates one rollout per `(first_action, option)` task in lockstep and
/// returns the bootstrapped returns in task order.
pub fn simulate<E: Environment, T: Scalar>(
    env: &E,
    policy: &PolicyNet<T>,
    value: &ValueNet<T>,
    root: &E::State,
    tasks: &[(usize, usize)],
    rngs: &mut [Rng],
    rollout_length: usize,
    discount: f64,
) -> Result<Vec<f64>, SearchError> {
    debug_assert_eq!(tasks.len(), rngs.len());
    let dim = env.spec().observation_dim;
    let layout = policy.layout;
    let mut states = Vec::with_capacity(tasks.len());
    let mut returns = vec![0.0; tasks.len()];
    let mut live = Vec::with_capacity(tasks.len());
    for (i, &(a, _)) in tasks.iter().enumerate() {
        let tr = env.step(root, a, &mut rngs[i])?;
        returns[i] = tr.reward;
        if !tr.terminal {
            live.push(i);
        }
        states.push(tr.next_state);
    }
    let mut weight = discount;
    let mut input: Vec<T> = Vec::new();
    let mut acts = Activations::new();
    let mut probs = vec![T::zero(); layout.num_actions];
    for _ in 1..rollout_length {
        if live.is_empty() {
            break;
        }
        input.clear();
        input.resize(live.len() * dim, T::zero());
        for (row, &i) in live.iter().enumerate() {
            env.encode(&states[i], &mut input[row * dim..(row + 1) * dim]);
        }
        let logits = policy.mlp.forward(&input, live.len(), &mut acts)?;
        let out_dim = layout.output_dim();
        let mut still = Vec::with_capacity(live.len());
        for (row, &i) in live.iter().enumerate() {
            let head = &logits[row * out_dim..(row + 1) * out_dim][layout.option_range(tasks[i].1)];
            softmax_into(head, &mut probs);
            let u: f64 = rngs[i].random();
            let action = sample_index(&probs, u);
            let tr = env.step(&states[i], action, &mut rngs[i])?;
            returns[i] += weight * tr.reward;
            states[i] = tr.next_state;
            if !tr.terminal {
                still.push(i);
            }
        }
        live = still;
        weight *= discount;
    }
    if !live.is_empty() {
        input.clear();
        input.resize(live.len() * dim, T::zero());
        for (row, &i) in live.iter().enumerate() {
            env.encode(&states[i], &mut input[row * dim..(row + 1) * dim]);
        }
        let values = value.mlp.forward(&input, live.len(), &mut acts)?;
        for (row, &i) in live.iter().enumerate() {
            returns[i] += weight * values[row].f64();
        }
    }
    Ok(returns)
}

/// A single rollout: first action, then option `option` for up to `K - 1`
/// steps, bootstrapped with `v(s_K)` (zero at terminal states).
pub fn rollout<E: Environment, T: Scalar>(
    env: &E,
    policy: &PolicyNet<T>,
    value: &ValueNet<T>,
    start: &E::State,
    first_action: usize,
    option: usize,
    rollout_length: usize,
    discount: f64,
    rng: &mut Rng,
) -> Result<f64, SearchError> {
    if env.is_terminal(start) {
        return Err(SearchError::TerminalRoot);
    }
    let out = simulate(env, policy, value, start, &[(first_action, option)], core::slice::from_mut(rng), rollout_length, discount)?;
    Ok(out[0])
}

/// Stream key of rollout `index` within a search keyed by `key`.
pub fn rollout_key(key: StreamKey, index: usize) -> StreamKey {
    key.child(index as u64)
}

/// Monte-Carlo search with options from `state`.
///
/// The temperature uses the running scale from before this search; the
/// running variance is then updated with this search's pooled returns.
pub fn mcs_with_options<E, T, X>(
    env: &E,
    policy: &PolicyNet<T>,
    value: &ValueNet<T>,
    sigma: &mut RunningVariance,
    state: &E::State,
    config: &SearchConfig,
    key: StreamKey,
    exec: &X,
) -> Result<SearchResult, SearchError>
where
    E: Environment,
    T: Scalar,
    X: Executor,
{
    if env.is_terminal(state) {
        return Err(SearchError::TerminalRoot);
    }
    let num_actions = env.spec().num_actions;
    let num_options = policy.layout.num_options;
    if policy.layout.num_actions != num_actions {
        return Err(SearchError::Config("policy head width differs from the action count".into()));
    }
    let m = config.rollouts_per_pair(num_actions, num_options)?;
    let total = m * num_actions * num_options;
    let task_of = |r: usize| {
        let pair = r / m;
        (pair / num_options, pair % num_options)
    };
    let chunks = total.div_ceil(ROLLOUT_CHUNK);
    let results = exec.map(chunks, |c| {
        let range = c * ROLLOUT_CHUNK..((c + 1) * ROLLOUT_CHUNK).min(total);
        let tasks: Vec<(usize, usize)> = range.clone().map(task_of).collect();
        let mut rngs: Vec<Rng> = range.map(|r| rollout_key(key, r).rng()).collect();
        simulate(env, policy, value, state, &tasks, &mut rngs, config.rollout_length, config.discount)
    });
    let mut returns = Vec::with_capacity(total);
    for r in results {
        returns.extend(r?);
    }
    let mut q_hat = vec![0.0; num_options * num_actions];
    for a in 0..num_actions {
        for n in 0..num_options {
            let start = (a * num_options + n) * m;
            let sum: f64 = returns[start..start + m].iter().sum();
            q_hat[n * num_actions + a] = sum / m as f64;
        }
    }
    let result = summarize(q_hat, num_actions, num_options, sigma.sigma_bar(), config.beta, total);
    sigma.update(&returns)?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{MdpSpec, Transition};
    use crate::envs::{Compass, Edge};
    use crate::exec::Sequential;
    use crate::math::mean_var;
    use crate::nn::{HeadLayout, Init, MlpConfig};

    const CFG: SearchConfig = SearchConfig { simulation_budget: 48, rollout_length: 5, beta: 0.5, variance_decay: 0.99, discount: 0.9 };

    /// Two-state deterministic MDP with action-dependent rewards.
    #[derive(Clone)]
    struct TwoState;

    impl Environment for TwoState {
        type State = u8;
        fn spec(&self) -> MdpSpec {
            MdpSpec::new(2, 2, 0.9).unwrap()
        }
        fn reset(&self, _: &mut Rng) -> u8 {
            0
        }
        fn is_terminal(&self, _: &u8) -> bool {
            false
        }
        fn step(&self, s: &u8, a: usize, _: &mut Rng) -> Result<Transition<u8>, EnvError> {
            let next = if a == 0 { *s } else { 1 - *s };
            Ok(Transition { next_state: next, reward: [[1.0, -0.5], [0.25, 2.0]][*s as usize][a], terminal: false })
        }
        fn encode<T: Scalar>(&self, s: &u8, out: &mut [T]) {
            out[0] = if *s == 0 { T::one() } else { T::zero() };
            out[1] = T::one() - out[0];
        }
    }

    fn nets(n: usize, a: usize, dim: usize, seed: u64) -> (PolicyNet<f64>, ValueNet<f64>) {
        let cfg = MlpConfig::new(dim, 1, 6).unwrap();
        let mut rng = StreamKey::root(seed).rng();
        (
            PolicyNet::new(cfg, HeadLayout::new(n, a, false).unwrap(), Init::RandomOutput(1.0), &mut rng),
            ValueNet::new(cfg, Init::RandomOutput(1.0), &mut rng),
        )
    }

    /// Output layer reduced to a bias: input-independent outputs.
    fn constant_value(c: f64, dim: usize) -> ValueNet<f64> {
        let mut v = ValueNet::new(MlpConfig::new(dim, 1, 2).unwrap(), Init::ZeroOutput, &mut StreamKey::root(0).rng());
        v.mlp.layers_mut().last().unwrap().1[0] = c;
        v
    }

    #[test]
    fn budget_split() {
        let c = SearchConfig { simulation_budget: 1000, ..CFG };
        assert_eq!(c.rollouts_per_pair(4, 5).unwrap(), 50);
        assert_eq!(SearchConfig { simulation_budget: 1003, ..CFG }.rollouts_per_pair(4, 5).unwrap(), 50);
        assert!(SearchConfig { simulation_budget: 19, ..CFG }.rollouts_per_pair(4, 5).is_err());
        let env = Compass::new(9).unwrap();
        let (p, v) = nets(5, 4, 18, 1);
        let mut sigma = RunningVariance::new(0.99);
        let s = env.state_at(4, 4, Edge::East);
        let r = mcs_with_options(&env, &p, &v, &mut sigma, &s, &c, StreamKey::root(2), &Sequential).unwrap();
        assert_eq!(r.rollouts, 1000);
        assert_eq!(r.q_hat.len(), 20);
        assert!((r.pi_tilde.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for a in 0..4 {
            let m: f64 = (0..5).map(|n| r.p(a, n)).sum();
            assert_eq!(m, r.pi_tilde[a]);
        }
        assert!(mcs_with_options(&env, &p, &v, &mut sigma, &env.state_at(0, 4, Edge::East), &c, StreamKey::root(2), &Sequential).is_err());
    }

    #[test]
    fn hand_expanded_two_by_two() {
        // rows are options, columns actions
        let q = vec![1.0, 2.0, 2.0, 0.5];
        let r = summarize(q, 2, 2, 2.0, 0.5, 4);
        let e = [1f64.exp(), 2f64.exp(), 2f64.exp(), 0.5f64.exp()];
        let z: f64 = e.iter().sum();
        assert!((r.p(0, 0) - e[0] / z).abs() < 1e-15);
        assert!((r.p(1, 0) - e[1] / z).abs() < 1e-15);
        assert!((r.p(0, 1) - e[2] / z).abs() < 1e-15);
        assert!((r.pi_tilde[0] - (e[0] + e[2]) / z).abs() < 1e-15);
        assert!((r.pi_tilde[1] - (e[1] + e[3]) / z).abs() < 1e-15);
        // tie between (a=0, n=1) and (a=1, n=0): lowest (a, n) wins
        assert_eq!(r.a_tilde, 0);
        assert_eq!(r.v_tilde, 2.0);
    }

    #[test]
    fn temperature_does_not_move_the_greedy_action() {
        let q = vec![0.3, -1.0, 0.7, 0.1, 0.2, 0.0];
        let flat = summarize(vec![0.5; 6], 3, 2, 1.0, 0.1, 6);
        assert!(flat.p_tilde.iter().all(|p| (p - 1.0 / 6.0).abs() < 1e-15));
        assert!(flat.pi_tilde.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
        let cold = summarize(q.clone(), 3, 2, 1.0, 0.01, 6);
        let hot = summarize(q, 3, 2, 1.0, 1e9, 6);
        assert_eq!(cold.a_tilde, hot.a_tilde);
        assert_eq!(hot.a_tilde, 2);
        assert!(hot.pi_tilde.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-6));
    }

    #[test]
    fn terminal_first_step_has_no_bootstrap() {
        let env = Compass::new(7).unwrap();
        let v = constant_value(5.0, 14);
        let (p, _) = nets(2, 4, 14, 3);
        let s = env.state_at(1, 3, Edge::North);
        let g = rollout(&env, &p, &v, &s, crate::action::UP, 1, 10, 0.9, &mut StreamKey::root(0).rng()).unwrap();
        assert_eq!(g, 1.0);
        let g = rollout(&env, &p, &v, &s, crate::action::UP, 1, 10, 0.9, &mut StreamKey::root(0).rng());
        assert_eq!(g, Ok(1.0));
        let s = env.state_at(1, 3, Edge::South);
        assert_eq!(rollout(&env, &p, &v, &s, crate::action::UP, 0, 10, 0.9, &mut StreamKey::root(0).rng()), Ok(-1.0));
    }

    #[test]
    fn zero_reward_chain_discounts_bootstrap() {
        #[derive(Clone)]
        struct Chain;
        impl Environment for Chain {
            type State = u32;
            fn spec(&self) -> MdpSpec {
                MdpSpec::new(2, 1, 0.9).unwrap()
            }
            fn reset(&self, _: &mut Rng) -> u32 {
                0
            }
            fn is_terminal(&self, _: &u32) -> bool {
                false
            }
            fn step(&self, s: &u32, _: usize, _: &mut Rng) -> Result<Transition<u32>, EnvError> {
                Ok(Transition { next_state: s + 1, reward: 0.0, terminal: false })
            }
            fn encode<T: Scalar>(&self, _: &u32, out: &mut [T]) {
                out[0] = T::one();
            }
        }
        let v = constant_value(3.0, 1);
        let (p, _) = nets(1, 2, 1, 4);
        for k in 1..6 {
            let g = rollout(&Chain, &p, &v, &0, 0, 0, k, 0.9, &mut StreamKey::root(0).rng()).unwrap();
            assert!((g - 0.9f64.powi(k as i32) * 3.0).abs() < 1e-12);
        }
    }

    /// Expected rollout return by enumerating every action sequence.
    fn enumerate(p: &PolicyNet<f64>, v: &ValueNet<f64>, option: usize, s: u8, depth: usize, gamma: f64) -> f64 {
        if depth == 0 {
            let x = [if s == 0 { 1.0 } else { 0.0 }, if s == 0 { 0.0 } else { 1.0 }];
            return v.forward_value(&x).unwrap();
        }
        let x = [if s == 0 { 1.0 } else { 0.0 }, if s == 0 { 0.0 } else { 1.0 }];
        let out = p.forward_policy(&x).unwrap();
        let mut probs = [0.0; 2];
        softmax_into(&out.option_log_probs[option * 2..option * 2 + 2], &mut probs);
        let mut rng = StreamKey::root(0).rng();
        (0..2)
            .map(|a| {
                let tr = TwoState.step(&s, a, &mut rng).unwrap();
                probs[a] * (tr.reward + gamma * enumerate(p, v, option, tr.next_state, depth - 1, gamma))
            })
            .sum()
    }

    #[test]
    fn rollout_mean_matches_enumeration() {
        let (p, v) = nets(2, 2, 2, 5);
        let gamma = 0.9;
        for k in 1..=4 {
            for (first, option) in [(0, 0), (1, 1)] {
                let tr = TwoState.step(&0, first, &mut StreamKey::root(0).rng()).unwrap();
                let exact = tr.reward + gamma * enumerate(&p, &v, option, tr.next_state, k - 1, gamma);
                let tasks = vec![(first, option); 20_000];
                let mut rngs: Vec<Rng> = (0..tasks.len()).map(|i| StreamKey::root(k as u64).child(i as u64).rng()).collect();
                let g = simulate(&TwoState, &p, &v, &0, &tasks, &mut rngs, k, gamma).unwrap();
                let (mean, var) = mean_var(&g);
                let se = libm::sqrt(var / g.len() as f64).max(1e-12);
                assert!((mean - exact).abs() < 4.0 * se + 1e-12, "k {k}: {mean} vs {exact}");
            }
        }
    }

    /// Plain primitive-action Monte-Carlo search with one rollout policy,
    /// written independently, on the same per-rollout streams.
    fn primitive_mcs(env: &Compass, p: &PolicyNet<f64>, v: &ValueNet<f64>, s: &crate::envs::CompassState, c: &SearchConfig, key: StreamKey) -> Vec<f64> {
        let m = c.simulation_budget / 4;
        let mut q = vec![0.0; 4];
        let mut x = vec![0.0; env.spec().observation_dim];
        for a in 0..4 {
            let mut sum = 0.0;
            for j in 0..m {
                let mut rng = key.child((a * m + j) as u64).rng();
                let tr = env.step(s, a, &mut rng).unwrap();
                let (mut g, mut w, mut cur, mut done) = (tr.reward, c.discount, tr.next_state, tr.terminal);
                for _ in 1..c.rollout_length {
                    if done {
                        break;
                    }
                    env.encode(&cur, &mut x);
                    let out = p.forward_policy(&x).unwrap();
                    let mut probs = [0.0; 4];
                    softmax_into(&out.option_log_probs, &mut probs);
                    let act = sample_index(&probs, rng.random());
                    let tr = env.step(&cur, act, &mut rng).unwrap();
                    g += w * tr.reward;
                    w *= c.discount;
                    cur = tr.next_state;
                    done = tr.terminal;
                }
                if !done {
                    env.encode(&cur, &mut x);
                    g += w * v.forward_value(&x).unwrap();
                }
                sum += g;
            }
            q[a] = sum / m as f64;
        }
        q
    }

    #[test]
    fn single_option_is_primitive_search() {
        let env = Compass::new(9).unwrap();
        let (p, v) = nets(1, 4, 18, 6);
        let c = SearchConfig { simulation_budget: 200, rollout_length: 8, ..CFG };
        for (row, col) in [(4, 4), (2, 6), (1, 1)] {
            let s = env.state_at(row, col, Edge::West);
            let mut sigma = RunningVariance::new(0.99);
            let r = mcs_with_options(&env, &p, &v, &mut sigma, &s, &c, StreamKey::root(7), &Sequential).unwrap();
            assert_eq!(r.q_hat, primitive_mcs(&env, &p, &v, &s, &c, StreamKey::root(7)));
        }
    }

    /// Runs tasks in reverse order.
    struct Reversed;

    impl Executor for Reversed {
        fn map<R: Send, F: Fn(usize) -> R + Sync + Send>(&self, n: usize, f: F) -> Vec<R> {
            let mut out: Vec<R> = (0..n).rev().map(f).collect();
            out.reverse();
            out
        }
    }

    #[test]
    fn result_ignores_execution_order() {
        let env = Compass::new(15).unwrap();
        let (p, v) = nets(4, 4, 30, 8);
        let c = SearchConfig { simulation_budget: 400, rollout_length: 20, ..CFG };
        let s = env.state_at(7, 7, Edge::South);
        let (mut s1, mut s2) = (RunningVariance::new(0.9), RunningVariance::new(0.9));
        let a = mcs_with_options(&env, &p, &v, &mut s1, &s, &c, StreamKey::root(9), &Sequential).unwrap();
        let b = mcs_with_options(&env, &p, &v, &mut s2, &s, &c, StreamKey::root(9), &Reversed).unwrap();
        assert_eq!(a, b);
        assert_eq!(s1, s2);
    }

    #[test]
    fn running_variance() {
        let mut rv = RunningVariance::new(0.5);
        for _ in 0..200 {
            rv.update(&[3.0, 3.0, 3.0]).unwrap();
        }
        assert!(rv.sigma_bar_sq < 1e-40);
        assert_eq!(rv.sigma_bar(), SIGMA_FLOOR);
        let mut rv = RunningVariance::new(0.0);
        rv.update(&[1.0, 2.0, 4.0]).unwrap();
        assert!((rv.sigma_bar_sq - 7.0 / 3.0).abs() < 1e-12);
        assert!(rv.update(&[1.0]).is_err());
        let mut rv = RunningVariance::new(0.99);
        rv.sigma_bar_sq = 0.0;
        let mut rng = StreamKey::root(10).rng();
        for _ in 0..1000 {
            // uniform on [-sqrt 3, sqrt 3] has unit variance
            let batch: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0) * libm::sqrt(3.0)).collect();
            rv.update(&batch).unwrap();
        }
        assert!((rv.sigma_bar_sq - 1.0).abs() < 0.1, "{}", rv.sigma_bar_sq);
    }

    #[test]
    fn temperature_uses_previous_scale() {
        let env = Compass::new(9).unwrap();
        let (p, v) = nets(2, 4, 18, 11);
        let c = SearchConfig { simulation_budget: 64, rollout_length: 6, ..CFG };
        let s = env.state_at(3, 3, Edge::North);
        let mut sigma = RunningVariance::new(0.9);
        let r = mcs_with_options(&env, &p, &v, &mut sigma, &s, &c, StreamKey::root(12), &Sequential).unwrap();
        assert_eq!(r.sigma_bar, 1.0);
        assert!(sigma.sigma_bar_sq != 1.0);
    }
}
