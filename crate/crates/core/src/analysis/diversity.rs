//! Which controller button each option reaches first, and how much the
//! option identity tells about it.
//!
//! For each sampled start state every option is rolled out repeatedly on
//! the controller grid; rollouts that reach no button within the horizon are
//! discarded. Frequencies are plug-in estimates and all logarithms are
//! natural. The mutual information is `Ĥ(i) - (1/N) Σ_n Ĥ(i|n)` with `f_i`
//! the option-averaged button frequency, estimated once from frequencies
//! pooled over states and once per state then averaged over states.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::env::Environment;
use crate::envs::{HierElectricProcMaze, HierState};
use crate::exec::Executor;
use crate::math::{entropy, mean_var, sample_index, Scalar};
use crate::nn::{Activations, NnError, PolicyNet};
use crate::rng::StreamKey;

pub const NUM_BUTTONS: usize = 4;

/// A set of option policies queried in batches.
pub trait OptionPolicy<E: Environment>: Sync {
    fn num_options(&self) -> usize;
    /// Appends the action distribution of `options[i]` in `states[i]`.
    fn action_probs(&self, env: &E, states: &[&E::State], options: &[usize], out: &mut Vec<f64>) -> Result<(), NnError>;
}

impl<E: Environment, T: Scalar> OptionPolicy<E> for PolicyNet<T> {
    fn num_options(&self) -> usize {
        self.layout.num_options
    }

    fn action_probs(&self, env: &E, states: &[&E::State], options: &[usize], out: &mut Vec<f64>) -> Result<(), NnError> {
        let dim = env.spec().observation_dim;
        let mut input = vec![T::zero(); states.len() * dim];
        for (i, s) in states.iter().enumerate() {
            env.encode(s, &mut input[i * dim..(i + 1) * dim]);
        }
        let mut acts = Activations::new();
        let logits = self.mlp.forward(&input, states.len(), &mut acts)?;
        let od = self.layout.output_dim();
        let mut p = vec![0.0; self.layout.num_actions];
        for (i, &n) in options.iter().enumerate() {
            let row: Vec<f64> = logits[i * od..(i + 1) * od][self.layout.option_range(n)].iter().map(|v| v.f64()).collect();
            crate::math::softmax_into(&row, &mut p);
            out.extend_from_slice(&p);
        }
        Ok(())
    }
}

/// Hand-written options: `f(state, option, out)` fills action probabilities.
pub struct ScriptedOptions<F> {
    pub num_options: usize,
    pub f: F,
}

impl<E: Environment, F: Fn(&E::State, usize, &mut [f64]) + Sync> OptionPolicy<E> for ScriptedOptions<F> {
    fn num_options(&self) -> usize {
        self.num_options
    }

    fn action_probs(&self, env: &E, states: &[&E::State], options: &[usize], out: &mut Vec<f64>) -> Result<(), NnError> {
        let a = env.spec().num_actions;
        for (s, &n) in states.iter().zip(options) {
            let start = out.len();
            out.resize(start + a, 0.0);
            (self.f)(s, n, &mut out[start..]);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversityConfig {
    pub n_states: usize,
    pub n_rollouts: usize,
    pub horizon: usize,
    pub bootstrap: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiversityReport {
    pub num_options: usize,
    pub n_states: usize,
    /// First-button counts, `states x options x buttons`.
    pub counts: Vec<u64>,
    /// `f_{i|n}` pooled over states, `options x buttons`.
    pub option_freqs: Vec<f64>,
    /// `f_i`, the average of the covered options' frequencies.
    pub overall_freqs: Vec<f64>,
    pub entropy: f64,
    pub conditional_entropies: Vec<f64>,
    pub mi_marginal: f64,
    pub mi_marginal_ci95: f64,
    pub mi_state: f64,
    pub mi_state_ci95: f64,
    /// Share of (state, option) cells with at least one button hit.
    pub coverage: f64,
    /// Share of rollouts that reached no button.
    pub discarded: f64,
}

impl DiversityReport {
    /// Both estimates lie in `[0, min(Ĥ(i), ln N)]` up to `slack`.
    pub fn bounds_hold(&self, slack: f64) -> bool {
        let cap = self.entropy.min(libm::log(self.num_options as f64));
        [self.mi_marginal, self.mi_state].iter().all(|&m| m >= -slack && m <= cap + slack)
    }
}

fn normalize(c: &[u64]) -> Option<Vec<f64>> {
    let total: u64 = c.iter().sum();
    (total > 0).then(|| c.iter().map(|&x| x as f64 / total as f64).collect())
}

/// MI and `(Ĥ(i), Ĥ(i|n))` from per-option counts; options without hits
/// are skipped. `None` when no option has hits.
fn mutual_information(per_option: &[Vec<u64>]) -> Option<(f64, f64, Vec<f64>)> {
    let freqs: Vec<Vec<f64>> = per_option.iter().filter_map(|c| normalize(c)).collect();
    if freqs.is_empty() {
        return None;
    }
    let mut overall = vec![0.0; NUM_BUTTONS];
    for f in &freqs {
        for (o, v) in overall.iter_mut().zip(f) {
            *o += v / freqs.len() as f64;
        }
    }
    let h = entropy(&overall);
    let hc: Vec<f64> = freqs.iter().map(|f| entropy(f)).collect();
    let mi = h - hc.iter().sum::<f64>() / hc.len() as f64;
    Some((mi, h, hc))
}

fn pooled(counts: &[u64], states: &[usize], n: usize) -> Vec<Vec<u64>> {
    let mut out = vec![vec![0u64; NUM_BUTTONS]; n];
    for &s in states {
        for (o, row) in out.iter_mut().enumerate() {
            let base = (s * n + o) * NUM_BUTTONS;
            for i in 0..NUM_BUTTONS {
                row[i] += counts[base + i];
            }
        }
    }
    out
}

fn state_mean(counts: &[u64], states: &[usize], n: usize) -> f64 {
    let vals: Vec<f64> = states.iter().filter_map(|&s| mutual_information(&pooled(counts, &[s], n)).map(|m| m.0)).collect();
    if vals.is_empty() {
        0.0
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

/// Rolls out every option from one start state; returns first-button counts
/// per option and the number of discarded rollouts.
fn rollouts_from<P: OptionPolicy<HierElectricProcMaze>>(
    env: &HierElectricProcMaze,
    policy: &P,
    start: &HierState,
    config: &DiversityConfig,
    key: StreamKey,
) -> Result<(Vec<u64>, u64), NnError> {
    let n = policy.num_options();
    let total = n * config.n_rollouts;
    let mut rngs: Vec<_> = (0..total).map(|r| key.child(r as u64).rng()).collect();
    let mut states: Vec<HierState> = vec![start.clone(); total];
    let options: Vec<usize> = (0..total).map(|r| r / config.n_rollouts).collect();
    let mut counts = vec![0u64; n * NUM_BUTTONS];
    let mut live: Vec<usize> = (0..total).collect();
    let mut probs = Vec::new();
    let na = env.spec().num_actions;
    for _ in 0..config.horizon {
        if live.is_empty() {
            break;
        }
        probs.clear();
        let refs: Vec<&HierState> = live.iter().map(|&r| &states[r]).collect();
        let opts: Vec<usize> = live.iter().map(|&r| options[r]).collect();
        policy.action_probs(env, &refs, &opts, &mut probs)?;
        let mut still = Vec::with_capacity(live.len());
        for (j, &r) in live.iter().enumerate() {
            let a = sample_index(&probs[j * na..(j + 1) * na], rngs[r].random());
            let tr = match env.step(&states[r], a, &mut rngs[r]) {
                Ok(tr) => tr,
                Err(_) => continue,
            };
            states[r] = tr.next_state;
            if let Some(b) = env.button_at(states[r].ctrl_row, states[r].ctrl_col) {
                counts[options[r] * NUM_BUTTONS + b] += 1;
            } else if !tr.terminal {
                still.push(r);
            }
        }
        live = still;
    }
    Ok((counts, live.len() as u64))
}

pub fn option_diversity<P, X>(env: &HierElectricProcMaze, policy: &P, config: &DiversityConfig, key: StreamKey, exec: &X) -> Result<DiversityReport, NnError>
where
    P: OptionPolicy<HierElectricProcMaze>,
    X: Executor,
{
    let n = policy.num_options();
    let results = exec.map(config.n_states, |s| {
        let mut rng = key.path(&[0, s as u64]).rng();
        let start = env.start_from(env.reset(&mut rng).base);
        rollouts_from(env, policy, &start, config, key.path(&[1, s as u64]))
    });
    let mut counts = Vec::with_capacity(config.n_states * n * NUM_BUTTONS);
    let mut hits = 0u64;
    for r in results {
        let (c, _) = r?;
        hits += c.iter().sum::<u64>();
        counts.extend(c);
    }
    let all: Vec<usize> = (0..config.n_states).collect();
    let per_option = pooled(&counts, &all, n);
    let (mi_marginal, h, hc) = mutual_information(&per_option).unwrap_or((0.0, 0.0, vec![0.0; n]));
    let option_freqs: Vec<f64> = per_option.iter().flat_map(|c| normalize(c).unwrap_or_else(|| vec![0.0; NUM_BUTTONS])).collect();
    let covered: Vec<&Vec<u64>> = per_option.iter().filter(|c| c.iter().sum::<u64>() > 0).collect();
    let mut overall_freqs = vec![0.0; NUM_BUTTONS];
    for c in &covered {
        for (o, v) in overall_freqs.iter_mut().zip(normalize(c).unwrap()) {
            *o += v / covered.len() as f64;
        }
    }
    let mi_state = state_mean(&counts, &all, n);
    let cells = config.n_states * n;
    let covered_cells = (0..cells).filter(|c| counts[c * NUM_BUTTONS..(c + 1) * NUM_BUTTONS].iter().sum::<u64>() > 0).count();
    // bootstrap over start states
    let mut rng = key.child(2).rng();
    let (mut bm, mut bs) = (Vec::with_capacity(config.bootstrap), Vec::with_capacity(config.bootstrap));
    for _ in 0..config.bootstrap {
        let sample: Vec<usize> = (0..config.n_states).map(|_| rng.random_range(0..config.n_states)).collect();
        bm.push(mutual_information(&pooled(&counts, &sample, n)).map_or(0.0, |m| m.0));
        bs.push(state_mean(&counts, &sample, n));
    }
    let half = |v: &[f64]| if v.len() > 1 { 1.96 * libm::sqrt(mean_var(v).1) } else { 0.0 };
    let rollouts = (config.n_states * n * config.n_rollouts) as f64;
    Ok(DiversityReport {
        num_options: n,
        n_states: config.n_states,
        counts,
        option_freqs,
        overall_freqs,
        entropy: h,
        conditional_entropies: hc,
        mi_marginal,
        mi_marginal_ci95: half(&bm),
        mi_state,
        mi_state_ci95: half(&bs),
        coverage: if cells == 0 { 0.0 } else { covered_cells as f64 / cells as f64 },
        discarded: if rollouts == 0.0 { 0.0 } else { 1.0 - hits as f64 / rollouts },
    })
}
