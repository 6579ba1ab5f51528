//! Trajectory likelihood under options with learned termination.
//!
//! The current option `n` emits `a_k` with `π_n(a_k|s_k)`. On arrival in
//! `s_{k+1}` it terminates with `ψ_n(s_{k+1})`, after which a fresh option is
//! drawn from `ρ(·|s_{k+1})`. The marginal over option sequences is the
//! forward recursion
//!
//! ```text
//! φ_0(n)     = ρ(n|s_0)
//! φ_{k+1}(n) = (Σ_m φ_k(m) π_m(a_k|s_k) ψ_m(s_{k+1})) ρ(n|s_{k+1})
//!            + φ_k(n) π_n(a_k|s_k) (1 - ψ_n(s_{k+1}))
//! ```
//!
//! and the likelihood is `Σ_n φ_K(n)`. Everything here runs in log space.

use alloc::vec;
use alloc::vec::Vec;

use crate::learn::heads_of;
use crate::math::{log_add_exp, log_sum_exp, Scalar};
use crate::nn::{Activations, MlpGrads, NnError, PolicyNet};

/// Termination probabilities are clamped to `[PSI_CLAMP, 1 - PSI_CLAMP]`.
pub const PSI_CLAMP: f64 = 1e-6;

/// Largest trajectory length and option count the enumeration accepts.
pub const BRUTE_FORCE_MAX_K: usize = 8;
pub const BRUTE_FORCE_MAX_N: usize = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TerminationError {
    #[error("trajectory must contain at least one action")]
    EmptyTrajectory,
    #[error("brute-force enumeration is limited to K <= 8 and N <= 4 (got K = {k}, N = {n})")]
    TooLarge { k: usize, n: usize },
    #[error("policy network has no termination head")]
    NoTerminationHead,
    #[error("inconsistent table shapes")]
    Shape,
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Per-step log-factors of one trajectory with `K` actions and `N` options.
/// Row `k` of each table is indexed by option.
#[derive(Debug, Clone, PartialEq)]
pub struct LogTables {
    pub steps: usize,
    pub options: usize,
    /// `log ρ(n|s_k)` for `k = 0..=K`.
    pub log_rho: Vec<f64>,
    /// `log π_n(a_k|s_k)` for `k = 0..K`.
    pub log_pi: Vec<f64>,
    /// `log ψ_n(s_k)` for `k = 0..=K`; row 0 is unused.
    pub log_term: Vec<f64>,
    /// `log(1 - ψ_n(s_k))` for `k = 0..=K`; row 0 is unused.
    pub log_cont: Vec<f64>,
}

impl LogTables {
    pub fn zeros(steps: usize, options: usize) -> Self {
        LogTables {
            steps,
            options,
            log_rho: vec![0.0; (steps + 1) * options],
            log_pi: vec![0.0; steps * options],
            log_term: vec![0.0; (steps + 1) * options],
            log_cont: vec![0.0; (steps + 1) * options],
        }
    }

    /// Builds tables from probabilities: `rho` and `psi` are `(K+1) x N`,
    /// `pi_taken` is `K x N` (probability of the taken action per option).
    /// `psi` is clamped.
    pub fn from_probs(steps: usize, options: usize, rho: &[f64], pi_taken: &[f64], psi: &[f64]) -> Result<Self, TerminationError> {
        if steps == 0 {
            return Err(TerminationError::EmptyTrajectory);
        }
        let big = (steps + 1) * options;
        if rho.len() != big || psi.len() != big || pi_taken.len() != steps * options {
            return Err(TerminationError::Shape);
        }
        let psi: Vec<f64> = psi.iter().map(|p| p.clamp(PSI_CLAMP, 1.0 - PSI_CLAMP)).collect();
        Ok(LogTables {
            steps,
            options,
            log_rho: rho.iter().map(|p| libm::log(*p)).collect(),
            log_pi: pi_taken.iter().map(|p| libm::log(*p)).collect(),
            log_term: psi.iter().map(|p| libm::log(*p)).collect(),
            log_cont: psi.iter().map(|p| libm::log1p(-*p)).collect(),
        })
    }

    fn row(v: &[f64], k: usize, n: usize) -> &[f64] {
        &v[k * n..(k + 1) * n]
    }
}

/// `log φ_k(n)` for `k = 0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiTable {
    pub steps: usize,
    pub options: usize,
    pub log_phi: Vec<f64>,
    /// Per step: the log of the mass that terminates into `s_{k+1}`.
    log_switch: Vec<f64>,
    /// Mixing operations performed (one per option and term per step).
    pub mix_ops: usize,
}

impl PhiTable {
    pub fn row(&self, k: usize) -> &[f64] {
        &self.log_phi[k * self.options..(k + 1) * self.options]
    }

    pub fn log_likelihood(&self) -> f64 {
        log_sum_exp(self.row(self.steps))
    }
}

/// Runs the forward recursion. Strictly sequential in `k`.
pub fn forward(t: &LogTables) -> Result<PhiTable, TerminationError> {
    let (kk, n) = (t.steps, t.options);
    if kk == 0 {
        return Err(TerminationError::EmptyTrajectory);
    }
    let mut log_phi = vec![0.0; (kk + 1) * n];
    log_phi[..n].copy_from_slice(LogTables::row(&t.log_rho, 0, n));
    let mut log_switch = vec![0.0; kk];
    let mut mix_ops = 0;
    let mut y = vec![0.0; n];
    for k in 0..kk {
        let (head, tail) = log_phi.split_at_mut((k + 1) * n);
        let cur = &head[k * n..];
        let next = &mut tail[..n];
        let lp = LogTables::row(&t.log_pi, k, n);
        let lt = LogTables::row(&t.log_term, k + 1, n);
        let lu = LogTables::row(&t.log_cont, k + 1, n);
        let lr = LogTables::row(&t.log_rho, k + 1, n);
        for m in 0..n {
            y[m] = cur[m] + lp[m] + lt[m];
        }
        let c = log_sum_exp(&y);
        log_switch[k] = c;
        for m in 0..n {
            next[m] = log_add_exp(c + lr[m], cur[m] + lp[m] + lu[m]);
        }
        mix_ops += 2 * n;
    }
    Ok(PhiTable { steps: kk, options: n, log_phi, log_switch, mix_ops })
}

/// `log Σ_n φ_K(n)`.
pub fn trajectory_log_likelihood(t: &LogTables) -> Result<f64, TerminationError> {
    Ok(forward(t)?.log_likelihood())
}

fn weight(x: f64, total: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        0.0
    } else {
        libm::exp(x - total)
    }
}

/// Gradient of the log-likelihood with respect to every table entry.
pub fn backward(t: &LogTables, phi: &PhiTable) -> LogTables {
    let (kk, n) = (t.steps, t.options);
    let mut g = LogTables::zeros(kk, n);
    let total = phi.log_likelihood();
    let mut adj: Vec<f64> = phi.row(kk).iter().map(|&a| weight(a, total)).collect();
    let mut prev = vec![0.0; n];
    for k in (0..kk).rev() {
        let cur = phi.row(k);
        let next = phi.row(k + 1);
        let c = phi.log_switch[k];
        let lp = LogTables::row(&t.log_pi, k, n);
        let lt = LogTables::row(&t.log_term, k + 1, n);
        let lu = LogTables::row(&t.log_cont, k + 1, n);
        let lr = LogTables::row(&t.log_rho, k + 1, n);
        let mut dc = 0.0;
        for m in 0..n {
            let w1 = weight(c + lr[m], next[m]);
            let w2 = weight(cur[m] + lp[m] + lu[m], next[m]);
            dc += adj[m] * w1;
            g.log_rho[(k + 1) * n + m] += adj[m] * w1;
            g.log_cont[(k + 1) * n + m] += adj[m] * w2;
            prev[m] = adj[m] * w2;
        }
        for m in 0..n {
            let s = weight(cur[m] + lp[m] + lt[m], c) * dc;
            g.log_term[(k + 1) * n + m] += s;
            prev[m] += s;
            g.log_pi[k * n + m] += prev[m];
        }
        core::mem::swap(&mut adj, &mut prev);
    }
    for m in 0..n {
        g.log_rho[m] += adj[m];
    }
    g
}

/// Exact likelihood by enumerating every termination pattern over
/// `s_1..s_{K-1}` and every option assignment to the resulting segments.
pub fn brute_force_log_likelihood(t: &LogTables) -> Result<f64, TerminationError> {
    let (kk, n) = (t.steps, t.options);
    if kk == 0 {
        return Err(TerminationError::EmptyTrajectory);
    }
    if kk > BRUTE_FORCE_MAX_K || n > BRUTE_FORCE_MAX_N {
        return Err(TerminationError::TooLarge { k: kk, n });
    }
    let p = |v: &[f64], k: usize, m: usize| libm::exp(v[k * n + m]);
    let mut total = 0.0;
    for pattern in 0u32..(1 << (kk - 1)) {
        let breaks = |j: usize| pattern & (1 << (j - 1)) != 0;
        let segments = 1 + pattern.count_ones() as usize;
        let mut assign = vec![0usize; segments];
        loop {
            // option at step k follows the segment containing k
            let mut prob = p(&t.log_rho, 0, assign[0]);
            let mut seg = 0;
            for k in 0..kk {
                if k > 0 {
                    let prev = assign[seg];
                    if breaks(k) {
                        seg += 1;
                        prob *= p(&t.log_term, k, prev) * p(&t.log_rho, k, assign[seg]);
                    } else {
                        prob *= p(&t.log_cont, k, prev);
                    }
                }
                prob *= p(&t.log_pi, k, assign[seg]);
            }
            total += prob;
            // next assignment in mixed radix
            let mut i = 0;
            while i < segments {
                assign[i] += 1;
                if assign[i] < n {
                    break;
                }
                assign[i] = 0;
                i += 1;
            }
            if i == segments {
                break;
            }
        }
    }
    Ok(libm::log(total))
}

/// A trajectory `(s_0, a_0, ..., s_K)` as network inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub dim: usize,
    /// `(K+1) x dim`.
    pub inputs: Vec<T>,
    pub actions: Vec<usize>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(dim: usize, inputs: Vec<T>, actions: Vec<usize>) -> Result<Self, TerminationError> {
        if actions.is_empty() {
            return Err(TerminationError::EmptyTrajectory);
        }
        if inputs.len() != (actions.len() + 1) * dim {
            return Err(TerminationError::Shape);
        }
        Ok(Trajectory { dim, inputs, actions })
    }

    pub fn steps(&self) -> usize {
        self.actions.len()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Clamped termination probabilities from raw termination logits.
pub fn termination_probs(logits: &[f64]) -> Vec<f64> {
    logits.iter().map(|&z| sigmoid(z).clamp(PSI_CLAMP, 1.0 - PSI_CLAMP)).collect()
}

/// Tables for one trajectory from a single batched forward pass, plus the
/// raw heads needed for backpropagation.
fn tables_from_rows<T: Scalar>(policy: &PolicyNet<T>, rows: &[T], actions: &[usize]) -> (LogTables, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let layout = policy.layout;
    let (kk, n, na) = (actions.len(), layout.num_options, layout.num_actions);
    let od = layout.output_dim();
    let mut t = LogTables::zeros(kk, n);
    let mut lps = Vec::with_capacity(kk + 1);
    let mut psis = Vec::with_capacity(kk + 1);
    for k in 0..=kk {
        let row = &rows[k * od..(k + 1) * od];
        let h = heads_of(row, layout);
        t.log_rho[k * n..(k + 1) * n].copy_from_slice(&h.lrho);
        if k < kk {
            for m in 0..n {
                t.log_pi[k * n + m] = h.lp[m * na + actions[k]];
            }
        }
        let z: Vec<f64> = row[layout.termination_range()].iter().map(|v| v.f64()).collect();
        let psi = termination_probs(&z);
        for m in 0..n {
            t.log_term[k * n + m] = libm::log(psi[m]);
            t.log_cont[k * n + m] = libm::log1p(-psi[m]);
        }
        lps.push(h.lp);
        psis.push(psi);
    }
    (t, lps, psis)
}

/// Log-likelihood of one trajectory under the network's heads.
pub fn network_log_likelihood<T: Scalar>(policy: &PolicyNet<T>, traj: &Trajectory<T>) -> Result<f64, TerminationError> {
    if !policy.layout.termination {
        return Err(TerminationError::NoTerminationHead);
    }
    let mut acts = Activations::new();
    let out = policy.mlp.forward(&traj.inputs, traj.steps() + 1, &mut acts)?;
    let (t, _, _) = tables_from_rows(policy, out, &traj.actions);
    trajectory_log_likelihood(&t)
}

/// Per-option termination probabilities for one observation.
pub fn psi_of<T: Scalar>(policy: &PolicyNet<T>, observation: &[T]) -> Result<Vec<f64>, TerminationError> {
    if !policy.layout.termination {
        return Err(TerminationError::NoTerminationHead);
    }
    let out = policy.forward_policy(observation)?;
    let z: Vec<f64> = out.termination_logits.iter().map(|v| v.f64()).collect();
    Ok(termination_probs(&z))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerminationLoss<T> {
    pub loss: f64,
    pub grads: MlpGrads<T>,
    pub mix_ops: usize,
}

/// Mean negative log-likelihood over the batch, with gradients through the
/// unrolled recursion into the option, selection and termination heads.
pub fn termination_loss<T: Scalar>(policy: &PolicyNet<T>, batch: &[Trajectory<T>]) -> Result<TerminationLoss<T>, TerminationError> {
    let layout = policy.layout;
    if !layout.termination {
        return Err(TerminationError::NoTerminationHead);
    }
    if batch.is_empty() {
        return Err(TerminationError::EmptyTrajectory);
    }
    let (n, na, od) = (layout.num_options, layout.num_actions, layout.output_dim());
    let scale = 1.0 / batch.len() as f64;
    let mut grads = policy.mlp.zero_grads();
    let mut acts = Activations::new();
    let mut loss = 0.0;
    let mut mix_ops = 0;
    for traj in batch {
        let kk = traj.steps();
        let out = policy.mlp.forward(&traj.inputs, kk + 1, &mut acts)?;
        let (t, lps, psis) = tables_from_rows(policy, out, &traj.actions);
        let phi = forward(&t)?;
        loss -= phi.log_likelihood() * scale;
        mix_ops += phi.mix_ops;
        let g = backward(&t, &phi);
        let mut d = vec![0.0; (kk + 1) * od];
        for k in 0..=kk {
            let row = &mut d[k * od..(k + 1) * od];
            // log-softmax of the selection head
            let gr = &g.log_rho[k * n..(k + 1) * n];
            let sum: f64 = gr.iter().sum();
            let lrho = &t.log_rho[k * n..(k + 1) * n];
            for (m, dz) in row[layout.rho_range()].iter_mut().enumerate() {
                *dz -= scale * (gr[m] - libm::exp(lrho[m]) * sum);
            }
            if k < kk {
                for m in 0..n {
                    let gm = g.log_pi[k * n + m];
                    let lp = &lps[k][m * na..(m + 1) * na];
                    for (a, dz) in row[layout.option_range(m)].iter_mut().enumerate() {
                        let ind = if a == traj.actions[k] { 1.0 } else { 0.0 };
                        *dz -= scale * gm * (ind - libm::exp(lp[a]));
                    }
                }
            }
            if k > 0 {
                for (m, dz) in row[layout.termination_range()].iter_mut().enumerate() {
                    let psi = psis[k][m];
                    if psi <= PSI_CLAMP || psi >= 1.0 - PSI_CLAMP {
                        continue;
                    }
                    let gt = g.log_term[k * n + m] * (1.0 - psi) - g.log_cont[k * n + m] * psi;
                    *dz -= scale * gt;
                }
            }
        }
        let d: Vec<T> = d.into_iter().map(T::of).collect();
        policy.mlp.backward(&mut acts, &d, &mut grads)?;
    }
    Ok(TerminationLoss { loss, grads, mix_ops })
}
