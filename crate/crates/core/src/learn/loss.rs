//! Distillation losses and value regression.
//!
//! Every loss runs one batched forward pass over all rows, computes the loss
//! and its derivative with respect to the output logits in 64-bit, and
//! backpropagates once. Losses are averaged over segments; within a segment
//! the sequence loss is divided by the number of realized steps.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::buffer::Segment;
use crate::math::{log_softmax_into, log_sum_exp, sample_index, Scalar};
use crate::nn::{Activations, HeadLayout, MlpGrads, NnError, PolicyNet, ValueNet};
use crate::rng::Rng;

/// Which policy loss the learner minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossVariant {
    /// Mixture likelihood of sampled action sequences over options.
    OptIt,
    /// Single policy on sampled action sequences.
    ExitSampledSeq,
    /// Single policy on sampled actions from independent states.
    ExitSampledIndep,
    /// Single policy, full cross-entropy with the search policy on
    /// independent states.
    ExitExactIndep,
    /// Mean of per-option sequence cross-entropies.
    MeanCe,
}

impl LossVariant {
    pub const ALL: [LossVariant; 5] = [
        LossVariant::OptIt,
        LossVariant::ExitSampledSeq,
        LossVariant::ExitSampledIndep,
        LossVariant::ExitExactIndep,
        LossVariant::MeanCe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossVariant::OptIt => "optit",
            LossVariant::ExitSampledSeq => "exit_sampled_seq",
            LossVariant::ExitSampledIndep => "exit_sampled_indep",
            LossVariant::ExitExactIndep => "exit_exact_indep",
            LossVariant::MeanCe => "mean_ce",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }

    /// Segment length used for training with rollout length `k`.
    pub fn segment_length(self, k: usize) -> usize {
        match self {
            LossVariant::ExitSampledIndep | LossVariant::ExitExactIndep => 1,
            _ => k,
        }
    }

    pub fn requires_single_option(self) -> bool {
        matches!(self, LossVariant::ExitSampledSeq | LossVariant::ExitSampledIndep | LossVariant::ExitExactIndep)
    }
}

/// Rows of a sampled batch, grouped into segments.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBatch<T> {
    pub dim: usize,
    pub num_actions: usize,
    /// `rows x dim` network inputs.
    pub inputs: Vec<T>,
    /// Row offsets of segments; `segments + 1` entries.
    pub offsets: Vec<usize>,
    /// `rows x num_actions` search policies.
    pub pi_tilde: Vec<f64>,
    pub v_tilde: Vec<f64>,
}

impl<T: Scalar> LossBatch<T> {
    pub fn new(dim: usize, num_actions: usize) -> Self {
        LossBatch { dim, num_actions, inputs: Vec::new(), offsets: vec![0], pi_tilde: Vec::new(), v_tilde: Vec::new() }
    }

    /// Appends one row to the current segment.
    pub fn push_row(&mut self, input: &[T], pi_tilde: &[f64], v_tilde: f64) {
        assert_eq!(input.len(), self.dim);
        assert_eq!(pi_tilde.len(), self.num_actions);
        self.inputs.extend_from_slice(input);
        self.pi_tilde.extend_from_slice(pi_tilde);
        self.v_tilde.push(v_tilde);
    }

    /// Closes the current segment; empty segments are not allowed.
    pub fn end_segment(&mut self) {
        let rows = self.rows();
        assert!(rows > *self.offsets.last().unwrap(), "empty segment");
        self.offsets.push(rows);
    }

    pub fn from_segments(segments: &[Segment<'_>], dim: usize, num_actions: usize) -> Self {
        let mut b = Self::new(dim, num_actions);
        let mut row = vec![T::zero(); dim];
        for s in segments {
            for e in &s.entries {
                e.observation.write_into(&mut row);
                b.push_row(&row, &e.pi_tilde, e.v_tilde);
            }
            b.end_segment();
        }
        b
    }

    pub fn rows(&self) -> usize {
        self.v_tilde.len()
    }

    pub fn segments(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn pi_row(&self, r: usize) -> &[f64] {
        &self.pi_tilde[r * self.num_actions..(r + 1) * self.num_actions]
    }

    /// One action per row, sampled from the stored search policy.
    pub fn sample_actions(&self, rng: &mut Rng) -> Vec<usize> {
        (0..self.rows()).map(|r| sample_index(self.pi_row(r), rng.random())).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput<T> {
    pub loss: f64,
    pub grads: MlpGrads<T>,
}

/// Normalized heads of one row in 64-bit.
pub(crate) struct Heads {
    /// `num_options x num_actions`.
    pub lp: Vec<f64>,
    pub lrho: Vec<f64>,
}

pub(crate) fn heads_of<T: Scalar>(row: &[T], layout: HeadLayout) -> Heads {
    let logits: Vec<f64> = row.iter().map(|v| v.f64()).collect();
    let mut lp = vec![0.0; layout.num_options * layout.num_actions];
    for n in 0..layout.num_options {
        let r = layout.option_range(n);
        log_softmax_into(&logits[r.clone()], &mut lp[r]);
    }
    let mut lrho = vec![0.0; layout.num_options];
    log_softmax_into(&logits[layout.rho_range()], &mut lrho);
    Heads { lp, lrho }
}

fn forward_rows<T: Scalar>(policy: &PolicyNet<T>, batch: &LossBatch<T>, acts: &mut Activations<T>) -> Result<Vec<Heads>, NnError> {
    if batch.num_actions != policy.layout.num_actions {
        return Err(NnError::DimensionMismatch { expected: policy.layout.num_actions, got: batch.num_actions });
    }
    let out = policy.mlp.forward(&batch.inputs, batch.rows(), acts)?;
    let d = policy.layout.output_dim();
    Ok((0..batch.rows()).map(|r| heads_of(&out[r * d..(r + 1) * d], policy.layout)).collect())
}

fn backprop<T: Scalar>(mlp_owner: &PolicyNet<T>, acts: &mut Activations<T>, d_logits: &[f64]) -> Result<MlpGrads<T>, NnError> {
    let mut grads = mlp_owner.mlp.zero_grads();
    let d: Vec<T> = d_logits.iter().map(|&v| T::of(v)).collect();
    mlp_owner.mlp.backward(acts, &d, &mut grads)?;
    Ok(grads)
}

/// Adds `g * d log_softmax(z)[target] / dz` to `dz`.
fn add_log_softmax_grad(dz: &mut [f64], log_probs: &[f64], target: usize, g: f64) {
    for (a, (d, lp)) in dz.iter_mut().zip(log_probs).enumerate() {
        let ind = if a == target { 1.0 } else { 0.0 };
        *d += g * (ind - libm::exp(*lp));
    }
}

/// Mixture sequence loss with given per-row actions:
/// `-log Σ_n ρ(n|s_0) Π_k π_n(a_k|s_k)` divided by the segment length.
pub fn optit_loss_with_actions<T: Scalar>(policy: &PolicyNet<T>, batch: &LossBatch<T>, actions: &[usize]) -> Result<LossOutput<T>, NnError> {
    let layout = policy.layout;
    let (na, no) = (layout.num_actions, layout.num_options);
    let mut acts = Activations::new();
    let heads = forward_rows(policy, batch, &mut acts)?;
    let od = layout.output_dim();
    let mut d = vec![0.0; batch.rows() * od];
    let nseg = batch.segments() as f64;
    let mut total = 0.0;
    let mut x = vec![0.0; no];
    for s in 0..batch.segments() {
        let (r0, r1) = (batch.offsets[s], batch.offsets[s + 1]);
        let len = (r1 - r0) as f64;
        x.copy_from_slice(&heads[r0].lrho);
        for r in r0..r1 {
            for (n, xn) in x.iter_mut().enumerate() {
                *xn += heads[r].lp[n * na + actions[r]];
            }
        }
        let lse = log_sum_exp(&x);
        total -= lse / len;
        let scale = 1.0 / (len * nseg);
        // d loss / d x_n = -w_n * scale
        let w: Vec<f64> = x.iter().map(|v| libm::exp(v - lse)).collect();
        let rho = &mut d[r0 * od..(r0 + 1) * od][layout.rho_range()];
        for n in 0..no {
            rho[n] += scale * (libm::exp(heads[r0].lrho[n]) - w[n]);
        }
        for r in r0..r1 {
            let row = &mut d[r * od..(r + 1) * od];
            for n in 0..no {
                let range = layout.option_range(n);
                add_log_softmax_grad(&mut row[range.clone()], &heads[r].lp[range], actions[r], -w[n] * scale);
            }
        }
    }
    Ok(LossOutput { loss: total / nseg, grads: backprop(policy, &mut acts, &d)? })
}

/// Mean over options of the per-option sequence cross-entropy. The policy
/// over options receives no gradient.
pub fn mean_ce_loss_with_actions<T: Scalar>(policy: &PolicyNet<T>, batch: &LossBatch<T>, actions: &[usize]) -> Result<LossOutput<T>, NnError> {
    let layout = policy.layout;
    let (na, no) = (layout.num_actions, layout.num_options);
    let mut acts = Activations::new();
    let heads = forward_rows(policy, batch, &mut acts)?;
    let od = layout.output_dim();
    let mut d = vec![0.0; batch.rows() * od];
    let nseg = batch.segments() as f64;
    let mut total = 0.0;
    for s in 0..batch.segments() {
        let (r0, r1) = (batch.offsets[s], batch.offsets[s + 1]);
        let len = (r1 - r0) as f64;
        let g = -1.0 / (no as f64 * len * nseg);
        let mut seg = 0.0;
        for r in r0..r1 {
            let row = &mut d[r * od..(r + 1) * od];
            for n in 0..no {
                seg += heads[r].lp[n * na + actions[r]];
                let range = layout.option_range(n);
                add_log_softmax_grad(&mut row[range.clone()], &heads[r].lp[range], actions[r], g);
            }
        }
        total -= seg / (no as f64 * len);
    }
    Ok(LossOutput { loss: total / nseg, grads: backprop(policy, &mut acts, &d)? })
}

/// Full cross-entropy `-Σ_a π̃(a|s) log π(a|s)` of a single-option policy,
/// averaged over rows within a segment and over segments.
pub fn exact_ce_loss<T: Scalar>(policy: &PolicyNet<T>, batch: &LossBatch<T>) -> Result<LossOutput<T>, NnError> {
    let layout = policy.layout;
    if layout.num_options != 1 {
        return Err(NnError::InvalidConfig("exact cross-entropy needs a single option"));
    }
    let na = layout.num_actions;
    let mut acts = Activations::new();
    let heads = forward_rows(policy, batch, &mut acts)?;
    let od = layout.output_dim();
    let mut d = vec![0.0; batch.rows() * od];
    let nseg = batch.segments() as f64;
    let mut total = 0.0;
    for s in 0..batch.segments() {
        let (r0, r1) = (batch.offsets[s], batch.offsets[s + 1]);
        let len = (r1 - r0) as f64;
        let scale = 1.0 / (len * nseg);
        for r in r0..r1 {
            let pt = batch.pi_row(r);
            let lp = &heads[r].lp;
            let row = &mut d[r * od..(r + 1) * od][layout.option_range(0)];
            let mut ce = 0.0;
            for a in 0..na {
                if pt[a] > 0.0 {
                    ce -= pt[a] * lp[a];
                }
                row[a] += scale * (libm::exp(lp[a]) - pt[a]);
            }
            total += ce / len;
        }
    }
    Ok(LossOutput { loss: total / nseg, grads: backprop(policy, &mut acts, &d)? })
}

/// Mean squared error between the value network and the stored targets,
/// averaged over all rows.
pub fn value_loss<T: Scalar>(value: &ValueNet<T>, batch: &LossBatch<T>) -> Result<LossOutput<T>, NnError> {
    let rows = batch.rows();
    let mut acts = Activations::new();
    let out = value.mlp.forward(&batch.inputs, rows, &mut acts)?;
    let mut total = 0.0;
    let mut d = Vec::with_capacity(rows);
    for (v, t) in out.iter().zip(&batch.v_tilde) {
        let e = v.f64() - t;
        total += e * e;
        d.push(T::of(2.0 * e / rows as f64));
    }
    let mut grads = value.mlp.zero_grads();
    value.mlp.backward(&mut acts, &d, &mut grads)?;
    Ok(LossOutput { loss: total / rows as f64, grads })
}

/// Policy loss of `variant`, drawing one fresh action per row when the
/// variant is sampled.
pub fn policy_loss<T: Scalar>(variant: LossVariant, policy: &PolicyNet<T>, batch: &LossBatch<T>, rng: &mut Rng) -> Result<LossOutput<T>, NnError> {
    if variant.requires_single_option() && policy.layout.num_options != 1 {
        return Err(NnError::InvalidConfig("this loss variant needs a single option"));
    }
    match variant {
        LossVariant::ExitExactIndep => exact_ce_loss(policy, batch),
        LossVariant::MeanCe => {
            let actions = batch.sample_actions(rng);
            mean_ce_loss_with_actions(policy, batch, &actions)
        }
        _ => {
            let actions = batch.sample_actions(rng);
            optit_loss_with_actions(policy, batch, &actions)
        }
    }
}

/// Convenience wrapper: the mixture loss with freshly sampled actions.
pub fn optit_loss<T: Scalar>(policy: &PolicyNet<T>, batch: &LossBatch<T>, rng: &mut Rng) -> Result<LossOutput<T>, NnError> {
    let actions = batch.sample_actions(rng);
    optit_loss_with_actions(policy, batch, &actions)
}

pub fn mean_ce_loss<T: Scalar>(policy: &PolicyNet<T>, batch: &LossBatch<T>, rng: &mut Rng) -> Result<LossOutput<T>, NnError> {
    let actions = batch.sample_actions(rng);
    mean_ce_loss_with_actions(policy, batch, &actions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::mean_var;
    use crate::nn::{AdamW, AdamWConfig, Init, MlpConfig};
    use crate::rng::StreamKey;

    const DIM: usize = 6;

    fn net(n: usize, a: usize, init: Init, seed: u64) -> PolicyNet<f64> {
        let cfg = MlpConfig::new(DIM, 2, 8).unwrap();
        PolicyNet::new(cfg, HeadLayout::new(n, a, false).unwrap(), init, &mut StreamKey::root(seed).rng())
    }

    fn random_batch(a: usize, lens: &[usize], seed: u64) -> LossBatch<f64> {
        let mut rng = StreamKey::root(seed).rng();
        let mut b = LossBatch::new(DIM, a);
        for &len in lens {
            for _ in 0..len {
                let x: Vec<f64> = (0..DIM).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
                let mut p: Vec<f64> = (0..a).map(|_| rng.random::<f64>() + 0.05).collect();
                let z: f64 = p.iter().sum();
                p.iter_mut().for_each(|v| *v /= z);
                b.push_row(&x, &p, rng.random_range(-2.0..2.0));
            }
            b.end_segment();
        }
        b
    }

    /// Output becomes input-independent: zero last-layer weights, given bias.
    fn set_output_bias(p: &mut PolicyNet<f64>, bias: &[f64]) {
        let (w, b) = p.mlp.layers_mut().last().unwrap();
        w.iter_mut().for_each(|v| *v = 0.0);
        b.copy_from_slice(bias);
    }

    #[test]
    fn uniform_heads_give_log_a() {
        let p = net(3, 4, Init::ZeroOutput, 1);
        let b = random_batch(4, &[4, 2, 1], 2);
        let l = optit_loss(&p, &b, &mut StreamKey::root(0).rng()).unwrap();
        assert!((l.loss - 4f64.ln()).abs() < 1e-12);
        let l = exact_ce_loss(&net(1, 4, Init::ZeroOutput, 1), &b).unwrap();
        assert!((l.loss - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_option_is_sampled_exit() {
        let p = net(1, 4, Init::RandomOutput(1.0), 3);
        let b = random_batch(4, &[4, 3], 4);
        let actions = b.sample_actions(&mut StreamKey::root(5).rng());
        let got = optit_loss_with_actions(&p, &b, &actions).unwrap().loss;
        let mut want = 0.0;
        for s in 0..b.segments() {
            let (r0, r1) = (b.offsets[s], b.offsets[s + 1]);
            let mut seg = 0.0;
            for r in r0..r1 {
                let out = p.forward_policy(&b.inputs[r * DIM..(r + 1) * DIM]).unwrap();
                seg -= out.option_log_probs[actions[r]];
            }
            want += seg / (r1 - r0) as f64;
        }
        want /= b.segments() as f64;
        assert!((got - want).abs() < 1e-12);
        let mce = mean_ce_loss_with_actions(&p, &b, &actions).unwrap().loss;
        assert!((got - mce).abs() < 1e-12);
    }

    #[test]
    fn directional_options_reach_log4_over_k() {
        let k = 20;
        let mut p = net(4, 4, Init::ZeroOutput, 6);
        let mut bias = vec![0.0; p.layout.output_dim()];
        for n in 0..4 {
            bias[p.layout.option_range(n).start + n] = 60.0;
        }
        set_output_bias(&mut p, &bias);
        let mut b = LossBatch::new(DIM, 4);
        for _ in 0..k {
            b.push_row(&[0.0; DIM], &[0.0, 0.0, 1.0, 0.0], 0.0);
        }
        b.end_segment();
        let l = optit_loss(&p, &b, &mut StreamKey::root(0).rng()).unwrap();
        assert!((l.loss - 4f64.ln() / k as f64).abs() < 1e-12, "{}", l.loss);
    }

    #[test]
    fn per_step_loss_ignores_segment_length() {
        let p = net(1, 4, Init::RandomOutput(1.0), 12);
        let x = [1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        let loss = |k: usize| {
            let mut b = LossBatch::new(DIM, 4);
            for _ in 0..k {
                b.push_row(&x, &[0.0, 1.0, 0.0, 0.0], 0.0);
            }
            b.end_segment();
            optit_loss(&p, &b, &mut StreamKey::root(0).rng()).unwrap().loss
        };
        let one = -p.forward_policy(&x).unwrap().option_log_probs[1];
        for k in [1, 3, 6, 12] {
            assert!((loss(k) - one).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_heads_match_mean_ce() {
        let mut p = net(3, 4, Init::ZeroOutput, 7);
        let mut bias = vec![0.0; p.layout.output_dim()];
        for n in 0..3 {
            bias[p.layout.option_range(n)].copy_from_slice(&[0.3, -1.2, 2.0, 0.1]);
        }
        set_output_bias(&mut p, &bias);
        let b = random_batch(4, &[5, 2], 8);
        let actions = b.sample_actions(&mut StreamKey::root(9).rng());
        let o = optit_loss_with_actions(&p, &b, &actions).unwrap().loss;
        let m = mean_ce_loss_with_actions(&p, &b, &actions).unwrap().loss;
        assert!((o - m).abs() < 1e-12);
    }

    #[test]
    fn mixture_bounded_by_mean_plus_log_n() {
        for seed in 0..100 {
            let n = 2 + (seed as usize % 3);
            let mut p = net(n, 4, Init::RandomOutput(2.0), seed);
            // uniform policy over options
            let rho = p.layout.rho_range();
            let (w, bias) = p.mlp.layers_mut().last().unwrap();
            let od = bias.len();
            for i in 0..w.len() / od {
                w[i * od..(i + 1) * od][rho.clone()].iter_mut().for_each(|v| *v = 0.0);
            }
            bias[rho.clone()].iter_mut().for_each(|v| *v = 0.0);
            let b = random_batch(4, &[1 + seed as usize % 5], seed + 1000);
            let actions = b.sample_actions(&mut StreamKey::root(seed).rng());
            let o = optit_loss_with_actions(&p, &b, &actions).unwrap().loss;
            let m = mean_ce_loss_with_actions(&p, &b, &actions).unwrap().loss;
            // per-step normalization divides the log N slack by the length
            assert!(o <= m + (n as f64).ln() + 1e-9, "seed {seed}: {o} > {m} + ln {n}");
        }
    }

    #[test]
    fn sampled_ce_is_unbiased_for_exact() {
        let p = net(1, 4, Init::RandomOutput(1.0), 11);
        let b = random_batch(4, &[1, 1, 1, 1, 1, 1], 12);
        let exact = exact_ce_loss(&p, &b).unwrap().loss;
        let mut rng = StreamKey::root(13).rng();
        let draws: Vec<f64> = (0..10_000)
            .map(|_| policy_loss(LossVariant::ExitSampledIndep, &p, &b, &mut rng).unwrap().loss)
            .collect();
        let (mean, var) = mean_var(&draws);
        let se = libm::sqrt(var / draws.len() as f64);
        assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact} (se {se})");
    }

    #[test]
    fn overfits_one_hot_targets() {
        let mut p = net(1, 4, Init::ZeroOutput, 14).cast::<f64>();
        let mut b = random_batch(4, &[1, 1, 1, 1], 15);
        for r in 0..4 {
            b.pi_tilde[r * 4..(r + 1) * 4].iter_mut().enumerate().for_each(|(a, v)| *v = if a == r { 1.0 } else { 0.0 });
        }
        for r in 0..4 {
            b.inputs[r * DIM..(r + 1) * DIM].iter_mut().enumerate().for_each(|(i, v)| *v = if i == r { 1.0 } else { 0.0 });
        }
        let mut opt = AdamW::new(&p.mlp, AdamWConfig::default());
        let mut rng = StreamKey::root(16).rng();
        for _ in 0..2000 {
            let l = policy_loss(LossVariant::ExitSampledIndep, &p, &b, &mut rng).unwrap();
            opt.step(&mut p.mlp, &l.grads, 1e-2);
        }
        let l = exact_ce_loss(&p, &b).unwrap().loss;
        assert!(l < 0.01, "{l}");
    }

    #[test]
    fn value_regression() {
        let cfg = MlpConfig::new(DIM, 2, 8).unwrap();
        let mut v = ValueNet::<f64>::new(cfg, Init::ZeroOutput, &mut StreamKey::root(17).rng());
        let mut b = random_batch(4, &[3, 2], 18);
        b.v_tilde.iter_mut().for_each(|t| *t = 1.5);
        assert!((value_loss(&v, &b).unwrap().loss - 2.25).abs() < 1e-12);
        let b = random_batch(4, &[3, 2], 19);
        let mut opt = AdamW::new(&v.mlp, AdamWConfig::default());
        let mut prev = f64::INFINITY;
        for _ in 0..100 {
            let l = value_loss(&v, &b).unwrap();
            assert!(l.loss < prev);
            prev = l.loss;
            opt.step(&mut v.mlp, &l.grads, 1e-3);
        }
    }

    #[test]
    fn single_option_variants_reject_mixtures() {
        let p = net(2, 4, Init::ZeroOutput, 20);
        let b = random_batch(4, &[1], 21);
        for v in [LossVariant::ExitSampledSeq, LossVariant::ExitSampledIndep, LossVariant::ExitExactIndep] {
            assert!(policy_loss(v, &p, &b, &mut StreamKey::root(0).rng()).is_err());
        }
        assert_eq!(LossVariant::from_name("mean_ce"), Some(LossVariant::MeanCe));
    }

    #[test]
    fn stable_for_extreme_logits() {
        let mut p = net(3, 4, Init::ZeroOutput, 22);
        let bias: Vec<f64> = (0..p.layout.output_dim()).map(|i| if i % 2 == 0 { 80.0 } else { -80.0 }).collect();
        set_output_bias(&mut p, &bias);
        let b = random_batch(4, &[5], 23);
        let l = optit_loss(&p, &b, &mut StreamKey::root(0).rng()).unwrap();
        assert!(l.loss.is_finite());
        assert!(l.grads.values().all(|g| g.is_finite()));
    }

    #[test]
    fn gradients_match_finite_differences() {
        use crate::nn::gradcheck::{check_gradients, jitter};
        for seed in 0..6u64 {
            let n = 1 + seed as usize % 3;
            let mut p = net(n, 4, Init::RandomOutput(1.0), 100 + seed);
            jitter(&mut p.mlp, 0.1, &mut StreamKey::root(400 + seed).rng());
            let b = random_batch(4, &[4, 3, 1], 200 + seed);
            let actions = b.sample_actions(&mut StreamKey::root(seed).rng());
            let layout = p.layout;
            let fns: [fn(&PolicyNet<f64>, &LossBatch<f64>, &[usize]) -> Result<LossOutput<f64>, NnError>; 2] =
                [optit_loss_with_actions, mean_ce_loss_with_actions];
            for f in fns {
                let g = f(&p, &b, &actions).unwrap().grads;
                let r = check_gradients(&mut p.mlp, &g, 1e-5, 1e-6, |m| {
                    f(&PolicyNet { mlp: m.clone(), layout }, &b, &actions).unwrap().loss
                });
                assert!(r.max_rel_error < 1e-4, "seed {seed}: {r:?}");
            }
            if n == 1 {
                let g = exact_ce_loss(&p, &b).unwrap().grads;
                let r = check_gradients(&mut p.mlp, &g, 1e-5, 1e-6, |m| exact_ce_loss(&PolicyNet { mlp: m.clone(), layout }, &b).unwrap().loss);
                assert!(r.max_rel_error < 1e-4, "seed {seed}: {r:?}");
            }
            let cfg = MlpConfig::new(DIM, 2, 8).unwrap();
            let mut v = ValueNet::<f64>::new(cfg, Init::RandomOutput(1.0), &mut StreamKey::root(300 + seed).rng());
            jitter(&mut v.mlp, 0.1, &mut StreamKey::root(500 + seed).rng());
            let g = value_loss(&v, &b).unwrap().grads;
            let r = check_gradients(&mut v.mlp, &g, 1e-5, 1e-4, |m| value_loss(&ValueNet { mlp: m.clone() }, &b).unwrap().loss);
            assert!(r.max_rel_error < 1e-6, "seed {seed}: {r:?}");
        }
    }
}
