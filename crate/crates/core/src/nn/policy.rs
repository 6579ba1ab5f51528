use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use super::mlp::{Activations, Init, Mlp, MlpConfig};
use super::NnError;
use crate::math::{log_softmax_into, Scalar};
use crate::rng::Rng;

/// Column layout of the policy network output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadLayout {
    pub num_options: usize,
    pub num_actions: usize,
    /// Whether an extra `num_options`-wide termination head is present.
    pub termination: bool,
}

impl HeadLayout {
    pub fn new(num_options: usize, num_actions: usize, termination: bool) -> Result<Self, NnError> {
        if num_options == 0 || num_actions == 0 {
            return Err(NnError::InvalidConfig("heads need at least one option and one action"));
        }
        Ok(HeadLayout { num_options, num_actions, termination })
    }

    pub fn output_dim(&self) -> usize {
        self.num_options * self.num_actions + self.num_options + if self.termination { self.num_options } else { 0 }
    }

    pub fn option_range(&self, n: usize) -> Range<usize> {
        n * self.num_actions..(n + 1) * self.num_actions
    }

    pub fn rho_range(&self) -> Range<usize> {
        let s = self.num_options * self.num_actions;
        s..s + self.num_options
    }

    pub fn termination_range(&self) -> Range<usize> {
        let s = self.num_options * self.num_actions + self.num_options;
        s..s + if self.termination { self.num_options } else { 0 }
    }
}

/// Log-probabilities produced by the policy network for one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput<T> {
    /// `num_options x num_actions`, row-major.
    pub option_log_probs: Vec<T>,
    pub rho_log_probs: Vec<T>,
    /// Raw termination logits (empty without a termination head).
    pub termination_logits: Vec<T>,
}

/// Option policies and the policy over options on a shared trunk.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet<T> {
    pub mlp: Mlp<T>,
    pub layout: HeadLayout,
}

impl<T: Scalar> PolicyNet<T> {
    pub fn new(config: MlpConfig, layout: HeadLayout, init: Init, rng: &mut Rng) -> Self {
        PolicyNet { mlp: Mlp::new(config, layout.output_dim(), init, rng), layout }
    }

    pub fn input_dim(&self) -> usize {
        self.mlp.input_dim()
    }

    /// Splits a raw output row into normalized heads.
    pub fn heads_from_logits(&self, logits: &[T]) -> PolicyOutput<T> {
        let l = self.layout;
        let mut option_log_probs = vec![T::zero(); l.num_options * l.num_actions];
        for n in 0..l.num_options {
            let r = l.option_range(n);
            log_softmax_into(&logits[r.clone()], &mut option_log_probs[r]);
        }
        let mut rho_log_probs = vec![T::zero(); l.num_options];
        log_softmax_into(&logits[l.rho_range()], &mut rho_log_probs);
        PolicyOutput { option_log_probs, rho_log_probs, termination_logits: logits[l.termination_range()].to_vec() }
    }

    /// Single-observation forward pass.
    pub fn forward_policy(&self, observation: &[T]) -> Result<PolicyOutput<T>, NnError> {
        let mut acts = Activations::new();
        let logits = self.mlp.forward(observation, 1, &mut acts)?;
        Ok(self.heads_from_logits(logits))
    }

    pub fn cast<U: Scalar>(&self) -> PolicyNet<U> {
        PolicyNet { mlp: self.mlp.cast(), layout: self.layout }
    }
}

/// State-value network: observation to scalar. The value of the terminal
/// state is zero and is never queried from the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueNet<T> {
    pub mlp: Mlp<T>,
}

impl<T: Scalar> ValueNet<T> {
    pub fn new(config: MlpConfig, init: Init, rng: &mut Rng) -> Self {
        ValueNet { mlp: Mlp::new(config, 1, init, rng) }
    }

    pub fn forward_value(&self, observation: &[T]) -> Result<T, NnError> {
        let mut acts = Activations::new();
        Ok(self.mlp.forward(observation, 1, &mut acts)?[0])
    }

    pub fn cast<U: Scalar>(&self) -> ValueNet<U> {
        ValueNet { mlp: self.mlp.cast() }
    }
}
