//! Single policy against a mixture of directional policies on the Compass
//! posterior, where the reward edge is equally likely to be any of four.
//!
//! Every quantity is computed from explicit probability tables and an
//! explicit expectation over the four posterior hypotheses.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::log_sum_exp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CeDemoReport {
    pub states: usize,
    /// Cross-entropy of the best single policy over the state set.
    pub single_policy_ce: f64,
    /// Cross-entropy of the uniform mixture of the four directional policies.
    pub mixture_ce: f64,
    pub ratio: f64,
}

/// The four hypotheses: hypothesis `h` always takes action `h`.
fn hypothesis_action(h: usize) -> usize {
    h
}

/// Expected negative log-likelihood of the posterior's action sequences on
/// `k` states taken in row-major order from a `grid_width` grid.
pub fn posterior_ce_demo(k: usize, grid_width: usize) -> CeDemoReport {
    assert!(k >= 1 && k <= grid_width * grid_width, "state set must fit on the grid");
    let actions = 4;
    // best single policy: the posterior marginal in every state
    let mut single = vec![0.0; actions];
    for h in 0..4 {
        single[hypothesis_action(h)] += 0.25;
    }
    let mut single_ce = 0.0;
    let mut mixture_ce = 0.0;
    for h in 0..4 {
        let seq: Vec<usize> = (0..k).map(|_| hypothesis_action(h)).collect();
        single_ce -= 0.25 * seq.iter().map(|&a| libm::log(single[a])).sum::<f64>();
        let per_option: Vec<f64> = (0..4)
            .map(|n| {
                libm::log(0.25) + seq.iter().map(|&a| if a == hypothesis_action(n) { 0.0 } else { f64::NEG_INFINITY }).sum::<f64>()
            })
            .collect();
        mixture_ce -= 0.25 * log_sum_exp(&per_option);
    }
    CeDemoReport { states: k, single_policy_ce: single_ce, mixture_ce, ratio: single_ce / mixture_ce }
}

/// Probabilities of the length-`d` action sequence that heads straight to
/// the rewarding edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectPath {
    pub single_policy: f64,
    /// Under the option that matches the rewarding edge.
    pub matching_option: f64,
    /// Under the uniform mixture, including the choice of option.
    pub mixture: f64,
}

impl DirectPath {
    /// Matching option against the single policy: `4^d`.
    pub fn option_ratio(&self) -> f64 {
        self.matching_option / self.single_policy
    }

    /// Mixture against the single policy: `4^(d-1)`.
    pub fn mixture_ratio(&self) -> f64 {
        self.mixture / self.single_policy
    }
}

pub fn direct_path(d: usize) -> DirectPath {
    let single = libm::pow(0.25, d as f64);
    DirectPath { single_policy: single, matching_option: 1.0, mixture: 0.25 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let ln4 = 4f64.ln();
        for k in [1, 5, 20, 225] {
            let r = posterior_ce_demo(k, 15);
            assert!((r.single_policy_ce - k as f64 * ln4).abs() < 1e-12);
            assert!((r.mixture_ce - ln4).abs() < 1e-12);
            assert!((r.ratio - k as f64).abs() < 1e-9);
        }
        for d in 1..=3 {
            let p = direct_path(d);
            assert!((p.option_ratio() - 4f64.powi(d as i32)).abs() < 1e-9);
            assert!((p.mixture_ratio() - 4f64.powi(d as i32 - 1)).abs() < 1e-9);
        }
    }
}
