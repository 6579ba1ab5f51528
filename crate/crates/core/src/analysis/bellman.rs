//! Exact tabular solutions on a single maze instance: the action values of
//! the uniform random policy by a direct linear solve, and optimal action
//! values by value iteration.

use alloc::vec;
use alloc::vec::Vec;

use crate::envs::{MazeState, ProcMaze};
use crate::math::argmax;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BellmanError {
    #[error("maze too large to enumerate (width {0} > 9)")]
    TooLarge(usize),
    #[error("linear system is singular")]
    Singular,
    #[error("value iteration did not converge (residual {0:e})")]
    NoConvergence(f64),
}

/// Deterministic finite MDP with an absorbing terminal outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    pub num_states: usize,
    pub num_actions: usize,
    /// `states x actions`; `None` is the terminal outcome.
    pub next: Vec<Option<usize>>,
    pub reward: Vec<f64>,
    pub discount: f64,
}

impl TabularMdp {
    /// The maze instance of `state` with every non-goal cell as a state;
    /// the cell id is the state id and the goal is terminal.
    pub fn from_maze(env: &ProcMaze, state: &MazeState, discount: f64) -> Result<Self, BellmanError> {
        let w = env.width();
        if w > 9 {
            return Err(BellmanError::TooLarge(w));
        }
        let cells = w * w;
        let mut next = Vec::with_capacity(cells * 4);
        let mut reward = Vec::with_capacity(cells * 4);
        for cell in 0..cells {
            for a in 0..4 {
                let (to, r) = env.move_outcome(&state.layout, cell, a);
                next.push(if to == state.goal || cell == state.goal { None } else { Some(to) });
                reward.push(if cell == state.goal { 0.0 } else { r });
            }
        }
        Ok(TabularMdp { num_states: cells, num_actions: 4, next, reward, discount })
    }

    fn backup(&self, values: &[f64], s: usize, a: usize) -> f64 {
        let i = s * self.num_actions + a;
        self.reward[i] + self.next[i].map_or(0.0, |t| self.discount * values[t])
    }

    pub fn q_from_values(&self, values: &[f64]) -> TabularQ {
        let q = (0..self.num_states).flat_map(|s| (0..self.num_actions).map(move |a| (s, a))).map(|(s, a)| self.backup(values, s, a)).collect();
        TabularQ { num_states: self.num_states, num_actions: self.num_actions, q }
    }
}

/// Action values of an enumerated MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularQ {
    pub num_states: usize,
    pub num_actions: usize,
    pub q: Vec<f64>,
}

impl TabularQ {
    pub fn row(&self, s: usize) -> &[f64] {
        &self.q[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn greedy(&self, s: usize) -> usize {
        argmax(self.row(s))
    }

    /// Max Bellman residual under the uniform random policy.
    pub fn random_policy_residual(&self, mdp: &TabularMdp) -> f64 {
        let v: Vec<f64> = (0..self.num_states).map(|s| self.row(s).iter().sum::<f64>() / self.num_actions as f64).collect();
        self.residual_against(mdp, &v)
    }

    /// Max Bellman optimality residual.
    pub fn optimality_residual(&self, mdp: &TabularMdp) -> f64 {
        let v: Vec<f64> = (0..self.num_states).map(|s| self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
        self.residual_against(mdp, &v)
    }

    fn residual_against(&self, mdp: &TabularMdp, v: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                worst = worst.max(libm::fabs(self.row(s)[a] - mdp.backup(v, s, a)));
            }
        }
        worst
    }
}

/// Solves `A x = b` in place by Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Result<Vec<f64>, BellmanError> {
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| libm::fabs(a[i * n + col]).total_cmp(&libm::fabs(a[j * n + col]))).unwrap();
        if libm::fabs(a[pivot * n + col]) < 1e-300 {
            return Err(BellmanError::Singular);
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            b.swap(pivot, col);
        }
        let p = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / p;
            if f != 0.0 {
                for k in col..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row * n + k] * x[k];
        }
        x[row] = s / a[row * n + row];
    }
    Ok(x)
}

/// `q_π` of the uniform random policy by solving `(I - γ P_π) v = r_π`.
pub fn solve_random_policy_q(mdp: &TabularMdp) -> Result<TabularQ, BellmanError> {
    let (n, na) = (mdp.num_states, mdp.num_actions);
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    let p = 1.0 / na as f64;
    for s in 0..n {
        a[s * n + s] += 1.0;
        for act in 0..na {
            let i = s * na + act;
            b[s] += p * mdp.reward[i];
            if let Some(t) = mdp.next[i] {
                a[s * n + t] -= p * mdp.discount;
            }
        }
    }
    let v = solve_linear(a, b, n)?;
    let q = mdp.q_from_values(&v);
    let residual = q.random_policy_residual(mdp);
    if residual > 1e-8 {
        return Err(BellmanError::NoConvergence(residual));
    }
    Ok(q)
}

/// Optimal action values by value iteration to a residual below `tol`.
pub fn value_iteration(mdp: &TabularMdp, tol: f64, max_iters: usize) -> Result<TabularQ, BellmanError> {
    let mut v = vec![0.0; mdp.num_states];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        residual = 0.0;
        for s in 0..mdp.num_states {
            let best = (0..mdp.num_actions).map(|a| mdp.backup(&v, s, a)).fold(f64::NEG_INFINITY, f64::max);
            residual = residual.max(libm::fabs(best - v[s]));
            v[s] = best;
        }
        if residual < tol {
            return Ok(mdp.q_from_values(&v));
        }
    }
    Err(BellmanError::NoConvergence(residual))
}

/// Path of a greedy policy from one start cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyPath {
    pub cells: Vec<usize>,
    pub reached_goal: bool,
    pub entered_wall: bool,
}

/// Follows the greedy policy of `q` from `start` until the goal, a repeated
/// cell, or `max_steps`.
pub fn greedy_path(mdp: &TabularMdp, q: &TabularQ, walls: &[bool], start: usize, max_steps: usize) -> GreedyPath {
    let mut cells = vec![start];
    let mut seen = vec![false; mdp.num_states];
    seen[start] = true;
    let mut s = start;
    let mut entered_wall = false;
    for _ in 0..max_steps {
        match mdp.next[s * mdp.num_actions + q.greedy(s)] {
            None => return GreedyPath { cells, reached_goal: true, entered_wall },
            Some(t) => {
                entered_wall |= walls[t];
                cells.push(t);
                if seen[t] {
                    break;
                }
                seen[t] = true;
                s = t;
            }
        }
    }
    GreedyPath { cells, reached_goal: false, entered_wall }
}

/// Whether the greedy policy of `q` enters a wall cell from any open start.
pub fn greedy_enters_wall(mdp: &TabularMdp, q: &TabularQ, state: &MazeState) -> bool {
    let walls = state.layout.walls();
    state
        .layout
        .open_cells()
        .filter(|&c| c != state.goal)
        .any(|c| greedy_path(mdp, q, walls, c, mdp.num_states).entered_wall)
}
