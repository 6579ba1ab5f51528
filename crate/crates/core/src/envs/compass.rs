use crate::action;
use crate::env::{EnvError, Environment, MdpSpec, Transition};
use crate::math::Scalar;
use crate::rng::Rng;
use rand::Rng as _;

/// Edge of the grid carrying the positive reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Edge {
    North,
    South,
    West,
    East,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::North, Edge::South, Edge::West, Edge::East];

    /// The action that moves straight toward this edge.
    pub fn action(self) -> usize {
        match self {
            Edge::North => action::UP,
            Edge::South => action::DOWN,
            Edge::West => action::LEFT,
            Edge::East => action::RIGHT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompassState {
    pub row: usize,
    pub col: usize,
    /// Hidden from the observation.
    pub reward_edge: Edge,
    pub terminal: bool,
}

/// Square grid where entering any edge cell terminates the episode with +1
/// on the (unobserved) reward edge and -1 on the other three.
#[derive(Debug, Clone, PartialEq)]
pub struct Compass {
    width: usize,
    discount: f64,
}

impl Compass {
    pub fn new(width: usize) -> Result<Self, EnvError> {
        if width < 3 {
            return Err(EnvError::InvalidConfig("compass width must be at least 3".into()));
        }
        Ok(Compass { width, discount: super::DEFAULT_DISCOUNT })
    }

    pub fn with_discount(mut self, discount: f64) -> Self {
        self.discount = discount;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Interior cell with a chosen reward edge.
    pub fn state_at(&self, row: usize, col: usize, reward_edge: Edge) -> CompassState {
        CompassState { row, col, reward_edge, terminal: self.edge_of(row, col).is_some() }
    }

    fn edge_of(&self, row: usize, col: usize) -> Option<Edge> {
        let last = self.width - 1;
        if row == 0 {
            Some(Edge::North)
        } else if row == last {
            Some(Edge::South)
        } else if col == 0 {
            Some(Edge::West)
        } else if col == last {
            Some(Edge::East)
        } else {
            None
        }
    }

    /// Steps from `state` to the nearest cell of `edge`.
    pub fn distance_to(&self, state: &CompassState, edge: Edge) -> usize {
        match edge {
            Edge::North => state.row,
            Edge::South => self.width - 1 - state.row,
            Edge::West => state.col,
            Edge::East => self.width - 1 - state.col,
        }
    }
}

impl Environment for Compass {
    type State = CompassState;

    fn spec(&self) -> MdpSpec {
        MdpSpec { num_actions: 4, observation_dim: 2 * self.width, discount: self.discount }
    }

    fn reset(&self, rng: &mut Rng) -> CompassState {
        let row = rng.random_range(1..self.width - 1);
        let col = rng.random_range(1..self.width - 1);
        let reward_edge = Edge::ALL[rng.random_range(0..4)];
        CompassState { row, col, reward_edge, terminal: false }
    }

    fn is_terminal(&self, state: &CompassState) -> bool {
        state.terminal
    }

    fn step(&self, state: &CompassState, action: usize, _rng: &mut Rng) -> Result<Transition<CompassState>, EnvError> {
        self.check_step(state, action)?;
        let (dr, dc) = action::delta(action);
        let row = (state.row as isize + dr) as usize;
        let col = (state.col as isize + dc) as usize;
        let mut next = CompassState { row, col, reward_edge: state.reward_edge, terminal: false };
        let (reward, terminal) = match self.edge_of(row, col) {
            Some(edge) if edge == state.reward_edge => (1.0, true),
            Some(_) => (-1.0, true),
            None => (0.0, false),
        };
        next.terminal = terminal;
        Ok(Transition { next_state: next, reward, terminal })
    }

    fn encode<T: Scalar>(&self, state: &CompassState, out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
        out[state.row] = T::one();
        out[self.width + state.col] = T::one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{run_episode, EpisodeEnd};
    use crate::rng::StreamKey;
    use alloc::vec;
    use core::convert::Infallible;

    #[test]
    fn reset_is_uniform_over_interior() {
        let env = Compass::new(15).unwrap();
        let mut rng = StreamKey::root(1).rng();
        let inner = 13;
        let mut counts = vec![0u32; inner * inner];
        let n = 100_000;
        for _ in 0..n {
            let s = env.reset(&mut rng);
            assert!(!s.terminal);
            assert!((1..14).contains(&s.row) && (1..14).contains(&s.col));
            counts[(s.row - 1) * inner + s.col - 1] += 1;
        }
        let expected = n as f64 / counts.len() as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // Wilson-Hilferty upper 1% point of chi-square with 168 dof.
        let df = (counts.len() - 1) as f64;
        let a = 2.0 / (9.0 * df);
        let crit = df * (1.0 - a + 2.326_348 * a.sqrt()).powi(3);
        assert!(chi2 < crit, "chi2 {chi2} >= {crit}");
    }

    #[test]
    fn positive_and_negative_edges() {
        let env = Compass::new(15).unwrap();
        let mut rng = StreamKey::root(0).rng();
        let s = env.state_at(1, 7, Edge::North);
        let t = env.step(&s, action::UP, &mut rng).unwrap();
        assert_eq!((t.reward, t.terminal), (1.0, true));
        let t = env.step(&env.state_at(7, 1, Edge::North), action::LEFT, &mut rng).unwrap();
        assert_eq!((t.reward, t.terminal), (-1.0, true));
        let t = env.step(&env.state_at(7, 7, Edge::North), action::LEFT, &mut rng).unwrap();
        assert_eq!((t.reward, t.terminal), (0.0, false));
        assert_eq!(env.step(&t.next_state, 7, &mut rng), Err(EnvError::InvalidAction { action: 7, num_actions: 4 }));
        let done = env.step(&env.state_at(1, 7, Edge::North), action::UP, &mut rng).unwrap().next_state;
        assert_eq!(env.step(&done, action::UP, &mut rng), Err(EnvError::TerminalStep));
    }

    #[test]
    fn reward_edge_is_hidden() {
        let env = Compass::new(9).unwrap();
        let a = env.observe(&env.state_at(3, 4, Edge::East));
        let b = env.observe(&env.state_at(3, 4, Edge::West));
        assert_eq!(a, b);
        assert_eq!(a.bits().iter().filter(|&&x| x == 1).count(), 2);
    }

    #[test]
    fn optimal_policy_reaches_reward_from_every_start() {
        let env = Compass::new(15).unwrap();
        let mut rng = StreamKey::root(3).rng();
        for _ in 0..500 {
            let rec = run_episode(
                &env,
                |s: &CompassState, _, _| Ok::<_, Infallible>(s.reward_edge.action()),
                20,
                &mut rng,
            )
            .unwrap();
            assert_eq!(rec.undiscounted_return, 1.0);
            assert_eq!(rec.ended_by, EpisodeEnd::Terminal);
            let first = &rec.steps[0].state;
            assert_eq!(rec.len(), env.distance_to(first, first.reward_edge));
            assert!(rec.verify());
        }
    }

    #[test]
    fn random_policy_respects_timeout_and_is_deterministic() {
        let env = Compass::new(15).unwrap();
        let run = |seed| {
            let mut rng = StreamKey::root(seed).rng();
            run_episode(&env, |_, _, r: &mut Rng| Ok::<_, Infallible>(r.random_range(0..4)), 20, &mut rng).unwrap()
        };
        for seed in 0..200 {
            let rec = run(seed);
            assert!(rec.len() <= 20);
            match rec.ended_by {
                EpisodeEnd::Timeout => assert_eq!(rec.len(), 20),
                EpisodeEnd::Terminal => assert!(rec.final_state.terminal),
            }
            assert_eq!(rec, run(seed));
        }
    }

    #[test]
    fn always_left_from_center_with_west_reward() {
        let env = Compass::new(15).unwrap();
        let mut s = env.state_at(7, 7, Edge::West);
        let mut rng = StreamKey::root(0).rng();
        let mut ret = 0.0;
        while !s.terminal {
            let t = env.step(&s, action::LEFT, &mut rng).unwrap();
            ret += t.reward;
            s = t.next_state;
        }
        assert_eq!(ret, 1.0);
    }
}
