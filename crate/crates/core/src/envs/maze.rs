use alloc::collections::VecDeque;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::action;
use crate::env::{EnvError, Environment, MdpSpec, Transition};
use crate::math::Scalar;
use crate::rng::Rng;

/// Wall/open layout of a `width x width` cell grid. Walls occupy whole
/// cells; passages are carved on the odd-coordinate sub-lattice.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MazeLayout {
    width: usize,
    walls: Vec<bool>,
}

impl MazeLayout {
    /// Builds a layout from row-major wall flags.
    pub fn from_walls(width: usize, walls: Vec<bool>) -> Result<Self, EnvError> {
        if walls.len() != width * width {
            return Err(EnvError::InvalidConfig("wall vector length must be width^2".into()));
        }
        Ok(MazeLayout { width, walls })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_wall(&self, cell: usize) -> bool {
        self.walls[cell]
    }

    pub fn walls(&self) -> &[bool] {
        &self.walls
    }

    pub fn open_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.walls.len()).filter(|&c| !self.walls[c])
    }

    /// Cell reached by `action`, or `None` when it would leave the grid.
    pub fn neighbor(&self, cell: usize, action: usize) -> Option<usize> {
        let (r, c) = (cell / self.width, cell % self.width);
        let (dr, dc) = action::delta(action);
        let (nr, nc) = (r as isize + dr, c as isize + dc);
        if nr < 0 || nc < 0 || nr >= self.width as isize || nc >= self.width as isize {
            return None;
        }
        Some(nr as usize * self.width + nc as usize)
    }

    /// BFS distances through open cells from `from` (`usize::MAX` if unreachable).
    pub fn open_distances(&self, from: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.walls.len()];
        let mut queue = VecDeque::new();
        dist[from] = 0;
        queue.push_back(from);
        while let Some(cell) = queue.pop_front() {
            for a in 0..4 {
                if let Some(n) = self.neighbor(cell, a) {
                    if !self.walls[n] && dist[n] == usize::MAX {
                        dist[n] = dist[cell] + 1;
                        queue.push_back(n);
                    }
                }
            }
        }
        dist
    }
}

/// Randomized depth-first search maze on an odd `width >= 3` grid.
pub fn generate_layout(width: usize, rng: &mut Rng) -> Result<MazeLayout, EnvError> {
    if width < 3 || width.is_multiple_of(2) {
        return Err(EnvError::InvalidConfig("maze width must be odd and at least 3".into()));
    }
    let nodes = (width - 1) / 2;
    let mut walls = vec![true; width * width];
    let mut visited = vec![false; nodes * nodes];
    let cell_of = |nr: usize, nc: usize| (2 * nr + 1) * width + 2 * nc + 1;

    let start = rng.random_range(0..nodes * nodes);
    visited[start] = true;
    walls[cell_of(start / nodes, start % nodes)] = false;
    let mut stack = vec![start];
    let mut options = Vec::with_capacity(4);
    while let Some(&node) = stack.last() {
        let (nr, nc) = (node / nodes, node % nodes);
        options.clear();
        if nr > 0 && !visited[node - nodes] {
            options.push(node - nodes);
        }
        if nr + 1 < nodes && !visited[node + nodes] {
            options.push(node + nodes);
        }
        if nc > 0 && !visited[node - 1] {
            options.push(node - 1);
        }
        if nc + 1 < nodes && !visited[node + 1] {
            options.push(node + 1);
        }
        if options.is_empty() {
            stack.pop();
            continue;
        }
        let next = options[rng.random_range(0..options.len())];
        let (mr, mc) = (next / nodes, next % nodes);
        let a = cell_of(nr, nc);
        let b = cell_of(mr, mc);
        walls[(a + b) / 2] = false;
        walls[b] = false;
        visited[next] = true;
        stack.push(next);
    }
    Ok(MazeLayout { width, walls })
}

/// Largest open-path distance between any two open cells.
pub fn maze_diameter(layout: &MazeLayout) -> usize {
    layout
        .open_cells()
        .map(|c| layout.open_distances(c).into_iter().filter(|&d| d != usize::MAX).max().unwrap_or(0))
        .max()
        .unwrap_or(0)
}

/// Wall-entry penalty: one more than the largest number of steps needed to
/// reach the goal, estimated as the max diameter over `samples` mazes.
pub fn estimate_wall_penalty(width: usize, samples: usize, rng: &mut Rng) -> Result<f64, EnvError> {
    let mut worst = 0;
    for _ in 0..samples {
        worst = worst.max(maze_diameter(&generate_layout(width, rng)?));
    }
    Ok((worst + 1) as f64)
}

/// Frozen penalties from `estimate_wall_penalty(width, 10_000, seed 0)`.
pub fn default_wall_penalty(width: usize) -> Option<f64> {
    match width {
        5 => Some(7.0),
        7 => Some(17.0),
        9 => Some(31.0),
        11 => Some(49.0),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MazeState {
    pub layout: Arc<MazeLayout>,
    pub agent: usize,
    pub goal: usize,
    pub terminal: bool,
}

/// Random layout with agent and goal on distinct open cells.
pub fn generate_maze(width: usize, rng: &mut Rng) -> Result<MazeState, EnvError> {
    if width < 5 {
        return Err(EnvError::InvalidConfig("need width >= 5 for distinct start and goal".into()));
    }
    let layout = generate_layout(width, rng)?;
    let open: Vec<usize> = layout.open_cells().collect();
    let agent = open[rng.random_range(0..open.len())];
    let goal = loop {
        let g = open[rng.random_range(0..open.len())];
        if g != agent {
            break g;
        }
    };
    Ok(MazeState { layout: Arc::new(layout), agent, goal, terminal: false })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WallMode {
    /// Moves into walls leave the agent in place (ProcMaze).
    Blocking,
    /// Moves into walls succeed at the cost of `penalty` (ElectricProcMaze).
    Electric { penalty: f64 },
}

/// Procedurally generated maze navigation: -1 per step until the goal.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcMaze {
    width: usize,
    mode: WallMode,
    discount: f64,
}

impl ProcMaze {
    pub fn new(width: usize, mode: WallMode) -> Result<Self, EnvError> {
        if width < 5 || width.is_multiple_of(2) {
            return Err(EnvError::InvalidConfig("maze width must be odd and at least 5".into()));
        }
        if let WallMode::Electric { penalty } = mode {
            if !(penalty.is_finite() && penalty > 0.0) {
                return Err(EnvError::InvalidConfig("wall penalty must be positive".into()));
            }
        }
        Ok(ProcMaze { width, mode, discount: super::DEFAULT_DISCOUNT })
    }

    /// ElectricProcMaze with the frozen default penalty for `width`.
    pub fn electric(width: usize) -> Result<Self, EnvError> {
        let penalty = default_wall_penalty(width)
            .ok_or_else(|| EnvError::InvalidConfig("no frozen wall penalty for this width".into()))?;
        Self::new(width, WallMode::Electric { penalty })
    }

    pub fn with_discount(mut self, discount: f64) -> Self {
        self.discount = discount;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn mode(&self) -> WallMode {
        self.mode
    }

    /// Outcome of moving from `cell` with `action` ignoring terminality:
    /// `(next_cell, reward)`.
    pub fn move_outcome(&self, layout: &MazeLayout, cell: usize, action: usize) -> (usize, f64) {
        match layout.neighbor(cell, action) {
            None => (cell, -1.0),
            Some(n) if layout.is_wall(n) => match self.mode {
                WallMode::Blocking => (cell, -1.0),
                WallMode::Electric { penalty } => (n, -penalty),
            },
            Some(n) => (n, -1.0),
        }
    }

    /// A step that leaves the agent where it is (used by the controller
    /// environment when no base action is selected).
    pub fn step_noop(&self, state: &MazeState) -> Result<Transition<MazeState>, EnvError> {
        if state.terminal {
            return Err(EnvError::TerminalStep);
        }
        Ok(Transition { next_state: state.clone(), reward: -1.0, terminal: false })
    }
}

impl Environment for ProcMaze {
    type State = MazeState;

    fn spec(&self) -> MdpSpec {
        MdpSpec { num_actions: 4, observation_dim: 3 * self.width * self.width, discount: self.discount }
    }

    fn reset(&self, rng: &mut Rng) -> MazeState {
        generate_maze(self.width, rng).expect("width validated at construction")
    }

    fn is_terminal(&self, state: &MazeState) -> bool {
        state.terminal
    }

    fn step(&self, state: &MazeState, action: usize, _rng: &mut Rng) -> Result<Transition<MazeState>, EnvError> {
        self.check_step(state, action)?;
        let (agent, reward) = self.move_outcome(&state.layout, state.agent, action);
        let terminal = agent == state.goal;
        let next_state = MazeState { layout: state.layout.clone(), agent, goal: state.goal, terminal };
        Ok(Transition { next_state, reward, terminal })
    }

    /// Agent one-hot, goal one-hot, then wall indicators.
    fn encode<T: Scalar>(&self, state: &MazeState, out: &mut [T]) {
        let cells = self.width * self.width;
        out.iter_mut().for_each(|o| *o = T::zero());
        out[state.agent] = T::one();
        out[cells + state.goal] = T::one();
        for (o, &w) in out[2 * cells..3 * cells].iter_mut().zip(state.layout.walls()) {
            if w {
                *o = T::one();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    /// Union-find check that open cells form a spanning tree.
    fn is_perfect(layout: &MazeLayout) -> bool {
        let w = layout.width();
        let mut parent: Vec<usize> = (0..w * w).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let open: Vec<usize> = layout.open_cells().collect();
        let mut edges = 0;
        for &c in &open {
            for a in [action::DOWN, action::RIGHT] {
                if let Some(n) = layout.neighbor(c, a) {
                    if !layout.is_wall(n) {
                        edges += 1;
                        let (x, y) = (find(&mut parent, c), find(&mut parent, n));
                        if x == y {
                            return false;
                        }
                        parent[x] = y;
                    }
                }
            }
        }
        let root = find(&mut parent, open[0]);
        edges == open.len() - 1 && open.iter().all(|&c| find(&mut parent, c) == root)
    }

    #[test]
    fn dfs_mazes_are_perfect() {
        let mut rng = StreamKey::root(11).rng();
        for _ in 0..10_000 {
            let l = generate_layout(3, &mut rng).unwrap();
            assert_eq!(l.open_cells().collect::<Vec<_>>(), vec![4]);
        }
        for width in [5, 7, 9, 11] {
            for _ in 0..2_000 {
                assert!(is_perfect(&generate_layout(width, &mut rng).unwrap()));
            }
        }
        assert!(generate_layout(4, &mut rng).is_err());
    }

    #[test]
    fn start_and_goal_are_distinct_and_connected() {
        let mut rng = StreamKey::root(12).rng();
        for _ in 0..2_000 {
            let m = generate_maze(7, &mut rng).unwrap();
            assert_ne!(m.agent, m.goal);
            assert!(!m.layout.is_wall(m.goal) && !m.layout.is_wall(m.agent));
            assert_ne!(m.layout.open_distances(m.agent)[m.goal], usize::MAX);
        }
        assert!(generate_maze(3, &mut rng).is_err());
    }

    #[test]
    fn frozen_penalties_match_bfs_oracle() {
        for width in [5, 7, 9] {
            let mut rng = StreamKey::root(0).rng();
            let p = estimate_wall_penalty(width, 10_000, &mut rng).unwrap();
            assert_eq!(Some(p), default_wall_penalty(width));
        }
    }

    fn corridor() -> MazeState {
        // row 1 is open from col 1..=3, everything else wall (5x5)
        let mut walls = vec![true; 25];
        for c in 1..=3 {
            walls[5 + c] = false;
        }
        MazeState { layout: Arc::new(MazeLayout::from_walls(5, walls).unwrap()), agent: 6, goal: 8, terminal: false }
    }

    #[test]
    fn electric_step_semantics() {
        let env = ProcMaze::electric(5).unwrap();
        let mut rng = StreamKey::root(0).rng();
        let s = corridor();
        let t = env.step(&s, action::RIGHT, &mut rng).unwrap();
        assert_eq!((t.reward, t.terminal, t.next_state.agent), (-1.0, false, 7));
        let t2 = env.step(&t.next_state, action::RIGHT, &mut rng).unwrap();
        assert_eq!((t2.reward, t2.terminal), (-1.0, true));
        // into the wall and back out
        let w = env.step(&s, action::DOWN, &mut rng).unwrap();
        assert_eq!((w.reward, w.next_state.agent, w.terminal), (-7.0, 11, false));
        let back = env.step(&w.next_state, action::UP, &mut rng).unwrap();
        assert_eq!(w.reward + back.reward, -8.0);
        assert_eq!(back.next_state.agent, 6);
        // outer boundary is not electric
        let mut edge = corridor();
        edge.agent = 1;
        let b = env.step(&edge, action::UP, &mut rng).unwrap();
        assert_eq!((b.reward, b.next_state.agent), (-1.0, 1));
    }

    #[test]
    fn blocking_walls_keep_agent_in_place() {
        let env = ProcMaze::new(5, WallMode::Blocking).unwrap();
        let mut rng = StreamKey::root(0).rng();
        let t = env.step(&corridor(), action::DOWN, &mut rng).unwrap();
        assert_eq!((t.reward, t.next_state.agent), (-1.0, 6));
    }

    #[test]
    fn observation_layout() {
        let env = ProcMaze::electric(5).unwrap();
        let obs = env.observe(&corridor());
        assert_eq!(obs.len(), 75);
        assert_eq!(obs.bits()[6], 1);
        assert_eq!(obs.bits()[25 + 8], 1);
        assert_eq!(obs.bits()[50..].iter().filter(|&&b| b == 1).count(), 22);
    }
}
