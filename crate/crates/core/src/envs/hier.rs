use crate::action;
use crate::env::{EnvError, Environment, MdpSpec, Transition};
use crate::math::Scalar;
use crate::rng::Rng;

use super::maze::{MazeState, ProcMaze};

/// Size of the selected-action one-hot: four base actions plus no-op.
pub const NUM_SELECTED: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HierState {
    pub base: MazeState,
    pub ctrl_row: usize,
    pub ctrl_col: usize,
    /// Base action latched by the last button press; `None` is no-op.
    pub selected: Option<usize>,
    /// Controller steps remaining until the base environment advances.
    pub countdown: usize,
}

/// A controller grid driving an ElectricProcMaze: buttons at the centre of
/// each controller edge latch a base action, and every `controller_width`
/// controller steps the latched action is executed in the base maze.
#[derive(Debug, Clone, PartialEq)]
pub struct HierElectricProcMaze {
    base: ProcMaze,
    controller_width: usize,
}

impl HierElectricProcMaze {
    pub fn new(base: ProcMaze, controller_width: usize) -> Result<Self, EnvError> {
        if controller_width < 3 {
            return Err(EnvError::InvalidConfig("controller width must be at least 3".into()));
        }
        Ok(HierElectricProcMaze { base, controller_width })
    }

    pub fn base(&self) -> &ProcMaze {
        &self.base
    }

    pub fn controller_width(&self) -> usize {
        self.controller_width
    }

    /// Controller cell of the button for each base action, indexed by action.
    pub fn buttons(&self) -> [(usize, usize); 4] {
        let c = self.controller_width;
        let mid = c / 2;
        let mut out = [(0, 0); 4];
        out[action::UP] = (0, mid);
        out[action::DOWN] = (c - 1, mid);
        out[action::LEFT] = (mid, 0);
        out[action::RIGHT] = (mid, c - 1);
        out
    }

    pub fn button_at(&self, row: usize, col: usize) -> Option<usize> {
        self.buttons().iter().position(|&b| b == (row, col))
    }

    pub fn center(&self) -> (usize, usize) {
        (self.controller_width / 2, self.controller_width / 2)
    }

    /// Start configuration for a given base state.
    pub fn start_from(&self, base: MazeState) -> HierState {
        let (ctrl_row, ctrl_col) = self.center();
        HierState { base, ctrl_row, ctrl_col, selected: None, countdown: self.controller_width }
    }
}

impl Environment for HierElectricProcMaze {
    type State = HierState;

    fn spec(&self) -> MdpSpec {
        let c = self.controller_width;
        let base = self.base.spec();
        MdpSpec {
            num_actions: 4,
            observation_dim: base.observation_dim + c * c + NUM_SELECTED + c,
            discount: base.discount,
        }
    }

    fn reset(&self, rng: &mut Rng) -> HierState {
        self.start_from(self.base.reset(rng))
    }

    fn is_terminal(&self, state: &HierState) -> bool {
        state.base.terminal
    }

    fn step(&self, state: &HierState, action: usize, rng: &mut Rng) -> Result<Transition<HierState>, EnvError> {
        self.check_step(state, action)?;
        let c = self.controller_width as isize;
        let (dr, dc) = action::delta(action);
        let row = (state.ctrl_row as isize + dr).clamp(0, c - 1) as usize;
        let col = (state.ctrl_col as isize + dc).clamp(0, c - 1) as usize;
        let mut next = HierState { base: state.base.clone(), ctrl_row: row, ctrl_col: col, ..*state };
        if let Some(b) = self.button_at(row, col) {
            next.selected = Some(b);
        }
        next.countdown -= 1;
        if next.countdown > 0 {
            return Ok(Transition { next_state: next, reward: 0.0, terminal: false });
        }
        let base = match next.selected {
            Some(a) => self.base.step(&next.base, a, rng)?,
            None => self.base.step_noop(&next.base)?,
        };
        next.base = base.next_state;
        next.selected = None;
        next.countdown = self.controller_width;
        Ok(Transition { next_state: next, reward: base.reward, terminal: base.terminal })
    }

    fn encode<T: Scalar>(&self, state: &HierState, out: &mut [T]) {
        let c = self.controller_width;
        let base_dim = self.base.spec().observation_dim;
        self.base.encode(&state.base, &mut out[..base_dim]);
        let rest = &mut out[base_dim..];
        rest.iter_mut().for_each(|o| *o = T::zero());
        rest[state.ctrl_row * c + state.ctrl_col] = T::one();
        rest[c * c + state.selected.unwrap_or(4)] = T::one();
        rest[c * c + NUM_SELECTED + state.countdown - 1] = T::one();
    }
}
