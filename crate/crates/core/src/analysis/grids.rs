//! Per-cell modal actions of every option head, for arrow-grid rendering.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::env::Environment;
use crate::envs::{Compass, Edge, HierElectricProcMaze, HierState, MazeState, ProcMaze};
use crate::math::Scalar;
use crate::nn::{Activations, NnError, PolicyNet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Open,
    Wall,
    Goal,
    /// Button latching the given base action.
    Button(usize),
    /// Terminal edge cell.
    Edge,
}

/// A gridworld seen as a picture: which state each cell stands for.
pub trait GridView {
    type Env: Environment;
    fn env(&self) -> &Self::Env;
    fn grid_width(&self) -> usize;
    fn cell_kind(&self, row: usize, col: usize) -> CellKind;
    /// State with the agent at the cell; `None` where nothing is drawn.
    fn state_at(&self, row: usize, col: usize) -> Option<<Self::Env as Environment>::State>;
}

/// Compass cells; the hidden reward edge does not affect observations.
pub struct CompassView {
    pub env: Compass,
}

impl GridView for CompassView {
    type Env = Compass;

    fn env(&self) -> &Compass {
        &self.env
    }

    fn grid_width(&self) -> usize {
        self.env.width()
    }

    fn cell_kind(&self, row: usize, col: usize) -> CellKind {
        if self.env.state_at(row, col, Edge::North).terminal {
            CellKind::Edge
        } else {
            CellKind::Open
        }
    }

    fn state_at(&self, row: usize, col: usize) -> Option<crate::envs::CompassState> {
        let s = self.env.state_at(row, col, Edge::North);
        (!s.terminal).then_some(s)
    }
}

/// Maze cells with the layout and goal of a fixed instance.
pub struct MazeView {
    pub env: ProcMaze,
    pub state: MazeState,
}

impl GridView for MazeView {
    type Env = ProcMaze;

    fn env(&self) -> &ProcMaze {
        &self.env
    }

    fn grid_width(&self) -> usize {
        self.env.width()
    }

    fn cell_kind(&self, row: usize, col: usize) -> CellKind {
        let cell = row * self.env.width() + col;
        if cell == self.state.goal {
            CellKind::Goal
        } else if self.state.layout.is_wall(cell) {
            CellKind::Wall
        } else {
            CellKind::Open
        }
    }

    fn state_at(&self, row: usize, col: usize) -> Option<MazeState> {
        match self.cell_kind(row, col) {
            CellKind::Open => Some(MazeState { agent: row * self.env.width() + col, ..self.state.clone() }),
            _ => None,
        }
    }
}

/// Controller cells with the base maze, latch and countdown held fixed.
pub struct ControllerView {
    pub env: HierElectricProcMaze,
    pub state: HierState,
}

impl GridView for ControllerView {
    type Env = HierElectricProcMaze;

    fn env(&self) -> &HierElectricProcMaze {
        &self.env
    }

    fn grid_width(&self) -> usize {
        self.env.controller_width()
    }

    fn cell_kind(&self, row: usize, col: usize) -> CellKind {
        match self.env.button_at(row, col) {
            Some(a) => CellKind::Button(a),
            None => CellKind::Open,
        }
    }

    fn state_at(&self, row: usize, col: usize) -> Option<HierState> {
        Some(HierState { ctrl_row: row, ctrl_col: col, ..self.state.clone() })
    }
}

/// Modal choice and its probability per cell (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct GridPanel {
    pub label: String,
    pub cells: Vec<Option<(usize, f64)>>,
}

impl GridPanel {
    /// Most frequent modal choice over drawn cells and its share.
    pub fn dominant(&self, choices: usize) -> (usize, f64) {
        let mut counts = vec![0usize; choices];
        let mut drawn = 0;
        for (m, _) in self.cells.iter().flatten() {
            counts[*m] += 1;
            drawn += 1;
        }
        let best = crate::math::argmax(&counts);
        (best, if drawn == 0 { 0.0 } else { counts[best] as f64 / drawn as f64 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptionGrids {
    pub width: usize,
    pub num_actions: usize,
    pub kinds: Vec<CellKind>,
    /// One action panel per option (a single panel for a single policy).
    pub options: Vec<GridPanel>,
    /// Modal option per cell; absent for a single option.
    pub rho: Option<GridPanel>,
}

fn modal(probs: &[f64]) -> (usize, f64) {
    let m = crate::math::argmax(probs);
    (m, probs[m])
}

pub fn option_grids<V: GridView, T: Scalar>(policy: &PolicyNet<T>, view: &V) -> Result<OptionGrids, NnError> {
    let w = view.grid_width();
    let env = view.env();
    let dim = env.spec().observation_dim;
    let layout = policy.layout;
    let mut kinds = Vec::with_capacity(w * w);
    let mut drawn = Vec::new();
    let mut input: Vec<T> = Vec::new();
    for row in 0..w {
        for col in 0..w {
            kinds.push(view.cell_kind(row, col));
            if let Some(s) = view.state_at(row, col) {
                let start = input.len();
                input.resize(start + dim, T::zero());
                env.encode(&s, &mut input[start..]);
                drawn.push(row * w + col);
            }
        }
    }
    let mut options: Vec<GridPanel> = (0..layout.num_options)
        .map(|n| GridPanel { label: if layout.num_options == 1 { "policy".into() } else { format!("option {n}") }, cells: vec![None; w * w] })
        .collect();
    let mut rho = GridPanel { label: "rho".into(), cells: vec![None; w * w] };
    if !drawn.is_empty() {
        let mut acts = Activations::new();
        let out = policy.mlp.forward(&input, drawn.len(), &mut acts)?;
        let od = layout.output_dim();
        for (i, &cell) in drawn.iter().enumerate() {
            let h = crate::learn::heads_of(&out[i * od..(i + 1) * od], layout);
            for (n, panel) in options.iter_mut().enumerate() {
                let p: Vec<f64> = h.lp[layout.option_range(n)].iter().map(|v| libm::exp(*v)).collect();
                panel.cells[cell] = Some(modal(&p));
            }
            let p: Vec<f64> = h.lrho.iter().map(|v| libm::exp(*v)).collect();
            rho.cells[cell] = Some(modal(&p));
        }
    }
    Ok(OptionGrids { width: w, num_actions: layout.num_actions, kinds, options, rho: (layout.num_options > 1).then_some(rho) })
}

/// Dominant action and share of each option panel.
pub fn directional_structure(grids: &OptionGrids) -> Vec<(usize, f64)> {
    grids.options.iter().map(|p| p.dominant(grids.num_actions)).collect()
}
