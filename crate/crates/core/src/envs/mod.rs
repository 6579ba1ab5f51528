//! Gridworld environments: Compass, ProcMaze / ElectricProcMaze, and the
//! hierarchical controller variant built on top of ElectricProcMaze.

mod compass;
mod hier;
mod maze;

pub use compass::{Compass, CompassState, Edge};
pub use hier::{HierElectricProcMaze, HierState, NUM_SELECTED};
pub use maze::{
    default_wall_penalty, estimate_wall_penalty, generate_layout, generate_maze, maze_diameter, MazeLayout,
    MazeState, ProcMaze, WallMode,
};

pub const DEFAULT_DISCOUNT: f64 = 0.99;
