//! Diagnostics: exact tabular solutions, the single-vs-mixture
//! cross-entropy demonstration, option grids, and option diversity.

pub mod bellman;
pub mod ce_demo;
pub mod diversity;
pub mod grids;

pub use bellman::{greedy_enters_wall, solve_random_policy_q, value_iteration, BellmanError, TabularMdp, TabularQ};
pub use ce_demo::{direct_path, posterior_ce_demo, CeDemoReport, DirectPath};
pub use diversity::{option_diversity, DiversityConfig, DiversityReport, OptionPolicy, ScriptedOptions};
pub use grids::{directional_structure, option_grids, CellKind, CompassView, ControllerView, GridPanel, GridView, MazeView, OptionGrids};
