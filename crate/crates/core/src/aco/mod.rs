//! Multi-agent path planning with a MAX-MIN ant system.

mod construct;
mod heuristic;
mod optimize;
mod params;
mod pheromone;

use serde::{Deserialize, Serialize};

use crate::belief::PlanEvaluation;
use crate::grid_world::NodeId;

pub use construct::{greedy_solution, transition_probabilities};
pub use heuristic::{
    mts_heuristic, tsp_heuristic, HeuristicField, MTS_EPSILON, SECTOR_HALF_ANGLE,
    SECTOR_RANGE_STEPS,
};
pub use optimize::{compare_solutions, optimize, ConvergenceTrace, OptimizeResult, Optimizer};
pub use params::{HeuristicKind, MmasParams};
pub use pheromone::{init_pheromones, PheromoneField};

/// One joint plan: a node-id path per agent, starting at its start node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AntSolution {
    pub paths: Vec<Vec<NodeId>>,
    /// Expected search time, seconds.
    pub est: f64,
    pub path_distances: Vec<f64>,
    /// Mass the plan never sweeps.
    pub residual: f64,
    /// Whether construction reached the residual target.
    pub complete: bool,
    pub evaluation: PlanEvaluation,
}

impl AntSolution {
    pub fn total_distance(&self) -> f64 {
        self.path_distances.iter().sum()
    }

    /// Longest path, in steps.
    pub fn horizon(&self) -> usize {
        self.paths.iter().map(Vec::len).max().unwrap_or(0)
    }
}
