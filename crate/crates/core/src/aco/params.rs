use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeuristicKind {
    /// Inverse arc length.
    #[default]
    Tsp,
    /// Probability mass lying ahead of each arc.
    Mts,
}

impl std::fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HeuristicKind::Tsp => "TSP",
            HeuristicKind::Mts => "MTS",
        })
    }
}

/// MAX-MIN ant system settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MmasParams {
    pub alpha: f64,
    pub beta: f64,
    /// Evaporation rate, in (0, 1).
    pub rho: f64,
    pub n_ants: usize,
    pub n_iterations: usize,
    /// Construction stops once the unswept mass is at or below this.
    pub residual_target: f64,
    /// Chance of depositing with the best-so-far instead of the iteration best.
    pub best_so_far_prob: f64,
    /// Chance of extending the agent with the shortest path.
    pub shortest_agent_prob: f64,
    pub seed: u64,
    pub heuristic: HeuristicKind,
    /// Per-agent path length cap in nodes; `None` means four times the
    /// agent's node count.
    pub max_path_nodes: Option<usize>,
}

impl Default for MmasParams {
    fn default() -> Self {
        MmasParams {
            alpha: 1.0,
            beta: 6.0,
            rho: 0.002,
            n_ants: 10,
            n_iterations: 300,
            residual_target: 0.014,
            best_so_far_prob: 0.5,
            shortest_agent_prob: 0.8,
            seed: 0,
            heuristic: HeuristicKind::Tsp,
            max_path_nodes: None,
        }
    }
}

impl MmasParams {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Validation(format!("{name} must be in [0, 1], got {v}")))
            }
        };
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Validation(format!("rho must be in (0, 1), got {}", self.rho)));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return Err(Error::Validation("alpha and beta must be nonnegative".into()));
        }
        if self.n_ants == 0 {
            return Err(Error::Validation("n_ants must be at least 1".into()));
        }
        if self.max_path_nodes == Some(0) {
            return Err(Error::Validation("max_path_nodes must be at least 1".into()));
        }
        prob("residual_target", self.residual_target)?;
        prob("best_so_far_prob", self.best_so_far_prob)?;
        prob("shortest_agent_prob", self.shortest_agent_prob)
    }
}
