use serde::{Deserialize, Serialize};

use super::params::MmasParams;
use super::AntSolution;
use crate::problem::SearchProblem;

/// Per-agent arc pheromone, laid out like each agent's adjacency lists:
/// `tau[m][i][s]` belongs to the `s`-th edge out of node index `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PheromoneField {
    pub tau: Vec<Vec<Vec<f64>>>,
    pub tau_min: f64,
    pub tau_max: f64,
}

/// Every arc starts at `τ_max = 1/(ρ·C_seed)`, where `C_seed` is the cost of
/// the seed solution; `τ_min = τ_max / (2·C)` with `C` the largest agent
/// node count.
pub fn init_pheromones(
    problem: &SearchProblem,
    seed_solution: &AntSolution,
    params: &MmasParams,
) -> PheromoneField {
    let seed_cost = if seed_solution.est > 0.0 {
        seed_solution.est
    } else {
        problem.dt
    };
    let tau_max = 1.0 / (params.rho * seed_cost);
    let tau_min = tau_max / (2.0 * problem.max_node_count().max(1) as f64);
    PheromoneField {
        tau: problem
            .graphs
            .iter()
            .map(|g| g.adjacency.iter().map(|e| vec![tau_max; e.len()]).collect())
            .collect(),
        tau_min,
        tau_max,
    }
}

impl PheromoneField {
    /// `τ ← max(τ_min, (1−ρ)·τ)` on every arc.
    pub fn evaporate(&mut self, rho: f64) {
        let keep = 1.0 - rho;
        let floor = self.tau_min;
        for t in self.tau.iter_mut().flatten().flatten() {
            *t = (*t * keep).max(floor);
        }
    }

    /// Adds `1/est` (or `1/dt` when `est` is zero) to each distinct arc of the
    /// solution, clamped at `τ_max`.
    pub fn deposit(&mut self, problem: &SearchProblem, solution: &AntSolution) {
        let amount = if solution.est > 0.0 {
            1.0 / solution.est
        } else {
            1.0 / problem.dt
        };
        for (m, path) in solution.paths.iter().enumerate() {
            let g = &problem.graphs[m];
            let idx: Vec<usize> = path.iter().filter_map(|&id| g.index_of(id)).collect();
            let mut arcs: Vec<(usize, usize)> = idx
                .windows(2)
                .filter_map(|w| {
                    g.adjacency[w[0]]
                        .iter()
                        .position(|e| e.to == w[1])
                        .map(|s| (w[0], s))
                })
                .collect();
            arcs.sort_unstable();
            arcs.dedup();
            for (i, s) in arcs {
                let t = &mut self.tau[m][i][s];
                *t = (*t + amount).min(self.tau_max);
            }
        }
    }

    pub fn bounds_hold(&self) -> bool {
        self.tau
            .iter()
            .flatten()
            .flatten()
            .all(|&t| t >= self.tau_min && t <= self.tau_max)
    }
}
