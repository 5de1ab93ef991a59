use serde::{Deserialize, Serialize};

use super::params::HeuristicKind;
use crate::belief::BeliefState;
use crate::problem::SearchProblem;

/// Floor added to every sector mass so no arc is ruled out.
pub const MTS_EPSILON: f64 = 1e-6;
/// Half-width of the look-ahead sector, radians.
pub const SECTOR_HALF_ANGLE: f64 = std::f64::consts::FRAC_PI_4;
/// Look-ahead range in multiples of the grid distance.
pub const SECTOR_RANGE_STEPS: f64 = 3.0;

/// Per-agent arc desirability, laid out like [`super::PheromoneField`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeuristicField {
    pub kind: HeuristicKind,
    pub values: Vec<Vec<Vec<f64>>>,
}

/// `η = 1/d` on every arc, identical for all agents.
pub fn tsp_heuristic(problem: &SearchProblem) -> HeuristicField {
    HeuristicField {
        kind: HeuristicKind::Tsp,
        values: problem
            .graphs
            .iter()
            .map(|g| {
                g.adjacency
                    .iter()
                    .map(|edges| edges.iter().map(|e| 1.0 / e.length).collect())
                    .collect()
            })
            .collect(),
    }
}

/// Cells in the look-ahead sector of every arc.
#[derive(Clone, Debug)]
pub(crate) struct SectorIndex {
    /// `cells[m][i][s]`: sector of the `s`-th edge out of node `i` of agent `m`.
    cells: Vec<Vec<Vec<Vec<u32>>>>,
}

impl SectorIndex {
    pub fn new(problem: &SearchProblem) -> Self {
        let shape = problem.occupancy.shape;
        let cos_half = SECTOR_HALF_ANGLE.cos();
        let cells = problem
            .graphs
            .iter()
            .map(|g| {
                let range = SECTOR_RANGE_STEPS * g.grid_distance;
                g.nodes
                    .iter()
                    .zip(&g.adjacency)
                    .map(|(node, edges)| {
                        let origin = node.position;
                        let (c0, c1, r0, r1) = shape.cells_near(origin, range);
                        edges
                            .iter()
                            .map(|e| {
                                let to = g.nodes[e.to].position;
                                let (ux, uy) = ((to.x - origin.x) / e.length, (to.y - origin.y) / e.length);
                                let mut sector = Vec::new();
                                for r in r0..=r1 {
                                    for c in c0..=c1 {
                                        let i = shape.index(c, r);
                                        if problem.occupancy.occupied[i] {
                                            continue;
                                        }
                                        let p = shape.cell_center(i);
                                        let (vx, vy) = (p.x - origin.x, p.y - origin.y);
                                        let d = vx.hypot(vy);
                                        if d > 0.0 && d <= range && vx * ux + vy * uy >= d * cos_half - 1e-12 {
                                            sector.push(i as u32);
                                        }
                                    }
                                }
                                sector
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        SectorIndex { cells }
    }

    /// `η` for each edge out of `node`, given the mass the agent may still find.
    pub fn arc_values(
        &self,
        agent: usize,
        node: usize,
        mass: impl Fn(usize) -> f64,
        out: &mut Vec<f64>,
    ) {
        out.clear();
        out.extend(self.cells[agent][node].iter().map(|sector| {
            MTS_EPSILON + sector.iter().map(|&c| mass(c as usize)).sum::<f64>()
        }));
    }
}

/// Sector-mass heuristic: for an arc `i → j`, `ε` plus the agent's belief
/// mass within ±45° of the arc direction and three grid steps of node `i`.
pub fn mts_heuristic(belief: &BeliefState, problem: &SearchProblem) -> HeuristicField {
    let index = SectorIndex::new(problem);
    let mut buf = Vec::new();
    let values = (0..problem.agent_count())
        .map(|m| {
            let layer = belief.layer_for(m);
            (0..problem.graphs[m].len())
                .map(|i| {
                    index.arc_values(m, i, |c| layer.map_or(0.0, |l| l.mass[c]), &mut buf);
                    buf.clone()
                })
                .collect()
        })
        .collect();
    HeuristicField {
        kind: HeuristicKind::Mts,
        values,
    }
}
