//! Small random instances and brute-force references for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use mts_core::belief::BeliefState;
use mts_core::geometry::{GridShape, Point};
use mts_core::grid_world::{
    build_graph, derive_occupancy, AgentProfile, ProbabilityGrid, SampledNode, SegmentedMap,
    DEFAULT_OBSTACLE_CLASSES,
};
use mts_core::problem::SearchProblem;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WIDTH: usize = 4;
pub const HEIGHT: usize = 3;
pub const RADIUS: f64 = 0.4;

/// An obstacle-free 4×3 m map with one node on each of a few random cells.
/// Every node sees only its own cell and mass sits only on node cells.
pub struct Instance {
    pub problem: SearchProblem,
    pub belief: BeliefState,
    pub prior: Vec<f64>,
    /// Node positions, by node index.
    pub positions: Vec<Point>,
    pub neighbors: Vec<Vec<usize>>,
    pub starts: Vec<usize>,
}

pub fn small_instance(seed: u64, nodes: usize, agents: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = GridShape::new(WIDTH, HEIGHT, 1.0);
    let map = SegmentedMap::filled(shape, 0).unwrap();
    let occ = derive_occupancy(&map, &DEFAULT_OBSTACLE_CLASSES.into_iter().collect());
    let mut cells: Vec<usize> = (0..shape.len()).collect();
    cells.shuffle(&mut rng);
    cells.truncate(nodes);
    cells.sort_unstable();
    let sampled: Vec<SampledNode> = cells
        .iter()
        .map(|&c| SampledNode {
            position: shape.cell_center(c),
            square: shape.col_row(c),
        })
        .collect();
    let graph = build_graph(&sampled, &occ, 1.0, 5).unwrap();
    let positions: Vec<Point> = sampled.iter().map(|s| s.position).collect();

    let mut mass = vec![0.0; shape.len()];
    for &c in &cells {
        if rng.gen_bool(0.75) {
            mass[c] = rng.gen_range(0.05..1.0);
        }
    }
    if mass.iter().all(|&m| m == 0.0) {
        mass[cells[0]] = 1.0;
    }
    let total: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|m| *m /= total);

    let starts: Vec<usize> = (0..agents).map(|_| rng.gen_range(0..nodes)).collect();
    let profiles = starts
        .iter()
        .enumerate()
        .map(|(m, &i)| AgentProfile::new(m, positions[i], RADIUS, 1.0))
        .collect();
    let problem = SearchProblem::new(&map, occ, &graph, profiles, 1.0).unwrap();
    // Brute-force adjacency: the 5×5 window around each node, no obstacles.
    let neighbors = (0..nodes)
        .map(|i| {
            (0..nodes)
                .filter(|&j| {
                    let (a, b) = (shape.col_row(cells[i]), shape.col_row(cells[j]));
                    j != i && a.0.abs_diff(b.0) <= 2 && a.1.abs_diff(b.1) <= 2
                })
                .collect()
        })
        .collect();
    let belief = BeliefState::shared(ProbabilityGrid { shape, mass: mass.clone() });
    Instance {
        problem,
        belief,
        prior: mass,
        positions,
        neighbors,
        starts,
    }
}

impl Instance {
    /// Cells seen from `p`, by direct distance test over every cell.
    pub fn seen_from(&self, p: Point) -> Vec<usize> {
        let shape = self.problem.occupancy.shape;
        (0..shape.len())
            .filter(|&c| shape.cell_of(p) == Some(c) || shape.cell_center(c).distance(p) <= RADIUS)
            .collect()
    }

    /// Expected search time and residual of per-agent node-index paths.
    /// At step `k` each agent stands on its `k`-th node (or its last).
    pub fn reference_est(&self, paths: &[Vec<usize>]) -> (f64, f64) {
        let dt = self.problem.dt;
        let horizon = paths.iter().map(Vec::len).max().unwrap_or(0);
        let mut seen = BTreeSet::new();
        let mut est = 0.0;
        for k in 0..horizon {
            for path in paths {
                if let Some(&i) = path.get(k).or(path.last()) {
                    seen.extend(self.seen_from(self.positions[i]));
                }
            }
            let found: f64 = seen.iter().map(|&c| self.prior[c]).sum();
            est += (1.0 - found) * dt;
        }
        let found: f64 = seen.iter().map(|&c| self.prior[c]).sum();
        (est, 1.0 - found)
    }

    /// Best expected time over all single-agent walks of at most `cap`
    /// nodes that stop as soon as the residual reaches `target`. `None`
    /// when no such walk exists.
    pub fn optimal_est(&self, cap: usize, target: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        let mut walk = vec![self.starts[0]];
        self.search(&mut walk, cap, target, &mut best);
        best
    }

    fn search(&self, walk: &mut Vec<usize>, cap: usize, target: f64, best: &mut Option<f64>) {
        let (est, residual) = self.reference_est(std::slice::from_ref(walk));
        if residual <= target {
            if best.is_none_or(|b| est < b) {
                *best = Some(est);
            }
            return;
        }
        if walk.len() == cap {
            return;
        }
        let last = *walk.last().unwrap();
        for &j in &self.neighbors[last] {
            walk.push(j);
            self.search(walk, cap, target, best);
            walk.pop();
        }
    }

    /// Node-index form of node-id paths.
    pub fn indices(&self, paths: &[Vec<usize>]) -> Vec<Vec<usize>> {
        self.problem.path_indices(paths).unwrap()
    }
}
