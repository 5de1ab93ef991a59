//! Solution construction: one ant extends one agent path at a time until the
//! unswept mass drops to the target or every agent hits its length cap.

use rand::Rng;

use super::heuristic::{HeuristicField, SectorIndex};
use super::params::{HeuristicKind, MmasParams};
use super::pheromone::PheromoneField;
use super::AntSolution;
use crate::belief::{evaluate_paths, BeliefState};
use crate::error::{Error, Result};
use crate::grid_world::Edge;
use crate::problem::SearchProblem;

/// Read-only state shared by all ants of a run.
pub(crate) struct Context<'a> {
    pub problem: &'a SearchProblem,
    pub belief: &'a BeliefState,
    pub params: &'a MmasParams,
    merged: Vec<f64>,
    total: f64,
    eta: Eta,
    caps: Vec<usize>,
    id_space: usize,
}

enum Eta {
    /// `η^β` per arc, fixed for the run.
    Static(Vec<Vec<Vec<f64>>>),
    /// Sector mass recomputed from the ant's working belief.
    Sector(SectorIndex),
}

impl<'a> Context<'a> {
    pub fn new(problem: &'a SearchProblem, belief: &'a BeliefState, params: &'a MmasParams) -> Self {
        let merged = belief.merged().mass;
        let total = merged.iter().sum();
        let eta = match params.heuristic {
            HeuristicKind::Tsp => {
                let field = super::heuristic::tsp_heuristic(problem);
                Eta::Static(powered(field, params.beta))
            }
            HeuristicKind::Mts => Eta::Sector(SectorIndex::new(problem)),
        };
        let caps = problem
            .graphs
            .iter()
            .map(|g| params.max_path_nodes.unwrap_or(4 * g.len()).max(1))
            .collect();
        let id_space = problem
            .graphs
            .iter()
            .flat_map(|g| g.nodes.last().map(|n| n.id + 1))
            .max()
            .unwrap_or(0);
        Context {
            problem,
            belief,
            params,
            merged,
            total,
            eta,
            caps,
            id_space,
        }
    }
}

fn powered(field: HeuristicField, beta: f64) -> Vec<Vec<Vec<f64>>> {
    let mut v = field.values;
    for x in v.iter_mut().flatten().flatten() {
        *x = pow(*x, beta);
    }
    v
}

fn pow(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        x
    } else if e == 0.0 {
        1.0
    } else {
        x.powf(e)
    }
}

/// Unnormalized `τ^α η^β` weights over the candidate moves out of `node`.
/// Candidates are the unvisited neighbours, or all neighbours when every one
/// is visited. Weights that underflow fall back to uniform.
fn candidate_weights(
    edges: &[Edge],
    tau: &[f64],
    eta_pow: &[f64],
    alpha: f64,
    visited: impl Fn(usize) -> bool,
    out: &mut Vec<(usize, f64)>,
) {
    out.clear();
    let any_fresh = edges.iter().any(|e| !visited(e.to));
    for (s, e) in edges.iter().enumerate() {
        if any_fresh && visited(e.to) {
            continue;
        }
        out.push((s, pow(tau[s], alpha) * eta_pow[s]));
    }
    let sum: f64 = out.iter().map(|c| c.1).sum();
    if !(sum > 0.0 && sum.is_finite()) {
        for c in out.iter_mut() {
            c.1 = 1.0;
        }
    }
}

/// Move distribution for agent `agent` at node index `node`, as
/// `(neighbour index, probability)` pairs. `visited` is indexed by node id.
pub fn transition_probabilities(
    field: &PheromoneField,
    heuristic: &HeuristicField,
    problem: &SearchProblem,
    agent: usize,
    node: usize,
    visited: &[bool],
    params: &MmasParams,
) -> Result<Vec<(usize, f64)>> {
    let g = &problem.graphs[agent];
    let edges = g.neighbors(node);
    if edges.is_empty() {
        return Err(Error::DeadEnd {
            agent,
            node: g.nodes[node].id,
        });
    }
    let eta: Vec<f64> = heuristic.values[agent][node].iter().map(|&h| pow(h, params.beta)).collect();
    let mut out = Vec::new();
    candidate_weights(
        edges,
        &field.tau[agent][node],
        &eta,
        params.alpha,
        |j| visited.get(g.nodes[j].id).copied().unwrap_or(false),
        &mut out,
    );
    let sum: f64 = out.iter().map(|c| c.1).sum();
    Ok(out.into_iter().map(|(s, w)| (edges[s].to, w / sum)).collect())
}

/// Working state of a single ant.
struct Walk<'c, 'a> {
    ctx: &'c Context<'a>,
    paths: Vec<Vec<usize>>,
    distances: Vec<f64>,
    visited: Vec<bool>,
    covered: Vec<bool>,
    swept: f64,
}

impl<'c, 'a> Walk<'c, 'a> {
    fn new(ctx: &'c Context<'a>) -> Self {
        let p = ctx.problem;
        let mut walk = Walk {
            ctx,
            paths: Vec::with_capacity(p.agent_count()),
            distances: vec![0.0; p.agent_count()],
            visited: vec![false; ctx.id_space],
            covered: vec![false; ctx.merged.len()],
            swept: 0.0,
        };
        for m in 0..p.agent_count() {
            walk.paths.push(Vec::new());
            walk.push(m, p.start_nodes[m], 0.0);
        }
        walk
    }

    fn push(&mut self, agent: usize, node: usize, length: f64) {
        let p = self.ctx.problem;
        self.paths[agent].push(node);
        self.distances[agent] += length;
        self.visited[p.graphs[agent].nodes[node].id] = true;
        for &c in &p.visibility[agent][node] {
            let c = c as usize;
            if !self.covered[c] {
                self.covered[c] = true;
                self.swept += self.ctx.merged[c];
            }
        }
    }

    fn residual(&self) -> f64 {
        (self.ctx.total - self.swept).max(0.0)
    }

    fn done(&self) -> bool {
        self.residual() <= self.ctx.params.residual_target
    }

    fn active(&self) -> Vec<usize> {
        (0..self.paths.len())
            .filter(|&m| self.paths[m].len() < self.ctx.caps[m])
            .collect()
    }

    /// Unswept mass agent `agent` would be credited with at `cell`.
    fn open_credit(&self, agent: usize, cell: usize) -> f64 {
        if self.covered[cell] {
            0.0
        } else {
            self.ctx.belief.credit_mass(agent, cell)
        }
    }

    fn finish(self) -> AntSolution {
        let p = self.ctx.problem;
        let complete = self.done();
        let evaluation = evaluate_paths(&self.paths, self.ctx.belief, p, None);
        AntSolution {
            paths: self
                .paths
                .iter()
                .enumerate()
                .map(|(m, path)| path.iter().map(|&i| p.graphs[m].nodes[i].id).collect())
                .collect(),
            est: evaluation.est,
            path_distances: self.distances,
            residual: evaluation.residual,
            complete,
            evaluation,
        }
    }
}

fn shortest(active: &[usize], distances: &[f64]) -> usize {
    let mut best = active[0];
    for &m in &active[1..] {
        if distances[m] < distances[best] {
            best = m;
        }
    }
    best
}

/// Builds one randomized solution from the current pheromone field.
pub(crate) fn construct_ant_solution<R: Rng>(
    ctx: &Context<'_>,
    field: &PheromoneField,
    rng: &mut R,
) -> Result<AntSolution> {
    let p = ctx.problem;
    let params = ctx.params;
    let mut walk = Walk::new(ctx);
    let mut cands = Vec::new();
    let mut eta_buf = Vec::new();
    while !walk.done() {
        let active = walk.active();
        if active.is_empty() {
            break;
        }
        let first = shortest(&active, &walk.distances);
        let agent = if active.len() == 1 || rng.gen::<f64>() < params.shortest_agent_prob {
            first
        } else {
            let others: Vec<usize> = active.iter().copied().filter(|&m| m != first).collect();
            others[rng.gen_range(0..others.len())]
        };
        let g = &p.graphs[agent];
        let node = *walk.paths[agent].last().expect("paths start non-empty");
        let edges = g.neighbors(node);
        if edges.is_empty() {
            return Err(Error::DeadEnd {
                agent,
                node: g.nodes[node].id,
            });
        }
        let eta: &[f64] = match &ctx.eta {
            Eta::Static(v) => &v[agent][node],
            Eta::Sector(index) => {
                index.arc_values(agent, node, |c| walk.open_credit(agent, c), &mut eta_buf);
                for x in eta_buf.iter_mut() {
                    *x = pow(*x, params.beta);
                }
                &eta_buf
            }
        };
        candidate_weights(
            edges,
            &field.tau[agent][node],
            eta,
            params.alpha,
            |j| walk.visited[g.nodes[j].id],
            &mut cands,
        );
        let slot = roulette(&cands, rng);
        walk.push(agent, edges[slot].to, edges[slot].length);
    }
    Ok(walk.finish())
}

fn roulette<R: Rng>(cands: &[(usize, f64)], rng: &mut R) -> usize {
    let sum: f64 = cands.iter().map(|c| c.1).sum();
    let mut x = rng.gen::<f64>() * sum;
    for &(s, w) in cands {
        if x < w {
            return s;
        }
        x -= w;
    }
    cands.last().expect("at least one candidate").0
}

/// Deterministic seed solution: the agent with the shortest path moves to the
/// closest neighbour that reveals unswept mass it would be credited with,
/// preferring more mass among equally close ones. When no neighbour reveals
/// anything it heads along a shortest route to the nearest node that does.
pub fn greedy_solution(
    problem: &SearchProblem,
    belief: &BeliefState,
    params: &MmasParams,
) -> Result<AntSolution> {
    let ctx = Context::new(problem, belief, params);
    greedy_with(&ctx)
}

pub(crate) fn greedy_with(ctx: &Context<'_>) -> Result<AntSolution> {
    let p = ctx.problem;
    let mut walk = Walk::new(ctx);
    let mut stuck = vec![false; p.agent_count()];
    while !walk.done() {
        let active: Vec<usize> = walk.active().into_iter().filter(|&m| !stuck[m]).collect();
        if active.is_empty() {
            break;
        }
        let agent = shortest(&active, &walk.distances);
        let g = &p.graphs[agent];
        let node = *walk.paths[agent].last().expect("paths start non-empty");
        let edges = g.neighbors(node);
        if edges.is_empty() {
            return Err(Error::DeadEnd {
                agent,
                node: g.nodes[node].id,
            });
        }
        let gain = |j: usize, w: &Walk| -> f64 {
            p.visibility[agent][j]
                .iter()
                .map(|&c| w.open_credit(agent, c as usize))
                .sum()
        };
        let any_fresh = edges.iter().any(|e| !walk.visited[g.nodes[e.to].id]);
        let mut best: Option<(f64, f64, usize)> = None;
        for e in edges {
            if any_fresh && walk.visited[g.nodes[e.to].id] {
                continue;
            }
            let score = gain(e.to, &walk);
            let better = match best {
                None => true,
                Some((s, _, _)) if (score > 0.0) != (s > 0.0) => score > 0.0,
                Some((s, l, _)) => e.length < l - 1e-9 || ((e.length - l).abs() <= 1e-9 && score > s),
            };
            if better {
                best = Some((score, e.length, e.to));
            }
        }
        let (score, _, mut next) = best.expect("non-empty neighbour list");
        if score <= 0.0 {
            let credited = |j: usize, w: &Walk| gain(j, w) > 0.0;
            let physical = |j: usize, w: &Walk| {
                p.visibility[agent][j]
                    .iter()
                    .any(|&c| !w.covered[c as usize] && ctx.merged[c as usize] > 0.0)
            };
            match first_hop(g, node, |j| credited(j, &walk))
                .or_else(|| first_hop(g, node, |j| physical(j, &walk)))
            {
                Some(hop) => next = hop,
                None => {
                    stuck[agent] = true;
                    continue;
                }
            }
        }
        let length = g.arc_length(node, next).expect("neighbour arc");
        walk.push(agent, next, length);
    }
    Ok(walk.finish())
}

/// First move on a shortest route from `from` to the nearest node satisfying
/// `goal`, or `None` if no reachable node does.
fn first_hop(
    g: &crate::grid_world::SearchGraph,
    from: usize,
    goal: impl Fn(usize) -> bool,
) -> Option<usize> {
    use std::cmp::Ordering;
    use std::collections::BinaryHeap;

    #[derive(PartialEq)]
    struct Item(f64, usize);
    impl Eq for Item {}
    impl Ord for Item {
        fn cmp(&self, o: &Self) -> Ordering {
            o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
        }
    }
    impl PartialOrd for Item {
        fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
            Some(self.cmp(o))
        }
    }

    let mut dist = vec![f64::INFINITY; g.len()];
    let mut parent = vec![usize::MAX; g.len()];
    let mut heap = BinaryHeap::new();
    dist[from] = 0.0;
    heap.push(Item(0.0, from));
    while let Some(Item(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if u != from && goal(u) {
            let mut v = u;
            while parent[v] != from {
                v = parent[v];
            }
            return Some(v);
        }
        for e in g.neighbors(u) {
            let nd = d + e.length;
            if nd < dist[e.to] {
                dist[e.to] = nd;
                parent[e.to] = u;
                heap.push(Item(nd, e.to));
            }
        }
    }
    None
}
