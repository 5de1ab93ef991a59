//! Scenario generation, plan execution and benchmarking.

mod bench;
mod run;
mod scenario;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::aco::{optimize, AntSolution, MmasParams};
use crate::belief::{split_sub_priors, BeliefState, PlanEvaluation};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::grid_world::{NodeId, ProbabilityGrid};
use crate::problem::SearchProblem;

pub use bench::{
    benchmark, render_table, summarize_runs, write_csv, BenchCell, BenchRow, BenchScenario,
    BenchSpec, RunSummary, Stats,
};
pub use run::{
    considered_areas_by_agent, percent_considered_areas, run_search, Outcome, SimConfig,
    SimResult, Simulation, TickReport, DEFAULT_TICK,
};
pub use scenario::{
    generate_scenario, sample_target, synthetic_map, GaussianComponent, MapSource, PriorSpec,
    Scenario, ScenarioSpec, SyntheticMap, TargetPlacement, SYNTHETIC_EXTENT,
};

/// A plan as handed to executors: node paths plus metric routes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub paths: Vec<Vec<NodeId>>,
    /// Per-agent route in meters, from the start position through each node.
    pub polylines: Vec<Vec<Point>>,
    pub est: f64,
    pub residual: f64,
    pub complete: bool,
    pub path_distances: Vec<f64>,
    /// Optimizer wall time, seconds.
    pub computation_time: f64,
}

impl Plan {
    pub fn from_solution(problem: &SearchProblem, solution: &AntSolution, computation_time: f64) -> Self {
        let polylines = solution
            .paths
            .iter()
            .enumerate()
            .map(|(m, path)| {
                let g = &problem.graphs[m];
                let start = problem.profiles[m].start_position;
                let mut line = vec![start];
                for &id in path {
                    let p = g.node(id).expect("plan node in graph").position;
                    if line.last().is_some_and(|q: &Point| q.distance(p) > 1e-9) {
                        line.push(p);
                    }
                }
                line
            })
            .collect();
        Plan {
            paths: solution.paths.clone(),
            polylines,
            est: solution.est,
            residual: solution.residual,
            complete: solution.complete,
            path_distances: solution.path_distances.clone(),
            computation_time,
        }
    }
}

/// How the prior is divided between agents.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubPriorMode {
    /// One shared map.
    #[default]
    None,
    /// Every agent gets `prior / M`.
    Equal,
    /// Each gaussian component goes to the agent starting closest to it.
    Nearest,
    /// The nearest assignment shifted by one agent.
    Swapped,
}

impl std::fmt::Display for SubPriorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SubPriorMode::None => "none",
            SubPriorMode::Equal => "equal",
            SubPriorMode::Nearest => "nearest",
            SubPriorMode::Swapped => "swapped",
        })
    }
}

/// Component-to-agent assignment minimizing total start-to-center distance.
/// With as many components as agents the assignment is one-to-one; otherwise
/// each component goes to its closest agent.
pub fn nearest_assignment(scenario: &Scenario) -> Result<Vec<usize>> {
    let PriorSpec::GaussianMixture { components } = &scenario.spec.prior else {
        return Err(Error::Validation("component assignment needs a gaussian-mixture prior".into()));
    };
    let starts: Vec<Point> = scenario.profiles.iter().map(|p| p.start_position).collect();
    let cost = |k: usize, m: usize| components[k].center.distance(starts[m]);
    if components.len() != starts.len() {
        return Ok((0..components.len())
            .map(|k| {
                (0..starts.len())
                    .min_by(|&a, &b| cost(k, a).total_cmp(&cost(k, b)))
                    .unwrap_or(0)
            })
            .collect());
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut perm: Vec<usize> = (0..starts.len()).collect();
    permute(&mut perm, 0, &mut |p| {
        let c: f64 = p.iter().enumerate().map(|(k, &m)| cost(k, m)).sum();
        if best.as_ref().is_none_or(|(b, _)| c < *b - 1e-12) {
            best = Some((c, p.to_vec()));
        }
    });
    Ok(best.map(|b| b.1).unwrap_or_default())
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

/// Builds the planning belief for a sub-prior mode.
pub fn sub_prior_belief(scenario: &Scenario, mode: SubPriorMode) -> Result<BeliefState> {
    let m = scenario.profiles.len();
    match mode {
        SubPriorMode::None => Ok(BeliefState::shared(scenario.prior.clone())),
        SubPriorMode::Equal => BeliefState::with_sub_priors(split_sub_priors(&scenario.prior, &[], m)?),
        SubPriorMode::Nearest | SubPriorMode::Swapped => {
            let mut assignment = nearest_assignment(scenario)?;
            if mode == SubPriorMode::Swapped {
                for a in assignment.iter_mut() {
                    *a = (*a + 1) % m;
                }
            }
            let mut layers = vec![ProbabilityGrid::zeros(scenario.shape()); m];
            for (piece, &owner) in scenario.components.iter().zip(&assignment) {
                for (l, v) in layers[owner].mass.iter_mut().zip(&piece.mass) {
                    *l += v;
                }
            }
            if let Some(agent) = layers.iter().position(|l| !(l.total() > 0.0)) {
                return Err(Error::EmptySubPrior { agent });
            }
            BeliefState::with_sub_priors(layers)
        }
    }
}

/// Plans a scenario and returns the plan with its optimizer wall time.
pub fn plan_scenario(
    scenario: &Scenario,
    problem: &SearchProblem,
    mode: SubPriorMode,
    params: &MmasParams,
) -> Result<Plan> {
    let belief = sub_prior_belief(scenario, mode)?;
    Ok(plan_with_belief(problem, &belief, params)?.0)
}

/// Optimizes against `belief`; also returns the plan's evaluation.
pub fn plan_with_belief(
    problem: &SearchProblem,
    belief: &BeliefState,
    params: &MmasParams,
) -> Result<(Plan, PlanEvaluation)> {
    let t0 = Instant::now();
    let result = optimize(problem, belief, params)?;
    let plan = Plan::from_solution(problem, &result.best, t0.elapsed().as_secs_f64());
    Ok((plan, result.best.evaluation))
}
