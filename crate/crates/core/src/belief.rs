//! Target belief over the map and expected-time evaluation of plans.
//!
//! The belief is kept unnormalized: mass swept by a sensor is removed and
//! added to `cumulative_found`, so the detection probability of a step is just
//! the mass swept in it. With sub-priors each agent is credited only with
//! mass of its own sub-prior; a swept cell is cleared in every sub-prior
//! because the target is known not to be there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_world::{NodeId, PreferredArea, ProbabilityGrid};
use crate::problem::SearchProblem;
use crate::sensing::VisibleRegion;

/// How swept mass is credited to agents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribution {
    /// One merged map; a cell's mass goes to the lowest-id agent seeing it.
    Shared,
    /// One layer per agent; agent `m` is credited only from layer `m`.
    SubPriors,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub sub_priors: Vec<ProbabilityGrid>,
    pub attribution: Attribution,
    pub step: usize,
    pub cumulative_found: f64,
}

/// Outcome of sweeping one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepSweep {
    /// Mass credited to each agent (indexed by agent id).
    pub credited: Vec<f64>,
    /// All mass removed from the belief, credited or not.
    pub removed: f64,
}

impl StepSweep {
    pub fn probability(&self) -> f64 {
        self.credited.iter().sum()
    }
}

impl BeliefState {
    /// Single merged map shared by all agents.
    pub fn shared(prior: ProbabilityGrid) -> Self {
        BeliefState {
            sub_priors: vec![prior],
            attribution: Attribution::Shared,
            step: 0,
            cumulative_found: 0.0,
        }
    }

    /// One sub-prior per agent, in agent order.
    pub fn with_sub_priors(sub_priors: Vec<ProbabilityGrid>) -> Result<Self> {
        let Some(first) = sub_priors.first() else {
            return Err(Error::Validation("at least one sub-prior is required".into()));
        };
        if sub_priors.iter().any(|s| s.shape != first.shape) {
            return Err(Error::Validation("sub-priors must share one grid shape".into()));
        }
        Ok(BeliefState {
            sub_priors,
            attribution: Attribution::SubPriors,
            step: 0,
            cumulative_found: 0.0,
        })
    }

    pub fn remaining(&self) -> f64 {
        self.sub_priors.iter().map(ProbabilityGrid::total).sum()
    }

    /// Sum of all layers.
    pub fn merged(&self) -> ProbabilityGrid {
        let mut out = self.sub_priors[0].clone();
        for layer in &self.sub_priors[1..] {
            for (o, m) in out.mass.iter_mut().zip(&layer.mass) {
                *o += m;
            }
        }
        out
    }

    /// Mass agent `agent` would be credited with at `cell`.
    pub fn credit_mass(&self, agent: usize, cell: usize) -> f64 {
        match self.attribution {
            Attribution::Shared => self.sub_priors[0].mass[cell],
            Attribution::SubPriors => self.sub_priors.get(agent).map_or(0.0, |l| l.mass[cell]),
        }
    }

    /// Layer agent `agent` is credited from.
    pub fn layer_for(&self, agent: usize) -> Option<&ProbabilityGrid> {
        match self.attribution {
            Attribution::Shared => self.sub_priors.first(),
            Attribution::SubPriors => self.sub_priors.get(agent),
        }
    }

    /// Sweeps one step in place. `regions[m]` lists the cells agent `m` sees.
    pub(crate) fn sweep<C: AsRef<[u32]>>(&mut self, regions: &[C]) -> StepSweep {
        let mut credited = vec![0.0; regions.len()];
        let mut removed = 0.0;
        match self.attribution {
            Attribution::Shared => {
                let layer = &mut self.sub_priors[0].mass;
                for (m, cells) in regions.iter().enumerate() {
                    for &c in cells.as_ref() {
                        let v = std::mem::take(&mut layer[c as usize]);
                        credited[m] += v;
                    }
                }
                removed = credited.iter().sum();
            }
            Attribution::SubPriors => {
                for (m, cells) in regions.iter().enumerate() {
                    if let Some(layer) = self.sub_priors.get_mut(m) {
                        for &c in cells.as_ref() {
                            credited[m] += std::mem::take(&mut layer.mass[c as usize]);
                        }
                    }
                }
                removed += credited.iter().sum::<f64>();
                for layer in &mut self.sub_priors {
                    for cells in regions {
                        for &c in cells.as_ref() {
                            removed += std::mem::take(&mut layer.mass[c as usize]);
                        }
                    }
                }
            }
        }
        self.cumulative_found += removed;
        self.step += 1;
        StepSweep { credited, removed }
    }

    fn region_cells(&self, regions: &[VisibleRegion]) -> Vec<Vec<u32>> {
        let n = regions
            .iter()
            .map(|r| r.agent + 1)
            .max()
            .unwrap_or(0)
            .max(if self.attribution == Attribution::SubPriors {
                self.sub_priors.len()
            } else {
                0
            });
        let mut out = vec![Vec::new(); n];
        for r in regions {
            out[r.agent].extend(r.visible_cells.iter().map(|&c| c as u32));
        }
        out
    }
}

/// Bayes update for a step with no detection: swept cells are cleared in
/// every sub-prior and the removed mass is added to `cumulative_found`.
pub fn bayes_no_detection_update(state: &BeliefState, regions: &[VisibleRegion]) -> BeliefState {
    let mut next = state.clone();
    let cells = next.region_cells(regions);
    next.sweep(&cells);
    next
}

/// Probability of first detecting the target in this step.
pub fn step_probability(state: &BeliefState, regions: &[VisibleRegion]) -> f64 {
    let mut scratch = state.clone();
    let cells = scratch.region_cells(regions);
    scratch.sweep(&cells).probability()
}

/// Builds one sub-prior per agent from preferred rectangles.
///
/// Mass of cells inside an agent's rectangles goes to that agent (lowest id
/// wins on overlaps). Unclaimed mass is split equally among agents without
/// rectangles, or among all agents when every agent drew one. Each sub-prior
/// is then rescaled to total `1/M`.
pub fn split_sub_priors(
    prior: &ProbabilityGrid,
    areas: &[PreferredArea],
    agent_count: usize,
) -> Result<Vec<ProbabilityGrid>> {
    if agent_count == 0 {
        return Err(Error::Validation("agent count must be positive".into()));
    }
    let total = prior.total();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Validation(format!(
            "prior must be normalized to 1, total is {total}"
        )));
    }
    for a in areas {
        a.validate(&prior.shape, agent_count)?;
    }
    let mut has_area = vec![false; agent_count];
    for a in areas {
        has_area[a.owner] = true;
    }
    let heirs: Vec<usize> = if has_area.iter().all(|&h| h) {
        (0..agent_count).collect()
    } else {
        (0..agent_count).filter(|&m| !has_area[m]).collect()
    };
    let heir_share = 1.0 / heirs.len() as f64;

    let mut subs = vec![ProbabilityGrid::zeros(prior.shape); agent_count];
    for (cell, &mass) in prior.mass.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let center = prior.shape.cell_center(cell);
        let owner = areas
            .iter()
            .filter(|a| a.contains(center))
            .map(|a| a.owner)
            .min();
        match owner {
            Some(m) => subs[m].mass[cell] += mass,
            None => {
                for &m in &heirs {
                    subs[m].mass[cell] += mass * heir_share;
                }
            }
        }
    }
    let target = 1.0 / agent_count as f64;
    for (m, sub) in subs.iter_mut().enumerate() {
        sub.normalize_to(target)
            .map_err(|_| Error::EmptySubPrior { agent: m })?;
    }
    Ok(subs)
}

/// Detection-time statistics of a plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanEvaluation {
    /// `p_k` for steps `k = 1..=N`.
    pub step_probabilities: Vec<f64>,
    /// `P(t ≤ k)` for steps `k = 1..=N`.
    pub cumulative: Vec<f64>,
    /// `Σ_{k=1}^{N} (1 − P(t ≤ k))·dt`, seconds.
    pub est: f64,
    /// Mass never swept by the plan.
    pub residual: f64,
    /// Mass swept by an agent that does not own it (zero in shared mode).
    pub uncredited: f64,
}

impl PlanEvaluation {
    /// `Σ_{k=1}^{N} k·p_k·dt`, the truncated expectation without completion term.
    pub fn naive_expected_time(&self, dt: f64) -> f64 {
        self.step_probabilities
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum::<f64>()
            * dt
    }
}

/// Forward-simulates the belief along per-agent node-index paths. At step
/// `k` every agent stands on its `(k−1)`-th node, or its last one once the
/// path is exhausted. `horizon` defaults to the longest path.
pub(crate) fn evaluate_paths(
    paths: &[Vec<usize>],
    state: &BeliefState,
    problem: &SearchProblem,
    horizon: Option<usize>,
) -> PlanEvaluation {
    let horizon = horizon.unwrap_or_else(|| paths.iter().map(Vec::len).max().unwrap_or(0));
    let dt = problem.dt;
    let mut belief = state.clone();
    let start_found = belief.cumulative_found;
    let mut step_probabilities = Vec::with_capacity(horizon);
    let mut cumulative = Vec::with_capacity(horizon);
    let mut found = 0.0;
    let mut est = 0.0;
    let mut regions: Vec<&[u32]> = Vec::with_capacity(paths.len());
    for k in 0..horizon {
        regions.clear();
        for (m, path) in paths.iter().enumerate() {
            match path.get(k).or(path.last()) {
                Some(&node) => regions.push(&problem.visibility[m][node]),
                None => regions.push(&[]),
            }
        }
        let p = belief.sweep(&regions).probability();
        found += p;
        step_probabilities.push(p);
        cumulative.push(found);
        est += (1.0 - found) * dt;
    }
    let removed = belief.cumulative_found - start_found;
    PlanEvaluation {
        step_probabilities,
        cumulative,
        est,
        residual: belief.remaining(),
        uncredited: (removed - found).max(0.0),
    }
}

/// Expected time to detection of a plan given as per-agent node ids.
pub fn expected_time(
    plan: &[Vec<NodeId>],
    state: &BeliefState,
    problem: &SearchProblem,
    horizon: Option<usize>,
) -> Result<PlanEvaluation> {
    let paths = problem.path_indices(plan)?;
    Ok(evaluate_paths(&paths, state, problem, horizon))
}

/// `Σ k·p_k·dt` truncated at the horizon.
pub fn expected_time_naive(
    plan: &[Vec<NodeId>],
    state: &BeliefState,
    problem: &SearchProblem,
    horizon: Option<usize>,
) -> Result<f64> {
    Ok(expected_time(plan, state, problem, horizon)?.naive_expected_time(problem.dt))
}
