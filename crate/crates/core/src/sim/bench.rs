//! Repeated optimization over a grid of settings, and run summaries.

use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_scenario, sub_prior_belief, ScenarioSpec, SimResult, SubPriorMode};
use crate::aco::{optimize, HeuristicKind, MmasParams};
use crate::belief::{expected_time, BeliefState};
use crate::error::{Error, Result};
use crate::grid_world::{AgentKind, AgentProfile};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchScenario {
    pub name: String,
    pub scenario: ScenarioSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub scenario: String,
    pub heuristic: HeuristicKind,
    pub subpriors: SubPriorMode,
}

/// Settings grid. When `cells` is empty every combination of scenario,
/// heuristic and sub-prior mode is run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub scenarios: Vec<BenchScenario>,
    #[serde(default = "default_heuristics")]
    pub heuristics: Vec<HeuristicKind>,
    #[serde(default = "default_modes")]
    pub subpriors: Vec<SubPriorMode>,
    #[serde(default)]
    pub cells: Vec<BenchCell>,
    #[serde(default)]
    pub params: MmasParams,
    #[serde(default = "default_reps")]
    pub reps: usize,
}

fn default_heuristics() -> Vec<HeuristicKind> {
    vec![HeuristicKind::Tsp, HeuristicKind::Mts]
}

fn default_modes() -> Vec<SubPriorMode> {
    vec![SubPriorMode::None, SubPriorMode::Equal]
}

fn default_reps() -> usize {
    10
}

impl BenchSpec {
    pub fn cells(&self) -> Vec<BenchCell> {
        if !self.cells.is_empty() {
            return self.cells.clone();
        }
        let mut out = Vec::new();
        for s in &self.scenarios {
            for &heuristic in &self.heuristics {
                for &subpriors in &self.subpriors {
                    out.push(BenchCell {
                        scenario: s.name.clone(),
                        heuristic,
                        subpriors,
                    });
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    /// Sample standard deviation (zero for fewer than two values).
    pub sd: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Stats::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Stats { mean, sd }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scenario: String,
    pub heuristic: HeuristicKind,
    pub subpriors: SubPriorMode,
    /// Expected time of the plan under the full prior, seconds.
    pub et: Stats,
    /// Optimizer wall time, seconds.
    pub ct: Stats,
    /// Summed path length of all agents, meters.
    pub pd: Stats,
    /// Per-repetition expected times, in seed order.
    pub et_values: Vec<f64>,
    pub ct_values: Vec<f64>,
    /// Largest unswept mass over the repetitions.
    pub max_residual: f64,
}

/// Runs `optimize` for every cell with seeds `1..=reps`.
pub fn benchmark(spec: &BenchSpec) -> Result<Vec<BenchRow>> {
    if spec.reps == 0 {
        return Err(Error::Validation("reps must be at least 1".into()));
    }
    let cells = spec.cells();
    let mut prepared = Vec::new();
    for s in &spec.scenarios {
        let scenario = generate_scenario(&s.scenario)?;
        let problem = scenario.problem()?;
        prepared.push((s.name.clone(), scenario, problem));
    }
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (1..=spec.reps as u64).map(move |r| (c, r)))
        .collect();
    let results: Vec<(f64, f64, f64, f64)> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let cell = &cells[c];
            let (_, scenario, problem) = prepared
                .iter()
                .find(|(n, _, _)| *n == cell.scenario)
                .ok_or_else(|| Error::Validation(format!("unknown scenario `{}`", cell.scenario)))?;
            let belief = sub_prior_belief(scenario, cell.subpriors)?;
            let params = MmasParams {
                seed,
                heuristic: cell.heuristic,
                ..spec.params.clone()
            };
            let t0 = Instant::now();
            let result = optimize(problem, &belief, &params)?;
            let ct = t0.elapsed().as_secs_f64();
            let merged = BeliefState::shared(scenario.prior.clone());
            let et = expected_time(&result.best.paths, &merged, problem, None)?.est;
            Ok((et, ct, result.best.total_distance(), result.best.residual))
        })
        .collect::<Result<_>>()?;
    Ok(cells
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            let rows = &results[c * spec.reps..(c + 1) * spec.reps];
            let col = |f: fn(&(f64, f64, f64, f64)) -> f64| rows.iter().map(f).collect::<Vec<_>>();
            let (et, ct, pd) = (col(|r| r.0), col(|r| r.1), col(|r| r.2));
            BenchRow {
                scenario: cell.scenario.clone(),
                heuristic: cell.heuristic,
                subpriors: cell.subpriors,
                et: Stats::of(&et),
                ct: Stats::of(&ct),
                pd: Stats::of(&pd),
                max_residual: rows.iter().map(|r| r.3).fold(0.0, f64::max),
                et_values: et,
                ct_values: ct,
            }
        })
        .collect())
}

/// Writes the machine-readable table.
pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Validation(format!("csv: {e}"));
    w.write_record([
        "scenario", "heuristic", "subpriors", "ET_mean", "ET_sd", "CT_mean", "CT_sd", "PD_mean", "PD_sd",
    ])
    .map_err(io)?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.heuristic.to_string(),
            r.subpriors.to_string(),
            format!("{:.4}", r.et.mean),
            format!("{:.4}", r.et.sd),
            format!("{:.4}", r.ct.mean),
            format!("{:.4}", r.ct.sd),
            format!("{:.4}", r.pd.mean),
            format!("{:.4}", r.pd.sd),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Validation(format!("csv: {e}")))
}

/// Human-readable table: one line per scenario and sub-prior setting, TSP
/// and MTS side by side as `TSP - MTS`.
pub fn render_table(rows: &[BenchRow]) -> String {
    let mut keys: Vec<(String, SubPriorMode)> = Vec::new();
    for r in rows {
        let k = (r.scenario.clone(), r.subpriors);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let find = |k: &(String, SubPriorMode), h: HeuristicKind| {
        rows.iter().find(|r| r.scenario == k.0 && r.subpriors == k.1 && r.heuristic == h)
    };
    let pair = |a: Option<&BenchRow>, b: Option<&BenchRow>, f: fn(&BenchRow) -> Stats, digits: usize| {
        let s = |r: Option<&BenchRow>| r.map_or("-".to_string(), |r| format!("{:.*}", digits, f(r).mean));
        format!("{} - {}", s(a), s(b))
    };
    let mut out = String::new();
    let _ = writeln!(out, "{:<24} {:>22} {:>18} {:>22}", "Case", "ET (s) TSP - MTS", "CT (s) TSP - MTS", "PD (m) TSP - MTS");
    for k in &keys {
        let (t, m) = (find(k, HeuristicKind::Tsp), find(k, HeuristicKind::Mts));
        let label = match k.1 {
            SubPriorMode::None => k.0.clone(),
            mode => format!("{}/S:{mode}", k.0),
        };
        let _ = writeln!(
            out,
            "{:<24} {:>22} {:>18} {:>22}",
            label,
            pair(t, m, |r| r.et, 2),
            pair(t, m, |r| r.ct, 2),
            pair(t, m, |r| r.pd, 2)
        );
    }
    out
}

/// Aggregates of repeated simulated searches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub runs: usize,
    pub rst: Stats,
    pub divergence: Stats,
    pub considered_areas: Stats,
    /// Percent of runs where a robot found the target.
    pub robot_found: f64,
    /// Percent of runs where a person found the target.
    pub person_found: f64,
    pub not_found: f64,
    pub robot_speed: Stats,
    pub person_speed: Stats,
}

pub fn summarize_runs(results: &[SimResult], profiles: &[AgentProfile]) -> RunSummary {
    let n = results.len().max(1) as f64;
    let kind = |a: usize| profiles.get(a).map_or(AgentKind::Robot, |p| p.kind);
    let pct = |f: &dyn Fn(&SimResult) -> bool| 100.0 * results.iter().filter(|r| f(r)).count() as f64 / n;
    let speeds = |k: AgentKind| {
        let v: Vec<f64> = results
            .iter()
            .flat_map(|r| r.mean_speeds.iter().enumerate().filter(|(a, _)| kind(*a) == k).map(|(_, &s)| s))
            .collect();
        Stats::of(&v)
    };
    let stat = |f: fn(&SimResult) -> f64| Stats::of(&results.iter().map(f).collect::<Vec<_>>());
    RunSummary {
        runs: results.len(),
        rst: stat(|r| r.real_search_time),
        divergence: stat(|r| r.divergence_distance),
        considered_areas: stat(|r| r.percent_considered_areas),
        robot_found: pct(&|r| r.found_by.is_some_and(|a| kind(a) == AgentKind::Robot)),
        person_found: pct(&|r| r.found_by.is_some_and(|a| kind(a) == AgentKind::Human)),
        not_found: pct(&|r| r.found_by.is_none()),
        robot_speed: speeds(AgentKind::Robot),
        person_speed: speeds(AgentKind::Human),
    }
}
