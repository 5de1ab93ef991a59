//! Time-stepped plan execution against a hidden target.

use serde::{Deserialize, Serialize};

use super::Plan;
use crate::geometry::Point;
use crate::grid_world::{OccupancyGrid, PreferredArea};
use crate::sensing::{is_cell_visible, visible_region};

/// Default simulation tick, seconds.
pub const DEFAULT_TICK: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Per-agent speeds; `None` uses the profile speeds.
    pub speeds: Option<Vec<f64>>,
    /// `None` runs until the plan is exhausted.
    pub timeout: Option<f64>,
    pub tick: f64,
    /// Areas used for the considered-areas metric.
    pub areas: Vec<PreferredArea>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            speeds: None,
            timeout: None,
            tick: DEFAULT_TICK,
            areas: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Found { agent: usize, time: f64 },
    ReportedFound { agent: Option<usize>, time: f64 },
    NotFound { time: f64 },
}

impl Outcome {
    pub fn time(&self) -> f64 {
        match *self {
            Outcome::Found { time, .. } | Outcome::ReportedFound { time, .. } | Outcome::NotFound { time } => time,
        }
    }
}

/// State after one tick.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickReport {
    pub time: f64,
    pub positions: Vec<Point>,
    /// Cells seen for the first time this tick (only when coverage is tracked).
    pub newly_swept: Vec<u32>,
    /// Prior mass seen so far (only when coverage is tracked).
    pub cumulative_probability: f64,
    pub outcome: Option<Outcome>,
}

struct Track {
    points: Vec<Point>,
    /// Arc length at each vertex.
    at: Vec<f64>,
}

impl Track {
    fn new(points: Vec<Point>) -> Self {
        let mut at = Vec::with_capacity(points.len());
        let mut s = 0.0;
        for (i, p) in points.iter().enumerate() {
            if i > 0 {
                s += points[i - 1].distance(*p);
            }
            at.push(s);
        }
        Track { points, at }
    }

    fn length(&self) -> f64 {
        self.at.last().copied().unwrap_or(0.0)
    }

    fn position(&self, s: f64) -> Point {
        if self.points.len() == 1 || s <= 0.0 {
            return self.points[0];
        }
        if s >= self.length() {
            return *self.points.last().unwrap();
        }
        let k = self.at.partition_point(|&a| a <= s).max(1);
        let (a, b) = (self.at[k - 1], self.at[k]);
        let t = if b > a { (s - a) / (b - a) } else { 0.0 };
        self.points[k - 1].lerp(self.points[k], t)
    }

    fn distance_to(&self, p: Point) -> f64 {
        if self.points.len() == 1 {
            return self.points[0].distance(p);
        }
        self.points
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(a.lerp(b, t))
}

/// One search execution. Agents follow their polylines at constant speed and
/// sense every tick; the first agent (by id) whose footprint contains the
/// target cell finds it.
pub struct Simulation {
    occupancy: OccupancyGrid,
    prior: Vec<f64>,
    tracks: Vec<Track>,
    radii: Vec<f64>,
    speeds: Vec<f64>,
    target_cell: Option<usize>,
    tick: f64,
    timeout: f64,
    ticks: usize,
    track_coverage: bool,
    swept: Vec<bool>,
    found_mass: f64,
    outcome: Option<Outcome>,
    divergence_sum: f64,
    divergence_samples: usize,
}

impl Simulation {
    /// `polylines[m]` is agent `m`'s route in meters; `radii` and `speeds` are
    /// per agent. Without a timeout the run ends when the slowest agent
    /// finishes its route.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        occupancy: OccupancyGrid,
        prior: Vec<f64>,
        polylines: &[Vec<Point>],
        radii: Vec<f64>,
        speeds: Vec<f64>,
        target_cell: Option<usize>,
        tick: f64,
        timeout: Option<f64>,
    ) -> Self {
        let tracks: Vec<Track> = polylines.iter().map(|p| Track::new(p.clone())).collect();
        let timeout = timeout.unwrap_or_else(|| {
            tracks
                .iter()
                .zip(&speeds)
                .map(|(t, v)| t.length() / v)
                .fold(0.0, f64::max)
        });
        let n = prior.len();
        Simulation {
            occupancy,
            prior,
            tracks,
            radii,
            speeds,
            target_cell,
            tick,
            timeout,
            ticks: 0,
            track_coverage: false,
            swept: vec![false; n],
            found_mass: 0.0,
            outcome: None,
            divergence_sum: 0.0,
            divergence_samples: 0,
        }
    }

    /// Also record swept cells every tick (costlier).
    pub fn with_coverage(mut self) -> Self {
        self.track_coverage = true;
        self
    }

    pub fn time(&self) -> f64 {
        self.ticks as f64 * self.tick
    }

    pub fn timeout(&self) -> f64 {
        self.timeout
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn is_finished(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn positions_at(&self, t: f64) -> Vec<Point> {
        self.tracks
            .iter()
            .zip(&self.speeds)
            .map(|(tr, v)| tr.position(v * t))
            .collect()
    }

    /// Distance each agent has covered so far.
    pub fn traveled(&self) -> Vec<f64> {
        let t = self.outcome.map_or(self.time(), |o| o.time());
        self.tracks
            .iter()
            .zip(&self.speeds)
            .map(|(tr, v)| (v * t).min(tr.length()))
            .collect()
    }

    pub fn divergence(&self) -> f64 {
        if self.divergence_samples == 0 {
            0.0
        } else {
            self.divergence_sum / self.divergence_samples as f64
        }
    }

    /// Ends the run on an external report (for example a person pressing
    /// "found").
    pub fn report_found(&mut self, agent: Option<usize>) -> Option<Outcome> {
        if self.outcome.is_none() {
            self.outcome = Some(Outcome::ReportedFound {
                agent,
                time: self.time(),
            });
        }
        self.outcome
    }

    /// Senses at the current time, then advances the clock by one tick.
    pub fn step(&mut self) -> TickReport {
        let time = self.time();
        let positions = self.positions_at(time);
        if let Some(outcome) = self.outcome {
            return TickReport {
                time,
                positions,
                newly_swept: Vec::new(),
                cumulative_probability: self.found_mass,
                outcome: Some(outcome),
            };
        }
        let mut newly_swept = Vec::new();
        if self.track_coverage {
            for (m, &p) in positions.iter().enumerate() {
                if let Ok(region) = visible_region(&self.occupancy, m, p, self.radii[m]) {
                    for c in region.visible_cells {
                        if !self.swept[c] {
                            self.swept[c] = true;
                            self.found_mass += self.prior[c];
                            newly_swept.push(c as u32);
                        }
                    }
                }
            }
        }
        for (tr, &p) in self.tracks.iter().zip(&positions) {
            self.divergence_sum += tr.distance_to(p);
            self.divergence_samples += 1;
        }
        let detector = self.target_cell.and_then(|cell| {
            positions
                .iter()
                .zip(&self.radii)
                .position(|(&p, &r)| is_cell_visible(&self.occupancy, p, r, cell))
        });
        if let Some(agent) = detector {
            self.outcome = Some(Outcome::Found { agent, time });
        } else if time + self.tick > self.timeout + 1e-9 {
            self.outcome = Some(Outcome::NotFound { time: self.timeout });
        }
        self.ticks += 1;
        TickReport {
            time,
            positions,
            newly_swept,
            cumulative_probability: self.found_mass,
            outcome: self.outcome,
        }
    }

    /// Metrics of a finished run; `None` while it is still going.
    pub fn summarize(&self, plan: &Plan, areas: &[PreferredArea]) -> Option<SimResult> {
        let outcome = self.outcome?;
        let (found_by, rst) = match outcome {
            Outcome::Found { agent, time } => (Some(agent), time),
            Outcome::ReportedFound { agent, time } => (agent, time),
            Outcome::NotFound { .. } => (None, self.timeout),
        };
        let elapsed = outcome.time();
        let traveled = self.traveled();
        Some(SimResult {
            found_by,
            real_search_time: rst,
            planned_est: plan.est,
            mean_speeds: traveled
                .iter()
                .map(|d| if elapsed > 0.0 { d / elapsed } else { 0.0 })
                .collect(),
            path_distance: traveled,
            divergence_distance: self.divergence(),
            computation_time: plan.computation_time,
            percent_considered_areas: percent_considered_areas(&plan.polylines, areas),
        })
    }

    pub fn run_to_end(&mut self) -> Outcome {
        loop {
            if let Some(o) = self.step().outcome {
                return o;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub found_by: Option<usize>,
    /// Real search time, seconds; the timeout when nothing was found.
    pub real_search_time: f64,
    pub planned_est: f64,
    pub path_distance: Vec<f64>,
    /// Mean distance between the agents and their planned routes.
    pub divergence_distance: f64,
    pub computation_time: f64,
    pub percent_considered_areas: f64,
    /// Mean speed of each agent over the run.
    pub mean_speeds: Vec<f64>,
}

/// Executes `plan` in `scenario` against its target cell.
pub fn run_search(scenario: &super::Scenario, plan: &Plan, config: &SimConfig) -> SimResult {
    let speeds = config
        .speeds
        .clone()
        .unwrap_or_else(|| scenario.profiles.iter().map(|p| p.speed).collect());
    let radii = scenario.profiles.iter().map(|p| p.visibility_radius).collect();
    let mut sim = Simulation::new(
        scenario.occupancy.clone(),
        Vec::new(),
        &plan.polylines,
        radii,
        speeds,
        Some(scenario.target_cell),
        config.tick,
        config.timeout,
    );
    sim.run_to_end();
    sim.summarize(plan, &config.areas).expect("run has ended")
}

/// Length of `polyline` lying inside the union of `rects`.
fn length_inside(polyline: &[Point], rects: &[crate::geometry::Rect]) -> f64 {
    let mut inside = 0.0;
    let mut spans: Vec<(f64, f64)> = Vec::new();
    for w in polyline.windows(2) {
        let len = w[0].distance(w[1]);
        if len == 0.0 {
            continue;
        }
        spans.clear();
        spans.extend(rects.iter().filter_map(|r| r.clip_segment(w[0], w[1])));
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut covered = 0.0;
        let mut cur: Option<(f64, f64)> = None;
        for &(a, b) in &spans {
            match cur {
                Some((s, e)) if a <= e => cur = Some((s, e.max(b))),
                Some((s, e)) => {
                    covered += e - s;
                    cur = Some((a, b));
                }
                None => cur = Some((a, b)),
            }
        }
        if let Some((s, e)) = cur {
            covered += e - s;
        }
        inside += covered * len;
    }
    inside
}

fn polyline_length(polyline: &[Point]) -> f64 {
    polyline.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Percent of each agent's route inside the areas it owns.
pub fn considered_areas_by_agent(polylines: &[Vec<Point>], areas: &[PreferredArea]) -> Vec<f64> {
    polylines
        .iter()
        .enumerate()
        .map(|(m, line)| {
            let total = polyline_length(line);
            if total == 0.0 {
                return 0.0;
            }
            let rects: Vec<_> = areas.iter().filter(|a| a.owner == m).map(PreferredArea::rect).collect();
            100.0 * length_inside(line, &rects) / total
        })
        .collect()
}

/// Percent of the whole plan's length that lies inside areas owned by the
/// agent walking it.
pub fn percent_considered_areas(polylines: &[Vec<Point>], areas: &[PreferredArea]) -> f64 {
    let total: f64 = polylines.iter().map(|l| polyline_length(l)).sum();
    if total == 0.0 {
        return 0.0;
    }
    let inside: f64 = polylines
        .iter()
        .enumerate()
        .map(|(m, line)| {
            let rects: Vec<_> = areas.iter().filter(|a| a.owner == m).map(PreferredArea::rect).collect();
            length_inside(line, &rects)
        })
        .sum();
    (100.0 * inside / total).clamp(0.0, 100.0)
}
