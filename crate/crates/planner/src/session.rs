//! Session state and the collaborative planning protocol.
//!
//! A session walks `created → planned → areas_submitted → replanned →
//! running → finished`. Replanning may repeat (`replanned → areas_submitted`)
//! and a first plan may be recomputed while still `planned`.

use std::sync::Arc;

use mts_core::aco::MmasParams;
use mts_core::belief::{split_sub_priors, BeliefState};
use mts_core::geometry::Point;
use mts_core::grid_world::{AgentKind, PreferredArea};
use mts_core::problem::SearchProblem;
use mts_core::sim::{
    considered_areas_by_agent, percent_considered_areas, plan_with_belief, Outcome, Plan,
    Scenario, ScenarioSpec, SimResult, Simulation, DEFAULT_TICK,
};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use crate::error::ApiError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Created,
    Planned,
    AreasSubmitted,
    Replanned,
    Running,
    Finished,
}

/// Client commands that change the phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Plan,
    Replan,
    Start,
    Found,
}

impl Phase {
    pub fn allows(self, cmd: Command) -> bool {
        use Phase::*;
        match cmd {
            Command::Plan => matches!(self, Created | Planned),
            Command::Replan => matches!(self, Planned | AreasSubmitted | Replanned),
            Command::Start => matches!(self, Planned | Replanned),
            Command::Found => self == Running,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum JobStatus {
    #[default]
    Idle,
    Running,
    Done,
    Failed {
        message: String,
    },
}

/// A plan as shown to clients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanView {
    #[serde(flatten)]
    pub plan: Plan,
    pub percent_considered_areas: f64,
    pub considered_areas_by_agent: Vec<f64>,
    /// Detection probability of each plan step.
    pub step_probabilities: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventBody {
    Phase {
        phase: Phase,
    },
    Plan {
        plan: Box<PlanView>,
    },
    JobFailed {
        message: String,
    },
    State {
        time: f64,
        positions: Vec<Point>,
        newly_swept: Vec<u32>,
        cumulative_probability: f64,
    },
    RobotFound {
        agent: usize,
        time: f64,
        position: Point,
    },
    HumanFoundReported {
        agent: Option<usize>,
        time: f64,
    },
    NotFound {
        time: f64,
    },
}

impl EventBody {
    pub fn is_terminal(&self) -> bool {
        matches!(
            self,
            EventBody::RobotFound { .. } | EventBody::HumanFoundReported { .. } | EventBody::NotFound { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            EventBody::Phase { .. } => "phase",
            EventBody::Plan { .. } => "plan",
            EventBody::JobFailed { .. } => "job_failed",
            EventBody::State { .. } => "state",
            EventBody::RobotFound { .. } => "robot_found",
            EventBody::HumanFoundReported { .. } => "human_found_reported",
            EventBody::NotFound { .. } => "not_found",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// Name of the terminal event.
    pub terminal: String,
    #[serde(flatten)]
    pub result: SimResult,
}

/// Settings for a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StartRequest {
    pub speeds: Option<Vec<f64>>,
    /// Seconds of simulated time; defaults to the plan duration.
    pub timeout: Option<f64>,
    pub tick: Option<f64>,
    /// Simulated seconds per wall-clock second; zero or less runs unthrottled.
    pub time_scale: Option<f64>,
}

pub struct Session {
    pub id: String,
    pub spec: ScenarioSpec,
    pub scenario: Arc<Scenario>,
    pub problem: Arc<SearchProblem>,
    pub params: MmasParams,
    pub phase: Phase,
    pub job: JobStatus,
    pub plan: Option<PlanView>,
    /// Plan of the first (shared-map) search, kept for comparison.
    pub first_plan: Option<PlanView>,
    pub areas: Vec<PreferredArea>,
    pub result: Option<RunResult>,
    sim: Option<Simulation>,
    events: Vec<Event>,
    tx: broadcast::Sender<Event>,
}

const EVENT_BUFFER: usize = 4096;

impl Session {
    pub fn new(id: String, scenario: Scenario, problem: SearchProblem, params: MmasParams) -> Self {
        let (tx, _) = broadcast::channel(EVENT_BUFFER);
        let mut s = Session {
            id,
            spec: scenario.spec.clone(),
            scenario: Arc::new(scenario),
            problem: Arc::new(problem),
            params,
            phase: Phase::Created,
            job: JobStatus::Idle,
            plan: None,
            first_plan: None,
            areas: Vec::new(),
            result: None,
            sim: None,
            events: Vec::new(),
            tx,
        };
        s.emit(EventBody::Phase { phase: Phase::Created });
        s
    }

    fn emit(&mut self, body: EventBody) {
        let event = Event {
            seq: self.events.len() as u64 + 1,
            body,
        };
        self.events.push(event.clone());
        // Nobody listening is fine.
        let _ = self.tx.send(event);
    }

    fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
        self.emit(EventBody::Phase { phase });
    }

    /// Events with `seq > after`, plus a receiver for later ones.
    pub fn subscribe(&self, after: u64) -> (Vec<Event>, broadcast::Receiver<Event>) {
        let past = self.events.iter().filter(|e| e.seq > after).cloned().collect();
        (past, self.tx.subscribe())
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    /// Checks that `cmd` is legal now and that no optimizer job is running.
    pub fn check(&self, cmd: Command) -> Result<(), ApiError> {
        if !self.phase.allows(cmd) {
            return Err(ApiError::protocol(format!(
                "{cmd:?} is not allowed in phase {:?}",
                self.phase
            ), self.phase));
        }
        if self.job == JobStatus::Running && cmd != Command::Found {
            return Err(ApiError::busy("an optimization is already running for this session"));
        }
        Ok(())
    }

    /// Belief for a set of preferred areas; no areas means the shared map.
    pub fn belief_for(&self, areas: &[PreferredArea]) -> Result<BeliefState, ApiError> {
        let m = self.scenario.profiles.len();
        for a in areas {
            a.validate(&self.scenario.shape(), m).map_err(ApiError::from)?;
        }
        if areas.is_empty() {
            return Ok(BeliefState::shared(self.scenario.prior.clone()));
        }
        let layers = split_sub_priors(&self.scenario.prior, areas, m).map_err(ApiError::from)?;
        BeliefState::with_sub_priors(layers).map_err(ApiError::from)
    }

    pub fn begin_plan(&mut self) -> Result<(), ApiError> {
        self.check(Command::Plan)?;
        self.job = JobStatus::Running;
        Ok(())
    }

    pub fn complete_plan(&mut self, result: Result<PlanView, ApiError>) -> Result<PlanView, ApiError> {
        match result {
            Ok(view) => {
                self.job = JobStatus::Done;
                self.areas.clear();
                self.plan = Some(view.clone());
                self.first_plan = Some(view.clone());
                self.emit(EventBody::Plan {
                    plan: Box::new(view.clone()),
                });
                self.set_phase(Phase::Planned);
                Ok(view)
            }
            Err(e) => {
                self.job = JobStatus::Failed {
                    message: e.message.clone(),
                };
                self.emit(EventBody::JobFailed {
                    message: e.message.clone(),
                });
                Err(e)
            }
        }
    }

    pub fn begin_replan(&mut self, areas: Vec<PreferredArea>) -> Result<BeliefState, ApiError> {
        self.check(Command::Replan)?;
        let belief = self.belief_for(&areas)?;
        self.areas = areas;
        self.job = JobStatus::Running;
        self.set_phase(Phase::AreasSubmitted);
        Ok(belief)
    }

    pub fn complete_replan(&mut self, result: Result<PlanView, ApiError>) -> Result<PlanView, ApiError> {
        match result {
            Ok(view) => {
                self.job = JobStatus::Done;
                self.plan = Some(view.clone());
                self.emit(EventBody::Plan {
                    plan: Box::new(view.clone()),
                });
                self.set_phase(Phase::Replanned);
                Ok(view)
            }
            Err(e) => {
                self.job = JobStatus::Failed {
                    message: e.message.clone(),
                };
                self.emit(EventBody::JobFailed {
                    message: e.message.clone(),
                });
                Err(e)
            }
        }
    }

    /// Enters `running`; returns the tick length and the wall-clock pause
    /// between ticks.
    pub fn start(&mut self, req: &StartRequest) -> Result<(f64, f64), ApiError> {
        self.check(Command::Start)?;
        let plan = self.plan.as_ref().ok_or_else(|| ApiError::protocol("no plan to run".into(), self.phase))?;
        let m = self.scenario.profiles.len();
        let speeds = match &req.speeds {
            Some(v) if v.len() != m || v.iter().any(|s| !(*s > 0.0 && s.is_finite())) => {
                return Err(ApiError::invalid(format!("speeds must be {m} positive numbers")));
            }
            Some(v) => v.clone(),
            None => self.scenario.profiles.iter().map(|p| p.speed).collect(),
        };
        let tick = req.tick.unwrap_or(DEFAULT_TICK);
        if !(tick > 0.0 && tick.is_finite()) {
            return Err(ApiError::invalid("tick must be positive".into()));
        }
        if let Some(t) = req.timeout {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(ApiError::invalid("timeout must be nonnegative".into()));
            }
        }
        let scale = req.time_scale.unwrap_or(1.0);
        let pause = if scale > 0.0 && scale.is_finite() { tick / scale } else { 0.0 };
        let sc = &self.scenario;
        self.sim = Some(
            Simulation::new(
                sc.occupancy.clone(),
                sc.prior.mass.clone(),
                &plan.plan.polylines,
                sc.profiles.iter().map(|p| p.visibility_radius).collect(),
                speeds,
                Some(sc.target_cell),
                tick,
                req.timeout,
            )
            .with_coverage(),
        );
        self.set_phase(Phase::Running);
        Ok((tick, pause))
    }

    /// Advances the run by one tick. Returns `false` once the run is over.
    pub fn tick(&mut self) -> bool {
        if self.phase != Phase::Running {
            return false;
        }
        let Some(sim) = self.sim.as_mut() else {
            return false;
        };
        let report = sim.step();
        let outcome = report.outcome;
        self.emit(EventBody::State {
            time: report.time,
            positions: report.positions.clone(),
            newly_swept: report.newly_swept,
            cumulative_probability: report.cumulative_probability,
        });
        match outcome {
            Some(o) => {
                self.finish(o, &report.positions);
                false
            }
            None => true,
        }
    }

    /// External "object found" report.
    pub fn report_found(&mut self, agent: Option<usize>) -> Result<RunResult, ApiError> {
        self.check(Command::Found)?;
        if let Some(a) = agent {
            if a >= self.scenario.profiles.len() {
                return Err(ApiError::invalid(format!("unknown agent {a}")));
            }
        }
        let sim = self.sim.as_mut().expect("running sessions have a simulation");
        let outcome = sim.report_found(agent).expect("report ends the run");
        let positions = sim.positions_at(outcome.time());
        self.finish(outcome, &positions);
        Ok(self.result.clone().expect("finished sessions have a result"))
    }

    fn finish(&mut self, outcome: Outcome, positions: &[Point]) {
        let sim = self.sim.as_ref().expect("running sessions have a simulation");
        let plan = &self.plan.as_ref().expect("running sessions have a plan").plan;
        let kind = |a: usize| self.scenario.profiles[a].kind;
        let (terminal, found_by, rst) = match outcome {
            Outcome::Found { agent, time } if kind(agent) == AgentKind::Robot => {
                (EventBody::RobotFound {
                    agent,
                    time,
                    position: positions[agent],
                }, Some(agent), time)
            }
            Outcome::Found { agent, time } => (
                EventBody::HumanFoundReported {
                    agent: Some(agent),
                    time,
                },
                Some(agent),
                time,
            ),
            Outcome::ReportedFound { agent, time } => {
                (EventBody::HumanFoundReported { agent, time }, agent, time)
            }
            Outcome::NotFound { time } => (EventBody::NotFound { time }, None, time),
        };
        let mut result = sim.summarize(plan, &self.areas).expect("run has ended");
        result.found_by = found_by;
        result.real_search_time = rst;
        self.result = Some(RunResult {
            terminal: terminal.name().to_string(),
            result,
        });
        self.emit(terminal);
        self.set_phase(Phase::Finished);
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            id: self.id.clone(),
            phase: self.phase,
            spec: self.spec.clone(),
            params: self.params.clone(),
            plan: self.plan.clone(),
            first_plan: self.first_plan.clone(),
            areas: self.areas.clone(),
            result: self.result.clone(),
            events: self.events.clone(),
        }
    }
}

/// Session contents written on demand.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Snapshot {
    pub id: String,
    pub phase: Phase,
    pub spec: ScenarioSpec,
    pub params: MmasParams,
    pub plan: Option<PlanView>,
    pub first_plan: Option<PlanView>,
    pub areas: Vec<PreferredArea>,
    pub result: Option<RunResult>,
    pub events: Vec<Event>,
}

/// Runs the optimizer and packages the result; plans that miss the residual
/// target are reported as failures.
pub fn compute_plan(
    problem: &SearchProblem,
    belief: &BeliefState,
    params: &MmasParams,
    areas: &[PreferredArea],
) -> Result<PlanView, ApiError> {
    let (plan, evaluation) = plan_with_belief(problem, belief, params).map_err(ApiError::from)?;
    if !plan.complete {
        return Err(ApiError::incomplete(plan.residual, params.residual_target));
    }
    Ok(PlanView {
        percent_considered_areas: percent_considered_areas(&plan.polylines, areas),
        considered_areas_by_agent: considered_areas_by_agent(&plan.polylines, areas),
        step_probabilities: evaluation.step_probabilities,
        plan,
    })
}
