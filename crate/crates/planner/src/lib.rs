//! Session service for collaborative multi-agent search planning.
//!
//! A client creates a session from a scenario, asks for a first plan, draws
//! preferred areas to replan with sub-priors, then starts a simulated search
//! and follows it over server-sent events.

pub mod error;
pub mod server;
pub mod session;

pub use error::ApiError;
pub use server::{router, serve, AppState, ServiceConfig};
pub use session::{Command, Event, EventBody, JobStatus, Phase, PlanView, RunResult, Session};
