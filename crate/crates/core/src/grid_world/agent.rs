use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GridShape, Point, Rect};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    #[default]
    Robot,
    Human,
}

/// A search agent: where it starts, how far it sees, how fast it moves and
/// which semantic classes it cannot traverse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub id: usize,
    pub start_position: Point,
    pub visibility_radius: f64,
    pub speed: f64,
    #[serde(default)]
    pub restricted_classes: BTreeSet<u8>,
    #[serde(default)]
    pub kind: AgentKind,
}

impl AgentProfile {
    pub fn new(id: usize, start_position: Point, visibility_radius: f64, speed: f64) -> Self {
        AgentProfile {
            id,
            start_position,
            visibility_radius,
            speed,
            restricted_classes: BTreeSet::new(),
            kind: AgentKind::Robot,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.visibility_radius > 0.0 && self.visibility_radius.is_finite()) {
            return Err(Error::Validation(format!(
                "agent {}: visibility radius must be positive",
                self.id
            )));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(Error::Validation(format!("agent {}: speed must be positive", self.id)));
        }
        Ok(())
    }
}

/// Checks ids are exactly `0..M` in order and every profile is valid.
pub fn validate_profiles(profiles: &[AgentProfile]) -> Result<()> {
    if profiles.is_empty() {
        return Err(Error::Validation("at least one agent is required".into()));
    }
    for (i, p) in profiles.iter().enumerate() {
        if p.id != i {
            return Err(Error::Validation(format!(
                "agent ids must be 0..M in order; position {i} has id {}",
                p.id
            )));
        }
        p.validate()?;
    }
    Ok(())
}

/// Human-drawn rectangle marking where agent `owner` prefers to search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreferredArea {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub owner: usize,
}

impl PreferredArea {
    pub fn rect(&self) -> Rect {
        Rect {
            x_min: self.x_min,
            y_min: self.y_min,
            x_max: self.x_max,
            y_max: self.y_max,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.rect().contains(p)
    }

    pub fn validate(&self, shape: &GridShape, agent_count: usize) -> Result<()> {
        if !(self.x_min < self.x_max && self.y_min < self.y_max) {
            return Err(Error::Validation(format!(
                "preferred area {:?} is degenerate",
                self.rect()
            )));
        }
        let (w, h) = shape.extent();
        if self.x_max <= 0.0 || self.y_max <= 0.0 || self.x_min >= w || self.y_min >= h {
            return Err(Error::Validation(format!(
                "preferred area {:?} lies outside the map",
                self.rect()
            )));
        }
        if self.owner >= agent_count {
            return Err(Error::Validation(format!(
                "preferred area owner {} is not an agent (M = {agent_count})",
                self.owner
            )));
        }
        Ok(())
    }
}
