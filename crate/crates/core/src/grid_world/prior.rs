use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::map::{json_error, OccupancyGrid, SegmentedMap, CLASS_COUNT};
use crate::error::{Error, Result};
use crate::geometry::GridShape;

/// Per-cell target-location mass. Not necessarily normalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityGrid {
    #[serde(flatten)]
    pub shape: GridShape,
    pub mass: Vec<f64>,
}

impl ProbabilityGrid {
    pub fn zeros(shape: GridShape) -> Self {
        ProbabilityGrid {
            shape,
            mass: vec![0.0; shape.len()],
        }
    }

    /// Equal mass on every free cell, normalized to 1.
    pub fn uniform(occ: &OccupancyGrid) -> Result<Self> {
        let mut g = ProbabilityGrid {
            shape: occ.shape,
            mass: occ.occupied.iter().map(|&o| if o { 0.0 } else { 1.0 }).collect(),
        };
        g.normalize_to(1.0)?;
        Ok(g)
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn scale(&mut self, factor: f64) {
        self.mass.iter_mut().for_each(|m| *m *= factor);
    }

    /// Rescales so the total equals `target`.
    pub fn normalize_to(&mut self, target: f64) -> Result<()> {
        let total = self.total();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::DegeneratePrior);
        }
        self.scale(target / total);
        Ok(())
    }

    /// Zeroes mass on occupied cells.
    pub fn mask(&mut self, occ: &OccupancyGrid) {
        for (m, &o) in self.mass.iter_mut().zip(&occ.occupied) {
            if o {
                *m = 0.0;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mass.len() != self.shape.len() {
            return Err(Error::Validation(format!(
                "expected {} mass values, found {}",
                self.shape.len(),
                self.mass.len()
            )));
        }
        if let Some((i, m)) = self
            .mass
            .iter()
            .enumerate()
            .find(|(_, m)| !(**m >= 0.0 && m.is_finite()))
        {
            return Err(Error::Validation(format!("cell {i} has invalid mass {m}")));
        }
        Ok(())
    }

    /// Display form of the belief: mass divided by its total.
    pub fn normalized(&self) -> Option<ProbabilityGrid> {
        let mut g = self.clone();
        g.normalize_to(1.0).ok().map(|_| g)
    }
}

/// Stand-in for a learned predictor: each free cell gets the weight of its
/// semantic class, then the map is normalized to 1.
pub fn class_weight_prior(
    map: &SegmentedMap,
    occ: &OccupancyGrid,
    weights: &[f64; CLASS_COUNT],
) -> Result<ProbabilityGrid> {
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::Validation(format!("class weight {w} must be nonnegative")));
    }
    let mut g = ProbabilityGrid {
        shape: map.shape,
        mass: map
            .classes
            .iter()
            .zip(&occ.occupied)
            .map(|(&c, &o)| if o { 0.0 } else { weights[c as usize] })
            .collect(),
    };
    g.normalize_to(1.0)?;
    Ok(g)
}

pub fn load_prior(path: &Path) -> Result<ProbabilityGrid> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_prior(&text)
}

pub fn parse_prior(text: &str) -> Result<ProbabilityGrid> {
    let g: ProbabilityGrid = serde_json::from_str(text).map_err(|e| json_error(&e))?;
    g.validate()?;
    Ok(g)
}
