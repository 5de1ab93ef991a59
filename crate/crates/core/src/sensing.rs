//! Occlusion-aware circular sensor.
//!
//! A cell is visible from a sensor when it is free, its centre lies within the
//! visibility radius (boundary included) and the straight segment from the
//! sensor to the cell centre crosses no occupied cell. The cell holding the
//! sensor is always visible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::grid_world::OccupancyGrid;

const RADIUS_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibleRegion {
    pub agent: usize,
    pub center: Point,
    pub radius: f64,
    /// Sorted cell indices.
    pub visible_cells: Vec<usize>,
}

impl VisibleRegion {
    pub fn contains(&self, cell: usize) -> bool {
        self.visible_cells.binary_search(&cell).is_ok()
    }
}

/// Visibility predicate for one cell; the only geometry path of the sensor.
pub fn is_cell_visible(occ: &OccupancyGrid, center: Point, radius: f64, cell: usize) -> bool {
    if occ.occupied[cell] {
        return false;
    }
    if occ.shape.cell_of(center) == Some(cell) {
        return true;
    }
    let target = occ.shape.cell_center(cell);
    center.distance(target) <= radius + RADIUS_EPS && occ.line_of_sight(center, target)
}

fn visible_cells(occ: &OccupancyGrid, center: Point, radius: f64) -> Vec<usize> {
    let (c0, c1, r0, r1) = occ.shape.cells_near(center, radius);
    let mut cells = Vec::new();
    for r in r0..=r1 {
        for c in c0..=c1 {
            let i = occ.shape.index(c, r);
            if is_cell_visible(occ, center, radius, i) {
                cells.push(i);
            }
        }
    }
    cells
}

pub fn visible_region(
    occ: &OccupancyGrid,
    agent: usize,
    center: Point,
    radius: f64,
) -> Result<VisibleRegion> {
    if !occ.is_free_at(center) {
        return Err(Error::InvalidPose {
            x: center.x,
            y: center.y,
        });
    }
    if !(radius > 0.0) {
        return Err(Error::Validation(format!("radius must be positive, got {radius}")));
    }
    Ok(VisibleRegion {
        agent,
        center,
        radius,
        visible_cells: visible_cells(occ, center, radius),
    })
}

/// Ideal detection model at cell resolution: 1 inside the visible region, else 0.
pub fn detection_probability(region: &VisibleRegion, target_cell: usize) -> f64 {
    if region.contains(target_cell) {
        1.0
    } else {
        0.0
    }
}

/// Lowest agent id whose region contains the target.
pub fn first_detector(regions: &[VisibleRegion], target_cell: usize) -> Option<usize> {
    regions
        .iter()
        .filter(|r| r.contains(target_cell))
        .map(|r| r.agent)
        .min()
}

/// Visible cell lists for every node of a graph, as compact indices.
pub(crate) fn node_visibility(
    occ: &OccupancyGrid,
    positions: impl IntoIterator<Item = Point>,
    radius: f64,
) -> Vec<Vec<u32>> {
    positions
        .into_iter()
        .map(|p| {
            visible_cells(occ, p, radius)
                .into_iter()
                .map(|c| c as u32)
                .collect()
        })
        .collect()
}
