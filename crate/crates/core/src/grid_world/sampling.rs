use serde::{Deserialize, Serialize};

use super::map::OccupancyGrid;
use crate::geometry::Point;

/// Default obstacle clearance around a square centroid, meters.
pub const DEFAULT_CLEARANCE: f64 = 0.40;
/// Default side of a sampling square, meters.
pub const DEFAULT_GRID_DISTANCE: f64 = 3.5;

/// A sampled graph node and the sampling square it came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledNode {
    pub position: Point,
    pub square: (usize, usize),
}

/// Axis-aligned sampling square, clipped to the map extent.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Square {
    pub col: usize,
    pub row: usize,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Square {
    fn centroid(&self) -> Point {
        Point::new((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    fn contains_center(&self, p: Point) -> bool {
        p.x >= self.x0 && p.x < self.x1 && p.y >= self.y0 && p.y < self.y1
    }
}

pub(crate) fn squares(occ: &OccupancyGrid, grid_distance: f64) -> Vec<Square> {
    let (w, h) = occ.shape.extent();
    let nx = (w / grid_distance - 1e-9).ceil().max(1.0) as usize;
    let ny = (h / grid_distance - 1e-9).ceil().max(1.0) as usize;
    let mut out = Vec::with_capacity(nx * ny);
    for row in 0..ny {
        for col in 0..nx {
            out.push(Square {
                col,
                row,
                x0: col as f64 * grid_distance,
                y0: row as f64 * grid_distance,
                x1: ((col + 1) as f64 * grid_distance).min(w),
                y1: ((row + 1) as f64 * grid_distance).min(h),
            });
        }
    }
    out
}

fn obstacle_within(occ: &OccupancyGrid, p: Point, clearance: f64) -> bool {
    let (c0, c1, r0, r1) = occ.shape.cells_near(p, clearance);
    (r0..=r1).any(|r| {
        (c0..=c1).any(|c| {
            let i = occ.shape.index(c, r);
            occ.occupied[i] && occ.shape.distance_to_cell(p, i) <= clearance
        })
    })
}

fn distance_to_nearest_obstacle(occ: &OccupancyGrid, p: Point) -> f64 {
    occ.occupied
        .iter()
        .enumerate()
        .filter(|(_, &o)| o)
        .map(|(i, _)| occ.shape.distance_to_cell(p, i))
        .fold(f64::INFINITY, f64::min)
}

fn sample_square(occ: &OccupancyGrid, sq: &Square, clearance: f64) -> Option<Point> {
    let centroid = sq.centroid();
    if !obstacle_within(occ, centroid, clearance) {
        return Some(centroid);
    }

    let free: Vec<Point> = (0..occ.shape.len())
        .filter(|&i| !occ.occupied[i])
        .map(|i| occ.shape.cell_center(i))
        .filter(|&p| sq.contains_center(p))
        .collect();
    if free.is_empty() {
        return None;
    }
    let n = free.len() as f64;
    let region_centroid = Point::new(
        free.iter().map(|p| p.x).sum::<f64>() / n,
        free.iter().map(|p| p.y).sum::<f64>() / n,
    );
    if occ.is_free_at(region_centroid) {
        return Some(region_centroid);
    }

    // Free vertex farthest from any obstacle; ties → lowest x, then y.
    let nudge = occ.shape.resolution * 1e-6;
    let toward = |v: f64, c: f64| if v < c { v + nudge } else { v - nudge };
    let mut best: Option<(f64, Point)> = None;
    for v in [
        Point::new(sq.x0, sq.y0),
        Point::new(sq.x0, sq.y1),
        Point::new(sq.x1, sq.y0),
        Point::new(sq.x1, sq.y1),
    ] {
        let inside = Point::new(toward(v.x, centroid.x), toward(v.y, centroid.y));
        if !occ.is_free_at(inside) {
            continue;
        }
        let d = distance_to_nearest_obstacle(occ, v);
        let better = match best {
            None => true,
            Some((bd, bp)) => {
                d > bd || (d == bd && (v.x < bp.x || (v.x == bp.x && v.y < bp.y)))
            }
        };
        if better {
            best = Some((d, v));
        }
    }
    if let Some((_, v)) = best {
        return Some(v);
    }

    free.into_iter().min_by(|a, b| {
        a.distance(region_centroid)
            .total_cmp(&b.distance(region_centroid))
            .then(a.x.total_cmp(&b.x))
            .then(a.y.total_cmp(&b.y))
    })
}

/// Tiles the map with squares of side `grid_distance` and samples at most
/// one node per square.
///
/// Per square: the centroid when no obstacle lies within `clearance` of it;
/// otherwise the centroid of the square's free cells if that lands on free
/// space; otherwise the free square vertex farthest from obstacles;
/// otherwise the free cell centre nearest the free-region centroid.
/// Squares without free cells emit nothing.
pub fn sample_nodes(occ: &OccupancyGrid, grid_distance: f64, clearance: f64) -> Vec<SampledNode> {
    assert!(grid_distance > 0.0, "grid_distance must be positive");
    assert!(clearance >= 0.0, "clearance must be nonnegative");
    squares(occ, grid_distance)
        .iter()
        .filter_map(|sq| {
            sample_square(occ, sq, clearance).map(|position| SampledNode {
                position,
                square: (sq.col, sq.row),
            })
        })
        .collect()
}
