//! Planar points, raster shapes and exact segment traversal over a raster.

use serde::{Deserialize, Serialize};

/// A position in map coordinates, meters. Serialized as `[x, y]`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Dimensions of a row-major raster. Row 0 sits at `y = 0`; cell `(col, row)`
/// spans `[col·res, (col+1)·res) × [row·res, (row+1)·res)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridShape {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
}

impl GridShape {
    pub fn new(width: usize, height: usize, resolution: f64) -> Self {
        GridShape {
            width,
            height,
            resolution,
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.resolution,
            self.height as f64 * self.resolution,
        )
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    pub fn col_row(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    pub fn cell_center(&self, index: usize) -> Point {
        let (c, r) = self.col_row(index);
        Point::new(
            (c as f64 + 0.5) * self.resolution,
            (r as f64 + 0.5) * self.resolution,
        )
    }

    pub fn contains(&self, p: Point) -> bool {
        let (w, h) = self.extent();
        p.x >= 0.0 && p.y >= 0.0 && p.x <= w && p.y <= h
    }

    /// Cell containing `p`. Points on the far map edge map to the last cell.
    pub fn cell_of(&self, p: Point) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let c = ((p.x / self.resolution).floor() as usize).min(self.width - 1);
        let r = ((p.y / self.resolution).floor() as usize).min(self.height - 1);
        Some(self.index(c, r))
    }

    /// Inclusive column/row range of cells whose rectangles may intersect the
    /// disc of `radius` around `p`.
    pub fn cells_near(&self, p: Point, radius: f64) -> (usize, usize, usize, usize) {
        let res = self.resolution;
        let clamp = |v: f64, hi: usize| -> usize { v.floor().clamp(0.0, (hi - 1) as f64) as usize };
        (
            clamp((p.x - radius) / res, self.width),
            clamp((p.x + radius) / res, self.width),
            clamp((p.y - radius) / res, self.height),
            clamp((p.y + radius) / res, self.height),
        )
    }

    /// Distance from `p` to the closest point of cell `index`'s rectangle.
    pub fn distance_to_cell(&self, p: Point, index: usize) -> f64 {
        let (c, r) = self.col_row(index);
        let res = self.resolution;
        let (x0, x1) = (c as f64 * res, (c + 1) as f64 * res);
        let (y0, y1) = (r as f64 * res, (r + 1) as f64 * res);
        let dx = (x0 - p.x).max(0.0).max(p.x - x1);
        let dy = (y0 - p.y).max(0.0).max(p.y - y1);
        dx.hypot(dy)
    }
}

const TIE_EPS: f64 = 1e-9;

/// Visits every cell the segment `a → b` passes through, in order, stopping
/// early when `visit` returns `false`. Returns `false` iff stopped early.
///
/// When the segment crosses a cell corner exactly, both side cells are
/// visited as well (supercover).
pub fn traverse_segment(
    shape: &GridShape,
    a: Point,
    b: Point,
    mut visit: impl FnMut(usize) -> bool,
) -> bool {
    let res = shape.resolution;
    let (w, h) = (shape.width as i64, shape.height as i64);
    let (x0, y0) = (a.x / res, a.y / res);
    let (x1, y1) = (b.x / res, b.y / res);
    let mut cx = (x0.floor() as i64).clamp(0, w - 1);
    let mut cy = (y0.floor() as i64).clamp(0, h - 1);
    let (dx, dy) = (x1 - x0, y1 - y0);

    let axis = |origin: f64, delta: f64| -> (i64, f64, f64) {
        if delta > 0.0 {
            (1, (origin.floor() + 1.0 - origin) / delta, 1.0 / delta)
        } else if delta < 0.0 {
            (-1, (origin - origin.floor()) / -delta, -1.0 / delta)
        } else {
            (0, f64::INFINITY, f64::INFINITY)
        }
    };
    let (sx, mut tmx, tdx) = axis(x0, dx);
    let (sy, mut tmy, tdy) = axis(y0, dy);

    let in_bounds = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h;
    let idx = |x: i64, y: i64| (y * w + x) as usize;

    if !visit(idx(cx, cy)) {
        return false;
    }
    loop {
        let t = tmx.min(tmy);
        if t >= 1.0 - TIE_EPS {
            return true;
        }
        if (tmx - tmy).abs() <= TIE_EPS {
            for (x, y) in [(cx + sx, cy), (cx, cy + sy)] {
                if in_bounds(x, y) && !visit(idx(x, y)) {
                    return false;
                }
            }
            cx += sx;
            cy += sy;
            tmx += tdx;
            tmy += tdy;
        } else if tmx < tmy {
            cx += sx;
            tmx += tdx;
        } else {
            cy += sy;
            tmy += tdy;
        }
        if !in_bounds(cx, cy) {
            return true;
        }
        if !visit(idx(cx, cy)) {
            return false;
        }
    }
}

/// Axis-aligned rectangle in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub const fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Rect {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    /// Parameter interval `[t0, t1] ⊆ [0, 1]` of segment `a → b` inside the
    /// rectangle (Liang-Barsky clipping).
    pub fn clip_segment(&self, a: Point, b: Point) -> Option<(f64, f64)> {
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        for (p, q) in [
            (-dx, a.x - self.x_min),
            (dx, self.x_max - a.x),
            (-dy, a.y - self.y_min),
            (dy, self.y_max - a.y),
        ] {
            if p == 0.0 {
                if q < 0.0 {
                    return None;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
            }
        }
        (t0 <= t1).then_some((t0, t1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells(shape: &GridShape, a: Point, b: Point) -> Vec<(usize, usize)> {
        let mut out = vec![];
        traverse_segment(shape, a, b, |i| {
            out.push(shape.col_row(i));
            true
        });
        out
    }

    #[test]
    fn horizontal_segment_visits_row() {
        let s = GridShape::new(5, 3, 1.0);
        let got = cells(&s, Point::new(0.5, 1.5), Point::new(4.5, 1.5));
        assert_eq!(got, vec![(0, 1), (1, 1), (2, 1), (3, 1), (4, 1)]);
    }

    #[test]
    fn exact_diagonal_includes_side_cells() {
        let s = GridShape::new(3, 3, 1.0);
        let got = cells(&s, Point::new(0.0, 0.0), Point::new(2.0, 2.0));
        assert!(got.contains(&(0, 0)));
        assert!(got.contains(&(1, 0)));
        assert!(got.contains(&(0, 1)));
        assert!(got.contains(&(1, 1)));
        assert!(!got.contains(&(2, 2)));
    }

    #[test]
    fn degenerate_segment_visits_single_cell() {
        let s = GridShape::new(4, 4, 0.5);
        assert_eq!(cells(&s, Point::new(1.1, 1.1), Point::new(1.1, 1.1)), vec![(2, 2)]);
    }

    #[test]
    fn shallow_segment_matches_sampling() {
        let s = GridShape::new(20, 20, 0.5);
        let (a, b) = (Point::new(0.3, 0.7), Point::new(9.1, 4.4));
        let got = cells(&s, a, b);
        for k in 0..=10_000 {
            let p = a.lerp(b, k as f64 / 10_000.0);
            let c = s.col_row(s.cell_of(p).unwrap());
            assert!(got.contains(&c), "sample {p:?} in {c:?} not visited");
        }
    }

    #[test]
    fn clip_segment_half_inside() {
        let r = Rect { x_min: 0.0, y_min: 0.0, x_max: 1.0, y_max: 1.0 };
        let (t0, t1) = r.clip_segment(Point::new(0.5, 0.5), Point::new(1.5, 0.5)).unwrap();
        assert!((t0 - 0.0).abs() < 1e-12 && (t1 - 0.5).abs() < 1e-12);
        assert!(r.clip_segment(Point::new(2.0, 2.0), Point::new(3.0, 2.0)).is_none());
    }
}
