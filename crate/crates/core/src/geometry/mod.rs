//! Planar geometry: points, rectangles, polygons, nearest-site search and
//! clipped Voronoi diagrams.

mod kdtree;
mod voronoi;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use kdtree::KdTree;
pub use voronoi::{build_voronoi, nearest_site, neighborhood, NeighborhoodPolygon, VoronoiDiagram};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist2(other).sqrt()
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    /// Smallest rectangle containing every point, or `None` for no points.
    pub fn bounding(points: &[Point]) -> Option<Rect> {
        let first = points.first()?;
        let mut r = Rect::new(*first, *first);
        for p in &points[1..] {
            r.include(p);
        }
        Some(r)
    }

    pub fn include(&mut self, p: &Point) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diagonal(&self) -> f64 {
        self.min.dist(&self.max)
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Grow by `fraction` of the width (height) on the left and right (top
    /// and bottom). A zero-length side borrows the other side's length, and
    /// a single point becomes a unit-padded square.
    pub fn expanded(&self, fraction: f64) -> Rect {
        let (w, h) = (self.width(), self.height());
        let fallback = if w.max(h) > 0.0 {
            w.max(h)
        } else {
            1.0 / fraction
        };
        let pad_x = fraction * if w > 0.0 { w } else { fallback };
        let pad_y = fraction * if h > 0.0 { h } else { fallback };
        Rect::new(
            Point::new(self.min.x - pad_x, self.min.y - pad_y),
            Point::new(self.max.x + pad_x, self.max.y + pad_y),
        )
    }

    /// Counter-clockwise corner list.
    pub fn corners(&self) -> [Point; 4] {
        [
            self.min,
            Point::new(self.max.x, self.min.y),
            self.max,
            Point::new(self.min.x, self.max.y),
        ]
    }
}

/// Signed shoelace area; positive for counter-clockwise vertex order.
pub fn signed_area(polygon: &[Point]) -> f64 {
    let n = polygon.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[(i + 1) % n]);
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}

pub fn polygon_area(polygon: &[Point]) -> f64 {
    signed_area(polygon).abs()
}

/// Area-weighted centroid. Degenerate (zero-area) polygons fall back to the
/// vertex mean.
pub fn polygon_centroid(polygon: &[Point]) -> Result<Point> {
    let n = polygon.len();
    if n < 3 {
        return Err(Error::Invalid(format!(
            "polygon centroid needs at least 3 vertices, got {n}"
        )));
    }
    let area = signed_area(polygon);
    let scale = polygon
        .iter()
        .map(|p| p.x.abs().max(p.y.abs()))
        .fold(0.0f64, f64::max)
        .max(1.0);
    if area.abs() <= 1e-12 * scale * scale {
        return Ok(mean(polygon.iter().copied()).expect("non-empty"));
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[(i + 1) % n]);
        let cross = a.x * b.y - b.x * a.y;
        cx += (a.x + b.x) * cross;
        cy += (a.y + b.y) * cross;
    }
    Ok(Point::new(cx / (6.0 * area), cy / (6.0 * area)))
}

/// Unweighted arithmetic mean of the points.
pub fn mean(points: impl IntoIterator<Item = Point>) -> Option<Point> {
    weighted_mean(points.into_iter().map(|p| (p, 1.0)))
}

/// Weighted arithmetic mean; `None` when the total weight is not positive.
pub fn weighted_mean(points: impl IntoIterator<Item = (Point, f64)>) -> Option<Point> {
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for (p, w) in points {
        sx += p.x * w;
        sy += p.y * w;
        sw += w;
    }
    (sw > 0.0).then(|| Point::new(sx / sw, sy / sw))
}

/// Even-odd point-in-polygon test; points within `tol` of an edge count as
/// inside.
pub fn polygon_contains(polygon: &[Point], q: &Point, tol: f64) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[(i + 1) % n]);
        if segment_dist2(q, &a, &b) <= tol * tol {
            return true;
        }
        if (a.y > q.y) != (b.y > q.y) {
            let x = a.x + (q.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if q.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn segment_dist2(q: &Point, a: &Point, b: &Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return q.dist2(a);
    }
    let t = (((q.x - a.x) * dx + (q.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    q.dist2(&Point::new(a.x + t * dx, a.y + t * dy))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centroid_of_unit_square() {
        let sq = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        let c = polygon_centroid(&sq).unwrap();
        assert!((c.x - 0.5).abs() < 1e-12 && (c.y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn centroid_of_right_triangle() {
        let tri = [
            Point::new(0.0, 0.0),
            Point::new(3.0, 0.0),
            Point::new(0.0, 3.0),
        ];
        let c = polygon_centroid(&tri).unwrap();
        assert!((c.x - 1.0).abs() < 1e-12 && (c.y - 1.0).abs() < 1e-12);
        // orientation does not matter
        let rev: Vec<_> = tri.iter().rev().copied().collect();
        let c = polygon_centroid(&rev).unwrap();
        assert!((c.x - 1.0).abs() < 1e-12 && (c.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn centroid_of_collinear_falls_back_to_mean() {
        let line = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(2.0, 0.0),
        ];
        assert_eq!(polygon_centroid(&line).unwrap(), Point::new(1.0, 0.0));
    }

    #[test]
    fn centroid_needs_three_vertices() {
        assert!(polygon_centroid(&[Point::new(0.0, 0.0), Point::new(1.0, 1.0)]).is_err());
    }

    #[test]
    fn weighted_mean_examples() {
        let m = weighted_mean([(Point::new(0.0, 0.0), 1.0), (Point::new(3.0, 0.0), 2.0)]).unwrap();
        assert!((m.x - 2.0).abs() < 1e-12 && m.y == 0.0);
        assert_eq!(weighted_mean(std::iter::empty()), None);
    }

    #[test]
    fn expanded_handles_degenerate_extents() {
        let r = Rect::new(Point::new(0.0, 0.0), Point::new(10.0, 0.0)).expanded(0.1);
        assert_eq!(r.min, Point::new(-1.0, -1.0));
        assert_eq!(r.max, Point::new(11.0, 1.0));
        let p = Rect::new(Point::new(2.0, 2.0), Point::new(2.0, 2.0)).expanded(0.1);
        assert!(p.area() > 0.0 && p.contains(&Point::new(2.0, 2.0)));
    }

    #[test]
    fn polygon_contains_interior_and_boundary() {
        let sq = [
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 2.0),
            Point::new(0.0, 2.0),
        ];
        assert!(polygon_contains(&sq, &Point::new(1.0, 1.0), 1e-9));
        assert!(polygon_contains(&sq, &Point::new(2.0, 1.0), 1e-9));
        assert!(!polygon_contains(&sq, &Point::new(2.1, 1.0), 1e-9));
    }
}
