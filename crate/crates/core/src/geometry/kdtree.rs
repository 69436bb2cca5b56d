use super::Point;

/// Static 2-d tree over a fixed point set answering exact nearest-point
/// queries. Equidistant points resolve to the lowest index, so results agree
/// bit-for-bit with a linear scan that keeps the first minimum.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point>,
    // implicit balanced tree: node of a range [lo, hi) sits at (lo + hi) / 2
    order: Vec<usize>,
}

impl KdTree {
    pub fn new(points: &[Point]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build(points, &mut order, 0);
        Self {
            points: points.to_vec(),
            order,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Index of the nearest point, `None` only for an empty tree.
    pub fn nearest(&self, q: &Point) -> Option<usize> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, usize::MAX);
        self.search(q, 0, self.order.len(), 0, &mut best);
        Some(best.1)
    }

    fn search(&self, q: &Point, lo: usize, hi: usize, depth: usize, best: &mut (f64, usize)) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid];
        let p = &self.points[idx];
        let d2 = q.dist2(p);
        if d2 < best.0 || (d2 == best.0 && idx < best.1) {
            *best = (d2, idx);
        }
        let diff = if depth.is_multiple_of(2) {
            q.x - p.x
        } else {
            q.y - p.y
        };
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, depth + 1, best);
        // `<=` keeps equidistant candidates on the far side reachable
        if diff * diff <= best.0 {
            self.search(q, far.0, far.1, depth + 1, best);
        }
    }
}

fn build(points: &[Point], order: &mut [usize], depth: usize) {
    if order.len() <= 1 {
        return;
    }
    let mid = order.len() / 2;
    if depth.is_multiple_of(2) {
        order.select_nth_unstable_by(mid, |&a, &b| points[a].x.total_cmp(&points[b].x));
    } else {
        order.select_nth_unstable_by(mid, |&a, &b| points[a].y.total_cmp(&points[b].y));
    }
    let (left, rest) = order.split_at_mut(mid);
    build(points, left, depth + 1);
    build(points, &mut rest[1..], depth + 1);
}
