use std::collections::HashMap;

use super::{polygon_contains, KdTree, Point, Rect};
use crate::error::{Error, Result};
use crate::par;

/// Fraction of the data extent added on every side before clipping cells.
pub const CLIP_MARGIN: f64 = 0.1;

/// Voronoi diagram of a deduplicated site set, with every cell clipped to a
/// padded bounding box.
#[derive(Debug, Clone)]
pub struct VoronoiDiagram {
    sites: Vec<Point>,
    // index of the first input site at each deduplicated position
    first_input: Vec<usize>,
    input_to_site: Vec<usize>,
    duplicates: Vec<usize>,
    cells: Vec<Vec<Point>>,
    adjacency: Vec<Vec<usize>>,
    bounds: Rect,
    tolerance: f64,
    index: KdTree,
}

/// Build the clipped diagram. Coincident input sites collapse onto the first
/// occurrence; the collapsed input indices are reported by
/// [`VoronoiDiagram::duplicates`].
pub fn build_voronoi(sites: &[Point], extent: Rect) -> Result<VoronoiDiagram> {
    let diagram = VoronoiDiagram::build(sites, extent)?;
    if sites.len() > 1 && diagram.sites.len() == 1 {
        return Err(Error::Degenerate(format!(
            "all {} requested sites are coincident",
            sites.len()
        )));
    }
    Ok(diagram)
}

/// Index of the deduplicated site nearest to `q`; ties go to the lowest index.
pub fn nearest_site(q: &Point, diagram: &VoronoiDiagram) -> usize {
    diagram.nearest_site(q)
}

/// Search neighbourhood of one site: its own cell plus the ring through its
/// adjacent sites.
pub fn neighborhood(diagram: &VoronoiDiagram, site_index: usize) -> NeighborhoodPolygon {
    let center = diagram.sites[site_index];
    let mut adjacent: Vec<usize> = diagram.adjacency[site_index].clone();
    adjacent.sort_by(|&a, &b| {
        let pa = diagram.sites[a];
        let pb = diagram.sites[b];
        let ta = (pa.y - center.y).atan2(pa.x - center.x);
        let tb = (pb.y - center.y).atan2(pb.x - center.x);
        ta.total_cmp(&tb)
            .then(center.dist2(&pa).total_cmp(&center.dist2(&pb)))
            .then(a.cmp(&b))
    });
    let adjacent_ring = if adjacent.len() >= 3 {
        adjacent.iter().map(|&j| diagram.sites[j]).collect()
    } else {
        Vec::new()
    };
    NeighborhoodPolygon {
        own_cell: diagram.cells[site_index].clone(),
        adjacent_ring,
        tolerance: diagram.tolerance,
    }
}

impl VoronoiDiagram {
    /// Construction without the all-coincident check; every input still maps
    /// to a cell.
    pub(crate) fn build(input: &[Point], extent: Rect) -> Result<Self> {
        if input.is_empty() {
            return Err(Error::Invalid(
                "a Voronoi diagram needs at least one site".into(),
            ));
        }
        if let Some(p) = input.iter().find(|p| !p.is_finite()) {
            return Err(Error::Invalid(format!(
                "site ({}, {}) is not finite",
                p.x, p.y
            )));
        }

        let mut seen: HashMap<(u64, u64), usize> = HashMap::with_capacity(input.len());
        let mut sites = Vec::with_capacity(input.len());
        let mut first_input = Vec::with_capacity(input.len());
        let mut input_to_site = Vec::with_capacity(input.len());
        let mut duplicates = Vec::new();
        for (i, p) in input.iter().enumerate() {
            // +0.0 folds -0.0 onto 0.0
            let key = ((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits());
            match seen.get(&key) {
                Some(&s) => {
                    input_to_site.push(s);
                    duplicates.push(i);
                }
                None => {
                    seen.insert(key, sites.len());
                    input_to_site.push(sites.len());
                    first_input.push(i);
                    sites.push(*p);
                }
            }
        }

        let mut outer = extent;
        for p in &sites {
            outer.include(p);
        }
        let bounds = outer.expanded(CLIP_MARGIN);
        let tolerance = 1e-9 * bounds.diagonal();

        let clipped: Vec<Vec<(Point, Option<usize>)>> =
            par::map_range(sites.len(), |i| clip_cell(&sites, i, &bounds, tolerance));

        let mut adjacency = vec![Vec::new(); sites.len()];
        for (i, cell) in clipped.iter().enumerate() {
            let n = cell.len();
            for e in 0..n {
                if let (a, Some(j)) = cell[e] {
                    let b = cell[(e + 1) % n].0;
                    if a.dist(&b) > tolerance {
                        adjacency[i].push(j);
                        adjacency[j].push(i);
                    }
                }
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }

        let cells = clipped
            .into_iter()
            .map(|c| c.into_iter().map(|(p, _)| p).collect())
            .collect();
        let index = KdTree::new(&sites);
        Ok(Self {
            sites,
            first_input,
            input_to_site,
            duplicates,
            cells,
            adjacency,
            bounds,
            tolerance,
            index,
        })
    }

    pub fn sites(&self) -> &[Point] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Clipped cell of a site, counter-clockwise.
    pub fn cell(&self, site: usize) -> &[Point] {
        &self.cells[site]
    }

    pub fn cells(&self) -> &[Vec<Point>] {
        &self.cells
    }

    /// Sites whose cells share a positive-length edge with `site`, ascending.
    pub fn adjacent(&self, site: usize) -> &[usize] {
        &self.adjacency[site]
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    /// The clipping rectangle.
    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    /// Input indices that were collapsed onto an earlier coincident site.
    pub fn duplicates(&self) -> &[usize] {
        &self.duplicates
    }

    /// Deduplicated site index for an input site index.
    pub fn site_of_input(&self, input: usize) -> usize {
        self.input_to_site[input]
    }

    /// First input index that produced a deduplicated site.
    pub fn input_of_site(&self, site: usize) -> usize {
        self.first_input[site]
    }

    pub fn nearest_site(&self, q: &Point) -> usize {
        self.index
            .nearest(q)
            .expect("diagram has at least one site")
    }

    /// Nearest site expressed as an input index. Because duplicates keep
    /// their first occurrence, this equals the lowest-index nearest input.
    pub fn nearest_input_site(&self, q: &Point) -> usize {
        self.first_input[self.nearest_site(q)]
    }
}

/// Half-plane clipping of the bounding box against bisectors, nearest sites
/// first. Each vertex carries the neighbour whose bisector produced the edge
/// leaving it (`None` for box edges).
fn clip_cell(
    sites: &[Point],
    i: usize,
    bounds: &Rect,
    tolerance: f64,
) -> Vec<(Point, Option<usize>)> {
    let s = sites[i];
    let mut poly: Vec<(Point, Option<usize>)> =
        bounds.corners().iter().map(|&c| (c, None)).collect();

    let mut others: Vec<(f64, usize)> = (0..sites.len())
        .filter(|&j| j != i)
        .map(|j| (s.dist2(&sites[j]), j))
        .collect();
    others.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    for (d2, j) in others {
        let reach2 = poly.iter().map(|(v, _)| s.dist2(v)).fold(0.0f64, f64::max);
        // bisector lies farther than every vertex: no later site can cut either
        if d2 / 4.0 > reach2 {
            break;
        }
        poly = clip_half_plane(&poly, &s, &sites[j], j, tolerance);
        if poly.is_empty() {
            break;
        }
    }
    poly
}

fn clip_half_plane(
    poly: &[(Point, Option<usize>)],
    s: &Point,
    other: &Point,
    tag: usize,
    tolerance: f64,
) -> Vec<(Point, Option<usize>)> {
    let (dx, dy) = (other.x - s.x, other.y - s.y);
    let c = (other.x * other.x + other.y * other.y - s.x * s.x - s.y * s.y) / 2.0;
    let side = |p: &Point| p.x * dx + p.y * dy - c;

    let n = poly.len();
    let mut out: Vec<(Point, Option<usize>)> = Vec::with_capacity(n + 1);
    for e in 0..n {
        let (a, ta) = poly[e];
        let b = poly[(e + 1) % n].0;
        let (ha, hb) = (side(&a), side(&b));
        let a_in = ha <= 0.0;
        let b_in = hb <= 0.0;
        match (a_in, b_in) {
            (true, true) => push_vertex(&mut out, a, ta, tolerance),
            (true, false) => {
                push_vertex(&mut out, a, ta, tolerance);
                push_vertex(&mut out, lerp(&a, &b, ha / (ha - hb)), Some(tag), tolerance);
            }
            (false, true) => push_vertex(&mut out, lerp(&a, &b, ha / (ha - hb)), ta, tolerance),
            (false, false) => {}
        }
    }
    if out.len() >= 2 && out[0].0.dist(&out[out.len() - 1].0) <= tolerance * 1e-3 {
        out.pop();
    }
    if out.len() < 3 {
        out.clear();
    }
    out
}

fn push_vertex(
    out: &mut Vec<(Point, Option<usize>)>,
    p: Point,
    tag: Option<usize>,
    tolerance: f64,
) {
    if let Some(last) = out.last_mut() {
        if last.0.dist(&p) <= tolerance * 1e-3 {
            // zero-length edge: keep the earlier vertex, adopt the outgoing edge
            last.1 = tag;
            return;
        }
    }
    out.push((p, tag));
}

fn lerp(a: &Point, b: &Point, t: f64) -> Point {
    Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
}

/// Union of a cluster's own cell and the ring through its adjacent sites.
#[derive(Debug, Clone)]
pub struct NeighborhoodPolygon {
    pub own_cell: Vec<Point>,
    /// Empty when fewer than three sites are adjacent.
    pub adjacent_ring: Vec<Point>,
    tolerance: f64,
}

impl NeighborhoodPolygon {
    pub fn contains(&self, q: &Point) -> bool {
        convex_contains(&self.own_cell, q, self.tolerance)
            || polygon_contains(&self.adjacent_ring, q, self.tolerance)
    }

    pub fn own_cell_contains(&self, q: &Point) -> bool {
        convex_contains(&self.own_cell, q, self.tolerance)
    }
}

fn convex_contains(poly: &[Point], q: &Point, tol: f64) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    (0..n).all(|e| {
        let (a, b) = (poly[e], poly[(e + 1) % n]);
        let len = a.dist(&b);
        if len == 0.0 {
            return true;
        }
        let cross = (b.x - a.x) * (q.y - a.y) - (b.y - a.y) * (q.x - a.x);
        cross / len >= -tol
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::polygon_area;

    fn extent(a: (f64, f64), b: (f64, f64)) -> Rect {
        Rect::new(Point::new(a.0, a.1), Point::new(b.0, b.1))
    }

    #[test]
    fn single_site_owns_the_clip_box() {
        let d = build_voronoi(&[Point::new(1.0, 1.0)], extent((0.0, 0.0), (10.0, 10.0))).unwrap();
        let b = d.bounds();
        assert_eq!(b.min, Point::new(-1.0, -1.0));
        assert_eq!(b.max, Point::new(11.0, 11.0));
        assert!((polygon_area(d.cell(0)) - 144.0).abs() < 1e-9);
        assert!(d.adjacent(0).is_empty());
        let nb = neighborhood(&d, 0);
        assert!(nb.adjacent_ring.is_empty());
        assert!(nb.contains(&Point::new(10.5, -0.5)));
    }

    #[test]
    fn two_sites_share_the_bisector() {
        let sites = [Point::new(0.0, 0.0), Point::new(2.0, 0.0)];
        let d = build_voronoi(&sites, extent((0.0, -1.0), (2.0, 1.0))).unwrap();
        assert!(d.are_adjacent(0, 1) && d.are_adjacent(1, 0));
        for cell in d.cells() {
            let on_line: Vec<_> = cell.iter().filter(|p| (p.x - 1.0).abs() < 1e-12).collect();
            assert_eq!(on_line.len(), 2, "cell {cell:?}");
        }
        assert_eq!(nearest_site(&Point::new(0.4, 0.0), &d), 0);
        assert_eq!(nearest_site(&Point::new(1.0, 0.0), &d), 0);
        assert_eq!(nearest_site(&Point::new(1.0000001, 0.0), &d), 1);
    }

    #[test]
    fn duplicates_collapse_onto_first_occurrence() {
        let sites = [
            Point::new(0.0, 0.0),
            Point::new(3.0, 3.0),
            Point::new(0.0, 0.0),
        ];
        let d = build_voronoi(&sites, extent((0.0, 0.0), (3.0, 3.0))).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.duplicates(), &[2]);
        assert_eq!(d.site_of_input(2), 0);
        assert_eq!(d.nearest_input_site(&Point::new(0.1, 0.1)), 0);
    }

    #[test]
    fn all_coincident_sites_are_degenerate() {
        let sites = [Point::new(1.0, 1.0), Point::new(1.0, 1.0)];
        assert!(matches!(
            build_voronoi(&sites, extent((0.0, 0.0), (2.0, 2.0))),
            Err(Error::Degenerate(_))
        ));
        assert!(build_voronoi(&[], extent((0.0, 0.0), (2.0, 2.0))).is_err());
    }

    fn grid3() -> Vec<Point> {
        let mut v = Vec::new();
        for y in 0..3 {
            for x in 0..3 {
                v.push(Point::new(x as f64, y as f64));
            }
        }
        v
    }

    #[test]
    fn square_grid_center_touches_diagonals_only_at_corners() {
        let d = build_voronoi(&grid3(), extent((0.0, 0.0), (2.0, 2.0))).unwrap();
        // cells meet diagonally at a single point, which is not an edge
        assert_eq!(d.adjacent(4), &[1, 3, 5, 7]);
        let nb = neighborhood(&d, 4);
        // ordered by angle from -pi: below, right, above, left
        assert_eq!(
            nb.adjacent_ring,
            vec![
                Point::new(1.0, 0.0),
                Point::new(2.0, 1.0),
                Point::new(1.0, 2.0),
                Point::new(0.0, 1.0)
            ]
        );
        assert!(nb.contains(&Point::new(1.4, 1.4)));
        assert!(nb.contains(&Point::new(1.5, 0.6)));
        assert!(!nb.contains(&Point::new(1.9, 1.9)));
    }

    #[test]
    fn sheared_grid_center_has_hexagonal_ring() {
        // a sheared lattice triangulates along one diagonal: six neighbours
        let sites: Vec<Point> = grid3()
            .into_iter()
            .map(|p| Point::new(p.x + 0.2 * p.y, p.y + 0.1 * p.x))
            .collect();
        let d = build_voronoi(&sites, extent((0.0, 0.0), (2.4, 2.2))).unwrap();
        let nb = neighborhood(&d, 4);
        assert_eq!(d.adjacent(4), &[1, 2, 3, 5, 6, 7]);
        assert_eq!(nb.adjacent_ring.len(), 6);
        for &j in d.adjacent(4) {
            assert!(nb.contains(&sites[j]));
        }
        assert!(!nb.contains(&sites[0]));
        assert!(!nb.contains(&sites[8]));
    }

    #[test]
    fn hull_cluster_ring_is_closed() {
        let sites = [
            Point::new(0.0, 0.0),
            Point::new(4.0, 0.0),
            Point::new(2.0, 3.0),
            Point::new(2.0, 1.0),
            Point::new(6.0, 2.0),
        ];
        let d = build_voronoi(&sites, extent((0.0, 0.0), (6.0, 3.0))).unwrap();
        let nb = neighborhood(&d, 0);
        assert!(nb.adjacent_ring.len() >= 3 || nb.adjacent_ring.is_empty());
        // own-cell members are always members
        for q in [
            Point::new(0.0, 0.0),
            Point::new(-0.5, -0.2),
            Point::new(0.5, 0.5),
        ] {
            assert!(nb.own_cell_contains(&q));
            assert!(nb.contains(&q));
        }
    }

    #[test]
    fn cell_areas_cover_clip_box() {
        let mut sites = Vec::new();
        let mut s = 12345u64;
        for _ in 0..200 {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let x = (s >> 11) as f64 / (1u64 << 53) as f64;
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let y = (s >> 11) as f64 / (1u64 << 53) as f64;
            sites.push(Point::new(x * 100.0, y * 50.0));
        }
        let d = build_voronoi(&sites, extent((0.0, 0.0), (100.0, 50.0))).unwrap();
        let total: f64 = d.cells().iter().map(|c| polygon_area(c)).sum();
        assert!((total - d.bounds().area()).abs() <= 1e-6 * d.bounds().area());
        for i in 0..d.len() {
            for &j in d.adjacent(i) {
                assert!(d.are_adjacent(j, i));
                assert_ne!(i, j);
            }
        }
    }
}
