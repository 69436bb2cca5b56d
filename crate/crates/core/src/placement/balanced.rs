//! Balanced-density placement: split the region points into rows of
//! roughly equal population, split every row into cells, and put one site at
//! the mean of each cell's points.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::geometry::{mean, Point};
use crate::model::InitialRegion;
use crate::par;

/// Region point carrying the population used for balancing.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPoint {
    pub region_id: String,
    pub location: Point,
    pub population: u64,
}

impl WeightedPoint {
    pub fn from_region(region: &InitialRegion) -> Self {
        Self {
            region_id: region.region_id.clone(),
            location: region.location,
            population: region.population,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowPartition {
    /// Rows bottom to top; points inside a row sorted by x.
    pub rows: Vec<Vec<WeightedPoint>>,
    pub populations: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellPartition {
    pub cells: Vec<Vec<WeightedPoint>>,
}

impl CellPartition {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

fn by_y(a: &WeightedPoint, b: &WeightedPoint) -> Ordering {
    a.location
        .y
        .total_cmp(&b.location.y)
        .then(a.location.x.total_cmp(&b.location.x))
        .then_with(|| a.region_id.cmp(&b.region_id))
}

fn by_x(a: &WeightedPoint, b: &WeightedPoint) -> Ordering {
    a.location
        .x
        .total_cmp(&b.location.x)
        .then(a.location.y.total_cmp(&b.location.y))
        .then_with(|| a.region_id.cmp(&b.region_id))
}

fn round_div(num: f64, den: f64) -> u64 {
    (num / den).round().max(0.0) as u64
}

/// Starting number of rows: `round(sqrt(s))`, at least one.
pub fn initial_row_count(sites: usize) -> usize {
    ((sites as f64).sqrt().round() as usize).max(1)
}

/// Weight used for balancing. When every population is zero each point
/// counts once so the walk still has something to balance.
fn weight_fn(points: &[WeightedPoint]) -> impl Fn(&WeightedPoint) -> u64 {
    let unweighted = points.iter().all(|p| p.population == 0);
    move |p| if unweighted { 1 } else { p.population }
}

/// Walk `points` in order, closing a group once its population reaches
/// `target`. The point that crosses the target stays when that leaves the
/// group at least as close to the target as stopping short would. At most
/// `limit` groups are made; the last one takes whatever remains.
fn walk<W: Fn(&WeightedPoint) -> u64>(
    points: Vec<WeightedPoint>,
    target: u64,
    limit: usize,
    weight: &W,
) -> Vec<Vec<WeightedPoint>> {
    let mut groups = Vec::new();
    let mut current: Vec<WeightedPoint> = Vec::new();
    let mut sum = 0u64;
    for point in points {
        if groups.len() + 1 >= limit {
            current.push(point);
            continue;
        }
        let w = weight(&point);
        let after = sum + w;
        if after < target {
            current.push(point);
            sum = after;
            continue;
        }
        if current.is_empty() || after - target <= target - sum {
            current.push(point);
            groups.push(std::mem::take(&mut current));
            sum = 0;
        } else {
            groups.push(std::mem::take(&mut current));
            // the deferred point opens the next group
            if groups.len() + 1 < limit && w >= target {
                groups.push(vec![point]);
                sum = 0;
            } else {
                current.push(point);
                sum = w;
            }
        }
    }
    if !current.is_empty() {
        groups.push(current);
    }
    groups
}

/// Row partition by an upward walk over the points sorted by y.
pub fn partition_rows(points: &[WeightedPoint], sites: usize) -> RowPartition {
    let weight = weight_fn(points);
    let mut sorted = points.to_vec();
    sorted.sort_by(by_y);

    let total: u64 = sorted.iter().map(&weight).sum();
    let rows_wanted = initial_row_count(sites);
    let target = round_div(total as f64, rows_wanted as f64).max(1);

    let mut rows = walk(sorted, target, usize::MAX, &weight);
    let pop = |row: &Vec<WeightedPoint>| row.iter().map(&weight).sum::<u64>();

    // a remainder too small to stand as a row joins the row below it
    if rows.len() >= 2 && pop(&rows[rows.len() - 1]) * 2 < target {
        let last = rows.pop().expect("len >= 2");
        rows.last_mut().expect("len >= 1").extend(last);
    }
    // every row needs at least one cell
    while rows.len() > sites.max(1) {
        let i = (0..rows.len() - 1)
            .min_by_key(|&i| pop(&rows[i]) + pop(&rows[i + 1]))
            .expect("at least two rows");
        let next = rows.remove(i + 1);
        rows[i].extend(next);
    }

    for row in &mut rows {
        row.sort_by(by_x);
    }
    let populations = rows.iter().map(pop).collect();
    RowPartition { rows, populations }
}

/// Per-row cell counts: `round(s * share)`, clamped to `[1, points in row]`,
/// then nudged one cell at a time by rounding residue until they sum to `s`.
pub fn cells_per_row(rows: &RowPartition, sites: usize) -> Vec<usize> {
    let total: u64 = rows.populations.iter().sum();
    let total = total.max(1) as f64;
    let ideal: Vec<f64> = rows
        .populations
        .iter()
        .map(|&p| sites as f64 * p as f64 / total)
        .collect();
    let caps: Vec<usize> = rows.rows.iter().map(Vec::len).collect();
    let mut counts: Vec<usize> = ideal
        .iter()
        .zip(&caps)
        .map(|(&x, &cap)| (x.round() as usize).clamp(1, cap.max(1)))
        .collect();

    let mut assigned: usize = counts.iter().sum();
    while assigned < sites {
        let pick = (0..counts.len())
            .filter(|&i| counts[i] < caps[i])
            .max_by(|&a, &b| {
                let (ra, rb) = (ideal[a] - counts[a] as f64, ideal[b] - counts[b] as f64);
                ra.total_cmp(&rb).then(b.cmp(&a))
            });
        let Some(i) = pick else { break };
        counts[i] += 1;
        assigned += 1;
    }
    while assigned > sites {
        let pick = (0..counts.len())
            .filter(|&i| counts[i] > 1)
            .min_by(|&a, &b| {
                let (ra, rb) = (ideal[a] - counts[a] as f64, ideal[b] - counts[b] as f64);
                ra.total_cmp(&rb).then(a.cmp(&b))
            });
        let Some(i) = pick else { break };
        counts[i] -= 1;
        assigned -= 1;
    }
    counts
}

/// Split every row into its share of cells, left to right.
pub fn partition_cells(rows: &RowPartition, sites: usize) -> CellPartition {
    let counts = cells_per_row(rows, sites);
    let jobs: Vec<(usize, &Vec<WeightedPoint>)> = counts.into_iter().zip(&rows.rows).collect();
    let per_row = par::map(&jobs, |(count, row)| split_row(row, *count));
    CellPartition {
        cells: per_row.into_iter().flatten().collect(),
    }
}

fn split_row(row: &[WeightedPoint], count: usize) -> Vec<Vec<WeightedPoint>> {
    let weight = weight_fn(row);
    let population: u64 = row.iter().map(&weight).sum();
    let target = round_div(population as f64, count.max(1) as f64).max(1);
    let mut cells = walk(row.to_vec(), target, count, &weight);

    // population ran out early: halve the largest cells until the count fits
    while cells.len() < count {
        let pick = cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.len() >= 2)
            .max_by(|(ia, a), (ib, b)| {
                let pa: u64 = a.iter().map(&weight).sum();
                let pb: u64 = b.iter().map(&weight).sum();
                pa.cmp(&pb).then(a.len().cmp(&b.len())).then(ib.cmp(ia))
            })
            .map(|(i, _)| i);
        let Some(i) = pick else { break };
        let (left, right) = halve(cells.remove(i), &weight);
        cells.insert(i, right);
        cells.insert(i, left);
    }
    cells
}

/// Split an x-sorted cell at its population midpoint; both halves non-empty.
fn halve<W: Fn(&WeightedPoint) -> u64>(
    cell: Vec<WeightedPoint>,
    weight: &W,
) -> (Vec<WeightedPoint>, Vec<WeightedPoint>) {
    let population: u64 = cell.iter().map(weight).sum();
    let half = round_div(population as f64, 2.0).max(1);
    let mut groups = walk(cell, half, 2, weight);
    if groups.len() == 1 {
        let mut only = groups.pop().expect("one group");
        let last = only.pop().expect("cell has two points");
        return (only, vec![last]);
    }
    let right = groups.pop().expect("two groups");
    let left = groups.pop().expect("two groups");
    (left, right)
}

/// One site per cell at the unweighted mean of the cell's points.
pub fn place_sites(cells: &CellPartition) -> Result<Vec<Point>> {
    cells
        .cells
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            mean(cell.iter().map(|p| p.location)).ok_or_else(|| {
                Error::Invalid(format!("balanced placement produced empty cell {i}"))
            })
        })
        .collect()
}

/// Full balanced-density placement over the initial regions.
pub fn balanced_sites(regions: &[InitialRegion], sites: usize) -> Result<Vec<Point>> {
    if sites == 0 || sites > regions.len() {
        return Err(Error::Invalid(format!(
            "cannot place {sites} sites over {} regions",
            regions.len()
        )));
    }
    let points: Vec<WeightedPoint> = regions.iter().map(WeightedPoint::from_region).collect();
    let rows = partition_rows(&points, sites);
    let cells = partition_cells(&rows, sites);
    if cells.len() != sites {
        return Err(Error::Invalid(format!(
            "balanced placement made {} cells for {sites} sites",
            cells.len()
        )));
    }
    place_sites(&cells)
}
