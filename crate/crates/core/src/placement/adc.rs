//! Anonymity-driven clustering (ADC).
//!
//! A k-means style loop over the initial-region points where clusters are
//! the aggregated regions implied by the current centers. Only clusters at
//! the global anonymity level are optimized, and a center only moves when the
//! move strictly raises the objective `alpha * |R| - |R_alpha|`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::geometry::{neighborhood, weighted_mean, KdTree, Point, Rect, VoronoiDiagram};
use crate::model::{ClassKey, ClassTable, InitialRegion};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdcParams {
    /// Anonymity level at which optimization stops.
    pub k: u64,
    pub max_moves: usize,
}

/// Clusters implied by a set of centers.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    centers: Vec<Point>,
    assignment: Vec<usize>,
    tables: Vec<ClassTable>,
    anonymity: u64,
    lowest: Vec<usize>,
}

/// Class at the minimum cardinality of its cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BottleneckClass {
    pub cluster: usize,
    pub key: ClassKey,
    pub cardinality: u64,
}

/// `alpha * clusters - lowest_level`.
pub fn objective_value(anonymity: u64, clusters: usize, lowest_level: usize) -> i64 {
    anonymity as i64 * clusters as i64 - lowest_level as i64
}

pub fn objective(state: &ClusterState) -> i64 {
    objective_value(state.anonymity, state.centers.len(), state.lowest.len())
}

fn assign(centers: &[Point], regions: &[InitialRegion]) -> Vec<usize> {
    let tree = KdTree::new(centers);
    par::map(regions, |r| {
        tree.nearest(&r.location).expect("at least one center")
    })
}

impl ClusterState {
    pub fn new(centers: Vec<Point>, regions: &[InitialRegion]) -> Self {
        assert!(!centers.is_empty(), "ADC needs at least one center");
        let assignment = assign(&centers, regions);
        let mut tables = vec![ClassTable::new(); centers.len()];
        for (region, &c) in regions.iter().zip(&assignment) {
            tables[c].absorb(&region.class_table);
        }
        Self::finish(centers, assignment, tables)
    }

    fn finish(centers: Vec<Point>, assignment: Vec<usize>, tables: Vec<ClassTable>) -> Self {
        let minima: Vec<Option<u64>> = tables.iter().map(ClassTable::min_cardinality).collect();
        let anonymity = minima.iter().flatten().copied().min().unwrap_or(0);
        let lowest = minima
            .iter()
            .enumerate()
            .filter(|(_, m)| **m == Some(anonymity))
            .map(|(i, _)| i)
            .collect();
        Self {
            centers,
            assignment,
            tables,
            anonymity,
            lowest,
        }
    }

    /// Same clustering with one center moved. Only the tables of clusters
    /// that gained or lost regions are rebuilt.
    pub fn with_center(&self, regions: &[InitialRegion], cluster: usize, to: Point) -> Self {
        let mut centers = self.centers.clone();
        centers[cluster] = to;
        let assignment = assign(&centers, regions);
        let mut touched = vec![false; centers.len()];
        touched[cluster] = true;
        for (&old, &new) in self.assignment.iter().zip(&assignment) {
            if old != new {
                touched[old] = true;
                touched[new] = true;
            }
        }
        let mut tables = self.tables.clone();
        for (c, t) in tables.iter_mut().enumerate() {
            if touched[c] {
                *t = ClassTable::new();
            }
        }
        for (region, &c) in regions.iter().zip(&assignment) {
            if touched[c] {
                tables[c].absorb(&region.class_table);
            }
        }
        Self::finish(centers, assignment, tables)
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    /// Cluster index of every region.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn table(&self, cluster: usize) -> &ClassTable {
        &self.tables[cluster]
    }

    /// Global anonymity: the smallest class over non-empty clusters, 0 when
    /// every cluster is empty.
    pub fn anonymity(&self) -> u64 {
        self.anonymity
    }

    /// Non-empty clusters sitting at the global anonymity level, ascending.
    pub fn lowest_level_clusters(&self) -> &[usize] {
        &self.lowest
    }

    pub fn cluster_anonymity(&self, cluster: usize) -> Option<u64> {
        self.tables[cluster].min_cardinality()
    }

    pub fn objective(&self) -> i64 {
        objective(self)
    }

    /// Bottleneck classes of a cluster in key order.
    pub fn bottlenecks(&self, cluster: usize) -> Vec<BottleneckClass> {
        let table = &self.tables[cluster];
        let Some(min) = table.min_cardinality() else {
            return Vec::new();
        };
        table
            .keys_with_cardinality(min)
            .into_iter()
            .map(|key| BottleneckClass {
                cluster,
                key: key.clone(),
                cardinality: min,
            })
            .collect()
    }
}

/// Candidate center: member-weighted mean of the region points inside the
/// cluster's neighbourhood that hold the bottleneck class.
pub fn propose_move(
    state: &ClusterState,
    bottleneck: &BottleneckClass,
    diagram: &VoronoiDiagram,
    regions: &[InitialRegion],
) -> Option<Point> {
    let site = diagram.site_of_input(bottleneck.cluster);
    let hood = neighborhood(diagram, site);
    debug_assert!(state.cluster_anonymity(bottleneck.cluster).is_some());
    let members = par::map(regions, |r| {
        let count = r.class_table.get(&bottleneck.key);
        (count > 0 && hood.contains(&r.location)).then_some((r.location, count as f64))
    });
    weighted_mean(members.into_iter().flatten())
}

/// The moved state if it strictly improves the objective.
pub fn commit_if_improving(
    state: &ClusterState,
    regions: &[InitialRegion],
    cluster: usize,
    candidate: Point,
) -> Option<ClusterState> {
    if !candidate.is_finite() || candidate == state.centers[cluster] {
        return None;
    }
    let moved = state.with_center(regions, cluster, candidate);
    (moved.objective() > state.objective()).then_some(moved)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AdcTermination {
    /// Every non-empty cluster reached k.
    KAnonymous,
    /// A full scan of the lowest-level clusters committed nothing.
    Converged,
    MoveCap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdcCommit {
    pub cluster: usize,
    pub from: Point,
    pub to: Point,
    pub objective_before: i64,
    pub objective_after: i64,
}

#[derive(Debug, Clone)]
pub struct AdcOutcome {
    pub centers: Vec<Point>,
    pub seed_objective: i64,
    pub final_objective: i64,
    pub commits: Vec<AdcCommit>,
    pub termination: AdcTermination,
}

/// Uniform random centers inside the bounding box of the region points.
pub fn random_seeds(regions: &[InitialRegion], count: usize, rng_seed: u64) -> Vec<Point> {
    let points: Vec<Point> = regions.iter().map(|r| r.location).collect();
    let Some(extent) = Rect::bounding(&points) else {
        return Vec::new();
    };
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..count)
        .map(|_| {
            let x = if extent.width() > 0.0 {
                rng.gen_range(extent.min.x..=extent.max.x)
            } else {
                extent.min.x
            };
            let y = if extent.height() > 0.0 {
                rng.gen_range(extent.min.y..=extent.max.y)
            } else {
                extent.min.y
            };
            Point::new(x, y)
        })
        .collect()
}

pub fn run_adc(seeds: Vec<Point>, regions: &[InitialRegion], params: AdcParams) -> AdcOutcome {
    let points: Vec<Point> = regions.iter().map(|r| r.location).collect();
    let extent =
        Rect::bounding(&points).unwrap_or(Rect::new(Point::new(0.0, 0.0), Point::new(0.0, 0.0)));
    let mut state = ClusterState::new(seeds, regions);
    let seed_objective = state.objective();
    let mut commits = Vec::new();

    let diagram_of = |s: &ClusterState| {
        VoronoiDiagram::build(s.centers(), extent).expect("centers are finite and non-empty")
    };

    let termination = 'scan: loop {
        if state.lowest_level_clusters().is_empty() || state.anonymity() >= params.k {
            break AdcTermination::KAnonymous;
        }
        let mut diagram = diagram_of(&state);
        let mut committed = false;
        for cluster in state.lowest_level_clusters().to_vec() {
            let Some(local) = state.cluster_anonymity(cluster) else {
                continue;
            };
            if local != state.anonymity() {
                continue;
            }
            for bottleneck in state.bottlenecks(cluster) {
                if state.table(cluster).get(&bottleneck.key)
                    != state.cluster_anonymity(cluster).unwrap_or(0)
                {
                    continue;
                }
                let Some(candidate) = propose_move(&state, &bottleneck, &diagram, regions) else {
                    continue;
                };
                let Some(next) = commit_if_improving(&state, regions, cluster, candidate) else {
                    continue;
                };
                // only reported when another improving move was on offer
                if commits.len() >= params.max_moves {
                    break 'scan AdcTermination::MoveCap;
                }
                let commit = AdcCommit {
                    cluster,
                    from: state.centers()[cluster],
                    to: candidate,
                    objective_before: state.objective(),
                    objective_after: next.objective(),
                };
                assert!(commit.objective_after > commit.objective_before);
                commits.push(commit);
                state = next;
                committed = true;
                match state.cluster_anonymity(cluster) {
                    Some(now) if now <= local => diagram = diagram_of(&state),
                    // the cluster improved: rescan from the new lowest level
                    _ => continue 'scan,
                }
            }
        }
        if !committed {
            break AdcTermination::Converged;
        }
    };

    AdcOutcome {
        final_objective: state.objective(),
        centers: state.centers,
        seed_objective,
        commits,
        termination,
    }
}
