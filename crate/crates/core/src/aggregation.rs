//! Final aggregation: assign every initial region to its nearest site, merge
//! class tables per aggregated region and suppress classes below k.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect, VoronoiDiagram};
use crate::model::{merge_tables, ClassKey, ClassTable, Dataset};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedRegion {
    /// Index of the generating site in the site list.
    pub aggregated_id: usize,
    pub site: Point,
    /// Member initial regions, as indices into the data set's regions.
    pub members: Vec<usize>,
    pub merged_table: ClassTable,
}

impl AggregatedRegion {
    /// Smallest merged class, `None` for an empty aggregated region.
    pub fn anonymity_level(&self) -> Option<u64> {
        self.merged_table.min_cardinality()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuppressedClass {
    pub aggregated_id: usize,
    pub key: ClassKey,
    pub cardinality: u64,
}

/// A released record. The source region is kept for evaluation only; it is
/// never written to the published output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublishedRecord {
    pub record_id: String,
    pub aggregated_id: usize,
    pub key: ClassKey,
    pub source_region: usize,
}

#[derive(Debug, Clone)]
pub struct AggregationResult {
    pub k: u64,
    pub sites: Vec<Point>,
    pub regions: Vec<AggregatedRegion>,
    /// Aggregated id of every initial region, aligned with the data set.
    pub region_mapping: Vec<usize>,
    pub suppressed: Vec<SuppressedClass>,
    pub published: Vec<PublishedRecord>,
    pub input_record_count: u64,
    /// Site indices that coincide with an earlier site.
    pub duplicate_sites: Vec<usize>,
}

impl AggregationResult {
    pub fn suppressed_count(&self) -> u64 {
        self.suppressed.iter().map(|s| s.cardinality).sum()
    }

    /// Minimum merged class cardinality before suppression, over non-empty
    /// aggregated regions.
    pub fn global_anonymity(&self) -> Option<u64> {
        self.regions
            .iter()
            .filter_map(AggregatedRegion::anonymity_level)
            .min()
    }

    pub fn empty_regions(&self) -> Vec<usize> {
        self.regions
            .iter()
            .filter(|r| r.is_empty())
            .map(|r| r.aggregated_id)
            .collect()
    }
}

/// Assign every region point to its nearest site (ties to the lower index).
pub fn assign_regions(points: &[Point], sites: &[Point]) -> Result<Vec<usize>> {
    let extent =
        Rect::bounding(points).unwrap_or_else(|| Rect::bounding(sites).expect("non-empty"));
    let diagram = VoronoiDiagram::build(sites, extent)?;
    Ok(par::map(points, |p| diagram.nearest_input_site(p)))
}

pub fn aggregate(dataset: &Dataset, sites: &[Point], k: u64) -> Result<AggregationResult> {
    if sites.is_empty() {
        return Err(Error::Invalid("aggregation needs at least one site".into()));
    }
    let points = dataset.region_points();
    let region_mapping = if points.is_empty() {
        Vec::new()
    } else {
        assign_regions(&points, sites)?
    };

    let mut members = vec![Vec::new(); sites.len()];
    for (region, &agg) in region_mapping.iter().enumerate() {
        members[agg].push(region);
    }
    let regions: Vec<AggregatedRegion> = members
        .into_iter()
        .enumerate()
        .map(|(id, members)| AggregatedRegion {
            aggregated_id: id,
            site: sites[id],
            merged_table: merge_tables(members.iter().map(|&m| &dataset.regions()[m].class_table)),
            members,
        })
        .collect();

    let suppressed: Vec<SuppressedClass> = regions
        .iter()
        .flat_map(|r| {
            r.merged_table
                .iter()
                .filter(|(_, c)| *c < k)
                .map(|(key, cardinality)| SuppressedClass {
                    aggregated_id: r.aggregated_id,
                    key: key.clone(),
                    cardinality,
                })
        })
        .collect();

    let published = dataset
        .records()
        .iter()
        .zip(dataset.record_regions())
        .zip(dataset.record_keys())
        .filter_map(|((record, &region), key)| {
            let agg = region_mapping[region];
            (regions[agg].merged_table.get(key) >= k).then(|| PublishedRecord {
                record_id: record.record_id.clone(),
                aggregated_id: agg,
                key: key.clone(),
                source_region: region,
            })
        })
        .collect();

    let mut duplicate_sites = Vec::new();
    let mut seen = HashMap::new();
    for (i, p) in sites.iter().enumerate() {
        if seen
            .insert(((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits()), i)
            .is_some()
        {
            duplicate_sites.push(i);
        }
    }

    Ok(AggregationResult {
        k,
        sites: sites.to_vec(),
        regions,
        region_mapping,
        suppressed,
        published,
        input_record_count: dataset.records().len() as u64,
        duplicate_sites,
    })
}

/// Audit rebuilt from the published records alone: every (aggregated
/// region, class) pair must hold at least `k` records.
pub fn verify_k_anonymity(published: &[PublishedRecord], k: u64) -> bool {
    let mut counts: HashMap<(usize, &ClassKey), u64> = HashMap::new();
    for r in published {
        *counts.entry((r.aggregated_id, &r.key)).or_insert(0) += 1;
    }
    counts.values().all(|&c| c >= k)
}
