//! Shared generators and brute-force oracles for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use geoagg_core::geometry::Point;
use geoagg_core::model::{
    ClassKey, Dataset, InitialRegion, QuasiIdentifierSchema, Record, RegionSpec,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn schema(domains: &[usize]) -> QuasiIdentifierSchema {
    let attrs = domains
        .iter()
        .enumerate()
        .map(|(a, &d)| (format!("q{a}"), (0..d).map(|v| format!("v{v}")).collect()))
        .collect();
    QuasiIdentifierSchema::new(attrs, "geo").unwrap()
}

/// Either integer lattice points (plenty of ties and coincidences) or
/// continuous coordinates.
pub fn random_points(rng: &mut ChaCha8Rng, n: usize, lattice: bool) -> Vec<Point> {
    (0..n)
        .map(|_| {
            if lattice {
                Point::new(rng.gen_range(0..=12) as f64, rng.gen_range(0..=12) as f64)
            } else {
                Point::new(rng.gen_range(0.0..1000.0), rng.gen_range(0.0..500.0))
            }
        })
        .collect()
}

/// Records spread over regions with skewed category frequencies so that
/// both rare and common classes occur.
pub fn random_dataset(
    rng: &mut ChaCha8Rng,
    regions: usize,
    records: usize,
    domains: &[usize],
) -> Dataset {
    let lattice = rng.gen_bool(0.3);
    let points = random_points(rng, regions, lattice);
    let specs: Vec<RegionSpec> = points
        .iter()
        .enumerate()
        .map(|(i, &p)| RegionSpec {
            region_id: format!("r{i}"),
            location: p,
            stratum: "s".into(),
            population: None,
        })
        .collect();
    let skew = rng.gen_range(1.0..3.0);
    let recs = (0..records)
        .map(|i| {
            // concentrate records in some regions
            let region = ((rng.gen::<f64>().powf(skew)) * regions as f64) as usize;
            Record {
                record_id: format!("p{i}"),
                region_id: format!("r{}", region.min(regions - 1)),
                values: domains
                    .iter()
                    .map(|&d| {
                        let v = (rng.gen::<f64>().powf(skew) * d as f64) as usize;
                        format!("v{}", v.min(d - 1))
                    })
                    .collect(),
            }
        })
        .collect();
    Dataset::assemble(schema(domains), specs, recs).unwrap()
}

pub fn random_domains(rng: &mut ChaCha8Rng) -> Vec<usize> {
    let arity = rng.gen_range(1..=4);
    (0..arity).map(|_| rng.gen_range(2..=6)).collect()
}

/// Lowest-index nearest point by linear scan.
pub fn brute_nearest(sites: &[Point], q: &Point) -> usize {
    let mut best = 0;
    for (i, s) in sites.iter().enumerate() {
        if q.dist2(s) < q.dist2(&sites[best]) {
            best = i;
        }
    }
    best
}

/// Per (aggregated id, class) record counts from raw records.
pub fn class_counts(dataset: &Dataset, mapping: &[usize]) -> BTreeMap<(usize, ClassKey), u64> {
    let mut counts = BTreeMap::new();
    for (i, key) in dataset.record_keys().iter().enumerate() {
        let agg = mapping[dataset.record_regions()[i]];
        *counts.entry((agg, key.clone())).or_insert(0) += 1;
    }
    counts
}

/// `alpha * centers - clusters at alpha`, assigning by linear scan.
pub fn brute_objective(centers: &[Point], regions: &[InitialRegion]) -> i64 {
    let mut counts: Vec<BTreeMap<ClassKey, u64>> = vec![BTreeMap::new(); centers.len()];
    for r in regions {
        let c = brute_nearest(centers, &r.location);
        for (key, n) in r.class_table.iter() {
            *counts[c].entry(key.clone()).or_insert(0) += n;
        }
    }
    let mins: Vec<u64> = counts
        .iter()
        .filter_map(|m| m.values().copied().min())
        .collect();
    let alpha = mins.iter().copied().min().unwrap_or(0);
    let lowest = mins.iter().filter(|&&m| m == alpha).count();
    alpha as i64 * centers.len() as i64 - lowest as i64
}
