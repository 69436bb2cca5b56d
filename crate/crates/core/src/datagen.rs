//! Synthetic microdata: every region draws a population and each record
//! samples its categories independently from the region's stratum.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rand::distributions::{Distribution, Uniform, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{QuasiIdentifierSchema, Record, RegionSpec};
use crate::par;

/// Populations drawn for regions without a fixed one.
pub const POPULATION_RANGE: RangeInclusive<u64> = 400..=700;

/// A generator template is a regions-file row; its optional population pins
/// the record count.
pub type RegionTemplate = RegionSpec;

/// Per-stratum categorical distributions, one probability vector per
/// attribute aligned with the attribute's domain order.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSpec {
    strata: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
}

impl DistributionSpec {
    pub fn new(strata: BTreeMap<String, BTreeMap<String, Vec<f64>>>) -> Result<Self> {
        for (stratum, attrs) in &strata {
            for (attr, probs) in attrs {
                if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(Error::Invalid(format!(
                        "stratum {stratum:?}, attribute {attr:?}: probabilities must be non-negative"
                    )));
                }
                let sum: f64 = probs.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Invalid(format!(
                        "stratum {stratum:?}, attribute {attr:?}: probabilities sum to {sum}, not 1"
                    )));
                }
            }
        }
        Ok(Self { strata })
    }

    pub fn strata(&self) -> &BTreeMap<String, BTreeMap<String, Vec<f64>>> {
        &self.strata
    }

    fn samplers(
        &self,
        schema: &QuasiIdentifierSchema,
    ) -> Result<BTreeMap<&str, Vec<WeightedIndex<f64>>>> {
        let mut out = BTreeMap::new();
        for (stratum, attrs) in &self.strata {
            if let Some(extra) = attrs
                .keys()
                .find(|a| !schema.attributes().iter().any(|s| s.name() == *a))
            {
                return Err(Error::Invalid(format!(
                    "stratum {stratum:?} has a distribution for unknown attribute {extra:?}"
                )));
            }
            let mut samplers = Vec::with_capacity(schema.arity());
            for attr in schema.attributes() {
                let probs = attrs.get(attr.name()).ok_or_else(|| {
                    Error::Invalid(format!(
                        "stratum {stratum:?} has no distribution for attribute {:?}",
                        attr.name()
                    ))
                })?;
                if probs.len() != attr.domain().len() {
                    return Err(Error::Invalid(format!(
                        "stratum {stratum:?}, attribute {:?}: {} probabilities for {} categories",
                        attr.name(),
                        probs.len(),
                        attr.domain().len()
                    )));
                }
                samplers.push(WeightedIndex::new(probs).map_err(|e| {
                    Error::Invalid(format!(
                        "stratum {stratum:?}, attribute {:?}: {e}",
                        attr.name()
                    ))
                })?);
            }
            out.insert(stratum.as_str(), samplers);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData {
    /// Templates with the drawn population filled in.
    pub regions: Vec<RegionSpec>,
    pub records: Vec<Record>,
}

/// Independent random stream for one region, stable under reordering of
/// the templates.
fn region_rng(seed: u64, region_id: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(region_id.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

pub fn generate(
    templates: &[RegionTemplate],
    spec: &DistributionSpec,
    schema: &QuasiIdentifierSchema,
    seed: u64,
) -> Result<GeneratedData> {
    let samplers = spec.samplers(schema)?;
    for t in templates {
        if !samplers.contains_key(t.stratum.as_str()) {
            return Err(Error::Invalid(format!(
                "region {} uses stratum {:?}, which has no distributions",
                t.region_id, t.stratum
            )));
        }
    }
    let population = Uniform::from(POPULATION_RANGE);

    let per_region = par::map(templates, |t| {
        let mut rng = region_rng(seed, &t.region_id);
        let n = t.population.unwrap_or_else(|| population.sample(&mut rng));
        let dists = &samplers[t.stratum.as_str()];
        let records: Vec<Record> = (0..n)
            .map(|i| Record {
                record_id: format!("{}-{i:04}", t.region_id),
                region_id: t.region_id.clone(),
                values: schema
                    .attributes()
                    .iter()
                    .zip(dists)
                    .map(|(attr, d)| attr.domain()[d.sample(&mut rng)].clone())
                    .collect(),
            })
            .collect();
        (
            RegionSpec {
                population: Some(n),
                ..t.clone()
            },
            records,
        )
    });

    let mut regions = Vec::with_capacity(templates.len());
    let mut records = Vec::new();
    for (r, recs) in per_region {
        regions.push(r);
        records.extend(recs);
    }
    Ok(GeneratedData { regions, records })
}
