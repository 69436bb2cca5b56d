//! Site-count approximation from the dynamic GAPS cutoff models.
//!
//! Both approaches turn a data-set statistic into a target population per
//! aggregated region (the cutoff), then divide the total population by it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ClassTable, GapsModel, LogBase, QuasiIdentifierSchema};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SiteCountResult {
    /// Entropy or max-combinations value fed to the cutoff model.
    pub model_input_value: f64,
    pub cutoff: f64,
    pub site_count: usize,
}

/// Shannon entropy of the class-size distribution:
/// `-sum_k t_k (k/N) log(k/N)` where `t_k` counts classes of size `k`.
pub fn dataset_entropy(table: &ClassTable, base: LogBase) -> Result<f64> {
    let n = table.total();
    if n == 0 {
        return Err(Error::Invalid(
            "entropy of an empty data set is undefined".into(),
        ));
    }
    let mut sizes: Vec<u64> = table.iter().map(|(_, c)| c).collect();
    sizes.sort_unstable();
    let n = n as f64;
    let mut entropy = 0.0;
    for group in sizes.chunk_by(|a, b| a == b) {
        let share = group[0] as f64 / n;
        entropy -= group.len() as f64 * share * base.log(share);
    }
    // log(1) can come back as -0.0
    Ok(entropy.max(0.0))
}

/// Number of possible equivalence classes: the product of domain sizes.
pub fn max_combinations(schema: &QuasiIdentifierSchema) -> f64 {
    schema
        .attributes()
        .iter()
        .map(|a| a.domain().len() as f64)
        .product()
}

pub fn gaps_cutoff(value: f64, model: &GapsModel) -> Result<f64> {
    if value.is_nan() || value <= 0.0 || value.is_infinite() {
        return Err(Error::Invalid(format!(
            "GAPS cutoff needs a positive model input, got {value}"
        )));
    }
    Ok(model.multiplier * value.powf(model.exponent))
}

/// `N / cutoff` rounded to nearest and clamped to `[1, region_count]`.
pub fn site_count(total_population: u64, cutoff: f64, region_count: usize) -> usize {
    let upper = region_count.max(1);
    let raw = (total_population as f64 / cutoff).round();
    if raw.is_nan() || raw < 1.0 {
        return 1;
    }
    if raw >= upper as f64 {
        return upper;
    }
    raw as usize
}

/// Entropy path end to end.
pub fn entropy_site_count(
    table: &ClassTable,
    base: LogBase,
    model: &GapsModel,
    region_count: usize,
) -> Result<SiteCountResult> {
    let value = dataset_entropy(table, base)?;
    finish(value, model, table.total(), region_count)
}

/// Max-combinations path end to end.
pub fn maxcombs_site_count(
    schema: &QuasiIdentifierSchema,
    total_population: u64,
    model: &GapsModel,
    region_count: usize,
) -> Result<SiteCountResult> {
    finish(
        max_combinations(schema),
        model,
        total_population,
        region_count,
    )
}

fn finish(
    value: f64,
    model: &GapsModel,
    total: u64,
    region_count: usize,
) -> Result<SiteCountResult> {
    if value <= 0.0 {
        // zero entropy (a single class) leaves the power law without a
        // meaningful cutoff; one region holds everything
        return Ok(SiteCountResult {
            model_input_value: value,
            cutoff: f64::INFINITY,
            site_count: 1,
        });
    }
    let cutoff = gaps_cutoff(value, model)?;
    Ok(SiteCountResult {
        model_input_value: value,
        cutoff,
        site_count: site_count(total, cutoff, region_count),
    })
}
