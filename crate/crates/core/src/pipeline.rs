//! End-to-end run: site count, placement, aggregation, metrics.

use std::fmt;
use std::time::Instant;

use serde::Serialize;

use crate::aggregation::{aggregate, AggregationResult};
use crate::error::Error;
use crate::geometry::Point;
use crate::metrics::{evaluate, MetricsReport, StageTimings};
use crate::model::{AdcSeed, Dataset, PipelineConfig, PlacementApproach, SiteCountApproach};
use crate::placement::adc::random_seeds;
use crate::placement::{balanced_sites, run_adc, AdcOutcome, AdcParams, AdcTermination};
use crate::sitecount::{entropy_site_count, maxcombs_site_count, SiteCountResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Validation,
    SiteCount,
    Placement,
    Aggregation,
    Metrics,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Validation => "validation",
            Stage::SiteCount => "site_count",
            Stage::Placement => "placement",
            Stage::Aggregation => "aggregation",
            Stage::Metrics => "metrics",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdcSummary {
    pub seed_objective: i64,
    pub final_objective: i64,
    pub moves: usize,
    pub termination: AdcTermination,
}

impl From<&AdcOutcome> for AdcSummary {
    fn from(o: &AdcOutcome) -> Self {
        Self {
            seed_objective: o.seed_objective,
            final_objective: o.final_objective,
            moves: o.commits.len(),
            termination: o.termination,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub site_count: SiteCountResult,
    pub sites: Vec<Point>,
    pub adc: Option<AdcSummary>,
    pub result: AggregationResult,
    pub metrics: MetricsReport,
    pub timings: StageTimings,
    pub warnings: Vec<String>,
}

impl PipelineOutput {
    pub fn has_warnings(&self) -> bool {
        !self.warnings.is_empty()
    }
}

fn at(stage: Stage) -> impl Fn(Error) -> PipelineError {
    move |source| PipelineError { stage, source }
}

pub fn run_pipeline(
    config: &PipelineConfig,
    dataset: &Dataset,
) -> Result<PipelineOutput, PipelineError> {
    let start = Instant::now();
    let regions = dataset.regions();
    config
        .validate(regions.len())
        .map_err(at(Stage::Validation))?;
    if regions.is_empty() {
        return Err(at(Stage::Validation)(Error::Invalid(
            "the data set has no regions".into(),
        )));
    }
    let mut timings = StageTimings::default();
    let mut warnings = Vec::new();

    let t = Instant::now();
    let site_count = match config.site_count {
        SiteCountApproach::Entropy => entropy_site_count(
            &dataset.overall_table(),
            config.log_base,
            &config.gaps_model,
            regions.len(),
        ),
        SiteCountApproach::MaxCombs => maxcombs_site_count(
            dataset.schema(),
            dataset.total_population(),
            &config.gaps_model,
            regions.len(),
        ),
        SiteCountApproach::Fixed(n) => Ok(SiteCountResult {
            model_input_value: f64::NAN,
            cutoff: f64::NAN,
            site_count: n,
        }),
    }
    .map_err(at(Stage::SiteCount))?;
    timings.site_count_ms = StageTimings::ms(t.elapsed());

    let t = Instant::now();
    let s = site_count.site_count;
    let mut adc = None;
    let sites = match config.placement {
        PlacementApproach::Balanced => balanced_sites(regions, s).map_err(at(Stage::Placement))?,
        PlacementApproach::Adc => {
            let seeds = match config.adc_seed {
                AdcSeed::Balanced => balanced_sites(regions, s).map_err(at(Stage::Placement))?,
                AdcSeed::Random => random_seeds(regions, s, config.rng_seed),
            };
            let outcome = run_adc(
                seeds,
                regions,
                AdcParams {
                    k: config.k,
                    max_moves: config.max_moves,
                },
            );
            if outcome.termination == AdcTermination::MoveCap {
                warnings.push(format!(
                    "ADC stopped at the move cap of {}",
                    config.max_moves
                ));
            }
            let summary = AdcSummary::from(&outcome);
            adc = Some(summary);
            outcome.centers
        }
    };
    timings.placement_ms = StageTimings::ms(t.elapsed());

    let t = Instant::now();
    let result = aggregate(dataset, &sites, config.k).map_err(at(Stage::Aggregation))?;
    timings.aggregation_ms = StageTimings::ms(t.elapsed());
    for &d in &result.duplicate_sites {
        warnings.push(format!(
            "site {d} coincides with an earlier site and receives no regions"
        ));
    }
    let empty: Vec<usize> = result
        .empty_regions()
        .into_iter()
        .filter(|id| !result.duplicate_sites.contains(id))
        .collect();
    if !empty.is_empty() {
        let ids: Vec<String> = empty.iter().map(usize::to_string).collect();
        warnings.push(format!(
            "aggregated regions without initial regions: {}",
            ids.join(",")
        ));
    }

    let t = Instant::now();
    let mut metrics = evaluate(regions, &result, config.classical_discernibility);
    timings.metrics_ms = StageTimings::ms(t.elapsed());
    timings.total_ms = StageTimings::ms(start.elapsed());
    metrics.runtime = timings.clone();

    Ok(PipelineOutput {
        site_count,
        sites,
        adc,
        result,
        metrics,
        timings,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::verify_k_anonymity;
    use crate::model::{QuasiIdentifierSchema, Record, RegionSpec};

    fn dataset(per_region: &[&[&str]]) -> Dataset {
        let schema =
            QuasiIdentifierSchema::new(vec![("a".into(), vec!["x".into(), "y".into()])], "region")
                .unwrap();
        let mut specs = Vec::new();
        let mut records = Vec::new();
        for (i, labels) in per_region.iter().enumerate() {
            let id = format!("r{i}");
            specs.push(RegionSpec {
                region_id: id.clone(),
                location: Point::new(i as f64, (i % 3) as f64),
                stratum: "s".into(),
                population: None,
            });
            for (j, l) in labels.iter().enumerate() {
                records.push(Record {
                    record_id: format!("{id}-{j}"),
                    region_id: id.clone(),
                    values: vec![l.to_string()],
                });
            }
        }
        Dataset::assemble(schema, specs, records).unwrap()
    }

    #[test]
    fn k_above_total_suppresses_everything() {
        let d = dataset(&[&["x", "y"], &["x"], &["y", "y"]]);
        let mut cfg = PipelineConfig::new(50);
        cfg.site_count = SiteCountApproach::Fixed(2);
        let out = run_pipeline(&cfg, &d).unwrap();
        assert!(out.result.published.is_empty());
        assert_eq!(out.metrics.suppression_count, 5);
        assert_eq!(out.metrics.suppression_fraction, 1.0);
        assert!(verify_k_anonymity(&out.result.published, 50));
    }

    #[test]
    fn single_class_runs_with_one_site() {
        let d = dataset(&[&["x", "x"], &["x"]]);
        let out = run_pipeline(&PipelineConfig::new(2), &d).unwrap();
        assert_eq!(out.site_count.site_count, 1);
        assert_eq!(out.result.published.len(), 3);
    }

    #[test]
    fn invalid_config_fails_in_validation() {
        let d = dataset(&[&["x"]]);
        let mut cfg = PipelineConfig::new(2);
        cfg.site_count = SiteCountApproach::Fixed(4);
        let err = run_pipeline(&cfg, &d).unwrap_err();
        assert_eq!(err.stage, Stage::Validation);
    }

    #[test]
    fn adc_move_cap_is_a_warning() {
        let d = dataset(&[&["x", "y"], &["x"], &["y"], &["x", "y"], &["y"], &["x"]]);
        let mut cfg = PipelineConfig::new(10);
        cfg.site_count = SiteCountApproach::Fixed(6);
        cfg.placement = PlacementApproach::Adc;
        cfg.max_moves = 0;
        let out = run_pipeline(&cfg, &d).unwrap();
        assert_eq!(
            out.adc.as_ref().unwrap().termination,
            AdcTermination::MoveCap
        );
        assert!(out.warnings.iter().any(|w| w.contains("move cap")));
    }

    #[test]
    fn repeated_runs_agree() {
        let d = dataset(&[&["x", "y"], &["x"], &["y", "y"], &["x"], &["y"]]);
        let mut cfg = PipelineConfig::new(2);
        cfg.placement = PlacementApproach::Adc;
        cfg.adc_seed = AdcSeed::Random;
        cfg.site_count = SiteCountApproach::Fixed(3);
        let a = run_pipeline(&cfg, &d).unwrap();
        let b = run_pipeline(&cfg, &d).unwrap();
        assert_eq!(a.sites, b.sites);
        assert_eq!(a.result.region_mapping, b.result.region_mapping);
        assert_eq!(a.metrics.discernibility, b.metrics.discernibility);
    }
}
