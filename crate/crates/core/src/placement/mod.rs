//! Site location selection.

pub mod adc;
pub mod balanced;

pub use adc::{run_adc, AdcOutcome, AdcParams, AdcTermination, ClusterState};
pub use balanced::{balanced_sites, place_sites, CellPartition, RowPartition, WeightedPoint};
