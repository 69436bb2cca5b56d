pub mod error;
pub mod geometry;
pub mod model;
mod par;

pub use error::{Error, Result};
pub use par::is_parallel;
pub mod aggregation;
pub mod datagen;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod placement;
pub mod render;
pub mod sitecount;
