//! Hierarchical text classification with dual-view nearest-centroid scoring.

pub mod error;
pub mod inference;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod representation;
pub mod taxonomy;
pub mod workflow;

pub use error::{Error, ErrorClass, FormatError, Result};
pub use model::{ModelConfig, TrainedModel, TrainingSample};
pub use taxonomy::{CategoryPath, TaxonomyTree};
