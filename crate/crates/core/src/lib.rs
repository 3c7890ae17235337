//! Training toolkit for threshold-based ordinal regression.
//!
//! Inputs are projected onto the real line, which a fixed threshold vector
//! partitions into class segments; training pushes each example into the
//! margin-shrunk segment of its rank through a pairwise hinge objective.
//! Alongside that method the crate ships extended-binary and classification
//! baselines, a minimal feedforward trunk with analytic gradients, synthetic
//! and CSV data sources, and a benchmark harness producing accuracy/MAE
//! tables and margin sweeps.

pub mod bench;
pub mod cli;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod losses;
pub mod metrics;
pub mod net;
pub mod ordinal;
pub mod sampler;
pub mod trainer;

pub use error::{Error, Result};
pub use losses::Method;
pub use metrics::MetricsReport;
pub use ordinal::{Boundaries, OrdinalDataset, RankLabel};
