//! Divergence and classification metrics, and the summaries behind the
//! seed-variance and tradeoff plots.
//!
//! All logarithms are natural, so JSD is bounded by `ln 2`.

mod classification;
mod density;
mod divergence;
mod records;

pub use classification::{f1_positive, F1Score, DEFAULT_THRESHOLD};
pub use density::{
    density_summary, density_summary_with_edges, equal_width_edges, DensityCell, DensitySummary, PooledPoint,
    DEFAULT_ATTENTION_BINS, JSD_HISTOGRAM_BINS,
};
pub use divergence::{
    binary_tvd, check_distribution, jsd, kl, kl_smoothed, smooth, tvd, SIMPLEX_TOLERANCE, SMOOTHING,
};
pub use records::{class_split, mean_divergence, DivergenceRecord};
