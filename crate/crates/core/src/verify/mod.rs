//! Forecast verification: scores, rank histograms, object and variogram metrics.

pub mod metrics;
pub mod objects;
pub mod pit;
pub mod records;
pub mod report;
pub mod rolling;
pub mod scores;
pub mod variogram;

pub use metrics::{spatial_metrics, METRIC_NAMES};
pub use objects::{label_objects, sal_scaled_volume, sal_weighted_centre_distance, scai_d0_d1, ObjectSet, OBJECT_THRESHOLD};
pub use pit::{chi_square_uniform, pit_bin, PitHistogram};
pub use scores::{bias, brier, brier_constant, bss, reliability_curve, ReliabilityBin};
pub use variogram::{empirical_variogram, fit_exponential, fit_variogram, EmpiricalLag, VariogramFit};
pub use records::{read_ndjson, write_ndjson, NdjsonWriter, QualityRecord, VerificationRecord};
pub use report::{quality_summary, report, PitRow, QualityRow, ReliabilityRow, Report, ScoreRow};
pub use rolling::{fit_window, origins, rolling_origin, rolling_origin_collect, FitSummary, RollingConfig, RollingSummary, WindowFit};
