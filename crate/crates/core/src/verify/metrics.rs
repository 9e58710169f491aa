//! Spatial structure metrics of one area field.

use ndarray::ArrayView2;

use super::objects::{label_objects, sal_scaled_volume, sal_weighted_centre_distance, scai_d0_d1, OBJECT_THRESHOLD};
use super::variogram::fit_variogram;

/// Metric names in report order.
pub const METRIC_NAMES: [&str; 10] = [
    "area_total",
    "object_area",
    "object_count",
    "scaled_volume",
    "weighted_centre_distance",
    "scai_d0",
    "scai_d1",
    "nugget",
    "sill",
    "effective_range",
];

/// Values in [`METRIC_NAMES`] order; `None` where a metric is undefined
/// (no objects, fewer than two objects, constant field, area below 3×3).
pub fn spatial_metrics(field: ArrayView2<'_, f64>) -> [Option<f64>; 10] {
    let objects = label_objects(field, OBJECT_THRESHOLD);
    let scai = scai_d0_d1(&objects);
    let vario = fit_variogram(field).ok();
    [
        Some(field.sum()),
        Some(objects.area() as f64),
        Some(objects.len() as f64),
        sal_scaled_volume(&objects),
        sal_weighted_centre_distance(&objects),
        scai.map(|s| s.0),
        scai.map(|s| s.1),
        vario.map(|v| v.nugget),
        vario.map(|v| v.sill),
        vario.and_then(|v| v.effective_range),
    ]
}
