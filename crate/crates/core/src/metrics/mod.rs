//! Segmentation metrics on integer label volumes with 1–3 spatial axes.
//! Distances are Euclidean in voxel units; boundaries use face adjacency.

mod instance;
mod overlap;
mod report;
mod surface;

pub use instance::{connected_components, instance_f1, instances_from_labels};
pub use overlap::dsc;
pub use report::{
    aggregate, evaluate_case, parse_metrics, Aggregate, ClassAggregate, ClassMetrics, EvalOptions, Metric,
    MetricReport, Stat,
};
pub use surface::{boundary, hd95, hd_percentile, nsd, percentile, squared_distance_transform};
