//! Trip pattern mining: density clustering and audience prediction.

pub mod audience;
pub mod clusters;
pub mod dbscan;

pub use audience::{predict_all, predict_audience, AudienceHistogram};
pub use clusters::{spatial_clusters, temporal_clusters, SpatialCluster, TemporalCluster, TimeWindow};
pub use dbscan::{dbscan, ClusterId, Clustering, Label, Metric, PointSet};
