//! Cluster-quality scoring, 2-D projection and provider throughput.

mod similarity;
mod stats;
mod throughput;
mod tsne;

pub use similarity::{
    centroid_similarity_stats, cosine, group_pairwise_mean, write_report_csv,
    GroupSimilarityReport, GroupStats, GroupValue, Metric, MetricReport, REPORT_CSV_HEADER,
};
pub use stats::{summarize, SummaryStats};
pub use throughput::{
    measure_throughput, write_throughput_csv, write_throughput_table, ThroughputReport,
    THROUGHPUT_TABLE_HEADER,
};
pub use tsne::{project_tsne, write_projection_csv, Projection, ProjectionConfig, MIN_ITERATIONS};
