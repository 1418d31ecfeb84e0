//! k-means over document vectors and elbow selection of K.

mod elbow;
mod kmeans;

pub use elbow::{default_candidates, knee_from_curve, select_k_elbow, ElbowResult};
pub use kmeans::{inertia, kmeans_fit, ClusterModel, KMeansConfig};
