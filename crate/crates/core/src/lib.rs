//! Multi-view graph embedding with simultaneous hub detection.
//!
//! The crate learns one orthonormal node embedding shared by several affinity
//! views of the same node set, weighting the views automatically, and reads
//! hub (boundary-spanning) nodes off the embedding's row norms. Around that
//! core sit the pieces needed to use it end to end: k-means node clustering,
//! subject-level spectral clustering from embedding distances, ACC/NMI
//! evaluation, a betweenness baseline, and a planted-structure generator.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the common double-precision instantiations.

pub mod cluster;
pub mod embed;
pub mod error;
pub mod graph;
pub mod hubs;
pub mod linalg;
pub mod metrics;
pub mod scalar;
pub mod synth;

pub use cluster::{cluster_subjects, kmeans, node_clusters, pairwise_similarity, ClusterAssignment, KMeansConfig, KMeansInit};
pub use embed::{solve, solve_all, solve_single_view, EmbedConfig, Embedding, Solution, SolveTrace, ViewWeights, WeightMode};
pub use error::{Error, Result};
pub use graph::{load_multiview, save_multiview, AffinityMatrix, IsolatedPolicy, MultiViewGraph, NegativeTransform};
pub use hubs::{betweenness, hub_scores, remove_hub_edges, select_hubs, HubMethod, HubReport, HubSelection};
pub use metrics::{accuracy, evaluate, hungarian, nmi, EvalResult};
pub use scalar::Scalar;
pub use synth::{generate_cohort, generate_multiview, PlantedSpec, PlantedTruth};

pub type AffinityMatrix64 = AffinityMatrix<f64>;
pub type MultiViewGraph64 = MultiViewGraph<f64>;
pub type Embedding64 = Embedding<f64>;
pub type EmbedConfig64 = EmbedConfig<f64>;
pub type ViewWeights64 = ViewWeights<f64>;
pub type SolveTrace64 = SolveTrace<f64>;
pub type Solution64 = Solution<f64>;
pub type HubReport64 = HubReport<f64>;

pub type AffinityMatrix32 = AffinityMatrix<f32>;
pub type MultiViewGraph32 = MultiViewGraph<f32>;
pub type Embedding32 = Embedding<f32>;
pub type EmbedConfig32 = EmbedConfig<f32>;

/// Library version, echoed into result files.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
