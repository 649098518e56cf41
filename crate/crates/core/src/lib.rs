//! Curriculum person clustering.
//!
//! Unsupervised training over embedding vectors: features are clustered with
//! DBSCAN into pseudo labels, a cluster-center memory bank drives a
//! temperature-scaled contrastive loss, and a curriculum widens the DBSCAN
//! radius whenever the clustered samples correlate strongly with their
//! centers. A synthetic clothes-change benchmark and long-term retrieval
//! metrics make the whole loop checkable against ground truth.
//!
//! ```no_run
//! use cpc::{run_baseline, run_cpc, synth};
//!
//! let (raw, _meta) = synth::generate(&synth::SynthConfig::default()).unwrap();
//! let config = cpc::experiment::benchmark_train_config();
//! let cpc = run_cpc(&raw, &config).unwrap();
//! let base = run_baseline(&raw, &config).unwrap();
//! println!("{} vs {} clusters", cpc.labels.num_clusters(), base.labels.num_clusters());
//! ```

pub mod config;
pub mod curriculum;
pub mod dbscan;
pub mod embedding;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod memory_bank;
pub mod seeding;
pub mod synth;
pub mod trainer;

pub use curriculum::{center_similarity, relaxing_index, scheduler_delta, CurriculumState, RiVariant};
pub use dbscan::{dbscan, relabel_compact, ClusterParams, PseudoLabeling};
pub use embedding::{
    l2_normalize, load_embeddings, pairwise_distances, save_embeddings, DistanceMatrix,
    FeatureMatrix, SampleMeta, SampleRecord,
};
pub use encoder::{contrastive_loss, encoder_forward, loss_gradient, EncoderParams};
pub use error::{CpcError, Result};
pub use evaluation::{clustering_quality, evaluate_retrieval, Metrics, Protocol, RetrievalResult};
pub use memory_bank::ClusterBank;
pub use trainer::{run_baseline, run_cpc, TrainConfig, TrainOutcome};
