//! Collaborative-filtering experiment core: rating-data ingestion, four
//! recommendation models behind one interface, calibration metrics, and the
//! group-level analysis that relates per-user rating inconsistency to the
//! miscalibration of the recommendations the user receives.
//!
//! The [`data`] module parses MovieLens-format files and performs the seeded
//! per-user train/test split. [`recommenders`] fits user/item kNN, SVD++ and
//! ListRank-MF models, produces deterministic top-N lists and runs grid
//! search. [`metrics`] computes profile inconsistency and KL miscalibration;
//! [`analysis`] bins users by inconsistency and correlates the group means.
//! Everything downstream of a master seed is bit-for-bit reproducible.

pub mod analysis;
pub mod data;
pub mod metrics;
pub mod recommenders;
pub mod rng;

pub use analysis::{BinMode, GroupStats, UserMetrics};
pub use data::{Dataset, ItemCatalog, ItemId, RatingRecord, SplitPair, UserId};
pub use metrics::{CalibrationConfig, GenreDistribution, LogBase};
pub use recommenders::{
    Algorithm, ModelConfig, RecommendationList, Similarity, TrainedModel,
};
