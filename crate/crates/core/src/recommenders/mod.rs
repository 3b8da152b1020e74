//! Four collaborative-filtering models behind one interface: fit on a train
//! dataset, score `(user, item)` pairs, and produce deterministic top-N
//! recommendation lists, plus precision evaluation and a grid-search
//! harness.

pub mod grid;
pub mod knn;
pub mod listrank;
pub mod persist;
pub mod svdpp;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::data::{DataError, Dataset, ItemId, UserId};

pub use grid::{grid_search, parse_grid_file, GridReportRow};
pub use knn::KnnModel;
pub use listrank::ListRankModel;
pub use persist::{load_model, save_model};
pub use svdpp::{SvdPpModel, SvdPpParams};

/// The four supported algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    UserKnn,
    ItemKnn,
    SvdPlusPlus,
    ListRankMf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::UserKnn,
        Algorithm::ItemKnn,
        Algorithm::SvdPlusPlus,
        Algorithm::ListRankMf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::UserKnn => "user_knn",
            Algorithm::ItemKnn => "item_knn",
            Algorithm::SvdPlusPlus => "svdpp",
            Algorithm::ListRankMf => "listrank_mf",
        }
    }

    /// Stable ordinal used as a seed-derivation salt.
    pub fn ordinal(self) -> u64 {
        match self {
            Algorithm::UserKnn => 0,
            Algorithm::ItemKnn => 1,
            Algorithm::SvdPlusPlus => 2,
            Algorithm::ListRankMf => 3,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "user_knn" => Ok(Algorithm::UserKnn),
            "item_knn" => Ok(Algorithm::ItemKnn),
            "svdpp" => Ok(Algorithm::SvdPlusPlus),
            "listrank_mf" => Ok(Algorithm::ListRankMf),
            other => Err(ModelError::InvalidConfig(format!(
                "unknown algorithm {other:?} (expected user_knn, item_knn, svdpp or listrank_mf)"
            ))),
        }
    }
}

/// Similarity measure for the neighborhood models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Similarity {
    #[default]
    Cosine,
    Pearson,
}

impl Similarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Similarity::Cosine => "cosine",
            Similarity::Pearson => "pearson",
        }
    }
}

impl fmt::Display for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Similarity {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cosine" => Ok(Similarity::Cosine),
            "pearson" => Ok(Similarity::Pearson),
            other => Err(ModelError::InvalidConfig(format!(
                "unknown similarity {other:?} (expected cosine or pearson)"
            ))),
        }
    }
}

/// Hyperparameters for one model. Fields irrelevant to the chosen algorithm
/// are ignored by `fit` but still validated.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub algorithm: Algorithm,
    /// Neighborhood size (kNN).
    pub k: usize,
    /// Similarity measure (kNN).
    pub similarity: Similarity,
    /// Latent dimensionality (matrix factorization).
    pub factors: usize,
    pub learning_rate: f64,
    pub regularization: f64,
    pub epochs: usize,
    pub rng_seed: u64,
}

impl ModelConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        ModelConfig {
            algorithm,
            k: 50,
            similarity: Similarity::Cosine,
            factors: 20,
            learning_rate: 0.005,
            regularization: 0.02,
            epochs: 20,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.k < 1 {
            return Err(ModelError::InvalidConfig("k must be >= 1".into()));
        }
        if self.factors < 1 {
            return Err(ModelError::InvalidConfig("factors must be >= 1".into()));
        }
        if self.epochs < 1 {
            return Err(ModelError::InvalidConfig("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidConfig(
                "learning_rate must be positive and finite".into(),
            ));
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(ModelError::InvalidConfig(
                "regularization must be non-negative and finite".into(),
            ));
        }
        Ok(())
    }

    /// Applies one `key = value` assignment; shared by the grid-file parser
    /// and the experiment-config parser.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ModelError> {
        let bad = |what: &str| {
            ModelError::InvalidConfig(format!("invalid {what} value {value:?}"))
        };
        match key {
            "algorithm" => self.algorithm = value.parse()?,
            "k" => self.k = value.parse().map_err(|_| bad("k"))?,
            "similarity" => self.similarity = value.parse()?,
            "factors" => self.factors = value.parse().map_err(|_| bad("factors"))?,
            "learning_rate" => {
                self.learning_rate = value.parse().map_err(|_| bad("learning_rate"))?
            }
            "regularization" => {
                self.regularization = value.parse().map_err(|_| bad("regularization"))?
            }
            "epochs" => self.epochs = value.parse().map_err(|_| bad("epochs"))?,
            "rng_seed" => self.rng_seed = value.parse().map_err(|_| bad("rng_seed"))?,
            other => {
                return Err(ModelError::InvalidConfig(format!(
                    "unknown model parameter {other:?}"
                )))
            }
        }
        Ok(())
    }

    /// Short human-readable summary of the tuned parameters.
    pub fn summary(&self) -> String {
        match self.algorithm {
            Algorithm::UserKnn | Algorithm::ItemKnn => format!(
                "{} k={} similarity={}",
                self.algorithm, self.k, self.similarity
            ),
            Algorithm::SvdPlusPlus | Algorithm::ListRankMf => format!(
                "{} factors={} learning_rate={} regularization={} epochs={} rng_seed={}",
                self.algorithm,
                self.factors,
                self.learning_rate,
                self.regularization,
                self.epochs,
                self.rng_seed
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("user {0} is not in the training data")]
    UnknownUser(UserId),
    #[error("item {0} is not in the training data")]
    UnknownItem(ItemId),
    #[error("{algorithm} training diverged: objective became non-finite in epoch {epoch}")]
    Diverged { algorithm: Algorithm, epoch: usize },
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("grid mixes algorithms ({0} and {1}); one grid serves one algorithm")]
    MixedAlgorithms(Algorithm, Algorithm),
    #[error("validation split produced no held-out ratings")]
    NoValidationData,
    #[error("fit failed for grid entry {index} ({summary}): {source}")]
    GridFit {
        index: usize,
        summary: String,
        #[source]
        source: Box<ModelError>,
    },
    #[error("model dump is malformed: {0}")]
    PersistFormat(String),
    #[error("model dump was trained on a different dataset (fingerprint {expected:016x}, got {actual:016x})")]
    FingerprintMismatch { expected: u64, actual: u64 },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Ranked top-N recommendations for one user. Scores are non-increasing and
/// ties are broken by ascending item id; no item from the user's train
/// profile ever appears.
#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationList {
    pub user: UserId,
    pub items: Vec<(ItemId, f64)>,
}

impl RecommendationList {
    pub fn item_ids(&self) -> Vec<ItemId> {
        self.items.iter().map(|&(item, _)| item).collect()
    }
}

/// A fitted recommender. Immutable after `fit`; scoring and recommending
/// are pure reads and safe to call from any number of threads.
pub enum TrainedModel {
    UserKnn(KnnModel),
    ItemKnn(KnnModel),
    SvdPlusPlus(SvdPpModel),
    ListRankMf(ListRankModel),
}

/// Fits the configured algorithm on the training data.
pub fn fit(train: &Arc<Dataset>, config: &ModelConfig) -> Result<TrainedModel, ModelError> {
    config.validate()?;
    match config.algorithm {
        Algorithm::UserKnn => Ok(TrainedModel::UserKnn(KnnModel::fit_user_based(
            train, config,
        )?)),
        Algorithm::ItemKnn => Ok(TrainedModel::ItemKnn(KnnModel::fit_item_based(
            train, config,
        )?)),
        Algorithm::SvdPlusPlus => Ok(TrainedModel::SvdPlusPlus(SvdPpModel::fit(train, config)?)),
        Algorithm::ListRankMf => Ok(TrainedModel::ListRankMf(ListRankModel::fit(train, config)?)),
    }
}

impl TrainedModel {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            TrainedModel::UserKnn(_) => Algorithm::UserKnn,
            TrainedModel::ItemKnn(_) => Algorithm::ItemKnn,
            TrainedModel::SvdPlusPlus(_) => Algorithm::SvdPlusPlus,
            TrainedModel::ListRankMf(_) => Algorithm::ListRankMf,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        match self {
            TrainedModel::UserKnn(m) | TrainedModel::ItemKnn(m) => m.config(),
            TrainedModel::SvdPlusPlus(m) => m.config(),
            TrainedModel::ListRankMf(m) => m.config(),
        }
    }

    pub fn train(&self) -> &Arc<Dataset> {
        match self {
            TrainedModel::UserKnn(m) | TrainedModel::ItemKnn(m) => m.train(),
            TrainedModel::SvdPlusPlus(m) => m.train(),
            TrainedModel::ListRankMf(m) => m.train(),
        }
    }

    /// Predicted preference of `user` for `item`; both must appear in train.
    pub fn score(&self, user: UserId, item: ItemId) -> Result<f64, ModelError> {
        let train = self.train();
        let u = train
            .user_index(user)
            .ok_or(ModelError::UnknownUser(user))?;
        let i = train
            .item_index(item)
            .ok_or(ModelError::UnknownItem(item))?;
        Ok(self.score_idx(u, i))
    }

    fn score_idx(&self, u: usize, i: usize) -> f64 {
        match self {
            TrainedModel::UserKnn(m) | TrainedModel::ItemKnn(m) => m.score_idx(u, i),
            TrainedModel::SvdPlusPlus(m) => m.score_idx(u, i),
            TrainedModel::ListRankMf(m) => m.score_idx(u, i),
        }
    }

    /// Scores every train item outside the user's profile and returns the
    /// `n` best, sorted by descending score with ties broken by ascending
    /// item id. Fewer than `n` items are returned when the candidate set is
    /// smaller.
    pub fn recommend_top_n(&self, user: UserId, n: usize) -> Result<RecommendationList, ModelError> {
        let train = self.train();
        let u = train
            .user_index(user)
            .ok_or(ModelError::UnknownUser(user))?;
        Ok(self.recommend_for_index(u, n))
    }

    fn recommend_for_index(&self, u: usize, n: usize) -> RecommendationList {
        let train = self.train();
        let mut scores = match self {
            TrainedModel::UserKnn(m) | TrainedModel::ItemKnn(m) => m.score_candidates(u),
            TrainedModel::SvdPlusPlus(m) => m.score_candidates(u),
            TrainedModel::ListRankMf(m) => m.score_candidates(u),
        };
        scores.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scores.truncate(n);
        RecommendationList {
            user: train.user_id(u),
            items: scores
                .into_iter()
                .map(|(i, s)| (train.item_id(i), s))
                .collect(),
        }
    }

    /// Top-N lists for every train user, computed in parallel. The output
    /// order (ascending user id) and contents are independent of the worker
    /// count.
    pub fn recommend_all(&self, n: usize) -> Vec<RecommendationList> {
        let n_users = self.train().n_users();
        (0..n_users)
            .into_par_iter()
            .map(|u| self.recommend_for_index(u, n))
            .collect()
    }
}

/// Fraction of the first `k` recommended items that appear in the user's
/// test set. With a `relevance_threshold`, a test item only counts when its
/// test rating is at least the threshold.
pub fn precision_at_k(
    recs: &RecommendationList,
    test: &Dataset,
    k: usize,
    relevance_threshold: Option<f64>,
) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = recs
        .items
        .iter()
        .take(k)
        .filter(|(item, _)| match test.rating(recs.user, *item) {
            Some(r) => relevance_threshold.is_none_or(|t| r >= t),
            None => false,
        })
        .count();
    hits as f64 / k as f64
}

/// Mean precision@k over every test user that also appears in train, with
/// the per-user lists generated by the model. Returns `None` when no user
/// qualifies. The second element is the number of users averaged.
pub fn evaluate_precision(
    model: &TrainedModel,
    test: &Dataset,
    k: usize,
    relevance_threshold: Option<f64>,
) -> Option<(f64, usize)> {
    let train = model.train();
    let eval_users: Vec<usize> = test
        .user_ids()
        .iter()
        .filter_map(|user| train.user_index(*user))
        .collect();
    if eval_users.is_empty() {
        return None;
    }
    let precisions: Vec<f64> = eval_users
        .par_iter()
        .map(|&u| {
            let recs = model.recommend_for_index(u, k);
            precision_at_k(&recs, test, k, relevance_threshold)
        })
        .collect();
    let sum: f64 = precisions.iter().sum();
    Some((sum / precisions.len() as f64, precisions.len()))
}
