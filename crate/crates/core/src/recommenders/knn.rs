//! User- and item-based neighborhood models.
//!
//! Similarities are computed over co-rated entries only: cosine on the raw
//! co-rated vectors, Pearson after centering each side by its mean over the
//! co-rated entries. Pairs with fewer than two co-ratings get similarity 0,
//! and only positive similarities ever contribute to a prediction.

use std::sync::Arc;

use rayon::prelude::*;

use crate::data::Dataset;

use super::{ModelConfig, ModelError, Similarity};

/// Running sums over the co-rated entries of one pair.
#[derive(Debug, Clone, Copy, Default)]
struct PairSums {
    n: u32,
    sxy: f64,
    sxx: f64,
    syy: f64,
    sx: f64,
    sy: f64,
}

impl PairSums {
    #[inline]
    fn add(&mut self, x: f64, y: f64) {
        self.n += 1;
        self.sxy += x * y;
        self.sxx += x * x;
        self.syy += y * y;
        self.sx += x;
        self.sy += y;
    }

    /// Turns the sums into a similarity in `[-1, 1]`. Pairs with fewer than
    /// two co-ratings, and Pearson pairs where either side is constant, are
    /// mapped to 0.
    fn finish(&self, kind: Similarity) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        match kind {
            Similarity::Cosine => {
                let den = (self.sxx * self.syy).sqrt();
                if den > 0.0 {
                    (self.sxy / den).clamp(-1.0, 1.0)
                } else {
                    0.0
                }
            }
            Similarity::Pearson => {
                let n = f64::from(self.n);
                let num = self.sxy - self.sx * self.sy / n;
                let var_x = self.sxx - self.sx * self.sx / n;
                let var_y = self.syy - self.sy * self.sy / n;
                let den = (var_x * var_y).sqrt();
                if den > 0.0 {
                    (num / den).clamp(-1.0, 1.0)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Merge-join of two ascending profiles, accumulating co-rated sums.
fn co_rated_sums(a: &[(usize, f64)], b: &[(usize, f64)]) -> PairSums {
    let mut sums = PairSums::default();
    let (mut ia, mut ib) = (0, 0);
    while ia < a.len() && ib < b.len() {
        match a[ia].0.cmp(&b[ib].0) {
            std::cmp::Ordering::Less => ia += 1,
            std::cmp::Ordering::Greater => ib += 1,
            std::cmp::Ordering::Equal => {
                sums.add(a[ia].1, b[ib].1);
                ia += 1;
                ib += 1;
            }
        }
    }
    sums
}

#[inline]
fn tri_index(hi: usize, lo: usize) -> usize {
    debug_assert!(hi > lo);
    hi * (hi - 1) / 2 + lo
}

/// A fitted neighborhood model (user- or item-based).
pub struct KnnModel {
    user_based: bool,
    config: ModelConfig,
    train: Arc<Dataset>,
    user_means: Vec<f64>,
    item_means: Vec<f64>,
    /// Item-based only: packed strict lower triangle of item-item
    /// similarities, indexed by [`tri_index`].
    item_sims: Option<Vec<f64>>,
}

impl KnnModel {
    pub(super) fn fit_user_based(
        train: &Arc<Dataset>,
        config: &ModelConfig,
    ) -> Result<Self, ModelError> {
        Ok(KnnModel {
            user_based: true,
            config: config.clone(),
            train: Arc::clone(train),
            user_means: entity_means(train, true),
            item_means: entity_means(train, false),
            item_sims: None,
        })
    }

    pub(super) fn fit_item_based(
        train: &Arc<Dataset>,
        config: &ModelConfig,
    ) -> Result<Self, ModelError> {
        let sims = build_item_similarities(train, config.similarity);
        Ok(KnnModel {
            user_based: false,
            config: config.clone(),
            train: Arc::clone(train),
            user_means: entity_means(train, true),
            item_means: entity_means(train, false),
            item_sims: Some(sims),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn train(&self) -> &Arc<Dataset> {
        &self.train
    }

    pub fn is_user_based(&self) -> bool {
        self.user_based
    }

    pub fn user_mean(&self, u: usize) -> f64 {
        self.user_means[u]
    }

    pub fn item_mean(&self, i: usize) -> f64 {
        self.item_means[i]
    }

    /// Similarity between two users (dense indexes).
    pub fn user_similarity(&self, a: usize, b: usize) -> f64 {
        co_rated_sums(self.train.user_profile(a), self.train.user_profile(b))
            .finish(self.config.similarity)
    }

    /// Similarity between two items (dense indexes).
    pub fn item_similarity(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return co_rated_sums(self.train.item_raters(a), self.train.item_raters(b))
                .finish(self.config.similarity);
        }
        match &self.item_sims {
            Some(sims) => sims[tri_index(a.max(b), a.min(b))],
            None => co_rated_sums(self.train.item_raters(a), self.train.item_raters(b))
                .finish(self.config.similarity),
        }
    }

    /// Similarities from user `u` to every other user, by accumulation over
    /// the raters of u's items. Visits each co-rated item in ascending
    /// order, matching [`co_rated_sums`] bit for bit.
    fn user_sim_row(&self, u: usize) -> Vec<f64> {
        let n_users = self.train.n_users();
        let mut sums = vec![PairSums::default(); n_users];
        for &(item, r_u) in self.train.user_profile(u) {
            for &(v, r_v) in self.train.item_raters(item) {
                if v != u {
                    sums[v].add(r_u, r_v);
                }
            }
        }
        sums.iter().map(|s| s.finish(self.config.similarity)).collect()
    }

    pub(super) fn score_idx(&self, u: usize, i: usize) -> f64 {
        if self.user_based {
            let mut contributors: Vec<(f64, usize, f64)> = self
                .train
                .item_raters(i)
                .iter()
                .filter(|&&(v, _)| v != u)
                .map(|&(v, r_v)| {
                    let sim = co_rated_sums(
                        self.train.user_profile(u),
                        self.train.user_profile(v),
                    )
                    .finish(self.config.similarity);
                    (sim, v, r_v)
                })
                .filter(|&(sim, _, _)| sim > 0.0)
                .collect();
            let baseline = self.user_means[u];
            self.weighted_prediction(&mut contributors, baseline, &self.user_means)
        } else {
            let mut contributors: Vec<(f64, usize, f64)> = self
                .train
                .user_profile(u)
                .iter()
                .filter(|&&(j, _)| j != i)
                .map(|&(j, r_j)| (self.item_similarity(i, j), j, r_j))
                .filter(|&(sim, _, _)| sim > 0.0)
                .collect();
            let baseline = self.item_means[i];
            self.weighted_prediction(&mut contributors, baseline, &self.item_means)
        }
    }

    /// Shared tail of the prediction rule: order contributors by descending
    /// similarity (ties by ascending index), keep the top k, and add the
    /// similarity-weighted mean deviation to the baseline.
    fn weighted_prediction(
        &self,
        contributors: &mut Vec<(f64, usize, f64)>,
        baseline: f64,
        means: &[f64],
    ) -> f64 {
        contributors.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        contributors.truncate(self.config.k);
        if contributors.is_empty() {
            return baseline;
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for &(sim, idx, rating) in contributors.iter() {
            num += sim * (rating - means[idx]);
            den += sim.abs();
        }
        baseline + num / den
    }

    /// Scores every item outside u's profile.
    pub(super) fn score_candidates(&self, u: usize) -> Vec<(usize, f64)> {
        if self.user_based {
            self.score_candidates_user_based(u)
        } else {
            self.score_candidates_item_based(u)
        }
    }

    fn score_candidates_user_based(&self, u: usize) -> Vec<(usize, f64)> {
        let n_items = self.train.n_items();
        let row = self.user_sim_row(u);
        let mut neighbors: Vec<(usize, f64)> = row
            .iter()
            .enumerate()
            .filter(|&(v, &sim)| v != u && sim > 0.0)
            .map(|(v, &sim)| (v, sim))
            .collect();
        // Descending similarity so that the first k contributors reaching an
        // item are exactly its top-k neighborhood.
        neighbors.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

        let mut rated = vec![false; n_items];
        for &(i, _) in self.train.user_profile(u) {
            rated[i] = true;
        }
        let mut num = vec![0.0; n_items];
        let mut den = vec![0.0; n_items];
        let mut count = vec![0u32; n_items];
        let k = self.config.k as u32;
        for &(v, sim) in &neighbors {
            let mean_v = self.user_means[v];
            for &(i, r_vi) in self.train.user_profile(v) {
                if !rated[i] && count[i] < k {
                    num[i] += sim * (r_vi - mean_v);
                    den[i] += sim.abs();
                    count[i] += 1;
                }
            }
        }

        let baseline = self.user_means[u];
        (0..n_items)
            .filter(|&i| !rated[i])
            .map(|i| {
                let score = if count[i] > 0 {
                    baseline + num[i] / den[i]
                } else {
                    baseline
                };
                (i, score)
            })
            .collect()
    }

    fn score_candidates_item_based(&self, u: usize) -> Vec<(usize, f64)> {
        let n_items = self.train.n_items();
        let profile = self.train.user_profile(u);
        let mut rated = vec![false; n_items];
        for &(i, _) in profile {
            rated[i] = true;
        }
        let mut buffer: Vec<(f64, usize, f64)> = Vec::with_capacity(profile.len());
        (0..n_items)
            .filter(|&i| !rated[i])
            .map(|i| {
                buffer.clear();
                for &(j, r_j) in profile {
                    let sim = self.item_similarity(i, j);
                    if sim > 0.0 {
                        buffer.push((sim, j, r_j));
                    }
                }
                let mut contributors = std::mem::take(&mut buffer);
                let score =
                    self.weighted_prediction(&mut contributors, self.item_means[i], &self.item_means);
                buffer = contributors;
                (i, score)
            })
            .collect()
    }
}

/// Mean rating per user (or per item) as dense vectors.
fn entity_means(train: &Dataset, user: bool) -> Vec<f64> {
    if user {
        (0..train.n_users())
            .map(|u| {
                let profile = train.user_profile(u);
                profile.iter().map(|&(_, r)| r).sum::<f64>() / profile.len() as f64
            })
            .collect()
    } else {
        (0..train.n_items())
            .map(|i| {
                let raters = train.item_raters(i);
                raters.iter().map(|&(_, r)| r).sum::<f64>() / raters.len() as f64
            })
            .collect()
    }
}

/// Packed strict-lower-triangle item-item similarity matrix, one row per
/// item computed in parallel. Row `i` accumulates over the profiles of its
/// raters, visiting only items `j < i`; the pair `(i, j)` therefore gets its
/// sums in ascending user order, matching [`co_rated_sums`] bit for bit.
fn build_item_similarities(train: &Dataset, kind: Similarity) -> Vec<f64> {
    let n_items = train.n_items();
    let rows: Vec<Vec<f64>> = (1..n_items)
        .into_par_iter()
        .map(|i| {
            let mut sums = vec![PairSums::default(); i];
            for &(u, r_i) in train.item_raters(i) {
                for &(j, r_j) in train.user_profile(u) {
                    if j >= i {
                        break;
                    }
                    sums[j].add(r_j, r_i);
                }
            }
            sums.iter().map(|s| s.finish(kind)).collect()
        })
        .collect();
    let mut packed = Vec::with_capacity(n_items * (n_items - 1) / 2);
    for row in rows {
        packed.extend(row);
    }
    packed
}
