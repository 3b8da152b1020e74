//! List-wise learning-to-rank matrix factorization.
//!
//! Each user's rated list defines a target top-one probability distribution
//! `P_ui = exp(r_ui) / Σ_j exp(r_uj)`; the model distribution is
//! `P̂_ui = exp(g(U_u · V_i)) / Σ_j exp(g(U_u · V_j))` with `g` the logistic
//! function. Training minimizes the cross-entropy between the two plus an
//! L2 penalty by full-batch gradient descent with a fixed learning rate.
//! Scores used for ranking are the raw inner products `U_u · V_i`.

use std::sync::Arc;

use rand::Rng;

use crate::data::Dataset;
use crate::rng::{derived_rng, Purpose};

use super::{Algorithm, ModelConfig, ModelError};

const INIT_SCALE: f64 = 0.01;

#[inline]
fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-user target distribution over the user's rated items, in profile
/// order. Each vector sums to one.
fn target_distributions(train: &Dataset) -> Vec<Vec<f64>> {
    (0..train.n_users())
        .map(|u| {
            let profile = train.user_profile(u);
            let exps: Vec<f64> = profile.iter().map(|&(_, r)| r.exp()).collect();
            let z: f64 = exps.iter().sum();
            exps.into_iter().map(|e| e / z).collect()
        })
        .collect()
}

/// Model distribution for one user given the current factors, plus the raw
/// inner products, in profile order.
fn model_distribution(
    train: &Dataset,
    user_factors: &[f64],
    item_factors: &[f64],
    factors: usize,
    u: usize,
) -> (Vec<f64>, Vec<f64>) {
    let profile = train.user_profile(u);
    let uu = &user_factors[u * factors..(u + 1) * factors];
    let dots: Vec<f64> = profile
        .iter()
        .map(|&(i, _)| {
            let vi = &item_factors[i * factors..(i + 1) * factors];
            uu.iter().zip(vi).map(|(&a, &b)| a * b).sum()
        })
        .collect();
    let exps: Vec<f64> = dots.iter().map(|&d| logistic(d).exp()).collect();
    let z: f64 = exps.iter().sum();
    (exps.into_iter().map(|e| e / z).collect(), dots)
}

/// Batch training objective:
/// `Σ_u Σ_{i in I_u} -P_ui ln P̂_ui + (reg/2) (||U||^2 + ||V||^2)`.
pub fn objective(
    train: &Dataset,
    user_factors: &[f64],
    item_factors: &[f64],
    factors: usize,
    reg: f64,
) -> f64 {
    let targets = target_distributions(train);
    let mut loss = 0.0;
    for (u, target) in targets.iter().enumerate() {
        let (p_hat, _) = model_distribution(train, user_factors, item_factors, factors, u);
        for (p, ph) in target.iter().zip(&p_hat) {
            loss -= p * ph.ln();
        }
    }
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    loss + 0.5 * reg * (sq(user_factors) + sq(item_factors))
}

/// Exact gradient of [`objective`] with respect to `(U, V)`, returned as
/// `(grad_u, grad_v)` in the same layout as the factor matrices.
pub fn gradient(
    train: &Dataset,
    user_factors: &[f64],
    item_factors: &[f64],
    factors: usize,
    reg: f64,
) -> (Vec<f64>, Vec<f64>) {
    let targets = target_distributions(train);
    let mut grad_u = vec![0.0; user_factors.len()];
    let mut grad_v = vec![0.0; item_factors.len()];

    for (u, target) in targets.iter().enumerate() {
        let profile = train.user_profile(u);
        let (p_hat, dots) = model_distribution(train, user_factors, item_factors, factors, u);
        let uu = &user_factors[u * factors..(u + 1) * factors];
        for (pos, &(i, _)) in profile.iter().enumerate() {
            // d loss / d dot = (P̂ - P) * g'(dot), the softmax cross-entropy
            // derivative chained through the logistic squashing.
            let g = logistic(dots[pos]);
            let coef = (p_hat[pos] - target[pos]) * g * (1.0 - g);
            let vi = &item_factors[i * factors..(i + 1) * factors];
            for c in 0..factors {
                grad_u[u * factors + c] += coef * vi[c];
                grad_v[i * factors + c] += coef * uu[c];
            }
        }
    }
    for (g, p) in grad_u.iter_mut().zip(user_factors) {
        *g += reg * p;
    }
    for (g, p) in grad_v.iter_mut().zip(item_factors) {
        *g += reg * p;
    }
    (grad_u, grad_v)
}

/// A fitted ListRank-MF model.
pub struct ListRankModel {
    config: ModelConfig,
    train: Arc<Dataset>,
    user_factors: Vec<f64>,
    item_factors: Vec<f64>,
}

impl ListRankModel {
    pub(super) fn fit(train: &Arc<Dataset>, config: &ModelConfig) -> Result<Self, ModelError> {
        let f = config.factors;
        let mut user_factors = vec![0.0; train.n_users() * f];
        let mut item_factors = vec![0.0; train.n_items() * f];
        let mut rng = derived_rng(config.rng_seed, Purpose::ModelInit, 0);
        for dst in [&mut user_factors, &mut item_factors] {
            for v in dst.iter_mut() {
                *v = rng.random_range(-INIT_SCALE..INIT_SCALE);
            }
        }

        let lr = config.learning_rate;
        let reg = config.regularization;
        for epoch in 0..config.epochs {
            let (grad_u, grad_v) = gradient(train, &user_factors, &item_factors, f, reg);
            for (p, g) in user_factors.iter_mut().zip(&grad_u) {
                *p -= lr * g;
            }
            for (p, g) in item_factors.iter_mut().zip(&grad_v) {
                *p -= lr * g;
            }
            let loss = objective(train, &user_factors, &item_factors, f, reg);
            if !loss.is_finite() {
                return Err(ModelError::Diverged {
                    algorithm: Algorithm::ListRankMf,
                    epoch: epoch + 1,
                });
            }
        }

        Ok(ListRankModel {
            config: config.clone(),
            train: Arc::clone(train),
            user_factors,
            item_factors,
        })
    }

    pub(super) fn from_params(
        train: &Arc<Dataset>,
        config: ModelConfig,
        user_factors: Vec<f64>,
        item_factors: Vec<f64>,
    ) -> Self {
        ListRankModel {
            config,
            train: Arc::clone(train),
            user_factors,
            item_factors,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn train(&self) -> &Arc<Dataset> {
        &self.train
    }

    pub fn factors(&self) -> (&[f64], &[f64]) {
        (&self.user_factors, &self.item_factors)
    }

    pub(super) fn score_idx(&self, u: usize, i: usize) -> f64 {
        let f = self.config.factors;
        let uu = &self.user_factors[u * f..(u + 1) * f];
        let vi = &self.item_factors[i * f..(i + 1) * f];
        uu.iter().zip(vi).map(|(&a, &b)| a * b).sum()
    }

    pub(super) fn score_candidates(&self, u: usize) -> Vec<(usize, f64)> {
        let n_items = self.train.n_items();
        let mut rated = vec![false; n_items];
        for &(i, _) in self.train.user_profile(u) {
            rated[i] = true;
        }
        (0..n_items)
            .filter(|&i| !rated[i])
            .map(|i| (i, self.score_idx(u, i)))
            .collect()
    }
}
