//! SVD++: biased matrix factorization with implicit feedback terms,
//! trained by per-rating stochastic gradient descent.
//!
//! The prediction rule is
//! `r̂_ui = μ + b_u + b_i + q_i · (p_u + |R(u)|^(-1/2) Σ_{j in R(u)} y_j)`
//! with `R(u)` the set of items the user rated in train. Besides the SGD
//! trainer, the module exposes the batch training objective and its exact
//! gradient so tests can verify the calculus against finite differences.

use std::sync::Arc;

use rand::Rng;
use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::rng::{derived_rng, Purpose};

use super::{Algorithm, ModelConfig, ModelError};

const INIT_SCALE: f64 = 0.01;

/// All trainable parameters plus the fixed global mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdPpParams {
    pub factors: usize,
    pub global_mean: f64,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    /// `p`, row-major `n_users x factors`.
    pub user_factors: Vec<f64>,
    /// `q`, row-major `n_items x factors`.
    pub item_factors: Vec<f64>,
    /// `y`, row-major `n_items x factors`.
    pub implicit_factors: Vec<f64>,
}

impl SvdPpParams {
    pub fn zeros(n_users: usize, n_items: usize, factors: usize, global_mean: f64) -> Self {
        SvdPpParams {
            factors,
            global_mean,
            user_bias: vec![0.0; n_users],
            item_bias: vec![0.0; n_items],
            user_factors: vec![0.0; n_users * factors],
            item_factors: vec![0.0; n_items * factors],
            implicit_factors: vec![0.0; n_items * factors],
        }
    }

    /// Flattens the trainable parameters (biases first, then `p`, `q`, `y`)
    /// for finite-difference probing.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(
            self.user_bias.len()
                + self.item_bias.len()
                + self.user_factors.len()
                + self.item_factors.len()
                + self.implicit_factors.len(),
        );
        flat.extend_from_slice(&self.user_bias);
        flat.extend_from_slice(&self.item_bias);
        flat.extend_from_slice(&self.user_factors);
        flat.extend_from_slice(&self.item_factors);
        flat.extend_from_slice(&self.implicit_factors);
        flat
    }

    /// Inverse of [`to_flat`], keeping the shapes of `self`.
    pub fn from_flat(&self, flat: &[f64]) -> Self {
        let mut out = self.clone();
        let mut cursor = 0;
        for dst in [
            &mut out.user_bias,
            &mut out.item_bias,
            &mut out.user_factors,
            &mut out.item_factors,
            &mut out.implicit_factors,
        ] {
            let len = dst.len();
            dst.copy_from_slice(&flat[cursor..cursor + len]);
            cursor += len;
        }
        assert_eq!(cursor, flat.len());
        out
    }

    /// `p_u + |R(u)|^(-1/2) Σ_{j in R(u)} y_j` for one user.
    fn composite_user_vector(&self, train: &Dataset, u: usize) -> Vec<f64> {
        let f = self.factors;
        let profile = train.user_profile(u);
        let weight = 1.0 / (profile.len() as f64).sqrt();
        let mut composite = self.user_factors[u * f..(u + 1) * f].to_vec();
        for &(j, _) in profile {
            let y = &self.implicit_factors[j * f..(j + 1) * f];
            for (c, &yv) in composite.iter_mut().zip(y) {
                *c += weight * yv;
            }
        }
        composite
    }

    fn predict_with_composite(&self, composite: &[f64], u: usize, i: usize) -> f64 {
        let f = self.factors;
        let q = &self.item_factors[i * f..(i + 1) * f];
        let dot: f64 = q.iter().zip(composite).map(|(&a, &b)| a * b).sum();
        self.global_mean + self.user_bias[u] + self.item_bias[i] + dot
    }
}

/// Batch training objective:
/// `Σ_(u,i) (r_ui - r̂_ui)^2 + reg * (Σ b_u^2 + Σ b_i^2 + ||p||^2 + ||q||^2 + ||y||^2)`.
pub fn objective(params: &SvdPpParams, train: &Dataset, reg: f64) -> f64 {
    let mut loss = 0.0;
    for u in 0..train.n_users() {
        let composite = params.composite_user_vector(train, u);
        for &(i, r) in train.user_profile(u) {
            let err = r - params.predict_with_composite(&composite, u, i);
            loss += err * err;
        }
    }
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    loss + reg
        * (sq(&params.user_bias)
            + sq(&params.item_bias)
            + sq(&params.user_factors)
            + sq(&params.item_factors)
            + sq(&params.implicit_factors))
}

/// Exact gradient of [`objective`], flattened in [`SvdPpParams::to_flat`]
/// order.
pub fn gradient(params: &SvdPpParams, train: &Dataset, reg: f64) -> Vec<f64> {
    let f = params.factors;
    let mut grad = SvdPpParams::zeros(train.n_users(), train.n_items(), f, params.global_mean);

    for u in 0..train.n_users() {
        let profile = train.user_profile(u);
        let weight = 1.0 / (profile.len() as f64).sqrt();
        let composite = params.composite_user_vector(train, u);
        // Accumulated over the user's ratings: Σ_i -2 e_ui q_i, which feeds
        // both the p-gradient and (scaled by the implicit weight) every
        // y_j with j in R(u).
        let mut q_accum = vec![0.0; f];
        for &(i, r) in profile {
            let err = r - params.predict_with_composite(&composite, u, i);
            let scale = -2.0 * err;
            grad.user_bias[u] += scale;
            grad.item_bias[i] += scale;
            let q = &params.item_factors[i * f..(i + 1) * f];
            for (c, qa) in q_accum.iter_mut().enumerate() {
                grad.user_factors[u * f + c] += scale * q[c];
                grad.item_factors[i * f + c] += scale * composite[c];
                *qa += scale * q[c];
            }
        }
        for &(j, _) in profile {
            let dst = &mut grad.implicit_factors[j * f..(j + 1) * f];
            for (g, &qa) in dst.iter_mut().zip(&q_accum) {
                *g += weight * qa;
            }
        }
    }

    let mut flat = grad.to_flat();
    let params_flat = params.to_flat();
    for (g, p) in flat.iter_mut().zip(&params_flat) {
        *g += 2.0 * reg * p;
    }
    flat
}

/// A fitted SVD++ model.
pub struct SvdPpModel {
    config: ModelConfig,
    train: Arc<Dataset>,
    params: SvdPpParams,
    /// Cached composite user vectors, row-major `n_users x factors`.
    composite: Vec<f64>,
}

impl SvdPpModel {
    pub(super) fn fit(train: &Arc<Dataset>, config: &ModelConfig) -> Result<Self, ModelError> {
        let n_users = train.n_users();
        let n_items = train.n_items();
        let f = config.factors;
        let mut params = SvdPpParams::zeros(n_users, n_items, f, train.global_mean());

        let mut rng = derived_rng(config.rng_seed, Purpose::ModelInit, 0);
        for dst in [
            &mut params.user_factors,
            &mut params.item_factors,
            &mut params.implicit_factors,
        ] {
            for v in dst.iter_mut() {
                *v = rng.random_range(-INIT_SCALE..INIT_SCALE);
            }
        }

        let lr = config.learning_rate;
        let reg = config.regularization;
        let records = train.records();
        let mut order: Vec<usize> = (0..records.len()).collect();
        let mut q_snapshot = vec![0.0; f];

        for epoch in 0..config.epochs {
            let mut epoch_rng = derived_rng(config.rng_seed, Purpose::EpochShuffle, epoch as u64);
            order.shuffle(&mut epoch_rng);

            for &idx in &order {
                let record = &records[idx];
                let u = train.user_index(record.user).expect("record user in index");
                let i = train.item_index(record.item).expect("record item in index");
                let profile = train.user_profile(u);
                let weight = 1.0 / (profile.len() as f64).sqrt();

                let composite = params.composite_user_vector(train, u);
                let pred = params.predict_with_composite(&composite, u, i);
                let err = record.rating - pred;
                if !err.is_finite() {
                    return Err(ModelError::Diverged {
                        algorithm: Algorithm::SvdPlusPlus,
                        epoch: epoch + 1,
                    });
                }

                params.user_bias[u] += lr * (err - reg * params.user_bias[u]);
                params.item_bias[i] += lr * (err - reg * params.item_bias[i]);

                q_snapshot.copy_from_slice(&params.item_factors[i * f..(i + 1) * f]);
                for c in 0..f {
                    let puc = params.user_factors[u * f + c];
                    params.user_factors[u * f + c] += lr * (err * q_snapshot[c] - reg * puc);
                    params.item_factors[i * f + c] +=
                        lr * (err * composite[c] - reg * params.item_factors[i * f + c]);
                }
                for &(j, _) in profile {
                    let y = &mut params.implicit_factors[j * f..(j + 1) * f];
                    for (c, yv) in y.iter_mut().enumerate() {
                        *yv += lr * (err * weight * q_snapshot[c] - reg * *yv);
                    }
                }
            }

            let loss = objective(&params, train, reg);
            if !loss.is_finite() {
                return Err(ModelError::Diverged {
                    algorithm: Algorithm::SvdPlusPlus,
                    epoch: epoch + 1,
                });
            }
        }

        let mut composite = vec![0.0; n_users * f];
        for u in 0..n_users {
            composite[u * f..(u + 1) * f]
                .copy_from_slice(&params.composite_user_vector(train, u));
        }

        Ok(SvdPpModel {
            config: config.clone(),
            train: Arc::clone(train),
            params,
            composite,
        })
    }

    /// Rebuilds a model from persisted parameters; used by the loader.
    pub(super) fn from_params(
        train: &Arc<Dataset>,
        config: ModelConfig,
        params: SvdPpParams,
    ) -> Self {
        let f = params.factors;
        let n_users = train.n_users();
        let mut composite = vec![0.0; n_users * f];
        for u in 0..n_users {
            composite[u * f..(u + 1) * f]
                .copy_from_slice(&params.composite_user_vector(train, u));
        }
        SvdPpModel {
            config,
            train: Arc::clone(train),
            params,
            composite,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn train(&self) -> &Arc<Dataset> {
        &self.train
    }

    pub fn params(&self) -> &SvdPpParams {
        &self.params
    }

    pub(super) fn score_idx(&self, u: usize, i: usize) -> f64 {
        let f = self.params.factors;
        self.params
            .predict_with_composite(&self.composite[u * f..(u + 1) * f], u, i)
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
