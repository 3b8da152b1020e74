//! Per-user measurement core: profile inconsistency, genre distributions,
//! alpha-smoothing and KL miscalibration.
//!
//! Inconsistency is the mean absolute deviation of a user's ratings from the
//! corresponding item means; it is high for users who disagree with the
//! crowd. Miscalibration is the KL divergence between the genre distribution
//! of a user's profile (`p`) and the smoothed genre distribution of their
//! recommendation list (`q~`); zero means perfectly calibrated
//! recommendations.

use std::collections::BTreeMap;
use std::io::{self, Write};

use thiserror::Error;

use crate::data::{ItemCatalog, ItemId};

/// Tolerance for "sums to one" checks on distributions.
pub const NORMALIZATION_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("profile is empty")]
    EmptyProfile,
    #[error("no mean available for item {0}")]
    MissingMean(ItemId),
    #[error("item {0} is not in the catalog")]
    UnknownItem(ItemId),
    #[error("distributions are over different genre universes ({0} vs {1} genres)")]
    UniverseMismatch(usize, usize),
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),
    #[error("distribution is not normalized (sums to {0})")]
    NotNormalized(f64),
}

/// Logarithm base for KL divergence. Correlations downstream are invariant
/// to this choice; it only scales the reported values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Natural,
    Base2,
}

impl LogBase {
    fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Base2 => x.log2(),
        }
    }
}

/// Settings for the miscalibration computation.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationConfig {
    /// Smoothing weight pulled from the profile distribution.
    pub alpha: f64,
    pub log_base: LogBase,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            alpha: 0.01,
            log_base: LogBase::Natural,
        }
    }
}

/// A probability vector over a fixed genre universe. `mass[g]` is the weight
/// of the genre with dense id `g`; the vector sums to one unless the source
/// item list was empty, in which case it is explicitly empty (all zeros).
#[derive(Debug, Clone, PartialEq)]
pub struct GenreDistribution {
    mass: Vec<f64>,
}

impl GenreDistribution {
    pub fn from_mass(mass: Vec<f64>) -> Self {
        GenreDistribution { mass }
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn n_genres(&self) -> usize {
        self.mass.len()
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// True when built from an empty item list.
    pub fn is_empty(&self) -> bool {
        self.mass.iter().all(|&m| m == 0.0)
    }

    fn check_same_universe(&self, other: &Self) -> Result<(), MetricError> {
        if self.mass.len() != other.mass.len() {
            return Err(MetricError::UniverseMismatch(
                self.mass.len(),
                other.mass.len(),
            ));
        }
        Ok(())
    }
}

/// Mean absolute deviation of a user's ratings from the item means:
/// `sum_i |r_ui - mean_i| / N_u`. Result lies in `[0, 4]` for ratings and
/// means on the 1-5 scale.
pub fn inconsistency(
    profile: &[(ItemId, f64)],
    means: &BTreeMap<ItemId, f64>,
) -> Result<f64, MetricError> {
    if profile.is_empty() {
        return Err(MetricError::EmptyProfile);
    }
    let mut total = 0.0;
    for &(item, rating) in profile {
        let mean = means.get(&item).ok_or(MetricError::MissingMean(item))?;
        total += (rating - mean).abs();
    }
    Ok(total / profile.len() as f64)
}

/// Variant of [`inconsistency`] that excludes the user's own rating from
/// each item mean, using per-item `(sum, count)` statistics. Items with no
/// other rater carry no peer information and contribute zero deviation
/// while still counting toward `N_u`.
pub fn inconsistency_excluding_self(
    profile: &[(ItemId, f64)],
    stats: &BTreeMap<ItemId, (f64, usize)>,
) -> Result<f64, MetricError> {
    if profile.is_empty() {
        return Err(MetricError::EmptyProfile);
    }
    let mut total = 0.0;
    for &(item, rating) in profile {
        let &(sum, count) = stats.get(&item).ok_or(MetricError::MissingMean(item))?;
        if count >= 2 {
            let mean = (sum - rating) / (count - 1) as f64;
            total += (rating - mean).abs();
        }
    }
    Ok(total / profile.len() as f64)
}

/// Genre distribution induced by a list of items: each item contributes
/// total weight one, split equally among its genres, and the result is
/// normalized by the item count. Applies identically to train profiles and
/// recommendation lists (no rank weighting).
pub fn genre_distribution(
    items: &[ItemId],
    catalog: &ItemCatalog,
) -> Result<GenreDistribution, MetricError> {
    let mut mass = vec![0.0; catalog.n_genres()];
    for &item in items {
        let genres = catalog.genres_of(item).ok_or(MetricError::UnknownItem(item))?;
        let share = 1.0 / genres.len() as f64;
        for &g in genres {
            mass[g] += share;
        }
    }
    if !items.is_empty() {
        let n = items.len() as f64;
        for m in &mut mass {
            *m /= n;
        }
    }
    Ok(GenreDistribution::from_mass(mass))
}

/// Mixes the profile distribution into the recommendation distribution:
/// `q~_c = (1 - alpha) * q_c + alpha * p_c`. This keeps every genre with
/// positive profile mass strictly positive in `q~`, so the KL divergence
/// below is always finite.
pub fn smooth_distribution(
    q: &GenreDistribution,
    p: &GenreDistribution,
    alpha: f64,
) -> Result<GenreDistribution, MetricError> {
    q.check_same_universe(p)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MetricError::InvalidAlpha(alpha));
    }
    // Evaluated as q + alpha (p - q), which is the same convex combination
    // but leaves q = p an exact fixed point in floating point.
    let mass = q
        .mass
        .iter()
        .zip(&p.mass)
        .map(|(&qc, &pc)| qc + alpha * (pc - qc))
        .collect();
    Ok(GenreDistribution::from_mass(mass))
}

/// Plain KL divergence `sum_c p_c log(p_c / q_c)` with the `0 log 0 = 0`
/// convention. The caller is responsible for `q_c > 0` wherever `p_c > 0`.
pub fn kl_divergence(p: &GenreDistribution, q: &GenreDistribution, base: LogBase) -> f64 {
    p.mass
        .iter()
        .zip(&q.mass)
        .filter(|(&pc, _)| pc > 0.0)
        .map(|(&pc, &qc)| pc * base.log(pc / qc))
        .sum()
}

/// Miscalibration of a recommendation list against a profile: KL divergence
/// between `p` and the alpha-smoothed `q`. Zero means the list reproduces
/// the profile's genre proportions exactly.
pub fn kl_miscalibration(
    p: &GenreDistribution,
    q: &GenreDistribution,
    config: &CalibrationConfig,
) -> Result<f64, MetricError> {
    p.check_same_universe(q)?;
    let total = p.total();
    if (total - 1.0).abs() > NORMALIZATION_EPS {
        return Err(MetricError::NotNormalized(total));
    }
    let smoothed = smooth_distribution(q, p, config.alpha)?;
    Ok(kl_divergence(p, &smoothed, config.log_base))
}

/// One row of the per-user metric dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserMetricRow {
    pub user: crate::data::UserId,
    pub profile_size: usize,
    pub inconsistency: f64,
    pub miscalibration: f64,
}

/// Writes the per-user dump CSV: `user_id,profile_size,inconsistency,
/// miscalibration`, floats at fixed 6-decimal precision.
pub fn write_user_metrics_csv<W: Write>(rows: &[UserMetricRow], mut writer: W) -> io::Result<()> {
    writeln!(writer, "user_id,profile_size,inconsistency,miscalibration")?;
    for row in rows {
        writeln!(
            writer,
            "{},{},{:.6},{:.6}",
            row.user, row.profile_size, row.inconsistency, row.miscalibration
        )?;
    }
    Ok(())
}
