//! Group-level analysis: sort users by profile inconsistency, bin them,
//! average each bin, and correlate the group means of inconsistency and
//! miscalibration.

use std::io::{self, Write};

use thiserror::Error;

use crate::data::UserId;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no user metrics to analyse")]
    EmptyMetrics,
    #[error("need at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("need at least 2 populated groups, got {0}")]
    TooFewGroups(usize),
    #[error("sequences have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 paired observations, got {0}")]
    TooFewObservations(usize),
    #[error("correlation is undefined for a constant sequence")]
    ConstantSequence,
}

/// The two per-user measurements the analysis runs on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserMetrics {
    pub user: UserId,
    pub inconsistency: f64,
    pub miscalibration: f64,
}

/// One inconsistency bin: its range, the averages over its members, and the
/// member count. Empty bins are retained with `user_count == 0` and zeroed
/// averages; they are reported but excluded from correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupStats {
    pub group_index: usize,
    pub range_low: f64,
    pub range_high: f64,
    pub avg_inconsistency: f64,
    pub avg_miscalibration: f64,
    pub user_count: usize,
}

/// How bin boundaries are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BinMode {
    /// Equal-width intervals over `[min, max]` of the inconsistency values.
    #[default]
    EqualWidth,
    /// Near-equal-count groups of the users sorted by inconsistency.
    Quantile,
}

/// Bins users into `num_bins` equal-width inconsistency intervals.
///
/// A value exactly on a boundary goes to the higher bin, except the maximum,
/// which stays in the last bin. When all values are identical the range is
/// degenerate and every user lands in bin 0.
pub fn bin_users(metrics: &[UserMetrics], num_bins: usize) -> Result<Vec<GroupStats>, AnalysisError> {
    if metrics.is_empty() {
        return Err(AnalysisError::EmptyMetrics);
    }
    if num_bins < 2 {
        return Err(AnalysisError::TooFewBins(num_bins));
    }
    let min = metrics.iter().map(|m| m.inconsistency).fold(f64::INFINITY, f64::min);
    let max = metrics
        .iter()
        .map(|m| m.inconsistency)
        .fold(f64::NEG_INFINITY, f64::max);
    let width = (max - min) / num_bins as f64;

    let mut sums = vec![(0.0, 0.0, 0usize); num_bins];
    for m in metrics {
        let idx = if width > 0.0 {
            (((m.inconsistency - min) / width) as usize).min(num_bins - 1)
        } else {
            0
        };
        sums[idx].0 += m.inconsistency;
        sums[idx].1 += m.miscalibration;
        sums[idx].2 += 1;
    }

    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(i, (inc, mis, count))| GroupStats {
            group_index: i,
            range_low: min + i as f64 * width,
            range_high: min + (i + 1) as f64 * width,
            avg_inconsistency: if count > 0 { inc / count as f64 } else { 0.0 },
            avg_miscalibration: if count > 0 { mis / count as f64 } else { 0.0 },
            user_count: count,
        })
        .collect())
}

/// Quantile variant of [`bin_users`]: users are sorted by inconsistency
/// (ties by user id) and chunked into near-equal-count groups. Group ranges
/// are the actual min/max inconsistency inside each chunk.
pub fn bin_users_quantile(
    metrics: &[UserMetrics],
    num_bins: usize,
) -> Result<Vec<GroupStats>, AnalysisError> {
    if metrics.is_empty() {
        return Err(AnalysisError::EmptyMetrics);
    }
    if num_bins < 2 {
        return Err(AnalysisError::TooFewBins(num_bins));
    }
    let mut sorted: Vec<&UserMetrics> = metrics.iter().collect();
    sorted.sort_by(|a, b| {
        a.inconsistency
            .total_cmp(&b.inconsistency)
            .then(a.user.cmp(&b.user))
    });

    let n = sorted.len();
    let base = n / num_bins;
    let extra = n % num_bins;
    let mut groups = Vec::with_capacity(num_bins);
    let mut start = 0;
    for i in 0..num_bins {
        let len = base + usize::from(i < extra);
        let chunk = &sorted[start..start + len];
        start += len;
        if chunk.is_empty() {
            groups.push(GroupStats {
                group_index: i,
                range_low: 0.0,
                range_high: 0.0,
                avg_inconsistency: 0.0,
                avg_miscalibration: 0.0,
                user_count: 0,
            });
            continue;
        }
        let inc: f64 = chunk.iter().map(|m| m.inconsistency).sum();
        let mis: f64 = chunk.iter().map(|m| m.miscalibration).sum();
        groups.push(GroupStats {
            group_index: i,
            range_low: chunk[0].inconsistency,
            range_high: chunk[chunk.len() - 1].inconsistency,
            avg_inconsistency: inc / chunk.len() as f64,
            avg_miscalibration: mis / chunk.len() as f64,
            user_count: chunk.len(),
        });
    }
    Ok(groups)
}

pub fn bin_users_with_mode(
    metrics: &[UserMetrics],
    num_bins: usize,
    mode: BinMode,
) -> Result<Vec<GroupStats>, AnalysisError> {
    match mode {
        BinMode::EqualWidth => bin_users(metrics, num_bins),
        BinMode::Quantile => bin_users_quantile(metrics, num_bins),
    }
}

/// Sample Pearson correlation coefficient of two paired sequences.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, AnalysisError> {
    if xs.len() != ys.len() {
        return Err(AnalysisError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(AnalysisError::TooFewObservations(xs.len()));
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(AnalysisError::ConstantSequence);
    }
    Ok((cov / (var_x.sqrt() * var_y.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation of `(avg_inconsistency, avg_miscalibration)` over the
/// populated groups.
pub fn correlate_groups(groups: &[GroupStats]) -> Result<f64, AnalysisError> {
    let populated: Vec<&GroupStats> = groups.iter().filter(|g| g.user_count > 0).collect();
    if populated.len() < 2 {
        return Err(AnalysisError::TooFewGroups(populated.len()));
    }
    let xs: Vec<f64> = populated.iter().map(|g| g.avg_inconsistency).collect();
    let ys: Vec<f64> = populated.iter().map(|g| g.avg_miscalibration).collect();
    pearson(&xs, &ys)
}

/// Writes one `groups_<algorithm>.csv`: `group_index,range_low,range_high,
/// avg_inconsistency,avg_miscalibration,user_count`.
pub fn write_groups_csv<W: Write>(groups: &[GroupStats], mut writer: W) -> io::Result<()> {
    writeln!(
        writer,
        "group_index,range_low,range_high,avg_inconsistency,avg_miscalibration,user_count"
    )?;
    for g in groups {
        writeln!(
            writer,
            "{},{:.6},{:.6},{:.6},{:.6},{}",
            g.group_index, g.range_low, g.range_high, g.avg_inconsistency, g.avg_miscalibration,
            g.user_count
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metric(user: u32, inc: f64, mis: f64) -> UserMetrics {
        UserMetrics {
            user: UserId(user),
            inconsistency: inc,
            miscalibration: mis,
        }
    }

    #[test]
    fn bins_hand_case() {
        // Inconsistencies {0.1, 0.2, 0.9, 1.0} with 2 bins over [0.1, 1.0]:
        // width 0.45, bin 0 holds {0.1, 0.2}, bin 1 holds {0.9, 1.0}.
        let metrics = vec![
            metric(1, 0.1, 1.0),
            metric(2, 0.2, 2.0),
            metric(3, 0.9, 3.0),
            metric(4, 1.0, 4.0),
        ];
        let groups = bin_users(&metrics, 2).unwrap();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].user_count, 2);
        assert_eq!(groups[1].user_count, 2);
        assert!((groups[0].range_high - 0.55).abs() < 1e-12);
        assert!((groups[0].avg_inconsistency - 0.15).abs() < 1e-12);
        assert!((groups[1].avg_miscalibration - 3.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_range_goes_to_first_bin() {
        let metrics = vec![metric(1, 0.5, 1.0), metric(2, 0.5, 2.0)];
        let groups = bin_users(&metrics, 4).unwrap();
        assert_eq!(groups[0].user_count, 2);
        assert!(groups[1..].iter().all(|g| g.user_count == 0));
    }

    #[test]
    fn evenly_spread_users_fill_bins() {
        let metrics = vec![
            metric(1, 0.0, 0.0),
            metric(2, 1.0, 1.0),
            metric(3, 2.0, 2.0),
            metric(4, 3.0, 3.0),
        ];
        let groups = bin_users(&metrics, 4).unwrap();
        assert!(groups.iter().all(|g| g.user_count == 1));
        // The overall max belongs to the last bin.
        assert_eq!(groups[3].avg_inconsistency, 3.0);
        // Range invariant: low <= avg <= high for populated bins.
        for g in &groups {
            assert!(g.range_low <= g.avg_inconsistency + 1e-12);
            assert!(g.avg_inconsistency <= g.range_high + 1e-12);
        }
    }

    #[test]
    fn binning_is_order_independent() {
        let mut metrics = vec![
            metric(1, 0.3, 1.0),
            metric(2, 0.7, 2.0),
            metric(3, 1.9, 0.5),
            metric(4, 1.1, 0.25),
            metric(5, 0.05, 3.0),
        ];
        let forward = bin_users(&metrics, 3).unwrap();
        metrics.reverse();
        let backward = bin_users(&metrics, 3).unwrap();
        assert_eq!(forward, backward);
        let total: usize = forward.iter().map(|g| g.user_count).sum();
        assert_eq!(total, 5);
    }

    #[test]
    fn binning_rejects_bad_inputs() {
        assert!(matches!(bin_users(&[], 2), Err(AnalysisError::EmptyMetrics)));
        let metrics = vec![metric(1, 0.0, 0.0)];
        assert!(matches!(
            bin_users(&metrics, 1),
            Err(AnalysisError::TooFewBins(1))
        ));
    }

    #[test]
    fn quantile_bins_have_near_equal_counts() {
        let metrics: Vec<UserMetrics> = (0..10)
            .map(|i| metric(i, f64::from(i) * 0.1, f64::from(i)))
            .collect();
        let groups = bin_users_quantile(&metrics, 3).unwrap();
        let counts: Vec<usize> = groups.iter().map(|g| g.user_count).collect();
        assert_eq!(counts, vec![4, 3, 3]);
        assert!(groups.windows(2).all(|w| w[0].range_low <= w[1].range_low));
    }

    #[test]
    fn pearson_exact_linear_cases() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[6.0, 4.0, 2.0]).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_hand_case() {
        // Deviations (-1.5, -0.5, 0.5, 1.5) and (-1.5, 0.5, -0.5, 1.5):
        // covariance sum 4.0 over sqrt(5) * sqrt(5) = 0.8.
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
    }

    #[test]
    fn pearson_rejects_degenerate_inputs() {
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(AnalysisError::ConstantSequence)
        ));
        assert!(matches!(
            pearson(&[1.0], &[2.0]),
            Err(AnalysisError::TooFewObservations(1))
        ));
        assert!(matches!(
            pearson(&[1.0, 2.0], &[2.0]),
            Err(AnalysisError::LengthMismatch(2, 1))
        ));
    }

    #[test]
    fn correlate_groups_filters_empty_bins() {
        let groups = vec![
            GroupStats {
                group_index: 0,
                range_low: 0.0,
                range_high: 1.0,
                avg_inconsistency: 0.5,
                avg_miscalibration: 1.0,
                user_count: 3,
            },
            GroupStats {
                group_index: 1,
                range_low: 1.0,
                range_high: 2.0,
                avg_inconsistency: 0.0,
                avg_miscalibration: 0.0,
                user_count: 0,
            },
            GroupStats {
                group_index: 2,
                range_low: 2.0,
                range_high: 3.0,
                avg_inconsistency: 2.5,
                avg_miscalibration: 2.0,
                user_count: 2,
            },
        ];
        // Two populated points define a line: correlation is exactly +-1.
        let r = correlate_groups(&groups).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert!(matches!(
            correlate_groups(&groups[..2]),
            Err(AnalysisError::TooFewGroups(1))
        ));
    }

    #[test]
    fn groups_csv_format() {
        let groups = vec![GroupStats {
            group_index: 0,
            range_low: 0.0,
            range_high: 0.5,
            avg_inconsistency: 0.25,
            avg_miscalibration: 1.5,
            user_count: 7,
        }];
        let mut buf = Vec::new();
        write_groups_csv(&groups, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.ends_with("0,0.000000,0.500000,0.250000,1.500000,7\n"));
    }
}
