//! Grid search over hyperparameter configurations, optimizing precision on
//! a held-out validation slice of the training data.

use std::io::BufRead;
use std::sync::Arc;

use crate::data::{split, Dataset};
use crate::rng::{derive_seed, Purpose};

use super::{evaluate_precision, fit, ModelConfig, ModelError};

/// Outcome for one grid entry.
#[derive(Debug, Clone)]
pub struct GridReportRow {
    pub config: ModelConfig,
    pub precision: f64,
    /// Users the precision was averaged over.
    pub n_users: usize,
}

/// Fits every config on an inner train split and evaluates precision@`eval_k`
/// on the held-out validation ratings. Returns the best config (ties go to
/// the earlier grid position) together with the full per-config report.
///
/// All configs must share one algorithm; a fit failure is reported with the
/// offending grid entry attached.
pub fn grid_search(
    train: &Arc<Dataset>,
    grid: &[ModelConfig],
    validation_fraction: f64,
    seed: u64,
    eval_k: usize,
) -> Result<(ModelConfig, Vec<GridReportRow>), ModelError> {
    let first = grid.first().ok_or(ModelError::EmptyGrid)?;
    for config in grid {
        if config.algorithm != first.algorithm {
            return Err(ModelError::MixedAlgorithms(
                first.algorithm,
                config.algorithm,
            ));
        }
        config.validate()?;
    }

    let inner_seed = derive_seed(seed, Purpose::GridValidation, 0);
    let pair = split(train, 1.0 - validation_fraction, inner_seed)?;
    let validation = pair.test.ok_or(ModelError::NoValidationData)?;
    let inner_train = Arc::new(pair.train);

    let mut report = Vec::with_capacity(grid.len());
    for (index, config) in grid.iter().enumerate() {
        let model = fit(&inner_train, config).map_err(|source| ModelError::GridFit {
            index,
            summary: config.summary(),
            source: Box::new(source),
        })?;
        let (precision, n_users) =
            evaluate_precision(&model, &validation, eval_k, None).unwrap_or((0.0, 0));
        report.push(GridReportRow {
            config: config.clone(),
            precision,
            n_users,
        });
    }

    let best = report
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.precision
                .total_cmp(&b.precision)
                .then(ib.cmp(ia)) // earlier grid position wins ties
        })
        .map(|(_, row)| row.config.clone())
        .expect("non-empty report");
    Ok((best, report))
}

/// Parses a grid file: blocks of `key = value` lines separated by blank
/// lines, one model configuration per block. Lines starting with `#` are
/// comments. Every block must name its `algorithm`.
pub fn parse_grid_file<R: BufRead>(reader: R) -> Result<Vec<ModelConfig>, ModelError> {
    let mut configs = Vec::new();
    let mut block: Vec<(usize, String, String)> = Vec::new();

    let mut flush =
        |block: &mut Vec<(usize, String, String)>| -> Result<(), ModelError> {
            if block.is_empty() {
                return Ok(());
            }
            let algo_line = block
                .iter()
                .find(|(_, key, _)| key == "algorithm")
                .ok_or_else(|| {
                    ModelError::InvalidConfig(format!(
                        "grid block starting at line {} has no algorithm",
                        block[0].0
                    ))
                })?;
            let mut config = ModelConfig::new(algo_line.2.parse()?);
            for (line, key, value) in block.drain(..) {
                config.apply(&key, &value).map_err(|e| {
                    ModelError::InvalidConfig(format!("line {line}: {e}"))
                })?;
            }
            config.validate()?;
            configs.push(config);
            Ok(())
        };

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            flush(&mut block)?;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            ModelError::InvalidConfig(format!("line {line_no}: expected `key = value`"))
        })?;
        block.push((line_no, key.trim().to_owned(), value.trim().to_owned()));
    }
    flush(&mut block)?;

    if configs.is_empty() {
        return Err(ModelError::EmptyGrid);
    }
    Ok(configs)
}
