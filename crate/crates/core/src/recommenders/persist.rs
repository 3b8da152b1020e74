//! Versioned text dumps of fitted models.
//!
//! The format is line oriented and self-describing: a magic/version header,
//! the algorithm tag, the fingerprint of the training data, the
//! hyperparameters, and (for the factorization models) the parameter
//! matrices. Floats are written with Rust's shortest round-trip formatting,
//! so a load reproduces bit-identical scores.
//!
//! Neighborhood models are fully determined by their hyperparameters and
//! the training data, so their dumps carry no matrices; the loader rebuilds
//! the similarity structures deterministically.

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::data::Dataset;

use super::{
    Algorithm, KnnModel, ListRankModel, ModelConfig, ModelError, SvdPpModel, SvdPpParams,
    TrainedModel,
};

const MAGIC: &str = "recal-model v1";

/// Writes a model dump. See the module docs for the format.
pub fn save_model<W: Write>(model: &TrainedModel, mut writer: W) -> Result<(), ModelError> {
    let config = model.config();
    let train = model.train();
    writeln!(writer, "{MAGIC}")?;
    writeln!(writer, "algorithm {}", model.algorithm())?;
    writeln!(writer, "fingerprint {:016x}", train.fingerprint())?;
    writeln!(writer, "n_users {}", train.n_users())?;
    writeln!(writer, "n_items {}", train.n_items())?;
    writeln!(writer, "k {}", config.k)?;
    writeln!(writer, "similarity {}", config.similarity)?;
    writeln!(writer, "factors {}", config.factors)?;
    writeln!(writer, "learning_rate {}", config.learning_rate)?;
    writeln!(writer, "regularization {}", config.regularization)?;
    writeln!(writer, "epochs {}", config.epochs)?;
    writeln!(writer, "rng_seed {}", config.rng_seed)?;

    match model {
        TrainedModel::UserKnn(_) | TrainedModel::ItemKnn(_) => {}
        TrainedModel::SvdPlusPlus(m) => {
            let p = m.params();
            writeln!(writer, "global_mean {}", p.global_mean)?;
            write_vector(&mut writer, "user_bias", &p.user_bias)?;
            write_vector(&mut writer, "item_bias", &p.item_bias)?;
            write_vector(&mut writer, "user_factors", &p.user_factors)?;
            write_vector(&mut writer, "item_factors", &p.item_factors)?;
            write_vector(&mut writer, "implicit_factors", &p.implicit_factors)?;
        }
        TrainedModel::ListRankMf(m) => {
            let (u, v) = m.factors();
            write_vector(&mut writer, "user_factors", u)?;
            write_vector(&mut writer, "item_factors", v)?;
        }
    }
    Ok(())
}

/// Reads a dump produced by [`save_model`]. The training dataset must be the
/// one the model was fitted on; its fingerprint is checked.
pub fn load_model<R: BufRead>(
    reader: R,
    train: &Arc<Dataset>,
) -> Result<TrainedModel, ModelError> {
    let mut lines = reader.lines();
    let header = next_line(&mut lines)?;
    if header != MAGIC {
        return Err(ModelError::PersistFormat(format!(
            "bad header {header:?}, expected {MAGIC:?}"
        )));
    }

    let algorithm: Algorithm = field(&next_line(&mut lines)?, "algorithm")?.parse()?;
    let fingerprint = u64::from_str_radix(&field(&next_line(&mut lines)?, "fingerprint")?, 16)
        .map_err(|_| ModelError::PersistFormat("bad fingerprint".into()))?;
    let expected = train.fingerprint();
    if fingerprint != expected {
        return Err(ModelError::FingerprintMismatch {
            expected: fingerprint,
            actual: expected,
        });
    }
    let n_users: usize = parse_scalar(&field(&next_line(&mut lines)?, "n_users")?)?;
    let n_items: usize = parse_scalar(&field(&next_line(&mut lines)?, "n_items")?)?;
    if n_users != train.n_users() || n_items != train.n_items() {
        return Err(ModelError::PersistFormat(format!(
            "dimension mismatch: dump says {n_users} users x {n_items} items, dataset has {} x {}",
            train.n_users(),
            train.n_items()
        )));
    }

    let mut config = ModelConfig::new(algorithm);
    config.k = parse_scalar(&field(&next_line(&mut lines)?, "k")?)?;
    config.similarity = field(&next_line(&mut lines)?, "similarity")?.parse()?;
    config.factors = parse_scalar(&field(&next_line(&mut lines)?, "factors")?)?;
    config.learning_rate = parse_scalar(&field(&next_line(&mut lines)?, "learning_rate")?)?;
    config.regularization = parse_scalar(&field(&next_line(&mut lines)?, "regularization")?)?;
    config.epochs = parse_scalar(&field(&next_line(&mut lines)?, "epochs")?)?;
    config.rng_seed = parse_scalar(&field(&next_line(&mut lines)?, "rng_seed")?)?;
    config.validate()?;

    match algorithm {
        Algorithm::UserKnn => Ok(TrainedModel::UserKnn(KnnModel::fit_user_based(
            train, &config,
        )?)),
        Algorithm::ItemKnn => Ok(TrainedModel::ItemKnn(KnnModel::fit_item_based(
            train, &config,
        )?)),
        Algorithm::SvdPlusPlus => {
            let global_mean = parse_scalar(&field(&next_line(&mut lines)?, "global_mean")?)?;
            let mut params = SvdPpParams::zeros(n_users, n_items, config.factors, global_mean);
            params.user_bias = read_vector(&mut lines, "user_bias", n_users)?;
            params.item_bias = read_vector(&mut lines, "item_bias", n_items)?;
            params.user_factors =
                read_vector(&mut lines, "user_factors", n_users * config.factors)?;
            params.item_factors =
                read_vector(&mut lines, "item_factors", n_items * config.factors)?;
            params.implicit_factors =
                read_vector(&mut lines, "implicit_factors", n_items * config.factors)?;
            Ok(TrainedModel::SvdPlusPlus(SvdPpModel::from_params(
                train, config, params,
            )))
        }
        Algorithm::ListRankMf => {
            let user_factors = read_vector(&mut lines, "user_factors", n_users * config.factors)?;
            let item_factors = read_vector(&mut lines, "item_factors", n_items * config.factors)?;
            Ok(TrainedModel::ListRankMf(ListRankModel::from_params(
                train,
                config,
                user_factors,
                item_factors,
            )))
        }
    }
}

fn write_vector<W: Write>(writer: &mut W, name: &str, values: &[f64]) -> Result<(), ModelError> {
    writeln!(writer, "{name} {}", values.len())?;
    for chunk in values.chunks(8) {
        let mut line = String::new();
        for (pos, v) in chunk.iter().enumerate() {
            if pos > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{v}"));
        }
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

fn read_vector<B: BufRead>(
    lines: &mut std::io::Lines<B>,
    name: &str,
    expected_len: usize,
) -> Result<Vec<f64>, ModelError> {
    let header = next_line(lines)?;
    let len: usize = parse_scalar(&field(&header, name)?)?;
    if len != expected_len {
        return Err(ModelError::PersistFormat(format!(
            "{name}: expected {expected_len} values, dump declares {len}"
        )));
    }
    let mut values = Vec::with_capacity(len);
    while values.len() < len {
        let line = next_line(lines)?;
        for token in line.split_ascii_whitespace() {
            let v: f64 = token
                .parse()
                .map_err(|_| ModelError::PersistFormat(format!("{name}: bad float {token:?}")))?;
            values.push(v);
        }
    }
    if values.len() != len {
        return Err(ModelError::PersistFormat(format!(
            "{name}: expected {len} values, found {}",
            values.len()
        )));
    }
    Ok(values)
}

fn next_line<B: BufRead>(lines: &mut std::io::Lines<B>) -> Result<String, ModelError> {
    match lines.next() {
        Some(line) => Ok(line?),
        None => Err(ModelError::PersistFormat("unexpected end of dump".into())),
    }
}

fn field(line: &str, name: &str) -> Result<String, ModelError> {
    match line.split_once(' ') {
        Some((key, value)) if key == name => Ok(value.to_owned()),
        _ => Err(ModelError::PersistFormat(format!(
            "expected `{name} <value>`, found {line:?}"
        ))),
    }
}

fn parse_scalar<T: std::str::FromStr>(value: &str) -> Result<T, ModelError> {
    value
        .parse()
        .map_err(|_| ModelError::PersistFormat(format!("bad value {value:?}")))
}
