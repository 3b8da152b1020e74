//! Experiment configuration: a flat, line-oriented `key = value` file with
//! one section header per algorithm.
//!
//! # Grammar
//!
//! ```text
//! file        := line*
//! line        := blank | comment | assignment | section
//! comment     := '#' ...
//! section     := '[' algorithm ']'          e.g. [user_knn]
//! assignment  := key '=' value-list
//! value-list  := value (',' value)*        (lists are only meaningful
//!                                           inside algorithm sections)
//! ```
//!
//! Assignments before the first section header configure the experiment;
//! assignments inside a section configure that algorithm's hyperparameter
//! grid. A key with a comma-separated list contributes one grid dimension,
//! and the section's grid is the cartesian product of its dimensions in
//! file order. A config file plus a master seed fully determines every
//! output byte of a run.

use std::io::BufRead;
use std::path::PathBuf;

use recal_core::metrics::LogBase;
use recal_core::recommenders::{Algorithm, ModelConfig, ModelError};
use recal_core::BinMode;

use crate::CliError;

/// Grid dimensions collected while parsing one algorithm section:
/// `(key, comma-separated values)` in file order.
type SectionDims = Vec<(String, Vec<String>)>;

/// Which dataset the item means for the inconsistency measure come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeansScope {
    /// Means over the train split only.
    #[default]
    Train,
    /// Means over the full (train + test) data.
    Full,
}

/// One algorithm entry: the hyperparameter grid searched for it.
#[derive(Debug, Clone)]
pub struct AlgorithmSection {
    pub algorithm: Algorithm,
    pub grid: Vec<ModelConfig>,
    /// Whether the section pinned `rng_seed` itself. When false, the
    /// pipeline derives one from the master seed.
    pub sets_rng_seed: bool,
}

/// Everything a run needs; re-running the same config and inputs reproduces
/// the CSV outputs bit for bit.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub ratings_path: PathBuf,
    pub movies_path: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub top_n: usize,
    pub alpha: f64,
    pub log_base: LogBase,
    pub num_bins: usize,
    pub bin_mode: BinMode,
    /// Minimum test rating for an item to count as a precision hit;
    /// `None` counts every test item.
    pub relevance_threshold: Option<f64>,
    pub means_scope: MeansScope,
    pub exclude_own_rating: bool,
    pub algorithms: Vec<AlgorithmSection>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            ratings_path: PathBuf::new(),
            movies_path: PathBuf::new(),
            out_dir: PathBuf::from("run"),
            seed: 42,
            train_fraction: 0.8,
            validation_fraction: 0.1,
            top_n: 10,
            alpha: 0.01,
            log_base: LogBase::Natural,
            num_bins: 20,
            bin_mode: BinMode::EqualWidth,
            relevance_threshold: None,
            means_scope: MeansScope::Train,
            exclude_own_rating: false,
            algorithms: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    /// Parses a config file. See the module docs for the grammar.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self, CliError> {
        let mut config = ExperimentConfig::default();
        let mut current_section: Option<(Algorithm, SectionDims)> = None;
        let mut saw = SawFlags::default();

        let finish_section =
            |section: Option<(Algorithm, SectionDims)>,
             config: &mut ExperimentConfig|
             -> Result<(), CliError> {
                if let Some((algorithm, dimensions)) = section {
                    let grid = expand_grid(algorithm, &dimensions)?;
                    let sets_rng_seed = dimensions.iter().any(|(key, _)| key == "rng_seed");
                    config.algorithms.push(AlgorithmSection {
                        algorithm,
                        grid,
                        sets_rng_seed,
                    });
                }
                Ok(())
            };

        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(CliError::from)?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    CliError::Config(format!("line {line_no}: unterminated section header"))
                })?;
                let algorithm: Algorithm = name.trim().parse().map_err(|e: ModelError| {
                    CliError::Config(format!("line {line_no}: {e}"))
                })?;
                if config
                    .algorithms
                    .iter()
                    .any(|s| s.algorithm == algorithm)
                    || matches!(&current_section, Some((a, _)) if *a == algorithm)
                {
                    return Err(CliError::Config(format!(
                        "line {line_no}: duplicate section [{algorithm}]"
                    )));
                }
                finish_section(current_section.take(), &mut config)?;
                current_section = Some((algorithm, Vec::new()));
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {line_no}: expected `key = value`"))
            })?;
            let key = key.trim();
            let value = value.trim();
            match &mut current_section {
                Some((_, dimensions)) => {
                    let values: Vec<String> = value
                        .split(',')
                        .map(|v| v.trim().to_owned())
                        .filter(|v| !v.is_empty())
                        .collect();
                    if values.is_empty() {
                        return Err(CliError::Config(format!(
                            "line {line_no}: empty value list for {key}"
                        )));
                    }
                    dimensions.push((key.to_owned(), values));
                }
                None => {
                    config
                        .set_global(key, value, &mut saw)
                        .map_err(|e| CliError::Config(format!("line {line_no}: {e}")))?;
                }
            }
        }
        finish_section(current_section.take(), &mut config)?;

        if !saw.ratings {
            return Err(CliError::Config("config does not set `ratings`".into()));
        }
        if !saw.movies {
            return Err(CliError::Config("config does not set `movies`".into()));
        }
        if config.algorithms.is_empty() {
            return Err(CliError::Config(
                "config names no algorithm sections".into(),
            ));
        }
        config.validate()?;
        Ok(config)
    }

    fn set_global(&mut self, key: &str, value: &str, saw: &mut SawFlags) -> Result<(), String> {
        let bad = |what: &str| format!("invalid {what} value {value:?}");
        match key {
            "ratings" => {
                self.ratings_path = PathBuf::from(value);
                saw.ratings = true;
            }
            "movies" => {
                self.movies_path = PathBuf::from(value);
                saw.movies = true;
            }
            "out" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "train_fraction" => {
                self.train_fraction = value.parse().map_err(|_| bad("train_fraction"))?
            }
            "validation_fraction" => {
                self.validation_fraction =
                    value.parse().map_err(|_| bad("validation_fraction"))?
            }
            "top_n" => self.top_n = value.parse().map_err(|_| bad("top_n"))?,
            "alpha" => self.alpha = value.parse().map_err(|_| bad("alpha"))?,
            "log_base" => {
                self.log_base = match value {
                    "natural" => LogBase::Natural,
                    "base2" => LogBase::Base2,
                    _ => return Err(bad("log_base (expected natural or base2)")),
                }
            }
            "num_bins" => self.num_bins = value.parse().map_err(|_| bad("num_bins"))?,
            "bin_mode" => {
                self.bin_mode = match value {
                    "equal_width" => BinMode::EqualWidth,
                    "quantile" => BinMode::Quantile,
                    _ => return Err(bad("bin_mode (expected equal_width or quantile)")),
                }
            }
            "relevance_threshold" => {
                self.relevance_threshold =
                    Some(value.parse().map_err(|_| bad("relevance_threshold"))?)
            }
            "inconsistency_means" => {
                self.means_scope = match value {
                    "train" => MeansScope::Train,
                    "full" => MeansScope::Full,
                    _ => return Err(bad("inconsistency_means (expected train or full)")),
                }
            }
            "exclude_own_rating" => {
                self.exclude_own_rating =
                    value.parse().map_err(|_| bad("exclude_own_rating"))?
            }
            other => return Err(format!("unknown experiment key {other:?}")),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), CliError> {
        let check = |ok: bool, message: &str| {
            if ok {
                Ok(())
            } else {
                Err(CliError::Config(message.to_owned()))
            }
        };
        check(
            self.train_fraction > 0.0 && self.train_fraction < 1.0,
            "train_fraction must lie strictly between 0 and 1",
        )?;
        check(
            self.validation_fraction > 0.0 && self.validation_fraction < 1.0,
            "validation_fraction must lie strictly between 0 and 1",
        )?;
        check(self.top_n >= 1, "top_n must be >= 1")?;
        check(
            self.alpha > 0.0 && self.alpha < 1.0,
            "alpha must lie strictly between 0 and 1",
        )?;
        check(self.num_bins >= 2, "num_bins must be >= 2")?;
        Ok(())
    }
}

#[derive(Default)]
struct SawFlags {
    ratings: bool,
    movies: bool,
}

/// Cartesian product of the section's dimensions, in file order, applied on
/// top of the algorithm's defaults.
fn expand_grid(
    algorithm: Algorithm,
    dimensions: &SectionDims,
) -> Result<Vec<ModelConfig>, CliError> {
    let mut grid = vec![ModelConfig::new(algorithm)];
    for (key, values) in dimensions {
        let mut next = Vec::with_capacity(grid.len() * values.len());
        for config in &grid {
            for value in values {
                let mut expanded = config.clone();
                expanded
                    .apply(key, value)
                    .map_err(|e| CliError::Config(format!("[{algorithm}] {e}")))?;
                next.push(expanded);
            }
        }
        grid = next;
    }
    for config in &grid {
        config
            .validate()
            .map_err(|e| CliError::Config(format!("[{algorithm}] {e}")))?;
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use recal_core::recommenders::Similarity;
    use std::io::Cursor;

    const MINIMAL: &str = "\
ratings = data/ratings.dat
movies = data/movies.dat

[user_knn]
k = 10, 30
similarity = cosine, pearson
";

    #[test]
    fn parses_minimal_config_with_defaults() {
        let config = ExperimentConfig::parse(Cursor::new(MINIMAL)).unwrap();
        assert_eq!(config.seed, 42);
        assert_eq!(config.top_n, 10);
        assert_eq!(config.alpha, 0.01);
        assert_eq!(config.num_bins, 20);
        assert_eq!(config.train_fraction, 0.8);
        assert_eq!(config.bin_mode, BinMode::EqualWidth);
        assert_eq!(config.algorithms.len(), 1);
        let grid = &config.algorithms[0].grid;
        assert_eq!(grid.len(), 4);
        assert_eq!(grid[0].k, 10);
        assert_eq!(grid[0].similarity, Similarity::Cosine);
        assert_eq!(grid[1].similarity, Similarity::Pearson);
        assert_eq!(grid[3].k, 30);
    }

    #[test]
    fn rejects_missing_inputs_and_sections() {
        assert!(ExperimentConfig::parse(Cursor::new("movies = m\n[user_knn]\nk = 5\n")).is_err());
        assert!(ExperimentConfig::parse(Cursor::new("ratings = r\nmovies = m\n")).is_err());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let bad_key = "ratings = r\nmovies = m\nwat = 1\n[user_knn]\nk = 5\n";
        assert!(ExperimentConfig::parse(Cursor::new(bad_key)).is_err());
        let bad_value = "ratings = r\nmovies = m\nalpha = nope\n[user_knn]\nk = 5\n";
        assert!(ExperimentConfig::parse(Cursor::new(bad_value)).is_err());
        let bad_alpha = "ratings = r\nmovies = m\nalpha = 1.5\n[user_knn]\nk = 5\n";
        assert!(ExperimentConfig::parse(Cursor::new(bad_alpha)).is_err());
    }

    #[test]
    fn rejects_duplicate_sections() {
        let text = "ratings = r\nmovies = m\n[user_knn]\nk = 5\n[user_knn]\nk = 10\n";
        assert!(ExperimentConfig::parse(Cursor::new(text)).is_err());
    }

    #[test]
    fn grid_expansion_is_cartesian_in_file_order() {
        let text = "\
ratings = r
movies = m

[svdpp]
factors = 4, 8
learning_rate = 0.005, 0.01
epochs = 3
";
        let config = ExperimentConfig::parse(Cursor::new(text)).unwrap();
        let grid = &config.algorithms[0].grid;
        assert_eq!(grid.len(), 4);
        assert_eq!((grid[0].factors, grid[0].learning_rate), (4, 0.005));
        assert_eq!((grid[1].factors, grid[1].learning_rate), (4, 0.01));
        assert_eq!((grid[2].factors, grid[2].learning_rate), (8, 0.005));
        assert_eq!((grid[3].factors, grid[3].learning_rate), (8, 0.01));
        assert!(grid.iter().all(|c| c.epochs == 3));
    }
}
