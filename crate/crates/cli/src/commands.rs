//! The `split`, `run` and `report` commands.
//!
//! `run` executes the full experiment: per-user train/test split, grid
//! search per algorithm, top-N recommendation for every train user,
//! per-user inconsistency and miscalibration, group binning and the
//! group-level correlation. Data goes to CSV files in the output directory;
//! progress goes to standard error. Re-running a config against the same
//! inputs reproduces every CSV byte for byte (`run.log` carries wall-clock
//! timings and is exempt).

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use recal_core::analysis::{
    bin_users_with_mode, correlate_groups, pearson, write_groups_csv, UserMetrics,
};
use recal_core::data::{
    item_mean_stats, item_means, parse_items, parse_ratings, split, write_ratings_csv, Dataset,
    ItemCatalog,
};
use recal_core::metrics::{
    genre_distribution, inconsistency, inconsistency_excluding_self, kl_miscalibration,
    write_user_metrics_csv, CalibrationConfig, UserMetricRow,
};
use recal_core::recommenders::{
    fit, grid_search, precision_at_k, Algorithm, GridReportRow, RecommendationList,
};
use recal_core::rng::{derive_seed, Purpose};

use crate::config::{AlgorithmSection, ExperimentConfig, MeansScope};
use crate::CliError;

/// Counts reported by the `split` command.
#[derive(Debug, Clone, Copy)]
pub struct SplitReport {
    pub n_users: usize,
    pub n_items: usize,
    pub n_records: usize,
    pub train_records: usize,
    pub test_records: usize,
}

/// Result of one algorithm inside a run.
#[derive(Debug, Clone)]
pub struct AlgorithmRun {
    pub algorithm: Algorithm,
    pub result: Result<SummaryRow, String>,
}

/// One row of `summary.csv`.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub best_params: String,
    pub precision: f64,
    pub group_correlation: f64,
    pub user_correlation: f64,
    pub users_with_lists: usize,
}

/// Everything `run` produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub split: SplitReport,
    pub algorithms: Vec<AlgorithmRun>,
}

impl RunOutcome {
    pub fn failures(&self) -> Vec<(Algorithm, &str)> {
        self.algorithms
            .iter()
            .filter_map(|run| match &run.result {
                Ok(_) => None,
                Err(message) => Some((run.algorithm, message.as_str())),
            })
            .collect()
    }
}

fn open_input(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))
}

fn create_output(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// FNV-1a over a file's raw bytes; recorded in the manifest so a run can be
/// tied to its exact inputs.
fn file_checksum(path: &Path) -> Result<u64, CliError> {
    let mut reader = open_input(path)?;
    let mut hash = 0xcbf2_9ce4_8422_2325_u64;
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = reader
            .read(&mut buf)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        if n == 0 {
            break;
        }
        for &b in &buf[..n] {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    Ok(hash)
}

fn load_ratings(path: &Path) -> Result<Dataset, CliError> {
    parse_ratings(open_input(path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_catalog(path: &Path) -> Result<ItemCatalog, CliError> {
    parse_items(open_input(path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

struct PreparedSplit {
    original: Dataset,
    train: Arc<Dataset>,
    test: Dataset,
    report: SplitReport,
}

/// Parses the ratings, splits them, and persists `train.csv`, `test.csv`
/// and `manifest.txt` into the output directory.
fn prepare_split(config: &ExperimentConfig) -> Result<PreparedSplit, CliError> {
    let checksum = file_checksum(&config.ratings_path)?;
    let original = load_ratings(&config.ratings_path)?;
    eprintln!(
        "loaded {} ratings from {} users on {} items",
        original.n_records(),
        original.n_users(),
        original.n_items()
    );

    let pair = split(&original, config.train_fraction, config.seed)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let test = pair.test.ok_or_else(|| {
        CliError::Experiment(
            "split produced no test ratings (every user has a single rating)".into(),
        )
    })?;
    let report = SplitReport {
        n_users: original.n_users(),
        n_items: original.n_items(),
        n_records: original.n_records(),
        train_records: pair.train.n_records(),
        test_records: test.n_records(),
    };

    fs::create_dir_all(&config.out_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", config.out_dir.display())))?;
    let mut writer = create_output(&config.out_dir.join("train.csv"))?;
    write_ratings_csv(&pair.train, &mut writer)?;
    let mut writer = create_output(&config.out_dir.join("test.csv"))?;
    write_ratings_csv(&test, &mut writer)?;

    let mut manifest = create_output(&config.out_dir.join("manifest.txt"))?;
    writeln!(manifest, "recal-split v1")?;
    writeln!(manifest, "ratings_path {}", config.ratings_path.display())?;
    writeln!(manifest, "ratings_checksum {checksum:016x}")?;
    writeln!(manifest, "dataset_fingerprint {:016x}", original.fingerprint())?;
    writeln!(manifest, "seed {}", config.seed)?;
    writeln!(manifest, "train_fraction {}", config.train_fraction)?;
    writeln!(manifest, "n_users {}", report.n_users)?;
    writeln!(manifest, "n_items {}", report.n_items)?;
    writeln!(manifest, "n_records {}", report.n_records)?;
    writeln!(manifest, "train_records {}", report.train_records)?;
    writeln!(manifest, "test_records {}", report.test_records)?;

    Ok(PreparedSplit {
        original,
        train: Arc::new(pair.train),
        test,
        report,
    })
}

/// `split`: parse, split, persist. No models involved.
pub fn cmd_split(config: &ExperimentConfig) -> Result<SplitReport, CliError> {
    let prepared = prepare_split(config)?;
    eprintln!(
        "split written to {}: {} train / {} test records",
        config.out_dir.display(),
        prepared.report.train_records,
        prepared.report.test_records
    );
    Ok(prepared.report)
}

/// `run`: the full experiment. Per-algorithm failures are isolated — the
/// remaining algorithms still run — and reported in the outcome.
pub fn cmd_run(config: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let started = Instant::now();
    let catalog = load_catalog(&config.movies_path)?;
    let prepared = prepare_split(config)?;
    for item in prepared.original.item_ids() {
        if catalog.genres_of(*item).is_none() {
            return Err(CliError::Input(format!(
                "{} lacks genres for item {item}, which is rated in {}",
                config.movies_path.display(),
                config.ratings_path.display()
            )));
        }
    }

    let mut log = Vec::new();
    log.push(format!(
        "seed={} train_fraction={} validation_fraction={} top_n={} alpha={} num_bins={}",
        config.seed,
        config.train_fraction,
        config.validation_fraction,
        config.top_n,
        config.alpha,
        config.num_bins
    ));

    let mut algorithms = Vec::new();
    for section in &config.algorithms {
        let algorithm = section.algorithm;
        eprintln!("[{algorithm}] starting (grid of {})", section.grid.len());
        let result = run_algorithm(config, section, &prepared, &catalog, &mut log);
        match &result {
            Ok(row) => eprintln!(
                "[{algorithm}] precision@{}={:.4} group_correlation={:.4}",
                config.top_n, row.precision, row.group_correlation
            ),
            Err(message) => eprintln!("[{algorithm}] FAILED: {message}"),
        }
        algorithms.push(AlgorithmRun { algorithm, result });
    }

    let mut summary = create_output(&config.out_dir.join("summary.csv"))?;
    writeln!(
        summary,
        "algorithm,precision_at_10,group_correlation,user_correlation,num_bins,alpha,seed"
    )?;
    for run in &algorithms {
        if let Ok(row) = &run.result {
            writeln!(
                summary,
                "{},{:.6},{:.6},{:.6},{},{},{}",
                row.algorithm,
                row.precision,
                row.group_correlation,
                row.user_correlation,
                config.num_bins,
                config.alpha,
                config.seed
            )?;
        }
    }
    drop(summary);

    log.push(format!("total_seconds {:.1}", started.elapsed().as_secs_f64()));
    let mut log_file = create_output(&config.out_dir.join("run.log"))?;
    for line in &log {
        writeln!(log_file, "{line}")?;
    }

    Ok(RunOutcome {
        out_dir: config.out_dir.clone(),
        split: prepared.report,
        algorithms,
    })
}

fn run_algorithm(
    config: &ExperimentConfig,
    section: &AlgorithmSection,
    prepared: &PreparedSplit,
    catalog: &ItemCatalog,
    log: &mut Vec<String>,
) -> Result<SummaryRow, String> {
    let algorithm = section.algorithm;
    let train = &prepared.train;
    let test = &prepared.test;

    let mut grid = section.grid.clone();
    if !section.sets_rng_seed {
        let derived = derive_seed(config.seed, Purpose::ModelInit, algorithm.ordinal());
        for entry in &mut grid {
            entry.rng_seed = derived;
        }
    }

    let t_grid = Instant::now();
    let (best, grid_report) = grid_search(
        train,
        &grid,
        config.validation_fraction,
        config.seed,
        config.top_n,
    )
    .map_err(|e| e.to_string())?;
    log.push(format!(
        "[{algorithm}] grid search over {} configs took {:.1}s; best: {}",
        grid.len(),
        t_grid.elapsed().as_secs_f64(),
        best.summary()
    ));
    write_grid_csv(&config.out_dir.join(format!("grid_{algorithm}.csv")), &grid_report)
        .map_err(|e| e.to_string())?;

    let t_fit = Instant::now();
    let model = fit(train, &best).map_err(|e| e.to_string())?;
    log.push(format!(
        "[{algorithm}] final fit took {:.1}s",
        t_fit.elapsed().as_secs_f64()
    ));

    let t_recommend = Instant::now();
    let lists = model.recommend_all(config.top_n);
    log.push(format!(
        "[{algorithm}] recommended top-{} for {} users in {:.1}s",
        config.top_n,
        lists.len(),
        t_recommend.elapsed().as_secs_f64()
    ));

    // Precision over the held-out ratings: mean over test users, reusing
    // the lists generated above.
    let mut precision_sum = 0.0;
    let mut precision_users = 0usize;
    for user in test.user_ids() {
        if let Some(u) = train.user_index(*user) {
            precision_sum += precision_at_k(&lists[u], test, config.top_n, config.relevance_threshold);
            precision_users += 1;
        }
    }
    let precision = if precision_users > 0 {
        precision_sum / precision_users as f64
    } else {
        f64::NAN
    };

    let (rows, user_metrics) = per_user_metrics(config, prepared, catalog, &lists)
        .map_err(|e| e.to_string())?;

    write_recs_csv(&config.out_dir.join(format!("recs_{algorithm}.csv")), &lists)
        .map_err(|e| e.to_string())?;
    let mut writer = create_output(&config.out_dir.join(format!("metrics_{algorithm}.csv")))
        .map_err(|e| e.to_string())?;
    write_user_metrics_csv(&rows, &mut writer).map_err(|e| e.to_string())?;

    let groups = bin_users_with_mode(&user_metrics, config.num_bins, config.bin_mode)
        .map_err(|e| e.to_string())?;
    let mut writer = create_output(&config.out_dir.join(format!("groups_{algorithm}.csv")))
        .map_err(|e| e.to_string())?;
    write_groups_csv(&groups, &mut writer).map_err(|e| e.to_string())?;

    let group_correlation = correlate_groups(&groups).unwrap_or(f64::NAN);
    let user_correlation = per_user_correlation(&user_metrics);
    log.push(format!(
        "[{algorithm}] {} users with lists; group_correlation={group_correlation:.4} \
         user_correlation={user_correlation:.4} over {} populated bins",
        user_metrics.len(),
        groups.iter().filter(|g| g.user_count > 0).count()
    ));

    Ok(SummaryRow {
        algorithm,
        best_params: best.summary(),
        precision,
        group_correlation,
        user_correlation,
        users_with_lists: user_metrics.len(),
    })
}

/// Inconsistency and miscalibration for every train user that received a
/// non-empty recommendation list.
fn per_user_metrics(
    config: &ExperimentConfig,
    prepared: &PreparedSplit,
    catalog: &ItemCatalog,
    lists: &[RecommendationList],
) -> Result<(Vec<UserMetricRow>, Vec<UserMetrics>), String> {
    let train = &prepared.train;
    let means_source: &Dataset = match config.means_scope {
        MeansScope::Train => train,
        MeansScope::Full => &prepared.original,
    };
    let means = if config.exclude_own_rating {
        BTreeMap::new()
    } else {
        item_means(means_source)
    };
    let stats = if config.exclude_own_rating {
        item_mean_stats(means_source)
    } else {
        BTreeMap::new()
    };
    let calibration = CalibrationConfig {
        alpha: config.alpha,
        log_base: config.log_base,
    };

    let mut rows = Vec::with_capacity(train.n_users());
    let mut user_metrics = Vec::with_capacity(train.n_users());
    for (u, list) in lists.iter().enumerate() {
        if list.items.is_empty() {
            continue;
        }
        let user = train.user_id(u);
        let profile = train.user_ratings(user).map_err(|e| e.to_string())?;
        let inc = if config.exclude_own_rating {
            inconsistency_excluding_self(&profile, &stats)
        } else {
            inconsistency(&profile, &means)
        }
        .map_err(|e| format!("user {user}: {e}"))?;

        let profile_items: Vec<_> = profile.iter().map(|&(item, _)| item).collect();
        let p = genre_distribution(&profile_items, catalog).map_err(|e| e.to_string())?;
        let q = genre_distribution(&list.item_ids(), catalog).map_err(|e| e.to_string())?;
        let mis = kl_miscalibration(&p, &q, &calibration)
            .map_err(|e| format!("user {user}: {e}"))?;

        rows.push(UserMetricRow {
            user,
            profile_size: profile.len(),
            inconsistency: inc,
            miscalibration: mis,
        });
        user_metrics.push(UserMetrics {
            user,
            inconsistency: inc,
            miscalibration: mis,
        });
    }
    Ok((rows, user_metrics))
}

/// Diagnostic per-user correlation (the analysis proper correlates group
/// means). NaN when undefined.
fn per_user_correlation(user_metrics: &[UserMetrics]) -> f64 {
    let xs: Vec<f64> = user_metrics.iter().map(|m| m.inconsistency).collect();
    let ys: Vec<f64> = user_metrics.iter().map(|m| m.miscalibration).collect();
    pearson(&xs, &ys).unwrap_or(f64::NAN)
}

fn write_recs_csv(path: &Path, lists: &[RecommendationList]) -> Result<(), CliError> {
    let mut writer = create_output(path)?;
    writeln!(writer, "user_id,rank,item_id,score")?;
    for list in lists {
        for (rank, (item, score)) in list.items.iter().enumerate() {
            writeln!(writer, "{},{},{},{:.6}", list.user, rank + 1, item, score)?;
        }
    }
    Ok(())
}

fn write_grid_csv(path: &Path, report: &[GridReportRow]) -> Result<(), CliError> {
    let mut writer = create_output(path)?;
    writeln!(writer, "grid_index,params,precision,n_users")?;
    for (index, row) in report.iter().enumerate() {
        writeln!(
            writer,
            "{},{},{:.6},{}",
            index,
            row.config.summary(),
            row.precision,
            row.n_users
        )?;
    }
    Ok(())
}

/// `report`: render the summary of a completed run directory as a table.
/// Reads `summary.csv` only; nothing is recomputed.
pub fn cmd_report(out_dir: &Path, writer: &mut dyn Write) -> Result<(), CliError> {
    let summary_path = out_dir.join("summary.csv");
    if !summary_path.exists() {
        return Err(CliError::Report(format!(
            "{} is not a completed run directory: missing summary.csv \
             (expected artifacts: summary.csv, manifest.txt, run.log, \
             metrics_<algorithm>.csv, groups_<algorithm>.csv, recs_<algorithm>.csv)",
            out_dir.display()
        )));
    }
    let reader = open_input(&summary_path)?;
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::Report(format!("summary.csv: {e}")))?;
        if idx == 0 {
            if !line.starts_with("algorithm,") {
                return Err(CliError::Report(format!(
                    "summary.csv has an unexpected header: {line:?}"
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(CliError::Report(format!(
                "summary.csv line {}: expected 7 fields, found {}",
                idx + 1,
                fields.len()
            )));
        }
        rows.push((
            fields[0].to_owned(),
            fields[1].to_owned(),
            fields[2].to_owned(),
            fields[3].to_owned(),
        ));
    }
    if rows.is_empty() {
        return Err(CliError::Report(
            "summary.csv contains no algorithm rows".into(),
        ));
    }

    writeln!(
        writer,
        "{:<14} {:>13} {:>18} {:>17}",
        "algorithm", "precision@10", "group_correlation", "user_correlation"
    )?;
    for (algorithm, precision, group_corr, user_corr) in &rows {
        writeln!(
            writer,
            "{algorithm:<14} {precision:>13} {group_corr:>18} {user_corr:>17}"
        )?;
    }
    Ok(())
}
