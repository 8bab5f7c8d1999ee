//! Subcommand implementations. Each writes its table to `out` and returns a
//! [`CliError`] carrying a stable category name on failure.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;

use cccf::data::{build_matrix, filter_min_interactions, parse_ratings, split_per_user};
use cccf::eval::{
    evaluate, run_experiment, training_exclusions, ExperimentGrid, ExperimentRow, TestSet,
};
use cccf::mf::train_mf;
use cccf::model_io::{self, ModelBundle};
use cccf::retrieval::{benchmark, BenchMode, BenchReport, BenchTarget};
use cccf::synthetic::random_baselines;
use cccf::solver::{train, IterationLog};
use cccf::{CccfError, EvalReport, RatingTriples, RetrievalIndex};

use crate::config::{ConfigError, RunConfig};

/// Failure with a machine-readable category and process exit code.
#[derive(Debug)]
pub struct CliError {
    pub category: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(category: &'static str, message: impl Into<String>) -> Self {
        CliError {
            category,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category {
            "user-not-found" | "config" => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Single line: category, then the message with newlines flattened.
        write!(f, "{}: {}", self.category, self.message.replace('\n', " "))
    }
}

impl From<CccfError> for CliError {
    fn from(e: CccfError) -> Self {
        let category = match &e {
            CccfError::Io(_) => "io",
            CccfError::Parse { .. } => "parse",
            CccfError::EmptyAfterFilter { .. } => "empty-dataset",
            CccfError::InvalidArgument(_) => "invalid-argument",
            CccfError::Diverged(_) => "diverged",
            CccfError::RankCollapse { .. } => "rank-collapse",
            CccfError::ZeroNorm => "zero-norm",
            CccfError::Overflow(_) => "overflow",
            CccfError::Format(_) => "model-format",
            CccfError::UserNotFound(_) => "user-not-found",
        };
        CliError::new(category, e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::new("config", e.0)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new("io", e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

fn read_ratings(path: &Path, cfg: &RunConfig) -> CliResult<RatingTriples> {
    let mut t = parse_ratings(open(path)?, cfg.format)?;
    t.source = path.display().to_string();
    Ok(t)
}

fn load_bundle(path: &Path) -> CliResult<ModelBundle> {
    Ok(model_io::load(open(path)?)?)
}

/// Index over a bundle, excluding the stored training items when present
/// and `with_exclusions` is set.
fn index_for(bundle: &ModelBundle, e: i64, with_exclusions: bool) -> CliResult<RetrievalIndex> {
    let index = RetrievalIndex::build(&bundle.model, e)?;
    Ok(match (&bundle.exclusions, with_exclusions) {
        (Some(ex), true) => index.with_exclusions(ex.clone())?,
        _ => index,
    })
}

/// Filters, splits and writes `train.csv` and `test.csv` into `out_dir`.
pub fn prepare(input: &Path, out_dir: &Path, cfg: &RunConfig) -> CliResult<(PathBuf, PathBuf)> {
    let raw = read_ratings(input, cfg)?;
    let kept = filter_min_interactions(&raw, cfg.min_count)?;
    let split = split_per_user(&kept, cfg.train_frac, cfg.split_seed)?;
    std::fs::create_dir_all(out_dir)?;
    let train_path = out_dir.join("train.csv");
    let test_path = out_dir.join("test.csv");
    let mut w = create(&train_path)?;
    split.train.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&test_path)?;
    split.test.write_csv(&mut w)?;
    w.flush()?;
    info!(
        "{} ratings read, {} kept, {} train, {} test, {} test entries dropped",
        raw.len(),
        kept.len(),
        split.train.len(),
        split.test.len(),
        split.dropped_test
    );
    Ok((train_path, test_path))
}

/// Trains on `train_file` and packs the model with its ids, MF factors and
/// training-item exclusions.
pub fn train_bundle(
    train_file: &Path,
    cfg: &RunConfig,
) -> CliResult<(ModelBundle, Vec<IterationLog>)> {
    let triples = read_ratings(train_file, cfg)?;
    let matrix = build_matrix(&triples)?;
    info!(
        "training on {} users, {} items, {} ratings",
        matrix.m(),
        matrix.n(),
        matrix.nnz()
    );
    let latents = train_mf(&matrix, &cfg.mf_config())?.factors;
    let out = train(&matrix, &latents, &cfg.train)?;
    if !out.converged {
        info!("stopped at max_outer = {} before converging", cfg.train.max_outer);
    }
    let bundle = ModelBundle {
        model: out.model,
        latents: Some(latents),
        user_ids: matrix.user_ids().to_vec(),
        item_ids: matrix.item_ids().to_vec(),
        exclusions: Some(training_exclusions(&matrix)),
    };
    Ok((bundle, out.log))
}

/// [`train_bundle`], then saves the model and writes the iteration log.
/// Wall-clock seconds go into the log only with `timings`, so repeated runs
/// produce identical files.
pub fn train_model(
    train_file: &Path,
    model_path: &Path,
    log_path: &Path,
    timings: bool,
    cfg: &RunConfig,
) -> CliResult<()> {
    let (bundle, log) = train_bundle(train_file, cfg)?;
    let mut w = create(model_path)?;
    model_io::save(&bundle, &mut w)?;
    let mut w = create(log_path)?;
    write_log(&mut w, &log, timings)?;
    w.flush()?;
    Ok(())
}

fn write_log<W: Write>(w: &mut W, log: &[IterationLog], timings: bool) -> std::io::Result<()> {
    if timings {
        writeln!(w, "{}", IterationLog::CSV_HEADER)?;
        for row in log {
            writeln!(w, "{}", row.csv_row())?;
        }
    } else {
        writeln!(w, "iteration,objective,user_flips,item_flips")?;
        for row in log {
            writeln!(
                w,
                "{},{},{},{}",
                row.iteration, row.objective, row.user_flips, row.item_flips
            )?;
        }
    }
    Ok(())
}

/// NDCG of a saved model on a test file, as one report row.
pub fn evaluate_model(
    model_path: &Path,
    test_file: &Path,
    cfg: &RunConfig,
    out: &mut dyn Write,
) -> CliResult<EvalReport> {
    let bundle = load_bundle(model_path)?;
    if bundle.user_ids.is_empty() || bundle.item_ids.is_empty() {
        return Err(CliError::new(
            "model-format",
            "model file carries no user/item ids to align the test set",
        ));
    }
    let test = read_ratings(test_file, cfg)?;
    let users: HashMap<&str, usize> = bundle
        .user_ids
        .iter()
        .enumerate()
        .map(|(i, u)| (u.as_str(), i))
        .collect();
    let items: HashMap<&str, u32> = bundle
        .item_ids
        .iter()
        .enumerate()
        .map(|(j, s)| (s.as_str(), j as u32))
        .collect();
    let mut per_user = vec![HashMap::new(); bundle.user_ids.len()];
    let mut unmatched = 0;
    for e in &test.entries {
        match (users.get(e.user.as_str()), items.get(e.item.as_str())) {
            (Some(&i), Some(&j)) => {
                per_user[i].insert(j, e.rating);
            }
            _ => unmatched += 1,
        }
    }
    if unmatched > 0 {
        info!("{unmatched} test entries reference ids unknown to the model");
    }
    let test_set = TestSet::from_maps(per_user);

    let config = &bundle.model.config;
    let index = index_for(&bundle, cfg.train.int_scale, true)?;
    let start = Instant::now();
    let ndcg = evaluate(&index, &test_set, &cfg.ks, cfg.fast, cfg.gain)?;
    let retrieval_secs = start.elapsed().as_secs_f64();
    let report = EvalReport {
        rows: vec![ExperimentRow {
            dataset: cfg.dataset.clone(),
            split_seed: cfg.split_seed,
            g: bundle.model.g(),
            r: bundle.model.r(),
            h: bundle.model.weights.h(),
            e: cfg.train.int_scale,
            alpha1: config.alpha1,
            alpha2: config.alpha2,
            ndcg,
            train_secs: 0.0,
            retrieval_secs,
        }],
    };
    report.write_csv(out)?;
    Ok(report)
}

/// Top-`k` list for one user id as `rank,item_id,score` CSV.
pub fn retrieve(
    model_path: &Path,
    user: &str,
    k: usize,
    fast: bool,
    include_train: bool,
    cfg: &RunConfig,
    out: &mut dyn Write,
) -> CliResult<()> {
    let bundle = load_bundle(model_path)?;
    retrieve_from(&bundle, user, k, fast, include_train, cfg, out)
}

/// [`retrieve`] on an in-memory bundle.
pub fn retrieve_from(
    bundle: &ModelBundle,
    user: &str,
    k: usize,
    fast: bool,
    include_train: bool,
    cfg: &RunConfig,
    out: &mut dyn Write,
) -> CliResult<()> {
    let i = bundle
        .user_index(user)
        .ok_or_else(|| CliError::new("user-not-found", format!("unknown user id `{user}`")))?;
    let index = index_for(bundle, cfg.train.int_scale, !include_train)?;
    let top = index.topk(i, k, fast)?;
    writeln!(out, "rank,item_id,score")?;
    for (p, &j) in top.items.iter().enumerate() {
        let id = bundle
            .item_ids
            .get(j as usize)
            .cloned()
            .unwrap_or_else(|| j.to_string());
        writeln!(out, "{},{},{}", p + 1, id, top.score_text(p))?;
    }
    Ok(())
}

/// Times full scans for each mode over the first `users` users.
pub fn bench(
    model_path: &Path,
    modes: &[BenchMode],
    users: Option<usize>,
    k: usize,
    cfg: &RunConfig,
    out: &mut dyn Write,
) -> CliResult<Vec<BenchReport>> {
    let bundle = load_bundle(model_path)?;
    let index = index_for(&bundle, cfg.train.int_scale, false)?;
    let m = index.users();
    let query: Vec<usize> = (0..users.unwrap_or(m).min(m)).collect();
    let bits = index.g() * index.r();
    let needs_baselines = modes
        .iter()
        .any(|m| matches!(m, BenchMode::FloatMf | BenchMode::DcfFlat));
    let baselines = if needs_baselines {
        Some(random_baselines(m, index.items(), bits, cfg.train.seed)?)
    } else {
        None
    };
    writeln!(out, "{}", BenchReport::CSV_HEADER)?;
    let mut reports = Vec::new();
    for &mode in modes {
        let target = match (mode, &baselines) {
            (BenchMode::CccfFast, _) => BenchTarget::Cccf {
                index: &index,
                fast: true,
            },
            (BenchMode::CccfExact, _) => BenchTarget::Cccf {
                index: &index,
                fast: false,
            },
            (BenchMode::FloatMf, Some((dense, _))) => BenchTarget::Dense(dense),
            (BenchMode::DcfFlat, Some((_, flat))) => BenchTarget::Flat(flat),
            _ => unreachable!("baselines are built whenever a baseline mode is requested"),
        };
        let report = benchmark(&target, &query, k);
        writeln!(out, "{}", report.csv_row())?;
        reports.push(report);
    }
    Ok(reports)
}

/// Runs the configured grid over the configured split seeds.
pub fn experiment(input: &Path, cfg: &RunConfig, out: &mut dyn Write) -> CliResult<EvalReport> {
    let raw = read_ratings(input, cfg)?;
    let kept = filter_min_interactions(&raw, cfg.min_count)?;
    let grid = ExperimentGrid {
        dataset: cfg.dataset.clone(),
        configs: cfg.grid_configs(),
        split_seeds: cfg.split_seeds.clone(),
        train_frac: cfg.train_frac,
        mf: cfg.mf.clone(),
        ks: cfg.ks.clone(),
        gain: cfg.gain,
        fast: cfg.fast,
    };
    let report = run_experiment(&kept, &grid)?;
    report.write_csv(out)?;
    Ok(report)
}
