//! NDCG@K and the experiment harness.

use std::collections::HashMap;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use log::info;
use rayon::prelude::*;

use crate::data::{build_matrix, split_per_user, RatingTriples, RatingsMatrix};
use crate::error::{CccfError, Result};
use crate::mf::{train_mf, MfConfig};
use crate::retrieval::RetrievalIndex;
use crate::solver::{train, TrainConfig};

/// Cutoffs reported by default.
pub const DEFAULT_CUTOFFS: [usize; 5] = [2, 4, 6, 8, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gain {
    /// The raw test rating.
    #[default]
    Linear,
    /// `2^rating − 1`.
    Exponential,
}

impl Gain {
    fn apply(self, rating: f64) -> f64 {
        match self {
            Gain::Linear => rating,
            Gain::Exponential => rating.exp2() - 1.0,
        }
    }
}

impl FromStr for Gain {
    type Err = CccfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Gain::Linear),
            "exponential" => Ok(Gain::Exponential),
            other => Err(CccfError::InvalidArgument(format!(
                "unknown gain `{other}`"
            ))),
        }
    }
}

/// NDCG of the first `k` entries of `ranked` against the user's test
/// ratings. `None` when the user has no test items (or only zero gains).
pub fn ndcg_at_k(ranked: &[u32], test: &HashMap<u32, f64>, k: usize, gain: Gain) -> Option<f64> {
    if test.is_empty() || k == 0 {
        return None;
    }
    let discount = |p: usize| 1.0 / ((p + 2) as f64).log2();
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .map(|(p, j)| test.get(j).map_or(0.0, |&r| gain.apply(r)) * discount(p))
        .sum();
    let mut ideal: Vec<f64> = test.values().map(|&r| gain.apply(r)).collect();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(p, g)| g * discount(p))
        .sum();
    if idcg <= 0.0 {
        return None;
    }
    Some(dcg / idcg)
}

/// Test ratings grouped by the training matrix's user indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    per_user: Vec<HashMap<u32, f64>>,
    /// Entries whose user or item is not in the training matrix.
    pub unmatched: usize,
}

impl TestSet {
    pub fn build(matrix: &RatingsMatrix, test: &RatingTriples) -> Self {
        let mut per_user = vec![HashMap::new(); matrix.m()];
        let mut unmatched = 0;
        for e in &test.entries {
            match (matrix.user_index(&e.user), matrix.item_index(&e.item)) {
                (Some(i), Some(j)) => {
                    per_user[i].insert(j as u32, e.rating);
                }
                _ => unmatched += 1,
            }
        }
        TestSet {
            per_user,
            unmatched,
        }
    }

    pub fn from_maps(per_user: Vec<HashMap<u32, f64>>) -> Self {
        TestSet {
            per_user,
            unmatched: 0,
        }
    }

    pub fn users(&self) -> usize {
        self.per_user.len()
    }

    pub fn user(&self, i: usize) -> &HashMap<u32, f64> {
        &self.per_user[i]
    }
}

/// Training item lists per user, for excluding them from candidates.
pub fn training_exclusions(matrix: &RatingsMatrix) -> Vec<Vec<u32>> {
    (0..matrix.m())
        .map(|i| matrix.user_row(i).0.to_vec())
        .collect()
}

/// Mean NDCG per cutoff over users with test items.
#[derive(Debug, Clone, PartialEq)]
pub struct NdcgSummary {
    pub ks: Vec<usize>,
    pub values: Vec<f64>,
    pub users_evaluated: usize,
    pub users_skipped: usize,
}

impl NdcgSummary {
    pub fn at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&c| c == k).map(|p| self.values[p])
    }
}

/// Averages per-user NDCG lists; users are summed in index order so the
/// result does not depend on thread scheduling.
fn summarize(ks: &[usize], per_user: Vec<Option<Vec<f64>>>) -> NdcgSummary {
    let mut sums = vec![0.0; ks.len()];
    let mut evaluated = 0;
    let mut skipped = 0;
    for row in per_user {
        match row {
            Some(v) => {
                evaluated += 1;
                for (s, x) in sums.iter_mut().zip(v) {
                    *s += x;
                }
            }
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        info!("evaluation skipped {skipped} users without test items");
    }
    let values = sums
        .iter()
        .map(|s| {
            if evaluated == 0 {
                0.0
            } else {
                s / evaluated as f64
            }
        })
        .collect();
    NdcgSummary {
        ks: ks.to_vec(),
        values,
        users_evaluated: evaluated,
        users_skipped: skipped,
    }
}

/// NDCG of an arbitrary ranker; `rank(user, k)` returns the top `k` items.
pub fn evaluate_with<F>(
    users: usize,
    test: &TestSet,
    ks: &[usize],
    gain: Gain,
    rank: F,
) -> Result<NdcgSummary>
where
    F: Fn(usize, usize) -> Result<Vec<u32>> + Sync,
{
    let depth = ks.iter().copied().max().unwrap_or(0);
    if depth == 0 {
        return Err(CccfError::InvalidArgument(
            "at least one cutoff >= 1 is required".into(),
        ));
    }
    let per_user: Vec<Option<Vec<f64>>> = (0..users)
        .into_par_iter()
        .map(|i| {
            let t = test.user(i);
            if t.is_empty() {
                return Ok(None);
            }
            let ranked = rank(i, depth)?;
            Ok(ks
                .iter()
                .map(|&k| ndcg_at_k(&ranked, t, k, gain))
                .collect::<Option<Vec<f64>>>())
        })
        .collect::<Result<_>>()?;
    Ok(summarize(ks, per_user))
}

/// NDCG of an index; candidates are whatever the index does not exclude.
pub fn evaluate(
    index: &RetrievalIndex,
    test: &TestSet,
    ks: &[usize],
    fast: bool,
    gain: Gain,
) -> Result<NdcgSummary> {
    if test.users() != index.users() {
        return Err(CccfError::InvalidArgument(format!(
            "test set has {} users, index has {}",
            test.users(),
            index.users()
        )));
    }
    evaluate_with(index.users(), test, ks, gain, |i, k| {
        Ok(index.topk(i, k, fast)?.items)
    })
}

/// Element-wise mean of several summaries over the same cutoffs.
pub fn average_summaries(runs: &[NdcgSummary]) -> Option<NdcgSummary> {
    let first = runs.first()?;
    let mut values = vec![0.0; first.ks.len()];
    for run in runs {
        for (v, x) in values.iter_mut().zip(&run.values) {
            *v += x;
        }
    }
    values.iter_mut().for_each(|v| *v /= runs.len() as f64);
    Some(NdcgSummary {
        ks: first.ks.clone(),
        values,
        users_evaluated: runs.iter().map(|r| r.users_evaluated).sum(),
        users_skipped: runs.iter().map(|r| r.users_skipped).sum(),
    })
}

/// Experiment grid: every configuration is trained on every split.
#[derive(Debug, Clone)]
pub struct ExperimentGrid {
    pub dataset: String,
    pub configs: Vec<TrainConfig>,
    pub split_seeds: Vec<u64>,
    pub train_frac: f64,
    pub mf: MfConfig,
    pub ks: Vec<usize>,
    pub gain: Gain,
    /// Evaluate with the integer fast path (otherwise exact).
    pub fast: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub dataset: String,
    pub split_seed: u64,
    pub g: usize,
    pub r: usize,
    pub h: f64,
    pub e: i64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub ndcg: NdcgSummary,
    pub train_secs: f64,
    pub retrieval_secs: f64,
}

/// Rows of an experiment run, written as CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rows: Vec<ExperimentRow>,
}

impl EvalReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let ks = self
            .rows
            .first()
            .map_or(DEFAULT_CUTOFFS.to_vec(), |r| r.ndcg.ks.clone());
        let ndcg_cols: Vec<String> = ks.iter().map(|k| format!("ndcg@{k}")).collect();
        writeln!(
            w,
            "dataset,split_seed,G,r,total_bits,h,e,alpha1,alpha2,{},train_secs,retrieval_secs",
            ndcg_cols.join(",")
        )?;
        for row in &self.rows {
            let vals: Vec<String> = row.ndcg.values.iter().map(|v| format!("{v:.6}")).collect();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{:.3},{:.3}",
                row.dataset,
                row.split_seed,
                row.g,
                row.r,
                row.g * row.r,
                row.h,
                row.e,
                row.alpha1,
                row.alpha2,
                vals.join(","),
                row.train_secs,
                row.retrieval_secs
            )?;
        }
        Ok(())
    }

    /// Mean NDCG per `(G, r, h, e, α₁, α₂)` across split seeds, in first-seen
    /// order.
    pub fn averaged(&self) -> Vec<(TrainKey, NdcgSummary)> {
        let mut order: Vec<TrainKey> = Vec::new();
        let mut groups: Vec<Vec<NdcgSummary>> = Vec::new();
        for row in &self.rows {
            let key = TrainKey::of(row);
            match order.iter().position(|k| *k == key) {
                Some(p) => groups[p].push(row.ndcg.clone()),
                None => {
                    order.push(key);
                    groups.push(vec![row.ndcg.clone()]);
                }
            }
        }
        order
            .into_iter()
            .zip(groups)
            .filter_map(|(k, g)| average_summaries(&g).map(|s| (k, s)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainKey {
    pub g: usize,
    pub r: usize,
    pub h: f64,
    pub e: i64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl TrainKey {
    fn of(row: &ExperimentRow) -> Self {
        TrainKey {
            g: row.g,
            r: row.r,
            h: row.h,
            e: row.e,
            alpha1: row.alpha1,
            alpha2: row.alpha2,
        }
    }
}

/// Trains and evaluates every grid point on every split. The MF latent
/// factors are fitted once per split and shared by all configurations.
pub fn run_experiment(triples: &RatingTriples, grid: &ExperimentGrid) -> Result<EvalReport> {
    let mut report = EvalReport::default();
    for &seed in &grid.split_seeds {
        let split = split_per_user(triples, grid.train_frac, seed)?;
        let matrix = build_matrix(&split.train)?;
        let test = TestSet::build(&matrix, &split.test);
        let mf_cfg = MfConfig {
            seed,
            ..grid.mf.clone()
        };
        let latents = train_mf(&matrix, &mf_cfg)?.factors;
        let exclusions = training_exclusions(&matrix);
        for config in &grid.configs {
            let start = Instant::now();
            let out = train(&matrix, &latents, config)?;
            let train_secs = start.elapsed().as_secs_f64();
            let index = RetrievalIndex::build(&out.model, config.int_scale)?
                .with_exclusions(exclusions.clone())?;
            let start = Instant::now();
            let ndcg = evaluate(&index, &test, &grid.ks, grid.fast, grid.gain)?;
            let retrieval_secs = start.elapsed().as_secs_f64();
            info!(
                "split {seed} G={} r={}: ndcg@{} = {:.4}",
                config.g,
                config.r,
                grid.ks.last().copied().unwrap_or(0),
                ndcg.values.last().copied().unwrap_or(0.0)
            );
            report.rows.push(ExperimentRow {
                dataset: grid.dataset.clone(),
                split_seed: seed,
                g: config.g,
                r: config.r,
                h: config.h,
                e: config.int_scale,
                alpha1: config.alpha1,
                alpha2: config.alpha2,
                ndcg,
                train_secs,
                retrieval_secs,
            });
        }
    }
    Ok(report)
}
