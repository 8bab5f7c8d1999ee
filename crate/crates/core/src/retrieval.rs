//! Top-k retrieval by linear scan over a trained model.
//!
//! Item codes are regrouped per component into posting lists holding only the
//! items with a nonzero weight on that component, so a query touches
//! `Σ_k 1[η_i^(k) ≠ 0] · |{j : ξ_j^(k) ≠ 0}|` code words instead of `G·n`.
//! The fast path uses integer weights `round(e·w)` and exact `i64`
//! accumulation; the exact path keeps the float weights.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::coding::{binary_inner_product, CccfModel, PackedCodes};
use crate::error::{CccfError, Result};
use crate::weights::{scale_integer_weights, IntegerWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    Float,
    /// Scores are in units of `e²`.
    IntegerScaled,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scores {
    Float(Vec<f64>),
    Integer(Vec<i64>),
}

/// Items ordered by descending score, ties by ascending item index.
#[derive(Debug, Clone, PartialEq)]
pub struct TopKResult {
    pub items: Vec<u32>,
    pub scores: Scores,
}

impl TopKResult {
    pub fn kind(&self) -> ScoreKind {
        match self.scores {
            Scores::Float(_) => ScoreKind::Float,
            Scores::Integer(_) => ScoreKind::IntegerScaled,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Score of the `p`-th entry as `f64` (integer scores converted).
    pub fn score(&self, p: usize) -> f64 {
        match &self.scores {
            Scores::Float(s) => s[p],
            Scores::Integer(s) => s[p] as f64,
        }
    }

    /// Display form of the `p`-th score: integers verbatim, floats with
    /// round-trip precision.
    pub fn score_text(&self, p: usize) -> String {
        match &self.scores {
            Scores::Float(s) => format!("{:?}", s[p]),
            Scores::Integer(s) => s[p].to_string(),
        }
    }
}

/// Total order used for ranking.
pub trait RankScore: Copy {
    fn rank_cmp(&self, other: &Self) -> Ordering;
}

impl RankScore for f64 {
    fn rank_cmp(&self, other: &Self) -> Ordering {
        self.total_cmp(other)
    }
}

impl RankScore for f32 {
    fn rank_cmp(&self, other: &Self) -> Ordering {
        self.total_cmp(other)
    }
}

impl RankScore for i64 {
    fn rank_cmp(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }
}

impl RankScore for i32 {
    fn rank_cmp(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }
}

/// Heap entry ordered so that the *worst* candidate is the maximum.
struct Worst<S>(S, u32);

impl<S: RankScore> PartialEq for Worst<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<S: RankScore> Eq for Worst<S> {}

impl<S: RankScore> PartialOrd for Worst<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<S: RankScore> Ord for Worst<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.rank_cmp(&self.0).then(self.1.cmp(&other.1))
    }
}

/// Best `k` of `scores`, skipping the ascending item list `excluded`.
pub fn select_top_k<S: RankScore>(scores: &[S], k: usize, excluded: &[u32]) -> Vec<(u32, S)> {
    let mut heap: BinaryHeap<Worst<S>> = BinaryHeap::with_capacity(k + 1);
    let mut skip = excluded.iter().peekable();
    for (j, &s) in scores.iter().enumerate() {
        let j = j as u32;
        while skip.next_if(|&&x| x < j).is_some() {}
        if skip.next_if_eq(&&j).is_some() {
            continue;
        }
        if heap.len() < k {
            heap.push(Worst(s, j));
        } else if let Some(worst) = heap.peek() {
            // Later items lose ties, so only a strictly better score enters.
            if s.rank_cmp(&worst.0) == Ordering::Greater {
                heap.pop();
                heap.push(Worst(s, j));
            }
        }
    }
    let mut out: Vec<(u32, S)> = heap.into_iter().map(|Worst(s, j)| (j, s)).collect();
    out.sort_by(|a, b| b.1.rank_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

/// Items with a nonzero float weight on one component, with contiguous code
/// copies. Used by the exact path.
#[derive(Debug, Clone, PartialEq)]
struct Postings {
    items: Vec<u32>,
    weights: Vec<f64>,
    codes: Vec<u64>,
}

impl Postings {
    fn build(codes: &PackedCodes, weight: impl Fn(usize) -> f64) -> Self {
        let mut p = Postings {
            items: Vec::new(),
            weights: Vec::new(),
            codes: Vec::new(),
        };
        for j in 0..codes.rows() {
            let w = weight(j);
            if w != 0.0 {
                p.items.push(j as u32);
                p.weights.push(w);
                p.codes.extend_from_slice(codes.row(j));
            }
        }
        p
    }
}

/// A component column whose nonzero fraction reaches this is stored densely
/// (absent items get weight 0) so the scan is a straight, vectorizable loop;
/// sparser columns keep an item list.
pub const DENSE_MIN_FILL: f64 = 0.25;

/// Codes of one component in the narrowest word holding `r` bits, or whole
/// rows of `u64` words when `r > 64`.
#[derive(Debug, Clone, PartialEq)]
enum CodeColumn {
    U8(Vec<u8>),
    U16(Vec<u16>),
    U32(Vec<u32>),
    U64(Vec<u64>),
    Wide(Vec<u64>),
}

impl CodeColumn {
    fn for_bits(r: usize) -> Self {
        match r {
            0..=8 => CodeColumn::U8(Vec::new()),
            9..=16 => CodeColumn::U16(Vec::new()),
            17..=32 => CodeColumn::U32(Vec::new()),
            33..=64 => CodeColumn::U64(Vec::new()),
            _ => CodeColumn::Wide(Vec::new()),
        }
    }

    fn push(&mut self, row: &[u64]) {
        match self {
            CodeColumn::U8(v) => v.push(row[0] as u8),
            CodeColumn::U16(v) => v.push(row[0] as u16),
            CodeColumn::U32(v) => v.push(row[0] as u32),
            CodeColumn::U64(v) => v.push(row[0]),
            CodeColumn::Wide(v) => v.extend_from_slice(row),
        }
    }

    fn words(&self, pos: usize, stride: usize) -> Vec<u64> {
        match self {
            CodeColumn::U8(v) => vec![v[pos] as u64],
            CodeColumn::U16(v) => vec![v[pos] as u64],
            CodeColumn::U32(v) => vec![v[pos] as u64],
            CodeColumn::U64(v) => vec![v[pos]],
            CodeColumn::Wide(v) => v[pos * stride..(pos + 1) * stride].to_vec(),
        }
    }
}

/// Integer accumulator of the fast path.
trait Accum:
    Copy
    + Default
    + PartialEq
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::AddAssign
    + RankScore
    + Into<i64>
{
    /// Callers guarantee the value fits (enforced by the build-time bound).
    fn from_i64(x: i64) -> Self;
}

impl Accum for i32 {
    fn from_i64(x: i64) -> Self {
        x as i32
    }
}

impl Accum for i64 {
    fn from_i64(x: i64) -> Self {
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
struct IntColumn<A> {
    /// `None` for a dense column covering every item.
    items: Option<Vec<u32>>,
    weights: Vec<A>,
    codes: CodeColumn,
    /// Items with a nonzero weight.
    nnz: usize,
}

impl<A: Accum> IntColumn<A> {
    fn build(codes: &PackedCodes, weights: impl Fn(usize) -> i64) -> Self {
        let n = codes.rows();
        let nnz = (0..n).filter(|&j| weights(j) != 0).count();
        let dense = nnz as f64 >= DENSE_MIN_FILL * n as f64;
        let mut col = IntColumn {
            items: if dense { None } else { Some(Vec::with_capacity(nnz)) },
            weights: Vec::with_capacity(if dense { n } else { nnz }),
            codes: CodeColumn::for_bits(codes.bits()),
            nnz,
        };
        for j in 0..n {
            let w = weights(j);
            if let Some(items) = &mut col.items {
                if w == 0 {
                    continue;
                }
                items.push(j as u32);
            }
            col.weights.push(A::from_i64(w));
            col.codes.push(codes.row(j));
        }
        col
    }

    /// Position of item `j` in the column, if stored with a nonzero weight.
    fn position(&self, j: usize) -> Option<usize> {
        let pos = match &self.items {
            None => j,
            Some(items) => items.binary_search(&(j as u32)).ok()?,
        };
        (self.weights[pos] != A::default()).then_some(pos)
    }
}

trait CodeWord: Copy + std::ops::BitXor<Output = Self> {
    fn ones(self) -> u32;
}

macro_rules! code_word {
    ($($t:ty),*) => {$(
        impl CodeWord for $t {
            #[inline(always)]
            fn ones(self) -> u32 {
                self.count_ones()
            }
        }
    )*};
}
code_word!(u8, u16, u32, u64);

#[inline(always)]
fn ip<A: Accum>(r: A, ones: u32) -> A {
    r - A::from_i64(2 * ones as i64)
}

fn scan_dense<C: CodeWord, A: Accum>(b: C, eta: A, r: A, codes: &[C], w: &[A], scores: &mut [A]) {
    for ((s, &d), &xi) in scores.iter_mut().zip(codes).zip(w) {
        *s += eta * xi * ip(r, (b ^ d).ones());
    }
}

fn scan_sparse<C: CodeWord, A: Accum>(
    b: C,
    eta: A,
    r: A,
    items: &[u32],
    codes: &[C],
    w: &[A],
    scores: &mut [A],
) {
    for ((&j, &d), &xi) in items.iter().zip(codes).zip(w) {
        scores[j as usize] += eta * xi * ip(r, (b ^ d).ones());
    }
}

fn wide_ones(b: &[u64], d: &[u64]) -> u32 {
    b.iter().zip(d).map(|(x, y)| (x ^ y).count_ones()).sum()
}

impl<A: Accum> IntColumn<A> {
    /// Adds `η̂ · ξ̂_j · bᵀd_j` into `scores` for every stored item.
    fn scan(&self, b: &[u64], eta: A, r: A, scores: &mut [A]) {
        macro_rules! narrow {
            ($v:expr, $t:ty) => {{
                let bw = b[0] as $t;
                match &self.items {
                    None => scan_dense(bw, eta, r, $v, &self.weights, scores),
                    Some(items) => scan_sparse(bw, eta, r, items, $v, &self.weights, scores),
                }
            }};
        }
        match &self.codes {
            CodeColumn::U8(v) => narrow!(v, u8),
            CodeColumn::U16(v) => narrow!(v, u16),
            CodeColumn::U32(v) => narrow!(v, u32),
            CodeColumn::U64(v) => narrow!(v, u64),
            CodeColumn::Wide(v) => {
                let stride = b.len();
                let rows = v.chunks_exact(stride).zip(&self.weights);
                match &self.items {
                    None => {
                        for (s, (d, &xi)) in scores.iter_mut().zip(rows) {
                            *s += eta * xi * ip(r, wide_ones(b, d));
                        }
                    }
                    Some(items) => {
                        for (&j, (d, &xi)) in items.iter().zip(rows) {
                            scores[j as usize] += eta * xi * ip(r, wide_ones(b, d));
                        }
                    }
                }
            }
        }
    }
}

/// Integer scan data with accumulator type `A`.
#[derive(Debug, Clone, PartialEq)]
struct FastScan<A> {
    columns: Vec<IntColumn<A>>,
    /// `m × G` user weights.
    users: Vec<A>,
}

impl<A: Accum> FastScan<A> {
    fn build(model: &CccfModel, w: &IntegerWeights) -> Self {
        let columns = (0..model.g())
            .map(|k| IntColumn::build(&model.item_codes[k], |j| w.item(j)[k]))
            .collect();
        let users = (0..model.m())
            .flat_map(|i| w.user(i).iter().map(|&x| A::from_i64(x)).collect::<Vec<_>>())
            .collect();
        FastScan { columns, users }
    }

    fn score(&self, user_codes: &[PackedCodes], user: usize, r: usize, scores: &mut Vec<A>, n: usize) {
        scores.clear();
        scores.resize(n, A::default());
        let g = self.columns.len();
        let r = A::from_i64(r as i64);
        for (k, col) in self.columns.iter().enumerate() {
            let eta = self.users[user * g + k];
            if eta == A::default() {
                continue;
            }
            col.scan(user_codes[k].row(user), eta, r, scores);
        }
    }
}

/// Fast-path data in the narrowest accumulator the overflow bound allows.
#[derive(Debug, Clone, PartialEq)]
enum FastPath {
    Narrow(FastScan<i32>),
    Wide(FastScan<i64>),
}

/// Reusable score buffers for the fast path.
#[derive(Debug, Clone, Default)]
pub struct FastScratch {
    narrow: Vec<i32>,
    wide: Vec<i64>,
}

/// Read-only scan structure built from a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalIndex {
    g: usize,
    r: usize,
    stride: usize,
    n: usize,
    user_codes: Vec<PackedCodes>,
    item_codes: Vec<PackedCodes>,
    user_weights: Vec<f64>,
    int_weights: IntegerWeights,
    float_postings: Vec<Postings>,
    fast: FastPath,
    exclusions: Option<Vec<Vec<u32>>>,
}

/// Largest `|score|` the fast path can produce: `G · max η̂ · max ξ̂ · r`.
fn accumulator_bound(g: usize, r: usize, w: &IntegerWeights) -> Result<i64> {
    let bound = (g as i128) * (w.max_user() as i128) * (w.max_item() as i128) * (r as i128);
    if bound > i64::MAX as i128 {
        return Err(CccfError::Overflow(format!(
            "G·max η̂·max ξ̂·r = {bound} exceeds the 64-bit accumulator (scale e = {})",
            w.scale()
        )));
    }
    Ok(bound as i64)
}

impl RetrievalIndex {
    /// Builds the index with integer weights `round(e · w)`. The fast path
    /// accumulates in `i32` when `G · max η̂ · max ξ̂ · r` fits, otherwise in
    /// `i64`; a bound beyond `i64` is an [`CccfError::Overflow`]. With weights
    /// at most 3/4 this covers `r ≤ 64`, `G ≤ 64`, `e ≤ 10⁴` with room to spare.
    pub fn build(model: &CccfModel, e: i64) -> Result<Self> {
        let (g, r, m, n) = (model.g(), model.r(), model.m(), model.n());
        let int_weights = scale_integer_weights(&model.weights, e)?;
        let bound = accumulator_bound(g, r, &int_weights)?;
        let fast = if bound <= i32::MAX as i64 {
            FastPath::Narrow(FastScan::build(model, &int_weights))
        } else {
            FastPath::Wide(FastScan::build(model, &int_weights))
        };
        let float_postings = (0..g)
            .map(|k| Postings::build(&model.item_codes[k], |j| model.weights.item(j)[k]))
            .collect();
        let user_weights = (0..m)
            .flat_map(|i| model.weights.user(i).to_vec())
            .collect();
        Ok(RetrievalIndex {
            g,
            r,
            stride: model
                .item_codes
                .first()
                .map_or(1, PackedCodes::words_per_row),
            n,
            user_codes: model.user_codes.clone(),
            item_codes: model.item_codes.clone(),
            user_weights,
            int_weights,
            float_postings,
            fast,
            exclusions: None,
        })
    }

    /// Items to leave out per user, e.g. the training items. Each list is
    /// sorted and deduplicated here.
    pub fn with_exclusions(mut self, mut lists: Vec<Vec<u32>>) -> Result<Self> {
        if lists.len() != self.users() {
            return Err(CccfError::InvalidArgument(format!(
                "{} exclusion lists for {} users",
                lists.len(),
                self.users()
            )));
        }
        for l in &mut lists {
            l.sort_unstable();
            l.dedup();
        }
        self.exclusions = Some(lists);
        Ok(self)
    }

    pub fn exclusions(&self) -> Option<&[Vec<u32>]> {
        self.exclusions.as_deref()
    }

    pub fn users(&self) -> usize {
        self.user_codes.first().map_or(0, PackedCodes::rows)
    }

    pub fn items(&self) -> usize {
        self.n
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn scale(&self) -> i64 {
        self.int_weights.scale()
    }

    pub fn integer_weights(&self) -> &IntegerWeights {
        &self.int_weights
    }

    /// Whether the fast path accumulates in 32-bit integers.
    pub fn narrow_accumulator(&self) -> bool {
        matches!(self.fast, FastPath::Narrow(_))
    }

    /// Item codes of component `k` exactly as in the model.
    pub fn item_codes(&self, k: usize) -> &PackedCodes {
        &self.item_codes[k]
    }

    /// Item code of component `k` read back from the exact-path postings;
    /// `None` when the item's float weight is zero.
    pub fn posting_code(&self, k: usize, j: usize) -> Option<&[u64]> {
        let p = &self.float_postings[k];
        let pos = p.items.binary_search(&(j as u32)).ok()?;
        Some(&p.codes[pos * self.stride..(pos + 1) * self.stride])
    }

    /// Item code of component `k` read back from the fast-path columns;
    /// `None` when the item's integer weight is zero.
    pub fn fast_code(&self, k: usize, j: usize) -> Option<Vec<u64>> {
        match &self.fast {
            FastPath::Narrow(f) => {
                let c = &f.columns[k];
                c.position(j).map(|p| c.codes.words(p, self.stride))
            }
            FastPath::Wide(f) => {
                let c = &f.columns[k];
                c.position(j).map(|p| c.codes.words(p, self.stride))
            }
        }
    }

    fn user_weight(&self, i: usize) -> &[f64] {
        &self.user_weights[i * self.g..(i + 1) * self.g]
    }

    fn check_user(&self, user: usize) -> Result<()> {
        if user >= self.users() {
            return Err(CccfError::UserNotFound(format!(
                "index {user} (have {} users)",
                self.users()
            )));
        }
        Ok(())
    }

    fn excluded(&self, user: usize) -> &[u32] {
        self.exclusions.as_ref().map_or(&[], |e| &e[user])
    }

    /// Number of nonzero `(component, item)` weight entries a query for
    /// `user` accumulates.
    pub fn scan_entries(&self, user: usize, fast: bool) -> usize {
        (0..self.g)
            .map(|k| {
                if fast {
                    if self.int_weights.user(user)[k] == 0 {
                        return 0;
                    }
                    match &self.fast {
                        FastPath::Narrow(f) => f.columns[k].nnz,
                        FastPath::Wide(f) => f.columns[k].nnz,
                    }
                } else if self.user_weight(user)[k] == 0.0 {
                    0
                } else {
                    self.float_postings[k].items.len()
                }
            })
            .sum()
    }

    /// Float scores of every item for `user`, written into `scores`.
    pub fn score_exact_into(&self, user: usize, scores: &mut Vec<f64>) {
        scores.clear();
        scores.resize(self.n, 0.0);
        let eta = self.user_weight(user);
        for k in 0..self.g {
            if eta[k] == 0.0 {
                continue;
            }
            let b = self.user_codes[k].row(user);
            let p = &self.float_postings[k];
            for (t, (&j, &xi)) in p.items.iter().zip(&p.weights).enumerate() {
                let d = &p.codes[t * self.stride..(t + 1) * self.stride];
                scores[j as usize] += eta[k] * xi * binary_inner_product(b, d, self.r) as f64;
            }
        }
    }

    /// Integer scores `Σ_k η̂ ξ̂ bᵀd` of every item for `user`, in units of `e²`.
    pub fn score_fast_into(&self, user: usize, scores: &mut Vec<i64>) {
        match &self.fast {
            FastPath::Narrow(f) => {
                let mut narrow = Vec::new();
                f.score(&self.user_codes, user, self.r, &mut narrow, self.n);
                scores.clear();
                scores.extend(narrow.iter().map(|&s| s as i64));
            }
            FastPath::Wide(f) => f.score(&self.user_codes, user, self.r, scores, self.n),
        }
    }

    /// Scores into the scratch buffer matching the accumulator and selects
    /// the top `k`.
    fn fast_top_k(
        &self,
        user: usize,
        k: usize,
        excluded: &[u32],
        scratch: &mut FastScratch,
    ) -> Vec<(u32, i64)> {
        match &self.fast {
            FastPath::Narrow(f) => {
                f.score(&self.user_codes, user, self.r, &mut scratch.narrow, self.n);
                select_top_k(&scratch.narrow, k, excluded)
                    .into_iter()
                    .map(|(j, s)| (j, s as i64))
                    .collect()
            }
            FastPath::Wide(f) => {
                f.score(&self.user_codes, user, self.r, &mut scratch.wide, self.n);
                select_top_k(&scratch.wide, k, excluded)
            }
        }
    }

    pub fn topk_exact(&self, user: usize, k: usize) -> Result<TopKResult> {
        let mut scratch = Vec::new();
        self.topk_exact_with(user, k, &mut scratch)
    }

    pub fn topk_fast(&self, user: usize, k: usize) -> Result<TopKResult> {
        let mut scratch = FastScratch::default();
        self.topk_fast_with(user, k, &mut scratch)
    }

    /// [`Self::topk_exact`] reusing a caller-owned score buffer.
    pub fn topk_exact_with(
        &self,
        user: usize,
        k: usize,
        scratch: &mut Vec<f64>,
    ) -> Result<TopKResult> {
        self.check_user(user)?;
        check_k(k)?;
        self.score_exact_into(user, scratch);
        let (items, scores) = select_top_k(scratch, k, self.excluded(user))
            .into_iter()
            .unzip();
        Ok(TopKResult {
            items,
            scores: Scores::Float(scores),
        })
    }

    /// [`Self::topk_fast`] reusing caller-owned score buffers.
    pub fn topk_fast_with(
        &self,
        user: usize,
        k: usize,
        scratch: &mut FastScratch,
    ) -> Result<TopKResult> {
        self.check_user(user)?;
        check_k(k)?;
        let (items, scores) = self
            .fast_top_k(user, k, self.excluded(user), scratch)
            .into_iter()
            .unzip();
        Ok(TopKResult {
            items,
            scores: Scores::Integer(scores),
        })
    }

    pub fn topk(&self, user: usize, k: usize, fast: bool) -> Result<TopKResult> {
        if fast {
            self.topk_fast(user, k)
        } else {
            self.topk_exact(user, k)
        }
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(CccfError::InvalidArgument("k must be >= 1".into()));
    }
    Ok(())
}

/// Single long code per row, scored by plain Hamming inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatHammingIndex {
    users: PackedCodes,
    items: PackedCodes,
}

/// `r − 2·popcount` over rows of exactly `W` words.
fn flat_scan<const W: usize>(b: &[u64], items: &[u64], r: i32, scores: &mut [i32]) {
    let b: [u64; W] = b.try_into().expect("row width");
    for (s, d) in scores.iter_mut().zip(items.chunks_exact(W)) {
        let mut ones = 0;
        for w in 0..W {
            ones += (b[w] ^ d[w]).count_ones();
        }
        *s = r - 2 * ones as i32;
    }
}

impl FlatHammingIndex {
    pub fn new(users: PackedCodes, items: PackedCodes) -> Result<Self> {
        if users.bits() != items.bits() {
            return Err(CccfError::InvalidArgument(
                "user and item code lengths differ".into(),
            ));
        }
        Ok(FlatHammingIndex { users, items })
    }

    pub fn bits(&self) -> usize {
        self.items.bits()
    }

    pub fn score_into(&self, user: usize, scores: &mut Vec<i32>) {
        let b = self.users.row(user);
        let r = self.bits() as i32;
        let words = self.items.words();
        scores.clear();
        scores.resize(self.items.rows(), 0);
        match b.len() {
            1 => flat_scan::<1>(b, words, r, scores),
            2 => flat_scan::<2>(b, words, r, scores),
            3 => flat_scan::<3>(b, words, r, scores),
            4 => flat_scan::<4>(b, words, r, scores),
            _ => {
                for (s, d) in scores.iter_mut().zip(words.chunks_exact(b.len())) {
                    *s = binary_inner_product(b, d, self.bits());
                }
            }
        }
    }
}

/// Real-valued factors in `f32`, scored by dot product.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseFactorIndex {
    dim: usize,
    users: Vec<f32>,
    items: Vec<f32>,
}

impl DenseFactorIndex {
    pub fn new(dim: usize, users: Vec<f32>, items: Vec<f32>) -> Result<Self> {
        if dim == 0 || !users.len().is_multiple_of(dim) || !items.len().is_multiple_of(dim) {
            return Err(CccfError::InvalidArgument(
                "factor buffers do not match the dimension".into(),
            ));
        }
        Ok(DenseFactorIndex { dim, users, items })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn score_into(&self, user: usize, scores: &mut Vec<f32>) {
        let u = &self.users[user * self.dim..(user + 1) * self.dim];
        scores.clear();
        scores.extend(self.items.chunks_exact(self.dim).map(|v| dot_f32(u, v)));
    }
}

/// Eight independent partial sums so the loop vectorizes.
fn dot_f32(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f32 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f32>() + tail
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMode {
    CccfFast,
    CccfExact,
    FloatMf,
    DcfFlat,
}

impl BenchMode {
    pub fn name(self) -> &'static str {
        match self {
            BenchMode::CccfFast => "cccf-fast",
            BenchMode::CccfExact => "cccf-exact",
            BenchMode::FloatMf => "float-mf",
            BenchMode::DcfFlat => "dcf-flat",
        }
    }
}

impl std::str::FromStr for BenchMode {
    type Err = CccfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cccf-fast" => Ok(BenchMode::CccfFast),
            "cccf-exact" => Ok(BenchMode::CccfExact),
            "float-mf" => Ok(BenchMode::FloatMf),
            "dcf-flat" => Ok(BenchMode::DcfFlat),
            other => Err(CccfError::InvalidArgument(format!(
                "unknown benchmark mode `{other}`"
            ))),
        }
    }
}

/// Something that can be timed as a full top-k scan.
pub enum BenchTarget<'a> {
    Cccf {
        index: &'a RetrievalIndex,
        fast: bool,
    },
    Flat(&'a FlatHammingIndex),
    Dense(&'a DenseFactorIndex),
}

impl BenchTarget<'_> {
    pub fn mode(&self) -> BenchMode {
        match self {
            BenchTarget::Cccf { fast: true, .. } => BenchMode::CccfFast,
            BenchTarget::Cccf { fast: false, .. } => BenchMode::CccfExact,
            BenchTarget::Flat(_) => BenchMode::DcfFlat,
            BenchTarget::Dense(_) => BenchMode::FloatMf,
        }
    }

    fn items(&self) -> usize {
        match self {
            BenchTarget::Cccf { index, .. } => index.items(),
            BenchTarget::Flat(f) => f.items.rows(),
            BenchTarget::Dense(d) => d.items.len() / d.dim,
        }
    }

    /// Bits (or float dimensions) per row.
    fn total_bits(&self) -> usize {
        match self {
            BenchTarget::Cccf { index, .. } => index.g() * index.r(),
            BenchTarget::Flat(f) => f.bits(),
            BenchTarget::Dense(d) => d.dim,
        }
    }

    /// Nonzero component weights touched per scored item.
    fn nnz_w(&self, user: usize) -> f64 {
        match self {
            BenchTarget::Cccf { index, fast } => {
                index.scan_entries(user, *fast) as f64 / index.items().max(1) as f64
            }
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub mode: BenchMode,
    pub users: usize,
    pub items: usize,
    pub total_bits: usize,
    pub nnz_w_mean: f64,
    pub seconds_total: f64,
    pub items_per_sec: f64,
}

impl BenchReport {
    pub const CSV_HEADER: &'static str =
        "mode,users,items,total_bits,nnz_w_mean,seconds_total,items_per_sec";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.4},{:.6},{:.1}",
            self.mode.name(),
            self.users,
            self.items,
            self.total_bits,
            self.nnz_w_mean,
            self.seconds_total,
            self.items_per_sec
        )
    }

    /// Mean wall-clock seconds per query.
    pub fn seconds_per_query(&self) -> f64 {
        self.seconds_total / self.users.max(1) as f64
    }
}

/// Times a full scan plus top-`k` selection for every user in `users`, on
/// the calling thread, after one untimed warm-up pass over the same users.
/// No exclusions are applied so all modes scan the same candidates.
pub fn benchmark(target: &BenchTarget<'_>, users: &[usize], k: usize) -> BenchReport {
    let mut f64s = Vec::new();
    let mut fast = FastScratch::default();
    let mut i32s = Vec::new();
    let mut f32s = Vec::new();
    let mut sink = 0usize;
    let mut run = |u: usize| -> usize {
        match target {
            BenchTarget::Cccf { index, fast: true } => index.fast_top_k(u, k, &[], &mut fast).len(),
            BenchTarget::Cccf { index, fast: false } => {
                index.score_exact_into(u, &mut f64s);
                select_top_k(&f64s, k, &[]).len()
            }
            BenchTarget::Flat(f) => {
                f.score_into(u, &mut i32s);
                select_top_k(&i32s, k, &[]).len()
            }
            BenchTarget::Dense(d) => {
                d.score_into(u, &mut f32s);
                select_top_k(&f32s, k, &[]).len()
            }
        }
    };
    for &u in users {
        sink += run(u);
    }
    let start = Instant::now();
    for &u in users {
        sink += run(u);
    }
    let seconds_total = start.elapsed().as_secs_f64();
    std::hint::black_box(sink);

    let items = target.items();
    let nnz_w_mean = if users.is_empty() {
        0.0
    } else {
        users.iter().map(|&u| target.nnz_w(u)).sum::<f64>() / users.len() as f64
    };
    BenchReport {
        mode: target.mode(),
        users: users.len(),
        items,
        total_bits: target.total_bits(),
        nnz_w_mean,
        seconds_total,
        items_per_sec: (users.len() * items) as f64 / seconds_total.max(1e-12),
    }
}
