//! Rating ingestion: parsing, min-count filtering, per-user splits and the
//! dual-indexed sparse matrix used by the per-row solvers.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::str::FromStr;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CccfError, Result};

/// Ratings outside this closed range are rejected at parse time.
pub const RATING_RANGE: (f64, f64) = (0.0, 5.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    /// `user::item::rating::timestamp`
    MovieLensDat,
    /// Header `user_id,item_id,rating[,timestamp]`.
    Csv,
}

impl FromStr for InputFormat {
    type Err = CccfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "movielens-dat" | "dat" => Ok(InputFormat::MovieLensDat),
            "csv" => Ok(InputFormat::Csv),
            other => Err(CccfError::InvalidArgument(format!(
                "unknown input format `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rating {
    pub user: String,
    pub item: String,
    pub rating: f64,
}

impl Rating {
    pub fn new(user: impl Into<String>, item: impl Into<String>, rating: f64) -> Self {
        Rating {
            user: user.into(),
            item: item.into(),
            rating,
        }
    }
}

/// Observed (user, item, rating) entries keyed by opaque id tokens.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RatingTriples {
    pub entries: Vec<Rating>,
    pub source: String,
}

impl RatingTriples {
    pub fn new(entries: Vec<Rating>, source: impl Into<String>) -> Self {
        RatingTriples {
            entries,
            source: source.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn distinct_users(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.user.as_str())
            .collect::<HashSet<_>>()
            .len()
    }

    pub fn distinct_items(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.item.as_str())
            .collect::<HashSet<_>>()
            .len()
    }

    /// Writes `user_id,item_id,rating` with a header. Readable back with [`InputFormat::Csv`].
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "user_id,item_id,rating")?;
        for e in &self.entries {
            writeln!(w, "{},{},{}", e.user, e.item, e.rating)?;
        }
        Ok(())
    }
}

fn parse_rating(field: &str, line: usize) -> Result<f64> {
    let value: f64 = field.trim().parse().map_err(|_| CccfError::Parse {
        line,
        message: format!("rating `{field}` is not a number"),
    })?;
    if !value.is_finite() || value < RATING_RANGE.0 || value > RATING_RANGE.1 {
        return Err(CccfError::Parse {
            line,
            message: format!(
                "rating {value} outside [{}, {}]",
                RATING_RANGE.0, RATING_RANGE.1
            ),
        });
    }
    Ok(value)
}

/// Parses a rating dump. Duplicate (user, item) pairs keep the last rating seen.
pub fn parse_ratings<R: BufRead>(reader: R, format: InputFormat) -> Result<RatingTriples> {
    let mut entries: Vec<Rating> = Vec::new();
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    let mut header_seen = false;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }

        let fields: Vec<&str> = match format {
            InputFormat::MovieLensDat => trimmed.split("::").collect(),
            InputFormat::Csv => {
                if !header_seen {
                    header_seen = true;
                    let cols: Vec<&str> = trimmed.split(',').map(str::trim).collect();
                    let ok = cols.len() >= 3
                        && cols.len() <= 4
                        && cols[0] == "user_id"
                        && cols[1] == "item_id"
                        && cols[2] == "rating"
                        && (cols.len() == 3 || cols[3] == "timestamp");
                    if !ok {
                        return Err(CccfError::Parse {
                            line: lineno,
                            message: "expected header `user_id,item_id,rating[,timestamp]`".into(),
                        });
                    }
                    continue;
                }
                trimmed.split(',').collect()
            }
        };

        let expected = match format {
            InputFormat::MovieLensDat => 3..=4,
            InputFormat::Csv => 3..=4,
        };
        if !expected.contains(&fields.len()) {
            return Err(CccfError::Parse {
                line: lineno,
                message: format!("expected 3 or 4 fields, found {}", fields.len()),
            });
        }
        let user = fields[0].trim();
        let item = fields[1].trim();
        if user.is_empty() || item.is_empty() {
            return Err(CccfError::Parse {
                line: lineno,
                message: "empty id".into(),
            });
        }
        let rating = parse_rating(fields[2], lineno)?;

        let key = (user.to_string(), item.to_string());
        match seen.get(&key) {
            Some(&pos) => entries[pos].rating = rating,
            None => {
                seen.insert(key, entries.len());
                entries.push(Rating::new(user, item, rating));
            }
        }
    }

    let source = match format {
        InputFormat::MovieLensDat => "movielens-dat",
        InputFormat::Csv => "csv",
    };
    Ok(RatingTriples::new(entries, source))
}

/// Drops users, then items, with fewer than `min_count` ratings, repeating
/// until both constraints hold at once.
pub fn filter_min_interactions(triples: &RatingTriples, min_count: usize) -> Result<RatingTriples> {
    if min_count == 0 {
        return Err(CccfError::InvalidArgument("min_count must be >= 1".into()));
    }
    let mut entries = triples.entries.clone();
    loop {
        let before = entries.len();

        let mut per_user: HashMap<&str, usize> = HashMap::new();
        for e in &entries {
            *per_user.entry(e.user.as_str()).or_default() += 1;
        }
        let keep_users: HashSet<String> = per_user
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .map(|(u, _)| u.to_string())
            .collect();
        entries.retain(|e| keep_users.contains(&e.user));

        let mut per_item: HashMap<&str, usize> = HashMap::new();
        for e in &entries {
            *per_item.entry(e.item.as_str()).or_default() += 1;
        }
        let keep_items: HashSet<String> = per_item
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .map(|(i, _)| i.to_string())
            .collect();
        entries.retain(|e| keep_items.contains(&e.item));

        if entries.len() == before {
            break;
        }
    }
    if entries.is_empty() {
        return Err(CccfError::EmptyAfterFilter { min_count });
    }
    Ok(RatingTriples::new(entries, triples.source.clone()))
}

/// Result of [`split_per_user`].
#[derive(Debug, Clone)]
pub struct Split {
    pub train: RatingTriples,
    pub test: RatingTriples,
    /// Test entries dropped because their item never occurs in `train`.
    pub dropped_test: usize,
}

/// Number of ratings a user with `count` ratings keeps for training.
pub fn train_count(count: usize, train_frac: f64) -> usize {
    // 0.7 * 10 is 7.000000000000001 in binary floating point.
    let raw = train_frac * count as f64;
    (raw - 1e-9).ceil().max(1.0) as usize
}

/// Seeded per-user split: each user keeps `ceil(train_frac * count)` ratings
/// for training. Entries keep their input order within each side.
pub fn split_per_user(triples: &RatingTriples, train_frac: f64, seed: u64) -> Result<Split> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(CccfError::InvalidArgument(format!(
            "train_frac {train_frac} not in (0, 1)"
        )));
    }

    let mut users: Vec<&str> = Vec::new();
    let mut rows: HashMap<&str, Vec<usize>> = HashMap::new();
    for (pos, e) in triples.entries.iter().enumerate() {
        rows.entry(e.user.as_str())
            .or_insert_with(|| {
                users.push(e.user.as_str());
                Vec::new()
            })
            .push(pos);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; triples.entries.len()];
    for user in &users {
        let mut positions = rows[user].clone();
        if positions.len() < 2 {
            return Err(CccfError::InvalidArgument(format!(
                "user `{user}` has {} rating(s); the split needs at least 2",
                positions.len()
            )));
        }
        positions.shuffle(&mut rng);
        let keep = train_count(positions.len(), train_frac);
        for &p in &positions[..keep] {
            in_train[p] = true;
        }
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (e, &t) in triples.entries.iter().zip(&in_train) {
        if t {
            train.push(e.clone());
        } else {
            test.push(e.clone());
        }
    }

    let train_items: HashSet<&str> = train.iter().map(|e| e.item.as_str()).collect();
    let before = test.len();
    test.retain(|e| train_items.contains(e.item.as_str()));
    let dropped_test = before - test.len();
    if dropped_test > 0 {
        info!("split: dropped {dropped_test} test ratings on items unseen in training");
    }

    Ok(Split {
        train: RatingTriples::new(train, triples.source.clone()),
        test: RatingTriples::new(test, triples.source.clone()),
        dropped_test,
    })
}

/// Compressed sparse rows for one orientation of the rating matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    offsets: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseRows {
    fn from_lists(lists: Vec<Vec<(u32, f64)>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        offsets.push(0);
        for mut row in lists {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                indices.push(c);
                values.push(v);
            }
            offsets.push(indices.len());
        }
        SparseRows {
            offsets,
            indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let span = self.offsets[r]..self.offsets[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    /// Position of row `r`'s first entry in the flat storage.
    pub fn offset(&self, r: usize) -> usize {
        self.offsets[r]
    }

    pub fn row_len(&self, r: usize) -> usize {
        self.offsets[r + 1] - self.offsets[r]
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

/// Ratings indexed both by user and by item with dense `0..m` / `0..n` ids.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsMatrix {
    by_user: SparseRows,
    by_item: SparseRows,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    user_lookup: HashMap<String, u32>,
    item_lookup: HashMap<String, u32>,
}

impl RatingsMatrix {
    /// Indices follow first appearance of each token.
    pub fn build(triples: &RatingTriples) -> Result<Self> {
        if triples.is_empty() {
            return Err(CccfError::InvalidArgument(
                "cannot build a matrix from no ratings".into(),
            ));
        }
        let mut user_ids = Vec::new();
        let mut item_ids = Vec::new();
        let mut user_lookup: HashMap<String, u32> = HashMap::new();
        let mut item_lookup: HashMap<String, u32> = HashMap::new();
        let mut coords = Vec::with_capacity(triples.len());
        for e in &triples.entries {
            let u = *user_lookup.entry(e.user.clone()).or_insert_with(|| {
                user_ids.push(e.user.clone());
                (user_ids.len() - 1) as u32
            });
            let i = *item_lookup.entry(e.item.clone()).or_insert_with(|| {
                item_ids.push(e.item.clone());
                (item_ids.len() - 1) as u32
            });
            coords.push((u, i, e.rating));
        }

        let mut by_user = vec![Vec::new(); user_ids.len()];
        let mut by_item = vec![Vec::new(); item_ids.len()];
        for &(u, i, r) in &coords {
            by_user[u as usize].push((i, r));
            by_item[i as usize].push((u, r));
        }

        Ok(RatingsMatrix {
            by_user: SparseRows::from_lists(by_user),
            by_item: SparseRows::from_lists(by_item),
            user_ids,
            item_ids,
            user_lookup,
            item_lookup,
        })
    }

    pub fn m(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n(&self) -> usize {
        self.item_ids.len()
    }

    pub fn nnz(&self) -> usize {
        self.by_user.nnz()
    }

    /// Items and ratings of user `i`, ordered by item index.
    pub fn user_row(&self, i: usize) -> (&[u32], &[f64]) {
        self.by_user.row(i)
    }

    /// Users and ratings of item `j`, ordered by user index.
    pub fn item_col(&self, j: usize) -> (&[u32], &[f64]) {
        self.by_item.row(j)
    }

    pub fn by_user(&self) -> &SparseRows {
        &self.by_user
    }

    pub fn by_item(&self) -> &SparseRows {
        &self.by_item
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn user_index(&self, token: &str) -> Option<usize> {
        self.user_lookup.get(token).map(|&u| u as usize)
    }

    pub fn item_index(&self, token: &str) -> Option<usize> {
        self.item_lookup.get(token).map(|&i| i as usize)
    }

    /// All `(user, item, rating)` entries in user-major order.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.m()).flat_map(move |u| {
            let (items, ratings) = self.user_row(u);
            items
                .iter()
                .zip(ratings)
                .map(move |(&i, &r)| (u, i as usize, r))
        })
    }

    /// Writes `user_index,item_index,rating` in user-major order.
    pub fn write_canonical_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "user_index,item_index,rating")?;
        for (u, i, r) in self.triples() {
            writeln!(w, "{u},{i},{r}")?;
        }
        Ok(())
    }
}

pub fn build_matrix(triples: &RatingTriples) -> Result<RatingsMatrix> {
    RatingsMatrix::build(triples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn triples(list: &[(&str, &str, f64)]) -> RatingTriples {
        RatingTriples::new(
            list.iter().map(|&(u, i, r)| Rating::new(u, i, r)).collect(),
            "test",
        )
    }

    #[test]
    fn parses_movielens_line() {
        let t = parse_ratings(
            "1::1193::5::978300760\n".as_bytes(),
            InputFormat::MovieLensDat,
        )
        .unwrap();
        assert_eq!(t.entries, vec![Rating::new("1", "1193", 5.0)]);
    }

    #[test]
    fn empty_stream_is_empty() {
        for fmt in [InputFormat::MovieLensDat, InputFormat::Csv] {
            assert!(parse_ratings("".as_bytes(), fmt).unwrap().is_empty());
        }
    }

    #[test]
    fn csv_with_and_without_timestamp() {
        let a = parse_ratings(
            "user_id,item_id,rating,timestamp\n1,2,3.5,99\n".as_bytes(),
            InputFormat::Csv,
        )
        .unwrap();
        let b = parse_ratings(
            "user_id,item_id,rating\n1,2,3.5\n".as_bytes(),
            InputFormat::Csv,
        )
        .unwrap();
        assert_eq!(a.entries, b.entries);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err =
            parse_ratings("1::2::4\n1::x\n".as_bytes(), InputFormat::MovieLensDat).unwrap_err();
        assert!(matches!(err, CccfError::Parse { line: 2, .. }), "{err}");
        let err = parse_ratings(
            "user_id,item_id,rating\n1,2,9\n".as_bytes(),
            InputFormat::Csv,
        )
        .unwrap_err();
        assert!(matches!(err, CccfError::Parse { line: 2, .. }), "{err}");
        let err = parse_ratings("uid,iid,r\n".as_bytes(), InputFormat::Csv).unwrap_err();
        assert!(matches!(err, CccfError::Parse { line: 1, .. }));
    }

    #[test]
    fn duplicates_keep_last() {
        let t = parse_ratings(
            "1::2::4::0\n1::3::1::0\n1::2::2::1\n".as_bytes(),
            InputFormat::MovieLensDat,
        )
        .unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.entries[0], Rating::new("1", "2", 2.0));
    }

    #[test]
    fn filter_with_unit_threshold_is_identity() {
        let t = triples(&[("a", "x", 1.0), ("b", "y", 2.0)]);
        assert_eq!(filter_min_interactions(&t, 1).unwrap(), t);
    }

    #[test]
    fn filter_cascade_to_empty() {
        let t = triples(&[("a", "x", 1.0), ("b", "x", 2.0), ("c", "x", 3.0)]);
        assert!(matches!(
            filter_min_interactions(&t, 2),
            Err(CccfError::EmptyAfterFilter { min_count: 2 })
        ));
    }

    /// Repeated single passes until nothing changes.
    fn filter_oracle(t: &RatingTriples, c: usize) -> HashSet<(String, String)> {
        let mut set: HashSet<(String, String)> = t
            .entries
            .iter()
            .map(|e| (e.user.clone(), e.item.clone()))
            .collect();
        loop {
            let mut uc: HashMap<String, usize> = HashMap::new();
            let mut ic: HashMap<String, usize> = HashMap::new();
            for (u, i) in &set {
                *uc.entry(u.clone()).or_default() += 1;
                *ic.entry(i.clone()).or_default() += 1;
            }
            let next: HashSet<_> = set
                .iter()
                .filter(|(u, i)| uc[u] >= c && ic[i] >= c)
                .cloned()
                .collect();
            if next == set {
                return set;
            }
            set = next;
        }
    }

    #[test]
    fn filter_chain_reaches_joint_fixed_point() {
        // i5 has a single rating; dropping it leaves u5 with one rating, then
        // i4, then u4.
        let t = triples(&[
            ("u0", "i0", 1.0),
            ("u0", "i1", 1.0),
            ("u1", "i0", 1.0),
            ("u1", "i1", 1.0),
            ("u2", "i2", 1.0),
            ("u2", "i3", 1.0),
            ("u3", "i2", 1.0),
            ("u3", "i3", 1.0),
            ("u4", "i3", 1.0),
            ("u4", "i4", 1.0),
            ("u5", "i4", 1.0),
            ("u5", "i5", 1.0),
        ]);
        let got = filter_min_interactions(&t, 2).unwrap();
        let got_set: HashSet<_> = got
            .entries
            .iter()
            .map(|e| (e.user.clone(), e.item.clone()))
            .collect();
        assert_eq!(got_set, filter_oracle(&t, 2));
        assert!(got.entries.iter().all(|e| e.user != "u4" && e.user != "u5"));
        assert_eq!(got.len(), 8);
    }

    #[test]
    fn split_counts() {
        let list: Vec<_> = (0..10)
            .map(|j| Rating::new("u", format!("i{j}"), 3.0))
            .collect();
        let mut entries = list.clone();
        // second user shares every item so nothing is dropped
        entries.extend((0..10).map(|j| Rating::new("v", format!("i{j}"), 3.0)));
        let s = split_per_user(&RatingTriples::new(entries, "t"), 0.7, 1).unwrap();
        let train_u = s.train.entries.iter().filter(|e| e.user == "u").count();
        assert_eq!(train_u, 7);
        assert_eq!(s.test.len() + s.dropped_test, 6);

        let two = triples(&[("a", "x", 1.0), ("a", "y", 2.0)]);
        let s = split_per_user(&two, 0.7, 3).unwrap();
        assert_eq!(s.train.len(), 2);
        assert_eq!(s.test.len(), 0);
    }

    #[test]
    fn split_rejects_singleton_user() {
        let t = triples(&[("a", "x", 1.0)]);
        assert!(split_per_user(&t, 0.7, 0).is_err());
        assert!(split_per_user(&t, 1.0, 0).is_err());
    }

    fn synthetic(users: usize, items: usize, per_user: usize) -> RatingTriples {
        let mut entries = Vec::new();
        for u in 0..users {
            for k in 0..per_user {
                let i = (u * 7 + k * 3) % items;
                entries.push(Rating::new(
                    format!("u{u}"),
                    format!("i{i}"),
                    ((u + k) % 5 + 1) as f64,
                ));
            }
        }
        RatingTriples::new(entries, "synthetic")
    }

    #[test]
    fn split_is_seed_deterministic() {
        let t = synthetic(100, 40, 6);
        let a = split_per_user(&t, 0.7, 11).unwrap();
        let b = split_per_user(&t, 0.7, 11).unwrap();
        let c = split_per_user(&t, 0.7, 12).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn matrix_from_single_triple() {
        let m = build_matrix(&triples(&[("7", "9", 4.0)])).unwrap();
        assert_eq!((m.m(), m.n()), (1, 1));
        assert_eq!(m.user_row(0).0.len(), 1);
        assert_eq!(m.item_col(0).0.len(), 1);
    }

    #[test]
    fn first_appearance_indexing() {
        let m = build_matrix(&triples(&[("7", "a", 1.0), ("3", "a", 2.0)])).unwrap();
        assert_eq!(m.user_index("7"), Some(0));
        assert_eq!(m.user_index("3"), Some(1));
        assert_eq!(m.user_ids(), &["7".to_string(), "3".to_string()]);
    }

    #[test]
    fn empty_matrix_is_an_error() {
        assert!(build_matrix(&RatingTriples::default()).is_err());
    }

    #[test]
    fn canonical_dump() {
        let m = build_matrix(&triples(&[("7", "a", 1.0), ("3", "b", 2.5)])).unwrap();
        let mut out = Vec::new();
        m.write_canonical_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "user_index,item_index,rating\n0,0,1\n1,1,2.5\n"
        );
    }

    fn arb_triples() -> impl Strategy<Value = RatingTriples> {
        prop::collection::vec((0u8..12, 0u8..15, 0u8..=10), 1..50).prop_map(|v| {
            let mut seen = HashSet::new();
            let entries = v
                .into_iter()
                .filter(|&(u, i, _)| seen.insert((u, i)))
                .map(|(u, i, r)| Rating::new(format!("u{u}"), format!("i{i}"), r as f64 / 2.0))
                .collect();
            RatingTriples::new(entries, "prop")
        })
    }

    proptest! {
        #[test]
        fn transpose_consistency(t in arb_triples()) {
            let m = build_matrix(&t).unwrap();
            let mut from_users: Vec<(usize, usize, u64)> =
                m.triples().map(|(u, i, r)| (u, i, r.to_bits())).collect();
            let mut from_items = Vec::new();
            for j in 0..m.n() {
                let (users, ratings) = m.item_col(j);
                for (&u, &r) in users.iter().zip(ratings) {
                    from_items.push((u as usize, j, r.to_bits()));
                }
            }
            from_users.sort();
            from_items.sort();
            prop_assert_eq!(from_users, from_items);
            prop_assert_eq!(m.nnz(), t.len());
            for u in 0..m.m() {
                prop_assert!(!m.user_row(u).0.is_empty());
                prop_assert_eq!(m.user_index(&m.user_ids()[u]), Some(u));
            }
        }

        #[test]
        fn filter_is_idempotent(t in arb_triples(), c in 1usize..4) {
            if let Ok(once) = filter_min_interactions(&t, c) {
                let twice = filter_min_interactions(&once, c).unwrap();
                prop_assert_eq!(once, twice);
            }
        }

        #[test]
        fn split_partitions_each_user(t in arb_triples(), seed in 0u64..1000) {
            let eligible = filter_min_interactions(&t, 2);
            if let Ok(t) = eligible {
                let s = split_per_user(&t, 0.7, seed).unwrap();
                prop_assert_eq!(s.train.len() + s.test.len() + s.dropped_test, t.len());
                let train: HashSet<_> = s.train.entries.iter().map(|e| (&e.user, &e.item)).collect();
                for e in &s.test.entries {
                    prop_assert!(!train.contains(&(&e.user, &e.item)));
                }
            }
        }
    }
}
