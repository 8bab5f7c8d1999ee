//! Bit-packed ±1 codes and the compositional predictor built on them.
//!
//! A code bit `b ∈ {−1, +1}` is stored as `(b + 1) / 2`, little-endian within
//! 64-bit words. Bits past `r` in the last word are always zero, so the XOR of
//! two rows has no stray bits and `bᵀd = r − 2·popcount(b ⊕ d)`.

use nalgebra::DMatrix;

use crate::data::RatingsMatrix;
use crate::solver::{AuxOrthogonal, TrainConfig};
use crate::weights::{AnchorSet, WeightVectors};

pub const WORD_BITS: usize = 64;

pub fn words_for(r: usize) -> usize {
    r.div_ceil(WORD_BITS)
}

/// Packs a ±1 row. Any non-negative entry counts as `+1`.
pub fn pack_row(bits: &[i8]) -> Vec<u64> {
    let mut words = vec![0u64; words_for(bits.len())];
    for (q, &b) in bits.iter().enumerate() {
        if b >= 0 {
            words[q / WORD_BITS] |= 1u64 << (q % WORD_BITS);
        }
    }
    words
}

pub fn unpack_row(words: &[u64], r: usize) -> Vec<i8> {
    (0..r)
        .map(|q| {
            if words[q / WORD_BITS] >> (q % WORD_BITS) & 1 == 1 {
                1
            } else {
                -1
            }
        })
        .collect()
}

/// `aᵀb` of two packed ±1 rows of length `r`, via XOR and popcount.
#[inline]
pub fn binary_inner_product(a: &[u64], b: &[u64], r: usize) -> i32 {
    let differ: u32 = a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum();
    r as i32 - 2 * differ as i32
}

/// Dense row-major matrix of packed codes: `rows × r` bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedCodes {
    rows: usize,
    r: usize,
    stride: usize,
    words: Vec<u64>,
}

impl PackedCodes {
    /// Every bit `−1`.
    pub fn new(rows: usize, r: usize) -> Self {
        assert!(r >= 1, "code length must be >= 1");
        let stride = words_for(r);
        PackedCodes {
            rows,
            r,
            stride,
            words: vec![0; rows * stride],
        }
    }

    /// From row-major ±1 entries.
    pub fn from_signs(rows: usize, r: usize, signs: &[i8]) -> Self {
        assert_eq!(signs.len(), rows * r);
        let mut codes = PackedCodes::new(rows, r);
        for i in 0..rows {
            let packed = pack_row(&signs[i * r..(i + 1) * r]);
            codes.row_mut(i).copy_from_slice(&packed);
        }
        codes
    }

    /// From raw words. Fails if any padding bit is set.
    pub fn from_words(rows: usize, r: usize, words: Vec<u64>) -> Option<Self> {
        let stride = words_for(r);
        if r == 0 || words.len() != rows * stride {
            return None;
        }
        let tail = r % WORD_BITS;
        if tail != 0 {
            let mask = !((1u64 << tail) - 1);
            if words
                .chunks_exact(stride)
                .any(|row| row[stride - 1] & mask != 0)
            {
                return None;
            }
        }
        Some(PackedCodes {
            rows,
            r,
            stride,
            words,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn bits(&self) -> usize {
        self.r
    }

    pub fn words_per_row(&self) -> usize {
        self.stride
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.words[i * self.stride..(i + 1) * self.stride]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [u64] {
        &mut self.words[i * self.stride..(i + 1) * self.stride]
    }

    pub fn get(&self, i: usize, q: usize) -> i8 {
        if self.row(i)[q / WORD_BITS] >> (q % WORD_BITS) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    pub fn set(&mut self, i: usize, q: usize, sign: i8) {
        let word = &mut self.row_mut(i)[q / WORD_BITS];
        let mask = 1u64 << (q % WORD_BITS);
        if sign >= 0 {
            *word |= mask;
        } else {
            *word &= !mask;
        }
    }

    pub fn unpack(&self, i: usize) -> Vec<i8> {
        unpack_row(self.row(i), self.r)
    }

    /// `rows × r` matrix of ±1.0.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.r, |i, q| self.get(i, q) as f64)
    }
}

/// A trained compositional model: `G` code components per side plus weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CccfModel {
    pub user_codes: Vec<PackedCodes>,
    pub item_codes: Vec<PackedCodes>,
    pub weights: WeightVectors,
    pub anchors: AnchorSet,
    pub config: TrainConfig,
}

impl CccfModel {
    pub fn g(&self) -> usize {
        self.user_codes.len()
    }

    pub fn r(&self) -> usize {
        self.user_codes.first().map_or(0, PackedCodes::bits)
    }

    pub fn m(&self) -> usize {
        self.weights.m()
    }

    pub fn n(&self) -> usize {
        self.weights.n()
    }

    /// Weighted sum of per-component Hamming inner products, skipping any
    /// component whose user or item weight is zero.
    pub fn predict(&self, i: usize, j: usize) -> f64 {
        let r = self.r();
        let eta = self.weights.user(i);
        let xi = self.weights.item(j);
        let mut score = 0.0;
        for k in 0..eta.len() {
            if eta[k] == 0.0 || xi[k] == 0.0 {
                continue;
            }
            let ip = binary_inner_product(self.user_codes[k].row(i), self.item_codes[k].row(j), r);
            score += eta[k] * xi[k] * ip as f64;
        }
        score
    }

    /// Contribution of component `k` alone to the prediction for `(i, j)`.
    pub fn component_term(&self, i: usize, j: usize, k: usize) -> f64 {
        let w = self.weights.pair(i, j, k);
        if w == 0.0 {
            return 0.0;
        }
        w * binary_inner_product(
            self.user_codes[k].row(i),
            self.item_codes[k].row(j),
            self.r(),
        ) as f64
    }
}

pub fn predict(model: &CccfModel, i: usize, j: usize) -> f64 {
    model.predict(i, j)
}

/// `Σ_k tr(Bᵀ X)` for a packed `B` and dense `X` of equal shape.
pub fn code_trace(codes: &PackedCodes, aux: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for q in 0..codes.bits() {
        for i in 0..codes.rows() {
            total += codes.get(i, q) as f64 * aux[(i, q)];
        }
    }
    total
}

/// Squared reconstruction error over observed ratings minus the
/// `2α₁ tr(BᵀX)` and `2α₂ tr(DᵀY)` coupling terms, summed over components.
pub fn objective(
    model: &CccfModel,
    matrix: &RatingsMatrix,
    aux: &AuxOrthogonal,
    alpha1: f64,
    alpha2: f64,
) -> f64 {
    let loss: f64 = (0..matrix.m())
        .map(|i| {
            let (items, ratings) = matrix.user_row(i);
            items
                .iter()
                .zip(ratings)
                .map(|(&j, &r)| {
                    let e = r - model.predict(i, j as usize);
                    e * e
                })
                .sum::<f64>()
        })
        .sum();
    let mut coupling = 0.0;
    for k in 0..model.g() {
        coupling += 2.0 * alpha1 * code_trace(&model.user_codes[k], &aux.x[k]);
        coupling += 2.0 * alpha2 * code_trace(&model.item_codes[k], &aux.y[k]);
    }
    loss - coupling
}

/// Random codes and weights for tests; roughly `zero_frac` of the weights
/// are zero.
#[cfg(test)]
pub(crate) fn random_model(
    m: usize,
    n: usize,
    g: usize,
    r: usize,
    zero_frac: f64,
    seed: u64,
) -> CccfModel {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut codes = |rows: usize| -> Vec<PackedCodes> {
        (0..g)
            .map(|_| {
                let signs: Vec<i8> = (0..rows * r)
                    .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
                    .collect();
                PackedCodes::from_signs(rows, r, &signs)
            })
            .collect()
    };
    let user_codes = codes(m);
    let item_codes = codes(n);
    let mut weight = |len: usize| -> Vec<f64> {
        (0..len)
            .map(|_| {
                if rng.random_bool(zero_frac) {
                    0.0
                } else {
                    rng.random_range(0.01..0.75)
                }
            })
            .collect()
    };
    let users = weight(m * g);
    let items = weight(n * g);
    CccfModel {
        user_codes,
        item_codes,
        weights: WeightVectors::new(g, 0.8, users, items).unwrap(),
        anchors: AnchorSet::new(g, 1, vec![0.0; g], vec![0.0; g]).unwrap(),
        config: TrainConfig {
            g,
            r,
            ..TrainConfig::default()
        },
    }
}
