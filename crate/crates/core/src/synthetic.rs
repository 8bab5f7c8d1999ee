//! Synthetic workloads for timing retrieval at sizes beyond the bundled
//! datasets: clustered latent factors, kernel weights around k-means anchors
//! computed exactly as in training, and uniformly random codes. Scan cost
//! depends on the weight sparsity and code sizes, not on the code values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::coding::{CccfModel, PackedCodes};
use crate::error::Result;
use crate::mf::LatentFactors;
use crate::retrieval::{BenchMode, BenchTarget, DenseFactorIndex, FlatHammingIndex, RetrievalIndex};
use crate::solver::TrainConfig;
use crate::weights::{compute_weight_vectors, select_anchors, DistanceScale};

/// Dimension of the generated latent space.
pub const LATENT_DIM: usize = 16;
/// Mixture components the latent points are drawn around.
pub const CLUSTERS: usize = 24;
/// Mean number of components with nonzero user and item weight, at
/// `G = 8` and [`REFERENCE_BANDWIDTH`], measured on MF factors fitted to
/// MovieLens-100K. Generated workloads are calibrated to it.
pub const TARGET_PAIR_NNZ: f64 = 4.06;
pub const REFERENCE_BANDWIDTH: f64 = 0.8;
/// Items used when calibrating.
const CALIBRATION_ITEMS: usize = 20_000;

fn gaussian(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Users and items drawn from one shared Gaussian mixture in `dim`
/// dimensions, so that both sides have cluster structure for the anchors.
/// Every center is shifted by `offset` along one common direction of length
/// `sqrt(dim)`; MF factors share such a direction (the rating mean), and a
/// larger offset means smaller angles and denser weights.
///
/// Items are drawn after users from one stream, so a smaller `n` yields a
/// prefix of the same items.
pub fn clustered_latents(m: usize, n: usize, dim: usize, offset: f64, seed: u64) -> LatentFactors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shared = gaussian(&mut rng, dim, 1.0);
    let norm = shared.iter().map(|x| x * x).sum::<f64>().sqrt();
    shared.iter_mut().for_each(|x| *x *= (dim as f64).sqrt() / norm);
    let centers: Vec<f64> = gaussian(&mut rng, CLUSTERS * dim, 1.0)
        .iter()
        .enumerate()
        .map(|(t, c)| c + offset * shared[t % dim])
        .collect();
    let mut draw = |rows: usize| -> Vec<f64> {
        let mut out = Vec::with_capacity(rows * dim);
        for _ in 0..rows {
            let c = rng.random_range(0..CLUSTERS);
            for q in 0..dim {
                let noise: f64 = rng.sample(StandardNormal);
                out.push(centers[c * dim + q] + 0.35 * noise);
            }
        }
        out
    };
    let users = draw(m);
    let items = draw(n);
    LatentFactors::new(dim, users, items).expect("finite by construction")
}

fn pair_nnz(latents: &LatentFactors, g: usize, h: f64, seed: u64) -> Result<f64> {
    let anchors = select_anchors(latents, g, seed)?;
    let weights = compute_weight_vectors(latents, &anchors, h, DistanceScale::Radians)?;
    Ok(weights.mean_pair_nnz())
}

/// Offset for which `g` anchors at [`REFERENCE_BANDWIDTH`] give `target`
/// nonzero pair weights on average, found by bisection on a sample.
pub fn calibrate_offset(m: usize, n: usize, g: usize, target: f64, seed: u64) -> Result<f64> {
    let n = n.min(CALIBRATION_ITEMS);
    let (mut lo, mut hi) = (0.0, 4.0);
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        let latents = clustered_latents(m, n, LATENT_DIM, mid, seed);
        if pair_nnz(&latents, g, REFERENCE_BANDWIDTH, seed)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Uniform ±1 codes for `g` components.
pub fn random_codes(rows: usize, g: usize, r: usize, rng: &mut impl Rng) -> Vec<PackedCodes> {
    (0..g)
        .map(|_| {
            let signs: Vec<i8> = (0..rows * r)
                .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
                .collect();
            PackedCodes::from_signs(rows, r, &signs)
        })
        .collect()
}

/// A model with kernel weights at bandwidth `h` and random codes. The
/// latents are calibrated to [`TARGET_PAIR_NNZ`] (scaled by `g / 8`) and do
/// not depend on `h`, so sweeping `h` with one seed changes only the bandwidth.
pub fn synthetic_model(
    m: usize,
    n: usize,
    g: usize,
    r: usize,
    h: f64,
    seed: u64,
) -> Result<CccfModel> {
    let target = TARGET_PAIR_NNZ * g as f64 / 8.0;
    let offset = calibrate_offset(m, n, g, target, seed)?;
    let latents = clustered_latents(m, n, LATENT_DIM, offset, seed);
    let anchors = select_anchors(&latents, g, seed)?;
    let weights = compute_weight_vectors(&latents, &anchors, h, DistanceScale::Radians)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0de);
    let user_codes = random_codes(m, g, r, &mut rng);
    let item_codes = random_codes(n, g, r, &mut rng);
    Ok(CccfModel {
        user_codes,
        item_codes,
        weights,
        anchors,
        config: TrainConfig {
            g,
            r,
            h,
            seed,
            ..TrainConfig::default()
        },
    })
}

/// Random `dim`-dimensional `f32` factors for the dense baseline.
pub fn random_f32(rows: usize, dim: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows * dim)
        .map(|_| rng.sample::<f32, _>(StandardNormal))
        .collect()
}

/// Float and flat-Hamming baselines with `dim` dimensions (bits) per row.
/// Their scan cost does not depend on the values.
pub fn random_baselines(
    users: usize,
    items: usize,
    dim: usize,
    seed: u64,
) -> Result<(DenseFactorIndex, FlatHammingIndex)> {
    let dense = DenseFactorIndex::new(
        dim,
        random_f32(users, dim, seed),
        random_f32(items, dim, seed ^ 1),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
    let user_codes = random_codes(users, 1, dim, &mut rng).remove(0);
    let item_codes = random_codes(items, 1, dim, &mut rng).remove(0);
    let flat = FlatHammingIndex::new(user_codes, item_codes)?;
    Ok((dense, flat))
}

/// A retrieval index and both baselines at equal total dimension `g * r`.
pub struct Workload {
    pub index: RetrievalIndex,
    pub dense: DenseFactorIndex,
    pub flat: FlatHammingIndex,
}

impl Workload {
    pub fn build(
        users: usize,
        items: usize,
        g: usize,
        r: usize,
        h: f64,
        e: i64,
        seed: u64,
    ) -> Result<Self> {
        let model = synthetic_model(users, items, g, r, h, seed)?;
        let index = RetrievalIndex::build(&model, e)?;
        let (dense, flat) = random_baselines(users, items, g * r, seed ^ 0xba5e)?;
        Ok(Workload { index, dense, flat })
    }

    pub fn target(&self, mode: BenchMode) -> BenchTarget<'_> {
        match mode {
            BenchMode::CccfFast => BenchTarget::Cccf {
                index: &self.index,
                fast: true,
            },
            BenchMode::CccfExact => BenchTarget::Cccf {
                index: &self.index,
                fast: false,
            },
            BenchMode::FloatMf => BenchTarget::Dense(&self.dense),
            BenchMode::DcfFlat => BenchTarget::Flat(&self.flat),
        }
    }
}
