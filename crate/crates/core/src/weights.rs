//! Component weights: anchors in the MF latent space, arc-cosine distances,
//! Epanechnikov kernel weights and their integer-scaled form.

use std::str::FromStr;

use crate::error::{CccfError, Result};
use crate::kmeans::kmeans;
use crate::mf::{dot, LatentFactors};

/// Weight given to the nearest anchor of a row that no kernel reaches.
pub const FALLBACK_WEIGHT: f64 = 1e-2;

/// Peak value of the kernel, reached at distance zero.
pub const KERNEL_PEAK: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceScale {
    /// Raw `arccos` in `[0, π]`.
    Radians,
    /// `arccos / π`, in `[0, 1]`.
    Normalized,
}

impl FromStr for DistanceScale {
    type Err = CccfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "radians" => Ok(DistanceScale::Radians),
            "normalized" => Ok(DistanceScale::Normalized),
            other => Err(CccfError::InvalidArgument(format!(
                "unknown distance scale `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// Epanechnikov weights around k-means anchors.
    Kernel,
    /// Every weight is 1. With `G = 1` this is plain discrete CF.
    Unit,
}

impl FromStr for WeightMode {
    type Err = CccfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kernel" => Ok(WeightMode::Kernel),
            "unit" => Ok(WeightMode::Unit),
            other => Err(CccfError::InvalidArgument(format!(
                "unknown weight mode `{other}`"
            ))),
        }
    }
}

/// Angle between two vectors in radians; the cosine is clamped to `[-1, 1]`.
pub fn arc_cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(CccfError::InvalidArgument(format!(
            "length mismatch {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(CccfError::ZeroNorm);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0).acos())
}

/// `(3/4)(1 − d²)` for `d < h`, else 0. The parabola is clamped at 0, which
/// only matters when `h > 1`.
pub fn epanechnikov_weight(d: f64, h: f64) -> f64 {
    if d < h {
        (KERNEL_PEAK * (1.0 - d * d)).max(0.0)
    } else {
        0.0
    }
}

/// `G` user centroids and `G` item centroids in the latent space.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    g: usize,
    dim: usize,
    users: Vec<f64>,
    items: Vec<f64>,
}

impl AnchorSet {
    pub fn new(g: usize, dim: usize, users: Vec<f64>, items: Vec<f64>) -> Result<Self> {
        if users.len() != g * dim || items.len() != g * dim {
            return Err(CccfError::InvalidArgument(
                "anchor buffers do not match G × dim".into(),
            ));
        }
        if users.iter().chain(&items).any(|x| !x.is_finite()) {
            return Err(CccfError::InvalidArgument("non-finite anchor".into()));
        }
        Ok(AnchorSet {
            g,
            dim,
            users,
            items,
        })
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn user_anchor(&self, k: usize) -> &[f64] {
        &self.users[k * self.dim..(k + 1) * self.dim]
    }

    pub fn item_anchor(&self, k: usize) -> &[f64] {
        &self.items[k * self.dim..(k + 1) * self.dim]
    }

    pub fn user_data(&self) -> &[f64] {
        &self.users
    }

    pub fn item_data(&self) -> &[f64] {
        &self.items
    }
}

/// Independent k-means runs over user rows and item rows.
pub fn select_anchors(latents: &LatentFactors, g: usize, seed: u64) -> Result<AnchorSet> {
    if g == 0 || g > latents.m().min(latents.n()) {
        return Err(CccfError::InvalidArgument(format!(
            "G = {g} must be in 1..={}",
            latents.m().min(latents.n())
        )));
    }
    let dim = latents.rank();
    let users = kmeans(latents.user_data(), dim, g, seed);
    let items = kmeans(latents.item_data(), dim, g, seed.wrapping_add(1));
    AnchorSet::new(g, dim, users, items)
}

/// Per-row component weights, stored densely with zeros for absent entries.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVectors {
    g: usize,
    h: f64,
    users: Vec<f64>,
    items: Vec<f64>,
}

impl WeightVectors {
    pub fn new(g: usize, h: f64, users: Vec<f64>, items: Vec<f64>) -> Result<Self> {
        if g == 0 || !users.len().is_multiple_of(g) || !items.len().is_multiple_of(g) {
            return Err(CccfError::InvalidArgument(
                "weight buffers do not match G".into(),
            ));
        }
        if users
            .iter()
            .chain(&items)
            .any(|w| !w.is_finite() || *w < 0.0)
        {
            return Err(CccfError::InvalidArgument(
                "weights must be finite and non-negative".into(),
            ));
        }
        Ok(WeightVectors { g, h, users, items })
    }

    /// All-ones weights.
    pub fn unit(m: usize, n: usize, g: usize) -> Self {
        WeightVectors {
            g,
            h: f64::INFINITY,
            users: vec![1.0; m * g],
            items: vec![1.0; n * g],
        }
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn m(&self) -> usize {
        self.users.len() / self.g
    }

    pub fn n(&self) -> usize {
        self.items.len() / self.g
    }

    pub fn user(&self, i: usize) -> &[f64] {
        &self.users[i * self.g..(i + 1) * self.g]
    }

    pub fn item(&self, j: usize) -> &[f64] {
        &self.items[j * self.g..(j + 1) * self.g]
    }

    pub fn user_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.users[i * self.g..(i + 1) * self.g]
    }

    pub fn item_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.items[j * self.g..(j + 1) * self.g]
    }

    /// Derived pair weight `η_i^(k) · ξ_j^(k)`.
    pub fn pair(&self, i: usize, j: usize, k: usize) -> f64 {
        self.users[i * self.g + k] * self.items[j * self.g + k]
    }

    pub fn user_nnz(&self) -> usize {
        self.users.iter().filter(|&&w| w != 0.0).count()
    }

    pub fn item_nnz(&self) -> usize {
        self.items.iter().filter(|&&w| w != 0.0).count()
    }

    /// Mean number of nonzero pair weights per (user, item) pair.
    pub fn mean_pair_nnz(&self) -> f64 {
        let (m, n) = (self.m(), self.n());
        if m == 0 || n == 0 {
            return 0.0;
        }
        (0..self.g)
            .map(|k| {
                let users = (0..m)
                    .filter(|&i| self.users[i * self.g + k] != 0.0)
                    .count();
                let items = (0..n)
                    .filter(|&j| self.items[j * self.g + k] != 0.0)
                    .count();
                users as f64 * items as f64
            })
            .sum::<f64>()
            / (m as f64 * n as f64)
    }

    pub fn user_data(&self) -> &[f64] {
        &self.users
    }

    pub fn item_data(&self) -> &[f64] {
        &self.items
    }
}

fn kernel_rows(
    rows: usize,
    row: impl Fn(usize) -> Vec<f64>,
    anchor: impl Fn(usize) -> Vec<f64>,
    g: usize,
    h: f64,
    scale: DistanceScale,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; rows * g];
    let anchors: Vec<Vec<f64>> = (0..g).map(anchor).collect();
    for r in 0..rows {
        let v = row(r);
        let dists = anchors
            .iter()
            .map(|a| {
                let d = arc_cosine_distance(&v, a)?;
                Ok(match scale {
                    DistanceScale::Radians => d,
                    DistanceScale::Normalized => d / std::f64::consts::PI,
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let slot = &mut out[r * g..(r + 1) * g];
        for (w, &d) in slot.iter_mut().zip(&dists) {
            *w = epanechnikov_weight(d, h);
        }
        if slot.iter().all(|&w| w == 0.0) {
            let nearest = (0..g)
                .min_by(|&a, &b| dists[a].total_cmp(&dists[b]))
                .unwrap();
            slot[nearest] = FALLBACK_WEIGHT;
        }
    }
    Ok(out)
}

/// Kernel weights of every user and item against their anchors.
pub fn compute_weight_vectors(
    latents: &LatentFactors,
    anchors: &AnchorSet,
    h: f64,
    scale: DistanceScale,
) -> Result<WeightVectors> {
    if !(h > 0.0) {
        return Err(CccfError::InvalidArgument(format!(
            "bandwidth {h} must be > 0"
        )));
    }
    if anchors.dim() != latents.rank() {
        return Err(CccfError::InvalidArgument(
            "anchor and latent dimensions differ".into(),
        ));
    }
    let g = anchors.g();
    let users = kernel_rows(
        latents.m(),
        |i| latents.user(i).to_vec(),
        |k| anchors.user_anchor(k).to_vec(),
        g,
        h,
        scale,
    )?;
    let items = kernel_rows(
        latents.n(),
        |j| latents.item(j).to_vec(),
        |k| anchors.item_anchor(k).to_vec(),
        g,
        h,
        scale,
    )?;
    WeightVectors::new(g, h, users, items)
}

/// `round(e · w)` per entry, with zeros meaning "absent".
#[derive(Debug, Clone, PartialEq)]
pub struct IntegerWeights {
    scale: i64,
    g: usize,
    users: Vec<i64>,
    items: Vec<i64>,
}

impl IntegerWeights {
    pub fn scale(&self) -> i64 {
        self.scale
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn user(&self, i: usize) -> &[i64] {
        &self.users[i * self.g..(i + 1) * self.g]
    }

    pub fn item(&self, j: usize) -> &[i64] {
        &self.items[j * self.g..(j + 1) * self.g]
    }

    pub fn max_user(&self) -> i64 {
        self.users.iter().copied().max().unwrap_or(0)
    }

    pub fn max_item(&self) -> i64 {
        self.items.iter().copied().max().unwrap_or(0)
    }
}

/// Rounds half away from zero, the behaviour of [`f64::round`].
pub fn scale_integer_weights(weights: &WeightVectors, e: i64) -> Result<IntegerWeights> {
    if e < 1 {
        return Err(CccfError::InvalidArgument(format!(
            "scale e = {e} must be >= 1"
        )));
    }
    let scale = |w: &f64| (w * e as f64).round() as i64;
    Ok(IntegerWeights {
        scale: e,
        g: weights.g(),
        users: weights.user_data().iter().map(scale).collect(),
        items: weights.item_data().iter().map(scale).collect(),
    })
}
