//! Real-valued matrix factorization, `R ≈ U Vᵀ`, fitted by seeded SGD.
//!
//! The factors are the real-valued baseline and the latent space in which
//! anchors and user/item distances are computed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::RatingsMatrix;
use crate::error::{CccfError, Result};

/// Row-major user (`m × rank`) and item (`n × rank`) factor matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFactors {
    rank: usize,
    users: Vec<f64>,
    items: Vec<f64>,
}

impl LatentFactors {
    pub fn new(rank: usize, users: Vec<f64>, items: Vec<f64>) -> Result<Self> {
        if rank == 0 || !users.len().is_multiple_of(rank) || !items.len().is_multiple_of(rank) {
            return Err(CccfError::InvalidArgument(
                "factor buffers do not match rank".into(),
            ));
        }
        if users.iter().chain(&items).any(|x| !x.is_finite()) {
            return Err(CccfError::InvalidArgument("non-finite factor entry".into()));
        }
        Ok(LatentFactors { rank, users, items })
    }

    pub fn zeros(m: usize, n: usize, rank: usize) -> Self {
        LatentFactors {
            rank,
            users: vec![0.0; m * rank],
            items: vec![0.0; n * rank],
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn m(&self) -> usize {
        self.users.len() / self.rank
    }

    pub fn n(&self) -> usize {
        self.items.len() / self.rank
    }

    pub fn user(&self, i: usize) -> &[f64] {
        &self.users[i * self.rank..(i + 1) * self.rank]
    }

    pub fn item(&self, j: usize) -> &[f64] {
        &self.items[j * self.rank..(j + 1) * self.rank]
    }

    pub fn user_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.users[i * self.rank..(i + 1) * self.rank]
    }

    pub fn item_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.items[j * self.rank..(j + 1) * self.rank]
    }

    pub fn user_data(&self) -> &[f64] {
        &self.users
    }

    pub fn item_data(&self) -> &[f64] {
        &self.items
    }

    pub fn predict(&self, i: usize, j: usize) -> f64 {
        dot(self.user(i), self.item(j))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn predict_mf(factors: &LatentFactors, i: usize, j: usize) -> f64 {
    factors.predict(i, j)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfConfig {
    pub rank: usize,
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for MfConfig {
    fn default() -> Self {
        MfConfig {
            rank: 16,
            lambda: 0.05,
            learning_rate: 0.01,
            epochs: 60,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MfFit {
    pub factors: LatentFactors,
    /// Regularized squared loss after each epoch.
    pub epoch_objective: Vec<f64>,
}

/// `Σ (R_ij − u_iᵀv_j)² + λ (‖U‖² + ‖V‖²)` over the observed entries.
pub fn mf_objective(matrix: &RatingsMatrix, factors: &LatentFactors, lambda: f64) -> f64 {
    let loss: f64 = matrix
        .triples()
        .map(|(i, j, r)| {
            let e = r - factors.predict(i, j);
            e * e
        })
        .sum();
    let reg: f64 = factors
        .users
        .iter()
        .chain(&factors.items)
        .map(|x| x * x)
        .sum();
    loss + lambda * reg
}

/// Seeded SGD over the observed entries, reshuffled every epoch.
///
/// The L2 term is applied as a proximal shrink split evenly across a row's
/// observations, so one epoch touches each row's penalty exactly once and
/// any `lambda` stays numerically stable.
pub fn train_mf(matrix: &RatingsMatrix, config: &MfConfig) -> Result<MfFit> {
    if config.rank == 0 || config.epochs == 0 {
        return Err(CccfError::InvalidArgument(
            "rank and epochs must be >= 1".into(),
        ));
    }
    if matrix.nnz() == 0 {
        return Err(CccfError::InvalidArgument("empty rating matrix".into()));
    }
    let rank = config.rank;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut init =
        |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random_range(-0.01..0.01)).collect() };
    let users = init(matrix.m() * rank);
    let items = init(matrix.n() * rank);
    let mut factors = LatentFactors { rank, users, items };

    let mut order: Vec<(u32, u32, f64)> = matrix
        .triples()
        .map(|(i, j, r)| (i as u32, j as u32, r))
        .collect();
    let user_shrink: Vec<f64> = (0..matrix.m())
        .map(|i| {
            1.0 / (1.0 + config.learning_rate * config.lambda / matrix.user_row(i).0.len() as f64)
        })
        .collect();
    let item_shrink: Vec<f64> = (0..matrix.n())
        .map(|j| {
            1.0 / (1.0 + config.learning_rate * config.lambda / matrix.item_col(j).0.len() as f64)
        })
        .collect();

    let lr = config.learning_rate;
    let mut epoch_objective = Vec::with_capacity(config.epochs);
    let mut u_old = vec![0.0; rank];
    let mut v_old = vec![0.0; rank];
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for &(i, j, r) in &order {
            let (i, j) = (i as usize, j as usize);
            let err = r - factors.predict(i, j);
            u_old.copy_from_slice(factors.user(i));
            v_old.copy_from_slice(factors.item(j));
            let us = user_shrink[i];
            let is = item_shrink[j];
            for (uk, vk) in factors.user_mut(i).iter_mut().zip(&v_old) {
                *uk = (*uk + lr * err * vk) * us;
            }
            let v = factors.item_mut(j);
            for (vk, uk) in v.iter_mut().zip(&u_old) {
                *vk = (*vk + lr * err * uk) * is;
            }
        }
        let obj = mf_objective(matrix, &factors, config.lambda);
        if !obj.is_finite() {
            return Err(CccfError::Diverged(format!(
                "MF objective became {obj} at epoch {epoch}; lower the learning rate"
            )));
        }
        epoch_objective.push(obj);
    }
    Ok(MfFit {
        factors,
        epoch_objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_matrix, Rating, RatingTriples};
    use rand::Rng;

    fn matrix(list: &[(usize, usize, f64)]) -> RatingsMatrix {
        let entries = list
            .iter()
            .map(|&(u, i, r)| Rating::new(format!("u{u}"), format!("i{i}"), r))
            .collect();
        build_matrix(&RatingTriples::new(entries, "t")).unwrap()
    }

    #[test]
    fn single_rating_is_fitted() {
        let m = matrix(&[(0, 0, 4.0)]);
        let cfg = MfConfig {
            rank: 1,
            lambda: 0.0,
            learning_rate: 0.05,
            epochs: 2000,
            seed: 1,
        };
        let fit = train_mf(&m, &cfg).unwrap();
        assert!((fit.factors.predict(0, 0) - 4.0).abs() < 1e-2);
    }

    #[test]
    fn huge_lambda_shrinks_to_zero() {
        let m = matrix(&[(0, 0, 4.0), (0, 1, 2.0), (1, 0, 5.0)]);
        let cfg = MfConfig {
            lambda: 1e6,
            epochs: 20,
            ..MfConfig::default()
        };
        let fit = train_mf(&m, &cfg).unwrap();
        let all = fit
            .factors
            .user_data()
            .iter()
            .chain(fit.factors.item_data());
        assert!(all.into_iter().all(|x| x.abs() < 1e-2));
    }

    #[test]
    fn recovers_rank_one_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u: Vec<f64> = (0..20).map(|_| rng.random_range(0.5..1.5)).collect();
        let v: Vec<f64> = (0..20).map(|_| rng.random_range(0.5..1.5)).collect();
        let mut list = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                if rng.random_bool(0.5) {
                    list.push((i, j, u[i] * v[j]));
                }
            }
        }
        let m = matrix(&list);
        let cfg = MfConfig {
            rank: 1,
            lambda: 1e-3,
            learning_rate: 0.05,
            epochs: 600,
            seed: 2,
        };
        let fit = train_mf(&m, &cfg).unwrap();
        let sse: f64 = m
            .triples()
            .map(|(i, j, r)| (r - fit.factors.predict(i, j)).powi(2))
            .sum();
        let rmse = (sse / m.nnz() as f64).sqrt();
        assert!(rmse < 0.05, "rmse {rmse}");
    }

    #[test]
    fn predict_is_dot_product() {
        let f = LatentFactors::new(2, vec![1.0, 2.0], vec![3.0, -1.0]).unwrap();
        assert_eq!(predict_mf(&f, 0, 0), 1.0);
        assert_eq!(LatentFactors::zeros(2, 2, 3).predict(1, 1), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let users: Vec<f64> = (0..25).map(|_| rng.random_range(-1.0..1.0)).collect();
        let items: Vec<f64> = (0..25).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = LatentFactors::new(5, users.clone(), items.clone()).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let mut acc = 0.0;
                for k in 0..5 {
                    acc += users[i * 5 + k] * items[j * 5 + k];
                }
                assert_eq!(f.predict(i, j), acc);
            }
        }
    }

    fn hundred_rating_fixture() -> RatingsMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut list = Vec::new();
        let mut seen = std::collections::HashSet::new();
        while list.len() < 100 {
            let (i, j) = (rng.random_range(0..15), rng.random_range(0..20));
            if seen.insert((i, j)) {
                list.push((i, j, rng.random_range(1..=5) as f64));
            }
        }
        matrix(&list)
    }

    #[test]
    fn default_config_objective_is_monotone() {
        let m = hundred_rating_fixture();
        let fit = train_mf(&m, &MfConfig::default()).unwrap();
        for w in fit.epoch_objective.windows(2) {
            assert!(w[1] <= w[0], "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn seeded_runs_are_bitwise_identical() {
        let m = hundred_rating_fixture();
        let a = train_mf(&m, &MfConfig::default()).unwrap();
        let b = train_mf(&m, &MfConfig::default()).unwrap();
        assert_eq!(a.factors, b.factors);
    }

    #[test]
    fn divergence_is_reported() {
        let m = hundred_rating_fixture();
        let cfg = MfConfig {
            learning_rate: 50.0,
            lambda: 0.0,
            ..MfConfig::default()
        };
        assert!(matches!(train_mf(&m, &cfg), Err(CccfError::Diverged(_))));
    }
}
