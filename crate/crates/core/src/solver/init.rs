//! Relaxed warm start: real-valued `U^(k)`, `V^(k)` fitted to the weighted
//! compositional loss with trace coupling to `X^(k)`, `Y^(k)` and L2 terms,
//! then binarized with `sgn` (zero maps to `+1`).

use log::debug;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coding::PackedCodes;
use crate::data::RatingsMatrix;
use crate::error::{CccfError, Result};
use crate::solver::aux_for;
use crate::solver::{AuxOrthogonal, TrainConfig};
use crate::weights::WeightVectors;

/// Largest magnitude of the uniform random start.
const INIT_SCALE: f64 = 0.1;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Per-component real matrices, row-major `rows × r`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedFactors {
    pub r: usize,
    pub users: Vec<Vec<f64>>,
    pub items: Vec<Vec<f64>>,
}

impl RelaxedFactors {
    fn axpy(&self, step: f64, dir: &RelaxedFactors) -> RelaxedFactors {
        let comb = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.iter().zip(y).map(|(p, g)| p + step * g).collect())
                .collect()
        };
        RelaxedFactors {
            r: self.r,
            users: comb(&self.users, &dir.users),
            items: comb(&self.items, &dir.items),
        }
    }

    fn sq_norm(&self) -> f64 {
        self.users
            .iter()
            .chain(&self.items)
            .flatten()
            .map(|x| x * x)
            .sum()
    }

    fn as_matrix(rows: &[f64], r: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows.len() / r, r, rows)
    }
}

/// The relaxed objective: weighted squared loss `− 2α₁ Σ tr(UᵀX) − 2α₂ Σ tr(VᵀY)
/// + α₃ Σ‖U‖² + α₄ Σ‖V‖²`.
pub fn relaxed_objective(
    matrix: &RatingsMatrix,
    weights: &WeightVectors,
    f: &RelaxedFactors,
    aux: &AuxOrthogonal,
    config: &TrainConfig,
) -> f64 {
    relaxed_eval(matrix, weights, f, aux, config, None).0
}

/// Weighted relaxed prediction for one observed pair.
fn relaxed_predict(weights: &WeightVectors, f: &RelaxedFactors, i: usize, j: usize) -> f64 {
    let r = f.r;
    let (eta, xi) = (weights.user(i), weights.item(j));
    let mut pred = 0.0;
    for k in 0..f.users.len() {
        let w = eta[k] * xi[k];
        if w == 0.0 {
            continue;
        }
        let u = &f.users[k][i * r..(i + 1) * r];
        let v = &f.items[k][j * r..(j + 1) * r];
        pred += w * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
    pred
}

/// For every entry of the item-major storage, its position in the
/// user-major storage.
fn transpose_positions(matrix: &RatingsMatrix) -> Vec<usize> {
    let by_user = matrix.by_user();
    let mut out = Vec::with_capacity(matrix.nnz());
    for j in 0..matrix.n() {
        for &i in matrix.item_col(j).0 {
            let row = by_user.row(i as usize).0;
            let t = row
                .binary_search(&(j as u32))
                .expect("item present in user row");
            out.push(by_user.offset(i as usize) + t);
        }
    }
    out
}

fn relaxed_eval(
    matrix: &RatingsMatrix,
    weights: &WeightVectors,
    f: &RelaxedFactors,
    aux: &AuxOrthogonal,
    config: &TrainConfig,
    positions: Option<&[usize]>,
) -> (f64, Option<RelaxedFactors>) {
    let r = f.r;
    let g = f.users.len();
    let (m, n) = (matrix.m(), matrix.n());

    // e_ij = R_ij − prediction, user-major.
    let errors: Vec<f64> = (0..m)
        .into_par_iter()
        .flat_map_iter(|i| {
            let (items, ratings) = matrix.user_row(i);
            items
                .iter()
                .zip(ratings)
                .map(move |(&j, &v)| v - relaxed_predict(weights, f, i, j as usize))
        })
        .collect();
    let loss: f64 = errors.iter().map(|x| x * x).sum();

    let mut extra = 0.0;
    for k in 0..g {
        for (rows, aux_k, alpha, reg) in [
            (&f.users[k], &aux.x[k], config.alpha1, config.alpha3),
            (&f.items[k], &aux.y[k], config.alpha2, config.alpha4),
        ] {
            for row in 0..rows.len() / r {
                for q in 0..r {
                    let val = rows[row * r + q];
                    extra += -2.0 * alpha * val * aux_k[(row, q)] + reg * val * val;
                }
            }
        }
    }
    let Some(positions) = positions else {
        return (loss + extra, None);
    };

    let by_user = matrix.by_user();
    let by_item = matrix.by_item();
    let mut grad = RelaxedFactors {
        r,
        users: Vec::with_capacity(g),
        items: Vec::with_capacity(g),
    };
    for k in 0..g {
        // Row gradient: Σ −2 e w v over observed neighbours, plus the
        // coupling and L2 terms.
        let mut users = vec![0.0; m * r];
        users.par_chunks_mut(r).enumerate().for_each(|(i, gr)| {
            let eta = weights.user(i)[k];
            if eta != 0.0 {
                let base = by_user.offset(i);
                for (t, &j) in matrix.user_row(i).0.iter().enumerate() {
                    let j = j as usize;
                    let w = eta * weights.item(j)[k];
                    if w == 0.0 {
                        continue;
                    }
                    let c = -2.0 * errors[base + t] * w;
                    let v = &f.items[k][j * r..(j + 1) * r];
                    gr.iter_mut().zip(v).for_each(|(a, b)| *a += c * b);
                }
            }
            for q in 0..r {
                gr[q] += -2.0 * config.alpha1 * aux.x[k][(i, q)]
                    + 2.0 * config.alpha3 * f.users[k][i * r + q];
            }
        });
        let mut items = vec![0.0; n * r];
        items.par_chunks_mut(r).enumerate().for_each(|(j, gr)| {
            let xi = weights.item(j)[k];
            if xi != 0.0 {
                let base = by_item.offset(j);
                for (t, &i) in matrix.item_col(j).0.iter().enumerate() {
                    let i = i as usize;
                    let w = weights.user(i)[k] * xi;
                    if w == 0.0 {
                        continue;
                    }
                    let c = -2.0 * errors[positions[base + t]] * w;
                    let u = &f.users[k][i * r..(i + 1) * r];
                    gr.iter_mut().zip(u).for_each(|(a, b)| *a += c * b);
                }
            }
            for q in 0..r {
                gr[q] += -2.0 * config.alpha2 * aux.y[k][(j, q)]
                    + 2.0 * config.alpha4 * f.items[k][j * r + q];
            }
        });
        grad.users.push(users);
        grad.items.push(items);
    }
    (loss + extra, Some(grad))
}

fn refresh_aux(f: &RelaxedFactors, config: &TrainConfig) -> Result<AuxOrthogonal> {
    let mut x = Vec::with_capacity(f.users.len());
    let mut y = Vec::with_capacity(f.items.len());
    for (k, (u, v)) in f.users.iter().zip(&f.items).enumerate() {
        x.push(aux_for(
            &RelaxedFactors::as_matrix(u, f.r),
            k,
            config.alpha1,
        )?);
        y.push(aux_for(
            &RelaxedFactors::as_matrix(v, f.r),
            k,
            config.alpha2,
        )?);
    }
    Ok(AuxOrthogonal { x, y })
}

pub(crate) fn sign_codes(rows: &[f64], r: usize) -> PackedCodes {
    let signs: Vec<i8> = rows
        .iter()
        .map(|&x| if x >= 0.0 { 1 } else { -1 })
        .collect();
    PackedCodes::from_signs(rows.len() / r, r, &signs)
}

/// Output of [`init_relaxed`].
#[derive(Debug, Clone)]
pub struct RelaxedStart {
    pub user_codes: Vec<PackedCodes>,
    pub item_codes: Vec<PackedCodes>,
    pub aux: AuxOrthogonal,
    pub factors: RelaxedFactors,
    /// Relaxed objective after every block step (gradient or X/Y update).
    pub trace: Vec<f64>,
}

/// Alternates Armijo-backtracked gradient steps on `(U, V)` with closed-form
/// `X`, `Y` updates, then binarizes.
pub fn init_relaxed(
    matrix: &RatingsMatrix,
    weights: &WeightVectors,
    config: &TrainConfig,
) -> Result<RelaxedStart> {
    let (m, n, g, r) = (matrix.m(), matrix.n(), config.g, config.r);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_1a1c);
    let mut draw = |len: usize| {
        (0..len)
            .map(|_| rng.random_range(-INIT_SCALE..INIT_SCALE))
            .collect::<Vec<f64>>()
    };
    let mut f = RelaxedFactors {
        r,
        users: (0..g).map(|_| draw(m * r)).collect(),
        items: (0..g).map(|_| draw(n * r)).collect(),
    };
    let positions = transpose_positions(matrix);
    let mut aux = refresh_aux(&f, config)?;
    let mut trace = vec![relaxed_objective(matrix, weights, &f, &aux, config)];

    let mut step = 1e-3;
    for round in 0..config.init_rounds {
        for _ in 0..config.init_gd_steps {
            let (value, grad) = relaxed_eval(matrix, weights, &f, &aux, config, Some(&positions));
            let grad = grad.expect("gradient requested");
            let gnorm = grad.sq_norm();
            if !value.is_finite() || !gnorm.is_finite() {
                return Err(CccfError::Diverged(format!(
                    "relaxed objective is {value} in round {round}"
                )));
            }
            if gnorm == 0.0 {
                break;
            }
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let trial = f.axpy(-step, &grad);
                let v = relaxed_objective(matrix, weights, &trial, &aux, config);
                if v.is_finite() && v <= value - ARMIJO * step * gnorm {
                    accepted = Some((trial, v));
                    break;
                }
                step *= 0.5;
            }
            match accepted {
                Some((trial, v)) => {
                    f = trial;
                    trace.push(v);
                    step *= 2.0;
                }
                None => break,
            }
        }
        aux = refresh_aux(&f, config)?;
        trace.push(relaxed_objective(matrix, weights, &f, &aux, config));
        debug!(
            "relaxed init round {round}: objective {}",
            trace.last().unwrap()
        );
    }

    let user_codes = f.users.iter().map(|u| sign_codes(u, r)).collect();
    let item_codes = f.items.iter().map(|v| sign_codes(v, r)).collect();
    Ok(RelaxedStart {
        user_codes,
        item_codes,
        aux,
        factors: f,
        trace,
    })
}
