//! Alternating discrete optimization of compositional codes.
//!
//! Training selects anchors, derives component weights, warm-starts from the
//! relaxed problem and then repeats, for each component in turn: a DCD pass
//! over every user row, a DCD pass over every item row, and closed-form
//! refreshes of the auxiliary matrices `X^(k)`, `Y^(k)`. Each of the four
//! block updates never increases the objective.

mod dcd;
pub mod init;
pub mod orthogonal;

use std::str::FromStr;
use std::time::Instant;

use log::info;
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::coding::{binary_inner_product, objective, CccfModel, PackedCodes};
use crate::data::RatingsMatrix;
use crate::error::{CccfError, Result};
use crate::mf::LatentFactors;
use crate::weights::{
    compute_weight_vectors, select_anchors, AnchorSet, DistanceScale, WeightMode, WeightVectors,
};

pub use dcd::Flip;
use dcd::{update_row, Neighbor};
pub use init::{init_relaxed, relaxed_objective, RelaxedStart};
pub use orthogonal::update_orthogonal;

/// Which linear term drives the bit decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearTerm {
    /// `Σ w_j r̃_j d_jq`, the exact minimizer of the weighted loss.
    Weighted,
    /// `Σ r̃_j d_jq` without the pair weight. Kept for comparison only; flips
    /// are no longer guaranteed to decrease the objective.
    AsPrinted,
}

impl FromStr for LinearTerm {
    type Err = CccfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted" => Ok(LinearTerm::Weighted),
            "as-printed" => Ok(LinearTerm::AsPrinted),
            other => Err(CccfError::InvalidArgument(format!(
                "unknown linear term `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Number of code components.
    pub g: usize,
    /// Bits per component.
    pub r: usize,
    /// Coupling of user codes to `X`.
    pub alpha1: f64,
    /// Coupling of item codes to `Y`.
    pub alpha2: f64,
    /// L2 on the relaxed user factors during initialization.
    pub alpha3: f64,
    /// L2 on the relaxed item factors during initialization.
    pub alpha4: f64,
    /// Kernel bandwidth.
    pub h: f64,
    pub max_outer: usize,
    pub max_dcd_sweeps: usize,
    /// Relative objective decrease below which training stops.
    pub tol: f64,
    pub seed: u64,
    pub weight_mode: WeightMode,
    pub distance_scale: DistanceScale,
    pub linear_term: LinearTerm,
    pub init_rounds: usize,
    pub init_gd_steps: usize,
    /// Default integer weight scale for retrieval.
    pub int_scale: i64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            g: 8,
            r: 8,
            alpha1: 1.0,
            alpha2: 1.0,
            alpha3: 1.0,
            alpha4: 1.0,
            h: 0.8,
            max_outer: 10,
            max_dcd_sweeps: 5,
            tol: 1e-4,
            seed: 0,
            weight_mode: WeightMode::Kernel,
            distance_scale: DistanceScale::Radians,
            linear_term: LinearTerm::Weighted,
            init_rounds: 20,
            init_gd_steps: 20,
            int_scale: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CccfError::InvalidArgument(msg));
        if self.g == 0 || self.r == 0 {
            return bad(format!(
                "G = {} and r = {} must both be >= 1",
                self.g, self.r
            ));
        }
        if self.g > u16::MAX as usize {
            return bad(format!("G = {} exceeds {}", self.g, u16::MAX));
        }
        for (name, v) in [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("alpha3", self.alpha3),
            ("alpha4", self.alpha4),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be finite and >= 0"));
            }
        }
        if !(self.h > 0.0) {
            return bad(format!("h = {} must be > 0", self.h));
        }
        if self.int_scale < 1 {
            return bad(format!("e = {} must be >= 1", self.int_scale));
        }
        Ok(())
    }
}

/// Auxiliary real matrices `X^(k)` (`m × r`) and `Y^(k)` (`n × r`).
#[derive(Debug, Clone, PartialEq)]
pub struct AuxOrthogonal {
    pub x: Vec<DMatrix<f64>>,
    pub y: Vec<DMatrix<f64>>,
}

impl AuxOrthogonal {
    pub fn zeros(m: usize, n: usize, g: usize, r: usize) -> Self {
        AuxOrthogonal {
            x: vec![DMatrix::zeros(m, r); g],
            y: vec![DMatrix::zeros(n, r); g],
        }
    }
}

/// Orthogonal refresh, or zeros when the coupling is off and the shape
/// admits no balanced decorrelated matrix.
pub(crate) fn aux_for(codes: &DMatrix<f64>, component: usize, alpha: f64) -> Result<DMatrix<f64>> {
    match update_orthogonal(codes, component) {
        Ok(x) => Ok(x),
        Err(CccfError::RankCollapse { .. }) if alpha == 0.0 => {
            Ok(DMatrix::zeros(codes.nrows(), codes.ncols()))
        }
        Err(e) => Err(e),
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    /// `0` is the state right after initialization.
    pub iteration: usize,
    pub objective: f64,
    pub user_flips: usize,
    pub item_flips: usize,
    pub seconds: f64,
}

impl IterationLog {
    pub const CSV_HEADER: &'static str = "iteration,objective,user_flips,item_flips,seconds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.6}",
            self.iteration, self.objective, self.user_flips, self.item_flips, self.seconds
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: CccfModel,
    pub aux: AuxOrthogonal,
    pub log: Vec<IterationLog>,
    pub converged: bool,
}

/// Which side of the factorization a DCD update acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    User,
    Item,
}

/// Accepted flips of a single row update.
#[derive(Debug, Clone, PartialEq)]
pub struct DcdOutcome {
    pub flips: Vec<Flip>,
}

/// Mutable training state with block-level and row-level steps.
pub struct Trainer<'a> {
    matrix: &'a RatingsMatrix,
    model: CccfModel,
    aux: AuxOrthogonal,
}

impl<'a> Trainer<'a> {
    pub fn new(matrix: &'a RatingsMatrix, model: CccfModel, aux: AuxOrthogonal) -> Result<Self> {
        if model.m() != matrix.m() || model.n() != matrix.n() {
            return Err(CccfError::InvalidArgument(
                "model and matrix shapes differ".into(),
            ));
        }
        Ok(Trainer { matrix, model, aux })
    }

    pub fn model(&self) -> &CccfModel {
        &self.model
    }

    pub fn aux(&self) -> &AuxOrthogonal {
        &self.aux
    }

    pub fn into_parts(self) -> (CccfModel, AuxOrthogonal) {
        (self.model, self.aux)
    }

    pub fn objective(&self) -> f64 {
        objective(
            &self.model,
            self.matrix,
            &self.aux,
            self.model.config.alpha1,
            self.model.config.alpha2,
        )
    }

    /// `R_ij − Σ_{k̃ ≠ k} w_ij^(k̃) (b_i^(k̃))ᵀ d_j^(k̃)`.
    pub fn residual(&self, i: usize, j: usize, rating: f64, exclude: usize) -> f64 {
        residual(&self.model, i, j, rating, exclude)
    }

    fn user_row_update(&self, i: usize, k: usize) -> dcd::RowUpdate {
        let model = &self.model;
        let (items, ratings) = self.matrix.user_row(i);
        let eta = model.weights.user(i)[k];
        let neighbors: Vec<Neighbor<'_>> = items
            .iter()
            .zip(ratings)
            .map(|(&j, &rating)| {
                let j = j as usize;
                Neighbor {
                    code: model.item_codes[k].row(j),
                    weight: eta * model.weights.item(j)[k],
                    residual: residual(model, i, j, rating, k),
                }
            })
            .collect();
        let x = &self.aux.x[k];
        let aux_row: Vec<f64> = (0..model.r()).map(|q| x[(i, q)]).collect();
        let cfg = &model.config;
        update_row(
            model.user_codes[k].row(i),
            model.r(),
            &neighbors,
            &aux_row,
            cfg.alpha1,
            cfg.max_dcd_sweeps,
            cfg.linear_term,
        )
    }

    fn item_row_update(&self, j: usize, k: usize) -> dcd::RowUpdate {
        let model = &self.model;
        let (users, ratings) = self.matrix.item_col(j);
        let xi = model.weights.item(j)[k];
        let neighbors: Vec<Neighbor<'_>> = users
            .iter()
            .zip(ratings)
            .map(|(&i, &rating)| {
                let i = i as usize;
                Neighbor {
                    code: model.user_codes[k].row(i),
                    weight: model.weights.user(i)[k] * xi,
                    residual: residual(model, i, j, rating, k),
                }
            })
            .collect();
        let y = &self.aux.y[k];
        let aux_row: Vec<f64> = (0..model.r()).map(|q| y[(j, q)]).collect();
        let cfg = &model.config;
        update_row(
            model.item_codes[k].row(j),
            model.r(),
            &neighbors,
            &aux_row,
            cfg.alpha2,
            cfg.max_dcd_sweeps,
            cfg.linear_term,
        )
    }

    /// DCD on `b_i^(k)` with everything else fixed.
    pub fn dcd_update_user(&mut self, i: usize, k: usize) -> DcdOutcome {
        let up = self.user_row_update(i, k);
        self.model.user_codes[k]
            .row_mut(i)
            .copy_from_slice(&up.code);
        DcdOutcome { flips: up.flips }
    }

    /// DCD on `d_j^(k)` with everything else fixed.
    pub fn dcd_update_item(&mut self, j: usize, k: usize) -> DcdOutcome {
        let up = self.item_row_update(j, k);
        self.model.item_codes[k]
            .row_mut(j)
            .copy_from_slice(&up.code);
        DcdOutcome { flips: up.flips }
    }

    /// Updates every user row of component `k`. Rows are independent given
    /// the item codes, so they are computed in parallel from the same
    /// snapshot and written back afterwards.
    pub fn update_user_block(&mut self, k: usize) -> usize {
        let updates: Vec<dcd::RowUpdate> = (0..self.model.m())
            .into_par_iter()
            .map(|i| self.user_row_update(i, k))
            .collect();
        let mut flips = 0;
        for (i, up) in updates.into_iter().enumerate() {
            flips += up.flips.len();
            self.model.user_codes[k]
                .row_mut(i)
                .copy_from_slice(&up.code);
        }
        flips
    }

    pub fn update_item_block(&mut self, k: usize) -> usize {
        let updates: Vec<dcd::RowUpdate> = (0..self.model.n())
            .into_par_iter()
            .map(|j| self.item_row_update(j, k))
            .collect();
        let mut flips = 0;
        for (j, up) in updates.into_iter().enumerate() {
            flips += up.flips.len();
            self.model.item_codes[k]
                .row_mut(j)
                .copy_from_slice(&up.code);
        }
        flips
    }

    pub fn update_aux_x(&mut self, k: usize) -> Result<()> {
        self.aux.x[k] = aux_for(
            &self.model.user_codes[k].to_matrix(),
            k,
            self.model.config.alpha1,
        )?;
        Ok(())
    }

    pub fn update_aux_y(&mut self, k: usize) -> Result<()> {
        self.aux.y[k] = aux_for(
            &self.model.item_codes[k].to_matrix(),
            k,
            self.model.config.alpha2,
        )?;
        Ok(())
    }

    /// One pass over all components; returns `(user_flips, item_flips)`.
    pub fn outer_iteration(&mut self) -> Result<(usize, usize)> {
        let mut flips = (0, 0);
        for k in 0..self.model.g() {
            flips.0 += self.update_user_block(k);
            flips.1 += self.update_item_block(k);
            self.update_aux_x(k)?;
            self.update_aux_y(k)?;
        }
        Ok(flips)
    }

    /// Outer iterations until no bit flips, the relative decrease drops
    /// below `tol`, or `max_outer` passes.
    pub fn run(mut self) -> Result<TrainOutput> {
        let cfg = self.model.config.clone();
        let start = Instant::now();
        let mut prev = self.objective();
        let mut log = vec![IterationLog {
            iteration: 0,
            objective: prev,
            user_flips: 0,
            item_flips: 0,
            seconds: 0.0,
        }];
        let mut converged = false;
        for t in 1..=cfg.max_outer {
            let (uf, itf) = self.outer_iteration()?;
            let obj = self.objective();
            if !obj.is_finite() {
                return Err(CccfError::Diverged(format!(
                    "objective is {obj} at iteration {t}"
                )));
            }
            log.push(IterationLog {
                iteration: t,
                objective: obj,
                user_flips: uf,
                item_flips: itf,
                seconds: start.elapsed().as_secs_f64(),
            });
            info!("iteration {t}: objective {obj:.6} flips {uf}/{itf}");
            let rel = (prev - obj) / prev.abs().max(f64::MIN_POSITIVE);
            prev = obj;
            if uf + itf == 0 || rel < cfg.tol {
                converged = true;
                break;
            }
        }
        let (model, aux) = self.into_parts();
        Ok(TrainOutput {
            model,
            aux,
            log,
            converged,
        })
    }
}

/// Rating minus every component other than `exclude`.
pub fn residual(model: &CccfModel, i: usize, j: usize, rating: f64, exclude: usize) -> f64 {
    let r = model.r();
    let eta = model.weights.user(i);
    let xi = model.weights.item(j);
    let mut other = 0.0;
    for k in 0..eta.len() {
        if k == exclude || eta[k] == 0.0 || xi[k] == 0.0 {
            continue;
        }
        other += eta[k]
            * xi[k]
            * binary_inner_product(model.user_codes[k].row(i), model.item_codes[k].row(j), r)
                as f64;
    }
    rating - other
}

/// Anchors and weights for a configuration.
pub fn prepare_weights(
    matrix: &RatingsMatrix,
    latents: &LatentFactors,
    config: &TrainConfig,
) -> Result<(AnchorSet, WeightVectors)> {
    if latents.m() != matrix.m() || latents.n() != matrix.n() {
        return Err(CccfError::InvalidArgument(
            "latent factors do not match the rating matrix".into(),
        ));
    }
    let anchors = select_anchors(latents, config.g, config.seed)?;
    let weights = match config.weight_mode {
        WeightMode::Kernel => {
            compute_weight_vectors(latents, &anchors, config.h, config.distance_scale)?
        }
        WeightMode::Unit => WeightVectors::unit(matrix.m(), matrix.n(), config.g),
    };
    Ok((anchors, weights))
}

/// Builds the warm-started model for a configuration.
pub fn initial_state(
    matrix: &RatingsMatrix,
    anchors: AnchorSet,
    weights: WeightVectors,
    config: &TrainConfig,
) -> Result<(CccfModel, AuxOrthogonal)> {
    let start = init_relaxed(matrix, &weights, config)?;
    let model = CccfModel {
        user_codes: start.user_codes,
        item_codes: start.item_codes,
        weights,
        anchors,
        config: config.clone(),
    };
    Ok((model, start.aux))
}

/// Full training: anchors, weights, relaxed start, alternating DCD.
pub fn train(
    matrix: &RatingsMatrix,
    latents: &LatentFactors,
    config: &TrainConfig,
) -> Result<TrainOutput> {
    config.validate()?;
    let (anchors, weights) = prepare_weights(matrix, latents, config)?;
    let (model, aux) = initial_state(matrix, anchors, weights, config)?;
    Trainer::new(matrix, model, aux)?.run()
}

/// Zero-initialized code storage for `G` components.
pub fn empty_codes(rows: usize, g: usize, r: usize) -> Vec<PackedCodes> {
    (0..g).map(|_| PackedCodes::new(rows, r)).collect()
}
