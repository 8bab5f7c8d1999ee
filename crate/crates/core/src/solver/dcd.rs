//! Bitwise discrete coordinate descent on one code row.
//!
//! For a user row `b` of component `k` with observed items `j`, pair weights
//! `w_j`, residuals `r̃_j` (rating minus every other component) and inner
//! products `s_j = bᵀd_j`, the objective restricted to bit `q` is
//! `const − 2·b_q·b̂_q` with
//!
//! ```text
//! b̂_q = Σ_j w_j r̃_j d_jq − Σ_j w_j² (s_j − b_q d_jq) d_jq + α x_q
//! ```
//!
//! so `b_q ← sgn(b̂_q)` (kept on an exact zero) never increases it and a flip
//! changes it by exactly `4·b_q·b̂_q < 0`. Item rows are symmetric.

use crate::coding::{binary_inner_product, pack_row, unpack_row};
use crate::solver::LinearTerm;

/// One observed neighbour of the row being updated.
pub(crate) struct Neighbor<'a> {
    pub code: &'a [u64],
    pub weight: f64,
    pub residual: f64,
}

pub(crate) struct RowUpdate {
    pub code: Vec<u64>,
    /// Every accepted flip, in order.
    pub flips: Vec<Flip>,
}

/// One accepted bit flip and the objective change it caused.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flip {
    pub bit: usize,
    pub delta: f64,
}

/// Sweeps bits `0..r` until a sweep flips nothing or `max_sweeps` is reached.
pub(crate) fn update_row(
    code: &[u64],
    r: usize,
    neighbors: &[Neighbor<'_>],
    aux_row: &[f64],
    alpha: f64,
    max_sweeps: usize,
    linear: LinearTerm,
) -> RowUpdate {
    let mut bits = unpack_row(code, r);
    let active: Vec<&Neighbor<'_>> = neighbors.iter().filter(|nb| nb.weight != 0.0).collect();
    let mut d = Vec::with_capacity(active.len() * r);
    let mut s = Vec::with_capacity(active.len());
    for nb in &active {
        d.extend(unpack_row(nb.code, r).into_iter().map(f64::from));
        s.push(binary_inner_product(code, nb.code, r) as f64);
    }
    let w2: Vec<f64> = active.iter().map(|nb| nb.weight * nb.weight).collect();
    let wr: Vec<f64> = active.iter().map(|nb| nb.weight * nb.residual).collect();
    let res: Vec<f64> = active.iter().map(|nb| nb.residual).collect();

    let mut flips = Vec::new();
    for _ in 0..max_sweeps {
        let mut flipped = false;
        for q in 0..r {
            let bq = bits[q] as f64;
            let mut lin_weighted = 0.0;
            let mut lin_plain = 0.0;
            let mut quad = 0.0;
            for t in 0..s.len() {
                let dq = d[t * r + q];
                lin_weighted += wr[t] * dq;
                lin_plain += res[t] * dq;
                quad += w2[t] * (s[t] - bq * dq) * dq;
            }
            let coupling = alpha * aux_row[q];
            let exact = lin_weighted - quad + coupling;
            let score = match linear {
                LinearTerm::Weighted => exact,
                LinearTerm::AsPrinted => lin_plain - quad + coupling,
            };
            if score == 0.0 || (score > 0.0) == (bq > 0.0) {
                continue;
            }
            flips.push(Flip {
                bit: q,
                delta: 4.0 * bq * exact,
            });
            bits[q] = -bits[q];
            let step = 2.0 * bits[q] as f64;
            for t in 0..s.len() {
                s[t] += step * d[t * r + q];
            }
            flipped = true;
        }
        if !flipped {
            break;
        }
    }
    RowUpdate {
        code: pack_row(&bits),
        flips,
    }
}
