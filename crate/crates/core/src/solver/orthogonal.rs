//! Closed-form maximizer of `tr(BᵀX)` subject to `1ᵀX = 0`, `XᵀX = m·I`.
//!
//! With the column-centered `B̄ = P Σ Qᵀ` (thin SVD over nonzero singular
//! values), the maximizer is `√m [P P̂][Q Q̂]ᵀ`, where `P̂` and `Q̂` complete
//! orthonormal bases orthogonal to `[P 1]` and `Q` respectively. `Q` and `Σ`
//! come from the eigendecomposition of the small `r × r` matrix `B̄ᵀB̄`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{CccfError, Result};

/// Residual norm below which a Gram–Schmidt candidate is discarded.
const GS_TOLERANCE: f64 = 1e-8;

/// Twice-applied modified Gram–Schmidt against `basis`, returning the
/// normalized residual when it is not (numerically) in their span.
fn orthogonalize(mut v: DVector<f64>, basis: &[DVector<f64>]) -> Option<DVector<f64>> {
    let start = v.norm();
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&v);
            v.axpy(-c, b, 1.0);
        }
    }
    let norm = v.norm();
    if norm <= GS_TOLERANCE * start.max(1.0) {
        return None;
    }
    Some(v / norm)
}

/// Extends `basis` with `needed` orthonormal vectors taken from `candidates`.
fn complete_basis(
    basis: &mut Vec<DVector<f64>>,
    candidates: impl Iterator<Item = DVector<f64>>,
    needed: usize,
) -> Vec<DVector<f64>> {
    let mut added = Vec::with_capacity(needed);
    for c in candidates {
        if added.len() == needed {
            break;
        }
        if let Some(v) = orthogonalize(c, basis) {
            basis.push(v.clone());
            added.push(v);
        }
    }
    added
}

/// Balanced, decorrelated matrix closest (in trace) to `codes` (`count × r`).
///
/// `component` only labels the error.
pub fn update_orthogonal(codes: &DMatrix<f64>, component: usize) -> Result<DMatrix<f64>> {
    let (m, r) = codes.shape();
    if m < r + 1 {
        return Err(CccfError::RankCollapse {
            component,
            reason: format!("{m} rows cannot hold {r} centered orthogonal columns"),
        });
    }

    let mut centered = codes.clone();
    for mut col in centered.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }

    let gram = centered.transpose() * &centered;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let top = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = 1e-10 * top.max(1.0);

    let mut q_basis: Vec<DVector<f64>> = Vec::with_capacity(r);
    let mut p_basis: Vec<DVector<f64>> = Vec::with_capacity(r + 1);
    let ones = DVector::from_element(m, 1.0 / (m as f64).sqrt());
    let mut rest = Vec::new();
    for &t in &order {
        let lambda = eig.eigenvalues[t];
        let q = eig.eigenvectors.column(t).into_owned();
        if lambda > cutoff {
            let p = &centered * &q / lambda.sqrt();
            q_basis.push(q);
            p_basis.push(p);
        } else {
            rest.push(q);
        }
    }
    let rank = q_basis.len();

    // Q̂: orthonormal complement of Q in ℝʳ.
    let q_candidates = rest
        .into_iter()
        .chain((0..r).map(|t| DVector::from_fn(r, |i, _| (i == t) as u8 as f64)));
    let q_hat = complete_basis(&mut q_basis, q_candidates, r - rank);

    // P̂: orthonormal vectors orthogonal to [P 1].
    let mut p_constraints = p_basis.clone();
    p_constraints.push(ones);
    let p_candidates = (0..m).map(|t| DVector::from_fn(m, |i, _| (i == t) as u8 as f64));
    let p_hat = complete_basis(&mut p_constraints, p_candidates, r - rank);

    if q_hat.len() != r - rank || p_hat.len() != r - rank {
        return Err(CccfError::RankCollapse {
            component,
            reason: "Gram-Schmidt ran out of independent candidates".into(),
        });
    }

    let p_full = DMatrix::from_columns(&p_basis.iter().chain(&p_hat).cloned().collect::<Vec<_>>());
    let q_full = DMatrix::from_columns(
        &q_basis[..rank]
            .iter()
            .chain(&q_hat)
            .cloned()
            .collect::<Vec<_>>(),
    );
    Ok(p_full * q_full.transpose() * (m as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_feasible(x: &DMatrix<f64>) {
        let m = x.nrows() as f64;
        for col in x.column_iter() {
            assert!(col.sum().abs() <= 1e-6 * m, "column sum {}", col.sum());
        }
        let gram = x.transpose() * x;
        for a in 0..x.ncols() {
            for b in 0..x.ncols() {
                let want = if a == b { m } else { 0.0 };
                assert!(
                    (gram[(a, b)] - want).abs() < 1e-6,
                    "gram[{a},{b}] = {}",
                    gram[(a, b)]
                );
            }
        }
    }

    #[test]
    fn balanced_single_column_is_fixed_point() {
        let b = DMatrix::from_column_slice(6, 1, &[1.0, -1.0, 1.0, -1.0, -1.0, 1.0]);
        let x = update_orthogonal(&b, 0).unwrap();
        assert!((x - &b).abs().max() < 1e-12);
    }

    #[test]
    fn random_codes_give_feasible_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let m = rng.random_range(9..40);
            let r = rng.random_range(1..8);
            let b = DMatrix::from_fn(m, r, |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
            assert_feasible(&update_orthogonal(&b, 0).unwrap());
        }
    }

    #[test]
    fn identical_rows_still_feasible() {
        let b = DMatrix::from_element(10, 3, 1.0);
        assert_feasible(&update_orthogonal(&b, 2).unwrap());
    }

    #[test]
    fn duplicated_columns_need_completion() {
        let col: Vec<f64> = (0..12)
            .map(|i| if i % 3 == 0 { 1.0 } else { -1.0 })
            .collect();
        let b = DMatrix::from_fn(12, 4, |i, _| col[i]);
        assert_feasible(&update_orthogonal(&b, 0).unwrap());
    }

    #[test]
    fn too_few_rows_is_rank_collapse() {
        let b = DMatrix::from_element(3, 3, 1.0);
        assert!(matches!(
            update_orthogonal(&b, 4),
            Err(CccfError::RankCollapse { component: 4, .. })
        ));
    }
}
