//! Kernel of a rank-`r` complex `k × q` matrix, as a point of the
//! Grassmannian of `ℓ = q − r` planes.
//!
//! With the full SVD `A = Σ σᵢ uᵢ vᵢ*`, the tangent space of the rank-`r`
//! matrices is spanned by the `uᵢ vⱼ*` except those with `i > r` and `j > r`,
//! and the derivative is `Ȧ ↦ −A† Ȧ M`, `M = (v_{r+1} … v_q)`. Its image is
//! horizontal (`M* X = 0`), so output coordinates are `V_r* X` (`r × ℓ`).

use crate::error::{Error, Result};
use crate::numlin::{self, ComplexMatrix, ComplexVector, RealVector, SvdResult};
use crate::ConditionMap;

use num_complex::Complex64;

use super::{closed_report, ProblemAnalysis};

/// Relative singular value gap used to confirm the numerical rank.
pub const RANK_GAP_TOL: f64 = 1e-10;

struct KernelSetup {
    dec: SvdResult<Complex64>,
    rank: usize,
    pinv: ComplexMatrix,
    /// `(i, j)` index pairs of the tangent basis `uᵢ vⱼ*` (zero-based).
    tangent: Vec<(usize, usize)>,
}

impl KernelSetup {
    fn right(&self) -> ComplexMatrix {
        self.dec.right_factor()
    }

    fn kernel_basis(&self) -> ComplexMatrix {
        let q = self.dec.right_factor_transposed.nrows();
        self.right().columns(self.rank, q - self.rank).into_owned()
    }

    fn tangent_element(&self, idx: usize) -> ComplexMatrix {
        let (i, j) = self.tangent[idx];
        let u = self.dec.left_factor.column(i);
        let v = self.dec.right_factor_transposed.row(j);
        u * v
    }
}

fn setup(a: &ComplexMatrix, rank: usize) -> Result<KernelSetup> {
    let (k, q) = a.shape();
    if rank == 0 || rank >= q || rank > k {
        return Err(Error::Precondition(format!(
            "kernel problem needs 1 <= r <= k and r < q (k={k}, q={q}, r={rank})"
        )));
    }
    let dec = numlin::svd(a)?;
    let s1 = dec.singular_values[0];
    let lower = dec.singular_values[rank - 1] / s1;
    let upper = dec.singular_values.get(rank).map_or(0.0, |s| s / s1);
    if !(lower > RANK_GAP_TOL) || upper > RANK_GAP_TOL {
        return Err(Error::AmbiguousRank { rank, lower, upper });
    }
    let pinv = numlin::pseudoinverse(a, RANK_GAP_TOL)?;
    let tangent = (0..k)
        .flat_map(|i| (0..q).map(move |j| (i, j)))
        .filter(|&(i, j)| i < rank || j < rank)
        .collect();
    Ok(KernelSetup {
        dec,
        rank,
        pinv,
        tangent,
    })
}

/// Orthonormal basis of `ker A` (`q × (q − r)`).
pub fn kernel_basis(a: &ComplexMatrix, rank: usize) -> Result<ComplexMatrix> {
    Ok(setup(a, rank)?.kernel_basis())
}

fn condition_matrix(s: &KernelSetup) -> ComplexMatrix {
    let m = s.kernel_basis();
    let ell = m.ncols();
    let vr_adj = s.right().columns(0, s.rank).adjoint();
    let mut out = ComplexMatrix::zeros(s.rank * ell, s.tangent.len());
    for col in 0..s.tangent.len() {
        let x = -(&s.pinv * s.tangent_element(col) * &m);
        let y = &vr_adj * x;
        for a in 0..s.rank {
            for b in 0..ell {
                out[(a * ell + b, col)] = y[(a, b)];
            }
        }
    }
    out
}

pub fn build_kernel(a: &ComplexMatrix, rank: usize) -> Result<ProblemAnalysis> {
    let s = setup(a, rank)?;
    let (k, q) = a.shape();
    let ell = (q - rank) as f64;
    let map = ConditionMap::from_complex(&condition_matrix(&s))?;
    let pinv_op = numlin::operator_norm(&s.pinv)?;
    let pinv_fro = numlin::frobenius_norm(&s.pinv);
    let r = rank as f64;
    let closed = closed_report(
        pinv_op,
        2f64.sqrt() * ell.sqrt() * pinv_fro,
        ell.sqrt() * pinv_fro / (((k + q) as f64 - r) * r).sqrt(),
    );
    // A point of the Grassmannian carries no scale; the output norm is 1.
    ProblemAnalysis::assemble(map, closed, numlin::frobenius_norm(a), 1.0)
}

pub(crate) fn first_order_pair(
    a: &ComplexMatrix,
    rank: usize,
    direction: &RealVector,
    t: f64,
) -> Result<(RealVector, RealVector)> {
    let s = setup(a, rank)?;
    let dim = s.tangent.len();
    if direction.len() != 2 * dim {
        return Err(Error::DimensionMismatch(format!(
            "direction has {} real coordinates, expected {}",
            direction.len(),
            2 * dim
        )));
    }
    let coords: ComplexVector = numlin::complexify_vector(direction);
    let mut a_dot = ComplexMatrix::zeros(a.nrows(), a.ncols());
    for (idx, c) in coords.iter().enumerate() {
        a_dot += s.tangent_element(idx) * *c;
    }
    let a_t = a + a_dot.scale(t);
    let m = s.kernel_basis();
    let ell = m.ncols();
    let dec_t = numlin::svd(&a_t)?;
    let q = a.ncols();
    let m_t = dec_t.right_factor().columns(rank, q - rank).into_owned();

    // Graph chart: span(M_t) = span(M + X) with X horizontal.
    let overlap = m.adjoint() * &m_t;
    let overlap_inv = numlin::checked_inverse(&overlap, "perturbed kernel left the chart")
        .map_err(|_| Error::TrackingFailure("perturbed kernel is orthogonal to M".into()))?;
    let x = (&m_t - &m * &overlap) * overlap_inv;
    let y = s.right().columns(0, rank).adjoint() * x;
    let fd = ComplexVector::from_fn(rank * ell, |i, _| y[(i / ell, i % ell)] / t);
    let dg = condition_matrix(&s) * coords;
    Ok((numlin::realify_vector(&fd), numlin::realify_vector(&dg)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numlin::{to_complex, RealMatrix};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_rank(k: usize, q: usize, r: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = || Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let g1 = ComplexMatrix::from_fn(k, r, |_, _| c());
        let g2 = ComplexMatrix::from_fn(r, q, |_, _| c());
        g1 * g2
    }

    #[test]
    fn diagonal_rank_one() {
        let a = to_complex(&RealMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let an = build_kernel(&a, 1).unwrap();
        // real tangent dimension 2·((k+q)r − r²) = 6
        assert_eq!(an.map.input_dim(), 6);
        assert_relative_eq!(an.engine.kappa, 1.0, max_relative = 1e-12);
        assert_relative_eq!(an.closed_form.kappa, 1.0, max_relative = 1e-12);
        assert_relative_eq!(an.engine.kappa_frobenius, 2f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(an.engine.kappa_avg[&2], 1.0 / 3f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(an.closed_form.kappa_avg[&2], 1.0 / 3f64.sqrt(), max_relative = 1e-12);
        let m = kernel_basis(&a, 1).unwrap();
        assert!((&a * &m).norm() < 1e-14);
    }

    #[test]
    fn partial_isometry_has_unit_condition() {
        // orthonormal rows, rank 2 in C^{2×4}
        let q = numlin::svd(&random_rank(4, 4, 4, 3)).unwrap().left_factor;
        let a = q.rows(0, 2).into_owned();
        let an = build_kernel(&a, 2).unwrap();
        assert_relative_eq!(an.engine.kappa, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn random_rank_two_matches_closed_forms() {
        let a = random_rank(3, 5, 2, 7);
        let an = build_kernel(&a, 2).unwrap();
        let m = kernel_basis(&a, 2).unwrap();
        assert!((&a * &m).norm() < 1e-9);
        let gram = m.adjoint() * &m;
        assert!((gram - ComplexMatrix::identity(3, 3)).norm() < 1e-12);
        assert_eq!(an.map.input_dim(), 2 * ((3 + 5) * 2 - 4));
        assert_relative_eq!(an.engine.kappa, an.closed_form.kappa, max_relative = 1e-8);
        assert_relative_eq!(an.engine.kappa_frobenius, an.closed_form.kappa_frobenius, max_relative = 1e-8);
        assert_relative_eq!(an.engine.kappa_avg[&2], an.closed_form.kappa_avg[&2], max_relative = 1e-8);
    }

    #[test]
    fn wrong_rank_is_rejected() {
        let a = random_rank(3, 5, 2, 8);
        assert!(matches!(build_kernel(&a, 1), Err(Error::AmbiguousRank { .. })));
        assert!(matches!(build_kernel(&a, 3), Err(Error::AmbiguousRank { .. })));
        assert!(matches!(build_kernel(&a, 5), Err(Error::Precondition(_))));
    }
}
