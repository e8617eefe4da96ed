//! Solving `A y = b`, with `b` fixed or perturbed together with `A`.
//!
//! Input tangent coordinates are the entries of `Ȧ` in row-major order
//! (the elementary matrices `E_ij` form an orthonormal Frobenius basis),
//! followed by the entries of `ḃ` for the general problem.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numlin::{self, Field, RealVector};
use crate::ConditionMap;

use super::{closed_report, ProblemAnalysis};

struct Solved<T: Field> {
    a_inv: DMatrix<T>,
    y: DVector<T>,
}

fn solve<T: Field>(a: &DMatrix<T>, b: &DVector<T>) -> Result<Solved<T>> {
    let n = a.nrows();
    if !a.is_square() || n == 0 {
        return Err(Error::DimensionMismatch(format!(
            "linear system needs a nonempty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has length {}, expected {n}",
            b.len()
        )));
    }
    let a_inv = numlin::checked_inverse(a, "singular coefficient matrix")?;
    let y = &a_inv * b;
    Ok(Solved { a_inv, y })
}

/// `Ȧ ↦ −A⁻¹ Ȧ y`: column `(i, j)` is `−A⁻¹ e_i · y_j`.
fn fixed_b_matrix<T: Field>(s: &Solved<T>) -> DMatrix<T> {
    let n = s.y.len();
    DMatrix::from_fn(n, n * n, |row, col| {
        let (i, j) = (col / n, col % n);
        -(s.a_inv[(row, i)] * s.y[j])
    })
}

/// `(Ȧ, ḃ) ↦ A⁻¹ (ḃ − Ȧ y)`.
fn general_matrix<T: Field>(s: &Solved<T>) -> DMatrix<T> {
    let n = s.y.len();
    let mut m = DMatrix::<T>::zeros(n, n * n + n);
    m.columns_mut(0, n * n).copy_from(&fixed_b_matrix(s));
    m.columns_mut(n * n, n).copy_from(&s.a_inv);
    m
}

pub fn build_linear_fixed_b<T: Field>(a: &DMatrix<T>, b: &DVector<T>) -> Result<ProblemAnalysis> {
    let s = solve(a, b)?;
    let n = s.y.len() as f64;
    let map = ConditionMap::new(T::real_matrix(&fixed_b_matrix(&s)))?;
    let inv_op = numlin::operator_norm(&s.a_inv)?;
    let inv_fro = numlin::frobenius_norm(&s.a_inv);
    let y_norm = s.y.norm();
    let closed = closed_report(
        inv_op * y_norm,
        (T::REAL_DIM as f64).sqrt() * inv_fro * y_norm,
        inv_fro * y_norm / n,
    );
    ProblemAnalysis::assemble(map, closed, numlin::frobenius_norm(a), y_norm)
}

pub fn build_linear_general<T: Field>(a: &DMatrix<T>, b: &DVector<T>) -> Result<ProblemAnalysis> {
    let s = solve(a, b)?;
    let n = s.y.len() as f64;
    let map = ConditionMap::new(T::real_matrix(&general_matrix(&s)))?;
    let inv_op = numlin::operator_norm(&s.a_inv)?;
    let inv_fro = numlin::frobenius_norm(&s.a_inv);
    let y_norm = s.y.norm();
    let lift = (1.0 + y_norm * y_norm).sqrt();
    let closed = closed_report(
        inv_op * lift,
        (T::REAL_DIM as f64).sqrt() * inv_fro * lift,
        inv_fro * lift / (n * n + n).sqrt(),
    );
    let input_norm = numlin::frobenius_norm(a).hypot(b.norm());
    ProblemAnalysis::assemble(map, closed, input_norm, y_norm)
}

/// Forward difference `(G(x + tẋ) − G(x)) / t` and `DG ẋ`, both in real
/// output coordinates.
pub(crate) fn first_order_pair<T: Field>(
    a: &DMatrix<T>,
    b: &DVector<T>,
    general: bool,
    direction: &RealVector,
    t: f64,
) -> Result<(RealVector, RealVector)> {
    let s = solve(a, b)?;
    let n = s.y.len();
    let matrix = if general {
        general_matrix(&s)
    } else {
        fixed_b_matrix(&s)
    };
    let coords = T::from_real_coords(direction.as_slice());
    if coords.len() != matrix.ncols() || direction.len() != coords.len() * T::REAL_DIM {
        return Err(Error::DimensionMismatch(format!(
            "direction has {} real coordinates, expected {}",
            direction.len(),
            matrix.ncols() * T::REAL_DIM
        )));
    }
    let a_dot = DMatrix::from_fn(n, n, |i, j| coords[i * n + j]);
    let step = T::from_real(t);
    let a_t = a + a_dot * step;
    let b_t = if general {
        b + coords.rows(n * n, n).into_owned() * step
    } else {
        b.clone()
    };
    let y_t = solve(&a_t, &b_t)?.y;
    let fd = T::real_vector(&(y_t - &s.y).unscale(t));
    let dg = T::real_vector(&(matrix * coords));
    Ok((fd, dg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numlin::{ComplexMatrix, ComplexVector, RealMatrix};
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn fixed_b_two_identity() {
        let a = RealMatrix::identity(2, 2) * 2.0;
        let b = RealVector::from_vec(vec![2.0, 0.0]);
        let an = build_linear_fixed_b(&a, &b).unwrap();
        assert_eq!(an.map.input_dim(), 4);
        assert_eq!(an.map.output_dim(), 2);
        assert_relative_eq!(an.engine.kappa, 0.5, max_relative = 1e-14);
        assert_relative_eq!(an.engine.kappa_frobenius, 0.5 * 2f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(an.engine.kappa_avg[&2], 0.353_553_390_593_273_8, max_relative = 1e-14);
        assert_relative_eq!(an.closed_form.kappa, an.engine.kappa, max_relative = 1e-14);
        assert_relative_eq!(an.closed_form.kappa_avg[&2], an.engine.kappa_avg[&2], max_relative = 1e-14);
    }

    #[test]
    fn fixed_b_identity_unit_rhs() {
        let a = RealMatrix::identity(4, 4);
        let mut b = RealVector::zeros(4);
        b[0] = 1.0;
        let an = build_linear_fixed_b(&a, &b).unwrap();
        assert_relative_eq!(an.engine.kappa, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn general_identity_zero_rhs() {
        let a = RealMatrix::identity(2, 2);
        let b = RealVector::zeros(2);
        let an = build_linear_general(&a, &b).unwrap();
        assert_eq!(an.map.input_dim(), 6);
        assert_relative_eq!(an.engine.kappa, 1.0, max_relative = 1e-14);
        assert_relative_eq!(
            an.engine.kappa_avg[&2],
            2f64.sqrt() / 6f64.sqrt(),
            max_relative = 1e-14
        );
        assert!(matches!(an.relative(), Err(Error::OutputAtOrigin)));
    }

    #[test]
    fn general_two_identity() {
        let a = RealMatrix::identity(2, 2) * 2.0;
        let b = RealVector::from_vec(vec![2.0, 0.0]);
        let an = build_linear_general(&a, &b).unwrap();
        assert_relative_eq!(an.engine.kappa, 0.5 * 2f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(an.closed_form.kappa, an.engine.kappa, max_relative = 1e-14);
    }

    #[test]
    fn complex_fixed_b_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut c = || Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let a = ComplexMatrix::from_fn(3, 3, |_, _| c());
        let b = ComplexVector::from_fn(3, |_, _| c());
        let an = build_linear_fixed_b(&a, &b).unwrap();
        assert_eq!(an.map.input_dim(), 18);
        assert_relative_eq!(an.engine.kappa, an.closed_form.kappa, max_relative = 1e-10);
        assert_relative_eq!(
            an.engine.kappa_frobenius,
            an.closed_form.kappa_frobenius,
            max_relative = 1e-10
        );
        assert_relative_eq!(an.engine.kappa_avg[&2], an.closed_form.kappa_avg[&2], max_relative = 1e-10);
    }

    #[test]
    fn singular_and_mismatched_inputs() {
        let a = RealMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = RealVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(
            build_linear_fixed_b(&a, &b),
            Err(Error::IllPosed { .. })
        ));
        let b3 = RealVector::zeros(3);
        assert!(matches!(
            build_linear_general(&RealMatrix::identity(2, 2), &b3),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
