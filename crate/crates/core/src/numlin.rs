//! Dense linear algebra substrate.
//!
//! Matrices are plain `nalgebra` dense matrices over `f64` or `Complex64`.
//! Decompositions run on `faer` in sequential mode, so results do not depend
//! on the thread pool. Everything here is a pure function of its inputs.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RealMatrix = DMatrix<f64>;
pub type ComplexMatrix = DMatrix<Complex64>;
pub type RealVector = DVector<f64>;
pub type ComplexVector = DVector<Complex64>;

/// Scalar fields supported by the substrate: `f64` and `Complex64`.
pub trait Field: ComplexField<RealField = f64> + Copy {
    /// Real dimension of one scalar (1 for reals, 2 for complex numbers).
    const REAL_DIM: usize;

    /// Real representation of a linear map over this field.
    fn real_matrix(m: &DMatrix<Self>) -> RealMatrix;

    /// Real coordinates of a vector over this field.
    fn real_vector(v: &DVector<Self>) -> RealVector;

    /// Inverse of [`Field::real_vector`].
    fn from_real_coords(coords: &[f64]) -> DVector<Self>;

    /// Singular values (unsorted contract: nonincreasing) and, when
    /// requested, the square factors `(U, V)`.
    #[doc(hidden)]
    fn backend_svd(m: &DMatrix<Self>, vectors: bool) -> Option<BackendSvd<Self>>;
}

#[doc(hidden)]
pub type BackendSvd<T> = (Vec<f64>, Option<(DMatrix<T>, DMatrix<T>)>);

macro_rules! faer_svd_impl {
    () => {
        fn backend_svd(m: &DMatrix<Self>, vectors: bool) -> Option<BackendSvd<Self>> {
            let a = faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
            if !vectors {
                return a.singular_values().ok().map(|s| (s, None));
            }
            let dec = a.svd().ok()?;
            let sv = dec.S().column_vector().iter().map(|x| ComplexField::real(*x)).collect();
            let (u, v) = (dec.U(), dec.V());
            let u = DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)]);
            let v = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)]);
            Some((sv, Some((u, v))))
        }
    };
}

impl Field for f64 {
    const REAL_DIM: usize = 1;

    fn real_matrix(m: &RealMatrix) -> RealMatrix {
        m.clone()
    }

    fn real_vector(v: &RealVector) -> RealVector {
        v.clone()
    }

    fn from_real_coords(coords: &[f64]) -> RealVector {
        RealVector::from_column_slice(coords)
    }

    faer_svd_impl!();
}

impl Field for Complex64 {
    const REAL_DIM: usize = 2;

    fn real_matrix(m: &ComplexMatrix) -> RealMatrix {
        realify(m)
    }

    fn real_vector(v: &ComplexVector) -> RealVector {
        realify_vector(v)
    }

    fn from_real_coords(coords: &[f64]) -> ComplexVector {
        complexify_vector(&RealVector::from_column_slice(coords))
    }

    faer_svd_impl!();
}

/// Full singular value decomposition `A = U · diag(σ) · Vᴴ`.
///
/// `left_factor` is `rows × rows`, `right_factor_transposed` is `cols × cols`
/// (the conjugate transpose for complex input). Singular values are sorted
/// nonincreasing and there are `min(rows, cols)` of them.
#[derive(Debug, Clone)]
pub struct SvdResult<T: Field> {
    pub left_factor: DMatrix<T>,
    pub singular_values: Vec<f64>,
    pub right_factor_transposed: DMatrix<T>,
}

impl<T: Field> SvdResult<T> {
    /// Right singular vectors as columns (`V`, `cols × cols`).
    pub fn right_factor(&self) -> DMatrix<T> {
        self.right_factor_transposed.adjoint()
    }

    pub fn reconstruct(&self) -> DMatrix<T> {
        let (rows, cols) = (self.left_factor.nrows(), self.right_factor_transposed.ncols());
        let mut sigma = DMatrix::<T>::zeros(rows, cols);
        for (i, s) in self.singular_values.iter().enumerate() {
            sigma[(i, i)] = T::from_real(*s);
        }
        &self.left_factor * sigma * &self.right_factor_transposed
    }
}

fn check_finite<T: Field>(m: &DMatrix<T>) -> Result<()> {
    if m.iter().all(|z| z.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Singular values only, sorted nonincreasing.
pub fn singular_values<T: Field>(m: &DMatrix<T>) -> Result<Vec<f64>> {
    check_finite(m)?;
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(Vec::new());
    }
    let (mut sv, _) = T::backend_svd(m, false).ok_or(Error::NonConvergence { rows, cols })?;
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Full SVD with square unitary factors.
pub fn svd<T: Field>(m: &DMatrix<T>) -> Result<SvdResult<T>> {
    check_finite(m)?;
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(SvdResult {
            left_factor: DMatrix::identity(rows, rows),
            singular_values: Vec::new(),
            right_factor_transposed: DMatrix::identity(cols, cols),
        });
    }
    let (singular_values, factors) =
        T::backend_svd(m, true).ok_or(Error::NonConvergence { rows, cols })?;
    let (left_factor, right) = factors.ok_or(Error::NonConvergence { rows, cols })?;
    debug_assert!(singular_values.windows(2).all(|w| w[0] >= w[1]));
    Ok(SvdResult {
        left_factor,
        singular_values,
        right_factor_transposed: right.adjoint(),
    })
}

/// Given `q` with orthonormal columns (`dim × t`), returns `dim × (dim − t)`
/// orthonormal columns spanning the orthogonal complement of `span(q)`.
///
/// Standard basis vectors are orthogonalized greedily (largest residual
/// first) with two passes of modified Gram-Schmidt, so the output is
/// deterministic for a given input.
pub fn complete_orthonormal<T: Field>(q: &DMatrix<T>) -> DMatrix<T> {
    let dim = q.nrows();
    let mut basis: Vec<DVector<T>> = q.column_iter().map(|c| c.into_owned()).collect();
    let start = basis.len();
    let mut used = vec![false; dim];

    while basis.len() < dim {
        let mut best: Option<(usize, DVector<T>, f64)> = None;
        for (i, taken) in used.iter().enumerate() {
            if *taken {
                continue;
            }
            let mut r = DVector::<T>::zeros(dim);
            r[i] = T::one();
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dotc(&r);
                    r.axpy(-c, b, T::one());
                }
            }
            let n = r.norm();
            if best.as_ref().is_none_or(|(_, _, bn)| n > *bn) {
                best = Some((i, r, n));
            }
        }
        let (i, r, n) = best.expect("complement dimension positive");
        used[i] = true;
        basis.push(r.unscale(n));
    }

    let mut out = DMatrix::<T>::zeros(dim, dim - start);
    for (j, b) in basis[start..].iter().enumerate() {
        out.set_column(j, b);
    }
    out
}

/// Orthonormal basis (as columns) of `v⊥`, the complement of a nonzero vector.
pub fn orthonormal_complement_basis<T: Field>(v: &DVector<T>) -> Result<DMatrix<T>> {
    let n = v.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Precondition(
            "complement basis needs a nonzero finite vector".into(),
        ));
    }
    let unit = DMatrix::from_column_slice(v.len(), 1, v.unscale(n).as_slice());
    Ok(complete_orthonormal(&unit))
}

/// Default numerical-rank cutoff, relative to the largest singular value.
pub fn default_rank_tol(rows: usize, cols: usize) -> f64 {
    1e-12 * rows.max(cols) as f64
}

/// Moore-Penrose pseudoinverse. Singular values below `rank_tol · σ₁` are
/// treated as zero.
pub fn pseudoinverse<T: Field>(m: &DMatrix<T>, rank_tol: f64) -> Result<DMatrix<T>> {
    if !(rank_tol > 0.0) {
        return Err(Error::Precondition("rank_tol must be positive".into()));
    }
    let (rows, cols) = m.shape();
    let dec = svd(m)?;
    let mut out = DMatrix::<T>::zeros(cols, rows);
    let Some(&s1) = dec.singular_values.first() else {
        return Ok(out);
    };
    let cutoff = rank_tol * s1;
    let v = dec.right_factor();
    for (i, &s) in dec.singular_values.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            break;
        }
        let vi = v.column(i);
        let ui = dec.left_factor.column(i);
        out += (vi * ui.adjoint()).unscale(s);
    }
    Ok(out)
}

/// Largest singular value.
pub fn operator_norm<T: Field>(m: &DMatrix<T>) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

/// Root of the sum of squared moduli of the entries.
pub fn frobenius_norm<T: Field>(m: &DMatrix<T>) -> f64 {
    m.iter().map(|z| z.modulus_squared()).sum::<f64>().sqrt()
}

/// Real representation of a complex matrix: each entry `a+bi` becomes the
/// block `[[a, −b], [b, a]]`. A complex vector `c` corresponds to the real
/// vector `(Re c₀, Im c₀, Re c₁, Im c₁, …)`.
pub fn realify(m: &ComplexMatrix) -> RealMatrix {
    let (rows, cols) = m.shape();
    RealMatrix::from_fn(2 * rows, 2 * cols, |i, j| {
        let z = m[(i / 2, j / 2)];
        match (i % 2, j % 2) {
            (0, 0) | (1, 1) => z.re,
            (0, 1) => -z.im,
            _ => z.im,
        }
    })
}

/// Interleaved real coordinates of a complex vector.
pub fn realify_vector(v: &ComplexVector) -> RealVector {
    RealVector::from_fn(2 * v.len(), |i, _| {
        let z = v[i / 2];
        if i % 2 == 0 {
            z.re
        } else {
            z.im
        }
    })
}

/// Inverse of [`realify_vector`]; `v` must have even length.
pub fn complexify_vector(v: &RealVector) -> ComplexVector {
    ComplexVector::from_fn(v.len() / 2, |i, _| Complex64::new(v[2 * i], v[2 * i + 1]))
}

pub fn to_complex(m: &RealMatrix) -> ComplexMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Inverse of a square matrix, refusing (numerically) singular input.
pub fn checked_inverse<T: Field>(m: &DMatrix<T>, what: &'static str) -> Result<DMatrix<T>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let sv = singular_values(m)?;
    let (Some(&s1), Some(&sn)) = (sv.first(), sv.last()) else {
        return Err(Error::DimensionMismatch(format!("{what}: empty matrix")));
    };
    let ratio = if s1 > 0.0 { sn / s1 } else { 0.0 };
    if ratio <= default_rank_tol(m.nrows(), m.ncols()) {
        return Err(Error::IllPosed { what, ratio });
    }
    m.clone()
        .try_inverse()
        .ok_or(Error::IllPosed { what, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_real(rows: usize, cols: usize, seed: u64) -> RealMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RealMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    fn random_complex(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    fn projector<T: Field>(b: &DMatrix<T>) -> DMatrix<T> {
        b * b.adjoint()
    }

    #[test]
    fn svd_identity_and_diagonal() {
        let s = svd(&RealMatrix::identity(3, 3)).unwrap();
        assert_eq!(s.singular_values, vec![1.0, 1.0, 1.0]);
        let d = RealMatrix::from_diagonal(&RealVector::from_vec(vec![3.0, 4.0]));
        let s = svd(&d).unwrap();
        assert!((s.singular_values[0] - 4.0).abs() < 1e-14);
        assert!((s.singular_values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn svd_reconstructs_and_factors_are_square_unitary() {
        for (r, c, seed) in [(5, 3, 1), (3, 5, 2), (7, 7, 3), (1, 4, 4), (100, 100, 5)] {
            let a = random_real(r, c, seed);
            let s = svd(&a).unwrap();
            assert_eq!(s.left_factor.shape(), (r, r));
            assert_eq!(s.right_factor_transposed.shape(), (c, c));
            let err = frobenius_norm(&(s.reconstruct() - &a));
            assert!(err <= 1e-10 * frobenius_norm(&a), "{r}x{c}: {err}");
            let uu = s.left_factor.adjoint() * &s.left_factor;
            assert!(frobenius_norm(&(uu - RealMatrix::identity(r, r))) < 1e-12);
            let vv = &s.right_factor_transposed * s.right_factor_transposed.adjoint();
            assert!(frobenius_norm(&(vv - RealMatrix::identity(c, c))) < 1e-12);
            assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn complex_svd_reconstructs() {
        let a = random_complex(4, 6, 9);
        let s = svd(&a).unwrap();
        let err = frobenius_norm(&(s.reconstruct() - &a));
        assert!(err <= 1e-10 * frobenius_norm(&a));
    }

    #[test]
    fn pseudoinverse_diagonal_identity_and_zero() {
        let d = RealMatrix::from_diagonal(&RealVector::from_vec(vec![2.0, 0.0]));
        let p = pseudoinverse(&d, default_rank_tol(2, 2)).unwrap();
        let want = RealMatrix::from_diagonal(&RealVector::from_vec(vec![0.5, 0.0]));
        assert!(frobenius_norm(&(p - want)) < 1e-15);

        let i = RealMatrix::identity(3, 3);
        assert!(frobenius_norm(&(pseudoinverse(&i, 1e-12).unwrap() - &i)) < 1e-15);

        let z = RealMatrix::zeros(2, 3);
        let pz = pseudoinverse(&z, 1e-12).unwrap();
        assert_eq!(pz.shape(), (3, 2));
        assert_eq!(frobenius_norm(&pz), 0.0);

        assert!(matches!(pseudoinverse(&i, 0.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn pseudoinverse_penrose_identities_rank_deficient() {
        let a = random_real(4, 3, 11) * random_real(3, 6, 12);
        let p = pseudoinverse(&a, default_rank_tol(4, 6)).unwrap();
        let tol = 1e-9;
        let rel = |x: RealMatrix, y: &RealMatrix| frobenius_norm(&(x - y)) / frobenius_norm(y);
        assert!(rel(&a * &p * &a, &a) < tol);
        assert!(rel(&p * &a * &p, &p) < tol);
        let ap = &a * &p;
        assert!(rel(ap.transpose(), &ap) < tol);
        let pa = &p * &a;
        assert!(rel(pa.transpose(), &pa) < tol);

        let ac = random_complex(4, 2, 13) * random_complex(2, 5, 14);
        let pc = pseudoinverse(&ac, default_rank_tol(4, 5)).unwrap();
        let e = frobenius_norm(&(&ac * &pc * &ac - &ac)) / frobenius_norm(&ac);
        assert!(e < tol);
    }

    #[test]
    fn norms() {
        let d = RealMatrix::from_diagonal(&RealVector::from_vec(vec![3.0, 4.0]));
        assert!((operator_norm(&d).unwrap() - 4.0).abs() < 1e-14);
        assert!((frobenius_norm(&d) - 5.0).abs() < 1e-14);
        let z = RealMatrix::zeros(3, 2);
        assert_eq!(operator_norm(&z).unwrap(), 0.0);
        assert_eq!(frobenius_norm(&z), 0.0);

        let a = random_real(3, 3, 21);
        let entrywise: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let from_sv = singular_values(&a)
            .unwrap()
            .iter()
            .map(|s| s * s)
            .sum::<f64>()
            .sqrt();
        assert!((frobenius_norm(&a) - entrywise).abs() <= 1e-12 * entrywise);
        assert!((from_sv - entrywise).abs() <= 1e-10 * entrywise);
    }

    #[test]
    fn realify_unit_imaginary_and_identity() {
        let i = ComplexMatrix::from_element(1, 1, Complex64::new(0.0, 1.0));
        let r = realify(&i);
        assert_eq!(r, RealMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        let sv = singular_values(&r).unwrap();
        assert!(sv.iter().all(|s| (s - 1.0).abs() < 1e-14));
        let id = to_complex(&RealMatrix::identity(2, 2));
        assert_eq!(realify(&id), RealMatrix::identity(4, 4));
    }

    #[test]
    fn realify_duplicates_spectrum() {
        let a = random_complex(3, 3, 31);
        let cs = singular_values(&a).unwrap();
        let rs = singular_values(&realify(&a)).unwrap();
        for (i, s) in cs.iter().enumerate() {
            assert!((rs[2 * i] - s).abs() < 1e-10);
            assert!((rs[2 * i + 1] - s).abs() < 1e-10);
        }
    }

    #[test]
    fn realify_matches_vector_action() {
        let a = random_complex(2, 3, 41);
        let x = random_complex(3, 1, 42).column(0).into_owned();
        let lhs = realify(&a) * realify_vector(&x);
        let rhs = realify_vector(&(&a * &x));
        assert!((lhs - rhs).norm() < 1e-13);
        assert_eq!(complexify_vector(&realify_vector(&x)), x);
    }

    #[test]
    fn complement_of_e1_and_diagonal() {
        let e1 = RealVector::from_vec(vec![1.0, 0.0, 0.0]);
        let b = orthonormal_complement_basis(&e1).unwrap();
        assert_eq!(b.shape(), (3, 2));
        let want = RealMatrix::from_diagonal(&RealVector::from_vec(vec![0.0, 1.0, 1.0]));
        assert!(frobenius_norm(&(projector(&b) - want)) < 1e-12);

        let v = RealVector::from_vec(vec![1.0, 1.0]).unscale(2f64.sqrt());
        let b = orthonormal_complement_basis(&v).unwrap();
        assert_eq!(b.ncols(), 1);
        assert!((b.column(0).norm() - 1.0).abs() < 1e-12);
        assert!(b.column(0).dot(&v).abs() < 1e-12);
    }

    #[test]
    fn complement_of_random_complex_vector() {
        let v = random_complex(4, 1, 51).column(0).into_owned();
        let b = orthonormal_complement_basis(&v).unwrap();
        let gram = b.adjoint() * &b;
        assert!(frobenius_norm(&(gram - ComplexMatrix::identity(3, 3))) < 1e-12);
        assert!((b.adjoint() * &v).norm() < 1e-12);
    }

    #[test]
    fn complement_of_zero_vector_is_rejected() {
        let z = RealVector::zeros(3);
        assert!(matches!(
            orthonormal_complement_basis(&z),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut a = RealMatrix::identity(2, 2);
        a[(0, 1)] = f64::NAN;
        assert_eq!(svd(&a).unwrap_err(), Error::NonFinite);
    }

    #[test]
    fn checked_inverse_refuses_singular() {
        let a = RealMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            checked_inverse(&a, "test"),
            Err(Error::IllPosed { .. })
        ));
    }
}
