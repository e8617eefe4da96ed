//! Eigenvalue and eigenvector of a complex square matrix.
//!
//! With `A v = λ v`, `u* A = λ u*` and `‖u‖ = ‖v‖ = 1`, the derivatives are
//!
//! ```text
//! eigenvalue:  Ȧ ↦ u* Ȧ v / (u* v)
//! eigenvector: Ȧ ↦ (π_{v⊥} (λI − A)|_{v⊥})⁻¹ π_{v⊥} Ȧ v
//! ```
//!
//! the eigenvector living in the tangent space of projective space at `v`,
//! identified with `v⊥` through an orthonormal basis `Q`.

use std::cmp::Ordering;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numlin::{self, ComplexMatrix, ComplexVector, RealVector};
use crate::ConditionMap;

use super::{closed_report, ProblemAnalysis};

/// Relative eigenvalue gap below which an eigenvalue counts as multiple.
pub const SIMPLE_GAP_TOL: f64 = 1e-8;

/// Which derivative of the eigenproblem to analyze.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenTarget {
    Eigenvalue,
    Eigenvector,
}

#[derive(Debug, Clone)]
pub struct EigenAnalysis {
    pub eigenvalue: Complex64,
    /// Unit right eigenvector, phase fixed so its largest entry is real positive.
    pub right: ComplexVector,
    /// Unit left eigenvector, phase fixed so `u* v` is real positive.
    pub left: ComplexVector,
    pub eigenvector_problem: ProblemAnalysis,
    pub eigenvalue_problem: ProblemAnalysis,
}

impl EigenAnalysis {
    pub fn target(&self, target: EigenTarget) -> &ProblemAnalysis {
        match target {
            EigenTarget::Eigenvalue => &self.eigenvalue_problem,
            EigenTarget::Eigenvector => &self.eigenvector_problem,
        }
    }
}

fn by_modulus_then_argument(a: &Complex64, b: &Complex64) -> Ordering {
    let (ma, mb) = (a.norm(), b.norm());
    if (ma - mb).abs() <= 1e-12 * ma.max(mb) {
        a.arg().total_cmp(&b.arg())
    } else {
        mb.total_cmp(&ma)
    }
}

/// Eigenvalues by descending modulus, ties broken by ascending argument.
pub fn ordered_eigenvalues(a: &ComplexMatrix) -> Result<Vec<Complex64>> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "eigenproblem needs a nonempty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = a.nrows();
    let mut eig = faer::Mat::from_fn(n, n, |i, j| a[(i, j)])
        .eigenvalues()
        .map_err(|_| Error::NonConvergence { rows: n, cols: n })?;
    eig.sort_by(by_modulus_then_argument);
    Ok(eig)
}

struct Triplet {
    lambda: Complex64,
    v: ComplexVector,
    u: ComplexVector,
}

/// Newton refinement of an eigentriplet near `lambda` via the smallest
/// singular triplet of `A − λI`.
fn refine_triplet(a: &ComplexMatrix, mut lambda: Complex64) -> Result<Triplet> {
    let n = a.nrows();
    let scale = numlin::frobenius_norm(a).max(f64::MIN_POSITIVE);
    let shifted = |l: Complex64| {
        let mut m = a.clone();
        for i in 0..n {
            m[(i, i)] -= l;
        }
        m
    };
    let mut dec = numlin::svd(&shifted(lambda))?;
    for _ in 0..6 {
        let u = dec.left_factor.column(n - 1);
        let v = dec.right_factor_transposed.row(n - 1).adjoint();
        let uv = u.dotc(&v);
        if uv.norm() == 0.0 {
            break;
        }
        let delta = Complex64::new(dec.singular_values[n - 1], 0.0) / uv;
        lambda += delta;
        dec = numlin::svd(&shifted(lambda))?;
        if delta.norm() <= 4.0 * f64::EPSILON * scale {
            break;
        }
    }
    let mut v: ComplexVector = dec.right_factor_transposed.row(n - 1).adjoint();
    let mut u: ComplexVector = dec.left_factor.column(n - 1).into_owned();
    let big = v
        .iter()
        .copied()
        .max_by(|x, y| x.norm().total_cmp(&y.norm()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    v *= big.conj() / big.norm();
    let uv = u.dotc(&v);
    if uv.norm() > 0.0 {
        u *= uv / uv.norm();
    }
    Ok(Triplet { lambda, v, u })
}

struct EigenSetup {
    triplet: Triplet,
    complement: ComplexMatrix,
    reduced_inv: ComplexMatrix,
}

fn setup(a: &ComplexMatrix, index: usize) -> Result<EigenSetup> {
    let eig = ordered_eigenvalues(a)?;
    let n = eig.len();
    if n < 2 {
        return Err(Error::Precondition(
            "eigenvector problem needs n >= 2".into(),
        ));
    }
    if index >= n {
        return Err(Error::IndexOutOfRange {
            index: index + 1,
            len: n,
        });
    }
    let selected = eig[index];
    let gap = eig
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != index)
        .map(|(_, l)| (l - selected).norm())
        .fold(f64::INFINITY, f64::min);
    if gap <= SIMPLE_GAP_TOL * numlin::frobenius_norm(a) {
        return Err(Error::NearMultipleEigenvalue { gap });
    }
    let triplet = refine_triplet(a, selected)?;
    let complement = numlin::orthonormal_complement_basis(&triplet.v)?;
    let mut shifted = -a.clone();
    for i in 0..n {
        shifted[(i, i)] += triplet.lambda;
    }
    let reduced = complement.adjoint() * shifted * &complement;
    let reduced_inv = numlin::checked_inverse(&reduced, "eigenvector reduced resolvent")?;
    Ok(EigenSetup {
        triplet,
        complement,
        reduced_inv,
    })
}

/// `Ȧ ↦ u* Ȧ v / (u* v)` over the basis `E_ij` (row-major).
fn eigenvalue_matrix(s: &EigenSetup) -> ComplexMatrix {
    let Triplet { u, v, .. } = &s.triplet;
    let n = v.len();
    let uv = u.dotc(v);
    ComplexMatrix::from_fn(1, n * n, |_, col| {
        let (i, j) = (col / n, col % n);
        u[i].conj() * v[j] / uv
    })
}

/// `Ȧ ↦ B⁻¹ Q* Ȧ v` with `B = Q* (λI − A) Q`.
fn eigenvector_matrix(s: &EigenSetup) -> ComplexMatrix {
    let v = &s.triplet.v;
    let n = v.len();
    // Column i of Q*: conj(Q[i, :])ᵀ.
    let bq = &s.reduced_inv * s.complement.adjoint();
    ComplexMatrix::from_fn(n - 1, n * n, |row, col| {
        let (i, j) = (col / n, col % n);
        bq[(row, i)] * v[j]
    })
}

/// Analyzes the eigenpair at position `index` of [`ordered_eigenvalues`].
pub fn build_eigen(a: &ComplexMatrix, index: usize) -> Result<EigenAnalysis> {
    let s = setup(a, index)?;
    let n = a.nrows() as f64;
    let input_norm = numlin::frobenius_norm(a);

    let vec_map = ConditionMap::from_complex(&eigenvector_matrix(&s))?;
    let inv_op = numlin::operator_norm(&s.reduced_inv)?;
    let inv_fro = numlin::frobenius_norm(&s.reduced_inv);
    let vec_closed = closed_report(inv_op, 2f64.sqrt() * inv_fro, inv_fro / n);
    let eigenvector_problem = ProblemAnalysis::assemble(vec_map, vec_closed, input_norm, 1.0)?;

    let Triplet { lambda, v, u } = &s.triplet;
    let val_map = ConditionMap::from_complex(&eigenvalue_matrix(&s))?;
    let kappa2 = u.norm() * v.norm() / u.dotc(v).norm();
    let val_closed = closed_report(kappa2, 2f64.sqrt() * kappa2, kappa2 / n);
    let eigenvalue_problem = ProblemAnalysis::assemble(val_map, val_closed, input_norm, lambda.norm())?;

    Ok(EigenAnalysis {
        eigenvalue: *lambda,
        right: v.clone(),
        left: u.clone(),
        eigenvector_problem,
        eigenvalue_problem,
    })
}

pub(crate) fn first_order_pair(
    a: &ComplexMatrix,
    index: usize,
    target: EigenTarget,
    direction: &RealVector,
    t: f64,
) -> Result<(RealVector, RealVector)> {
    let s = setup(a, index)?;
    let n = a.nrows();
    if direction.len() != 2 * n * n {
        return Err(Error::DimensionMismatch(format!(
            "direction has {} real coordinates, expected {}",
            direction.len(),
            2 * n * n
        )));
    }
    let coords = numlin::complexify_vector(direction);
    let a_dot = ComplexMatrix::from_fn(n, n, |i, j| coords[i * n + j]);
    let a_t = a + a_dot.scale(t);

    let Triplet { lambda, v, u } = &s.triplet;
    let kappa2 = 1.0 / u.dotc(v).norm();
    let moved = refine_triplet(&a_t, *lambda)?;
    let bound = 10.0 * t * kappa2 * numlin::frobenius_norm(&a_dot) + 1e-12 * numlin::frobenius_norm(a);
    if (moved.lambda - lambda).norm() > bound {
        return Err(Error::TrackingFailure(format!(
            "perturbed eigenvalue moved {:e}, bound {bound:e}",
            (moved.lambda - lambda).norm()
        )));
    }

    match target {
        EigenTarget::Eigenvalue => {
            let fd = ComplexVector::from_element(1, (moved.lambda - lambda) / t);
            let dg = eigenvalue_matrix(&s) * &coords;
            Ok((numlin::realify_vector(&fd), numlin::realify_vector(&dg)))
        }
        EigenTarget::Eigenvector => {
            // Affine chart v + v⊥ around the unperturbed eigenvector.
            let scale = v.dotc(&moved.v);
            if scale.norm() < 0.5 {
                return Err(Error::TrackingFailure(
                    "perturbed eigenvector left the chart around v".into(),
                ));
            }
            let x = moved.v.unscale(1.0) / scale - v;
            let fd = (s.complement.adjoint() * x).unscale(t);
            let dg = eigenvector_matrix(&s) * &coords;
            Ok((numlin::realify_vector(&fd), numlin::realify_vector(&dg)))
        }
    }
}
