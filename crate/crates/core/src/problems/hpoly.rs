//! A root `ζ ∈ P(C^{n+1})` of a square homogeneous system
//! `f = (f₁, …, f_n)`, `deg fᵢ = dᵢ`, under the Weyl metric.
//!
//! With `‖f‖_W = ‖ζ‖ = 1` and `Q` an orthonormal basis of `ζ⊥`, the
//! derivative is `ḟ ↦ −(Df(ζ) Q)⁻¹ ḟ(ζ)`. Input coordinates are taken in an
//! orthonormal basis of `f⊥` inside the Weyl coordinate space, which has
//! complex dimension `N = Σ C(dᵢ+n, n) − 1`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numlin::{self, ComplexMatrix, ComplexVector, RealVector};
use crate::ConditionMap;

use super::upoly::binomial;
use super::{closed_report, ProblemAnalysis};

/// Residual bound `‖f(ζ)‖ ≤ ROOT_TOL` for normalized `f` and `ζ`.
pub const ROOT_TOL: f64 = 1e-9;

/// Exponent vectors of degree `degree` in `nvars` variables, in
/// lexicographically decreasing order (`x₀^d` first).
pub fn monomials(nvars: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(prefix: &mut Vec<u32>, left: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
        if left == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e);
            rec(prefix, left - 1, remaining - e, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if nvars > 0 {
        rec(&mut Vec::with_capacity(nvars), nvars, degree, &mut out);
    }
    out
}

/// `d! / (α₀! ⋯ α_n!)` with `d = |α|`.
pub fn multinomial(alpha: &[u32]) -> f64 {
    let mut total = 0;
    let mut acc = 1.0;
    for &a in alpha {
        total += a;
        acc *= binomial(total, a);
    }
    acc
}

/// A homogeneous polynomial stored densely over [`monomials`].
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousPolynomial {
    nvars: usize,
    degree: u32,
    exponents: Vec<Vec<u32>>,
    coeffs: Vec<Complex64>,
}

impl HomogeneousPolynomial {
    pub fn zero(nvars: usize, degree: u32) -> Self {
        let exponents = monomials(nvars, degree);
        let coeffs = vec![Complex64::new(0.0, 0.0); exponents.len()];
        HomogeneousPolynomial {
            nvars,
            degree,
            exponents,
            coeffs,
        }
    }

    /// Builds from `(exponent, coefficient)` terms; repeated exponents add.
    pub fn from_terms(nvars: usize, degree: u32, terms: &[(Vec<u32>, Complex64)]) -> Result<Self> {
        let mut p = Self::zero(nvars, degree);
        for (alpha, c) in terms {
            let idx = p.index_of(alpha).ok_or_else(|| {
                Error::DimensionMismatch(format!(
                    "monomial {alpha:?} is not of degree {degree} in {nvars} variables"
                ))
            })?;
            p.coeffs[idx] += c;
        }
        Ok(p)
    }

    /// Builds from coefficients listed in [`monomials`] order.
    pub fn from_dense(nvars: usize, degree: u32, coeffs: Vec<Complex64>) -> Result<Self> {
        let p = Self::zero(nvars, degree);
        if coeffs.len() != p.coeffs.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficients, got {}",
                p.coeffs.len(),
                coeffs.len()
            )));
        }
        Ok(HomogeneousPolynomial { coeffs, ..p })
    }

    fn index_of(&self, alpha: &[u32]) -> Option<usize> {
        self.exponents.iter().position(|e| e.as_slice() == alpha)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    fn powers(&self, x: &ComplexVector) -> Vec<Vec<Complex64>> {
        x.iter()
            .map(|xi| {
                let mut row = Vec::with_capacity(self.degree as usize + 1);
                let mut acc = Complex64::new(1.0, 0.0);
                for _ in 0..=self.degree {
                    row.push(acc);
                    acc *= xi;
                }
                row
            })
            .collect()
    }

    fn monomial_value(pw: &[Vec<Complex64>], alpha: &[u32]) -> Complex64 {
        alpha
            .iter()
            .enumerate()
            .fold(Complex64::new(1.0, 0.0), |acc, (j, &a)| acc * pw[j][a as usize])
    }

    pub fn eval(&self, x: &ComplexVector) -> Complex64 {
        let pw = self.powers(x);
        self.exponents
            .iter()
            .zip(&self.coeffs)
            .map(|(alpha, c)| c * Self::monomial_value(&pw, alpha))
            .sum()
    }

    pub fn gradient(&self, x: &ComplexVector) -> ComplexVector {
        let pw = self.powers(x);
        let mut g = ComplexVector::zeros(self.nvars);
        for (alpha, c) in self.exponents.iter().zip(&self.coeffs) {
            for j in 0..self.nvars {
                if alpha[j] == 0 {
                    continue;
                }
                let mut beta = alpha.clone();
                beta[j] -= 1;
                g[j] += c * alpha[j] as f64 * Self::monomial_value(&pw, &beta);
            }
        }
        g
    }

    /// Coordinates in the Weyl orthonormal basis `{√multinom(α) x^α}`.
    pub fn weyl_coords(&self) -> Vec<Complex64> {
        self.exponents
            .iter()
            .zip(&self.coeffs)
            .map(|(alpha, c)| c / multinomial(alpha).sqrt())
            .collect()
    }

    pub fn weyl_norm(&self) -> f64 {
        self.weyl_coords().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        HomogeneousPolynomial {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            ..self.clone()
        }
    }
}

/// `n` homogeneous polynomials in `n + 1` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousSystem {
    polys: Vec<HomogeneousPolynomial>,
}

impl HomogeneousSystem {
    pub fn new(polys: Vec<HomogeneousPolynomial>) -> Result<Self> {
        let Some(first) = polys.first() else {
            return Err(Error::Precondition("system has no equations".into()));
        };
        let nvars = first.nvars;
        if polys.iter().any(|p| p.nvars != nvars) {
            return Err(Error::DimensionMismatch(
                "equations use different numbers of variables".into(),
            ));
        }
        if nvars != polys.len() + 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} equations in {nvars} homogeneous variables; a square system needs {}",
                polys.len(),
                polys.len() + 1
            )));
        }
        if polys.iter().any(|p| p.degree == 0) {
            return Err(Error::Precondition("degrees must be >= 1".into()));
        }
        Ok(HomogeneousSystem { polys })
    }

    pub fn polys(&self) -> &[HomogeneousPolynomial] {
        &self.polys
    }

    /// Projective dimension `n`.
    pub fn unknowns(&self) -> usize {
        self.polys.len()
    }

    pub fn nvars(&self) -> usize {
        self.polys.len() + 1
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.polys.iter().map(|p| p.degree).collect()
    }

    /// Bézout number `D = d₁ ⋯ d_n`.
    pub fn bezout(&self) -> f64 {
        self.polys.iter().map(|p| p.degree as f64).product()
    }

    /// Complex dimension `N` of the projective input space.
    pub fn projective_input_dim(&self) -> usize {
        self.polys.iter().map(|p| p.coeffs.len()).sum::<usize>() - 1
    }

    pub fn weyl_norm(&self) -> f64 {
        self.polys
            .iter()
            .map(|p| p.weyl_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        HomogeneousSystem {
            polys: self.polys.iter().map(|p| p.scaled(s)).collect(),
        }
    }

    /// The representative with `‖f‖_W = 1`.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.weyl_norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Precondition("system must be nonzero and finite".into()));
        }
        Ok(self.scaled(Complex64::new(1.0 / norm, 0.0)))
    }

    pub fn eval(&self, x: &ComplexVector) -> ComplexVector {
        ComplexVector::from_iterator(self.polys.len(), self.polys.iter().map(|p| p.eval(x)))
    }

    /// `Df(x)`, an `n × (n+1)` matrix.
    pub fn jacobian(&self, x: &ComplexVector) -> ComplexMatrix {
        let mut j = ComplexMatrix::zeros(self.polys.len(), self.nvars());
        for (i, p) in self.polys.iter().enumerate() {
            j.set_row(i, &p.gradient(x).transpose());
        }
        j
    }

    /// Concatenated Weyl coordinates of all equations.
    pub fn weyl_coords(&self) -> ComplexVector {
        let coords: Vec<Complex64> = self.polys.iter().flat_map(|p| p.weyl_coords()).collect();
        ComplexVector::from_vec(coords)
    }

    fn with_weyl_coords(&self, coords: &ComplexVector) -> Self {
        let mut offset = 0;
        let polys = self
            .polys
            .iter()
            .map(|p| {
                let coeffs = p
                    .exponents
                    .iter()
                    .enumerate()
                    .map(|(k, alpha)| coords[offset + k] * multinomial(alpha).sqrt())
                    .collect();
                offset += p.exponents.len();
                HomogeneousPolynomial { coeffs, ..p.clone() }
            })
            .collect();
        HomogeneousSystem { polys }
    }
}

/// `Σ fᵢ zⁱ ↦ Σ fᵢ x₀^{d−i} x₁^i`.
pub fn homogenize_upoly(coeffs: &[Complex64]) -> Result<HomogeneousSystem> {
    if coeffs.len() < 2 {
        return Err(Error::Precondition("polynomial degree must be >= 1".into()));
    }
    let d = (coeffs.len() - 1) as u32;
    let terms: Vec<(Vec<u32>, Complex64)> = coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| (vec![d - i as u32, i as u32], *c))
        .collect();
    HomogeneousSystem::new(vec![HomogeneousPolynomial::from_terms(2, d, &terms)?])
}

/// The unit representative `(1, z) / √(1 + |z|²)` of an affine root.
pub fn affine_root_to_projective(z: Complex64) -> ComplexVector {
    let v = ComplexVector::from_vec(vec![Complex64::new(1.0, 0.0), z]);
    let n = v.norm();
    v.unscale(n)
}

fn unit_root(root: &ComplexVector, nvars: usize) -> Result<ComplexVector> {
    if root.len() != nvars {
        return Err(Error::DimensionMismatch(format!(
            "root has {} coordinates, expected {nvars}",
            root.len()
        )));
    }
    if root.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = root.norm();
    if n == 0.0 {
        return Err(Error::Precondition("root must be nonzero".into()));
    }
    Ok(root.unscale(n))
}

struct RootSetup {
    system: HomogeneousSystem,
    root: ComplexVector,
    complement: ComplexMatrix,
    reduced_inv: ComplexMatrix,
}

fn setup(system: &HomogeneousSystem, root: &ComplexVector) -> Result<RootSetup> {
    let system = system.normalized()?;
    let root = unit_root(root, system.nvars())?;
    let residual = system.eval(&root).norm();
    if residual > ROOT_TOL {
        return Err(Error::RootResidual {
            residual,
            bound: ROOT_TOL,
        });
    }
    let complement = numlin::orthonormal_complement_basis(&root)?;
    let reduced = system.jacobian(&root) * &complement;
    let reduced_inv = numlin::checked_inverse(&reduced, "singular restricted derivative at the root")?;
    Ok(RootSetup {
        system,
        root,
        complement,
        reduced_inv,
    })
}

/// `E T`: evaluation at `ζ` of the orthonormal basis of `f⊥`.
fn evaluation_on_tangent(s: &RootSetup) -> ComplexMatrix {
    let weyl = s.system.weyl_coords();
    let tangent = numlin::orthonormal_complement_basis(&weyl).expect("normalized system is nonzero");
    let mut eval = ComplexMatrix::zeros(s.system.unknowns(), weyl.len());
    let mut offset = 0;
    for (i, p) in s.system.polys.iter().enumerate() {
        let pw = p.powers(&s.root);
        for (k, alpha) in p.exponents.iter().enumerate() {
            eval[(i, offset + k)] =
                HomogeneousPolynomial::monomial_value(&pw, alpha) * multinomial(alpha).sqrt();
        }
        offset += p.exponents.len();
    }
    eval * tangent
}

fn tangent_basis(s: &RootSetup) -> ComplexMatrix {
    numlin::orthonormal_complement_basis(&s.system.weyl_coords()).expect("normalized system is nonzero")
}

/// Closed-form `(κ_W, κ_av)` at a root: `‖(Df(ζ)Q)⁻¹‖` and
/// `‖(Df(ζ)Q)⁻¹‖_F / √N`.
pub fn pointwise_kappa(system: &HomogeneousSystem, root: &ComplexVector) -> Result<(f64, f64)> {
    let s = setup(system, root)?;
    let n_dim = s.system.projective_input_dim() as f64;
    Ok((
        numlin::operator_norm(&s.reduced_inv)?,
        numlin::frobenius_norm(&s.reduced_inv) / n_dim.sqrt(),
    ))
}

pub fn build_hpoly_system(system: &HomogeneousSystem, root: &ComplexVector) -> Result<ProblemAnalysis> {
    let s = setup(system, root)?;
    let n_dim = s.system.projective_input_dim() as f64;
    let inv_op = numlin::operator_norm(&s.reduced_inv)?;
    let inv_fro = numlin::frobenius_norm(&s.reduced_inv);
    let closed = closed_report(inv_op, 2f64.sqrt() * inv_fro, inv_fro / n_dim.sqrt());
    let dg = -(&s.reduced_inv * evaluation_on_tangent(&s));
    let map = ConditionMap::from_complex(&dg)?;
    ProblemAnalysis::assemble(map, closed, 1.0, 1.0)
}

/// Projective Newton iteration `x ← (x − Q (Df(x)Q)⁻¹ f(x)) / ‖·‖`.
pub fn refine_root(system: &HomogeneousSystem, start: &ComplexVector, max_iter: usize) -> Result<ComplexVector> {
    let system = system.normalized()?;
    let mut x = unit_root(start, system.nvars())?;
    newton_loop(&system, &mut x, max_iter);
    let residual = system.eval(&x).norm();
    if residual > ROOT_TOL {
        return Err(Error::RootResidual {
            residual,
            bound: ROOT_TOL,
        });
    }
    Ok(x)
}

fn newton_loop(system: &HomogeneousSystem, x: &mut ComplexVector, max_iter: usize) {
    for _ in 0..max_iter {
        let Ok(q) = numlin::orthonormal_complement_basis(x) else {
            return;
        };
        let b = system.jacobian(x) * &q;
        let Some(step) = b.lu().solve(&system.eval(x)) else {
            return;
        };
        let next = &*x - q * &step;
        let n = next.norm();
        if !(n > 0.0) || !n.is_finite() {
            return;
        }
        *x = next.unscale(n);
        if step.norm() <= 4.0 * f64::EPSILON {
            return;
        }
    }
}

/// Aggregate condition numbers over a list of roots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateKappa {
    /// `√((1/D) Σ κ_W(f, ζ)²)`.
    pub kappa: f64,
    /// `√((1/D) Σ κ_av(f, ζ)²)`.
    pub kappa_avg: f64,
    pub roots_used: usize,
    pub bezout: f64,
    /// Fewer roots supplied than the Bézout number.
    pub deficient: bool,
}

pub fn aggregate_kappa_system(system: &HomogeneousSystem, roots: &[ComplexVector]) -> Result<AggregateKappa> {
    if roots.is_empty() {
        return Err(Error::EmptyRoots);
    }
    let bezout = system.bezout();
    let (mut sk, mut sa) = (0.0, 0.0);
    for r in roots {
        let (k, a) = pointwise_kappa(system, r)?;
        sk += k * k;
        sa += a * a;
    }
    Ok(AggregateKappa {
        kappa: (sk / bezout).sqrt(),
        kappa_avg: (sa / bezout).sqrt(),
        roots_used: roots.len(),
        bezout,
        deficient: (roots.len() as f64) < bezout,
    })
}

pub(crate) fn first_order_pair(
    system: &HomogeneousSystem,
    root: &ComplexVector,
    direction: &RealVector,
    t: f64,
) -> Result<(RealVector, RealVector)> {
    let s = setup(system, root)?;
    let n_dim = s.system.projective_input_dim();
    if direction.len() != 2 * n_dim {
        return Err(Error::DimensionMismatch(format!(
            "direction has {} real coordinates, expected {}",
            direction.len(),
            2 * n_dim
        )));
    }
    let c = numlin::complexify_vector(direction);
    let weyl_t = s.system.weyl_coords() + tangent_basis(&s) * &c * Complex64::new(t, 0.0);
    let perturbed = s.system.with_weyl_coords(&weyl_t);
    let mut x = s.root.clone();
    newton_loop(&perturbed, &mut x, 50);

    let overlap = s.root.dotc(&x);
    if overlap.norm() < 0.5 {
        return Err(Error::TrackingFailure("perturbed root left the chart around ζ".into()));
    }
    let chart = x.unscale(1.0) / overlap - &s.root;
    let kappa = numlin::operator_norm(&s.reduced_inv)?;
    let bound = 10.0 * t * kappa * c.norm() + 1e-12;
    if chart.norm() > bound {
        return Err(Error::TrackingFailure(format!(
            "perturbed root moved {:e}, bound {bound:e}",
            chart.norm()
        )));
    }
    let fd = (s.complement.adjoint() * chart).unscale(t);
    let dg = -(&s.reduced_inv * evaluation_on_tangent(&s)) * c;
    Ok((numlin::realify_vector(&fd), numlin::realify_vector(&dg)))
}
