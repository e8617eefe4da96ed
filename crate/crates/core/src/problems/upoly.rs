//! A simple root `ζ` of a univariate complex polynomial `f = Σ fᵢ zⁱ`.
//!
//! `DG(f) ḟ = −ḟ(ζ) / f'(ζ)`. In the metric's orthonormal basis `{wᵢ zⁱ}`
//! the condition matrix is the row `(−wᵢ ζⁱ / f'(ζ))ᵢ`, with `wᵢ = √C(d,i)`
//! for the Weyl metric and `wᵢ = 1` for the canonical one.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numlin::{self, ComplexMatrix, ComplexVector, RealVector};
use crate::ConditionMap;

use super::{closed_report, AvgCandidates, ProblemAnalysis};

/// Relative size of `|f'(ζ)|` below which `ζ` counts as a critical point.
pub const CRITICAL_TOL: f64 = 1e-12;
/// Residual bound `|f(ζ)| ≤ ROOT_TOL · ‖f‖ · max(1, |ζ|)^d` for analyzed roots.
pub const ROOT_TOL: f64 = 1e-9;
/// Residual bound for roots returned by [`roots_upoly`].
pub const ROOTS_RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UPolyMetric {
    Weyl,
    Canonical,
}

/// `C(n, k)` in floating point.
pub fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Weights `wᵢ` making `{wᵢ zⁱ}` orthonormal for the metric.
pub fn metric_weights(degree: u32, metric: UPolyMetric) -> Vec<f64> {
    (0..=degree)
        .map(|i| match metric {
            UPolyMetric::Weyl => binomial(degree, i).sqrt(),
            UPolyMetric::Canonical => 1.0,
        })
        .collect()
}

/// `‖f‖` in the metric: `√(Σ |fᵢ|² / wᵢ²)`.
pub fn metric_norm(coeffs: &[Complex64], metric: UPolyMetric) -> f64 {
    let d = degree_of(coeffs);
    coeffs
        .iter()
        .zip(metric_weights(d, metric))
        .map(|(c, w)| c.norm_sqr() / (w * w))
        .sum::<f64>()
        .sqrt()
}

fn degree_of(coeffs: &[Complex64]) -> u32 {
    coeffs.len().saturating_sub(1) as u32
}

/// `(f(z), f'(z))` by Horner's rule; coefficients in ascending order.
pub fn eval_with_derivative(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut f = Complex64::new(0.0, 0.0);
    let mut df = Complex64::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        df = df * z + f;
        f = f * z + c;
    }
    (f, df)
}

fn check_coeffs(coeffs: &[Complex64]) -> Result<u32> {
    if coeffs.len() < 2 {
        return Err(Error::Precondition("polynomial degree must be >= 1".into()));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(degree_of(coeffs))
}

fn residual_scale(coeffs: &[Complex64], z: Complex64) -> f64 {
    let d = degree_of(coeffs) as i32;
    let c_norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    c_norm * z.norm().max(1.0).powi(d)
}

struct RootSetup {
    weights: Vec<f64>,
    derivative: Complex64,
}

fn setup(coeffs: &[Complex64], root: Complex64, metric: UPolyMetric) -> Result<RootSetup> {
    let d = check_coeffs(coeffs)?;
    if !root.is_finite() {
        return Err(Error::NonFinite);
    }
    let (f, df) = eval_with_derivative(coeffs, root);
    let bound = ROOT_TOL * residual_scale(coeffs, root);
    if f.norm() > bound {
        return Err(Error::RootResidual {
            residual: f.norm(),
            bound,
        });
    }
    let scale = metric_norm(coeffs, metric) * root.norm().max(1.0).powi(d as i32 - 1);
    if df.norm() <= CRITICAL_TOL * scale {
        return Err(Error::IllPosed {
            what: "critical point of the polynomial",
            ratio: df.norm() / scale,
        });
    }
    Ok(RootSetup {
        weights: metric_weights(d, metric),
        derivative: df,
    })
}

fn condition_row(s: &RootSetup, root: Complex64) -> ComplexMatrix {
    let mut power = Complex64::new(1.0, 0.0);
    let mut row = ComplexMatrix::zeros(1, s.weights.len());
    for (i, w) in s.weights.iter().enumerate() {
        row[(0, i)] = -power * *w / s.derivative;
        power *= root;
    }
    row
}

pub fn build_upoly(coeffs: &[Complex64], root: Complex64, metric: UPolyMetric) -> Result<ProblemAnalysis> {
    let s = setup(coeffs, root, metric)?;
    let d = degree_of(coeffs) as i32;
    let r2 = root.norm_sqr();
    let numerator = match metric {
        UPolyMetric::Weyl => (1.0 + r2).powf(d as f64 / 2.0),
        UPolyMetric::Canonical => (0..=d).map(|i| r2.powi(i)).sum::<f64>().sqrt(),
    };
    let kappa = numerator / s.derivative.norm();
    let dim = (d + 1) as f64;
    let candidates = AvgCandidates {
        derived: kappa / dim.sqrt(),
        printed: kappa / (2.0 * dim).sqrt(),
    };
    let closed = closed_report(kappa, 2f64.sqrt() * kappa, candidates.derived);
    let map = ConditionMap::from_complex(&condition_row(&s, root))?;
    let mut an = ProblemAnalysis::assemble(map, closed, metric_norm(coeffs, metric), root.norm())?;
    an.avg_candidates = Some(candidates);
    Ok(an)
}

/// Newton iteration from `start`, stopping when the step stalls.
pub fn newton_polish(coeffs: &[Complex64], start: Complex64, max_iter: usize) -> Complex64 {
    let mut z = start;
    let mut best = eval_with_derivative(coeffs, z).0.norm();
    for _ in 0..max_iter {
        let (f, df) = eval_with_derivative(coeffs, z);
        if df.norm() == 0.0 || f.norm() == 0.0 {
            break;
        }
        let next = z - f / df;
        let r = eval_with_derivative(coeffs, next).0.norm();
        if !next.is_finite() || r > best {
            break;
        }
        let step = (next - z).norm();
        z = next;
        best = r;
        if step <= 4.0 * f64::EPSILON * z.norm().max(1.0) {
            break;
        }
    }
    z
}

/// All `d` roots from the companion matrix eigenvalues, polished by Newton
/// and residual-checked.
pub fn roots_upoly(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let d = check_coeffs(coeffs)? as usize;
    let lead = coeffs[d];
    let max_abs = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if lead.norm() <= 1e-14 * max_abs || lead.norm() == 0.0 {
        return Err(Error::DegreeDeficient(lead.norm()));
    }
    let mut companion = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        if i + 1 < d {
            companion[(i + 1, i)] = Complex64::new(1.0, 0.0);
        }
        companion[(i, d - 1)] = -coeffs[i] / lead;
    }
    let raw = super::eigen::ordered_eigenvalues(&companion)?;
    raw.into_iter()
        .map(|z| {
            let z = newton_polish(coeffs, z, 8);
            let residual = eval_with_derivative(coeffs, z).0.norm();
            let bound = ROOTS_RESIDUAL_TOL * residual_scale(coeffs, z);
            if residual <= bound {
                Ok(z)
            } else {
                Err(Error::RootResidual { residual, bound })
            }
        })
        .collect()
}

pub(crate) fn first_order_pair(
    coeffs: &[Complex64],
    root: Complex64,
    metric: UPolyMetric,
    direction: &RealVector,
    t: f64,
) -> Result<(RealVector, RealVector)> {
    let s = setup(coeffs, root, metric)?;
    let len = s.weights.len();
    if direction.len() != 2 * len {
        return Err(Error::DimensionMismatch(format!(
            "direction has {} real coordinates, expected {}",
            direction.len(),
            2 * len
        )));
    }
    let c = numlin::complexify_vector(direction);
    let perturbed: Vec<Complex64> = coeffs
        .iter()
        .zip(c.iter().zip(&s.weights))
        .map(|(f, (ci, w))| f + ci * (*w * t))
        .collect();
    let moved = newton_polish(&perturbed, root, 50);
    let kappa = condition_row(&s, root).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let bound = 10.0 * t * kappa * c.norm() + 1e-12 * root.norm().max(1.0);
    if (moved - root).norm() > bound {
        return Err(Error::TrackingFailure(format!(
            "perturbed root moved {:e}, bound {bound:e}",
            (moved - root).norm()
        )));
    }
    let fd = ComplexVector::from_element(1, (moved - root) / t);
    let dg = condition_row(&s, root) * c;
    Ok((numlin::realify_vector(&fd), numlin::realify_vector(&dg)))
}
