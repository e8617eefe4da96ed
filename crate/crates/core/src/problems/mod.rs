//! Problem families: each adapter assembles the condition matrix `DG(x)` of
//! one computational problem together with its closed-form condition
//! numbers, and can re-solve a perturbed instance for first-order checks.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::condcore::{self, KappaReport, MomentMode};
use crate::error::{Error, Result};
use crate::numlin::{ComplexMatrix, ComplexVector, RealMatrix, RealVector};
use crate::ConditionMap;

pub mod eigen;
pub mod hpoly;
pub mod kernel;
pub mod linear;
pub mod upoly;

pub use eigen::{build_eigen, ordered_eigenvalues, EigenAnalysis, EigenTarget};
pub use hpoly::{
    aggregate_kappa_system, build_hpoly_system, homogenize_upoly, refine_root, AggregateKappa,
    HomogeneousPolynomial, HomogeneousSystem,
};
pub use kernel::{build_kernel, kernel_basis};
pub use linear::{build_linear_fixed_b, build_linear_general};
pub use upoly::{build_upoly, roots_upoly, UPolyMetric};

/// Two candidate values for `κ_av[2]` of a univariate polynomial root:
/// `derived` follows from the realified map (`κ/√(d+1)`), `printed` is the
/// alternative constant `κ/√(2(d+1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvgCandidates {
    pub derived: f64,
    pub printed: f64,
}

/// The assembled condition map of one instance, the closed-form report and
/// the engine report computed from the map's singular values.
#[derive(Debug, Clone)]
pub struct ProblemAnalysis {
    pub map: ConditionMap,
    pub closed_form: KappaReport,
    pub engine: KappaReport,
    pub input_norm: f64,
    pub output_norm: f64,
    pub avg_candidates: Option<AvgCandidates>,
}

pub(crate) fn closed_report(kappa: f64, kappa_frobenius: f64, avg2: f64) -> KappaReport {
    KappaReport {
        kappa,
        kappa_frobenius,
        kappa_avg: BTreeMap::from([(2, avg2)]),
        componentwise: None,
        relative_scale: None,
    }
}

impl ProblemAnalysis {
    pub(crate) fn assemble(
        map: ConditionMap,
        closed_form: KappaReport,
        input_norm: f64,
        output_norm: f64,
    ) -> Result<Self> {
        let engine = KappaReport::from_map(&map, &[2], MomentMode::Exact)?;
        Ok(ProblemAnalysis {
            map,
            closed_form,
            engine,
            input_norm,
            output_norm,
            avg_candidates: None,
        })
    }

    /// Engine report with additional moment orders.
    pub fn engine_report(&self, orders: &[u32], mode: MomentMode) -> Result<KappaReport> {
        KappaReport::from_map(&self.map, orders, mode)
    }

    /// Relative variants `(closed_form, engine)` scaled by `‖x‖/‖y‖`.
    pub fn relative(&self) -> Result<(KappaReport, KappaReport)> {
        Ok((
            condcore::relative_report(&self.closed_form, self.input_norm, self.output_norm)?,
            condcore::relative_report(&self.engine, self.input_norm, self.output_norm)?,
        ))
    }

    /// Largest relative gap between closed-form and engine values of `κ`,
    /// `κ_F` and `κ_av[2]`.
    pub fn discrepancy(&self) -> f64 {
        let rel = |a: f64, b: f64| {
            let scale = a.abs().max(b.abs());
            if scale == 0.0 {
                0.0
            } else {
                (a - b).abs() / scale
            }
        };
        let c = &self.closed_form;
        let e = &self.engine;
        rel(c.kappa, e.kappa)
            .max(rel(c.kappa_frobenius, e.kappa_frobenius))
            .max(rel(c.kappa_avg[&2], e.kappa_avg[&2]))
    }
}

/// Linear-system data over either scalar field.
#[derive(Debug, Clone)]
pub enum LinearData {
    Real { a: RealMatrix, b: RealVector },
    Complex { a: ComplexMatrix, b: ComplexVector },
}

/// One problem instance. Solutions (eigenpairs, kernels) are computed from
/// the input data; polynomial roots are supplied.
#[derive(Debug, Clone)]
pub enum ProblemInstance {
    LinearFixedB(LinearData),
    LinearGeneral(LinearData),
    /// `index` selects an eigenvalue in the order of [`ordered_eigenvalues`].
    Eigen {
        a: ComplexMatrix,
        index: usize,
        target: EigenTarget,
    },
    Kernel {
        a: ComplexMatrix,
        rank: usize,
    },
    UPoly {
        coeffs: Vec<Complex64>,
        root: Complex64,
        metric: UPolyMetric,
    },
    HPolySystem {
        system: HomogeneousSystem,
        root: ComplexVector,
    },
}

impl ProblemInstance {
    pub fn family(&self) -> &'static str {
        match self {
            ProblemInstance::LinearFixedB(_) => "linear_fixed_b",
            ProblemInstance::LinearGeneral(_) => "linear_general",
            ProblemInstance::Eigen { .. } => "eigen",
            ProblemInstance::Kernel { .. } => "kernel",
            ProblemInstance::UPoly { .. } => "upoly",
            ProblemInstance::HPolySystem { .. } => "hpoly_system",
        }
    }

    pub fn analyze(&self) -> Result<ProblemAnalysis> {
        match self {
            ProblemInstance::LinearFixedB(LinearData::Real { a, b }) => build_linear_fixed_b(a, b),
            ProblemInstance::LinearFixedB(LinearData::Complex { a, b }) => build_linear_fixed_b(a, b),
            ProblemInstance::LinearGeneral(LinearData::Real { a, b }) => build_linear_general(a, b),
            ProblemInstance::LinearGeneral(LinearData::Complex { a, b }) => build_linear_general(a, b),
            ProblemInstance::Eigen { a, index, target } => {
                Ok(build_eigen(a, *index)?.target(*target).clone())
            }
            ProblemInstance::Kernel { a, rank } => build_kernel(a, *rank),
            ProblemInstance::UPoly {
                coeffs,
                root,
                metric,
            } => build_upoly(coeffs, *root, *metric),
            ProblemInstance::HPolySystem { system, root } => build_hpoly_system(system, root),
        }
    }

    /// `(G(x + tẋ) − G(x)) / t` and `DG(x) ẋ` in real output coordinates,
    /// `ẋ` given in the real coordinates of the map's input space.
    pub fn first_order_pair(&self, direction: &RealVector, t: f64) -> Result<(RealVector, RealVector)> {
        match self {
            ProblemInstance::LinearFixedB(LinearData::Real { a, b }) => {
                linear::first_order_pair(a, b, false, direction, t)
            }
            ProblemInstance::LinearFixedB(LinearData::Complex { a, b }) => {
                linear::first_order_pair(a, b, false, direction, t)
            }
            ProblemInstance::LinearGeneral(LinearData::Real { a, b }) => {
                linear::first_order_pair(a, b, true, direction, t)
            }
            ProblemInstance::LinearGeneral(LinearData::Complex { a, b }) => {
                linear::first_order_pair(a, b, true, direction, t)
            }
            ProblemInstance::Eigen { a, index, target } => {
                eigen::first_order_pair(a, *index, *target, direction, t)
            }
            ProblemInstance::Kernel { a, rank } => kernel::first_order_pair(a, *rank, direction, t),
            ProblemInstance::UPoly {
                coeffs,
                root,
                metric,
            } => upoly::first_order_pair(coeffs, *root, *metric, direction, t),
            ProblemInstance::HPolySystem { system, root } => {
                hpoly::first_order_pair(system, root, direction, t)
            }
        }
    }
}

/// Relative deviation `‖fd − DG ẋ‖ / ‖DG ẋ‖` of the forward difference at
/// step `t` from the linearization.
pub fn validate_first_order(instance: &ProblemInstance, direction: &RealVector, t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Precondition("step t must be positive".into()));
    }
    if direction.iter().all(|x| *x == 0.0) {
        return Err(Error::Precondition("direction must be nonzero".into()));
    }
    if direction.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (fd, dg) = instance.first_order_pair(direction, t)?;
    let denom = dg.norm();
    if denom == 0.0 {
        return Err(Error::Precondition(
            "direction lies in the kernel of DG; deviation undefined".into(),
        ));
    }
    Ok((fd - dg).norm() / denom)
}
