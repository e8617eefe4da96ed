//! The condition-number engine.
//!
//! A [`ConditionMap`] holds the derivative of a solution map as a real
//! `n × m` matrix, expressed in orthonormal bases of the input and output
//! tangent spaces (complex problems are realified first). From it we get the
//! worst-case number `κ = σ₁`, the Frobenius number `κ_F = (Σσᵢ²)^½` and the
//! p-th average over uniformly random unit input directions
//!
//! ```text
//! κ_av[p] = (1/√2) · [Γ(m/2) / Γ((m+p)/2)]^{1/p} · E(‖η_σ‖^p)^{1/p}
//! ```
//!
//! with `η_σ` centered Gaussian of covariance `diag(σ²)`. For `p = 2` this is
//! `κ_F / √m`. Two independent estimators back the closed forms: direct
//! sampling of the unit sphere and Monte Carlo of the Gaussian moment.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numlin::{self, ComplexMatrix, RealMatrix};
use crate::sampling::{chunked_sums, Domain};

/// Derivative of a solution map in orthonormal tangent coordinates.
#[derive(Debug, Clone)]
pub struct ConditionMap {
    matrix: RealMatrix,
    singular_values: Vec<f64>,
}

impl ConditionMap {
    pub fn new(matrix: RealMatrix) -> Result<Self> {
        let singular_values = numlin::singular_values(&matrix)?;
        Ok(ConditionMap {
            matrix,
            singular_values,
        })
    }

    /// Realifies a complex-linear derivative before wrapping it.
    pub fn from_complex(matrix: &ComplexMatrix) -> Result<Self> {
        Self::new(numlin::realify(matrix))
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.matrix
    }

    /// Real dimension `m` of the input tangent space.
    pub fn input_dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// Real dimension `n` of the output tangent space.
    pub fn output_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// The 1-row map `ẋ ↦ (DG ẋ)_k`, `k` one-based.
    pub fn component(&self, k: usize) -> Result<ConditionMap> {
        self.check_index(k)?;
        ConditionMap::new(self.matrix.rows(k - 1, 1).into_owned())
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.output_dim() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.output_dim(),
            });
        }
        Ok(())
    }
}

/// A Monte Carlo (or exact, with zero error) estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
}

impl MomentEstimate {
    fn exact(value: f64) -> Self {
        MomentEstimate {
            value,
            std_error: 0.0,
            samples: 0,
            seed: 0,
        }
    }

    /// Whether `other` lies within `sigmas` combined standard errors of this
    /// estimate. A relative slack of 1e-12 covers exact (zero-error) cases.
    pub fn agrees_with(&self, other: &MomentEstimate, sigmas: f64) -> bool {
        let combined = self.std_error.hypot(other.std_error);
        let slack = 1e-12 * self.value.abs().max(other.value.abs());
        (self.value - other.value).abs() <= sigmas * combined + slack
    }
}

/// How to evaluate a Gaussian norm moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentMode {
    /// Closed form; only for `p = 2` or a single nonzero σ.
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

/// All condition-number variants for one map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub kappa: f64,
    pub kappa_frobenius: f64,
    pub kappa_avg: BTreeMap<u32, f64>,
    pub componentwise: Option<Vec<f64>>,
    pub relative_scale: Option<f64>,
}

impl KappaReport {
    /// Engine report: `κ`, `κ_F`, `κ_av[p]` for every requested order (2 is
    /// always included) and the per-row componentwise numbers.
    pub fn from_map(map: &ConditionMap, orders: &[u32], mode: MomentMode) -> Result<Self> {
        let mut kappa_avg = BTreeMap::new();
        kappa_avg.insert(2, kappa_avg_exact_p2(map));
        for &p in orders {
            if p != 2 {
                kappa_avg.insert(p, self::kappa_avg(map, p, mode)?);
            }
        }
        let componentwise = (1..=map.output_dim())
            .map(|k| componentwise_kappa(map, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(KappaReport {
            kappa: kappa(map),
            kappa_frobenius: kappa_frobenius(map),
            kappa_avg,
            componentwise: Some(componentwise),
            relative_scale: None,
        })
    }
}

/// Classical condition number: the largest singular value.
pub fn kappa(map: &ConditionMap) -> f64 {
    map.singular_values.first().copied().unwrap_or(0.0)
}

pub fn kappa_frobenius(map: &ConditionMap) -> f64 {
    map.singular_values.iter().map(|s| s * s).sum::<f64>().sqrt()
}

/// `(1/√2) · [Γ(m/2) / Γ((m+p)/2)]^{1/p}`, evaluated through log-Gamma.
pub fn gamma_ratio_constant(m: usize, p: u32) -> Result<f64> {
    if m == 0 || p == 0 {
        return Err(Error::Precondition("gamma ratio needs m >= 1 and p >= 1".into()));
    }
    let (m, p) = (m as f64, p as f64);
    let log_ratio = -ln_gamma_shift(m / 2.0, p / 2.0);
    Ok((log_ratio / p).exp() / std::f64::consts::SQRT_2)
}

/// `ln Γ(a + b) − ln Γ(a)` for `a > 0`, `b ≥ 0`.
///
/// Plain differencing of `ln Γ` loses digits once `ln Γ(a)` is large, so for
/// `a ≥ 20` the Stirling series is differenced term by term instead.
fn ln_gamma_shift(a: f64, b: f64) -> f64 {
    if a < 20.0 {
        return ln_gamma(a + b) - ln_gamma(a);
    }
    fn series(x: f64) -> f64 {
        let x2 = x * x;
        (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - (1.0 / 1680.0 - 1.0 / (1188.0 * x2)) / x2) / x2) / x2)
            / x
    }
    // (a+b−½)ln(a+b) − (a−½)ln a − b, rearranged to avoid cancellation.
    let main = (a - 0.5) * (b / a).ln_1p() + b * (a + b).ln() - b;
    main + series(a + b) - series(a)
}

/// `E |g|^p` for a standard normal scalar `g`.
fn scalar_abs_moment(p: u32) -> f64 {
    let p = p as f64;
    (0.5 * p * std::f64::consts::LN_2 + ln_gamma((p + 1.0) / 2.0)
        - 0.5 * std::f64::consts::PI.ln())
    .exp()
}

/// `E(‖η‖^p)` for `η` centered Gaussian with covariance `diag(σ²)`.
pub fn gaussian_norm_moment(sigmas: &[f64], p: u32, mode: MomentMode) -> Result<MomentEstimate> {
    if p == 0 {
        return Err(Error::Precondition("moment order must be >= 1".into()));
    }
    if sigmas.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
        return Err(Error::Precondition("sigmas must be finite and nonnegative".into()));
    }
    // Zero-variance components are identically zero and drop out.
    let active: Vec<f64> = sigmas.iter().copied().filter(|s| *s > 0.0).collect();
    match mode {
        MomentMode::Exact => {
            if p == 2 {
                Ok(MomentEstimate::exact(active.iter().map(|s| s * s).sum()))
            } else if active.is_empty() {
                Ok(MomentEstimate::exact(0.0))
            } else if active.len() == 1 {
                Ok(MomentEstimate::exact(
                    active[0].powi(p as i32) * scalar_abs_moment(p),
                ))
            } else {
                Err(Error::UnsupportedMode(format!(
                    "p = {p} with {} nonzero sigmas",
                    active.len()
                )))
            }
        }
        MomentMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::Precondition("sample count must be positive".into()));
            }
            let half_p = p as f64 / 2.0;
            let sums = chunked_sums(samples, seed, Domain::GaussianMoment, |rng, count, s| {
                for _ in 0..count {
                    let sq: f64 = active
                        .iter()
                        .map(|sig| {
                            let g: f64 = rng.sample(StandardNormal);
                            let x = sig * g;
                            x * x
                        })
                        .sum();
                    s.push(sq.powf(half_p));
                }
            });
            Ok(MomentEstimate {
                value: sums.mean(),
                std_error: sums.std_error(),
                samples,
                seed,
            })
        }
    }
}

fn kappa_avg_exact_p2(map: &ConditionMap) -> f64 {
    if map.input_dim() == 0 {
        return 0.0;
    }
    kappa_frobenius(map) / (map.input_dim() as f64).sqrt()
}

/// p-th average condition number with its standard error (zero when exact).
pub fn kappa_avg_estimate(map: &ConditionMap, p: u32, mode: MomentMode) -> Result<MomentEstimate> {
    if p == 0 {
        return Err(Error::Precondition("moment order must be >= 1".into()));
    }
    if p == 2 {
        let mut e = MomentEstimate::exact(kappa_avg_exact_p2(map));
        if let MomentMode::MonteCarlo { seed, .. } = mode {
            e.seed = seed;
        }
        return Ok(e);
    }
    let c = gamma_ratio_constant(map.input_dim(), p)?;
    let moment = gaussian_norm_moment(&map.singular_values, p, mode)?;
    Ok(root_estimate(moment, p, c))
}

pub fn kappa_avg(map: &ConditionMap, p: u32, mode: MomentMode) -> Result<f64> {
    kappa_avg_estimate(map, p, mode).map(|e| e.value)
}

/// `scale · mean^{1/p}` with the delta-method error of the root.
fn root_estimate(moment: MomentEstimate, p: u32, scale: f64) -> MomentEstimate {
    let pf = p as f64;
    let value = moment.value.max(0.0).powf(1.0 / pf);
    let std_error = if moment.value > 0.0 {
        moment.std_error / (pf * moment.value.powf((pf - 1.0) / pf))
    } else {
        0.0
    };
    MomentEstimate {
        value: scale * value,
        std_error: scale * std_error,
        samples: moment.samples,
        seed: moment.seed,
    }
}

/// Direct estimator of the defining sphere average: p-th root of the mean of
/// `‖M ẋ‖^p` over `ẋ` uniform on the unit sphere of `R^m`.
pub fn sphere_average_oracle(
    map: &ConditionMap,
    p: u32,
    samples: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    if samples < 1000 {
        return Err(Error::Precondition("sphere oracle needs at least 1000 samples".into()));
    }
    if p == 0 {
        return Err(Error::Precondition("moment order must be >= 1".into()));
    }
    let m = map.input_dim();
    let n = map.output_dim();
    if m == 0 {
        return Err(Error::Precondition("map has an empty input space".into()));
    }
    let half_p = p as f64 / 2.0;
    let matrix = &map.matrix;
    let sums = chunked_sums(samples, seed, Domain::SphereOracle, |rng, count, s| {
        let mut g = vec![0.0f64; m];
        let mut y = vec![0.0f64; n];
        for _ in 0..count {
            // A normalized standard Gaussian is uniform on the sphere.
            let mut g_sq = 0.0;
            for gi in g.iter_mut() {
                *gi = rng.sample(StandardNormal);
                g_sq += *gi * *gi;
            }
            y.iter_mut().for_each(|v| *v = 0.0);
            for (j, gj) in g.iter().enumerate() {
                let col = matrix.column(j);
                for (yi, mij) in y.iter_mut().zip(col.iter()) {
                    *yi += mij * gj;
                }
            }
            let y_sq: f64 = y.iter().map(|v| v * v).sum();
            let ratio = y_sq / g_sq;
            s.push(if p == 2 { ratio } else { ratio.powf(half_p) });
        }
    });
    let moment = MomentEstimate {
        value: sums.mean(),
        std_error: sums.std_error(),
        samples,
        seed,
    };
    Ok(root_estimate(moment, p, 1.0))
}

/// `max |(DG ẋ)_k|` over unit `ẋ`: the norm of row `k` (one-based).
pub fn componentwise_kappa(map: &ConditionMap, k: usize) -> Result<f64> {
    map.check_index(k)?;
    Ok(map.matrix.row(k - 1).norm())
}

/// Average componentwise number:
/// `[Γ(m/2) · Γ((p+1)/2) / (√π · Γ((m+p)/2))]^{1/p} · ‖row k‖`.
pub fn componentwise_avg(map: &ConditionMap, k: usize, p: u32) -> Result<f64> {
    let row = componentwise_kappa(map, k)?;
    if p == 0 {
        return Err(Error::Precondition("moment order must be >= 1".into()));
    }
    let m = map.input_dim() as f64;
    let pf = p as f64;
    if p == 2 {
        return Ok(row / m.sqrt());
    }
    let log_c = ln_gamma(m / 2.0) + ln_gamma((pf + 1.0) / 2.0)
        - 0.5 * std::f64::consts::PI.ln()
        - ln_gamma((m + pf) / 2.0);
    Ok((log_c / pf).exp() * row)
}

/// Scales every condition number by `norm_x / norm_y`.
pub fn relative_report(report: &KappaReport, norm_x: f64, norm_y: f64) -> Result<KappaReport> {
    if norm_y == 0.0 {
        return Err(Error::OutputAtOrigin);
    }
    if !(norm_y > 0.0) || !(norm_x >= 0.0) || !norm_x.is_finite() || !norm_y.is_finite() {
        return Err(Error::Precondition("norms must be finite, norm_y > 0".into()));
    }
    let scale = norm_x / norm_y;
    Ok(KappaReport {
        kappa: report.kappa * scale,
        kappa_frobenius: report.kappa_frobenius * scale,
        kappa_avg: report
            .kappa_avg
            .iter()
            .map(|(p, v)| (*p, v * scale))
            .collect(),
        componentwise: report
            .componentwise
            .as_ref()
            .map(|c| c.iter().map(|v| v * scale).collect()),
        relative_scale: Some(report.relative_scale.unwrap_or(1.0) * scale),
    })
}

/// Surface measure of the unit sphere `S^{m−1}`: `2π^{m/2} / Γ(m/2)`.
pub fn sphere_volume(m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::Precondition("sphere dimension must be >= 1".into()));
    }
    let h = m as f64 / 2.0;
    Ok((std::f64::consts::LN_2 + h * std::f64::consts::PI.ln() - ln_gamma(h)).exp())
}
