//! Random instance generators and the statistical experiments built on them.
//!
//! Complex standard normals have independent `N(0, 1/2)` parts, so that
//! `E|z|² = 1`. Every trial draws from its own stream, selected by the
//! trial's position, and trials are collected in order: results depend on
//! the seed only, not on the number of worker threads.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numlin::{self, ComplexMatrix, ComplexVector, RealMatrix};
use crate::problems::hpoly::{self, monomials, multinomial, HomogeneousPolynomial, HomogeneousSystem};
use crate::problems::upoly::binomial;
use crate::problems::roots_upoly;
use crate::sampling::{bootstrap_mean_ci, stream_rng, Domain, Sums};

/// Label attached to every rank-r experiment report.
pub const RANK_R_DISCLAIMER: &str = "measure differs from paper";
/// Bootstrap resamples for heavy-tailed means.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
/// Relative smallest singular value below which a sample counts as singular.
pub const SINGULAR_SAMPLE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarField {
    Real,
    Complex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum EnsembleFamily {
    GaussianReal { n: usize },
    GaussianComplex { n: usize },
    WeylUpoly { d: u32 },
    WeylSystem { n: usize, degrees: Vec<u32> },
    RankRFactors { k: usize, q: usize, r: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub family: EnsembleFamily,
    pub trials: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Precondition("trials must be >= 1".into()));
        }
        let ok = match &self.family {
            EnsembleFamily::GaussianReal { n } | EnsembleFamily::GaussianComplex { n } => *n >= 1,
            EnsembleFamily::WeylUpoly { d } => *d >= 1,
            EnsembleFamily::WeylSystem { n, degrees } => {
                *n >= 1 && degrees.len() == *n && degrees.iter().all(|d| *d >= 1)
            }
            EnsembleFamily::RankRFactors { k, q, r } => *r >= 1 && r <= k.min(q),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "inconsistent ensemble sizes: {:?}",
                self.family
            )))
        }
    }
}

/// One reported statistic at one size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub quantity: String,
    pub size: usize,
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
    /// Percentile bootstrap interval for the mean.
    pub ci: Option<(f64, f64)>,
    pub bound: Option<f64>,
    /// Upper interval endpoint below the bound.
    pub pass: Option<bool>,
}

/// Least-squares line `mean ≈ intercept + slope · log(size)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub quantity: String,
    pub slope: f64,
    pub slope_std_error: f64,
    pub intercept: f64,
    pub intercept_std_error: f64,
    /// Root mean square of the fit residuals.
    pub residual_rms: f64,
    /// Whether the slope was held fixed rather than fitted.
    pub fixed_slope: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub rows: Vec<SizeRow>,
    pub fits: Vec<Fit>,
    /// Samples dropped (singular draws, root failures) and replaced or skipped.
    pub excluded: usize,
    pub seed: u64,
    pub notes: Vec<String>,
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(h * re, h * im)
}

pub fn gaussian_real<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> RealMatrix {
    RealMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_complex<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

#[derive(Debug, Clone, PartialEq)]
pub enum SampledMatrix {
    Real(RealMatrix),
    Complex(ComplexMatrix),
}

/// An `n × n` Gaussian matrix drawn from the stream of `seed`.
pub fn sample_gaussian_matrix(n: usize, field: ScalarField, seed: u64) -> Result<SampledMatrix> {
    if n == 0 {
        return Err(Error::Precondition("n must be >= 1".into()));
    }
    let mut rng = stream_rng(seed, Domain::Ensemble, 0);
    Ok(match field {
        ScalarField::Real => SampledMatrix::Real(gaussian_real(n, n, &mut rng)),
        ScalarField::Complex => SampledMatrix::Complex(gaussian_complex(n, n, &mut rng)),
    })
}

/// Weyl-random univariate polynomial: `fᵢ = zᵢ · √C(d,i)`.
pub fn weyl_upoly<R: Rng + ?Sized>(d: u32, rng: &mut R) -> Vec<Complex64> {
    (0..=d).map(|i| complex_normal(rng) * binomial(d, i).sqrt()).collect()
}

pub fn sample_weyl_upoly(d: u32, seed: u64) -> Result<Vec<Complex64>> {
    if d == 0 {
        return Err(Error::Precondition("degree must be >= 1".into()));
    }
    Ok(weyl_upoly(d, &mut stream_rng(seed, Domain::Ensemble, 0)))
}

/// Weyl-random homogeneous system in `n + 1` variables: the coefficient of
/// `x^α` in `fᵢ` is `z · √multinom(α)`.
pub fn weyl_system<R: Rng + ?Sized>(n: usize, degrees: &[u32], rng: &mut R) -> Result<HomogeneousSystem> {
    if n == 0 || degrees.len() != n || degrees.contains(&0) {
        return Err(Error::Precondition(format!(
            "need n >= 1 positive degrees, got n={n}, degrees={degrees:?}"
        )));
    }
    let polys = degrees
        .iter()
        .map(|&d| {
            let coeffs = monomials(n + 1, d)
                .iter()
                .map(|alpha| complex_normal(rng) * multinomial(alpha).sqrt())
                .collect();
            HomogeneousPolynomial::from_dense(n + 1, d, coeffs)
        })
        .collect::<Result<Vec<_>>>()?;
    HomogeneousSystem::new(polys)
}

pub fn sample_weyl_system(n: usize, degrees: &[u32], seed: u64) -> Result<HomogeneousSystem> {
    weyl_system(n, degrees, &mut stream_rng(seed, Domain::Ensemble, 0))
}

/// A Weyl-random system forced through a uniformly random unit root `ζ`:
/// `fᵢ ← fᵢ − fᵢ(ζ) · ⟨x, ζ⟩^{dᵢ}`.
pub fn weyl_system_with_root<R: Rng + ?Sized>(
    n: usize,
    degrees: &[u32],
    rng: &mut R,
) -> Result<(HomogeneousSystem, ComplexVector)> {
    let system = weyl_system(n, degrees, rng)?;
    let raw = ComplexVector::from_fn(n + 1, |_, _| complex_normal(rng));
    let zeta = raw.unscale(raw.norm());
    let polys = system
        .polys()
        .iter()
        .map(|p| {
            let value = p.eval(&zeta);
            let coeffs = p
                .exponents()
                .iter()
                .zip(p.coeffs())
                .map(|(alpha, c)| {
                    // ⟨x, ζ⟩^d = Σ_α multinom(α) Π conj(ζ_j)^{α_j} x^α
                    let term = alpha
                        .iter()
                        .enumerate()
                        .fold(Complex64::new(multinomial(alpha), 0.0), |acc, (j, &a)| {
                            acc * zeta[j].conj().powu(a)
                        });
                    c - value * term
                })
                .collect();
            HomogeneousPolynomial::from_dense(n + 1, p.degree(), coeffs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((HomogeneousSystem::new(polys)?, zeta))
}

fn trial_index(size_idx: usize, trial: usize) -> u64 {
    ((size_idx as u64) << 32) | trial as u64
}

fn summarize(quantity: &str, size: usize, data: &[f64]) -> SizeRow {
    let mut s = Sums::default();
    data.iter().for_each(|x| s.push(*x));
    SizeRow {
        quantity: quantity.to_string(),
        size,
        mean: s.mean(),
        std_error: s.std_error(),
        trials: data.len(),
        ci: None,
        bound: None,
        pass: None,
    }
}

fn with_bootstrap(mut row: SizeRow, data: &[f64], seed: u64, bound: Option<f64>) -> SizeRow {
    let ci = bootstrap_mean_ci(data, BOOTSTRAP_RESAMPLES, 0.95, seed);
    row.ci = Some(ci);
    row.bound = bound;
    row.pass = bound.map(|b| ci.1 < b);
    row
}

/// Ordinary least squares of `ys` against `xs`.
pub fn least_squares(quantity: &str, xs: &[f64], ys: &[f64]) -> Result<Fit> {
    let k = xs.len();
    if k < 2 || ys.len() != k {
        return Err(Error::Precondition("least squares needs >= 2 points".into()));
    }
    let kf = k as f64;
    let mx = xs.iter().sum::<f64>() / kf;
    let my = ys.iter().sum::<f64>() / kf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Precondition("least squares needs distinct abscissae".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let sigma2 = if k > 2 { ss_res / (kf - 2.0) } else { 0.0 };
    Ok(Fit {
        quantity: quantity.to_string(),
        slope,
        slope_std_error: (sigma2 / sxx).sqrt(),
        intercept,
        intercept_std_error: (sigma2 * (1.0 / kf + mx * mx / sxx)).sqrt(),
        residual_rms: (ss_res / kf).sqrt(),
        fixed_slope: false,
    })
}

/// Intercept of `mean ≈ c + log(size)` with the slope held at 1, each size
/// weighted equally.
fn unit_slope_intercept(quantity: &str, rows: &[&SizeRow]) -> Fit {
    let k = rows.len() as f64;
    let offsets: Vec<f64> = rows.iter().map(|r| r.mean - (r.size as f64).ln()).collect();
    let c = offsets.iter().sum::<f64>() / k;
    let se = rows.iter().map(|r| r.std_error.powi(2)).sum::<f64>().sqrt() / k;
    let rms = (offsets.iter().map(|o| (o - c).powi(2)).sum::<f64>() / k).sqrt();
    Fit {
        quantity: quantity.to_string(),
        slope: 1.0,
        slope_std_error: 0.0,
        intercept: c,
        intercept_std_error: se,
        residual_rms: rms,
        fixed_slope: true,
    }
}

/// `(log κ_rel, log κ_rel_av)` of one real Gaussian draw, redrawing singular
/// samples; returns the number of redraws too.
fn edelman_trial(n: usize, rng: &mut ChaCha8Rng) -> Result<(f64, f64, usize)> {
    let mut redraws = 0;
    loop {
        let a = gaussian_real(n, n, rng);
        let sv = numlin::singular_values(&a)?;
        let (s1, sn) = (sv[0], sv[n - 1]);
        if sn <= SINGULAR_SAMPLE_TOL * s1 {
            redraws += 1;
            continue;
        }
        let fro: f64 = sv.iter().map(|s| s * s).sum::<f64>().sqrt();
        let inv_fro: f64 = sv.iter().map(|s| 1.0 / (s * s)).sum::<f64>().sqrt();
        return Ok(((s1 / sn).ln(), (fro * inv_fro / n as f64).ln(), redraws));
    }
}

/// `E log(‖A‖‖A⁻¹‖)` and `E log(‖A‖_F ‖A⁻¹‖_F / n)` for real Gaussian `A`.
///
/// The second quantity is the relative average condition number of solving
/// `Ay = b`: `κ_av = ‖A⁻¹‖_F ‖y‖ / n` scaled by `‖A‖_F / ‖y‖`.
pub fn edelman_experiment(sizes: &[usize], trials: usize, seed: u64) -> Result<ExperimentResult> {
    if sizes.is_empty() || sizes.iter().any(|n| *n < 2) {
        return Err(Error::Precondition("sizes must be nonempty and >= 2".into()));
    }
    if trials < 2 {
        return Err(Error::Precondition("trials must be >= 2".into()));
    }
    let mut rows = Vec::new();
    let mut excluded = 0;
    for (si, &n) in sizes.iter().enumerate() {
        let samples = (0..trials)
            .into_par_iter()
            .map(|t| edelman_trial(n, &mut stream_rng(seed, Domain::Ensemble, trial_index(si, t))))
            .collect::<Result<Vec<_>>>()?;
        excluded += samples.iter().map(|s| s.2).sum::<usize>();
        let k: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let a: Vec<f64> = samples.iter().map(|s| s.1).collect();
        rows.push(summarize("log_kappa_rel", n, &k));
        rows.push(summarize("log_kappa_rel_avg", n, &a));
    }
    let mut fits = Vec::new();
    if sizes.len() >= 2 {
        for q in ["log_kappa_rel", "log_kappa_rel_avg"] {
            let sel: Vec<&SizeRow> = rows.iter().filter(|r| r.quantity == q).collect();
            let xs: Vec<f64> = sel.iter().map(|r| (r.size as f64).ln()).collect();
            let ys: Vec<f64> = sel.iter().map(|r| r.mean).collect();
            if q == "log_kappa_rel" {
                fits.push(unit_slope_intercept(q, &sel));
            }
            fits.push(least_squares(q, &xs, &ys)?);
        }
    }
    Ok(ExperimentResult {
        name: "edelman".into(),
        rows,
        fits,
        excluded,
        seed,
        notes: vec![format!("singular draws replaced: {excluded}")],
    })
}

/// Per-sample aggregates `(κ_W(f)², κ_av_W(f)²)` over all roots of a
/// Weyl-random univariate polynomial, or `None` if root finding failed.
fn bp_trial(d: u32, rng: &mut ChaCha8Rng) -> Option<(f64, f64)> {
    let f = weyl_upoly(d, rng);
    let roots = roots_upoly(&f).ok()?;
    if roots.len() != d as usize {
        return None;
    }
    let system = hpoly::homogenize_upoly(&f).ok()?;
    let projective: Vec<ComplexVector> = roots.iter().map(|z| hpoly::affine_root_to_projective(*z)).collect();
    let agg = hpoly::aggregate_kappa_system(&system, &projective).ok()?;
    Some((agg.kappa * agg.kappa, agg.kappa_avg * agg.kappa_avg))
}

/// Mean of `κ_W(f)²` and `κ_av_W(f)²` over Weyl-random univariate
/// polynomials of each degree, against the bounds `8nN` and `8n²` (`n = 1`,
/// `N = d`).
pub fn bp_bound_experiment(degrees: &[u32], trials: usize, seed: u64) -> Result<ExperimentResult> {
    if degrees.is_empty() || degrees.contains(&0) {
        return Err(Error::Precondition("degrees must be nonempty and >= 1".into()));
    }
    if trials < 2 {
        return Err(Error::Precondition("trials must be >= 2".into()));
    }
    let mut rows = Vec::new();
    let mut excluded = 0;
    for (si, &d) in degrees.iter().enumerate() {
        let samples: Vec<Option<(f64, f64)>> = (0..trials)
            .into_par_iter()
            .map(|t| bp_trial(d, &mut stream_rng(seed, Domain::Ensemble, trial_index(si, t))))
            .collect();
        let ok: Vec<(f64, f64)> = samples.iter().flatten().copied().collect();
        excluded += trials - ok.len();
        if ok.len() < 2 {
            return Err(Error::Precondition(format!(
                "degree {d}: fewer than two samples survived root validation"
            )));
        }
        let k: Vec<f64> = ok.iter().map(|s| s.0).collect();
        let a: Vec<f64> = ok.iter().map(|s| s.1).collect();
        let boot_seed = seed ^ ((si as u64 + 1) << 40);
        rows.push(with_bootstrap(
            summarize("kappa_w_sq", d as usize, &k),
            &k,
            boot_seed,
            Some(8.0 * d as f64),
        ));
        rows.push(with_bootstrap(
            summarize("kappa_avg_w_sq", d as usize, &a),
            &a,
            boot_seed ^ 1,
            Some(8.0),
        ));
    }
    Ok(ExperimentResult {
        name: "bp-bound".into(),
        rows,
        fits: Vec::new(),
        excluded,
        seed,
        notes: vec![format!("samples excluded after root validation: {excluded}")],
    })
}

/// `(log κ_rel, log κ_rel_av)` of the kernel problem at `A = G₁G₂`, or only
/// the first when the kernel is trivial.
fn rank_r_trial(k: usize, q: usize, r: usize, rng: &mut ChaCha8Rng) -> Result<(f64, Option<f64>)> {
    let a = gaussian_complex(k, r, rng) * gaussian_complex(r, q, rng);
    let sv = numlin::singular_values(&a)?;
    let fro: f64 = sv.iter().map(|s| s * s).sum::<f64>().sqrt();
    let pinv_op = 1.0 / sv[r - 1];
    let pinv_fro: f64 = sv[..r].iter().map(|s| 1.0 / (s * s)).sum::<f64>().sqrt();
    let ell = (q - r) as f64;
    let avg = (ell > 0.0).then(|| {
        let kav = ell.sqrt() * pinv_fro / (((k + q - r) * r) as f64).sqrt();
        (fro * kav).ln()
    });
    Ok(((fro * pinv_op).ln(), avg))
}

/// Statistics of the relative kernel condition numbers on products of
/// complex Gaussian factors. Report only; no bound is asserted.
pub fn rank_r_sample_experiment(k: usize, q: usize, r: usize, trials: usize, seed: u64) -> Result<ExperimentResult> {
    EnsembleSpec {
        family: EnsembleFamily::RankRFactors { k, q, r },
        trials,
        seed,
    }
    .validate()?;
    let samples = (0..trials)
        .into_par_iter()
        .map(|t| rank_r_trial(k, q, r, &mut stream_rng(seed, Domain::Ensemble, trial_index(0, t))))
        .collect::<Result<Vec<_>>>()?;
    let kr: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let mut rows = vec![with_bootstrap(summarize("log_kappa_rel", r, &kr), &kr, seed, None)];
    let av: Vec<f64> = samples.iter().filter_map(|s| s.1).collect();
    if !av.is_empty() {
        rows.push(with_bootstrap(summarize("log_kappa_rel_avg", r, &av), &av, seed ^ 1, None));
    }
    Ok(ExperimentResult {
        name: "rank-r".into(),
        rows,
        fits: Vec::new(),
        excluded: 0,
        seed,
        notes: vec![
            RANK_R_DISCLAIMER.to_string(),
            format!("A = G1 G2 with complex Gaussian G1 ({k}x{r}), G2 ({r}x{q})"),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn real_gaussian_moments() {
        let SampledMatrix::Real(a) = sample_gaussian_matrix(1000, ScalarField::Real, 1).unwrap() else {
            panic!("expected a real sample");
        };
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let var = a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 4.0 / n.sqrt());
        assert!((var - 1.0).abs() < 0.02);
        assert_eq!(
            sample_gaussian_matrix(5, ScalarField::Real, 9).unwrap(),
            sample_gaussian_matrix(5, ScalarField::Real, 9).unwrap()
        );
    }

    #[test]
    fn complex_gaussian_second_moment() {
        let SampledMatrix::Complex(a) = sample_gaussian_matrix(1000, ScalarField::Complex, 2).unwrap() else {
            panic!("expected a complex sample");
        };
        let m2 = a.iter().map(|z| z.norm_sqr()).sum::<f64>() / a.len() as f64;
        assert!((m2 - 1.0).abs() < 0.02);
    }

    #[test]
    fn weyl_upoly_coefficient_variance() {
        let mut s = 0.0;
        let draws = 10_000;
        for t in 0..draws {
            s += sample_weyl_upoly(4, t).unwrap()[2].norm_sqr();
        }
        assert!((s / draws as f64 - 6.0).abs() < 0.18);
    }

    #[test]
    fn weyl_system_norm_and_univariate_consistency() {
        let draws = 10_000;
        let mut s = 0.0;
        for t in 0..draws {
            let sys = sample_weyl_system(2, &[2, 3], t).unwrap();
            s += sys.polys()[0].weyl_norm().powi(2);
        }
        // C(2+2, 2) = 6
        assert!((s / draws as f64 - 6.0).abs() < 0.18);

        let f = sample_weyl_upoly(3, 4).unwrap();
        let sys = sample_weyl_system(1, &[3], 4).unwrap();
        let h = hpoly::homogenize_upoly(&f).unwrap();
        assert_eq!(sys, h);
    }

    #[test]
    fn planted_root_is_a_root() {
        let mut rng = stream_rng(5, Domain::Instances, 0);
        let (sys, zeta) = weyl_system_with_root(2, &[2, 3], &mut rng).unwrap();
        let scaled = sys.normalized().unwrap();
        assert!(scaled.eval(&zeta).norm() < 1e-12);
        assert_relative_eq!(zeta.norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn least_squares_recovers_a_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 + 0.5 * x).collect();
        let fit = least_squares("y", &xs, &ys).unwrap();
        assert_relative_eq!(fit.slope, 0.5, epsilon = 1e-14);
        assert_relative_eq!(fit.intercept, 1.5, epsilon = 1e-14);
        assert!(fit.residual_rms < 1e-14);
    }

    #[test]
    fn edelman_small_sanity() {
        let res = edelman_experiment(&[2, 4], 50, 3).unwrap();
        for row in res.rows.iter().filter(|r| r.quantity == "log_kappa_rel") {
            assert!(row.mean >= 0.0);
        }
        assert_eq!(res, edelman_experiment(&[2, 4], 50, 3).unwrap());
    }

    #[test]
    fn bp_linear_case_is_bounded() {
        let res = bp_bound_experiment(&[1], 500, 1).unwrap();
        let row = &res.rows[0];
        assert!(row.mean.is_finite() && row.mean <= 8.0);
    }

    #[test]
    fn rank_r_is_labeled_and_replayable() {
        let res = rank_r_sample_experiment(4, 4, 2, 100, 7).unwrap();
        assert!(res.notes.iter().any(|n| n == RANK_R_DISCLAIMER));
        assert_eq!(res, rank_r_sample_experiment(4, 4, 2, 100, 7).unwrap());
        let full = rank_r_sample_experiment(3, 3, 3, 50, 7).unwrap();
        assert_eq!(full.rows.len(), 1);
    }
}
