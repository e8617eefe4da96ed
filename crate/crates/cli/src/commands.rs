//! Subcommand bodies. Each returns a report and whether any instance hit the
//! ill-posed set (exit code 2); input errors propagate as `Err` (exit 1).

use anyhow::{anyhow, bail, Result};
use condlab_core::condcore::{self, kappa_avg_estimate, sphere_average_oracle, KappaReport, MomentMode};
use condlab_core::ensembles::{bp_bound_experiment, edelman_experiment, rank_r_sample_experiment, ExperimentResult};
use condlab_core::problems::upoly::eval_with_derivative;
use condlab_core::problems::{roots_upoly, ProblemAnalysis, ProblemInstance};
use condlab_core::{ConditionMap, Error};
use rayon::prelude::*;

use crate::report::{Cell, Report, Row};
use crate::schema::{ParsedProblem, ProblemSpec};

pub const EXPERIMENTS: [&str; 3] = ["edelman", "bp-bound", "rank-r"];

/// Errors that place an instance on (or numerically at) the ill-posed set.
pub fn is_degenerate(e: &Error) -> bool {
    matches!(
        e,
        Error::IllPosed { .. } | Error::NearMultipleEigenvalue { .. } | Error::AmbiguousRank { .. } | Error::OutputAtOrigin
    )
}

/// One analyzable unit after expanding root-less univariate problems.
struct Unit {
    id: String,
    family: &'static str,
    kind: UnitKind,
}

enum UnitKind {
    Instance(ProblemInstance),
    Map(condlab_core::numlin::RealMatrix),
}

fn expand(problems: &[ParsedProblem]) -> Result<Vec<Unit>> {
    let mut units = Vec::new();
    for p in problems {
        match &p.spec {
            ProblemSpec::Instance(inst) => units.push(Unit {
                id: p.id.clone(),
                family: inst.family(),
                kind: UnitKind::Instance(inst.clone()),
            }),
            ProblemSpec::Map(m) => units.push(Unit {
                id: p.id.clone(),
                family: "map",
                kind: UnitKind::Map(m.clone()),
            }),
            ProblemSpec::UPolyAllRoots { coeffs, metric } => {
                let roots = roots_upoly(coeffs).map_err(|e| anyhow!("{}: {e}", p.id))?;
                for (k, root) in roots.into_iter().enumerate() {
                    units.push(Unit {
                        id: format!("{}#{}", p.id, k + 1),
                        family: "upoly",
                        kind: UnitKind::Instance(ProblemInstance::UPoly {
                            coeffs: coeffs.clone(),
                            root,
                            metric: *metric,
                        }),
                    });
                }
            }
        }
    }
    Ok(units)
}

/// The analyzed form of a unit: a problem analysis or a bare map.
enum Analyzed {
    Problem(Box<ProblemAnalysis>),
    Map(ConditionMap),
}

impl Analyzed {
    fn map(&self) -> &ConditionMap {
        match self {
            Analyzed::Problem(a) => &a.map,
            Analyzed::Map(m) => m,
        }
    }
}

/// `Ok(Err(e))` is a degenerate instance to report; `Err` is fatal.
fn analyze_unit(unit: &Unit) -> Result<std::result::Result<Analyzed, Error>> {
    let out = match &unit.kind {
        UnitKind::Instance(inst) => inst.analyze().map(|a| Analyzed::Problem(Box::new(a))),
        UnitKind::Map(m) => ConditionMap::new(m.clone()).map(Analyzed::Map),
    };
    match out {
        Ok(a) => Ok(Ok(a)),
        Err(e) if is_degenerate(&e) => Ok(Err(e)),
        Err(e) => Err(anyhow!("{}: {e}", unit.id)),
    }
}

fn sigma_row(unit: &Unit, e: &Error, columns: &[String]) -> Row {
    let mut row = Row::new();
    row.set("id", unit.id.clone()).set("family", unit.family).set("status", "Sigma");
    for c in columns {
        row.set(c.clone(), f64::INFINITY);
    }
    row.set("message", e.to_string());
    row
}

fn avg_key(prefix: &str, p: u32) -> String {
    format!("{prefix}kappa_avg_p{p}")
}

fn push_report(row: &mut Row, prefix: &str, r: &KappaReport, orders: &[u32]) {
    row.set(format!("{prefix}kappa"), r.kappa);
    row.set(format!("{prefix}kappa_frobenius"), r.kappa_frobenius);
    for p in orders {
        row.set(avg_key(prefix, *p), r.kappa_avg.get(p).copied());
    }
}

pub struct AnalyzeOptions {
    pub orders: Vec<u32>,
    pub relative: bool,
    pub samples: usize,
    pub seed: u64,
}

pub fn analyze(problems: &[ParsedProblem], opts: &AnalyzeOptions, report: &mut Report) -> Result<bool> {
    let units = expand(problems)?;
    let mode = MomentMode::MonteCarlo {
        samples: opts.samples,
        seed: opts.seed,
    };
    let mut inf_columns: Vec<String> = vec!["kappa".into(), "kappa_frobenius".into()];
    inf_columns.extend(opts.orders.iter().map(|p| avg_key("", *p)));
    let rows: Vec<Result<(Row, bool)>> = units
        .par_iter()
        .map(|unit| -> Result<(Row, bool)> {
            let analyzed = match analyze_unit(unit)? {
                Ok(a) => a,
                Err(e) => return Ok((sigma_row(unit, &e, &inf_columns), true)),
            };
            let map = analyzed.map();
            let engine = KappaReport::from_map(map, &opts.orders, mode).map_err(|e| anyhow!("{}: {e}", unit.id))?;
            let mut row = Row::new();
            row.set("id", unit.id.clone()).set("family", unit.family).set("status", "ok");
            row.set("m", map.input_dim()).set("n", map.output_dim());
            push_report(&mut row, "", &engine, &opts.orders);
            let mut sigma = false;
            if let Analyzed::Problem(a) = &analyzed {
                push_report(&mut row, "closed_", &a.closed_form, &[2]);
                row.set("discrepancy", a.discrepancy());
                if let Some(c) = a.avg_candidates {
                    row.set("avg_candidate_derived", c.derived).set("avg_candidate_printed", c.printed);
                }
                if opts.relative {
                    match condcore::relative_report(&engine, a.input_norm, a.output_norm) {
                        Ok(rel) => push_report(&mut row, "relative_", &rel, &opts.orders),
                        Err(e) if is_degenerate(&e) => {
                            sigma = true;
                            row.set("status", "Sigma").set("message", e.to_string());
                        }
                        Err(e) => bail!("{}: {e}", unit.id),
                    }
                }
            }
            row.set("componentwise", engine.componentwise.clone().map(Cell::List).unwrap_or(Cell::Empty));
            Ok((row, sigma))
        })
        .collect();
    let mut any_sigma = false;
    for r in rows {
        let (row, sigma) = r?;
        any_sigma |= sigma || row.get("status") == Some(&Cell::Text("Sigma".into()));
        report.rows.push(row);
    }
    Ok(any_sigma)
}

pub struct VerifyOptions {
    pub orders: Vec<u32>,
    pub samples: usize,
    pub seed: u64,
    pub tol_sigmas: f64,
}

/// Oracle-vs-candidate decision for the univariate average constant.
fn adjudicate(derived: f64, printed: f64, oracle: f64, se: f64, tol: f64) -> &'static str {
    let z_derived = (derived - oracle).abs() / se;
    let z_printed = (printed - oracle).abs() / se;
    match (z_derived <= tol, z_printed <= tol) {
        (true, false) => "sqrt(d+1)",
        (false, true) => "sqrt(2(d+1))",
        _ => "undecided",
    }
}

pub fn verify(problems: &[ParsedProblem], opts: &VerifyOptions, report: &mut Report) -> Result<bool> {
    if opts.samples < 1000 {
        bail!("--samples must be at least 1000");
    }
    let units = expand(problems)?;
    let mut any_sigma = false;
    for unit in &units {
        let analyzed = match analyze_unit(unit)? {
            Ok(a) => a,
            Err(e) => {
                any_sigma = true;
                report.rows.push(sigma_row(unit, &e, &["closed".into(), "oracle".into()]));
                continue;
            }
        };
        let map = analyzed.map();
        for &p in &opts.orders {
            let oracle = sphere_average_oracle(map, p, opts.samples, opts.seed).map_err(|e| anyhow!("{}: {e}", unit.id))?;
            let (closed, source) = match (&analyzed, p) {
                (Analyzed::Problem(a), 2) => (
                    condcore::MomentEstimate {
                        value: a.closed_form.kappa_avg[&2],
                        std_error: 0.0,
                        samples: 0,
                        seed: 0,
                    },
                    "closed_form",
                ),
                _ => (
                    kappa_avg_estimate(
                        map,
                        p,
                        MomentMode::MonteCarlo {
                            samples: opts.samples,
                            seed: opts.seed,
                        },
                    )
                    .map_err(|e| anyhow!("{}: {e}", unit.id))?,
                    if p == 2 { "exact_frobenius_over_sqrt_m" } else { "gamma_constant_times_gaussian_moment" },
                ),
            };
            let combined = closed.std_error.hypot(oracle.std_error);
            let mut row = Row::new();
            row.set("id", unit.id.clone()).set("family", unit.family).set("status", "ok");
            row.set("check", "p_average").set("p", p as usize);
            row.set("m", map.input_dim()).set("n", map.output_dim());
            row.set("closed", closed.value).set("closed_std_error", closed.std_error);
            row.set("closed_source", source);
            row.set("oracle", oracle.value).set("oracle_std_error", oracle.std_error);
            row.set("z", if combined > 0.0 { (closed.value - oracle.value).abs() / combined } else { 0.0 });
            row.set("tol_sigmas", opts.tol_sigmas);
            row.set("pass", closed.agrees_with(&oracle, opts.tol_sigmas));
            report.rows.push(row);

            if let (Analyzed::Problem(a), 2) = (&analyzed, p) {
                if let Some(c) = a.avg_candidates {
                    let se = oracle.std_error;
                    let mut adj = Row::new();
                    adj.set("id", unit.id.clone()).set("family", unit.family).set("status", "ok");
                    adj.set("check", "upoly_constant").set("p", 2usize);
                    adj.set("m", map.input_dim()).set("n", map.output_dim());
                    adj.set("oracle", oracle.value).set("oracle_std_error", se);
                    adj.set("candidate_sqrt_d_plus_1", c.derived);
                    adj.set("candidate_sqrt_2_d_plus_1", c.printed);
                    adj.set("z_sqrt_d_plus_1", (c.derived - oracle.value).abs() / se);
                    adj.set("z_sqrt_2_d_plus_1", (c.printed - oracle.value).abs() / se);
                    adj.set("separation_sigmas", (c.derived - c.printed).abs() / se);
                    adj.set("supported", adjudicate(c.derived, c.printed, oracle.value, se, opts.tol_sigmas));
                    report.rows.push(adj);
                }
            }
        }
    }
    Ok(any_sigma)
}

pub enum ExperimentArgs {
    Edelman { sizes: Vec<usize> },
    BpBound { degrees: Vec<u32> },
    RankR { k: usize, q: usize, r: usize },
}

pub fn run_experiment(args: &ExperimentArgs, trials: usize, seed: u64) -> Result<ExperimentResult> {
    let res = match args {
        ExperimentArgs::Edelman { sizes } => edelman_experiment(sizes, trials, seed),
        ExperimentArgs::BpBound { degrees } => bp_bound_experiment(degrees, trials, seed),
        ExperimentArgs::RankR { k, q, r } => rank_r_sample_experiment(*k, *q, *r, trials, seed),
    };
    res.map_err(|e| anyhow!("{e}"))
}

pub fn experiment_report(res: &ExperimentResult, report: &mut Report) {
    let notes = res.notes.join("; ");
    for r in &res.rows {
        let mut row = Row::new();
        row.set("record", "size").set("quantity", r.quantity.clone()).set("size", r.size);
        row.set("mean", r.mean).set("std_error", r.std_error).set("trials", r.trials);
        row.set("ci_low", r.ci.map(|c| c.0)).set("ci_high", r.ci.map(|c| c.1));
        row.set("bound", r.bound).set("pass", r.pass);
        row.set("notes", notes.clone());
        report.rows.push(row);
    }
    for f in &res.fits {
        let mut row = Row::new();
        row.set("record", "fit").set("quantity", f.quantity.clone());
        row.set("slope", f.slope).set("slope_std_error", f.slope_std_error);
        row.set("intercept", f.intercept).set("intercept_std_error", f.intercept_std_error);
        row.set("residual_rms", f.residual_rms).set("fixed_slope", f.fixed_slope);
        row.set("notes", notes.clone());
        report.rows.push(row);
    }
    report.meta.push(("experiment".into(), res.name.clone().into()));
    report.meta.push(("seed".into(), res.seed.into()));
    report.meta.push(("excluded".into(), res.excluded.into()));
    report.meta.push(("notes".into(), res.notes.clone().into()));
}

/// All roots of every univariate payload, ordered by real then imaginary
/// part (both descending), with absolute residuals.
pub fn roots(problems: &[ParsedProblem], report: &mut Report) -> Result<()> {
    for p in problems {
        let coeffs = match &p.spec {
            ProblemSpec::UPolyAllRoots { coeffs, .. } => coeffs,
            ProblemSpec::Instance(ProblemInstance::UPoly { coeffs, .. }) => coeffs,
            _ => bail!("{}: roots supports univariate polynomial payloads only", p.id),
        };
        let mut roots = roots_upoly(coeffs).map_err(|e| anyhow!("{}: {e}", p.id))?;
        roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        for (k, z) in roots.iter().enumerate() {
            let mut row = Row::new();
            row.set("id", p.id.clone()).set("index", k + 1);
            // Adding 0.0 turns -0.0 into 0.0.
            row.set("re", z.re + 0.0).set("im", z.im + 0.0);
            row.set("residual", eval_with_derivative(coeffs, *z).0.norm());
            report.rows.push(row);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjudication_prefers_the_closer_candidate() {
        assert_eq!(adjudicate(1.0, 0.7, 1.001, 0.001, 3.0), "sqrt(d+1)");
        assert_eq!(adjudicate(1.0, 0.7, 0.701, 0.001, 3.0), "sqrt(2(d+1))");
        assert_eq!(adjudicate(1.0, 0.7, 0.85, 0.001, 3.0), "undecided");
    }
}
