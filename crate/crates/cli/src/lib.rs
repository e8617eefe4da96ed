//! `condlab` command-line front end: problem-file parsing, reports and the
//! `analyze`, `verify`, `experiment` and `roots` subcommands.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 an instance lies on the
//! ill-posed set (reported with infinite condition numbers).

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod mtx;
pub mod report;
pub mod schema;

use commands::{AnalyzeOptions, ExperimentArgs, VerifyOptions, EXPERIMENTS};
use report::{Format, Report};
use schema::{parse_problem_file, ParsedProblem};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DEGENERATE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "condlab", version, about = "Condition numbers of computational problems")]
pub struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Seed for every Monte Carlo stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Omit the generation timestamp from the report.
    #[arg(long, global = true)]
    no_timestamp: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Condition numbers of every problem in a file.
    Analyze {
        input: PathBuf,
        /// Comma-separated moment orders for the average condition number.
        #[arg(long, value_delimiter = ',', default_value = "2")]
        p_list: Vec<u32>,
        /// Also report relative condition numbers.
        #[arg(long)]
        relative: bool,
        /// Monte Carlo samples for orders other than 2.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Closed formulas against the sphere-sampling oracle.
    Verify {
        input: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        p_list: Vec<u32>,
        #[arg(long, default_value_t = 3.0)]
        tol_sigmas: f64,
    },
    /// Random-ensemble experiments: edelman, bp-bound, rank-r.
    Experiment {
        name: String,
        /// Matrix sizes (edelman).
        #[arg(long, value_delimiter = ',', default_value = "20,40,80,160")]
        sizes: Vec<usize>,
        /// Polynomial degrees (bp-bound).
        #[arg(long = "d", value_delimiter = ',', default_value = "2,4,6")]
        degrees: Vec<u32>,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 4)]
        q: usize,
        #[arg(long, default_value_t = 2)]
        r: usize,
        /// Trials per size; defaults to 200 (edelman), 2000 (bp-bound), 500 (rank-r).
        #[arg(long)]
        trials: Option<usize>,
    },
    /// All roots of univariate polynomials with residuals.
    Roots { input: PathBuf },
}

fn load(path: &Path) -> Result<Vec<ParsedProblem>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_problem_file(&text, path.parent())
}

fn check_orders(orders: &[u32]) -> Result<()> {
    if orders.is_empty() || orders.contains(&0) {
        bail!("--p-list needs orders >= 1");
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(Report, i32)> {
    let g = &cli.global;
    let timestamp = (!g.no_timestamp).then(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
    let (report, degenerate) = match &cli.command {
        Command::Analyze {
            input,
            p_list,
            relative,
            samples,
        } => {
            check_orders(p_list)?;
            let problems = load(input)?;
            let mut report = Report::new("analyze", timestamp);
            let opts = AnalyzeOptions {
                orders: p_list.clone(),
                relative: *relative,
                samples: *samples,
                seed: g.seed,
            };
            let degenerate = commands::analyze(&problems, &opts, &mut report)?;
            (report, degenerate)
        }
        Command::Verify {
            input,
            samples,
            p_list,
            tol_sigmas,
        } => {
            check_orders(p_list)?;
            if !(*tol_sigmas > 0.0) {
                bail!("--tol-sigmas must be positive");
            }
            let problems = load(input)?;
            let mut report = Report::new("verify", timestamp);
            let opts = VerifyOptions {
                orders: p_list.clone(),
                samples: *samples,
                seed: g.seed,
                tol_sigmas: *tol_sigmas,
            };
            let degenerate = commands::verify(&problems, &opts, &mut report)?;
            (report, degenerate)
        }
        Command::Experiment {
            name,
            sizes,
            degrees,
            k,
            q,
            r,
            trials,
        } => {
            let (args, default_trials) = match name.as_str() {
                "edelman" => (ExperimentArgs::Edelman { sizes: sizes.clone() }, 200),
                "bp-bound" => (
                    ExperimentArgs::BpBound {
                        degrees: degrees.clone(),
                    },
                    2000,
                ),
                "rank-r" => (ExperimentArgs::RankR { k: *k, q: *q, r: *r }, 500),
                other => bail!("unknown experiment '{other}'; valid names: {}", EXPERIMENTS.join(", ")),
            };
            let res = commands::run_experiment(&args, trials.unwrap_or(default_trials), g.seed)?;
            let mut report = Report::new("experiment", timestamp);
            commands::experiment_report(&res, &mut report);
            (report, false)
        }
        Command::Roots { input } => {
            let problems = load(input)?;
            let mut report = Report::new("roots", timestamp);
            commands::roots(&problems, &mut report)?;
            (report, false)
        }
    };
    Ok((report, if degenerate { EXIT_DEGENERATE } else { EXIT_OK }))
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code. Reports go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.global.threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: thread pool: {e}");
            return EXIT_USAGE;
        }
    };
    match pool
        .install(|| execute(&cli))
        .and_then(|(report, code)| report.write(cli.global.format, out).map(|()| code))
    {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_USAGE
        }
    }
}
