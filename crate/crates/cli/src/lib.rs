//! Command-line front end for `lambdaq`: JSON configs in, JSON reports and CSV
//! traces out, plus the bundled reproduction scenarios.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod scenarios;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use commands::{MethodName, Overrides, RunResult};
pub use error::{CliError, EXIT_GRADIENT, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_OK};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "LAMBDAQ_OUTPUT_DIR";
pub const DEFAULT_REPRODUCE_DIR: &str = "lambdaq-output";

#[derive(Debug, Parser)]
#[command(name = "lambdaq", version, about = "Lambda quantiles, lambda-VaR and portfolio optimisation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve F(x) = Lambda(x) for a parametric or empirical law.
    Quantile(RunArgs),
    /// Lambda quantile of a sample.
    Empirical(RunArgs),
    /// Interval-based isolation of crossings, then solve on the leftmost box.
    Isolate(RunArgs),
    /// Minimise portfolio lambda-VaR.
    Optimize(RunArgs),
    /// Run a bundled scenario (or `all`) and check it against reference values.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Report path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write CSV traces.
    #[arg(long)]
    pub trace: bool,
    /// Solver tolerance, or descent tolerance for `optimize`.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub subdivisions: Option<usize>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub penalty_t: Option<f64>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum MethodArg {
    Penalty,
    Kkt,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Scenario name, or `all`.
    pub scenario: String,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            tol: self.tol,
            subdivisions: self.subdivisions,
            method: self.method.map(|m| match m {
                MethodArg::Penalty => MethodName::Penalty,
                MethodArg::Kkt => MethodName::Kkt,
            }),
            penalty_t: self.penalty_t,
        }
    }
}

fn output_dir(default: &str) -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(default))
}

/// Runs the parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Quantile(a) => single("quantile", &a),
        Command::Empirical(a) => single("empirical", &a),
        Command::Isolate(a) => single("isolate", &a),
        Command::Optimize(a) => single("optimize", &a),
        Command::Reproduce(a) => reproduce(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {msg}");
            e.exit_code()
        }
    }
}

fn single(name: &str, args: &RunArgs) -> Result<i32, CliError> {
    let path = args.config.as_path();
    let ov = args.overrides();
    let result = match name {
        "quantile" => commands::run_quantile(&config::load(path)?, Some(path), &ov)?,
        "empirical" => commands::run_empirical(&config::load(path)?, Some(path))?,
        "isolate" => commands::run_isolate(&config::load(path)?, Some(path), &ov)?,
        _ => commands::run_optimize(&config::load(path)?, &ov)?,
    };
    let json = result.json()?;
    match &args.out {
        Some(out) => output::write_text(out, &json)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(json.as_bytes())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
        }
    }
    if args.trace {
        let stem = match &args.out {
            Some(out) => out.with_extension(""),
            None => output_dir(".").join(name),
        };
        result.write_sidecars(&stem)?;
    }
    Ok(if result.converged() {
        EXIT_OK
    } else {
        eprintln!("error: {name} did not converge");
        EXIT_NOT_CONVERGED
    })
}

fn reproduce(args: &ReproduceArgs) -> Result<i32, CliError> {
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| output_dir(DEFAULT_REPRODUCE_DIR));
    let names: Vec<&str> = if args.scenario == "all" {
        scenarios::names().collect()
    } else {
        scenarios::load(&args.scenario)?;
        vec![args.scenario.as_str()]
    };
    let mut all_passed = true;
    let mut passed_count = 0;
    for (name, outcome) in names.iter().zip(scenarios::reproduce_many(&names, &out)) {
        match outcome {
            Ok(o) => {
                for c in &o.checks {
                    let tag = if c.passed { "PASS" } else { "FAIL" };
                    println!("{tag} {name}/{}: {}", c.name, c.detail);
                }
                if o.passed() {
                    passed_count += 1;
                } else {
                    all_passed = false;
                }
            }
            Err(e) => {
                all_passed = false;
                println!("FAIL {name}: {e}");
            }
        }
    }
    if names.len() > 1 {
        println!("{passed_count}/{} scenarios passed", names.len());
    }
    Ok(if all_passed { EXIT_OK } else { EXIT_NOT_CONVERGED })
}
