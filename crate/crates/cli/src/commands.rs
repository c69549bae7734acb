//! Subcommand runners. Each turns a config into a [`RunResult`] without
//! touching the file system except to read sample files.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use lambdaq::descriptors::DistributionSpec;
use lambdaq::isolation::{isolate, IsolationReport};
use lambdaq::portfolio::{DescentParams, OptimReport};
use lambdaq::{
    empirical_lambda_quantile, lambda_quantile, optimize, residual_fn, solve, AllocationProblem,
    Distribution, EmpiricalEstimate, ExitReason, Method, SampleSet, SolveReport, SolverParams,
};
use serde::{Deserialize, Serialize};

use crate::config::{
    read_samples, resolve, EmpiricalConfig, IsolateConfig, OptimizeConfig, QuantileConfig,
    SolverOverrides,
};
use crate::error::CliError;
use crate::output;

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub subdivisions: Option<usize>,
    pub method: Option<MethodName>,
    pub penalty_t: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Penalty,
    Kkt,
}

/// Penalty weight used when `--method penalty` is given without `--penalty-t`.
pub const DEFAULT_PENALTY_T: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileOutput {
    pub root: f64,
    pub lambda_var: f64,
    pub residual: f64,
    pub exit_reason: ExitReason,
    pub converged: bool,
    pub newton_steps: usize,
    pub bisection_steps: usize,
    pub trace_length: usize,
}

impl From<&SolveReport> for QuantileOutput {
    fn from(r: &SolveReport) -> Self {
        Self {
            root: r.root,
            lambda_var: -r.root,
            residual: r.residual,
            exit_reason: r.exit_reason,
            converged: r.converged,
            newton_steps: r.newton_steps,
            bisection_steps: r.bisection_steps,
            trace_length: r.trace.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct IsolateOutput {
    isolation: IsolationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    solve: Option<QuantileOutput>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunResult {
    Quantile(SolveReport),
    Empirical(EmpiricalEstimate),
    Isolate {
        isolation: IsolationReport,
        solve_requested: bool,
        solve: Option<SolveReport>,
    },
    Optimize(OptimReport),
}

impl RunResult {
    pub fn converged(&self) -> bool {
        match self {
            Self::Quantile(r) => r.converged,
            Self::Empirical(_) => true,
            Self::Isolate {
                solve_requested,
                solve,
                ..
            } => !solve_requested || solve.as_ref().is_some_and(|s| s.converged),
            Self::Optimize(r) => r.converged,
        }
    }

    pub fn json(&self) -> Result<String, CliError> {
        match self {
            Self::Quantile(r) => output::to_json(&QuantileOutput::from(r)),
            Self::Empirical(e) => output::to_json(e),
            Self::Isolate { isolation, solve, .. } => output::to_json(&IsolateOutput {
                isolation: isolation.clone(),
                solve: solve.as_ref().map(QuantileOutput::from),
            }),
            Self::Optimize(r) => output::to_json(r),
        }
    }

    /// Writes CSV side files next to `stem` and returns their paths.
    pub fn write_sidecars(&self, stem: &Path) -> Result<Vec<PathBuf>, CliError> {
        let with = |suffix: &str| {
            let mut s = stem.as_os_str().to_os_string();
            s.push(suffix);
            PathBuf::from(s)
        };
        let mut written = Vec::new();
        match self {
            Self::Quantile(r) => {
                let p = with(".trace.csv");
                output::write_trace(&p, r)?;
                written.push(p);
            }
            Self::Empirical(_) => {}
            Self::Isolate { isolation, solve, .. } => {
                let p = with(".boxes.csv");
                output::write_boxes(&p, isolation)?;
                written.push(p);
                if let Some(s) = solve {
                    let p = with(".trace.csv");
                    output::write_trace(&p, s)?;
                    written.push(p);
                }
            }
            Self::Optimize(r) => {
                let p = with(".steps.csv");
                output::write_steps(&p, r)?;
                written.push(p);
            }
        }
        Ok(written)
    }
}

fn solver_params(solver: &SolverOverrides, ov: &Overrides) -> Result<SolverParams, CliError> {
    let mut s = *solver;
    if ov.tol.is_some() {
        s.tol = ov.tol;
    }
    s.params()
}

fn build_law(spec: &DistributionSpec, base: Option<&Path>) -> Result<Arc<dyn Distribution>, CliError> {
    let load = |p: &PathBuf| {
        read_samples(&resolve(base, p)).map_err(|e| lambdaq::Error::Domain(e.to_string()))
    };
    Ok(spec.build(&load)?)
}

/// `base` is the config file location, used to resolve relative sample paths.
pub fn run_quantile(cfg: &QuantileConfig, base: Option<&Path>, ov: &Overrides) -> Result<RunResult, CliError> {
    let params = solver_params(&cfg.solver, ov)?;
    let law = build_law(&cfg.distribution, base)?;
    let lam = cfg.lambda.build()?;
    Ok(RunResult::Quantile(lambda_quantile(law.as_ref(), lam.as_ref(), &params)?))
}

pub fn run_empirical(cfg: &EmpiricalConfig, base: Option<&Path>) -> Result<RunResult, CliError> {
    let values = match (&cfg.samples, &cfg.samples_csv) {
        (Some(v), None) => v.clone(),
        (None, Some(p)) => read_samples(&resolve(base, p))?,
        _ => {
            return Err(CliError::Input(
                "empirical config needs exactly one of samples or samples_csv".into(),
            ))
        }
    };
    let samples = SampleSet::new(values)?;
    let lam = cfg.lambda.build()?;
    Ok(RunResult::Empirical(empirical_lambda_quantile(&samples, lam.as_ref())?))
}

pub fn run_isolate(cfg: &IsolateConfig, base: Option<&Path>, ov: &Overrides) -> Result<RunResult, CliError> {
    let params = solver_params(&cfg.solver, ov)?;
    let law = build_law(&cfg.distribution, base)?;
    let lam = cfg.lambda.build()?;
    let (lo, hi) = match cfg.interval {
        Some(iv) => iv,
        None => {
            let (m, mx) = lam.bounds();
            law.bracket(m, mx)?
        }
    };
    let n = ov.subdivisions.unwrap_or(cfg.subdivisions);
    let isolation = isolate(law.as_ref(), lam.as_ref(), lo, hi, n)?;
    let solve_report = match (cfg.solve, isolation.selected_box()) {
        (true, Some(b)) => {
            let problem = residual_fn(law.as_ref(), lam.as_ref())?.with_bracket(b.lo, b.hi)?;
            Some(solve(&problem, &params)?)
        }
        _ => None,
    };
    Ok(RunResult::Isolate {
        isolation,
        solve_requested: cfg.solve,
        solve: solve_report,
    })
}

pub fn run_optimize(cfg: &OptimizeConfig, ov: &Overrides) -> Result<RunResult, CliError> {
    let market = cfg.market.build()?;
    let lam = cfg.lambda.build()?;
    let configured: Method = cfg.method.into();
    let method = match (ov.method, ov.penalty_t) {
        (Some(MethodName::Kkt), _) => Method::Kkt,
        (Some(MethodName::Penalty), t) | (None, t @ Some(_)) => {
            let base_t = match configured {
                Method::Penalty { t } => t,
                Method::Kkt => DEFAULT_PENALTY_T,
            };
            Method::Penalty { t: t.unwrap_or(base_t) }
        }
        (None, None) => configured,
    };
    let d = DescentParams::default();
    let descent = DescentParams {
        eta0: cfg.eta0.unwrap_or(d.eta0),
        c1: cfg.c1.unwrap_or(d.c1),
        tol: ov.tol.or(cfg.tol).unwrap_or(d.tol),
        max_steps: cfg.max_steps.unwrap_or(d.max_steps),
        rule: cfg.armijo.unwrap_or(d.rule),
        ..d
    };
    let mut problem = AllocationProblem::new(market, lam, cfg.r_min, cfg.w_init.clone(), method)?;
    problem.solver = cfg.solver.params()?;
    problem.descent = descent;
    Ok(RunResult::Optimize(optimize(&problem)?))
}
