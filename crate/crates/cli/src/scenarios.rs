//! Bundled reproduction scenarios and their pass/fail checks.

use std::path::{Path, PathBuf};

use lambdaq::isolation::IsolationReport;
use lambdaq::portfolio::OptimReport;
use lambdaq::{SolveReport, StepKind};
use serde::{Deserialize, Serialize};

use crate::commands::{run_empirical, run_isolate, run_optimize, run_quantile, Overrides, RunResult};
use crate::config::{self, EmpiricalConfig, IsolateConfig, OptimizeConfig, QuantileConfig};
use crate::error::CliError;
use crate::output;

/// Name and fixture text of every bundled scenario, sorted by name.
pub const SCENARIOS: [(&str, &str); 9] = [
    ("disc1", include_str!("../scenarios/disc1.json")),
    ("disc2", include_str!("../scenarios/disc2.json")),
    ("dweibull", include_str!("../scenarios/dweibull.json")),
    ("example1", include_str!("../scenarios/example1.json")),
    ("interval", include_str!("../scenarios/interval.json")),
    ("student_t", include_str!("../scenarios/student_t.json")),
    ("three_asset_normal", include_str!("../scenarios/three_asset_normal.json")),
    ("three_asset_t", include_str!("../scenarios/three_asset_t.json")),
    ("two_asset", include_str!("../scenarios/two_asset.json")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "snake_case")]
pub enum RunCommand {
    Quantile(QuantileConfig),
    Empirical(EmpiricalConfig),
    Isolate(IsolateConfig),
    Optimize(OptimizeConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub label: String,
    #[serde(flatten)]
    pub run: RunCommand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub runs: Vec<RunSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub scenario: String,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

impl ScenarioOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn names() -> impl Iterator<Item = &'static str> {
    SCENARIOS.iter().map(|(n, _)| *n)
}

pub fn load(name: &str) -> Result<Scenario, CliError> {
    let (_, text) = SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| CliError::UnknownScenario(name.to_string()))?;
    config::parse(text, name)
}

pub fn execute(spec: &RunSpec) -> Result<RunResult, CliError> {
    let ov = Overrides::default();
    match &spec.run {
        RunCommand::Quantile(c) => run_quantile(c, None, &ov),
        RunCommand::Empirical(c) => run_empirical(c, None),
        RunCommand::Isolate(c) => run_isolate(c, None, &ov),
        RunCommand::Optimize(c) => run_optimize(c, &ov),
    }
}

/// Runs one bundled scenario, writing `<out>/<name>/<label>.json` plus CSV
/// side files and a `checks.json` summary.
pub fn reproduce(name: &str, out: &Path) -> Result<ScenarioOutcome, CliError> {
    let scenario = load(name)?;
    let dir = out.join(name);
    let mut results = Vec::new();
    let mut files = Vec::new();
    for spec in &scenario.runs {
        let result = execute(spec)?;
        let path = dir.join(format!("{}.json", spec.label));
        output::write_text(&path, &result.json()?)?;
        files.push(path);
        files.extend(result.write_sidecars(&dir.join(&spec.label))?);
        results.push((spec.label.clone(), result));
    }
    let checks = checks(name, &Results(results));
    let path = dir.join("checks.json");
    output::write_text(&path, &output::to_json(&checks)?)?;
    files.push(path);
    Ok(ScenarioOutcome {
        scenario: name.to_string(),
        checks,
        files,
    })
}

/// Runs several scenarios concurrently; outcomes come back in input order.
pub fn reproduce_many(names: &[&str], out: &Path) -> Vec<Result<ScenarioOutcome, CliError>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = names
            .iter()
            .map(|n| s.spawn(move || reproduce(n, out)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario thread panicked"))
            .collect()
    })
}

struct Results(Vec<(String, RunResult)>);

impl Results {
    fn get(&self, label: &str) -> &RunResult {
        &self
            .0
            .iter()
            .find(|(l, _)| l == label)
            .unwrap_or_else(|| panic!("scenario has no run {label:?}"))
            .1
    }

    fn solve(&self, label: &str) -> &SolveReport {
        match self.get(label) {
            RunResult::Quantile(r) => r,
            RunResult::Isolate { solve: Some(r), .. } => r,
            other => panic!("run {label:?} has no solve report: {other:?}"),
        }
    }

    fn isolation(&self, label: &str) -> &IsolationReport {
        match self.get(label) {
            RunResult::Isolate { isolation, .. } => isolation,
            other => panic!("run {label:?} is not an isolation: {other:?}"),
        }
    }

    fn optim(&self, label: &str) -> &OptimReport {
        match self.get(label) {
            RunResult::Optimize(r) => r,
            other => panic!("run {label:?} is not an optimisation: {other:?}"),
        }
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn within(name: &str, got: f64, want: f64, tol: f64) -> Check {
    check(name, (got - want).abs() <= tol, format!("{got:.8} vs {want} +- {tol:e}"))
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn weights_within(name: &str, got: &[f64], want: &[f64], tol: f64) -> Check {
    let g = max_gap(got, want);
    check(name, g <= tol, format!("{got:.6?} vs {want:?}, gap {g:.2e}"))
}

fn in_range<T: PartialOrd + std::fmt::Debug>(name: &str, v: T, lo: T, hi: T) -> Check {
    let passed = v >= lo && v <= hi;
    check(name, passed, format!("{v:?} in [{lo:?}, {hi:?}]"))
}

/// Bisection steps strictly before Newton steps, both present.
fn bisection_then_newton(r: &SolveReport) -> (bool, Option<usize>) {
    let kinds: Vec<StepKind> = r.step_kinds();
    let first = kinds.iter().position(|k| *k == StepKind::Newton);
    let ok = first.is_some_and(|n| {
        n > 0
            && kinds[..n].iter().all(|k| *k == StepKind::Bisection)
            && kinds[n..].iter().all(|k| *k == StepKind::Newton)
    });
    (ok, first)
}

const INTERVAL_ROOTS: [f64; 2] = [-1.407_648_645_277_196, -0.741_778_375_546_612_6];

fn checks(name: &str, r: &Results) -> Vec<Check> {
    match name {
        "example1" => {
            let s = r.solve("solve");
            let (ok, first) = bisection_then_newton(s);
            vec![
                within("root", s.root, -0.519755, 1e-5),
                in_range("iterations", s.steps(), 1, 10),
                check("bisection_then_newton", ok, format!("first newton step {first:?}")),
            ]
        }
        "student_t" => {
            let s = r.solve("solve");
            vec![
                check(
                    "newton_only",
                    s.bisection_steps == 0 && s.newton_steps > 0,
                    format!("{} newton, {} bisection", s.newton_steps, s.bisection_steps),
                ),
                in_range("iterations", s.steps(), 1, 5),
                within("residual", s.residual, 0.0, 1e-9),
            ]
        }
        "dweibull" => {
            let s = r.solve("solve");
            let (ok, first) = bisection_then_newton(s);
            vec![
                check("two_bisections_then_newton", ok && first == Some(2), format!("first newton step {first:?}")),
                within("tight_rerun", s.root, r.solve("tight").root, 1e-10),
            ]
        }
        "disc1" => {
            let s = r.solve("solve");
            vec![
                check("converged", s.converged, s.exit_reason.as_str().to_string()),
                check(
                    "mixed_steps",
                    s.newton_steps > 0 && s.bisection_steps > 0,
                    format!("{} newton, {} bisection", s.newton_steps, s.bisection_steps),
                ),
                in_range("iterations", s.steps(), 1, 12),
            ]
        }
        "disc2" => {
            let s = r.solve("solve");
            let width = s.trace[0].bracket_right - s.trace[0].bracket_left;
            let expected = (width / lambdaq::SolverParams::default().tol).log2().ceil() as i64;
            vec![
                check("converged", s.converged, s.exit_reason.as_str().to_string()),
                check("bisection_only", s.newton_steps == 0, format!("{} newton steps", s.newton_steps)),
                in_range("bisection_count", s.bisection_steps as i64, expected - 2, expected + 2),
            ]
        }
        "interval" => {
            let coarse = r.isolation("coarse");
            let fine = r.isolation("fine");
            let whole = &r.isolation("whole").cells[0];
            let union_ok = INTERVAL_ROOTS
                .iter()
                .all(|&x| coarse.candidates.iter().any(|c| c.lo <= x && x <= c.hi));
            let mut out = vec![
                in_range("coarse_boxes", coarse.candidates.len(), 2, 2),
                check("coarse_boxes_hold_roots", union_ok, format!("{:?}", coarse.candidates.iter().map(|c| (c.lo, c.hi)).collect::<Vec<_>>())),
                within("enclosure_lo", whole.range_lo, -0.290, 0.01),
                within("enclosure_hi", whole.range_hi, 0.266, 0.01),
                check(
                    "evaluation_counts",
                    coarse.cdf_evaluations == 9
                        && coarse.lambda_evaluations == 9
                        && fine.cdf_evaluations == 33
                        && fine.lambda_evaluations == 33,
                    format!(
                        "{}/{} and {}/{}",
                        coarse.cdf_evaluations, coarse.lambda_evaluations, fine.cdf_evaluations, fine.lambda_evaluations
                    ),
                ),
            ];
            match (fine.selected_box(), fine.residual_bound) {
                (Some(b), Some((lo, hi))) => {
                    out.push(check(
                        "fine_box_holds_smallest_root",
                        b.lo <= INTERVAL_ROOTS[0] && INTERVAL_ROOTS[0] <= b.hi,
                        format!("[{:.4}, {:.4}]", b.lo, b.hi),
                    ));
                    out.push(within("fine_bound_lo", lo, -0.0095, 5e-4));
                    out.push(within("fine_bound_hi", hi, 0.0011, 5e-4));
                }
                _ => out.push(check("fine_box_holds_smallest_root", false, "no box selected".into())),
            }
            out.push(within("root", r.solve("fine").root, INTERVAL_ROOTS[0], 1e-7));
            out.push(within("coarse_matches_fine", r.solve("coarse").root, r.solve("fine").root, 1e-8));
            out
        }
        "two_asset" => {
            let p = r.optim("penalty");
            let k = r.optim("kkt");
            vec![
                weights_within("penalty_weights", &p.weights, &[0.5025, 0.4975], 2e-3),
                within("penalty_rho", p.rho, -0.185762, 5e-4),
                weights_within("kkt_weights", &k.weights, &[0.5014, 0.4986], 2e-3),
                weights_within("penalty_vs_exact", &p.weights, &[0.5, 0.5], 5e-3),
                weights_within("kkt_vs_exact", &k.weights, &[0.5, 0.5], 5e-3),
                within("penalty_rho_vs_exact", p.rho, -0.186040, 5e-4),
                within("kkt_rho_vs_exact", k.rho, -0.186040, 5e-4),
                in_range("penalty_steps", p.descent_steps, 4, 15),
                in_range("kkt_steps", k.descent_steps, 10, 40),
                check("penalty_relative_calls", p.relative_solver_calls > 1.5, format!("{:.3}", p.relative_solver_calls)),
                in_range("kkt_relative_calls", k.relative_solver_calls, 1.0, 1.5),
                in_range("penalty_steps_per_call", p.relative_solver_steps, 1.5, 4.0),
                in_range("kkt_steps_per_call", k.relative_solver_steps, 1.5, 4.0),
            ]
        }
        "three_asset_normal" => {
            let gaps: Vec<f64> = ["1e-2", "1e-3", "1e-4"]
                .iter()
                .map(|t| {
                    max_gap(
                        &r.optim(&format!("penalty_tol_{t}")).weights,
                        &r.optim(&format!("kkt_tol_{t}")).weights,
                    )
                })
                .collect();
            let p = r.optim("penalty_tol_1e-4");
            let k = r.optim("kkt_tol_1e-4");
            vec![
                within("penalty_return", p.expected_return * 100.0, 1.5, 0.01),
                within("kkt_return", k.expected_return * 100.0, 1.5, 0.01),
                within("penalty_rho", p.rho, -0.0390, 1e-3),
                within("kkt_rho", k.rho, -0.0390, 1e-3),
                weights_within("methods_agree", &p.weights, &k.weights, 5e-3),
                check("gap_shrinks", gaps[0] > gaps[1] && gaps[1] > gaps[2], format!("{:.3e} > {:.3e} > {:.3e}", gaps[0], gaps[1], gaps[2])),
                within("kkt_return_tol_1e-3", r.optim("kkt_tol_1e-3").expected_return * 100.0, 1.5013, 0.02),
            ]
        }
        "three_asset_t" => {
            let up = r.optim("unconstrained_penalty");
            let uk = r.optim("unconstrained_kkt");
            let op = r.optim("one_active_penalty");
            let ok = r.optim("one_active_kkt");
            vec![
                within("unconstrained_penalty_rho", up.rho, -0.293923, 1e-4),
                within("unconstrained_kkt_rho", uk.rho, -0.293923, 1e-4),
                within("unconstrained_agree", up.rho, uk.rho, 1e-5),
                within("one_active_penalty_return", op.expected_return * 100.0, 1.5, 0.02),
                within("one_active_kkt_return", ok.expected_return * 100.0, 1.5, 0.02),
                within("one_active_penalty_rho", op.rho, -0.254279, 1e-3),
                within("one_active_kkt_rho", ok.rho, -0.254279, 1e-3),
            ]
        }
        _ => Vec::new(),
    }
}
