//! Safeguarded Newton-bisection for `f(x) = F(x) - Lambda(x) = 0`.
//!
//! Starting from the midpoint of a bracket `[x_min, x_max]` with
//! `f(x_min) <= 0 <= f(x_max)`, every iteration shrinks the bracket to the
//! side indicated by the sign of `f` and proposes a Newton step. The Newton
//! iterate is kept only when it lands inside
//! `(x_l + delta |dx|, x_r - delta |dx|)`; otherwise the bracket midpoint is
//! used. A missing or vanishing derivative yields an infinite step and hence
//! a bisection.

use serde::Serialize;

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::lambda::LambdaFn;

/// Derivative value signalling "no derivative available here"; forces a
/// bisection step.
pub const NO_DERIVATIVE: f64 = f64::NAN;

/// A scalar root problem with a starting bracket.
pub struct RootProblem<'a> {
    f: Box<dyn Fn(f64) -> f64 + 'a>,
    fprime: Box<dyn Fn(f64) -> f64 + 'a>,
    pub x_min: f64,
    pub x_max: f64,
}

impl<'a> RootProblem<'a> {
    pub fn new(
        f: impl Fn(f64) -> f64 + 'a,
        fprime: impl Fn(f64) -> f64 + 'a,
        x_min: f64,
        x_max: f64,
    ) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min <= x_max) {
            return Err(Error::InvalidParameter(format!(
                "bracket must be finite with x_min <= x_max, got [{x_min}, {x_max}]"
            )));
        }
        Ok(Self {
            f: Box::new(f),
            fprime: Box::new(fprime),
            x_min,
            x_max,
        })
    }

    pub fn f(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn fprime(&self, x: f64) -> f64 {
        (self.fprime)(x)
    }

    /// Same functions on a different bracket.
    pub fn with_bracket(self, x_min: f64, x_max: f64) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min <= x_max) {
            return Err(Error::InvalidParameter(format!(
                "bracket must be finite with x_min <= x_max, got [{x_min}, {x_max}]"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            ..self
        })
    }
}

impl std::fmt::Debug for RootProblem<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RootProblem")
            .field("x_min", &self.x_min)
            .field("x_max", &self.x_max)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverParams {
    pub delta: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            delta: 0.01,
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

impl SolverParams {
    pub fn new(delta: f64, max_iter: usize, tol: f64) -> Result<Self> {
        let p = Self {
            delta,
            max_iter,
            tol,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_tol(self, tol: f64) -> Result<Self> {
        Self::new(self.delta, self.max_iter, tol)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0, 0.5), got {}",
                self.delta
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidParameter("tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Initial,
    Newton,
    Bisection,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Initial => "initial",
            StepKind::Newton => "newton",
            StepKind::Bisection => "bisection",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitReason {
    ResidualSmall,
    BracketSmall,
    MaxIter,
    /// Only produced by [`plain_newton`].
    Diverged,
}

impl ExitReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExitReason::ResidualSmall => "residual_small",
            ExitReason::BracketSmall => "bracket_small",
            ExitReason::MaxIter => "max_iter",
            ExitReason::Diverged => "diverged",
        }
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub x: f64,
    /// `f(x)`; NaN if the iterate was never evaluated.
    pub f: f64,
    pub kind: StepKind,
    pub bracket_left: f64,
    pub bracket_right: f64,
    /// The Newton proposal replaced by this bisection step, if any.
    pub rejected_newton: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub root: f64,
    pub residual: f64,
    pub converged: bool,
    pub exit_reason: ExitReason,
    pub trace: Vec<TraceEntry>,
    pub newton_steps: usize,
    pub bisection_steps: usize,
}

impl SolveReport {
    /// Newton plus bisection steps.
    pub fn steps(&self) -> usize {
        self.newton_steps + self.bisection_steps
    }

    /// Step kinds after the initial entry, in order.
    pub fn step_kinds(&self) -> Vec<StepKind> {
        self.trace
            .iter()
            .filter(|e| e.kind != StepKind::Initial)
            .map(|e| e.kind)
            .collect()
    }

    fn finish(mut trace: Vec<TraceEntry>, root: f64, residual: f64, exit: ExitReason) -> Self {
        if let Some(last) = trace.last_mut() {
            if last.x == root && last.f.is_nan() {
                last.f = residual;
            }
        }
        let newton_steps = trace.iter().filter(|e| e.kind == StepKind::Newton).count();
        let bisection_steps = trace.iter().filter(|e| e.kind == StepKind::Bisection).count();
        Self {
            root,
            residual,
            converged: matches!(exit, ExitReason::ResidualSmall | ExitReason::BracketSmall),
            exit_reason: exit,
            trace,
            newton_steps,
            bisection_steps,
        }
    }
}

/// Residual problem `F - Lambda` with derivative `pdf - Lambda'` on the
/// bracket `dist.bracket(lambda_m, lambda_M)`.
pub fn residual_fn<'a>(dist: &'a dyn Distribution, lam: &'a dyn LambdaFn) -> Result<RootProblem<'a>> {
    let (lambda_m, lambda_max) = lam.bounds();
    let (x_min, x_max) = dist.bracket(lambda_m, lambda_max)?;
    RootProblem::new(
        move |x| dist.cdf(x) - lam.eval(x),
        move |x| match dist.pdf(x) {
            Ok(p) => p - lam.rderiv(x),
            Err(_) => NO_DERIVATIVE,
        },
        x_min,
        x_max,
    )
}

/// The safeguarded Newton-bisection iteration.
pub fn solve(problem: &RootProblem<'_>, params: &SolverParams) -> Result<SolveReport> {
    params.validate()?;
    let eps = params.tol;
    let (mut xl, mut xr) = (problem.x_min, problem.x_max);
    let mut x0 = 0.5 * (xl + xr);

    let fl = problem.f(xl);
    let fr = problem.f(xr);
    let endpoint = |x: f64, fx: f64| {
        let entry = TraceEntry {
            x,
            f: fx,
            kind: StepKind::Initial,
            bracket_left: problem.x_min,
            bracket_right: problem.x_max,
            rejected_newton: None,
        };
        SolveReport::finish(vec![entry], x, fx, ExitReason::ResidualSmall)
    };
    if fl.abs() < eps {
        return Ok(endpoint(xl, fl));
    }
    if fr.abs() < eps {
        return Ok(endpoint(xr, fr));
    }
    if !(fl < 0.0 && fr > 0.0) {
        return Err(Error::Precondition(format!(
            "bracket [{xl}, {xr}] does not enclose a sign change: f = ({fl}, {fr})"
        )));
    }

    let mut trace = vec![TraceEntry {
        x: x0,
        f: f64::NAN,
        kind: StepKind::Initial,
        bracket_left: xl,
        bracket_right: xr,
        rejected_newton: None,
    }];

    for _ in 0..params.max_iter {
        let f0 = problem.f(x0);
        if let Some(last) = trace.last_mut() {
            last.f = f0;
        }
        if f0.abs() < eps {
            return Ok(SolveReport::finish(trace, x0, f0, ExitReason::ResidualSmall));
        }
        if f0 < 0.0 {
            xl = x0;
        } else {
            xr = x0;
        }
        if xr - xl < eps {
            return Ok(SolveReport::finish(trace, x0, f0, ExitReason::BracketSmall));
        }

        let df0 = problem.fprime(x0);
        let mut dx = -f0 / df0;
        if !dx.is_finite() {
            dx = if f0 < 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
        }
        let proposal = x0 + dx;
        let margin = params.delta * dx.abs();
        let (next, kind, rejected) = if proposal >= xr - margin || proposal <= xl + margin {
            (0.5 * (xl + xr), StepKind::Bisection, Some(proposal))
        } else {
            (proposal, StepKind::Newton, None)
        };
        x0 = next;
        trace.push(TraceEntry {
            x: x0,
            f: f64::NAN,
            kind,
            bracket_left: xl,
            bracket_right: xr,
            rejected_newton: rejected,
        });
    }

    let residual = problem.f(x0);
    Ok(SolveReport::finish(trace, x0, residual, ExitReason::MaxIter))
}

/// Lambda quantile `inf { x : F(x) > Lambda(x) }` under a single crossing.
pub fn lambda_quantile(
    dist: &dyn Distribution,
    lam: &dyn LambdaFn,
    params: &SolverParams,
) -> Result<SolveReport> {
    let problem = residual_fn(dist, lam)?;
    solve(&problem, params)
}

/// Undamped Newton iteration from `x0`. Stops on a non-finite iterate
/// (reported as diverged), when `|f| < 1e-14`, or after `max_iter` steps.
pub fn plain_newton(problem: &RootProblem<'_>, x0: f64, max_iter: usize) -> SolveReport {
    const TOL: f64 = 1e-14;
    let mut x = x0;
    let mut trace = vec![TraceEntry {
        x,
        f: f64::NAN,
        kind: StepKind::Initial,
        bracket_left: f64::NEG_INFINITY,
        bracket_right: f64::INFINITY,
        rejected_newton: None,
    }];
    for _ in 0..max_iter {
        let fx = problem.f(x);
        if let Some(last) = trace.last_mut() {
            last.f = fx;
        }
        if fx.abs() < TOL {
            return SolveReport::finish(trace, x, fx, ExitReason::ResidualSmall);
        }
        x -= fx / problem.fprime(x);
        trace.push(TraceEntry {
            x,
            f: f64::NAN,
            kind: StepKind::Newton,
            bracket_left: f64::NEG_INFINITY,
            bracket_right: f64::INFINITY,
            rejected_newton: None,
        });
        if !x.is_finite() {
            return SolveReport::finish(trace, x, f64::NAN, ExitReason::Diverged);
        }
    }
    let fx = problem.f(x);
    SolveReport::finish(trace, x, fx, ExitReason::MaxIter)
}

/// Strictly consistent scoring function `S(x, y) = (x - y)_+ - int_y^x Lambda`.
pub fn score(lam: &dyn LambdaFn, x: f64, y: f64) -> f64 {
    (x - y).max(0.0) - lam.antideriv(y, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{DoubleWeibull, EmpiricalDist, NormalDist};
    use crate::lambda::{ConstantLambda, PiecewiseExpLambda};

    fn example_one() -> (NormalDist, PiecewiseExpLambda) {
        (
            NormalDist::new(0.0, 1.0 / 3.0).unwrap(),
            PiecewiseExpLambda::continuous(1e-4, 0.06, (1e-3f64).ln(), (0.6f64).ln()).unwrap(),
        )
    }

    #[test]
    fn defaults() {
        let p = SolverParams::default();
        assert_eq!((p.delta, p.max_iter, p.tol), (0.01, 100, 1e-8));
    }

    #[test]
    fn params_validation() {
        assert!(SolverParams::new(0.5, 10, 1e-8).is_err());
        assert!(SolverParams::new(0.0, 10, 1e-8).is_err());
        assert!(SolverParams::new(0.1, 0, 1e-8).is_err());
        let err = SolverParams::new(0.1, 10, -1.0).unwrap_err();
        assert!(err.to_string().contains("tol must be positive"));
    }

    #[test]
    fn residual_vanishes_at_example_one_root() {
        let (d, l) = example_one();
        let p = residual_fn(&d, &l).unwrap();
        assert!(p.f(-0.519_755_723_302_034_6).abs() < 1e-6);
    }

    #[test]
    fn empirical_residual_has_no_derivative() {
        let d = EmpiricalDist::new(vec![1.0, 2.0, 3.0]).unwrap();
        let l = ConstantLambda::new(0.5).unwrap();
        let p = residual_fn(&d, &l).unwrap();
        for x in [0.0, 1.5, 2.0, 10.0] {
            assert!(p.fprime(x).is_nan());
        }
    }

    #[test]
    fn midpoint_root_exits_on_first_evaluation() {
        let d = NormalDist::new(0.0, 1.0).unwrap();
        let l = ConstantLambda::new(0.5).unwrap();
        let p = RootProblem::new(|x| d.cdf(x) - l.eval(x), |x| d.pdf(x).unwrap(), -1.0, 1.0).unwrap();
        let params = SolverParams::new(0.01, 100, 1e-2).unwrap();
        let r = solve(&p, &params).unwrap();
        assert_eq!(r.root, 0.0);
        assert_eq!(r.exit_reason, ExitReason::ResidualSmall);
        assert_eq!(r.steps(), 0);
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn endpoint_checks_return_the_endpoint() {
        let p = RootProblem::new(|x| x, |_| 1.0, 0.0, 1.0).unwrap();
        let r = solve(&p, &SolverParams::default()).unwrap();
        assert_eq!(r.root, 0.0);
        let p = RootProblem::new(|x| x - 1.0, |_| 1.0, -1.0, 1.0).unwrap();
        let r = solve(&p, &SolverParams::default()).unwrap();
        assert_eq!(r.root, 1.0);
        assert!(r.converged);
    }

    #[test]
    fn invalid_bracket_signs_are_a_precondition_error() {
        let p = RootProblem::new(|x| x * x + 1.0, |x| 2.0 * x, -1.0, 1.0).unwrap();
        assert!(matches!(solve(&p, &SolverParams::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn max_iter_is_reported_not_raised() {
        let p = RootProblem::new(|x| x - 0.123_456_789, |_| NO_DERIVATIVE, -1.0, 1.0).unwrap();
        let params = SolverParams::new(0.01, 3, 1e-12).unwrap();
        let r = solve(&p, &params).unwrap();
        assert!(!r.converged);
        assert_eq!(r.exit_reason, ExitReason::MaxIter);
        assert_eq!(r.bisection_steps, 3);
    }

    #[test]
    fn zero_derivative_forces_bisection() {
        let p = RootProblem::new(|x| x.powi(3) - 0.001, |_| 0.0, -1.0, 1.0).unwrap();
        let r = solve(&p, &SolverParams::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.newton_steps, 0);
        assert!(r.trace.iter().skip(1).all(|e| e.rejected_newton.is_some()));
    }

    #[test]
    fn example_one_converges_after_bisection_phase() {
        let (d, l) = example_one();
        let r = lambda_quantile(&d, &l, &SolverParams::default()).unwrap();
        assert!(r.converged);
        assert!((r.root - -0.519_755_723_302_034_6).abs() < 1e-6);
        let kinds = r.step_kinds();
        let first_newton = kinds.iter().position(|k| *k == StepKind::Newton).unwrap();
        assert!(first_newton > 0);
        assert!(kinds[first_newton..].iter().all(|k| *k == StepKind::Newton));
        assert!(kinds.len() <= 10);
    }

    #[test]
    fn counters_match_trace_and_brackets_shrink() {
        let (d, l) = example_one();
        let r = lambda_quantile(&d, &l, &SolverParams::default()).unwrap();
        assert_eq!(r.steps(), r.trace.len() - 1);
        for w in r.trace.windows(2) {
            assert!(w[1].bracket_right - w[1].bracket_left <= w[0].bracket_right - w[0].bracket_left);
        }
    }

    #[test]
    fn plain_newton_explodes_on_example_one() {
        let (d, l) = example_one();
        let p = residual_fn(&d, &l).unwrap();
        let x0 = 0.5 * (p.x_min + p.x_max);
        let r = plain_newton(&p, x0, 10);
        assert_eq!(r.exit_reason, ExitReason::Diverged);
        assert!((r.trace[1].x - -9.13).abs() < 0.01, "first iterate {}", r.trace[1].x);
        assert!(r.trace[2].x.abs() > 1e100);
        assert!(!r.trace[3].x.is_finite());
    }

    #[test]
    fn plain_newton_converges_on_well_conditioned_root() {
        let d = NormalDist::new(0.0, 1.0).unwrap();
        let l = ConstantLambda::new(0.5).unwrap();
        let p = residual_fn(&d, &l).unwrap();
        let r = plain_newton(&p, 0.1, 5);
        assert!(r.converged);
        assert!(r.root.abs() < 1e-12);
    }

    #[test]
    fn plain_newton_heads_away_from_the_double_weibull_root() {
        let d = DoubleWeibull::new(5.07).unwrap();
        let l = PiecewiseExpLambda::continuous(0.1, 0.6, -3.0, 1.0).unwrap();
        let p = residual_fn(&d, &l).unwrap();
        let x0 = 0.5 * (p.x_min + p.x_max);
        let root = -0.926_982_127_671_051_8;
        assert!(p.fprime(x0) < 0.0);
        let r = plain_newton(&p, x0, 1);
        assert!((r.trace[1].x - root).abs() > (x0 - root).abs());
    }

    #[test]
    fn score_reduces_to_pinball_loss() {
        let l = ConstantLambda::new(0.5).unwrap();
        assert!((score(&l, 1.0, 0.0) - 0.5).abs() < 1e-15);
        let l = ConstantLambda::new(0.1).unwrap();
        assert!((score(&l, 0.0, 2.0) - 0.2).abs() < 1e-15);
        let (_, e) = example_one();
        for x in [-3.0, -0.5, 0.0, 2.0] {
            assert_eq!(score(&e, x, x), 0.0);
            assert_eq!(score(&l, x, x), 0.0);
        }
    }

    #[test]
    fn identical_inputs_give_identical_traces() {
        let (d, l) = example_one();
        let a = lambda_quantile(&d, &l, &SolverParams::default()).unwrap();
        let b = lambda_quantile(&d, &l, &SolverParams::default()).unwrap();
        let bits = |r: &SolveReport| -> Vec<u64> {
            r.trace
                .iter()
                .flat_map(|e| [e.x.to_bits(), e.f.to_bits(), e.bracket_left.to_bits()])
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }
}
