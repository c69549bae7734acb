//! Lambda-VaR minimising allocation over elliptical markets.
//!
//! Minimises `-rho(w'X)` over `1'w = 1` subject to `w'mu >= r_min` and
//! `w >= 0`, either with a quadratic penalty or with Lagrange multipliers,
//! by Armijo-damped gradient descent on the affine subspace.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distributions::{Distribution, LocationScaleT, NormalDist};
use crate::error::{Error, Result};
use crate::lambda::LambdaFn;
use crate::solver::{self, SolveReport, SolverParams};

pub const DEFAULT_PENALTY_T: f64 = 100.0;
const MULTIPLIER_RATE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Normal,
    StudentT { nu: f64 },
}

/// Joint law of the asset returns.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    family: Family,
    mu: DVector<f64>,
    cov: DMatrix<f64>,
}

impl MarketModel {
    pub fn new(family: Family, mu: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mu.len();
        if d < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 assets, got {d}")));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::InvalidParameter(format!(
                "covariance is {}x{}, expected {d}x{d}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if let Family::StudentT { nu } = family {
            if !(nu.is_finite() && nu > 0.0) {
                return Err(Error::InvalidParameter(format!("nu must be positive, got {nu}")));
            }
        }
        if mu.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("market parameters must be finite".into()));
        }
        for i in 0..d {
            if cov[(i, i)] < 0.0 {
                return Err(Error::InvalidParameter(format!("negative variance for asset {i}")));
            }
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidParameter("covariance is not symmetric".into()));
                }
            }
        }
        Ok(Self {
            family,
            mu: DVector::from_vec(mu),
            cov,
        })
    }

    /// `Sigma = (sigma sigma') .* corr`.
    pub fn from_sigma_corr(
        family: Family,
        mu: Vec<f64>,
        sigma: &[f64],
        corr: &[Vec<f64>],
    ) -> Result<Self> {
        let d = sigma.len();
        if corr.len() != d || corr.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidParameter(format!("correlation must be {d}x{d}")));
        }
        if sigma.iter().any(|&s| s.is_nan() || s < 0.0) {
            return Err(Error::InvalidParameter("volatilities must be nonnegative".into()));
        }
        let cov = DMatrix::from_fn(d, d, |i, j| sigma[i] * sigma[j] * corr[i][j]);
        Self::new(family, mu, cov)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    fn check_weights(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::InvalidParameter(format!(
                "expected {} weights, got {}",
                self.dim(),
                w.len()
            )));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("weights must be finite".into()));
        }
        Ok(())
    }

    /// `(mu_w, sigma_w)` of the portfolio `w'X`.
    pub fn moments(&self, w: &[f64]) -> Result<(f64, f64)> {
        self.check_weights(w)?;
        let w = DVector::from_column_slice(w);
        let var = w.dot(&(&self.cov * &w));
        Ok((w.dot(&self.mu), var.max(0.0).sqrt()))
    }
}

/// Univariate law of a portfolio.
#[derive(Debug, Clone, PartialEq)]
pub enum PortfolioLaw {
    Normal(NormalDist),
    StudentT(LocationScaleT),
}

impl PortfolioLaw {
    fn inner(&self) -> &dyn Distribution {
        match self {
            Self::Normal(d) => d,
            Self::StudentT(d) => d,
        }
    }
}

impl Distribution for PortfolioLaw {
    fn cdf(&self, x: f64) -> f64 {
        self.inner().cdf(x)
    }

    fn pdf(&self, x: f64) -> Result<f64> {
        self.inner().pdf(x)
    }

    fn inverse_cdf(&self, p: f64) -> Option<f64> {
        self.inner().inverse_cdf(p)
    }

    fn center(&self) -> f64 {
        self.inner().center()
    }
}

pub fn portfolio_law(market: &MarketModel, w: &[f64]) -> Result<PortfolioLaw> {
    let (mu_w, sigma_w) = market.moments(w)?;
    if sigma_w.is_nan() || sigma_w <= 0.0 {
        return Err(Error::DegeneratePortfolio { sigma_w });
    }
    Ok(match market.family {
        Family::Normal => PortfolioLaw::Normal(NormalDist::new(mu_w, sigma_w)?),
        Family::StudentT { nu } => PortfolioLaw::StudentT(LocationScaleT::new(nu, mu_w, sigma_w)?),
    })
}

/// Lambda quantile of a portfolio and its gradient in the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoGrad {
    pub rho: f64,
    pub grad: Vec<f64>,
    pub report: SolveReport,
}

fn warm_solve(
    law: &PortfolioLaw,
    lam: &dyn LambdaFn,
    params: &SolverParams,
    warm_start: Option<f64>,
) -> Result<SolveReport> {
    if let Some(x) = warm_start.filter(|x| x.is_finite()) {
        let h = (100.0 * params.tol).max(1e-3);
        let problem = solver::residual_fn(law, lam)?.with_bracket(x - h, x + h)?;
        match solver::solve(&problem, params) {
            Ok(r) => return Ok(r),
            Err(Error::Precondition(_)) => {}
            Err(e) => return Err(e),
        }
    }
    solver::lambda_quantile(law, lam, params)
}

pub fn rho_and_grad(
    market: &MarketModel,
    lam: &dyn LambdaFn,
    w: &[f64],
    params: &SolverParams,
    warm_start: Option<f64>,
) -> Result<RhoGrad> {
    let law = portfolio_law(market, w)?;
    let (mu_w, sigma_w) = market.moments(w)?;
    let report = warm_solve(&law, lam, params, warm_start)?;
    let rho = report.root;
    let density = law.pdf(rho)?;
    let lambda_deriv = lam.rderiv(rho);
    if density.is_nan() || density <= lambda_deriv {
        return Err(Error::GradientUndefined {
            rho,
            density,
            lambda_deriv,
        });
    }
    let scale = density / (density - lambda_deriv);
    let wv = DVector::from_column_slice(w);
    let cond = &market.mu + (&market.cov * &wv) * ((rho - mu_w) / (sigma_w * sigma_w));
    Ok(RhoGrad {
        rho,
        grad: (cond * scale).iter().copied().collect(),
        report,
    })
}

/// Projection onto the sum-zero tangent space of `1'w = 1`.
pub fn project_gradient(g: &[f64]) -> Vec<f64> {
    if g.is_empty() {
        return Vec::new();
    }
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    g.iter().map(|v| v - mean).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Penalty { t: f64 },
    Kkt,
}

/// Acceptance test of the line search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmijoRule {
    /// `g(w - s p) - g(w) <= -c1 s |p|^2`
    #[default]
    Decrease,
    /// `g(w - s p) - g(w) <= c1 s |p|^2`
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescentParams {
    pub eta0: f64,
    pub c1: f64,
    pub tol: f64,
    pub max_halvings: u32,
    pub max_steps: usize,
    pub rule: ArmijoRule,
}

impl Default for DescentParams {
    fn default() -> Self {
        Self {
            eta0: 2.0,
            c1: 0.1,
            tol: 1e-3,
            max_halvings: 40,
            max_steps: 10_000,
            rule: ArmijoRule::Decrease,
        }
    }
}

impl DescentParams {
    pub fn with_tol(self, tol: f64) -> Self {
        Self { tol, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eta0", self.eta0), ("c1", self.c1), ("tol", self.tol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AllocationProblem {
    pub market: MarketModel,
    pub lambda: Arc<dyn LambdaFn>,
    pub r_min: f64,
    pub w_init: Vec<f64>,
    pub solver: SolverParams,
    pub method: Method,
    pub descent: DescentParams,
}

impl AllocationProblem {
    pub fn new(
        market: MarketModel,
        lambda: Arc<dyn LambdaFn>,
        r_min: f64,
        w_init: Vec<f64>,
        method: Method,
    ) -> Result<Self> {
        let p = Self {
            market,
            lambda,
            r_min,
            w_init,
            solver: SolverParams::default(),
            method,
            descent: DescentParams::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.descent.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_min.is_finite() && self.r_min > 0.0) {
            return Err(Error::InvalidParameter(format!("r_min must be positive, got {}", self.r_min)));
        }
        self.market.check_weights(&self.w_init)?;
        let total: f64 = self.w_init.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "initial weights must sum to 1, got {total}"
            )));
        }
        if let Method::Penalty { t } = self.method {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidParameter(format!("penalty t must be positive, got {t}")));
            }
        }
        self.solver.validate()?;
        self.descent.validate()
    }

    fn penalty_t(&self) -> f64 {
        match self.method {
            Method::Penalty { t } => t,
            Method::Kkt => DEFAULT_PENALTY_T,
        }
    }

    fn return_gap(&self, w: &[f64]) -> f64 {
        1.0 - dot(w, self.market.mu.as_slice()) / self.r_min
    }

    fn penalty_value(&self, rho: f64, w: &[f64]) -> f64 {
        let t = self.penalty_t();
        let ret = self.return_gap(w).max(0.0);
        let short: f64 = w.iter().map(|&x| (-x).max(0.0).powi(2)).sum();
        -rho + 0.5 * t * ret * ret + 0.5 * t * short
    }

    fn penalty_grad(&self, grad_rho: &[f64], w: &[f64]) -> Vec<f64> {
        let t = self.penalty_t();
        let ret = self.return_gap(w).max(0.0);
        grad_rho
            .iter()
            .zip(w)
            .zip(self.market.mu.iter())
            .map(|((g, &x), m)| -g - t * ret * m / self.r_min - t * (-x).max(0.0))
            .collect()
    }

    fn lagrangian_value(&self, rho: f64, w: &[f64], lam_w: &[f64], lam_r: f64) -> f64 {
        -rho - dot(lam_w, w) + lam_r * self.return_gap(w)
    }

    fn lagrangian_grad(&self, grad_rho: &[f64], lam_w: &[f64], lam_r: f64) -> Vec<f64> {
        grad_rho
            .iter()
            .zip(lam_w)
            .zip(self.market.mu.iter())
            .map(|((g, l), m)| -g - l - lam_r * m / self.r_min)
            .collect()
    }
}

/// `-rho + (t/2)(1 - w'mu/r_min)_+^2 + (t/2) sum (-w_i)_+^2`.
pub fn penalty_objective(problem: &AllocationProblem, w: &[f64]) -> Result<f64> {
    let law = portfolio_law(&problem.market, w)?;
    let rho = solver::lambda_quantile(&law, problem.lambda.as_ref(), &problem.solver)?.root;
    Ok(problem.penalty_value(rho, w))
}

/// `-rho - lam_w'w + lam_r (1 - w'mu/r_min)`.
pub fn kkt_lagrangian(
    problem: &AllocationProblem,
    w: &[f64],
    lam_w: &[f64],
    lam_r: f64,
) -> Result<f64> {
    if lam_w.len() != w.len() {
        return Err(Error::InvalidParameter("multiplier length does not match weights".into()));
    }
    let law = portfolio_law(&problem.market, w)?;
    let rho = solver::lambda_quantile(&law, problem.lambda.as_ref(), &problem.solver)?.root;
    Ok(problem.lagrangian_value(rho, w, lam_w, lam_r))
}

/// Gradient in `w` of the penalty objective (`None` multipliers) or of the
/// Lagrangian, before projection.
pub fn objective_gradient(
    problem: &AllocationProblem,
    w: &[f64],
    multipliers: Option<(&[f64], f64)>,
) -> Result<Vec<f64>> {
    let rg = rho_and_grad(&problem.market, problem.lambda.as_ref(), w, &problem.solver, None)?;
    Ok(match multipliers {
        None => problem.penalty_grad(&rg.grad, w),
        Some((lam_w, lam_r)) => problem.lagrangian_grad(&rg.grad, lam_w, lam_r),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmijoOutcome {
    pub w_next: Vec<f64>,
    pub value: f64,
    pub halvings: u32,
    pub evals: usize,
}

/// Backtracking from step `eta0`, halving until the rule accepts.
/// `g0` is the objective at `w`; every trial costs one evaluation of `g`.
#[allow(clippy::too_many_arguments)]
pub fn armijo_step<G>(
    mut g: G,
    g0: f64,
    grad0: &[f64],
    w: &[f64],
    eta0: f64,
    c1: f64,
    max_halvings: u32,
    rule: ArmijoRule,
) -> Result<ArmijoOutcome>
where
    G: FnMut(&[f64]) -> Result<f64>,
{
    let sq = dot(grad0, grad0);
    let sign = match rule {
        ArmijoRule::Decrease => -1.0,
        ArmijoRule::Relaxed => 1.0,
    };
    let mut step = eta0;
    for j in 0..=max_halvings {
        let trial: Vec<f64> = w.iter().zip(grad0).map(|(x, p)| x - step * p).collect();
        let value = g(&trial)?;
        if value - g0 <= sign * step * c1 * sq {
            return Ok(ArmijoOutcome {
                w_next: trial,
                value,
                halvings: j,
                evals: j as usize + 1,
            });
        }
        step *= 0.5;
    }
    Err(Error::StalledLineSearch {
        halvings: max_halvings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimReport {
    pub method: Method,
    pub weights: Vec<f64>,
    pub expected_return: f64,
    pub rho: f64,
    pub lambda_w: Option<Vec<f64>>,
    pub lambda_r: Option<f64>,
    pub descent_steps: usize,
    pub solver_calls: usize,
    pub relative_solver_calls: f64,
    pub solver_steps: usize,
    pub relative_solver_steps: f64,
    pub converged: bool,
    pub grad_norm: f64,
    pub history: Vec<DescentRecord>,
}

/// State after each accepted descent step; entry 0 is the start.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescentRecord {
    pub step: usize,
    pub weights: Vec<f64>,
    pub rho: f64,
    pub grad_norm: f64,
}

struct Counters {
    calls: usize,
    steps: usize,
}

pub fn optimize(problem: &AllocationProblem) -> Result<OptimReport> {
    problem.validate()?;
    let lam = problem.lambda.as_ref();
    let kkt = matches!(problem.method, Method::Kkt);
    let dp = problem.descent;
    let d = problem.market.dim();

    let mut counters = Counters { calls: 0, steps: 0 };
    let mut eval = |w: &[f64], warm: Option<f64>| -> Result<RhoGrad> {
        let rg = rho_and_grad(&problem.market, lam, w, &problem.solver, warm)?;
        counters.calls += 1;
        counters.steps += rg.report.steps();
        Ok(rg)
    };

    let mut w = problem.w_init.clone();
    let mut state = eval(&w, None)?;
    let mut lam_w = vec![0.0; d];
    let mut lam_r = 0.0;
    let mut history = Vec::new();
    let mut descent_steps = 0;
    let mut converged = false;
    let mut grad_norm;

    loop {
        let raw = if kkt {
            problem.lagrangian_grad(&state.grad, &lam_w, lam_r)
        } else {
            problem.penalty_grad(&state.grad, &w)
        };
        let p = project_gradient(&raw);
        grad_norm = norm(&p);
        history.push(DescentRecord {
            step: descent_steps,
            weights: w.clone(),
            rho: state.rho,
            grad_norm,
        });
        if grad_norm < dp.tol && (!kkt || kkt_satisfied(problem, &w, &lam_w, lam_r, dp.tol)) {
            converged = true;
            break;
        }
        if descent_steps >= dp.max_steps {
            break;
        }

        let value_at = |rho: f64, w: &[f64]| {
            if kkt {
                problem.lagrangian_value(rho, w, &lam_w, lam_r)
            } else {
                problem.penalty_value(rho, w)
            }
        };
        let g0 = value_at(state.rho, &w);
        let warm = state.rho;
        let mut last: Option<RhoGrad> = None;
        let outcome = armijo_step(
            |trial| {
                let rg = eval(trial, Some(warm))?;
                let v = value_at(rg.rho, trial);
                last = Some(rg);
                Ok(v)
            },
            g0,
            &p,
            &w,
            dp.eta0,
            dp.c1,
            dp.max_halvings,
            dp.rule,
        )?;
        w = outcome.w_next;
        state = last.expect("line search evaluates at least once");
        descent_steps += 1;

        if kkt {
            for (l, &x) in lam_w.iter_mut().zip(&w) {
                *l = (*l - MULTIPLIER_RATE * x).max(0.0);
            }
            lam_r = (lam_r + MULTIPLIER_RATE * problem.return_gap(&w)).max(0.0);
        }
    }

    let calls = counters.calls;
    Ok(OptimReport {
        method: problem.method,
        expected_return: dot(&w, problem.market.mu.as_slice()),
        rho: state.rho,
        weights: w,
        lambda_w: kkt.then_some(lam_w),
        lambda_r: kkt.then_some(lam_r),
        descent_steps,
        solver_calls: calls,
        relative_solver_calls: calls as f64 / (descent_steps + 1) as f64,
        solver_steps: counters.steps,
        relative_solver_steps: counters.steps as f64 / calls as f64,
        converged,
        grad_norm,
        history,
    })
}

fn kkt_satisfied(problem: &AllocationProblem, w: &[f64], lam_w: &[f64], lam_r: f64, tol: f64) -> bool {
    let gap = problem.return_gap(w);
    gap <= tol
        && w.iter().all(|&x| -x <= tol)
        && (lam_r * gap).abs() < tol
        && dot(w, lam_w).abs() < tol
}
