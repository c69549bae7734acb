//! Lambda quantiles `inf { x : F(x) > Lambda(x) }`: robust evaluation with a
//! safeguarded Newton-bisection solver, interval-based isolation of multiple
//! crossings, empirical estimation from samples, and lambda-VaR portfolio
//! optimisation over elliptical markets.

pub mod descriptors;
pub mod distributions;
pub mod empirical;
pub mod error;
pub mod isolation;
pub mod lambda;
pub mod portfolio;
pub mod solver;

pub use distributions::{
    DiscontinuousMixture, Distribution, DoubleWeibull, EmpiricalDist, LocationScaleT, NormalDist,
    Segment,
};
pub use empirical::{empirical_lambda_quantile, EmpiricalEstimate, SampleSet};
pub use error::{Error, Result};
pub use isolation::{
    isolate, isolate_adaptive, isolate_then_solve, range_estimate, CandidateBox, IsolationReport,
    RootBox,
};
pub use lambda::{ConstantLambda, LambdaFn, PiecewiseExpLambda, PiecewiseLinearLambda};
pub use portfolio::{
    optimize, portfolio_law, rho_and_grad, AllocationProblem, ArmijoRule, DescentParams, Family,
    MarketModel, Method, OptimReport, PortfolioLaw, RhoGrad,
};
pub use solver::{
    lambda_quantile, plain_newton, residual_fn, score, solve, ExitReason, RootProblem,
    SolveReport, SolverParams, StepKind, TraceEntry,
};
