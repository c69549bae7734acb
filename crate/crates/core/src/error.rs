use thiserror::Error;

/// Errors raised by the lambda quantile toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no density at x = {x}")]
    NoDensity { x: f64 },

    #[error("bracket expansion failed after {doublings} doublings")]
    BracketExpansion { doublings: u32 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("capability missing: {0}")]
    Capability(String),

    #[error("no root detected on [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },

    #[error("degenerate portfolio: sigma_w = {sigma_w}")]
    DegeneratePortfolio { sigma_w: f64 },

    #[error(
        "gradient undefined at rho = {rho}: density {density} does not exceed lambda derivative {lambda_deriv}"
    )]
    GradientUndefined {
        rho: f64,
        density: f64,
        lambda_deriv: f64,
    },

    #[error("line search stalled after {halvings} halvings")]
    StalledLineSearch { halvings: u32 },

    #[error("degenerate sample set: no order statistic exceeds the lambda level")]
    DegenerateSamples,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
