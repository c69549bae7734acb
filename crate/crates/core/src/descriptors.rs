//! Serializable descriptions of distributions, lambda functions and markets.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distributions::{
    DiscontinuousMixture, Distribution, DoubleWeibull, EmpiricalDist, LocationScaleT, NormalDist,
};
use crate::error::{Error, Result};
use crate::lambda::{ConstantLambda, LambdaFn, PiecewiseExpLambda, PiecewiseLinearLambda};
use crate::portfolio::{Family, MarketModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Normal {
        mu: f64,
        sigma: f64,
    },
    T {
        nu: f64,
        #[serde(default)]
        mu: f64,
        #[serde(default = "one")]
        sigma: f64,
    },
    DoubleWeibull {
        c: f64,
    },
    /// Two point masses `p1`, `p2` at `x1 < x2`, glued from t tails.
    Mixture {
        x1: f64,
        x2: f64,
        p1: f64,
        p2: f64,
        nu1: f64,
        sigma1: f64,
        nu2: f64,
        sigma2: f64,
    },
    /// Samples either inline or from a one-column CSV file.
    Empirical {
        #[serde(default)]
        samples: Option<Vec<f64>>,
        #[serde(default)]
        samples_csv: Option<PathBuf>,
    },
}

fn one() -> f64 {
    1.0
}

impl DistributionSpec {
    /// Builds the law. `load` reads sample files for empirical laws.
    pub fn build(
        &self,
        load: &dyn Fn(&PathBuf) -> Result<Vec<f64>>,
    ) -> Result<Arc<dyn Distribution>> {
        Ok(match *self {
            Self::Normal { mu, sigma } => Arc::new(NormalDist::new(mu, sigma)?),
            Self::T { nu, mu, sigma } => Arc::new(LocationScaleT::new(nu, mu, sigma)?),
            Self::DoubleWeibull { c } => Arc::new(DoubleWeibull::new(c)?),
            Self::Mixture {
                x1,
                x2,
                p1,
                p2,
                nu1,
                sigma1,
                nu2,
                sigma2,
            } => Arc::new(DiscontinuousMixture::two_point_masses(
                x1,
                x2,
                p1,
                p2,
                (nu1, sigma1),
                (nu2, sigma2),
            )?),
            Self::Empirical {
                ref samples,
                ref samples_csv,
            } => Arc::new(EmpiricalDist::new(self.samples(samples, samples_csv, load)?)?),
        })
    }

    fn samples(
        &self,
        inline: &Option<Vec<f64>>,
        path: &Option<PathBuf>,
        load: &dyn Fn(&PathBuf) -> Result<Vec<f64>>,
    ) -> Result<Vec<f64>> {
        match (inline, path) {
            (Some(v), None) => Ok(v.clone()),
            (None, Some(p)) => load(p),
            _ => Err(Error::InvalidParameter(
                "empirical law needs exactly one of samples or samples_csv".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaSpec {
    Constant {
        level: f64,
    },
    /// Exponential between `x_m` and `x_M`; `lambda_bar` sets the left limit
    /// at `x_M` for a jump up to `lambda_M`.
    PwExp {
        lambda_m: f64,
        #[serde(rename = "lambda_M")]
        lambda_max: f64,
        x_m: f64,
        #[serde(rename = "x_M")]
        x_max: f64,
        #[serde(default)]
        lambda_bar: Option<f64>,
    },
    PwLinear {
        breakpoints: Vec<(f64, f64)>,
        lambda_m: f64,
        #[serde(rename = "lambda_M")]
        lambda_max: f64,
    },
}

impl LambdaSpec {
    pub fn build(&self) -> Result<Arc<dyn LambdaFn>> {
        Ok(match *self {
            Self::Constant { level } => Arc::new(ConstantLambda::new(level)?),
            Self::PwExp {
                lambda_m,
                lambda_max,
                x_m,
                x_max,
                lambda_bar,
            } => Arc::new(match lambda_bar {
                Some(bar) => PiecewiseExpLambda::with_jump(lambda_m, bar, lambda_max, x_m, x_max)?,
                None => PiecewiseExpLambda::continuous(lambda_m, lambda_max, x_m, x_max)?,
            }),
            Self::PwLinear {
                ref breakpoints,
                lambda_m,
                lambda_max,
            } => Arc::new(PiecewiseLinearLambda::new(breakpoints.clone(), lambda_m, lambda_max)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Normal,
    T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    pub family: FamilyName,
    #[serde(default)]
    pub nu: Option<f64>,
    pub mu: Vec<f64>,
    pub sigma_vec: Vec<f64>,
    pub corr: Vec<Vec<f64>>,
}

impl MarketSpec {
    pub fn build(&self) -> Result<MarketModel> {
        let family = match (self.family, self.nu) {
            (FamilyName::Normal, None) => Family::Normal,
            (FamilyName::T, Some(nu)) => Family::StudentT { nu },
            (FamilyName::Normal, Some(_)) => {
                return Err(Error::InvalidParameter("nu is only valid for the t family".into()))
            }
            (FamilyName::T, None) => {
                return Err(Error::InvalidParameter("t family requires nu".into()))
            }
        };
        MarketModel::from_sigma_corr(family, self.mu.clone(), &self.sigma_vec, &self.corr)
    }
}
