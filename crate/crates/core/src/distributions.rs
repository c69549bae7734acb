//! Univariate laws used as profit-and-loss distributions.
//!
//! Every law exposes its distribution function, a density where one exists,
//! and a bracketing query returning points whose cdf values sit below and
//! above two probability levels.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use libm::erfc;
use statrs::distribution::{Continuous, ContinuousCDF, StudentsT};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::solver::{self, RootProblem, SolverParams};

/// Maximum number of width doublings when a bracket is found by expansion.
pub const MAX_BRACKET_DOUBLINGS: u32 = 200;

/// A univariate distribution function together with its density.
pub trait Distribution: Send + Sync + fmt::Debug {
    /// `P(Y <= x)`. Right-continuous and nondecreasing.
    fn cdf(&self, x: f64) -> f64;

    /// Density at `x`, or [`Error::NoDensity`] where the cdf is not differentiable.
    fn pdf(&self, x: f64) -> Result<f64>;

    /// Closed-form (or library) inverse of the cdf, when available.
    fn inverse_cdf(&self, _p: f64) -> Option<f64> {
        None
    }

    /// Starting point for bracket expansion.
    fn center(&self) -> f64 {
        0.0
    }

    /// Points where the cdf jumps.
    fn jump_points(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Points `(x_min, x_max)` with `cdf(x_min) <= p_low` and `cdf(x_max) >= p_high`.
    fn bracket(&self, p_low: f64, p_high: f64) -> Result<(f64, f64)> {
        check_levels(p_low, p_high)?;
        match (self.inverse_cdf(p_low), self.inverse_cdf(p_high)) {
            (Some(lo), Some(hi)) if lo.is_finite() && hi.is_finite() => Ok((
                nudge_below(self, lo, p_low)?,
                nudge_above(self, hi, p_high)?,
            )),
            _ => expand_bracket(self, p_low, p_high),
        }
    }

    /// Checked cdf evaluation rejecting non-finite arguments.
    fn try_cdf(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("cdf argument must be finite, got {x}")));
        }
        Ok(self.cdf(x))
    }
}

pub(crate) fn check_levels(p_low: f64, p_high: f64) -> Result<()> {
    if !(p_low > 0.0 && p_high < 1.0 && p_low <= p_high) {
        return Err(Error::InvalidParameter(format!(
            "bracket levels must satisfy 0 < p_low <= p_high < 1, got ({p_low}, {p_high})"
        )));
    }
    Ok(())
}

// Library inverses are accurate to a few ulps; walk outward until the
// bracket conditions hold exactly.
fn nudge_below<D: Distribution + ?Sized>(dist: &D, mut x: f64, p: f64) -> Result<f64> {
    let mut step = 1e-14 * x.abs().max(1.0);
    for _ in 0..MAX_BRACKET_DOUBLINGS {
        if dist.cdf(x) <= p {
            return Ok(x);
        }
        x -= step;
        step *= 2.0;
    }
    Err(Error::BracketExpansion {
        doublings: MAX_BRACKET_DOUBLINGS,
    })
}

fn nudge_above<D: Distribution + ?Sized>(dist: &D, mut x: f64, p: f64) -> Result<f64> {
    let mut step = 1e-14 * x.abs().max(1.0);
    for _ in 0..MAX_BRACKET_DOUBLINGS {
        if dist.cdf(x) >= p {
            return Ok(x);
        }
        x += step;
        step *= 2.0;
    }
    Err(Error::BracketExpansion {
        doublings: MAX_BRACKET_DOUBLINGS,
    })
}

/// Geometric expansion from [`Distribution::center`], starting at width 1.
pub fn expand_bracket<D: Distribution + ?Sized>(
    dist: &D,
    p_low: f64,
    p_high: f64,
) -> Result<(f64, f64)> {
    check_levels(p_low, p_high)?;
    let c = dist.center();
    let find = |below: bool| -> Result<f64> {
        let mut half = 0.5;
        for _ in 0..=MAX_BRACKET_DOUBLINGS {
            if below {
                let x = c - half;
                if dist.cdf(x) <= p_low {
                    return Ok(x);
                }
            } else {
                let x = c + half;
                if dist.cdf(x) >= p_high {
                    return Ok(x);
                }
            }
            half *= 2.0;
        }
        Err(Error::BracketExpansion {
            doublings: MAX_BRACKET_DOUBLINGS,
        })
    };
    Ok((find(true)?, find(false)?))
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )));
    }
    Ok(())
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
    }
    Ok(())
}

/// Normal law `N(mu, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalDist {
    mu: f64,
    sigma: f64,
}

impl NormalDist {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        check_finite("mu", mu)?;
        check_positive("sigma", sigma)?;
        Ok(Self { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Distribution for NormalDist {
    fn cdf(&self, x: f64) -> f64 {
        0.5 * erfc(-(x - self.mu) / (self.sigma * SQRT_2))
    }

    fn pdf(&self, x: f64) -> Result<f64> {
        let z = (x - self.mu) / self.sigma;
        Ok((-0.5 * z * z).exp() / (self.sigma * (2.0 * PI).sqrt()))
    }

    fn inverse_cdf(&self, p: f64) -> Option<f64> {
        (p > 0.0 && p < 1.0).then(|| self.mu - self.sigma * SQRT_2 * erfc_inv(2.0 * p))
    }

    fn center(&self) -> f64 {
        self.mu
    }
}

/// Location-scale Student-t law `t_nu(mu, sigma^2)`.
#[derive(Debug, Clone)]
pub struct LocationScaleT {
    nu: f64,
    mu: f64,
    sigma: f64,
    inner: StudentsT,
}

impl PartialEq for LocationScaleT {
    fn eq(&self, other: &Self) -> bool {
        self.nu == other.nu && self.mu == other.mu && self.sigma == other.sigma
    }
}

impl LocationScaleT {
    pub fn new(nu: f64, mu: f64, sigma: f64) -> Result<Self> {
        check_positive("nu", nu)?;
        check_finite("mu", mu)?;
        check_positive("sigma", sigma)?;
        let inner = StudentsT::new(mu, sigma, nu)
            .map_err(|e| Error::InvalidParameter(format!("student t: {e}")))?;
        Ok(Self {
            nu,
            mu,
            sigma,
            inner,
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Distribution for LocationScaleT {
    fn cdf(&self, x: f64) -> f64 {
        self.inner.cdf(x)
    }

    fn pdf(&self, x: f64) -> Result<f64> {
        Ok(self.inner.pdf(x))
    }

    fn inverse_cdf(&self, p: f64) -> Option<f64> {
        (p > 0.0 && p < 1.0).then(|| self.inner.inverse_cdf(p))
    }

    fn center(&self) -> f64 {
        self.mu
    }
}

/// Centered, symmetric double Weibull law with shape `c`:
/// `F(x) = exp(-(-x)^c) / 2` for `x < 0` and `1 - exp(-x^c) / 2` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleWeibull {
    c: f64,
}

impl DoubleWeibull {
    pub fn new(c: f64) -> Result<Self> {
        check_positive("c", c)?;
        Ok(Self { c })
    }

    pub fn shape(&self) -> f64 {
        self.c
    }
}

impl Distribution for DoubleWeibull {
    fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.5 * (-(-x).powf(self.c)).exp()
        } else {
            1.0 - 0.5 * (-x.powf(self.c)).exp()
        }
    }

    fn pdf(&self, x: f64) -> Result<f64> {
        let a = x.abs();
        if a == 0.0 && self.c < 1.0 {
            return Err(Error::NoDensity { x });
        }
        if a == 0.0 && self.c == 1.0 {
            return Ok(0.5);
        }
        Ok(0.5 * self.c * a.powf(self.c - 1.0) * (-a.powf(self.c)).exp())
    }

    fn inverse_cdf(&self, p: f64) -> Option<f64> {
        if !(p > 0.0 && p < 1.0) {
            return None;
        }
        Some(if p < 0.5 {
            -(-(2.0 * p).ln()).powf(1.0 / self.c)
        } else {
            (-(2.0 * (1.0 - p)).ln()).powf(1.0 / self.c)
        })
    }
}

/// One piece of a [`DiscontinuousMixture`].
#[derive(Debug, Clone)]
pub enum Segment {
    /// The cdf of a continuous law restricted to the piece.
    Law(Arc<dyn Distribution>),
    /// A constant cdf level (an interval without probability mass).
    Plateau(f64),
}

impl Segment {
    fn value(&self, x: f64) -> f64 {
        match self {
            Segment::Law(d) => d.cdf(x),
            Segment::Plateau(level) => *level,
        }
    }
}

/// A cdf glued from pieces on `(-inf, b_1), [b_1, b_2), ..., [b_k, inf)`.
///
/// Jumps at the breakpoints represent point masses; the cdf takes the value of
/// the piece starting at a breakpoint, so it is right-continuous.
#[derive(Debug, Clone)]
pub struct DiscontinuousMixture {
    breakpoints: Vec<f64>,
    segments: Vec<Segment>,
}

impl DiscontinuousMixture {
    pub fn new(breakpoints: Vec<f64>, segments: Vec<Segment>) -> Result<Self> {
        if segments.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "{} breakpoints need {} segments, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                segments.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite())
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidParameter(
                "breakpoints must be finite and strictly increasing".into(),
            ));
        }
        if !matches!(segments.first(), Some(Segment::Law(_)))
            || !matches!(segments.last(), Some(Segment::Law(_)))
        {
            return Err(Error::InvalidParameter(
                "outermost segments must be continuous laws".into(),
            ));
        }
        for (i, &b) in breakpoints.iter().enumerate() {
            let left = segments[i].value(b);
            let right = segments[i + 1].value(b);
            if right < left || !(0.0..=1.0).contains(&right) {
                return Err(Error::InvalidParameter(format!(
                    "cdf would decrease at breakpoint {b}: {left} -> {right}"
                )));
            }
        }
        Ok(Self {
            breakpoints,
            segments,
        })
    }

    /// Two Student-t pieces joined by a plateau at `(p1 + p2) / 2` on `[x1, x2)`.
    ///
    /// The locations are chosen so that the left law has cdf `p1` at `x1` and
    /// the right law has cdf `p2` at `x2`; both are solved with the hybrid
    /// Newton-bisection solver at tolerance `1e-12`.
    pub fn two_point_masses(
        x1: f64,
        x2: f64,
        p1: f64,
        p2: f64,
        (nu1, sigma1): (f64, f64),
        (nu2, sigma2): (f64, f64),
    ) -> Result<Self> {
        if !(0.0 < p1 && p1 < p2 && p2 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < p1 < p2 < 1, got ({p1}, {p2})"
            )));
        }
        let mu1 = solve_location(x1, p1, nu1, sigma1)?;
        let mu2 = solve_location(x2, p2, nu2, sigma2)?;
        Self::new(
            vec![x1, x2],
            vec![
                Segment::Law(Arc::new(LocationScaleT::new(nu1, mu1, sigma1)?)),
                Segment::Plateau(0.5 * (p1 + p2)),
                Segment::Law(Arc::new(LocationScaleT::new(nu2, mu2, sigma2)?)),
            ],
        )
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Generalized inverse `inf { x : F(x) >= p }`; a jump that covers `p`
    /// maps to its breakpoint.
    pub fn quantile(&self, p: f64) -> Option<f64> {
        if !(p > 0.0 && p < 1.0) {
            return None;
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if i > 0 {
                let a = self.breakpoints[i - 1];
                if seg.value(a) >= p {
                    return Some(a);
                }
            }
            let end = self.breakpoints.get(i).copied().unwrap_or(f64::INFINITY);
            if let Segment::Law(d) = seg {
                let x = d.inverse_cdf(p)?;
                if x < end {
                    return Some(x);
                }
            }
        }
        None
    }

    fn piece(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= x)
    }
}

/// Location `mu` with `F_{nu, mu, sigma}(x) = p`.
fn solve_location(x: f64, p: f64, nu: f64, sigma: f64) -> Result<f64> {
    check_finite("x", x)?;
    let law = |mu: f64| LocationScaleT::new(nu, mu, sigma);
    // g(mu) = p - F(x; mu) is increasing in mu
    let g = |mu: f64| p - law(mu).map(|d| d.cdf(x)).unwrap_or(f64::NAN);
    let dg = |mu: f64| {
        law(mu)
            .and_then(|d| d.pdf(x))
            .unwrap_or(solver::NO_DERIVATIVE)
    };
    let mut half = sigma;
    let mut bracket = None;
    for _ in 0..MAX_BRACKET_DOUBLINGS {
        let (lo, hi) = (x - half, x + half);
        if g(lo) <= 0.0 && g(hi) >= 0.0 {
            bracket = Some((lo, hi));
            break;
        }
        half *= 2.0;
    }
    let (lo, hi) = bracket.ok_or(Error::BracketExpansion {
        doublings: MAX_BRACKET_DOUBLINGS,
    })?;
    let problem = RootProblem::new(g, dg, lo, hi)?;
    let params = SolverParams::new(0.01, 200, 1e-12)?;
    let report = solver::solve(&problem, &params)?;
    if !report.converged {
        return Err(Error::Precondition(format!(
            "location solve for p = {p} at x = {x} did not converge"
        )));
    }
    Ok(report.root)
}

impl Distribution for DiscontinuousMixture {
    fn cdf(&self, x: f64) -> f64 {
        self.segments[self.piece(x)].value(x)
    }

    fn pdf(&self, x: f64) -> Result<f64> {
        if self.breakpoints.contains(&x) {
            return Err(Error::NoDensity { x });
        }
        match &self.segments[self.piece(x)] {
            Segment::Law(d) => d.pdf(x),
            Segment::Plateau(_) => Ok(0.0),
        }
    }

    /// The median; bracket expansion starts here.
    fn center(&self) -> f64 {
        self.quantile(0.5).unwrap_or_else(|| {
            let first = self.breakpoints.first().copied().unwrap_or(0.0);
            let last = self.breakpoints.last().copied().unwrap_or(0.0);
            0.5 * (first + last)
        })
    }

    fn jump_points(&self) -> Vec<f64> {
        self.breakpoints
            .iter()
            .enumerate()
            .filter(|&(i, &b)| self.segments[i].value(b) < self.segments[i + 1].value(b))
            .map(|(_, &b)| b)
            .collect()
    }
}

/// Empirical distribution function of a sample, `F_n(x) = #{x_i <= x} / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDist {
    sorted: Vec<f64>,
}

impl EmpiricalDist {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Domain("empirical distribution needs at least one sample".into()));
        }
        if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("samples must be finite, got {bad}")));
        }
        samples.sort_unstable_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    fn count_le(&self, x: f64) -> usize {
        self.sorted.partition_point(|&v| v <= x)
    }
}

impl Distribution for EmpiricalDist {
    fn cdf(&self, x: f64) -> f64 {
        self.count_le(x) as f64 / self.sorted.len() as f64
    }

    fn pdf(&self, x: f64) -> Result<f64> {
        Err(Error::NoDensity { x })
    }

    fn center(&self) -> f64 {
        self.sorted[self.sorted.len() / 2]
    }

    fn jump_points(&self) -> Vec<f64> {
        let mut v = self.sorted.clone();
        v.dedup();
        v
    }

    fn bracket(&self, p_low: f64, p_high: f64) -> Result<(f64, f64)> {
        check_levels(p_low, p_high)?;
        let first = self.sorted[0];
        let spread = (self.sorted[self.sorted.len() - 1] - first).max(1.0);
        // largest order statistic whose cdf stays at or below p_low
        let x_min = self
            .sorted
            .iter()
            .rev()
            .copied()
            .find(|&v| self.cdf(v) <= p_low)
            .unwrap_or(first - spread);
        let x_max = self
            .sorted
            .iter()
            .copied()
            .find(|&v| self.cdf(v) >= p_high)
            .expect("cdf reaches 1 at the largest sample");
        Ok((x_min, x_max))
    }
}
