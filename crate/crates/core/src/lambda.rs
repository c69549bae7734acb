//! Confidence-level functions `Lambda: R -> [lambda_m, lambda_M]`.
//!
//! All catalog functions are piecewise monotone and right-continuous, with
//! pieces closed at their left end. Right-derivatives follow the same
//! convention: at a breakpoint the slope of the piece starting there is
//! returned.

use std::fmt;

use crate::error::{Error, Result};

pub trait LambdaFn: Send + Sync + fmt::Debug {
    fn eval(&self, x: f64) -> f64;

    /// Right-derivative.
    fn rderiv(&self, x: f64) -> f64;

    /// Exact `int_a^b Lambda(t) dt`.
    fn antideriv(&self, a: f64, b: f64) -> f64;

    /// `(lambda_m, lambda_M)`.
    fn bounds(&self) -> (f64, f64);

    /// Sorted points where the piece formula changes.
    fn breakpoints(&self) -> Vec<f64>;

    /// Whether `Lambda` is nondecreasing on the whole line.
    fn is_nondecreasing(&self) -> bool;

    /// Certified `(min, max)` of `Lambda` over `[lo, hi]`, when the function
    /// can provide one.
    fn range(&self, _lo: f64, _hi: f64) -> Option<(f64, f64)> {
        None
    }
}

fn check_level(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")));
    }
    Ok(())
}

fn check_bounds(lambda_m: f64, lambda_max: f64) -> Result<()> {
    check_level("lambda_m", lambda_m)?;
    check_level("lambda_M", lambda_max)?;
    if lambda_m > lambda_max {
        return Err(Error::InvalidParameter(format!(
            "lambda_m = {lambda_m} exceeds lambda_M = {lambda_max}"
        )));
    }
    Ok(())
}

// Monotone pieces reach their extremes at the ends; `left` and `right_limit`
// are the piece values at its start and its left limit at the end.
fn hull(acc: Option<(f64, f64)>, a: f64, b: f64) -> Option<(f64, f64)> {
    let (lo, hi) = (a.min(b), a.max(b));
    Some(match acc {
        None => (lo, hi),
        Some((l, h)) => (l.min(lo), h.max(hi)),
    })
}

/// Constant level, the classical quantile case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantLambda {
    level: f64,
}

impl ConstantLambda {
    pub fn new(level: f64) -> Result<Self> {
        check_level("level", level)?;
        Ok(Self { level })
    }

    pub fn level(&self) -> f64 {
        self.level
    }
}

impl LambdaFn for ConstantLambda {
    fn eval(&self, _x: f64) -> f64 {
        self.level
    }

    fn rderiv(&self, _x: f64) -> f64 {
        0.0
    }

    fn antideriv(&self, a: f64, b: f64) -> f64 {
        self.level * (b - a)
    }

    fn bounds(&self) -> (f64, f64) {
        (self.level, self.level)
    }

    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    fn is_nondecreasing(&self) -> bool {
        true
    }

    fn range(&self, _lo: f64, _hi: f64) -> Option<(f64, f64)> {
        Some((self.level, self.level))
    }
}

/// `lambda_m` below `x_m`, `beta * exp(alpha * x)` on `[x_m, x_M)`, `lambda_M`
/// from `x_M` on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiecewiseExpLambda {
    lambda_m: f64,
    lambda_max: f64,
    x_m: f64,
    x_max: f64,
    alpha: f64,
    beta: f64,
}

impl PiecewiseExpLambda {
    /// Raw parameterisation. The exponential piece must stay inside
    /// `[lambda_m, lambda_M]`.
    pub fn new(
        lambda_m: f64,
        lambda_max: f64,
        x_m: f64,
        x_max: f64,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        check_bounds(lambda_m, lambda_max)?;
        if !(x_m.is_finite() && x_max.is_finite() && x_m < x_max) {
            return Err(Error::InvalidParameter(format!(
                "need finite x_m < x_M, got ({x_m}, {x_max})"
            )));
        }
        if !(alpha.is_finite() && beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need finite alpha and positive beta, got ({alpha}, {beta})"
            )));
        }
        let s = Self {
            lambda_m,
            lambda_max,
            x_m,
            x_max,
            alpha,
            beta,
        };
        let (a, b) = (s.piece(x_m), s.piece(x_max));
        let tol = 1e-12;
        if a.min(b) < lambda_m - tol || a.max(b) > lambda_max + tol {
            return Err(Error::InvalidParameter(format!(
                "exponential piece ranges over [{}, {}], outside [{lambda_m}, {lambda_max}]",
                a.min(b),
                a.max(b)
            )));
        }
        Ok(s)
    }

    /// Continuous variant through `(x_m, lambda_m)` and `(x_M, lambda_M)`.
    pub fn continuous(lambda_m: f64, lambda_max: f64, x_m: f64, x_max: f64) -> Result<Self> {
        Self::with_jump(lambda_m, lambda_max, lambda_max, x_m, x_max)
    }

    /// Continuous at `x_m`, rising to `lambda_bar` at the left limit of `x_M`,
    /// then jumping to `lambda_M`.
    pub fn with_jump(
        lambda_m: f64,
        lambda_bar: f64,
        lambda_max: f64,
        x_m: f64,
        x_max: f64,
    ) -> Result<Self> {
        check_level("lambda_bar", lambda_bar)?;
        if !(x_m.is_finite() && x_max.is_finite() && x_m < x_max) {
            return Err(Error::InvalidParameter(format!(
                "need finite x_m < x_M, got ({x_m}, {x_max})"
            )));
        }
        let alpha = (lambda_bar.ln() - lambda_m.ln()) / (x_max - x_m);
        let beta = lambda_bar * (lambda_m / lambda_bar).powf(x_max / (x_max - x_m));
        Self::new(lambda_m, lambda_max, x_m, x_max, alpha, beta)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn x_m(&self) -> f64 {
        self.x_m
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    fn piece(&self, x: f64) -> f64 {
        self.beta * (self.alpha * x).exp()
    }

    fn primitive(&self, x: f64) -> f64 {
        let lower = x.min(self.x_m);
        let mid = x.clamp(self.x_m, self.x_max);
        let upper = x.max(self.x_max);
        let exp_part = if self.alpha == 0.0 {
            self.beta * (mid - self.x_m)
        } else {
            self.beta / self.alpha * ((self.alpha * mid).exp() - (self.alpha * self.x_m).exp())
        };
        self.lambda_m * (lower - self.x_m) + exp_part + self.lambda_max * (upper - self.x_max)
    }
}

impl LambdaFn for PiecewiseExpLambda {
    fn eval(&self, x: f64) -> f64 {
        if x < self.x_m {
            self.lambda_m
        } else if x < self.x_max {
            self.piece(x).clamp(self.lambda_m, self.lambda_max)
        } else {
            self.lambda_max
        }
    }

    fn rderiv(&self, x: f64) -> f64 {
        if x >= self.x_m && x < self.x_max {
            self.alpha * self.piece(x)
        } else {
            0.0
        }
    }

    fn antideriv(&self, a: f64, b: f64) -> f64 {
        self.primitive(b) - self.primitive(a)
    }

    fn bounds(&self) -> (f64, f64) {
        (self.lambda_m, self.lambda_max)
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.x_m, self.x_max]
    }

    fn is_nondecreasing(&self) -> bool {
        let tol = 1e-12;
        self.alpha >= 0.0
            && self.piece(self.x_m) >= self.lambda_m - tol
            && self.piece(self.x_max) <= self.lambda_max + tol
    }

    fn range(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let mut acc = None;
        if lo < self.x_m {
            acc = hull(acc, self.lambda_m, self.lambda_m);
        }
        if hi >= self.x_m && lo < self.x_max {
            let a = lo.max(self.x_m);
            let b = hi.min(self.x_max);
            acc = hull(acc, self.piece(a), self.piece(b));
        }
        if hi >= self.x_max {
            acc = hull(acc, self.lambda_max, self.lambda_max);
        }
        acc
    }
}

/// Piecewise linear interpolation through `(x_i, level_i)`, `lambda_m` below
/// the first breakpoint and `lambda_M` from the last one on.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearLambda {
    points: Vec<(f64, f64)>,
    lambda_m: f64,
    lambda_max: f64,
}

impl PiecewiseLinearLambda {
    pub fn new(points: Vec<(f64, f64)>, lambda_m: f64, lambda_max: f64) -> Result<Self> {
        check_bounds(lambda_m, lambda_max)?;
        if points.len() < 2 {
            return Err(Error::InvalidParameter(
                "piecewise linear lambda needs at least two breakpoints".into(),
            ));
        }
        if points.iter().any(|(x, _)| !x.is_finite()) || points.windows(2).any(|w| w[0].0 >= w[1].0)
        {
            return Err(Error::InvalidParameter(
                "breakpoints must be finite and strictly increasing".into(),
            ));
        }
        if let Some((_, l)) = points
            .iter()
            .find(|(_, l)| !(*l >= lambda_m && *l <= lambda_max))
        {
            return Err(Error::InvalidParameter(format!(
                "level {l} outside [{lambda_m}, {lambda_max}]"
            )));
        }
        Ok(Self {
            points,
            lambda_m,
            lambda_max,
        })
    }

    /// The three-piece form: `lambda_m` below `x_m`, linear on `[x_m, x_M)`,
    /// `lambda_M` above.
    pub fn ramp(lambda_m: f64, lambda_max: f64, x_m: f64, x_max: f64) -> Result<Self> {
        Self::new(vec![(x_m, lambda_m), (x_max, lambda_max)], lambda_m, lambda_max)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Index `i` with `x` in `[x_i, x_{i+1})`, or `None` outside the interior.
    fn segment(&self, x: f64) -> Option<usize> {
        let k = self.points.partition_point(|&(b, _)| b <= x);
        (k >= 1 && k < self.points.len()).then(|| k - 1)
    }

    fn slope(&self, i: usize) -> f64 {
        let (x0, l0) = self.points[i];
        let (x1, l1) = self.points[i + 1];
        (l1 - l0) / (x1 - x0)
    }

    fn on_segment(&self, i: usize, x: f64) -> f64 {
        let (x0, l0) = self.points[i];
        l0 + self.slope(i) * (x - x0)
    }

    fn primitive(&self, x: f64) -> f64 {
        let (first, _) = self.points[0];
        let (last, _) = self.points[self.points.len() - 1];
        let mut total = self.lambda_m * (x.min(first) - first);
        for i in 0..self.points.len() - 1 {
            let (x0, l0) = self.points[i];
            let (x1, _) = self.points[i + 1];
            let end = x.clamp(x0, x1);
            let len = end - x0;
            total += l0 * len + 0.5 * self.slope(i) * len * len;
        }
        total + self.lambda_max * (x.max(last) - last)
    }
}

impl LambdaFn for PiecewiseLinearLambda {
    fn eval(&self, x: f64) -> f64 {
        let (first, _) = self.points[0];
        if x < first {
            return self.lambda_m;
        }
        match self.segment(x) {
            Some(i) => self.on_segment(i, x).clamp(self.lambda_m, self.lambda_max),
            None => self.lambda_max,
        }
    }

    fn rderiv(&self, x: f64) -> f64 {
        self.segment(x).map_or(0.0, |i| self.slope(i))
    }

    fn antideriv(&self, a: f64, b: f64) -> f64 {
        self.primitive(b) - self.primitive(a)
    }

    fn bounds(&self) -> (f64, f64) {
        (self.lambda_m, self.lambda_max)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.points.iter().map(|&(x, _)| x).collect()
    }

    fn is_nondecreasing(&self) -> bool {
        let first = self.points[0].1;
        let last = self.points[self.points.len() - 1].1;
        self.lambda_m <= first
            && last <= self.lambda_max
            && self.points.windows(2).all(|w| w[0].1 <= w[1].1)
    }

    fn range(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let (first, _) = self.points[0];
        let (last, _) = self.points[self.points.len() - 1];
        let mut acc = None;
        if lo < first {
            acc = hull(acc, self.lambda_m, self.lambda_m);
        }
        for i in 0..self.points.len() - 1 {
            let (x0, _) = self.points[i];
            let (x1, _) = self.points[i + 1];
            if hi >= x0 && lo < x1 {
                let a = lo.max(x0);
                let b = hi.min(x1);
                acc = hull(acc, self.on_segment(i, a), self.on_segment(i, b));
            }
        }
        if hi >= last {
            acc = hull(acc, self.lambda_max, self.lambda_max);
        }
        acc
    }
}
