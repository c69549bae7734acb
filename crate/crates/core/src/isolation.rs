//! Range enclosures of `F - Lambda` and isolation of the smallest crossing.
//!
//! On a cell `[a, b]` where both `F` and `Lambda` are nondecreasing, the
//! subtraction rule of interval arithmetic gives the certified enclosure
//! `F(x) - Lambda(x) in [F(a) - Lambda(b), F(b) - Lambda(a)]`. A uniform grid
//! shares endpoint evaluations between cells, so `n` cells cost `n + 1`
//! evaluations of each function.

use serde::Serialize;

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::lambda::LambdaFn;
use crate::solver::{self, RootProblem, SolveReport, SolverParams, NO_DERIVATIVE};

/// Largest subdivision count tried by [`isolate_adaptive`].
pub const MAX_SUBDIVISIONS: usize = 1024;
pub const DEFAULT_SUBDIVISIONS: usize = 8;

/// One grid cell with its certified enclosure of `F - Lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootBox {
    pub lo: f64,
    pub hi: f64,
    pub range_lo: f64,
    pub range_hi: f64,
    /// Pointwise crossing from below: `f(lo) <= 0 < f(hi)`.
    pub contains_root: bool,
}

impl RootBox {
    /// The enclosure admits a zero.
    pub fn possible_root(&self) -> bool {
        self.range_lo <= 0.0 && self.range_hi >= 0.0
    }
}

/// A maximal run of adjacent cells whose enclosures admit a zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CandidateBox {
    pub lo: f64,
    pub hi: f64,
    pub first_cell: usize,
    pub last_cell: usize,
    /// Hull of the cell enclosures.
    pub range_lo: f64,
    pub range_hi: f64,
    /// Endpoint values certify a crossing from below: `f(lo) <= 0 < f(hi)`.
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsolationReport {
    pub cells: Vec<RootBox>,
    pub candidates: Vec<CandidateBox>,
    /// Index into `candidates` of the leftmost certified candidate.
    pub selected: Option<usize>,
    /// Enclosure over the leading cell of the selected candidate, where the
    /// smallest root can first occur.
    pub residual_bound: Option<(f64, f64)>,
    pub cdf_evaluations: usize,
    pub lambda_evaluations: usize,
}

impl IsolationReport {
    pub fn selected_box(&self) -> Option<&CandidateBox> {
        self.selected.map(|i| &self.candidates[i])
    }

    pub fn root_detected(&self) -> bool {
        self.selected.is_some()
    }
}

fn check_interval(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidParameter(format!(
            "need a finite interval with lo <= hi, got [{lo}, {hi}]"
        )));
    }
    Ok(())
}

// Enclosure from values already evaluated at the cell ends.
fn enclosure(
    lam: &dyn LambdaFn,
    lo: f64,
    hi: f64,
    (f_lo, f_hi): (f64, f64),
    (l_lo, l_hi): (f64, f64),
) -> Result<(f64, f64)> {
    if lam.is_nondecreasing() {
        return Ok((f_lo - l_hi, f_hi - l_lo));
    }
    let (lmin, lmax) = lam.range(lo, hi).ok_or_else(|| {
        Error::Capability("lambda is not monotone and provides no range bounds".into())
    })?;
    Ok((f_lo - lmax, f_hi - lmin))
}

/// Certified enclosure of `F - Lambda` over `[lo, hi]`.
pub fn range_estimate(
    dist: &dyn Distribution,
    lam: &dyn LambdaFn,
    lo: f64,
    hi: f64,
) -> Result<(f64, f64)> {
    check_interval(lo, hi)?;
    let f = (dist.cdf(lo), dist.cdf(hi));
    let l = (lam.eval(lo), lam.eval(hi));
    enclosure(lam, lo, hi, f, l)
}

/// Uniform subdivision of `[lo, hi]` into `subdivisions` cells.
pub fn isolate(
    dist: &dyn Distribution,
    lam: &dyn LambdaFn,
    lo: f64,
    hi: f64,
    subdivisions: usize,
) -> Result<IsolationReport> {
    check_interval(lo, hi)?;
    if subdivisions == 0 {
        return Err(Error::InvalidParameter("subdivisions must be at least 1".into()));
    }
    let n = subdivisions;
    let grid: Vec<f64> = (0..=n)
        .map(|k| {
            if k == n {
                hi
            } else {
                lo + (hi - lo) * (k as f64 / n as f64)
            }
        })
        .collect();
    let fv: Vec<f64> = grid.iter().map(|&x| dist.cdf(x)).collect();
    let lv: Vec<f64> = grid.iter().map(|&x| lam.eval(x)).collect();
    let resid = |k: usize| fv[k] - lv[k];

    let cells = (0..n)
        .map(|k| {
            let (range_lo, range_hi) =
                enclosure(lam, grid[k], grid[k + 1], (fv[k], fv[k + 1]), (lv[k], lv[k + 1]))?;
            Ok(RootBox {
                lo: grid[k],
                hi: grid[k + 1],
                range_lo,
                range_hi,
                contains_root: resid(k) <= 0.0 && resid(k + 1) > 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut candidates: Vec<CandidateBox> = Vec::new();
    for (k, cell) in cells.iter().enumerate() {
        if !cell.possible_root() {
            continue;
        }
        match candidates.last_mut() {
            Some(c) if c.last_cell + 1 == k => {
                c.hi = cell.hi;
                c.last_cell = k;
                c.range_lo = c.range_lo.min(cell.range_lo);
                c.range_hi = c.range_hi.max(cell.range_hi);
            }
            _ => candidates.push(CandidateBox {
                lo: cell.lo,
                hi: cell.hi,
                first_cell: k,
                last_cell: k,
                range_lo: cell.range_lo,
                range_hi: cell.range_hi,
                certified: false,
            }),
        }
    }
    for c in &mut candidates {
        c.certified = resid(c.first_cell) <= 0.0 && resid(c.last_cell + 1) > 0.0;
    }
    let selected = candidates.iter().position(|c| c.certified);
    let residual_bound = selected.map(|i| {
        let lead = &cells[candidates[i].first_cell];
        (lead.range_lo, lead.range_hi)
    });

    Ok(IsolationReport {
        cells,
        candidates,
        selected,
        residual_bound,
        cdf_evaluations: n + 1,
        lambda_evaluations: n + 1,
    })
}

/// Doubles the subdivision count from [`DEFAULT_SUBDIVISIONS`] up to
/// [`MAX_SUBDIVISIONS`] until the residual bound of the selected box lies
/// within `[-tol, tol]`. Returns the last report either way.
pub fn isolate_adaptive(
    dist: &dyn Distribution,
    lam: &dyn LambdaFn,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<IsolationReport> {
    let mut n = DEFAULT_SUBDIVISIONS;
    loop {
        let report = isolate(dist, lam, lo, hi, n)?;
        let small = report
            .residual_bound
            .is_some_and(|(a, b)| a.abs().max(b.abs()) <= tol);
        if small || n >= MAX_SUBDIVISIONS {
            return Ok(report);
        }
        n *= 2;
    }
}

/// Isolates on the standard bracket and runs the Newton-bisection solver on
/// the selected box.
pub fn isolate_then_solve(
    dist: &dyn Distribution,
    lam: &dyn LambdaFn,
    params: &SolverParams,
    subdivisions: usize,
) -> Result<(IsolationReport, SolveReport)> {
    let (lambda_m, lambda_max) = lam.bounds();
    let (lo, hi) = dist.bracket(lambda_m, lambda_max)?;
    let report = isolate(dist, lam, lo, hi, subdivisions)?;
    let sel = *report.selected_box().ok_or(Error::NoRoot { lo, hi })?;
    let problem = RootProblem::new(
        |x| dist.cdf(x) - lam.eval(x),
        |x| dist.pdf(x).map_or(NO_DERIVATIVE, |p| p - lam.rderiv(x)),
        sel.lo,
        sel.hi,
    )?;
    let solved = solver::solve(&problem, params)?;
    Ok((report, solved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::NormalDist;
    use crate::lambda::{ConstantLambda, PiecewiseExpLambda, PiecewiseLinearLambda};
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn several_roots() -> (NormalDist, PiecewiseLinearLambda) {
        (
            NormalDist::new(0.0, 1.0).unwrap(),
            PiecewiseLinearLambda::new(vec![(-2.8, 0.01), (-1.0, 0.1), (-0.6, 0.3)], 0.01, 0.3)
                .unwrap(),
        )
    }

    // roots of Phi - Lambda evaluated with 40-digit arithmetic
    const ROOTS: [f64; 2] = [-1.407_648_645_277_196, -0.741_778_375_546_612_6];

    #[derive(Debug)]
    struct Counting<'a, T: ?Sized> {
        inner: &'a T,
        calls: AtomicUsize,
    }

    impl<T: Distribution + ?Sized> Distribution for Counting<'_, T> {
        fn cdf(&self, x: f64) -> f64 {
            self.calls.fetch_add(1, Ordering::Relaxed);
            self.inner.cdf(x)
        }
        fn pdf(&self, x: f64) -> Result<f64> {
            self.inner.pdf(x)
        }
    }

    #[derive(Debug)]
    struct CountingLambda<'a> {
        inner: &'a dyn LambdaFn,
        calls: AtomicUsize,
    }

    impl LambdaFn for CountingLambda<'_> {
        fn eval(&self, x: f64) -> f64 {
            self.calls.fetch_add(1, Ordering::Relaxed);
            self.inner.eval(x)
        }
        fn rderiv(&self, x: f64) -> f64 {
            self.inner.rderiv(x)
        }
        fn antideriv(&self, a: f64, b: f64) -> f64 {
            self.inner.antideriv(a, b)
        }
        fn bounds(&self) -> (f64, f64) {
            self.inner.bounds()
        }
        fn breakpoints(&self) -> Vec<f64> {
            self.inner.breakpoints()
        }
        fn is_nondecreasing(&self) -> bool {
            self.inner.is_nondecreasing()
        }
    }

    #[derive(Debug)]
    struct Wavy;

    impl LambdaFn for Wavy {
        fn eval(&self, x: f64) -> f64 {
            0.3 + 0.1 * x.sin()
        }
        fn rderiv(&self, x: f64) -> f64 {
            0.1 * x.cos()
        }
        fn antideriv(&self, a: f64, b: f64) -> f64 {
            0.3 * (b - a) - 0.1 * (b.cos() - a.cos())
        }
        fn bounds(&self) -> (f64, f64) {
            (0.2, 0.4)
        }
        fn breakpoints(&self) -> Vec<f64> {
            Vec::new()
        }
        fn is_nondecreasing(&self) -> bool {
            false
        }
    }

    #[test]
    fn global_enclosure_over_the_bracket() {
        let (d, l) = several_roots();
        let (lo, hi) = d.bracket(0.01, 0.3).unwrap();
        let (a, b) = range_estimate(&d, &l, lo, hi).unwrap();
        assert!((a - -0.290).abs() < 5e-4, "{a}");
        assert!((b - 0.266).abs() < 5e-4, "{b}");
    }

    #[test]
    fn constant_lambda_enclosure() {
        let d = NormalDist::new(0.0, 1.0).unwrap();
        let l = ConstantLambda::new(0.2).unwrap();
        let (a, b) = range_estimate(&d, &l, -1.0, 0.5).unwrap();
        assert_eq!(a, d.cdf(-1.0) - 0.2);
        assert_eq!(b, d.cdf(0.5) - 0.2);
    }

    #[test]
    fn degenerate_interval_has_zero_width() {
        let (d, l) = several_roots();
        let (a, b) = range_estimate(&d, &l, -1.3, -1.3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, d.cdf(-1.3) - l.eval(-1.3));
    }

    #[test]
    fn non_monotone_lambda_without_range_is_a_capability_error() {
        let d = NormalDist::new(0.0, 1.0).unwrap();
        assert!(matches!(range_estimate(&d, &Wavy, -1.0, 1.0), Err(Error::Capability(_))));
    }

    #[test]
    fn eight_subdivisions() {
        let (d, l) = several_roots();
        let (lo, hi) = d.bracket(0.01, 0.3).unwrap();
        let r = isolate(&d, &l, lo, hi, 8).unwrap();
        assert_eq!(r.candidates.len(), 2);
        let (a, b) = (r.candidates[0], r.candidates[1]);
        assert!((a.lo - -1.65).abs() < 0.01 && (a.hi - -1.20).abs() < 0.01, "{a:?}");
        assert!((b.lo - -0.97).abs() < 0.01 && (b.hi - -0.52).abs() < 0.01, "{b:?}");
        assert_eq!(r.selected, Some(0));
        let (rl, rh) = r.residual_bound.unwrap();
        assert!((rl - -0.029).abs() < 0.002 && (rh - 0.010).abs() < 0.002);
        assert!(a.lo <= ROOTS[0] && ROOTS[0] <= a.hi);
        assert!(b.lo <= ROOTS[1] && ROOTS[1] <= b.hi);
    }

    #[test]
    fn thirty_two_subdivisions() {
        let (d, l) = several_roots();
        let (lo, hi) = d.bracket(0.01, 0.3).unwrap();
        let r = isolate(&d, &l, lo, hi, 32).unwrap();
        let s = r.selected_box().unwrap();
        assert!((s.lo - -1.48).abs() < 0.005 && (s.hi - -1.37).abs() < 0.005, "{s:?}");
        let (rl, rh) = r.residual_bound.unwrap();
        assert!((rl - -0.0095).abs() < 5e-4 && (rh - 0.0011).abs() < 5e-4, "{rl} {rh}");
        assert!(s.lo <= ROOTS[0] && ROOTS[0] <= s.hi);
    }

    #[test]
    fn evaluation_budget() {
        let (d, l) = several_roots();
        let (lo, hi) = d.bracket(0.01, 0.3).unwrap();
        for n in [8, 32] {
            let cd = Counting {
                inner: &d,
                calls: AtomicUsize::new(0),
            };
            let cl = CountingLambda {
                inner: &l,
                calls: AtomicUsize::new(0),
            };
            let r = isolate(&cd, &cl, lo, hi, n).unwrap();
            assert_eq!(cd.calls.load(Ordering::Relaxed), n + 1);
            assert_eq!(cl.calls.load(Ordering::Relaxed), n + 1);
            assert_eq!(r.cdf_evaluations, n + 1);
        }
    }

    #[test]
    fn enclosures_are_sound() {
        let (d, l) = several_roots();
        let (lo, hi) = d.bracket(0.01, 0.3).unwrap();
        for n in [1, 8, 32] {
            let r = isolate(&d, &l, lo, hi, n).unwrap();
            for c in &r.cells {
                for k in 0..=1000 {
                    let x = c.lo + (c.hi - c.lo) * k as f64 / 1000.0;
                    let v = d.cdf(x) - l.eval(x);
                    assert!(v >= c.range_lo - 1e-12 && v <= c.range_hi + 1e-12);
                }
            }
        }
    }

    #[test]
    fn non_monotone_lambda_uses_its_range() {
        let d = NormalDist::new(0.0, 1.0).unwrap();
        let l = PiecewiseLinearLambda::new(vec![(-1.0, 0.3), (0.0, 0.1), (1.0, 0.4)], 0.1, 0.4).unwrap();
        assert!(!l.is_nondecreasing());
        let r = isolate(&d, &l, -3.0, 3.0, 16).unwrap();
        for c in &r.cells {
            for k in 0..=200 {
                let x = c.lo + (c.hi - c.lo) * k as f64 / 200.0;
                let v = d.cdf(x) - l.eval(x);
                assert!(v >= c.range_lo - 1e-12 && v <= c.range_hi + 1e-12);
            }
        }
    }

    #[test]
    fn refinement_never_widens_the_candidate_union() {
        let (d, l) = several_roots();
        let (lo, hi) = d.bracket(0.01, 0.3).unwrap();
        let mut coarse = isolate(&d, &l, lo, hi, 4).unwrap();
        for n in [8, 16, 32, 64, 128] {
            let fine = isolate(&d, &l, lo, hi, n).unwrap();
            for f in &fine.candidates {
                let inside = coarse
                    .candidates
                    .iter()
                    .any(|c| c.lo <= f.lo + 1e-12 && f.hi <= c.hi + 1e-12);
                assert!(inside, "{n}: {f:?}");
            }
            for c in coarse.candidates.iter().filter(|c| c.certified) {
                assert!(fine.candidates.iter().any(|f| c.lo <= f.lo + 1e-12 && f.hi <= c.hi + 1e-12));
            }
            coarse = fine;
        }
    }

    #[test]
    fn single_root_problem_has_one_box() {
        let d = NormalDist::new(0.0, 1.0 / 3.0).unwrap();
        let l = PiecewiseExpLambda::continuous(1e-4, 0.06, (1e-3f64).ln(), (0.6f64).ln()).unwrap();
        let (lo, hi) = d.bracket(1e-4, 0.06).unwrap();
        let r = isolate(&d, &l, lo, hi, 4).unwrap();
        assert_eq!(r.candidates.len(), 1);
        let s = r.selected_box().unwrap();
        assert!(s.lo <= -0.519_755_723 && -0.519_755_723 <= s.hi);
    }

    #[test]
    fn no_root_is_reported_not_raised() {
        let d = NormalDist::new(0.0, 1.0).unwrap();
        let l = ConstantLambda::new(0.5).unwrap();
        let r = isolate(&d, &l, 1.0, 2.0, 4).unwrap();
        assert!(!r.root_detected());
        assert!(r.candidates.is_empty());
    }

    #[test]
    fn solve_on_selected_box() {
        let (d, l) = several_roots();
        let p = SolverParams::default();
        let (_, fine) = isolate_then_solve(&d, &l, &p, 32).unwrap();
        assert!(fine.root >= -1.48 && fine.root <= -1.37);
        assert!((fine.root - ROOTS[0]).abs() < 1e-7);
        let (_, coarse) = isolate_then_solve(&d, &l, &p, 8).unwrap();
        assert!((coarse.root - fine.root).abs() < 1e-8);
    }

    #[test]
    fn adaptive_refinement_reaches_tolerance() {
        let (d, l) = several_roots();
        let (lo, hi) = d.bracket(0.01, 0.3).unwrap();
        let r = isolate_adaptive(&d, &l, lo, hi, 0.01).unwrap();
        let (a, b) = r.residual_bound.unwrap();
        assert!(a.abs().max(b.abs()) <= 0.01);
        assert_eq!(r.cells.len(), 32);
    }
}
