//! Lambda quantiles of empirical distribution functions by sorting.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lambda::LambdaFn;

/// A nonempty collection of finite observations.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    values: Vec<f64>,
}

impl SampleSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("sample set is empty".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("samples must be finite, got {bad}")));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalEstimate {
    pub quantile: f64,
    pub n: usize,
    /// Set when `lambda_m <= 1/n`, in which case the estimate may collapse to
    /// the sample minimum.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// First order statistic `x_(j)` with `j / n > Lambda(x_(j))`.
pub fn empirical_lambda_quantile(
    samples: &SampleSet,
    lam: &dyn LambdaFn,
) -> Result<EmpiricalEstimate> {
    let n = samples.len();
    let mut sorted = samples.values.clone();
    sorted.sort_unstable_by(f64::total_cmp);

    let (lambda_m, _) = lam.bounds();
    let warning = (lambda_m <= 1.0 / n as f64).then(|| {
        format!("lambda_m = {lambda_m} does not exceed 1/n = {}; increase the sample size", 1.0 / n as f64)
    });

    let nf = n as f64;
    let quantile = sorted
        .iter()
        .enumerate()
        .find(|&(i, &x)| (i + 1) as f64 / nf > lam.eval(x))
        .map(|(_, &x)| x)
        .ok_or(Error::DegenerateSamples)?;
    Ok(EmpiricalEstimate {
        quantile,
        n,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lambda::{ConstantLambda, PiecewiseExpLambda, PiecewiseLinearLambda};
    use proptest::prelude::*;

    // literal definition restricted to sample points, with F_n by counting
    fn brute_force(values: &[f64], lam: &dyn LambdaFn) -> f64 {
        let n = values.len() as f64;
        values
            .iter()
            .copied()
            .filter(|&x| values.iter().filter(|&&v| v <= x).count() as f64 / n > lam.eval(x))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn one_to_ten_at_a_quarter() {
        let s = SampleSet::new((1..=10).rev().map(f64::from).collect()).unwrap();
        let lam = ConstantLambda::new(0.25).unwrap();
        let e = empirical_lambda_quantile(&s, &lam).unwrap();
        assert_eq!(e.quantile, 3.0);
        assert_eq!(e.n, 10);
        assert!(e.warning.is_none());
    }

    #[test]
    fn single_sample_warns() {
        let s = SampleSet::new(vec![5.0]).unwrap();
        let lam = ConstantLambda::new(0.5).unwrap();
        let e = empirical_lambda_quantile(&s, &lam).unwrap();
        assert_eq!(e.quantile, 5.0);
        assert!(e.warning.is_some());
    }

    #[test]
    fn empty_and_non_finite_samples_are_rejected() {
        assert!(matches!(SampleSet::new(vec![]), Err(Error::Domain(_))));
        assert!(SampleSet::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn ties_follow_the_definition() {
        let values = vec![1.0, 2.0, 2.0, 2.0, 3.0];
        let s = SampleSet::new(values.clone()).unwrap();
        // F_n(2) = 0.8; the first copy of 2 alone would give 0.4
        let lam = ConstantLambda::new(0.5).unwrap();
        let e = empirical_lambda_quantile(&s, &lam).unwrap();
        assert_eq!(e.quantile, 2.0);
        assert_eq!(e.quantile, brute_force(&values, &lam));
    }

    fn shapes() -> Vec<Box<dyn LambdaFn>> {
        vec![
            Box::new(ConstantLambda::new(0.05).unwrap()),
            Box::new(PiecewiseLinearLambda::ramp(0.025, 0.05, -0.257, 0.277).unwrap()),
            Box::new(
                PiecewiseLinearLambda::new(vec![(-2.8, 0.01), (-1.0, 0.1), (-0.6, 0.3)], 0.01, 0.3)
                    .unwrap(),
            ),
            Box::new(PiecewiseExpLambda::continuous(0.1, 0.6, -3.0, 1.0).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn matches_brute_force_and_is_a_sample(
            raw in prop::collection::vec(-300i32..300, 20..200), shape in 0usize..4
        ) {
            // coarse grid produces plenty of ties
            let values: Vec<f64> = raw.iter().map(|&v| v as f64 / 100.0).collect();
            let lam = &shapes()[shape];
            let s = SampleSet::new(values.clone()).unwrap();
            let e = empirical_lambda_quantile(&s, lam.as_ref()).unwrap();
            prop_assert_eq!(e.quantile, brute_force(&values, lam.as_ref()));
            prop_assert!(values.contains(&e.quantile));
        }

        #[test]
        fn permutation_invariant(mut values in prop::collection::vec(-5.0f64..5.0, 30..100), seed in 0u64..1000) {
            let lam = PiecewiseLinearLambda::ramp(0.025, 0.05, -0.257, 0.277).unwrap();
            let a = empirical_lambda_quantile(&SampleSet::new(values.clone()).unwrap(), &lam).unwrap();
            // deterministic shuffle
            let n = values.len();
            let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            for i in (1..n).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                values.swap(i, (state >> 33) as usize % (i + 1));
            }
            let b = empirical_lambda_quantile(&SampleSet::new(values).unwrap(), &lam).unwrap();
            prop_assert_eq!(a.quantile.to_bits(), b.quantile.to_bits());
        }
    }
}
