use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gaussian-mixture kernel `k(x, y) = (1/K) sum_k exp(-||x - y||^2 / (2 sigma_k^2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub bandwidths: Vec<f64>,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            bandwidths: vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0],
        }
    }
}

impl KernelSpec {
    pub fn new(bandwidths: Vec<f64>) -> Result<Self> {
        let spec = Self { bandwidths };
        spec.validate()?;
        Ok(spec)
    }

    pub fn single(sigma: f64) -> Result<Self> {
        Self::new(vec![sigma])
    }

    pub fn validate(&self) -> Result<()> {
        if self.bandwidths.is_empty() {
            return Err(Error::InvalidInput("kernel needs at least one bandwidth".into()));
        }
        if let Some(bad) = self.bandwidths.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidInput(format!("bandwidth must be positive, got {bad}")));
        }
        Ok(())
    }

    /// Kernel value as a function of the squared distance.
    #[inline]
    pub fn eval_sq(&self, sq_dist: f64) -> f64 {
        let k = self.bandwidths.len() as f64;
        self.bandwidths
            .iter()
            .map(|s| (-sq_dist / (2.0 * s * s)).exp())
            .sum::<f64>()
            / k
    }

    /// `dk/d(sq_dist)`.
    #[inline]
    pub fn deriv_sq(&self, sq_dist: f64) -> f64 {
        let k = self.bandwidths.len() as f64;
        self.bandwidths
            .iter()
            .map(|s| {
                let two_s2 = 2.0 * s * s;
                -(-sq_dist / two_s2).exp() / two_s2
            })
            .sum::<f64>()
            / k
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.eval_sq(sq_dist(x, y))
    }
}

#[inline]
pub(crate) fn sq_dist<'a>(
    x: impl IntoIterator<Item = &'a f64>,
    y: impl IntoIterator<Item = &'a f64>,
) -> f64 {
    x.into_iter()
        .zip(y)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_bandwidths() {
        assert_eq!(KernelSpec::default().bandwidths.len(), 8);
        assert_eq!(KernelSpec::default().bandwidths[7], 128.0);
    }

    #[test]
    fn rejects_bad_bandwidths() {
        assert!(KernelSpec::new(vec![]).is_err());
        assert!(KernelSpec::new(vec![1.0, 0.0]).is_err());
        assert!(KernelSpec::new(vec![-2.0]).is_err());
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let k = KernelSpec::default();
        for r in [0.0, 0.3, 2.0, 40.0] {
            let h = 1e-6;
            let fd = (k.eval_sq(r + h) - k.eval_sq((r - h).max(0.0))) / (r + h - (r - h).max(0.0));
            assert!((fd - k.deriv_sq(r)).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn bounded_and_symmetric(
            x in prop::collection::vec(-5.0f64..5.0, 3),
            y in prop::collection::vec(-5.0f64..5.0, 3),
        ) {
            let k = KernelSpec::default();
            let v = k.eval(&x, &y);
            prop_assert!(v > 0.0 && v <= 1.0);
            prop_assert_eq!(v, k.eval(&y, &x));
            prop_assert_eq!(k.eval(&x, &x), 1.0);
        }
    }
}
