//! Poisson waiting latency, sampled by CDF inversion.

use rand::Rng;

/// Above this mean `exp(-lambda)` underflows and inversion breaks down.
pub const MAX_LAMBDA: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("poisson mean must be finite and in [0, {MAX_LAMBDA}], got {0}")]
pub struct LambdaError(pub f64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonDelay {
    lambda: f64,
}

impl PoissonDelay {
    pub fn new(lambda: f64) -> Result<Self, LambdaError> {
        if !lambda.is_finite() || !(0.0..=MAX_LAMBDA).contains(&lambda) {
            return Err(LambdaError(lambda));
        }
        Ok(PoissonDelay { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Walks the CDF until it passes a single uniform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.lambda == 0.0 {
            return 0;
        }
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = (-self.lambda).exp();
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= self.lambda / k as f64;
            cdf += p;
            // rounding can leave the accumulated CDF a hair below 1
            if p == 0.0 && k as f64 > self.lambda {
                break;
            }
        }
        k
    }
}
