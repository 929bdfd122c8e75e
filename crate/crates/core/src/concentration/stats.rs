//! Binomial confidence intervals.

use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sided 99.9% level.
pub const CONFIDENCE: f64 = 0.999;

/// Normal quantile for a two-sided interval at `confidence`, Bonferroni
/// corrected over `comparisons` simultaneous intervals.
pub fn bonferroni_z(confidence: f64, comparisons: usize) -> f64 {
    let alpha = (1.0 - confidence) / comparisons.max(1) as f64;
    Normal::standard().inverse_cdf(1.0 - 0.5 * alpha)
}

/// Wilson score interval for `successes` out of `n`.
pub fn wilson(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}
