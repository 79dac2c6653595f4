//! Interval estimates and goodness-of-fit tests used by the games.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for a binomial proportion.
pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// `|Pr[b' = b] - 1/2|` with a Wilson interval mapped onto the advantage scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Advantage {
    pub trials: u64,
    pub successes: u64,
    pub estimate: f64,
    /// Interval for the advantage; the lower end is 0 when the success
    /// interval straddles 1/2.
    pub lower: f64,
    pub upper: f64,
}

impl Advantage {
    pub fn from_counts(successes: u64, trials: u64) -> Advantage {
        let (lo, hi) = wilson(successes, trials, Z95);
        let p = if trials == 0 {
            0.5
        } else {
            successes as f64 / trials as f64
        };
        let lower = if lo <= 0.5 && hi >= 0.5 {
            0.0
        } else {
            (lo - 0.5).abs().min((hi - 0.5).abs())
        };
        let upper = (lo - 0.5).abs().max((hi - 0.5).abs());
        Advantage {
            trials,
            successes,
            estimate: (p - 0.5).abs(),
            lower,
            upper,
        }
    }

    pub fn contains_zero(&self) -> bool {
        self.lower == 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

impl ChiSquare {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

/// Pearson test of `counts` against equal cell probabilities.
pub fn chi_square_uniform(counts: &[u64]) -> Option<ChiSquare> {
    let total: u64 = counts.iter().sum();
    if counts.len() < 2 || total == 0 {
        return None;
    }
    let e = total as f64 / counts.len() as f64;
    let statistic: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let df = (counts.len() - 1) as f64;
    let p_value = ChiSquared::new(df).ok()?.sf(statistic);
    Some(ChiSquare {
        statistic,
        df,
        p_value,
    })
}

pub fn chi_square_critical(df: f64, alpha: f64) -> f64 {
    ChiSquared::new(df)
        .expect("positive df")
        .inverse_cdf(1.0 - alpha)
}

/// One-sample Kolmogorov-Smirnov statistic against U(0, 1).
pub fn ks_uniform(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Two-sided p-value of a one-proportion z-test.
pub fn proportion_p_value(successes: u64, trials: u64, p0: f64) -> f64 {
    let n = trials as f64;
    let z = (successes as f64 - n * p0) / (n * p0 * (1.0 - p0)).sqrt();
    2.0 * Normal::standard().sf(z.abs())
}

/// Power of a two-sided one-proportion z-test at level `alpha` when the true
/// proportion is `p1`.
pub fn proportion_power(p0: f64, p1: f64, trials: u64, alpha: f64) -> f64 {
    let n = trials as f64;
    let std = Normal::standard();
    let zc = std.inverse_cdf(1.0 - alpha / 2.0);
    let s0 = (p0 * (1.0 - p0) / n).sqrt();
    let s1 = (p1 * (1.0 - p1) / n).sqrt();
    let hi = (p0 + zc * s0 - p1) / s1;
    let lo = (p0 - zc * s0 - p1) / s1;
    std.sf(hi) + std.cdf(lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_known_values() {
        let (lo, hi) = wilson(50, 100, Z95);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
        let (lo, hi) = wilson(0, 10, Z95);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.2775).abs() < 1e-3);
    }

    #[test]
    fn advantage_interval() {
        let a = Advantage::from_counts(1000, 2000);
        assert!(a.contains_zero() && a.upper < 0.05);
        let a = Advantage::from_counts(2000, 2000);
        assert!((a.estimate - 0.5).abs() < 1e-12 && a.lower > 0.49);
        let a = Advantage::from_counts(0, 2000);
        assert!((a.estimate - 0.5).abs() < 1e-12 && !a.contains_zero());
    }

    #[test]
    fn chi_square_and_ks() {
        let c = chi_square_uniform(&[100, 100, 100, 100]).unwrap();
        assert_eq!(c.statistic, 0.0);
        assert!(c.passes(0.05));
        assert!(!chi_square_uniform(&[400, 0, 0, 0]).unwrap().passes(1e-3));
        assert!(chi_square_uniform(&[1]).is_none());
        let mut u: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_uniform(&mut u) < 0.001);
        assert!((chi_square_critical(1.0, 0.05) - 3.841).abs() < 1e-3);
    }

    #[test]
    fn proportion_tests() {
        assert!(proportion_p_value(5000, 10_000, 0.5) > 0.99);
        assert!(proportion_p_value(6000, 10_000, 0.5) < 1e-10);
        assert!(proportion_power(0.5, 0.6, 10_000, 1e-3) > 0.99);
        assert!(proportion_power(0.5, 0.5, 10_000, 1e-3) < 0.01);
    }
}
