//! Binomial summaries for win proportions.

use serde::Serialize;
use statrs::distribution::{Beta, Binomial, ContinuousCDF, DiscreteCDF};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    /// Clopper-Pearson interval at the stated confidence.
    pub ci_low: f64,
    pub ci_high: f64,
    /// `P(Bin(trials, 1/2) >= successes)`.
    pub p_value_above_half: f64,
}

/// `P(X >= k)` for `X ~ Bin(n, p)`.
pub fn binomial_upper_tail(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let b = Binomial::new(p, n).expect("valid binomial parameters");
    b.sf(k - 1)
}

pub fn clopper_pearson(k: u64, n: u64, confidence: f64) -> (f64, f64) {
    let alpha = 1.0 - confidence;
    let lo = if k == 0 {
        0.0
    } else {
        Beta::new(k as f64, (n - k + 1) as f64)
            .expect("valid beta")
            .inverse_cdf(alpha / 2.0)
    };
    let hi = if k == n {
        1.0
    } else {
        Beta::new((k + 1) as f64, (n - k) as f64)
            .expect("valid beta")
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

pub fn proportion(successes: u64, trials: u64) -> Proportion {
    let (ci_low, ci_high) = if trials == 0 {
        (0.0, 1.0)
    } else {
        clopper_pearson(successes, trials, 0.95)
    };
    Proportion {
        successes,
        trials,
        estimate: if trials == 0 {
            f64::NAN
        } else {
            successes as f64 / trials as f64
        },
        ci_low,
        ci_high,
        p_value_above_half: binomial_upper_tail(successes, trials, 0.5),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_matches_direct_sum() {
        // P(Bin(10, .5) >= 8) = (45 + 10 + 1) / 1024
        let p = binomial_upper_tail(8, 10, 0.5);
        assert!((p - 56.0 / 1024.0).abs() < 1e-12);
        assert_eq!(binomial_upper_tail(0, 10, 0.5), 1.0);
    }

    #[test]
    fn interval_brackets_estimate() {
        let (lo, hi) = clopper_pearson(60, 100, 0.95);
        assert!(lo < 0.6 && 0.6 < hi);
        // reference values from the beta quantile definition
        assert!((lo - 0.4972).abs() < 1e-3);
        assert!((hi - 0.6967).abs() < 1e-3);
        assert_eq!(clopper_pearson(0, 5, 0.95).0, 0.0);
        assert_eq!(clopper_pearson(5, 5, 0.95).1, 1.0);
    }
}
