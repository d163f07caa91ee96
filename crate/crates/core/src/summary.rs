//! Monte Carlo summaries: means with standard errors, binomial intervals and
//! the common pass/fail check record.

use serde::{Deserialize, Serialize};
use statrs::function::beta::inv_beta_reg;

use crate::error::{invalid, Result};

/// Confidence level used for every reported binomial interval.
pub const CI_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

/// Exact (Clopper–Pearson) interval for a binomial proportion.
pub fn clopper_pearson(successes: u64, trials: u64, level: f64) -> Result<Interval> {
    if trials == 0 {
        return Err(invalid("binomial interval needs at least one trial"));
    }
    if successes > trials {
        return Err(invalid("more successes than trials"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid(format!("confidence level {level} outside (0,1)")));
    }
    let alpha = 1.0 - level;
    let (k, n) = (successes as f64, trials as f64);
    let low = if successes == 0 {
        0.0
    } else {
        inv_beta_reg(k, n - k + 1.0, alpha / 2.0)
    };
    let high = if successes == trials {
        1.0
    } else {
        inv_beta_reg(k + 1.0, n - k, 1.0 - alpha / 2.0)
    };
    Ok(Interval { low, high })
}

/// Sample mean with its standard error (`sd / √N`, unbiased variance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

impl MeanEstimate {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("cannot average an empty sample"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let se = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            mean,
            se,
            count: values.len(),
        })
    }

    /// `mean ≤ bound + k·se`
    pub fn below(&self, bound: f64, k: f64) -> bool {
        self.mean <= bound + k * self.se
    }
}

/// Outcome of one empirical check against a bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    /// Observed value the bound is compared against.
    pub statistic: f64,
    pub bound: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub pass: bool,
}

/// Empirical `(1 − δ)`-quantile: the `⌈(1 − δ)N⌉`-th order statistic.
pub fn upper_quantile(sorted: &[f64], delta: f64) -> f64 {
    let n = sorted.len();
    let rank = ((1.0 - delta) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn clopper_pearson_reference_values() {
        // scipy.stats.beta.ppf reference values
        let cases = [
            (0, 10, 0.0, 0.308_497_107_818_760_8),
            (5, 10, 0.187_086_028_447_398_55, 0.812_913_971_552_601_5),
            (10, 10, 0.691_502_892_181_239_2, 1.0),
            (
                3,
                1000,
                0.000_619_099_931_649_571_3,
                0.008_742_023_238_478_303,
            ),
            (50, 100, 0.398_321_129_503_301_06, 0.601_678_870_496_698_9),
        ];
        for (k, n, lo, hi) in cases {
            let ci = clopper_pearson(k, n, 0.95).unwrap();
            assert_abs_diff_eq!(ci.low, lo, epsilon = 1e-9);
            assert_abs_diff_eq!(ci.high, hi, epsilon = 1e-9);
        }
    }

    #[test]
    fn clopper_pearson_rejects_bad_input() {
        assert!(clopper_pearson(1, 0, 0.95).is_err());
        assert!(clopper_pearson(3, 2, 0.95).is_err());
        assert!(clopper_pearson(1, 2, 1.0).is_err());
    }

    #[test]
    fn mean_estimate() {
        let m = MeanEstimate::from_values(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        // var = 5/3, se = √(5/12)
        assert_abs_diff_eq!(m.se, (5.0f64 / 12.0).sqrt(), epsilon = 1e-15);
        assert!(MeanEstimate::from_values(&[]).is_err());
        assert_eq!(MeanEstimate::from_values(&[0.3]).unwrap().se, 0.0);
    }

    #[test]
    fn quantile_order_statistic() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(upper_quantile(&v, 0.1), 9.0);
        assert_eq!(upper_quantile(&v, 0.5), 5.0);
        assert_eq!(upper_quantile(&v, 0.99), 1.0);
    }
}
