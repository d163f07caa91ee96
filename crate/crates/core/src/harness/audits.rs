use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::audit::{enumeration_size, nth_dataset, AUDIT_SLACK, DEFAULT_EXHAUSTIVE_LIMIT};
use crate::data::{Dataset, FiniteDistribution};
use crate::error::{invalid, Result};
use crate::exec::{map_indexed, ExecMode};
use crate::mechanism::{max_to_tail_check, score_sensitivity, MaxToTailReport};
use crate::rng::{derived_rng, StdRng};
use crate::statistic::{center, estimation_error, StableStatistic};
use crate::summary::MeanEstimate;

/// Largest observed `|Δ_s(M) − Δ_{s'}(M)|` over single-element replacements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaAudit {
    pub beta: f64,
    /// `2γ + 1/n`
    pub bound: f64,
    pub probes: u64,
    pub exhaustive: bool,
    pub pass: bool,
}

/// Largest change of `Δ` over every replacement of position `i` by a support point.
fn worst_replacement(
    m: &dyn StableStatistic,
    p: &FiniteDistribution,
    s: &Dataset,
    base: f64,
    i: usize,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for z in p.support() {
        let d = estimation_error(m, &s.replace(i, z)?, p)?;
        worst = worst.max((d - base).abs());
    }
    Ok(worst)
}

/// Audits the sensitivity of `s ↦ Δ_s(M)`; exhaustive when `support^n · n · support`
/// is at most [`DEFAULT_EXHAUSTIVE_LIMIT`], otherwise `probes` random `(s, i)`
/// pairs with every support point tried as the replacement.
pub fn delta_sensitivity_audit(
    m: &dyn StableStatistic,
    p: &FiniteDistribution,
    n: usize,
    probes: usize,
    seed: u64,
    mode: ExecMode,
) -> Result<BetaAudit> {
    if probes == 0 || n == 0 {
        return Err(invalid("need at least one probe and n ≥ 1"));
    }
    let k = p.len();
    // k^n datasets × n positions × k replacements
    let space = enumeration_size(k, n) / k as u64;
    let exhaustive = space <= DEFAULT_EXHAUSTIVE_LIMIT;
    let per_unit: Vec<Result<f64>> = if exhaustive {
        map_indexed(mode, (k as u64).pow(n as u32) as usize, |d| {
            let s = nth_dataset(p.support(), n, d as u64)?;
            let base = estimation_error(m, &s, p)?;
            let mut worst: f64 = 0.0;
            for i in 0..n {
                worst = worst.max(worst_replacement(m, p, &s, base, i)?);
            }
            Ok(worst)
        })
    } else {
        map_indexed(mode, probes, |t| {
            let mut rng = derived_rng(seed, t as u64);
            let s = Dataset::sample(p, n, &mut rng)?;
            let i = rng.random_range(0..n);
            let base = estimation_error(m, &s, p)?;
            worst_replacement(m, p, &s, base, i)
        })
    };
    let mut beta: f64 = 0.0;
    for w in per_unit {
        beta = beta.max(w?);
    }
    let bound = score_sensitivity(m, n);
    Ok(BetaAudit {
        beta,
        bound,
        probes: if exhaustive { space } else { probes as u64 },
        exhaustive,
        pass: beta <= bound + AUDIT_SLACK,
    })
}

/// Leave-one-out checks on the centered statistic `L = M − E_P M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooReport {
    pub n: usize,
    pub datasets: usize,
    /// `γ_L = 2γ`
    pub gamma_l: f64,
    /// `max_s |E_s L − LOO(s)|`
    pub max_pointwise_gap: f64,
    pub pointwise_pass: bool,
    pub loo_sq: MeanEstimate,
    /// `γ_L² + 1/n`
    pub loo_sq_bound: f64,
    pub loo_pass: bool,
    pub emp_sq: MeanEstimate,
    /// `4γ_L² + 2/n`
    pub emp_sq_bound: f64,
    pub emp_pass: bool,
}

impl LooReport {
    pub fn pass(&self) -> bool {
        self.pointwise_pass && self.loo_pass && self.emp_pass
    }
}

pub fn loo_audit(
    m: &dyn StableStatistic,
    p: &FiniteDistribution,
    n: usize,
    datasets: usize,
    seed: u64,
    mode: ExecMode,
) -> Result<LooReport> {
    if datasets < 2 || n == 0 {
        return Err(invalid("need at least two datasets and n ≥ 1"));
    }
    let l = center(m, p);
    let rows = map_indexed(mode, datasets, |t| -> Result<(f64, f64)> {
        let mut rng = derived_rng(seed, t as u64);
        let s = Dataset::sample(p, n, &mut rng)?;
        Ok((l.empirical_mean(&s)?, l.loo_estimate(&s)?))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let gamma_l = l.declared_gamma(n);
    let max_pointwise_gap = rows.iter().map(|(e, o)| (e - o).abs()).fold(0.0, f64::max);
    let loo_sq = MeanEstimate::from_values(&rows.iter().map(|r| r.1 * r.1).collect::<Vec<_>>())?;
    let emp_sq = MeanEstimate::from_values(&rows.iter().map(|r| r.0 * r.0).collect::<Vec<_>>())?;
    let nf = n as f64;
    let loo_sq_bound = gamma_l * gamma_l + 1.0 / nf;
    let emp_sq_bound = 4.0 * gamma_l * gamma_l + 2.0 / nf;
    Ok(LooReport {
        n,
        datasets,
        gamma_l,
        max_pointwise_gap,
        pointwise_pass: max_pointwise_gap <= gamma_l + AUDIT_SLACK,
        loo_pass: loo_sq.below(loo_sq_bound, 3.0),
        loo_sq,
        emp_pass: emp_sq.below(emp_sq_bound, 3.0),
        emp_sq,
        loo_sq_bound,
        emp_sq_bound,
    })
}

/// Max-to-tail check where each draw is `Δ_s(M)` for a fresh `s ~ Pⁿ`.
pub fn estimation_error_tail_check(
    m: &dyn StableStatistic,
    p: &FiniteDistribution,
    n: usize,
    subsets: usize,
    trials: usize,
    seed: u64,
) -> Result<MaxToTailReport> {
    let sampler = |rng: &mut StdRng| -> Result<f64> {
        let s = Dataset::sample(p, n, rng)?;
        estimation_error(m, &s, p)
    };
    max_to_tail_check(&sampler, subsets, trials, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Point;
    use crate::statistic::{AbsDeviation, Constant, Identity, SampleMean};

    fn zero_one() -> FiniteDistribution {
        FiniteDistribution::uniform(vec![
            Point::scalar(0.0).unwrap(),
            Point::scalar(1.0).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn beta_examples() {
        let p = zero_one();
        let c =
            delta_sensitivity_audit(&Constant(0.2), &p, 30, 200, 1, ExecMode::Parallel).unwrap();
        assert_eq!(c.beta, 0.0);
        assert!(!c.exhaustive && c.pass);
        let id = delta_sensitivity_audit(&Identity, &p, 4, 1, 1, ExecMode::Parallel).unwrap();
        assert!(id.exhaustive);
        assert_eq!(id.beta, 0.25);
        assert_eq!(id.probes, 16 * 4 * 2);
        assert!(id.pass);
    }

    #[test]
    fn beta_of_abs_deviation_within_score_bound() {
        // M(s, z) = |z − mean(s)| depends on both arguments, so Δ moves
        let r = delta_sensitivity_audit(&AbsDeviation, &zero_one(), 5, 1, 0, ExecMode::Parallel)
            .unwrap();
        assert!(r.exhaustive && r.pass, "{r:?}");
        assert!(r.beta > 0.0);
    }

    #[test]
    fn loo_of_identity_equals_empirical_mean() {
        let r = loo_audit(&Identity, &zero_one(), 10, 200, 4, ExecMode::Parallel).unwrap();
        assert_eq!(r.gamma_l, 0.0);
        assert!(r.max_pointwise_gap <= 1e-15);
        assert!(r.pass());
    }

    #[test]
    fn loo_checks_hold_for_sample_mean() {
        let r = loo_audit(&SampleMean, &zero_one(), 12, 500, 4, ExecMode::Parallel).unwrap();
        assert!(r.pass(), "{r:?}");
    }

    #[test]
    fn error_tail_check_runs() {
        let r = estimation_error_tail_check(&AbsDeviation, &zero_one(), 10, 5, 500, 2).unwrap();
        assert!(r.threshold > 0.0);
        assert_eq!(r.m, 5);
        assert!(r.pass, "{r:?}");
    }
}
