//! Empirical checks of a declared uniform-stability constant.
//!
//! An audit searches for `(s, i, zᵢ, z)` maximizing `|M(s, z) − M(s^{i←zᵢ}, z)|`
//! with points drawn from a finite domain. Each probe fixes `(s, i, zᵢ)` and
//! scans every support point for `z`, so the test point is always worst-case.
//! When the whole space is small enough it is enumerated, and the observed
//! value is the exact maximum over the domain.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FiniteDistribution, Point};
use crate::error::{invalid, Result};
use crate::exec::{map_indexed, ExecMode};
use crate::rng::derived_rng;
use crate::statistic::StableStatistic;
use rand::Rng;

/// Slack absorbing solver round-off when comparing observed to declared stability.
pub const AUDIT_SLACK: f64 = 1e-9;

/// Default cap on exhaustive enumeration: support ≤ 4 and n ≤ 5 fit under it.
pub const DEFAULT_EXHAUSTIVE_LIMIT: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub dataset: Dataset,
    pub index: usize,
    pub replacement: Point,
    pub test_point: Point,
    pub change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityAuditReport {
    pub statistic: String,
    pub n: usize,
    pub gamma_declared: f64,
    pub gamma_observed: f64,
    pub probes: u64,
    pub exhaustive: bool,
    pub within_certificate: bool,
    pub worst_witness: Option<Witness>,
}

#[derive(Debug, Clone, Copy)]
pub struct AuditPlan {
    pub n: usize,
    pub probes: u64,
    pub exhaustive_limit: u64,
    pub seed: u64,
    pub mode: ExecMode,
}

impl AuditPlan {
    pub fn new(n: usize, probes: u64) -> Self {
        Self {
            n,
            probes,
            exhaustive_limit: DEFAULT_EXHAUSTIVE_LIMIT,
            seed: 0,
            mode: ExecMode::default(),
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn exhaustive_limit(mut self, limit: u64) -> Self {
        self.exhaustive_limit = limit;
        self
    }

    pub fn mode(mut self, mode: ExecMode) -> Self {
        self.mode = mode;
        self
    }
}

/// `k^(n+2) · n`, saturating.
pub fn enumeration_size(support: usize, n: usize) -> u64 {
    let mut size = n as u64;
    for _ in 0..n + 2 {
        size = size.saturating_mul(support as u64);
    }
    size
}

/// The `index`-th dataset of `support^n` in odometer order (position 0 varies fastest).
pub(crate) fn nth_dataset(support: &[Point], n: usize, mut index: u64) -> Result<Dataset> {
    let k = support.len() as u64;
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        points.push(support[(index % k) as usize].clone());
        index /= k;
    }
    Dataset::new(points)
}

struct Candidate {
    change: f64,
    dataset: Dataset,
    index: usize,
    replacement: usize,
    test_point: usize,
}

/// Largest change over the support for one `(s, i, zᵢ)`; earliest test point wins ties.
fn probe(
    m: &dyn StableStatistic,
    support: &[Point],
    s: &Dataset,
    f: &dyn Fn(&Point) -> f64,
    i: usize,
    replacement: usize,
) -> Result<Candidate> {
    let s2 = s.replace(i, &support[replacement])?;
    let g = m.bind(&s2)?;
    let mut best = (f64::NEG_INFINITY, 0);
    for (j, z) in support.iter().enumerate() {
        let change = (f(z) - g(z)).abs();
        if change > best.0 {
            best = (change, j);
        }
    }
    Ok(Candidate {
        change: best.0,
        dataset: s.clone(),
        index: i,
        replacement,
        test_point: best.1,
    })
}

fn better(a: Option<Candidate>, b: Candidate) -> Option<Candidate> {
    match a {
        Some(a) if a.change >= b.change => Some(a),
        _ => Some(b),
    }
}

/// Audits `m` at dataset size `plan.n` over the support of `domain`.
pub fn audit_stability(
    m: &dyn StableStatistic,
    domain: &FiniteDistribution,
    plan: &AuditPlan,
) -> Result<StabilityAuditReport> {
    if plan.probes == 0 {
        return Err(invalid("an audit needs at least one probe"));
    }
    if plan.n == 0 {
        return Err(invalid("dataset size must be at least 1"));
    }
    let n = plan.n;
    let support = domain.support();
    let k = support.len();
    let space = enumeration_size(k, n);
    let exhaustive = space <= plan.exhaustive_limit;

    let per_unit: Vec<Result<Option<Candidate>>> = if exhaustive {
        let datasets = (k as u64).pow(n as u32);
        map_indexed(plan.mode, datasets as usize, |d| {
            let s = nth_dataset(support, n, d as u64)?;
            let f = m.bind(&s)?;
            let mut best = None;
            for i in 0..n {
                for r in 0..k {
                    best = better(best, probe(m, support, &s, &f, i, r)?);
                }
            }
            Ok(best)
        })
    } else {
        map_indexed(plan.mode, plan.probes as usize, |t| {
            let mut rng = derived_rng(plan.seed, t as u64);
            let s = Dataset::sample(domain, n, &mut rng)?;
            let i = rng.random_range(0..n);
            let r = domain.sample_index(&mut rng);
            let f = m.bind(&s)?;
            Ok(Some(probe(m, support, &s, &f, i, r)?))
        })
    };

    let mut best: Option<Candidate> = None;
    for c in per_unit {
        if let Some(c) = c? {
            best = better(best, c);
        }
    }
    let gamma_declared = m.declared_gamma(n);
    let gamma_observed = best.as_ref().map_or(0.0, |c| c.change.max(0.0));
    Ok(StabilityAuditReport {
        statistic: m.name(),
        n,
        gamma_declared,
        gamma_observed,
        probes: if exhaustive { space } else { plan.probes },
        exhaustive,
        within_certificate: gamma_observed <= gamma_declared + AUDIT_SLACK,
        worst_witness: best.map(|c| Witness {
            dataset: c.dataset,
            index: c.index,
            replacement: support[c.replacement].clone(),
            test_point: support[c.test_point].clone(),
            change: c.change,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statistic::{AbsDeviation, Constant, Identity, SampleMean};

    fn zero_one() -> FiniteDistribution {
        FiniteDistribution::uniform(vec![
            Point::scalar(0.0).unwrap(),
            Point::scalar(1.0).unwrap(),
        ])
        .unwrap()
    }

    /// Brute force over every (s, i, zᵢ, z) without the probe machinery.
    fn brute_force_gamma(m: &dyn StableStatistic, support: &[Point], n: usize) -> f64 {
        let k = support.len() as u64;
        let mut worst: f64 = 0.0;
        for d in 0..k.pow(n as u32) {
            let s = nth_dataset(support, n, d).unwrap();
            for i in 0..n {
                for zi in support {
                    let s2 = s.replace(i, zi).unwrap();
                    for z in support {
                        worst = worst.max((m.eval(&s, z).unwrap() - m.eval(&s2, z).unwrap()).abs());
                    }
                }
            }
        }
        worst
    }

    #[test]
    fn sample_mean_exhaustive_audit_is_one_over_n() {
        let r = audit_stability(&SampleMean, &zero_one(), &AuditPlan::new(4, 1)).unwrap();
        assert!(r.exhaustive);
        assert_eq!(r.probes, enumeration_size(2, 4));
        assert_eq!(r.gamma_observed, 0.25);
        assert_eq!(
            brute_force_gamma(&SampleMean, zero_one().support(), 4),
            0.25
        );
        assert!(r.within_certificate);
        let w = r.worst_witness.unwrap();
        assert_eq!(w.change, 0.25);
    }

    #[test]
    fn data_independent_statistics_audit_to_zero() {
        for m in [&Identity as &dyn StableStatistic, &Constant(0.4)] {
            let r = audit_stability(m, &zero_one(), &AuditPlan::new(20, 100)).unwrap();
            assert!(!r.exhaustive);
            assert_eq!(r.gamma_observed, 0.0);
            assert!(r.within_certificate);
        }
    }

    #[test]
    fn exhaustive_matches_brute_force_on_three_point_support() {
        let p = FiniteDistribution::uniform(vec![
            Point::scalar(-1.0).unwrap(),
            Point::scalar(0.3).unwrap(),
            Point::scalar(1.0).unwrap(),
        ])
        .unwrap();
        let r = audit_stability(&AbsDeviation, &p, &AuditPlan::new(3, 1)).unwrap();
        assert!(r.exhaustive);
        assert_eq!(
            r.gamma_observed,
            brute_force_gamma(&AbsDeviation, p.support(), 3)
        );
    }

    #[test]
    fn randomized_audit_is_deterministic_and_mode_independent() {
        let p = zero_one();
        let plan = AuditPlan::new(12, 500).seed(9);
        let a = audit_stability(&AbsDeviation, &p, &plan.mode(ExecMode::Sequential)).unwrap();
        let b = audit_stability(&AbsDeviation, &p, &plan.mode(ExecMode::Parallel)).unwrap();
        assert_eq!(a, b);
        assert!(!a.exhaustive);
        assert!(a.gamma_observed <= 2.0 / 12.0 + AUDIT_SLACK);
    }

    #[test]
    fn audit_rejects_zero_probes() {
        assert!(audit_stability(&Identity, &zero_one(), &AuditPlan::new(3, 0)).is_err());
    }

    #[test]
    fn report_serializes_with_listed_fields() {
        let r = audit_stability(&SampleMean, &zero_one(), &AuditPlan::new(2, 1)).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for key in [
            "gamma_declared",
            "gamma_observed",
            "probes",
            "exhaustive",
            "worst_witness",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
