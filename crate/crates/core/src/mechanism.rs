//! Stable-max, the exponential mechanism and the selection machinery built on
//! estimation-error scores.
//!
//! All softmax computations subtract the maximum before exponentiating.
//! Sampling inverts the cumulative distribution with a uniform draw from the
//! seeded generator, choosing the lowest index whose cumulative mass exceeds it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FiniteDistribution, Point};
use crate::error::{invalid, Error, Result};
use crate::exec::{map_indexed, ExecMode};
use crate::rng::{derived_rng, rng_from_seed, StdRng};
use crate::statistic::{estimation_parts, EstimationParts, StableStatistic};
use crate::summary::{clopper_pearson, CheckReport, MeanEstimate, CI_LEVEL};

fn check_values(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(invalid("need at least one value"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("values must be finite"));
    }
    Ok(())
}

fn log_sum_exp(a: &[f64]) -> f64 {
    let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + a.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `softmax(a)` with max subtraction.
fn softmax(a: &[f64]) -> Vec<f64> {
    let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = a.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

/// `Σ vᵢ e^{ε vᵢ} / Σ e^{ε vₗ}`, which lies in `[max − ln(m)/ε, max]`.
pub fn stable_max(values: &[f64], eps: f64) -> Result<f64> {
    check_values(values)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("ε must be positive and finite, got {eps}")));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = values.iter().map(|v| eps * v).collect();
    // written as max + Σ wᵢ(vᵢ − max) so rounding cannot push it above max
    Ok(max
        + softmax(&scaled)
            .iter()
            .zip(values)
            .map(|(w, v)| w * (v - max))
            .sum::<f64>())
}

/// Scores `f₁(s), …, f_m(s)` of a dataset, each of sensitivity at most `sensitivity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    values: Vec<f64>,
    sensitivity: f64,
}

impl ScoreVector {
    pub fn new(values: Vec<f64>, sensitivity: f64) -> Result<Self> {
        check_values(&values)?;
        if !(sensitivity > 0.0 && sensitivity.is_finite()) {
            return Err(invalid(format!(
                "sensitivity must be positive, got {sensitivity}"
            )));
        }
        Ok(Self {
            values,
            sensitivity,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismOutput {
    pub probabilities: Vec<f64>,
    pub sampled: Option<usize>,
    /// `Σ pᵢ vᵢ`, exact.
    pub expected_score: f64,
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(invalid(format!(
            "ε must be nonnegative and finite, got {eps}"
        )));
    }
    Ok(())
}

fn exponents(scores: &ScoreVector, eps: f64) -> Vec<f64> {
    let c = eps / (2.0 * scores.sensitivity);
    scores.values.iter().map(|v| c * v).collect()
}

/// `pᵢ ∝ exp(ε vᵢ / (2Δ))`.
pub fn exp_mechanism_probabilities(scores: &ScoreVector, eps: f64) -> Result<Vec<f64>> {
    check_eps(eps)?;
    Ok(softmax(&exponents(scores, eps)))
}

/// Lowest index whose cumulative probability exceeds `u`.
pub fn inverse_cdf(probabilities: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Runs the exponential mechanism; draws an index when `seed` is given.
pub fn exp_mechanism(scores: &ScoreVector, eps: f64, seed: Option<u64>) -> Result<MechanismOutput> {
    let probabilities = exp_mechanism_probabilities(scores, eps)?;
    let sampled = seed.map(|s| inverse_cdf(&probabilities, rng_from_seed(s).random()));
    let expected_score = probabilities
        .iter()
        .zip(&scores.values)
        .map(|(p, v)| p * v)
        .sum();
    Ok(MechanismOutput {
        probabilities,
        sampled,
        expected_score,
    })
}

/// `max − (2Δ/ε) ln m`, the utility guarantee of the exponential mechanism.
pub fn utility_lower_bound(scores: &ScoreVector, eps: f64) -> f64 {
    scores.max() - 2.0 * scores.sensitivity / eps * (scores.len() as f64).ln()
}

/// `maxᵢ |ln pᵢ − ln p′ᵢ|` for score vectors of neighboring datasets.
///
/// Fails if any coordinate moves by more than the sensitivity of `scores`.
pub fn dp_ratio_check(scores: &ScoreVector, neighbor: &ScoreVector, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    if scores.len() != neighbor.len() {
        return Err(invalid("score vectors differ in length"));
    }
    let delta = scores.sensitivity;
    for (index, (a, b)) in scores.values.iter().zip(&neighbor.values).enumerate() {
        let change = (a - b).abs();
        if change > delta * (1.0 + 1e-12) {
            return Err(Error::PerturbationExceedsSensitivity {
                index,
                change,
                sensitivity: delta,
            });
        }
    }
    let mut other = neighbor.clone();
    other.sensitivity = delta;
    let (a, b) = (exponents(scores, eps), exponents(&other, eps));
    let (za, zb) = (log_sum_exp(&a), log_sum_exp(&b));
    Ok(a.iter()
        .zip(&b)
        .map(|(x, y)| ((x - za) - (y - zb)).abs())
        .fold(0.0, f64::max))
}

/// `m` sub-datasets of a common size `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiDataset {
    parts: Vec<Dataset>,
}

impl MultiDataset {
    pub fn new(parts: Vec<Dataset>) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| invalid("need at least one sub-dataset"))?;
        if parts.iter().any(|p| p.len() != first.len()) {
            return Err(invalid("sub-datasets must share a common size"));
        }
        for p in &parts[1..] {
            first.check_compatible(&p.points()[0])?;
        }
        Ok(Self { parts })
    }

    pub fn sample<R: Rng + ?Sized>(
        p: &FiniteDistribution,
        m: usize,
        n: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if m == 0 {
            return Err(invalid("need at least one sub-dataset"));
        }
        Self::new(
            (0..m)
                .map(|_| Dataset::sample(p, n, rng))
                .collect::<Result<_>>()?,
        )
    }

    pub fn parts(&self) -> &[Dataset] {
        &self.parts
    }

    pub fn m(&self) -> usize {
        self.parts.len()
    }

    pub fn n(&self) -> usize {
        self.parts[0].len()
    }

    /// Replaces element `i` of sub-dataset `k`.
    pub fn replace(&self, k: usize, i: usize, z: &Point) -> Result<Self> {
        let part = self.parts.get(k).ok_or(Error::IndexOutOfRange {
            index: k,
            len: self.parts.len(),
        })?;
        let mut parts = self.parts.clone();
        parts[k] = part.replace(i, z)?;
        Ok(Self { parts })
    }
}

/// `2γ + 1/n`: sensitivity of an estimation-error score.
pub fn score_sensitivity(m: &dyn StableStatistic, n: usize) -> f64 {
    2.0 * m.declared_gamma(n) + 1.0 / n as f64
}

/// `f_ℓ(S) = Δ_{S_ℓ}(M)` for each sub-dataset, with sensitivity `2γ + 1/n`.
/// With `include_null`, the constant score `f_{m+1} ≡ 0` is appended.
pub fn estimation_scores(
    m: &dyn StableStatistic,
    p: &FiniteDistribution,
    multi: &MultiDataset,
    include_null: bool,
) -> Result<ScoreVector> {
    let mut values = multi
        .parts()
        .iter()
        .map(|s| crate::statistic::estimation_error(m, s, p))
        .collect::<Result<Vec<_>>>()?;
    if include_null {
        values.push(0.0);
    }
    ScoreVector::new(values, score_sensitivity(m, multi.n()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSensitivityAudit {
    pub max_change: f64,
    pub bound: f64,
    pub probes: usize,
    pub pass: bool,
}

/// Randomized audit of how far one replacement in a multi-dataset moves any score.
pub fn audit_score_sensitivity(
    m: &dyn StableStatistic,
    p: &FiniteDistribution,
    subsets: usize,
    n: usize,
    probes: usize,
    seed: u64,
    mode: ExecMode,
) -> Result<ScoreSensitivityAudit> {
    if probes == 0 {
        return Err(invalid("need at least one probe"));
    }
    let changes = map_indexed(mode, probes, |t| -> Result<f64> {
        let mut rng = derived_rng(seed, t as u64);
        let multi = MultiDataset::sample(p, subsets, n, &mut rng)?;
        let k = rng.random_range(0..subsets);
        let i = rng.random_range(0..n);
        let z = p.sample(&mut rng);
        let neighbor = multi.replace(k, i, z)?;
        let before = estimation_scores(m, p, &multi, false)?;
        let after = estimation_scores(m, p, &neighbor, false)?;
        Ok(before
            .values()
            .iter()
            .zip(after.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    });
    let mut max_change: f64 = 0.0;
    for c in changes {
        max_change = max_change.max(c?);
    }
    let bound = score_sensitivity(m, n);
    Ok(ScoreSensitivityAudit {
        max_change,
        bound,
        probes,
        pass: max_change <= bound + crate::audit::AUDIT_SLACK,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxToTailReport {
    pub m: usize,
    pub trials: usize,
    /// Estimate of `E[max{0, v₁, …, v_m}]`.
    pub expected_max: f64,
    /// `2 · expected_max`.
    pub threshold: f64,
    pub exceedances: u64,
    pub frequency: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `ln(2)/m`.
    pub bound: f64,
    pub pass: bool,
}

impl MaxToTailReport {
    pub fn to_check(&self, name: &str) -> CheckReport {
        CheckReport {
            name: name.to_string(),
            statistic: self.frequency,
            bound: self.bound,
            ci_low: self.ci_low,
            ci_high: self.ci_high,
            pass: self.pass,
        }
    }
}

/// Monte Carlo check of `Pr[v ≥ 2·E max{0, v₁..v_m}] ≤ ln(2)/m`.
///
/// `trials` groups of `m` draws estimate the threshold; `trials` fresh draws
/// estimate the exceedance frequency. Passes when the Clopper–Pearson lower
/// limit does not exceed the bound.
///
/// A zero threshold means `v ≤ 0` almost surely, where `v ≥ 0` can hold with
/// probability one; only strict exceedances are counted in that case.
pub fn max_to_tail_check(
    sampler: &dyn Fn(&mut StdRng) -> Result<f64>,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<MaxToTailReport> {
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    if trials < 100 {
        return Err(invalid(format!("need at least 100 trials, got {trials}")));
    }
    let mut rng = derived_rng(seed, 0);
    let mut total = 0.0;
    for _ in 0..trials {
        let mut best: f64 = 0.0;
        for _ in 0..m {
            best = best.max(sampler(&mut rng)?);
        }
        total += best;
    }
    let expected_max = total / trials as f64;
    let threshold = 2.0 * expected_max;
    let mut rng = derived_rng(seed, 1);
    let mut exceedances = 0u64;
    for _ in 0..trials {
        let v = sampler(&mut rng)?;
        if v > threshold || (threshold > 0.0 && v == threshold) {
            exceedances += 1;
        }
    }
    let ci = clopper_pearson(exceedances, trials as u64, CI_LEVEL)?;
    let bound = std::f64::consts::LN_2 / m as f64;
    Ok(MaxToTailReport {
        m,
        trials,
        expected_max,
        threshold,
        exceedances,
        frequency: exceedances as f64 / trials as f64,
        ci_low: ci.low,
        ci_high: ci.high,
        bound,
        pass: ci.low <= bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub m: usize,
    pub n: usize,
    pub eps: f64,
    pub gamma: f64,
    pub trials: usize,
    /// `V_S`: expected empirical mean at the selected index.
    pub v_s: f64,
    /// Expected true mean at the selected index.
    pub true_mean: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// `true_mean − lower_bound`
    pub lower_slack: f64,
    /// `upper_bound − true_mean`
    pub upper_slack: f64,
    pub se_lower: f64,
    pub se_upper: f64,
    pub se_true_mean: f64,
    pub pass: bool,
}

impl SandwichReport {
    pub fn to_checks(&self) -> Vec<CheckReport> {
        let (lo, hi) = (
            self.true_mean - 3.0 * self.se_true_mean,
            self.true_mean + 3.0 * self.se_true_mean,
        );
        vec![
            CheckReport {
                name: "lemma4_lower".into(),
                statistic: self.true_mean,
                bound: self.lower_bound,
                ci_low: lo,
                ci_high: hi,
                pass: self.lower_slack >= -3.0 * self.se_lower,
            },
            CheckReport {
                name: "lemma4_upper".into(),
                statistic: self.true_mean,
                bound: self.upper_bound,
                ci_low: lo,
                ci_high: hi,
                pass: self.upper_slack >= -3.0 * self.se_upper,
            },
        ]
    }
}

/// Monte Carlo estimate of both sides of
/// `e^{−ε} V_S − γ ≤ E[E_P M(S_ℓ)] ≤ e^{ε} V_S + γ`
/// with `ℓ` chosen by the exponential mechanism on estimation-error scores.
///
/// The selection is averaged exactly over the mechanism's probabilities in
/// each trial; a side fails only if it is violated by more than three
/// standard errors.
#[allow(clippy::too_many_arguments)]
pub fn selector_sandwich_check(
    m: &dyn StableStatistic,
    p: &FiniteDistribution,
    subsets: usize,
    n: usize,
    eps: f64,
    trials: usize,
    seed: u64,
    mode: ExecMode,
) -> Result<SandwichReport> {
    check_eps(eps)?;
    if trials < 2 {
        return Err(invalid("need at least two trials"));
    }
    let sensitivity = score_sensitivity(m, n);
    let per_trial = map_indexed(mode, trials, |t| -> Result<(f64, f64)> {
        let mut rng = derived_rng(seed, t as u64);
        let multi = MultiDataset::sample(p, subsets, n, &mut rng)?;
        let parts = multi
            .parts()
            .iter()
            .map(|s| estimation_parts(m, s, p))
            .collect::<Result<Vec<EstimationParts>>>()?;
        let scores = ScoreVector::new(
            parts.iter().map(EstimationParts::delta).collect(),
            sensitivity,
        )?;
        let probs = exp_mechanism_probabilities(&scores, eps)?;
        let emp = probs
            .iter()
            .zip(&parts)
            .map(|(q, e)| q * e.empirical_mean)
            .sum();
        let tru = probs.iter().zip(&parts).map(|(q, e)| q * e.true_mean).sum();
        Ok((emp, tru))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let gamma = m.declared_gamma(n);
    let (lo_f, hi_f) = ((-eps).exp(), eps.exp());
    let emp: Vec<f64> = per_trial.iter().map(|x| x.0).collect();
    let tru: Vec<f64> = per_trial.iter().map(|x| x.1).collect();
    let lower: Vec<f64> = per_trial.iter().map(|(e, t)| t - lo_f * e).collect();
    let upper: Vec<f64> = per_trial.iter().map(|(e, t)| hi_f * e - t).collect();
    let v_s = MeanEstimate::from_values(&emp)?;
    let true_mean = MeanEstimate::from_values(&tru)?;
    let lower = MeanEstimate::from_values(&lower)?;
    let upper = MeanEstimate::from_values(&upper)?;
    let lower_slack = lower.mean + gamma;
    let upper_slack = upper.mean + gamma;
    Ok(SandwichReport {
        m: subsets,
        n,
        eps,
        gamma,
        trials,
        v_s: v_s.mean,
        true_mean: true_mean.mean,
        lower_bound: lo_f * v_s.mean - gamma,
        upper_bound: hi_f * v_s.mean + gamma,
        lower_slack,
        upper_slack,
        se_lower: lower.se,
        se_upper: upper.se,
        se_true_mean: true_mean.se,
        pass: lower_slack >= -3.0 * lower.se && upper_slack >= -3.0 * upper.se,
    })
}

fn exact_check(name: &str, statistic: f64, bound: f64, pass: bool) -> CheckReport {
    CheckReport {
        name: name.to_string(),
        statistic,
        bound,
        ci_low: statistic,
        ci_high: statistic,
        pass,
    }
}

/// Checks `max − ln(m)/ε ≤ stable_max ≤ max` on `vectors` random vectors in `[−1, 1]^m`.
///
/// Reports the smallest lower slack and the largest excess over the maximum.
pub fn stable_max_check(vectors: usize, m: usize, eps: f64, seed: u64) -> Result<Vec<CheckReport>> {
    if vectors == 0 || m == 0 {
        return Err(invalid("need at least one vector of length at least 1"));
    }
    let (mut lower, mut upper) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..vectors {
        let mut rng = derived_rng(seed, t as u64);
        let v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let sm = stable_max(&v, eps)?;
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lower = lower.min(sm - (max - (m as f64).ln() / eps));
        upper = upper.max(sm - max);
    }
    Ok(vec![
        exact_check("stable_max_lower", lower, 0.0, lower >= 0.0),
        exact_check("stable_max_upper", upper, 0.0, upper <= 0.0),
    ])
}

/// Utility and privacy of the exponential mechanism on `vectors` random score
/// vectors, each with a random sensitivity in `[0.01, 1]` and a random
/// neighbor whose scores move by at most that sensitivity.
pub fn exp_mechanism_check(
    vectors: usize,
    m: usize,
    eps: f64,
    seed: u64,
) -> Result<Vec<CheckReport>> {
    if vectors == 0 || m == 0 {
        return Err(invalid("need at least one vector of length at least 1"));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(invalid("ε must be positive"));
    }
    let (mut slack, mut ratio) = (f64::INFINITY, 0.0f64);
    for t in 0..vectors {
        let mut rng = derived_rng(seed, t as u64);
        let delta = rng.random_range(0.01..=1.0);
        let v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let w: Vec<f64> = v
            .iter()
            .map(|x| x + rng.random_range(-delta..=delta))
            .collect();
        let (a, b) = (ScoreVector::new(v, delta)?, ScoreVector::new(w, delta)?);
        let out = exp_mechanism(&a, eps, None)?;
        slack = slack.min(out.expected_score - utility_lower_bound(&a, eps));
        ratio = ratio.max(dp_ratio_check(&a, &b, eps)?);
    }
    Ok(vec![
        exact_check("expmech_utility", slack, 0.0, slack >= 0.0),
        exact_check("expmech_privacy", ratio, eps, ratio <= eps),
    ])
}
