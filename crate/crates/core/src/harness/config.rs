use serde::{Deserialize, Serialize};

use crate::bounds::{BoundId, BoundKind};
use crate::convex::{make_erm_statistic, make_pgd_statistic, problem_from_id};
use crate::data::{FiniteDistribution, Point};
use crate::dp_predict::{base_predictor_from_id, rr_loss_statistic, RRPredictor};
use crate::error::{invalid, Result};
use crate::statistic::{AbsDeviation, Constant, Identity, SampleMean, StableStatistic};

/// Largest support [`make_distribution`] will build.
pub const MAX_SUPPORT: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    /// `z₁` with probability `p`, `z₀` otherwise.
    TwoPoint { p: f64, z0: f64, z1: f64 },
    /// The grid `linspace(−1, 1, k)^d` scaled by `1/√d`, uniform.
    UniformGrid { k: usize, d: usize },
    /// `x ∈ linspace(−1, 1, k)` uniform, label `[x ≥ 0]` flipped with probability `noise`.
    LabeledThreshold { k: usize, noise: f64 },
}

fn linspace(k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![0.0];
    }
    (0..k)
        .map(|i| -1.0 + 2.0 * i as f64 / (k - 1) as f64)
        .collect()
}

pub fn make_distribution(spec: &DistributionSpec) -> Result<FiniteDistribution> {
    match *spec {
        DistributionSpec::TwoPoint { p, z0, z1 } => {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("two_point: p = {p} outside [0,1]")));
            }
            FiniteDistribution::new(
                vec![Point::scalar(z0)?, Point::scalar(z1)?],
                vec![1.0 - p, p],
            )
        }
        DistributionSpec::UniformGrid { k, d } => {
            if k == 0 || d == 0 {
                return Err(invalid("uniform_grid: k and d must be positive"));
            }
            let size = (k as u64)
                .checked_pow(d as u32)
                .filter(|&s| s <= MAX_SUPPORT as u64);
            let size = size
                .ok_or_else(|| invalid(format!("uniform_grid: {k}^{d} points is too many")))?
                as usize;
            let axis: Vec<f64> = linspace(k)
                .into_iter()
                .map(|v| v / (d as f64).sqrt())
                .collect();
            let mut support = Vec::with_capacity(size);
            for mut idx in 0..size {
                let mut x = Vec::with_capacity(d);
                for _ in 0..d {
                    x.push(axis[idx % k]);
                    idx /= k;
                }
                support.push(Point::vector(x)?);
            }
            FiniteDistribution::uniform(support)
        }
        DistributionSpec::LabeledThreshold { k, noise } => {
            if k < 2 {
                return Err(invalid("labeled_threshold: k must be at least 2"));
            }
            if !(0.0..=0.5).contains(&noise) {
                return Err(invalid(format!(
                    "labeled_threshold: noise = {noise} outside [0, 0.5]"
                )));
            }
            let mut support = Vec::with_capacity(2 * k);
            let mut weights = Vec::with_capacity(2 * k);
            for x in linspace(k) {
                let y = u8::from(x >= 0.0);
                support.push(Point::labeled(vec![x], y)?);
                weights.push((1.0 - noise) / k as f64);
                support.push(Point::labeled(vec![x], 1 - y)?);
                weights.push(noise / k as f64);
            }
            FiniteDistribution::new(support, weights)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatisticSpec {
    Const {
        value: f64,
    },
    Identity,
    Mean,
    Absdev,
    Erm {
        problem: String,
        lambda: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tol: Option<f64>,
    },
    Pgd {
        problem: String,
        t: usize,
    },
    Rr {
        base: String,
        eps: f64,
    },
}

impl StatisticSpec {
    /// Privacy parameter of a private-prediction statistic.
    pub fn eps(&self) -> Option<f64> {
        match self {
            StatisticSpec::Rr { eps, .. } => Some(*eps),
            _ => None,
        }
    }
}

/// Builds the statistic for points of dimension `dim`.
pub fn make_statistic(spec: &StatisticSpec, dim: usize) -> Result<Box<dyn StableStatistic>> {
    Ok(match spec {
        StatisticSpec::Const { value } => Box::new(Constant::new(*value)?),
        StatisticSpec::Identity => Box::new(Identity),
        StatisticSpec::Mean => Box::new(SampleMean),
        StatisticSpec::Absdev => Box::new(AbsDeviation),
        StatisticSpec::Erm {
            problem,
            lambda,
            tol,
        } => {
            let m = make_erm_statistic(problem_from_id(problem, dim)?, *lambda)?;
            match tol {
                Some(t) => Box::new(m.with_solver_tol(*t)?),
                None => Box::new(m),
            }
        }
        StatisticSpec::Pgd { problem, t } => {
            Box::new(make_pgd_statistic(problem_from_id(problem, dim)?, *t)?)
        }
        StatisticSpec::Rr { base, eps } => Box::new(rr_loss_statistic(RRPredictor::new(
            base_predictor_from_id(base)?,
            *eps,
        )?)),
    })
}

fn default_deltas() -> Vec<f64> {
    vec![0.5, 0.2, 0.1]
}

fn default_bounds() -> Vec<BoundId> {
    vec![
        BoundId::ExpE1,
        BoundId::VarE2,
        BoundId::VarE5,
        BoundId::HpE3,
        BoundId::HpE6,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub distribution: DistributionSpec,
    pub statistic: StatisticSpec,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_bounds")]
    pub bounds: Vec<BoundId>,
    /// Probes for the estimation-error sensitivity audit; skipped when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_probes: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(
        distribution: DistributionSpec,
        statistic: StatisticSpec,
        n: usize,
        trials: usize,
        seed: u64,
    ) -> Self {
        Self {
            distribution,
            statistic,
            n,
            trials,
            seed,
            deltas: default_deltas(),
            bounds: default_bounds(),
            beta_probes: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        if self.trials < 100 {
            return Err(invalid(format!(
                "need at least 100 trials, got {}",
                self.trials
            )));
        }
        if let Some(d) = self.deltas.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
            return Err(invalid(format!("δ = {d} outside (0,1)")));
        }
        if self.beta_probes == Some(0) {
            return Err(invalid("beta_probes must be positive"));
        }
        for id in &self.bounds {
            if id.kind() == BoundKind::ExcessRisk {
                return Err(invalid(format!(
                    "{id} bounds excess risk, not the estimation error"
                )));
            }
            if id.uses_eps() && self.statistic.eps().is_none() {
                return Err(invalid(format!(
                    "{id} needs a private-prediction statistic"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
