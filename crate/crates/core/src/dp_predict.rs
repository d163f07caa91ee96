//! Private prediction by randomized response over a deterministic base classifier.
//!
//! The base label is reported with probability `e^ε/(1+e^ε)` and flipped
//! otherwise. Whatever the base does on neighboring datasets, the two output
//! distributions differ by a factor of at most `e^ε`, and the expected 0/1
//! loss is a `(e^ε−1)/(e^ε+1)`-uniformly stable statistic.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{evaluate_bound, BoundId, BoundInputs};
use crate::data::{Dataset, Point, PointKind};
use crate::error::{invalid, Error, Result};
use crate::linalg::dist_sq;
use crate::rng::rng_from_seed;
use crate::statistic::{Evaluator, StableStatistic};

/// A fitted classifier `x ↦ {0, 1}`.
pub type Classifier<'a> = Box<dyn Fn(&[f64]) -> u8 + Send + Sync + 'a>;

/// A deterministic learner on labeled datasets.
pub trait BasePredictor: Send + Sync {
    fn name(&self) -> &'static str;

    fn fit<'a>(&'a self, s: &Dataset) -> Result<Classifier<'a>>;

    fn predict(&self, s: &Dataset, x: &[f64]) -> Result<u8> {
        Ok(self.fit(s)?(x))
    }
}

fn labeled_pairs(s: &Dataset) -> Result<Vec<(&[f64], u8)>> {
    if s.kind() != PointKind::Labeled {
        return Err(Error::KindMismatch {
            expected: PointKind::Labeled,
            found: s.kind(),
        });
    }
    Ok(s.iter()
        .map(|p| (p.features(), p.label().unwrap_or(0)))
        .collect())
}

/// Label of the nearest training point; the lower index wins ties.
#[derive(Debug, Clone, Copy, Default)]
pub struct NearestNeighbor;

impl BasePredictor for NearestNeighbor {
    fn name(&self) -> &'static str {
        "1nn"
    }

    fn fit<'a>(&'a self, s: &Dataset) -> Result<Classifier<'a>> {
        let train: Vec<(Vec<f64>, u8)> = labeled_pairs(s)?
            .into_iter()
            .map(|(x, y)| (x.to_vec(), y))
            .collect();
        Ok(Box::new(move |x| {
            let mut best = (f64::INFINITY, 0);
            for (xi, yi) in &train {
                let d = dist_sq(xi, x);
                if d < best.0 {
                    best = (d, *yi);
                }
            }
            best.1
        }))
    }
}

/// Predicts 1 iff `x₁ ≥ θ`, with `θ` minimizing training errors; the smallest
/// minimizing `θ` is chosen, with `−∞` (always 1) and `+∞` (always 0) allowed.
#[derive(Debug, Clone, Copy, Default)]
pub struct ThresholdErm;

impl ThresholdErm {
    pub fn threshold(s: &Dataset) -> Result<f64> {
        let mut pts: Vec<(f64, u8)> = labeled_pairs(s)?
            .into_iter()
            .map(|(x, y)| (x[0], y))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut errors = pts.iter().filter(|p| p.1 == 0).count() as i64;
        let mut best = (errors, f64::NEG_INFINITY);
        let mut i = 0;
        while i < pts.len() {
            let x = pts[i].0;
            // θ just above x: every point at x is now predicted 0
            while i < pts.len() && pts[i].0 == x {
                errors += if pts[i].1 == 0 { -1 } else { 1 };
                i += 1;
            }
            if errors < best.0 {
                let next = pts.get(i).map_or(f64::INFINITY, |p| p.0);
                best = (errors, next);
            }
        }
        Ok(best.1)
    }
}

impl BasePredictor for ThresholdErm {
    fn name(&self) -> &'static str {
        "threshold"
    }

    fn fit<'a>(&'a self, s: &Dataset) -> Result<Classifier<'a>> {
        let theta = Self::threshold(s)?;
        Ok(Box::new(move |x| u8::from(x[0] >= theta)))
    }
}

pub fn base_predictor_from_id(id: &str) -> Result<Box<dyn BasePredictor>> {
    match id {
        "1nn" => Ok(Box::new(NearestNeighbor)),
        "threshold" => Ok(Box::new(ThresholdErm)),
        _ => Err(Error::UnknownId(format!("base predictor {id}"))),
    }
}

/// `1/(1+e^ε)`, exact at `ε = ∞`.
pub fn flip_probability(eps: f64) -> f64 {
    if eps == f64::INFINITY {
        0.0
    } else {
        1.0 / (1.0 + eps.exp())
    }
}

/// `(e^ε−1)/(e^ε+1) = tanh(ε/2)`.
pub fn rr_gamma(eps: f64) -> f64 {
    (eps / 2.0).tanh()
}

pub struct RRPredictor {
    base: Box<dyn BasePredictor>,
    eps: f64,
}

impl RRPredictor {
    pub fn new(base: Box<dyn BasePredictor>, eps: f64) -> Result<Self> {
        if eps.is_nan() || eps < 0.0 {
            return Err(invalid(format!("ε must be nonnegative, got {eps}")));
        }
        Ok(Self { base, eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn base(&self) -> &dyn BasePredictor {
        self.base.as_ref()
    }

    pub fn flip_probability(&self) -> f64 {
        flip_probability(self.eps)
    }

    /// `[Pr(label 0), Pr(label 1)]`.
    pub fn output_distribution(&self, s: &Dataset, x: &[f64]) -> Result<[f64; 2]> {
        let q = self.flip_probability();
        Ok(match self.base.predict(s, x)? {
            0 => [1.0 - q, q],
            _ => [q, 1.0 - q],
        })
    }
}

/// One private prediction for `x`.
pub fn rr_predict(p: &RRPredictor, s: &Dataset, x: &[f64], seed: u64) -> Result<u8> {
    let label = p.base.predict(s, x)?;
    let flip = rng_from_seed(seed).random::<f64>() < p.flip_probability();
    Ok(if flip { 1 - label } else { label })
}

/// `max_y |ln Pr[K(s,x)=y] − ln Pr[K(s',x)=y]|`.
pub fn output_log_ratio(a: [f64; 2], b: [f64; 2]) -> f64 {
    (0..2)
        .map(|y| (a[y].ln() - b[y].ln()).abs())
        .fold(0.0, f64::max)
}

/// `M(s, (x, y)) = E_K[ℓ₀₁(K(s, x), y)] = q + (1 − 2q)·[base(s, x) ≠ y]`.
pub struct RRLossStatistic {
    predictor: RRPredictor,
}

pub fn rr_loss_statistic(p: RRPredictor) -> RRLossStatistic {
    RRLossStatistic { predictor: p }
}

impl RRLossStatistic {
    pub fn predictor(&self) -> &RRPredictor {
        &self.predictor
    }
}

impl StableStatistic for RRLossStatistic {
    fn name(&self) -> String {
        format!(
            "rr({}, ε={})",
            self.predictor.base.name(),
            self.predictor.eps
        )
    }

    fn declared_gamma(&self, _n: usize) -> f64 {
        rr_gamma(self.predictor.eps)
    }

    fn bind<'a>(&'a self, s: &Dataset) -> Result<Evaluator<'a>> {
        let h = self.predictor.base.fit(s)?;
        let q = self.predictor.flip_probability();
        Ok(Box::new(move |z: &Point| {
            let wrong = Some(h(z.features())) != z.label();
            if wrong {
                1.0 - q
            } else {
                q
            }
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm5Report {
    pub eps: f64,
    pub n: usize,
    pub delta: f64,
    /// `e^ε − 1`, the stability the bounds are stated with.
    pub gamma_paper: f64,
    /// `(e^ε−1)/(e^ε+1)`, the stability randomized response actually has.
    pub gamma_rr: f64,
    pub var: f64,
    pub tail: f64,
    /// Second-moment and tail bounds evaluated at `gamma_rr`.
    pub var_rr: f64,
    pub tail_rr: f64,
}

/// Second-moment and tail bounds for the expected loss of an `ε`-private predictor.
pub fn thm5_report(eps: f64, n: usize, delta: f64) -> Result<Thm5Report> {
    let inputs = BoundInputs::new(0.0, n as f64).eps(eps).delta(delta);
    let var = evaluate_bound(BoundId::Thm5Var, &inputs)?;
    let tail = evaluate_bound(BoundId::Thm5Hp, &inputs)?;
    let gamma_rr = rr_gamma(eps);
    let rr = BoundInputs::new(gamma_rr, n as f64).delta(delta);
    Ok(Thm5Report {
        eps,
        n,
        delta,
        gamma_paper: eps.exp_m1(),
        gamma_rr,
        var,
        tail,
        var_rr: evaluate_bound(BoundId::VarE5, &rr)?,
        tail_rr: evaluate_bound(BoundId::HpE6, &rr)?,
    })
}
