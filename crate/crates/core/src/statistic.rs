//! Data-dependent functions `M(s, z)` and their estimation errors.
//!
//! A [`StableStatistic`] is evaluated in two stages: [`StableStatistic::bind`]
//! fixes the dataset (running a learner, say) and returns an [`Evaluator`]
//! for `M(s, ·)`. Every quantity below is built on that split so that a learner
//! runs once per dataset, not once per evaluation point.

use crate::data::{Dataset, FiniteDistribution, Point};
use crate::error::{invalid, Result};

/// `M(s, ·)` for a fixed dataset `s`.
pub type Evaluator<'a> = Box<dyn Fn(&Point) -> f64 + Send + Sync + 'a>;

/// A deterministic data-dependent function with range `[0, 1]` and a declared
/// uniform-stability certificate.
pub trait StableStatistic: Send + Sync {
    fn name(&self) -> String;

    /// Claimed uniform stability at dataset size `n`.
    fn declared_gamma(&self, n: usize) -> f64;

    fn bind<'a>(&'a self, s: &Dataset) -> Result<Evaluator<'a>>;

    fn eval(&self, s: &Dataset, z: &Point) -> Result<f64> {
        s.check_compatible(z)?;
        Ok(self.bind(s)?(z))
    }
}

/// `M(s, z) = c`.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl Constant {
    pub fn new(c: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c) {
            return Err(invalid(format!("constant {c} outside [0,1]")));
        }
        Ok(Self(c))
    }
}

impl StableStatistic for Constant {
    fn name(&self) -> String {
        format!("const({})", self.0)
    }

    fn declared_gamma(&self, _n: usize) -> f64 {
        0.0
    }

    fn bind<'a>(&'a self, _s: &Dataset) -> Result<Evaluator<'a>> {
        let c = self.0;
        Ok(Box::new(move |_| c))
    }
}

/// `M(s, z) = z₁` clipped to `[0, 1]`; ignores the dataset.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl StableStatistic for Identity {
    fn name(&self) -> String {
        "identity".into()
    }

    fn declared_gamma(&self, _n: usize) -> f64 {
        0.0
    }

    fn bind<'a>(&'a self, _s: &Dataset) -> Result<Evaluator<'a>> {
        Ok(Box::new(|z| z.first().clamp(0.0, 1.0)))
    }
}

fn first_coordinate_mean(s: &Dataset) -> f64 {
    s.iter().map(Point::first).sum::<f64>() / s.len() as f64
}

/// `M(s, z) = mean of the first coordinates of s`, clipped to `[0, 1]`.
///
/// Coordinates live in `[-1, 1]`, so one replacement moves the mean by at most `2/n`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SampleMean;

impl StableStatistic for SampleMean {
    fn name(&self) -> String {
        "mean".into()
    }

    fn declared_gamma(&self, n: usize) -> f64 {
        2.0 / n as f64
    }

    fn bind<'a>(&'a self, s: &Dataset) -> Result<Evaluator<'a>> {
        let m = first_coordinate_mean(s).clamp(0.0, 1.0);
        Ok(Box::new(move |_| m))
    }
}

/// `M(s, z) = |z₁ − mean(s)|` clipped to `[0, 1]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct AbsDeviation;

impl StableStatistic for AbsDeviation {
    fn name(&self) -> String {
        "absdev".into()
    }

    fn declared_gamma(&self, n: usize) -> f64 {
        2.0 / n as f64
    }

    fn bind<'a>(&'a self, s: &Dataset) -> Result<Evaluator<'a>> {
        let m = first_coordinate_mean(s);
        Ok(Box::new(move |z| (z.first() - m).abs().clamp(0.0, 1.0)))
    }
}

/// Empirical and true mean of `M(s, ·)` from a single bind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationParts {
    pub empirical_mean: f64,
    pub true_mean: f64,
}

impl EstimationParts {
    /// `Δ_s(M)`: true mean minus empirical mean.
    pub fn delta(&self) -> f64 {
        self.true_mean - self.empirical_mean
    }
}

fn mean_over_dataset(f: &Evaluator<'_>, s: &Dataset) -> f64 {
    s.iter().map(f).sum::<f64>() / s.len() as f64
}

/// `(1/n) Σᵢ M(s, sᵢ)`.
pub fn empirical_mean(m: &dyn StableStatistic, s: &Dataset) -> Result<f64> {
    Ok(mean_over_dataset(&m.bind(s)?, s))
}

/// `Σ_z P(z) M(s, z)`, exact over the finite support.
pub fn true_mean(m: &dyn StableStatistic, s: &Dataset, p: &FiniteDistribution) -> Result<f64> {
    p.check_compatible(s)?;
    let f = m.bind(s)?;
    Ok(p.expect(|z| f(z)))
}

pub fn estimation_parts(
    m: &dyn StableStatistic,
    s: &Dataset,
    p: &FiniteDistribution,
) -> Result<EstimationParts> {
    p.check_compatible(s)?;
    let f = m.bind(s)?;
    Ok(EstimationParts {
        empirical_mean: mean_over_dataset(&f, s),
        true_mean: p.expect(|z| f(z)),
    })
}

/// `Δ_s(M) = E_P[M(s)] − E_s[M(s)]`.
pub fn estimation_error(
    m: &dyn StableStatistic,
    s: &Dataset,
    p: &FiniteDistribution,
) -> Result<f64> {
    Ok(estimation_parts(m, s, p)?.delta())
}

/// `L(s, z) = M(s, z) − E_P[M(s)]`: unbiased under `P`, range `[−1, 1]`,
/// stability at most twice that of `M`.
pub struct CenteredStatistic<'m> {
    base: &'m dyn StableStatistic,
    dist: FiniteDistribution,
}

pub fn center<'m>(m: &'m dyn StableStatistic, p: &FiniteDistribution) -> CenteredStatistic<'m> {
    CenteredStatistic {
        base: m,
        dist: p.clone(),
    }
}

impl<'m> CenteredStatistic<'m> {
    pub fn base(&self) -> &'m dyn StableStatistic {
        self.base
    }

    pub fn distribution(&self) -> &FiniteDistribution {
        &self.dist
    }

    pub fn declared_gamma(&self, n: usize) -> f64 {
        2.0 * self.base.declared_gamma(n)
    }

    pub fn bind(&self, s: &Dataset) -> Result<Evaluator<'m>> {
        self.dist.check_compatible(s)?;
        let f = self.base.bind(s)?;
        let mean = self.dist.expect(|z| f(z));
        Ok(Box::new(move |z| f(z) - mean))
    }

    pub fn eval(&self, s: &Dataset, z: &Point) -> Result<f64> {
        s.check_compatible(z)?;
        Ok(self.bind(s)?(z))
    }

    /// `E_P[L(s)]`; zero up to rounding for every `s`.
    pub fn true_mean(&self, s: &Dataset) -> Result<f64> {
        let f = self.bind(s)?;
        Ok(self.dist.expect(|z| f(z)))
    }

    /// `E_s[L(s)] = −Δ_s(M)`.
    pub fn empirical_mean(&self, s: &Dataset) -> Result<f64> {
        Ok(mean_over_dataset(&self.bind(s)?, s))
    }

    /// Leave-one-out estimate `Σ_z P(z) (1/n) Σᵢ L(s^{i←z}, sᵢ)`, exact over the support.
    pub fn loo_estimate(&self, s: &Dataset) -> Result<f64> {
        let n = s.len() as f64;
        let mut total = 0.0;
        for (z, w) in self.dist.iter() {
            if w == 0.0 {
                continue;
            }
            let mut inner = 0.0;
            for (i, si) in s.iter().enumerate() {
                let replaced = s.replace(i, z)?;
                inner += self.bind(&replaced)?(si);
            }
            total += w * inner / n;
        }
        Ok(total)
    }
}
