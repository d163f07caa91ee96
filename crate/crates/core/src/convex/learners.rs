use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::problem::{ConvexProblem, Term};
use crate::data::{Dataset, FiniteDistribution, Point};
use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, norm, project_unit_ball};
use crate::statistic::{Evaluator, StableStatistic};

/// Gradient-mapping tolerance of reference minimizations.
pub const REFERENCE_TOL: f64 = 1e-10;

const REFERENCE_MAX_ITERS: usize = 2_000_000;

/// Result of a learner run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerOutput {
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// Final value of the objective the learner minimizes.
    pub objective: f64,
    /// Uniform-stability certificate of the learner at this dataset size.
    pub gamma: f64,
    /// Optimality tolerance the weights were computed to; `None` when exact.
    pub solver_tol: Option<f64>,
}

/// Output of [`minimize_regularized`].
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub objective: f64,
    /// Gradient-mapping norm at `weights`.
    pub residual: f64,
}

fn objective(problem: &dyn ConvexProblem, terms: &[Term<'_>], lambda: f64, w: &[f64]) -> f64 {
    terms
        .iter()
        .map(|(z, a)| a * problem.loss(w, z))
        .sum::<f64>()
        + 0.5 * lambda * dot(w, w)
}

fn gradient(
    problem: &dyn ConvexProblem,
    terms: &[Term<'_>],
    lambda: f64,
    w: &[f64],
    out: &mut [f64],
) {
    out.iter_mut().zip(w).for_each(|(o, wi)| *o = lambda * wi);
    for (z, a) in terms {
        problem.add_grad(w, z, *a, out);
    }
}

/// Projected gradient descent on `Σ aⱼ ℓ(w, zⱼ) + (λ/2)|w|²` over the unit ball
/// with step `1/(σ + λ)`, stopping once the gradient mapping is at most `tol`.
pub fn minimize_regularized(
    problem: &dyn ConvexProblem,
    terms: &[Term<'_>],
    lambda: f64,
    tol: f64,
    max_iters: usize,
) -> Result<Solution> {
    let sigma = problem.smoothness().ok_or_else(|| {
        Error::Precondition(format!(
            "problem `{}` has no smoothness constant",
            problem.id()
        ))
    })?;
    let step = 1.0 / (sigma + lambda);
    let d = problem.dim();
    let mut w = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut next = vec![0.0; d];
    let mut residual = f64::INFINITY;
    for it in 0..=max_iters {
        gradient(problem, terms, lambda, &w, &mut g);
        next.iter_mut()
            .zip(w.iter().zip(&g))
            .for_each(|(n, (wi, gi))| *n = wi - step * gi);
        project_unit_ball(&mut next);
        residual = w
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / step;
        if residual <= tol {
            return Ok(Solution {
                objective: objective(problem, terms, lambda, &w),
                weights: w,
                iterations: it,
                residual,
            });
        }
        if it < max_iters {
            std::mem::swap(&mut w, &mut next);
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iters,
        residual,
    })
}

fn dataset_terms<'a>(problem: &dyn ConvexProblem, s: &'a Dataset) -> Result<Vec<Term<'a>>> {
    let a = 1.0 / s.len() as f64;
    s.iter()
        .map(|z| {
            problem.check_point(z)?;
            Ok((z, a))
        })
        .collect()
}

/// `⌈(σ/λ + 1) · ln(2/tol)⌉ · 10`
fn erm_iteration_cap(sigma: f64, lambda: f64, tol: f64) -> usize {
    (((sigma / lambda + 1.0) * (2.0 / tol).ln()).ceil().max(1.0) * 10.0) as usize
}

fn check_erm_args(lambda: f64, tol: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!(
            "λ must be positive and finite, got {lambda}"
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(invalid(format!("tol must be positive, got {tol}")));
    }
    Ok(())
}

/// `argmin_{|w| ≤ 1} F_s(w) + (λ/2)|w|²`, closed form when the family has one.
///
/// The certificate is `4/(λn)`.
pub fn regularized_erm(
    problem: &dyn ConvexProblem,
    s: &Dataset,
    lambda: f64,
    tol: f64,
) -> Result<LearnerOutput> {
    check_erm_args(lambda, tol)?;
    let terms = dataset_terms(problem, s)?;
    match problem.closed_form_minimizer(&terms, lambda) {
        Some(w) => Ok(LearnerOutput {
            objective: objective(problem, &terms, lambda, &w),
            weights: w,
            iterations: 0,
            gamma: 4.0 / (lambda * s.len() as f64),
            solver_tol: None,
        }),
        None => regularized_erm_iterative(problem, s, lambda, tol),
    }
}

/// [`regularized_erm`] that always uses the iterative solver.
pub fn regularized_erm_iterative(
    problem: &dyn ConvexProblem,
    s: &Dataset,
    lambda: f64,
    tol: f64,
) -> Result<LearnerOutput> {
    check_erm_args(lambda, tol)?;
    let terms = dataset_terms(problem, s)?;
    let sigma = problem.smoothness().unwrap_or(1.0);
    let sol = minimize_regularized(
        problem,
        &terms,
        lambda,
        tol,
        erm_iteration_cap(sigma, lambda, tol),
    )?;
    Ok(LearnerOutput {
        weights: sol.weights,
        iterations: sol.iterations,
        objective: sol.objective,
        gamma: 4.0 / (lambda * s.len() as f64),
        solver_tol: Some(tol),
    })
}

fn check_pgd_precondition(problem: &dyn ConvexProblem, t: usize) -> Result<()> {
    if t == 0 {
        return Err(Error::Precondition("T must be a positive integer".into()));
    }
    let sigma = problem.smoothness().ok_or_else(|| {
        Error::Precondition(format!(
            "problem `{}` has no smoothness constant",
            problem.id()
        ))
    })?;
    let limit = 2.0 * (t as f64).sqrt();
    if sigma > limit {
        return Err(Error::Precondition(format!(
            "smoothness {sigma} exceeds 2√T = {limit}"
        )));
    }
    Ok(())
}

/// `T` steps of `w ← proj(w − ∇F_s(w)/√T)` from the origin; returns `w_T`.
///
/// The certificate is `√T/n`.
pub fn pgd(problem: &dyn ConvexProblem, s: &Dataset, t: usize) -> Result<LearnerOutput> {
    check_pgd_precondition(problem, t)?;
    let terms = dataset_terms(problem, s)?;
    let rate = 1.0 / (t as f64).sqrt();
    let d = problem.dim();
    let mut w = vec![0.0; d];
    let mut g = vec![0.0; d];
    for _ in 0..t {
        gradient(problem, &terms, 0.0, &w, &mut g);
        crate::linalg::axpy(-rate, &g, &mut w);
        project_unit_ball(&mut w);
    }
    Ok(LearnerOutput {
        objective: objective(problem, &terms, 0.0, &w),
        weights: w,
        iterations: t,
        gamma: (t as f64).sqrt() / s.len() as f64,
        solver_tol: None,
    })
}

/// `M(s, z) = ℓ(w_{s,λ}, z)` for the regularized ERM solution.
pub struct ErmStatistic {
    problem: Box<dyn ConvexProblem>,
    lambda: f64,
    tol: Option<f64>,
}

pub fn make_erm_statistic(problem: Box<dyn ConvexProblem>, lambda: f64) -> Result<ErmStatistic> {
    check_erm_args(lambda, 1.0)?;
    Ok(ErmStatistic {
        problem,
        lambda,
        tol: None,
    })
}

impl ErmStatistic {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn problem(&self) -> &dyn ConvexProblem {
        self.problem.as_ref()
    }

    /// Fixes the solver tolerance instead of deriving it from the certificate.
    pub fn with_solver_tol(mut self, tol: f64) -> Result<Self> {
        check_erm_args(self.lambda, tol)?;
        self.tol = Some(tol);
        Ok(self)
    }

    /// Solver tolerance used at size `n`: a hundredth of the certificate, capped at 1e-9.
    pub fn solver_tol(&self, n: usize) -> f64 {
        self.tol
            .unwrap_or_else(|| (self.declared_gamma(n) / 100.0).min(1e-9))
    }

    pub fn fit(&self, s: &Dataset) -> Result<LearnerOutput> {
        regularized_erm(
            self.problem.as_ref(),
            s,
            self.lambda,
            self.solver_tol(s.len()),
        )
    }
}

impl StableStatistic for ErmStatistic {
    fn name(&self) -> String {
        format!("erm({}, λ={})", self.problem.id(), self.lambda)
    }

    fn declared_gamma(&self, n: usize) -> f64 {
        4.0 / (self.lambda * n as f64)
    }

    fn bind<'a>(&'a self, s: &Dataset) -> Result<Evaluator<'a>> {
        let w = self.fit(s)?.weights;
        let problem = self.problem.as_ref();
        Ok(Box::new(move |z: &Point| problem.loss(&w, z)))
    }
}

/// `M(s, z) = ℓ(PGD_T(s), z)`.
pub struct PgdStatistic {
    problem: Box<dyn ConvexProblem>,
    t: usize,
}

pub fn make_pgd_statistic(problem: Box<dyn ConvexProblem>, t: usize) -> Result<PgdStatistic> {
    check_pgd_precondition(problem.as_ref(), t)?;
    Ok(PgdStatistic { problem, t })
}

impl PgdStatistic {
    pub fn steps(&self) -> usize {
        self.t
    }

    pub fn fit(&self, s: &Dataset) -> Result<LearnerOutput> {
        pgd(self.problem.as_ref(), s, self.t)
    }
}

impl StableStatistic for PgdStatistic {
    fn name(&self) -> String {
        format!("pgd({}, T={})", self.problem.id(), self.t)
    }

    fn declared_gamma(&self, n: usize) -> f64 {
        (self.t as f64).sqrt() / n as f64
    }

    fn bind<'a>(&'a self, s: &Dataset) -> Result<Evaluator<'a>> {
        let w = self.fit(s)?.weights;
        let problem = self.problem.as_ref();
        Ok(Box::new(move |z: &Point| problem.loss(&w, z)))
    }
}

/// Hyperparameter schedules for the stable learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// `λ = 4/√(δn)`
    SsssLambda,
    /// `λ = c/√(√δ · n)`
    SecondmomentLambda,
    /// `λ = c/n^{2/3}`
    HighprobLambda,
    /// `T = ⌈n/√2⌉`
    ExpectedRiskT,
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ssss_lambda" => Ok(Schedule::SsssLambda),
            "secondmoment_lambda" => Ok(Schedule::SecondmomentLambda),
            "highprob_lambda" => Ok(Schedule::HighprobLambda),
            "expected_risk_t" => Ok(Schedule::ExpectedRiskT),
            other => Err(Error::UnknownId(other.to_string())),
        }
    }
}

pub fn hyperparam_schedule(kind: Schedule, n: usize, delta: f64, c: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid(format!("c must be positive, got {c}")));
    }
    let needs_delta = matches!(kind, Schedule::SsssLambda | Schedule::SecondmomentLambda);
    if needs_delta && !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("δ must lie in (0,1), got {delta}")));
    }
    let n = n as f64;
    Ok(match kind {
        Schedule::SsssLambda => 4.0 / (delta * n).sqrt(),
        Schedule::SecondmomentLambda => c / (delta.sqrt() * n).sqrt(),
        Schedule::HighprobLambda => c / n.powf(2.0 / 3.0),
        Schedule::ExpectedRiskT => (n / std::f64::consts::SQRT_2).ceil(),
    })
}

fn distribution_terms<'a>(
    problem: &dyn ConvexProblem,
    p: &'a FiniteDistribution,
) -> Result<Vec<Term<'a>>> {
    p.iter()
        .map(|(z, w)| {
            problem.check_point(z)?;
            Ok((z, w))
        })
        .collect()
}

/// `F_P(w) = E_{z~P} ℓ(w, z)`.
pub fn population_objective(
    problem: &dyn ConvexProblem,
    p: &FiniteDistribution,
    w: &[f64],
) -> Result<f64> {
    let terms = distribution_terms(problem, p)?;
    Ok(objective(problem, &terms, 0.0, w))
}

/// `(argmin, F*)` of `F_P` over the ball, solved to [`REFERENCE_TOL`].
pub fn reference_minimum(
    problem: &dyn ConvexProblem,
    p: &FiniteDistribution,
) -> Result<(Vec<f64>, f64)> {
    let terms = distribution_terms(problem, p)?;
    let w = match problem.closed_form_minimizer(&terms, 0.0) {
        Some(w) => w,
        None => {
            minimize_regularized(problem, &terms, 0.0, REFERENCE_TOL, REFERENCE_MAX_ITERS)?.weights
        }
    };
    let value = objective(problem, &terms, 0.0, &w);
    Ok((w, value))
}

/// `F_P(w) − F*`.
pub fn excess_risk(problem: &dyn ConvexProblem, p: &FiniteDistribution, w: &[f64]) -> Result<f64> {
    if w.len() != problem.dim() {
        return Err(invalid("weight dimension does not match the problem"));
    }
    if norm(w) > 1.0 + 1e-9 {
        return Err(invalid("weights lie outside the unit ball"));
    }
    let (_, f_star) = reference_minimum(problem, p)?;
    Ok(population_objective(problem, p, w)? - f_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::{QuadraticFamily, ScaledLogisticFamily};
    use crate::data::Point;
    use crate::rng::rng_from_seed;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn quad(d: usize) -> QuadraticFamily {
        QuadraticFamily::new(d).unwrap()
    }

    #[test]
    fn erm_closed_form_example() {
        let s = Dataset::from_scalars(&[0.6, 0.6]).unwrap();
        let out = regularized_erm(&quad(1), &s, 0.5, 1e-9).unwrap();
        assert_abs_diff_eq!(out.weights[0], 0.3, epsilon = 1e-15);
        assert_eq!(out.solver_tol, None);
    }

    #[test]
    fn erm_large_lambda_goes_to_origin() {
        let s = Dataset::from_scalars(&[0.9, 0.8, -0.1]).unwrap();
        let out = regularized_erm(&quad(1), &s, 1e9, 1e-9).unwrap();
        assert!(out.weights[0].abs() < 1e-9);
        let it = regularized_erm_iterative(&quad(1), &s, 1e6, 1e-12).unwrap();
        assert!(it.weights[0].abs() < 1e-6);
    }

    #[test]
    fn erm_certificate_arithmetic() {
        let s = Dataset::from_scalars(&vec![0.1; 400]).unwrap();
        let out = regularized_erm(&quad(1), &s, 0.1, 1e-9).unwrap();
        assert_abs_diff_eq!(out.gamma, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn erm_argument_errors() {
        let s = Dataset::from_scalars(&[0.1]).unwrap();
        assert!(regularized_erm(&quad(1), &s, 0.0, 1e-9).is_err());
        assert!(regularized_erm(&quad(1), &s, 0.1, 0.0).is_err());
        let labeled = Dataset::new(vec![Point::labeled(vec![0.1], 0).unwrap()]).unwrap();
        assert!(regularized_erm(&quad(1), &labeled, 0.1, 1e-9).is_err());
    }

    #[test]
    fn erm_nonconvergence_is_reported() {
        let terms: Vec<Term<'_>> = vec![];
        let err = minimize_regularized(&ScaledLogisticFamily::new(1).unwrap(), &terms, 0.0, 0.0, 3);
        // zero objective converges immediately even at tol 0
        assert!(err.is_ok());
        let z = Point::labeled(vec![1.0], 1).unwrap();
        let terms = vec![(&z, 1.0)];
        let err = minimize_regularized(
            &ScaledLogisticFamily::new(1).unwrap(),
            &terms,
            1.0,
            1e-14,
            2,
        );
        assert!(matches!(
            err,
            Err(Error::NonConvergence { iterations: 2, .. })
        ));
    }

    #[test]
    fn iterative_solver_matches_closed_form() {
        let mut rng = rng_from_seed(21);
        for _ in 0..30 {
            let n = rng.random_range(1..20);
            let pts: Vec<Point> = (0..n)
                .map(|_| {
                    let v: Vec<f64> = (0..3).map(|_| rng.random_range(-0.57..0.57)).collect();
                    Point::vector(v).unwrap()
                })
                .collect();
            let s = Dataset::new(pts).unwrap();
            let lambda = rng.random_range(0.01..2.0);
            let tol = 1e-10;
            let exact = regularized_erm(&quad(3), &s, lambda, tol).unwrap();
            let it = regularized_erm_iterative(&quad(3), &s, lambda, tol).unwrap();
            // strong convexity λ + ½ turns a gradient-mapping tol into a distance bound
            for (a, b) in exact.weights.iter().zip(&it.weights) {
                assert!((a - b).abs() <= tol / (lambda + 0.5) + 1e-14);
            }
        }
    }

    #[test]
    fn pgd_single_step_by_hand() {
        for z0 in [-0.8, 0.4, 1.0] {
            let s = Dataset::from_scalars(&[z0]).unwrap();
            let out = pgd(&quad(1), &s, 1).unwrap();
            assert_abs_diff_eq!(out.weights[0], z0 / 2.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn pgd_certificate_and_preconditions() {
        let s = Dataset::from_scalars(&vec![0.0; 1000]).unwrap();
        assert_abs_diff_eq!(pgd(&quad(1), &s, 100).unwrap().gamma, 0.01, epsilon = 1e-15);
        assert!(pgd(&quad(1), &s, 0).is_err());
        assert!(make_pgd_statistic(Box::new(quad(1)), 0).is_err());
    }

    #[test]
    fn pgd_output_stays_in_ball() {
        let s = Dataset::from_scalars(&[1.0, 1.0, 0.9]).unwrap();
        for t in [1, 4, 100] {
            let w = pgd(&quad(1), &s, t).unwrap().weights;
            assert!(norm(&w) <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn schedules() {
        assert_abs_diff_eq!(
            hyperparam_schedule(Schedule::SsssLambda, 400, 0.04, 1.0).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            hyperparam_schedule(Schedule::HighprobLambda, 1000, 0.5, 1.0).unwrap(),
            0.01,
            epsilon = 1e-12
        );
        assert_eq!(
            hyperparam_schedule(Schedule::ExpectedRiskT, 100, 0.5, 1.0).unwrap(),
            71.0
        );
        // c/√(√δ n) with δ = 0.0625, n = 400, c = 2: 2/√100
        assert_abs_diff_eq!(
            hyperparam_schedule(Schedule::SecondmomentLambda, 400, 0.0625, 2.0).unwrap(),
            0.2,
            epsilon = 1e-12
        );
        assert!(hyperparam_schedule(Schedule::SsssLambda, 400, 1.5, 1.0).is_err());
        assert!(hyperparam_schedule(Schedule::SsssLambda, 0, 0.5, 1.0).is_err());
        assert!("bogus".parse::<Schedule>().is_err());
        assert_eq!(
            "expected_risk_t".parse::<Schedule>().unwrap(),
            Schedule::ExpectedRiskT
        );
    }

    #[test]
    fn excess_risk_two_point_by_hand() {
        let p = FiniteDistribution::uniform(vec![
            Point::scalar(-0.5).unwrap(),
            Point::scalar(0.5).unwrap(),
        ])
        .unwrap();
        // F_P(0.5) = ¼(½·1² + ½·0²) = 0.125 and F* = F_P(0) = ¼·0.25
        assert_abs_diff_eq!(
            excess_risk(&quad(1), &p, &[0.5]).unwrap(),
            0.0625,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            excess_risk(&quad(1), &p, &[0.0]).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        let (_, f_star) = reference_minimum(&quad(1), &p).unwrap();
        assert_abs_diff_eq!(f_star, 0.0625, epsilon = 1e-15);
    }

    #[test]
    fn logistic_reference_minimum_is_minimal() {
        let pts = vec![
            Point::labeled(vec![-0.5], 0).unwrap(),
            Point::labeled(vec![-0.5], 1).unwrap(),
            Point::labeled(vec![0.5], 0).unwrap(),
            Point::labeled(vec![0.5], 1).unwrap(),
        ];
        let p = FiniteDistribution::new(pts, vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        let problem = ScaledLogisticFamily::new(1).unwrap();
        let (w, _) = reference_minimum(&problem, &p).unwrap();
        assert_abs_diff_eq!(excess_risk(&problem, &p, &w).unwrap(), 0.0, epsilon = 1e-15);
        for k in 0..=20 {
            let v = -1.0 + 0.1 * k as f64;
            assert!(excess_risk(&problem, &p, &[v]).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn erm_statistic_range_and_certificate() {
        let m = make_erm_statistic(Box::new(quad(1)), 0.4).unwrap();
        assert_abs_diff_eq!(m.declared_gamma(50), 0.2, epsilon = 1e-15);
        let p = FiniteDistribution::uniform(vec![
            Point::scalar(-1.0).unwrap(),
            Point::scalar(1.0).unwrap(),
        ])
        .unwrap();
        let mut rng = rng_from_seed(4);
        for _ in 0..200 {
            let s = Dataset::sample(&p, 5, &mut rng).unwrap();
            let f = m.bind(&s).unwrap();
            for (z, _) in p.iter() {
                let v = f(z);
                assert!((0.0..=1.0).contains(&v));
            }
        }
        assert!(make_erm_statistic(Box::new(quad(1)), -1.0).is_err());
    }
}
