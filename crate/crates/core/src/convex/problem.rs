use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Point, PointKind};
use crate::error::{invalid, Error, Result};
use crate::linalg::{dist_sq, dot, norm};
use crate::rng::rng_from_seed;

/// One weighted loss term `a · ℓ(w, z)` of an objective.
pub type Term<'a> = (&'a Point, f64);

/// A family `{ℓ(·, z)}` of convex losses on the unit ball with range `[0, 1]`.
pub trait ConvexProblem: Send + Sync {
    fn id(&self) -> &'static str;

    fn dim(&self) -> usize;

    fn point_kind(&self) -> PointKind;

    fn loss(&self, w: &[f64], z: &Point) -> f64;

    /// `out += scale · ∇_w ℓ(w, z)`
    fn add_grad(&self, w: &[f64], z: &Point, scale: f64, out: &mut [f64]);

    fn lipschitz(&self) -> f64;

    fn smoothness(&self) -> Option<f64>;

    fn strong_convexity(&self) -> Option<f64> {
        None
    }

    /// Closed-form minimizer over the ball of `Σ aⱼ ℓ(w, zⱼ) + (λ/2)|w|²` with `Σ aⱼ = 1`, if known.
    fn closed_form_minimizer(&self, _terms: &[Term<'_>], _lambda: f64) -> Option<Vec<f64>> {
        None
    }

    fn check_point(&self, z: &Point) -> Result<()> {
        if z.kind() != self.point_kind() {
            return Err(Error::KindMismatch {
                expected: self.point_kind(),
                found: z.kind(),
            });
        }
        if z.dim() != self.dim() {
            return Err(invalid(format!(
                "problem `{}` has dimension {}, point has {}",
                self.id(),
                self.dim(),
                z.dim()
            )));
        }
        Ok(())
    }
}

/// `ℓ(w, z) = ¼ |w − z|²` over vector points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticFamily {
    dim: usize,
}

impl QuadraticFamily {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        Ok(Self { dim })
    }
}

impl ConvexProblem for QuadraticFamily {
    fn id(&self) -> &'static str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn point_kind(&self) -> PointKind {
        PointKind::Vector
    }

    fn loss(&self, w: &[f64], z: &Point) -> f64 {
        0.25 * dist_sq(w, z.features())
    }

    fn add_grad(&self, w: &[f64], z: &Point, scale: f64, out: &mut [f64]) {
        for ((o, wi), zi) in out.iter_mut().zip(w).zip(z.features()) {
            *o += scale * 0.5 * (wi - zi);
        }
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }

    fn smoothness(&self) -> Option<f64> {
        Some(0.5)
    }

    fn strong_convexity(&self) -> Option<f64> {
        Some(0.5)
    }

    fn closed_form_minimizer(&self, terms: &[Term<'_>], lambda: f64) -> Option<Vec<f64>> {
        // ½(w − z̄) + λw = 0, and |z̄| ≤ 1 keeps the solution inside the ball
        let mut mean = vec![0.0; self.dim];
        for (z, a) in terms {
            crate::linalg::axpy(*a, z.features(), &mut mean);
        }
        Some(crate::linalg::scale(1.0 / (1.0 + 2.0 * lambda), &mean))
    }
}

/// `ℓ(w, (x, y)) = ln(1 + exp(−(2y − 1)⟨w, x⟩)) / ln(1 + e)` over labeled points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledLogisticFamily {
    dim: usize,
}

impl ScaledLogisticFamily {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        Ok(Self { dim })
    }

    fn normalizer() -> f64 {
        std::f64::consts::E.ln_1p()
    }

    fn margin(w: &[f64], z: &Point) -> f64 {
        let sign = if z.label() == Some(1) { 1.0 } else { -1.0 };
        sign * dot(w, z.features())
    }
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl ConvexProblem for ScaledLogisticFamily {
    fn id(&self) -> &'static str {
        "logistic"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn point_kind(&self) -> PointKind {
        PointKind::Labeled
    }

    fn loss(&self, w: &[f64], z: &Point) -> f64 {
        softplus(-Self::margin(w, z)) / Self::normalizer()
    }

    fn add_grad(&self, w: &[f64], z: &Point, scale: f64, out: &mut [f64]) {
        let sign = if z.label() == Some(1) { 1.0 } else { -1.0 };
        let coef = -sign * sigmoid(-Self::margin(w, z)) / Self::normalizer();
        crate::linalg::axpy(scale * coef, z.features(), out);
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }

    fn smoothness(&self) -> Option<f64> {
        Some(0.25 / Self::normalizer())
    }
}

/// Resolves a preset id (`quadratic`, `logistic`) at dimension `dim`.
pub fn problem_from_id(id: &str, dim: usize) -> Result<Box<dyn ConvexProblem>> {
    match id {
        "quadratic" => Ok(Box::new(QuadraticFamily::new(dim)?)),
        "logistic" => Ok(Box::new(ScaledLogisticFamily::new(dim)?)),
        other => Err(Error::UnknownId(other.to_string())),
    }
}

/// Largest observed violations of the constants a problem reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsReport {
    /// Relative error of the analytic gradient against central differences.
    pub max_grad_rel_error: f64,
    /// Largest `|ℓ(w) − ℓ(w')| / |w − w'|` seen.
    pub max_secant_lipschitz: f64,
    /// Largest `|∇ℓ(w) − ∇ℓ(w')| / |w − w'|` seen.
    pub max_secant_smoothness: f64,
    /// Most negative `ℓ(w') − ℓ(w) − ⟨∇ℓ(w), w' − w⟩` seen.
    pub min_convexity_gap: f64,
    pub min_loss: f64,
    pub max_loss: f64,
}

fn random_in_ball<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = norm(&v);
        if r > 1e-9 {
            let radius: f64 = rng.random::<f64>().powf(1.0 / dim as f64);
            return v.iter().map(|x| x / r * radius).collect();
        }
    }
}

/// Spot-checks gradient, Lipschitz, smoothness, convexity and range on random
/// pairs `w, w'` in the ball with `z` drawn from `points`.
pub fn verify_constants(
    problem: &dyn ConvexProblem,
    points: &[Point],
    probes: usize,
    seed: u64,
) -> Result<ConstantsReport> {
    if points.is_empty() {
        return Err(invalid("need at least one point"));
    }
    for z in points {
        problem.check_point(z)?;
    }
    let d = problem.dim();
    let mut rng = rng_from_seed(seed);
    let mut report = ConstantsReport {
        max_grad_rel_error: 0.0,
        max_secant_lipschitz: 0.0,
        max_secant_smoothness: 0.0,
        min_convexity_gap: f64::INFINITY,
        min_loss: f64::INFINITY,
        max_loss: f64::NEG_INFINITY,
    };
    let h = 1e-6;
    for _ in 0..probes {
        let z = &points[rng.random_range(0..points.len())];
        let w = random_in_ball(d, &mut rng);
        let w2 = random_in_ball(d, &mut rng);

        let mut g = vec![0.0; d];
        problem.add_grad(&w, z, 1.0, &mut g);
        let mut fd = vec![0.0; d];
        for k in 0..d {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[k] += h;
            wm[k] -= h;
            fd[k] = (problem.loss(&wp, z) - problem.loss(&wm, z)) / (2.0 * h);
        }
        let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
        let scale = norm(&g).max(1e-3);
        report.max_grad_rel_error = report.max_grad_rel_error.max(norm(&diff) / scale);

        let step = dist_sq(&w, &w2).sqrt();
        if step > 1e-9 {
            let (l1, l2) = (problem.loss(&w, z), problem.loss(&w2, z));
            let mut g2 = vec![0.0; d];
            problem.add_grad(&w2, z, 1.0, &mut g2);
            report.max_secant_lipschitz = report.max_secant_lipschitz.max((l1 - l2).abs() / step);
            report.max_secant_smoothness = report
                .max_secant_smoothness
                .max(dist_sq(&g, &g2).sqrt() / step);
            let delta: Vec<f64> = w2.iter().zip(&w).map(|(a, b)| a - b).collect();
            report.min_convexity_gap = report.min_convexity_gap.min(l2 - l1 - dot(&g, &delta));
            report.min_loss = report.min_loss.min(l1.min(l2));
            report.max_loss = report.max_loss.max(l1.max(l2));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_sphere_points(kind: PointKind, d: usize) -> Vec<Point> {
        let mut out = Vec::new();
        for k in 0..d {
            for sign in [-1.0, 1.0] {
                let mut x = vec![0.0; d];
                x[k] = sign;
                match kind {
                    PointKind::Vector => out.push(Point::vector(x).unwrap()),
                    PointKind::Labeled => {
                        out.push(Point::labeled(x.clone(), 0).unwrap());
                        out.push(Point::labeled(x, 1).unwrap());
                    }
                }
            }
        }
        out.push(match kind {
            PointKind::Vector => {
                Point::vector(vec![0.3; d].iter().map(|v| v / (d as f64).sqrt()).collect()).unwrap()
            }
            PointKind::Labeled => Point::labeled(vec![0.1; d], 1).unwrap(),
        });
        out
    }

    fn check_family(problem: &dyn ConvexProblem) {
        let pts = unit_sphere_points(problem.point_kind(), problem.dim());
        let r = verify_constants(problem, &pts, 4000, 17).unwrap();
        assert!(r.max_grad_rel_error <= 1e-5, "{r:?}");
        assert!(
            r.max_secant_lipschitz <= problem.lipschitz() + 1e-12,
            "{r:?}"
        );
        assert!(
            r.max_secant_smoothness <= problem.smoothness().unwrap() + 1e-12,
            "{r:?}"
        );
        assert!(r.min_convexity_gap >= -1e-12, "{r:?}");
        assert!(r.min_loss >= 0.0 && r.max_loss <= 1.0, "{r:?}");
    }

    #[test]
    fn quadratic_constants_hold() {
        for d in [1, 3] {
            check_family(&QuadraticFamily::new(d).unwrap());
        }
    }

    #[test]
    fn logistic_constants_hold() {
        for d in [1, 2] {
            check_family(&ScaledLogisticFamily::new(d).unwrap());
        }
        assert!(ScaledLogisticFamily::new(1).unwrap().smoothness().unwrap() <= 0.25 / 1.3132);
    }

    #[test]
    fn logistic_extremes_hit_range_ends() {
        let p = ScaledLogisticFamily::new(1).unwrap();
        let wrong = Point::labeled(vec![1.0], 0).unwrap();
        assert!((p.loss(&[1.0], &wrong) - 1.0).abs() < 1e-15);
        let right = Point::labeled(vec![1.0], 1).unwrap();
        assert!(p.loss(&[1.0], &right) > 0.0);
    }

    #[test]
    fn presets_resolve() {
        assert_eq!(problem_from_id("quadratic", 2).unwrap().id(), "quadratic");
        assert_eq!(
            problem_from_id("logistic", 2).unwrap().point_kind(),
            PointKind::Labeled
        );
        assert!(matches!(
            problem_from_id("hinge", 2),
            Err(Error::UnknownId(_))
        ));
        assert!(problem_from_id("quadratic", 0).is_err());
    }

    #[test]
    fn check_point_rejects_wrong_kind() {
        let q = QuadraticFamily::new(1).unwrap();
        assert!(q
            .check_point(&Point::labeled(vec![0.1], 0).unwrap())
            .is_err());
        assert!(q
            .check_point(&Point::vector(vec![0.1, 0.1]).unwrap())
            .is_err());
    }
}
