//! Domain points, datasets and finite-support distributions.
//!
//! A [`Dataset`] is an immutable ordered tuple of points of a single kind.
//! [`Dataset::replace`] returns a new dataset, which keeps stability audits
//! free of aliasing concerns. A [`FiniteDistribution`] has exact expectations,
//! so true means are sums rather than Monte Carlo estimates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Slack allowed on the unit-norm constraint for points built from floating-point arithmetic.
pub const NORM_SLACK: f64 = 1e-12;

/// Weights must sum to one within this tolerance.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Vector,
    Labeled,
}

/// A point of the domain: a vector in the unit ball, or a labeled example whose
/// features lie in the unit ball.
///
/// Serializes as a bare coordinate array (vector) or `{"x": [...], "y": 0|1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointDoc", into = "PointDoc")]
pub enum Point {
    Vector(Vec<f64>),
    Labeled { x: Vec<f64>, y: u8 },
}

fn check_features(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(invalid("point must have dimension at least 1"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(invalid("point coordinates must be finite"));
    }
    let norm = crate::linalg::norm(x);
    if norm > 1.0 + NORM_SLACK {
        return Err(invalid(format!("point norm {norm} exceeds 1")));
    }
    Ok(())
}

impl Point {
    pub fn vector(x: Vec<f64>) -> Result<Self> {
        check_features(&x)?;
        Ok(Point::Vector(x))
    }

    pub fn labeled(x: Vec<f64>, y: u8) -> Result<Self> {
        check_features(&x)?;
        if y > 1 {
            return Err(invalid(format!("label {y} is not in {{0,1}}")));
        }
        Ok(Point::Labeled { x, y })
    }

    /// One-dimensional vector point.
    pub fn scalar(v: f64) -> Result<Self> {
        Self::vector(vec![v])
    }

    pub fn kind(&self) -> PointKind {
        match self {
            Point::Vector(_) => PointKind::Vector,
            Point::Labeled { .. } => PointKind::Labeled,
        }
    }

    /// The vector itself, or the features of a labeled example.
    pub fn features(&self) -> &[f64] {
        match self {
            Point::Vector(x) | Point::Labeled { x, .. } => x,
        }
    }

    pub fn label(&self) -> Option<u8> {
        match self {
            Point::Vector(_) => None,
            Point::Labeled { y, .. } => Some(*y),
        }
    }

    pub fn dim(&self) -> usize {
        self.features().len()
    }

    /// First coordinate.
    pub fn first(&self) -> f64 {
        self.features()[0]
    }
}

/// An ordered n-tuple of points of one kind and dimension, n ≥ 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointSetDoc", into = "PointSetDoc")]
pub struct Dataset {
    points: Vec<Point>,
}

fn check_homogeneous(points: &[Point]) -> Result<()> {
    let first = points
        .first()
        .ok_or_else(|| invalid("a point set must be nonempty"))?;
    for p in &points[1..] {
        if p.kind() != first.kind() {
            return Err(Error::KindMismatch {
                expected: first.kind(),
                found: p.kind(),
            });
        }
        if p.dim() != first.dim() {
            return Err(invalid(format!(
                "dimension mismatch: {} vs {}",
                first.dim(),
                p.dim()
            )));
        }
    }
    Ok(())
}

impl Dataset {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        check_homogeneous(&points)?;
        Ok(Self { points })
    }

    /// Dataset of one-dimensional vector points.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(
            values
                .iter()
                .map(|&v| Point::scalar(v))
                .collect::<Result<_>>()?,
        )
    }

    /// `n` i.i.d. draws from `dist`.
    pub fn sample<R: Rng + ?Sized>(
        dist: &FiniteDistribution,
        n: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if n == 0 {
            return Err(invalid("dataset size must be at least 1"));
        }
        Ok(Self {
            points: (0..n).map(|_| dist.sample(rng).clone()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn get(&self, i: usize) -> Option<&Point> {
        self.points.get(i)
    }

    pub fn kind(&self) -> PointKind {
        self.points[0].kind()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point> {
        self.points.iter()
    }

    /// Checks that `z` could be an element of this dataset.
    pub fn check_compatible(&self, z: &Point) -> Result<()> {
        if z.kind() != self.kind() {
            return Err(Error::KindMismatch {
                expected: self.kind(),
                found: z.kind(),
            });
        }
        if z.dim() != self.dim() {
            return Err(invalid(format!(
                "dimension mismatch: dataset has {}, point has {}",
                self.dim(),
                z.dim()
            )));
        }
        Ok(())
    }

    /// The dataset with position `i` set to `z`; `self` is untouched.
    pub fn replace(&self, i: usize, z: &Point) -> Result<Dataset> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        self.check_compatible(z)?;
        let mut points = self.points.clone();
        points[i] = z.clone();
        Ok(Dataset { points })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Point;
    type IntoIter = std::slice::Iter<'a, Point>;

    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

/// A probability distribution with finite support over the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointSetDoc", into = "PointSetDoc")]
pub struct FiniteDistribution {
    support: Vec<Point>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl FiniteDistribution {
    pub fn new(support: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        check_homogeneous(&support)?;
        if support.len() != weights.len() {
            return Err(invalid(format!(
                "{} support points but {} weights",
                support.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        for (i, a) in support.iter().enumerate() {
            if support[i + 1..].iter().any(|b| a == b) {
                return Err(invalid("support points must be pairwise distinct"));
            }
        }
        let cumulative = weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            support,
            weights,
            cumulative,
        })
    }

    pub fn uniform(support: Vec<Point>) -> Result<Self> {
        let k = support.len();
        if k == 0 {
            return Err(invalid("support must be nonempty"));
        }
        Self::new(support, vec![1.0 / k as f64; k])
    }

    pub fn support(&self) -> &[Point] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> PointKind {
        self.support[0].kind()
    }

    pub fn dim(&self) -> usize {
        self.support[0].dim()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Support points paired with their probabilities.
    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.support.iter().zip(self.weights.iter().copied())
    }

    /// Exact `E_{z~P}[f(z)]`.
    pub fn expect(&self, mut f: impl FnMut(&Point) -> f64) -> f64 {
        self.iter().map(|(z, w)| w * f(z)).sum()
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &Point {
        &self.support[self.sample_index(rng)]
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        match self.cumulative.iter().position(|&c| c > u) {
            Some(i) => i,
            // u landed above a cumulative total rounded just below 1
            None => self.weights.iter().rposition(|&w| w > 0.0).unwrap_or(0),
        }
    }

    pub fn check_compatible(&self, s: &Dataset) -> Result<()> {
        s.check_compatible(&self.support[0])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Wire form of a point inside a [`PointSetDoc`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum PointDoc {
    Vector(Vec<f64>),
    Labeled { x: Vec<f64>, y: u8 },
}

/// `{"kind": "vector"|"labeled", "dim": d, "points": [...], "weights": [...]}`
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PointSetDoc {
    kind: PointKind,
    dim: usize,
    points: Vec<PointDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
}

impl PointSetDoc {
    fn from_points(points: &[Point], weights: Option<Vec<f64>>) -> Self {
        PointSetDoc {
            kind: points[0].kind(),
            dim: points[0].dim(),
            points: points.iter().cloned().map(PointDoc::from).collect(),
            weights,
        }
    }

    fn into_points(self) -> Result<(Vec<Point>, Option<Vec<f64>>)> {
        let points = self
            .points
            .into_iter()
            .map(|p| {
                let point = Point::try_from(p)?;
                if point.kind() != self.kind {
                    return Err(Error::KindMismatch {
                        expected: self.kind,
                        found: point.kind(),
                    });
                }
                if point.dim() != self.dim {
                    return Err(invalid(format!(
                        "declared dim {} but point has dim {}",
                        self.dim,
                        point.dim()
                    )));
                }
                Ok(point)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((points, self.weights))
    }
}

impl From<Point> for PointDoc {
    fn from(p: Point) -> Self {
        match p {
            Point::Vector(x) => PointDoc::Vector(x),
            Point::Labeled { x, y } => PointDoc::Labeled { x, y },
        }
    }
}

impl TryFrom<PointDoc> for Point {
    type Error = Error;

    fn try_from(doc: PointDoc) -> Result<Self> {
        match doc {
            PointDoc::Vector(x) => Point::vector(x),
            PointDoc::Labeled { x, y } => Point::labeled(x, y),
        }
    }
}

impl From<Dataset> for PointSetDoc {
    fn from(s: Dataset) -> Self {
        PointSetDoc::from_points(&s.points, None)
    }
}

impl TryFrom<PointSetDoc> for Dataset {
    type Error = Error;

    fn try_from(doc: PointSetDoc) -> Result<Self> {
        let (points, _) = doc.into_points()?;
        Dataset::new(points)
    }
}

impl From<FiniteDistribution> for PointSetDoc {
    fn from(d: FiniteDistribution) -> Self {
        PointSetDoc::from_points(&d.support, Some(d.weights))
    }
}

impl TryFrom<PointSetDoc> for FiniteDistribution {
    type Error = Error;

    fn try_from(doc: PointSetDoc) -> Result<Self> {
        let (points, weights) = doc.into_points()?;
        let weights = weights.ok_or_else(|| invalid("distribution requires `weights`"))?;
        FiniteDistribution::new(points, weights)
    }
}
