//! Finite discrete distributions, total-variation geometry and entropy utilities.
//!
//! Every type here validates on construction and is immutable afterwards, so
//! values can be shared freely between concurrent trials.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum == 1` for probability vectors and simplex points.
pub const NORMALIZATION_TOL: f64 = 1e-9;

fn check_simplex(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidDistribution(format!("{what} must be non-empty")));
    }
    if let Some((i, v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || **v < 0.0)
    {
        return Err(Error::InvalidDistribution(format!(
            "{what} entry {i} is {v}, expected a finite nonnegative value"
        )));
    }
    let total: f64 = values.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidDistribution(format!(
            "{what} sums to {total}, expected 1 within {NORMALIZATION_TOL:e}"
        )));
    }
    Ok(())
}

/// A probability vector over the domain `{0, .., len-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Validates `probs`; inputs off the simplex are rejected rather than renormalized.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_simplex(&probs, "distribution")?;
        Ok(Self { probs })
    }

    /// Point mass on `x`.
    pub fn point_mass(domain_size: usize, x: usize) -> Result<Self> {
        if x >= domain_size {
            return Err(Error::InvalidParameter(format!(
                "point mass at {x} outside a domain of size {domain_size}"
            )));
        }
        let mut probs = vec![0.0; domain_size];
        probs[x] = 1.0;
        Ok(Self { probs })
    }

    pub fn uniform(domain_size: usize) -> Result<Self> {
        if domain_size == 0 {
            return Err(Error::InvalidParameter("empty domain".into()));
        }
        Ok(Self {
            probs: vec![1.0 / domain_size as f64; domain_size],
        })
    }

    /// `weight * self + (1 - weight) * other`.
    pub fn mix(&self, other: &Distribution, weight: f64) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::DomainMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::InvalidParameter(format!("mixing weight {weight}")));
        }
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| weight * a + (1.0 - weight) * b)
            .collect();
        Distribution::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `E[f]` for `f: X -> R` given as a per-element vector.
    pub fn expect(&self, f: &[f64]) -> f64 {
        self.probs.iter().zip(f).map(|(p, v)| p * v).sum()
    }
}

impl TryFrom<Vec<f64>> for Distribution {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Distribution::new(v)
    }
}

impl From<Distribution> for Vec<f64> {
    fn from(d: Distribution) -> Self {
        d.probs
    }
}

/// An ordered list of `n >= 1` distributions over a shared domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisClass {
    hypotheses: Vec<Distribution>,
}

impl HypothesisClass {
    pub fn new(hypotheses: Vec<Distribution>) -> Result<Self> {
        let first = hypotheses.first().ok_or(Error::EmptyClass)?;
        let domain = first.len();
        if let Some(bad) = hypotheses.iter().find(|q| q.len() != domain) {
            return Err(Error::DomainMismatch {
                expected: domain,
                got: bad.len(),
            });
        }
        Ok(Self { hypotheses })
    }

    /// Builds a class from raw rows, validating each.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let hyps = rows
            .into_iter()
            .map(Distribution::new)
            .collect::<Result<Vec<_>>>()?;
        Self::new(hyps)
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn domain_size(&self) -> usize {
        self.hypotheses[0].len()
    }

    pub fn get(&self, i: usize) -> Result<&Distribution> {
        self.hypotheses.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.len(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &Distribution> {
        self.hypotheses.iter()
    }

    pub fn hypotheses(&self) -> &[Distribution] {
        &self.hypotheses
    }

    pub(crate) fn check_domain(&self, d: &Distribution) -> Result<()> {
        if d.len() != self.domain_size() {
            return Err(Error::DomainMismatch {
                expected: self.domain_size(),
                got: d.len(),
            });
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for HypothesisClass {
    type Output = Distribution;
    fn index(&self, i: usize) -> &Distribution {
        &self.hypotheses[i]
    }
}

/// A point of `[0,1]^n`, one coordinate per hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceVector {
    values: Vec<f64>,
}

impl DistanceVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::InvalidParameter(format!(
                "distance vector entry {i} is {v}, expected a value in [0,1]"
            )));
        }
        Ok(Self { values })
    }

    /// Clamps every entry into `[0,1]`; NaN becomes 0.
    pub fn clamped(values: Vec<f64>) -> Self {
        Self {
            values: values
                .into_iter()
                .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
                .collect(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
    }

    pub fn filled(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coordinatewise `self >= other - tol`.
    pub fn dominates(&self, other: &DistanceVector, tol: f64) -> bool {
        self.len() == other.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| *a >= *b - tol)
    }

    /// Coordinatewise maximum.
    pub fn join(&self, other: &DistanceVector) -> DistanceVector {
        DistanceVector {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.max(*b))
                .collect(),
        }
    }

    pub fn dot(&self, h: &TestDirection) -> f64 {
        dot(&self.values, h.weights())
    }
}

/// A point of the simplex `Δ_n`, used as the normal of a separating hyperplane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestDirection {
    weights: Vec<f64>,
}

impl TestDirection {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        check_simplex(&weights, "test direction")?;
        Ok(Self { weights })
    }

    /// Clips negatives and rescales to unit mass; errors if nothing positive is left.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        for w in weights.iter_mut() {
            if !w.is_finite() || *w < 0.0 {
                *w = 0.0;
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter(
                "cannot normalize a vector with no positive mass".into(),
            ));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("empty simplex".into()));
        }
        Ok(Self {
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn vertex(n: usize, i: usize) -> Result<Self> {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        let mut weights = vec![0.0; n];
        weights[i] = 1.0;
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn l1_distance(&self, other: &TestDirection) -> f64 {
        l1(&self.weights, &other.weights)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Half the ℓ1 distance of two equal-length probability vectors, clamped to `[0,1]`.
pub(crate) fn tv_slices(a: &[f64], b: &[f64]) -> f64 {
    (0.5 * l1(a, b)).clamp(0.0, 1.0)
}

/// Total variation distance `sup_A p(A) - q(A)`; on a finite domain this is half the ℓ1 distance.
pub fn tv_distance(a: &Distribution, b: &Distribution) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DomainMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(tv_slices(&a.probs, &b.probs))
}

/// `v(p) = (TV(p, q_i))_i`.
pub fn distance_vector(p: &Distribution, class: &HypothesisClass) -> Result<DistanceVector> {
    class.check_domain(p)?;
    Ok(distance_vector_raw(p.probs(), class))
}

pub(crate) fn distance_vector_raw(p: &[f64], class: &HypothesisClass) -> DistanceVector {
    DistanceVector {
        values: class.iter().map(|q| tv_slices(p, q.probs())).collect(),
    }
}

/// Index of the closest hypothesis (lowest index on ties) and its distance.
///
/// Indices are zero-based.
pub fn opt_index(p: &Distribution, class: &HypothesisClass) -> Result<(usize, f64)> {
    if class.is_empty() {
        return Err(Error::EmptyClass);
    }
    let v = distance_vector(p, class)?;
    Ok(argmin(v.values()))
}

/// Lowest-index argmin.
pub(crate) fn argmin(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < best.1 {
            best = (i, v);
        }
    }
    best
}

pub(crate) fn entropy_slice(h: &[f64]) -> f64 {
    -h.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(h: &TestDirection) -> f64 {
    entropy_slice(&h.weights).max(0.0)
}

pub(crate) fn kl_slice(a: &[f64], b: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        if x > 0.0 {
            if y <= 0.0 {
                return f64::INFINITY;
            }
            total += x * (x / y).ln();
        }
    }
    total.max(0.0)
}

/// `KL(a || b)` in nats; `+inf` when the support of `a` is not contained in that of `b`.
///
/// # Panics
///
/// Panics if the two directions have different dimensions.
pub fn kl_divergence(a: &TestDirection, b: &TestDirection) -> f64 {
    assert_eq!(a.len(), b.len(), "kl_divergence: dimension mismatch");
    kl_slice(&a.weights, &b.weights)
}
