//! Geometry of the dominating set `P_Q` and of violated tests.
//!
//! For a test direction `h` the support value `min_{v in P_Q} h · v` equals
//! `min_{p'} Σ_i h_i TV(p', q_i)`. On a finite domain that inner problem is a
//! separable convex piecewise-linear allocation of unit mass and is solved
//! exactly by filling segments in order of increasing slope. The margin
//! function `G(h) = min_{v in P} h · v - h · u` is concave and polyhedral; its
//! maximum is found by a cutting-plane loop over exact supporting pieces.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, MaxMinLp};
use crate::model::{
    distance_vector_raw, dot, Distribution, DistanceVector, HypothesisClass, TestDirection,
};

/// Value of `min_{v in P_Q} h · v` together with its primal and dual witnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameValueResult {
    /// `Σ_i h_i TV(witness, q_i)`.
    pub value: f64,
    /// `min_{p'} Σ_i h_i (E_{p'}[F_i] - E_{q_i}[F_i])` for the returned discriminators.
    pub dual_value: f64,
    /// A minimizing `p'`.
    pub witness: Distribution,
    /// `F_i : X -> [0,1]`, one row per hypothesis.
    pub discriminators: Vec<Vec<f64>>,
    /// `v(witness)`, the supporting point of `P_Q` in direction `h`.
    pub support_point: Vec<f64>,
}

impl GameValueResult {
    /// `value - dual_value`; nonnegative up to round-off.
    pub fn duality_gap(&self) -> f64 {
        self.value - self.dual_value
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    slope: f64,
    x: usize,
    start: f64,
    end: f64,
}

/// Exact inner minimization; `h` is assumed to lie on the simplex.
pub(crate) fn support_min_raw(h: &[f64], class: &HypothesisClass) -> GameValueResult {
    let n = class.len();
    let domain = class.domain_size();
    let mut segments: Vec<Segment> = Vec::with_capacity(domain * (n + 1));
    let mut column: Vec<(f64, f64)> = Vec::with_capacity(n);
    for x in 0..domain {
        column.clear();
        column.extend(
            class
                .iter()
                .zip(h)
                .filter(|(_, w)| **w > 0.0)
                .map(|(q, w)| (q.probs()[x], *w)),
        );
        column.sort_by(|a, b| a.0.total_cmp(&b.0));
        // f_x(t) = Σ_i h_i (t - q_i(x))^+ has slope Σ_{q_i(x) <= b} h_i on (b, next).
        let mut slope = 0.0;
        let mut prev = 0.0;
        let mut k = 0;
        while k < column.len() {
            let b = column[k].0;
            if b > prev {
                segments.push(Segment {
                    slope,
                    x,
                    start: prev,
                    end: b,
                });
            }
            while k < column.len() && column[k].0 == b {
                slope += column[k].1;
                k += 1;
            }
            prev = b;
        }
        segments.push(Segment {
            slope,
            x,
            start: prev,
            end: f64::INFINITY,
        });
    }
    segments.sort_by(|a, b| {
        a.slope
            .total_cmp(&b.slope)
            .then(a.x.cmp(&b.x))
            .then(a.start.total_cmp(&b.start))
    });

    let mut witness = vec![0.0; domain];
    let mut remaining = 1.0;
    let mut threshold = 0.0;
    for seg in &segments {
        let len = seg.end - seg.start;
        threshold = seg.slope;
        if len >= remaining {
            witness[seg.x] = if len == remaining {
                seg.end
            } else {
                seg.start + remaining
            };
            break;
        }
        witness[seg.x] = seg.end;
        remaining -= len;
    }

    // Saddle-point discriminators: Σ_i h_i F_i(x) = threshold wherever the
    // witness has mass, split evenly across hypotheses tied with the witness.
    let mut discriminators = vec![vec![0.0; domain]; n];
    for x in 0..domain {
        let px = witness[x];
        let mut below = 0.0;
        let mut tied = 0.0;
        for (q, w) in class.iter().zip(h) {
            if *w > 0.0 {
                let qx = q.probs()[x];
                match qx.partial_cmp(&px) {
                    Some(Ordering::Less) => below += w,
                    Some(Ordering::Equal) => tied += w,
                    _ => {}
                }
            }
        }
        let theta = if px > 0.0 && tied > 0.0 {
            ((threshold - below) / tied).clamp(0.0, 1.0)
        } else {
            1.0
        };
        for (i, (q, w)) in class.iter().zip(h).enumerate() {
            let qx = q.probs()[x];
            discriminators[i][x] = if *w == 0.0 {
                if px >= qx {
                    1.0
                } else {
                    0.0
                }
            } else if qx < px {
                1.0
            } else if qx > px {
                0.0
            } else {
                theta
            };
        }
    }

    let support_point = distance_vector_raw(&witness, class);
    let value = dot(h, support_point.values());
    let min_load = (0..domain)
        .map(|x| {
            discriminators
                .iter()
                .zip(h)
                .map(|(f, w)| w * f[x])
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    let offset: f64 = class
        .iter()
        .zip(h)
        .zip(&discriminators)
        .map(|((q, w), f)| w * q.expect(f))
        .sum();
    GameValueResult {
        value,
        dual_value: min_load - offset,
        witness: Distribution::new(witness).expect("greedy fill yields a distribution"),
        discriminators,
        support_point: support_point.values().to_vec(),
    }
}

/// `min_{p' in Δ(X)} Σ_i h_i TV(p', q_i)` with its minimizing `p'` and saddle-point discriminators.
///
/// The inner problem is solved exactly; `tol` bounds the admissible duality gap.
pub fn support_min(h: &TestDirection, class: &HypothesisClass, tol: f64) -> Result<GameValueResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    if h.len() != class.len() {
        return Err(Error::DimensionMismatch {
            expected: class.len(),
            got: h.len(),
        });
    }
    let res = support_min_raw(h.weights(), class);
    if res.duality_gap().abs() > tol {
        return Err(Error::NonConvergence(format!(
            "support duality gap {} exceeds {tol}",
            res.duality_gap()
        )));
    }
    Ok(res)
}

/// A point `u` and margin `eps`, describing `H_{P,eps}(u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginQuery {
    pub u: DistanceVector,
    pub eps: f64,
}

impl MarginQuery {
    pub fn new(u: DistanceVector, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParameter(format!("margin {eps} must be nonnegative")));
        }
        Ok(Self { u, eps })
    }
}

/// `G(h) = min_{v in P_Q} h · v - h · u`. The query's margin is not used.
pub fn margin(h: &TestDirection, query: &MarginQuery, class: &HypothesisClass) -> Result<f64> {
    if query.u.len() != class.len() {
        return Err(Error::DimensionMismatch {
            expected: class.len(),
            got: query.u.len(),
        });
    }
    let res = support_min(h, class, 1e-9)?;
    Ok(res.value - query.u.dot(h))
}

/// Outcome of maximizing `G` over the simplex.
#[derive(Debug, Clone)]
pub struct MarginBounds {
    /// Exact `G(h)` at the returned direction.
    pub lower: f64,
    /// Upper bound on `max_h G(h)` from the cutting-plane model.
    pub upper: f64,
    pub h: TestDirection,
}

/// Supporting pieces `v(p')` of `P_Q` collected from exact support evaluations.
///
/// Because the pieces do not depend on `u`, one pool serves every margin
/// query against the same class; it gives an outer model
/// `G_K(h) = min_k h · (w_k - u) >= G(h)`.
#[derive(Debug, Clone)]
pub struct SupportPool {
    class: HypothesisClass,
    pieces: Vec<Vec<f64>>,
    index: HashMap<Vec<u64>, usize>,
    /// Pieces active at the last max-entropy solution.
    pub(crate) active: Vec<usize>,
    /// Pieces binding at the last margin maximization.
    margin_active: Vec<usize>,
    oracle_calls: u64,
}

impl SupportPool {
    pub fn new(class: &HypothesisClass) -> Self {
        let mut pool = Self {
            class: class.clone(),
            pieces: Vec::new(),
            index: HashMap::new(),
            active: Vec::new(),
            margin_active: Vec::new(),
            oracle_calls: 0,
        };
        for q in class.iter() {
            pool.insert(distance_vector_raw(q.probs(), class).values().to_vec());
        }
        let uniform = vec![1.0 / class.len() as f64; class.len()];
        pool.evaluate(&uniform);
        pool
    }

    pub fn class(&self) -> &HypothesisClass {
        &self.class
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub(crate) fn piece(&self, k: usize) -> &[f64] {
        &self.pieces[k]
    }

    /// Number of exact support evaluations performed through this pool.
    pub fn oracle_calls(&self) -> u64 {
        self.oracle_calls
    }

    /// Exact support evaluation at `h`; the supporting piece is added to the pool
    /// and its index returned alongside the result.
    pub(crate) fn evaluate(&mut self, h: &[f64]) -> (GameValueResult, usize) {
        self.oracle_calls += 1;
        let res = support_min_raw(h, &self.class);
        let idx = self.insert(res.support_point.clone());
        (res, idx)
    }

    fn insert(&mut self, piece: Vec<f64>) -> usize {
        let key: Vec<u64> = piece.iter().map(|v| v.to_bits()).collect();
        if let Some(&k) = self.index.get(&key) {
            return k;
        }
        self.pieces.push(piece);
        self.index.insert(key, self.pieces.len() - 1);
        self.pieces.len() - 1
    }

    /// Maximizes `G` for the point `u` until the model gap is at most `gap_tol`.
    ///
    /// With `stop_above = Some(c)` the loop also stops as soon as the sign of
    /// `max G - c` is certified. Pool pieces enter the LP lazily, and fresh
    /// support evaluations happen only when no known piece cuts off the LP point.
    pub fn max_margin(&mut self, u: &[f64], gap_tol: f64, stop_above: Option<f64>) -> Result<MarginBounds> {
        const MAX_ITERS: usize = 200_000;
        let n = self.class.len();
        if u.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: u.len(),
            });
        }
        let mut lp = MaxMinLp::new(n);
        let mut in_lp = vec![false; self.pieces.len()];
        let mut rows: Vec<usize> = Vec::new();
        let mut row = vec![0.0; n];
        let seeds: Vec<usize> = (0..=n.min(self.pieces.len() - 1))
            .chain(self.margin_active.iter().copied())
            .collect();
        for k in seeds {
            if !in_lp[k] {
                in_lp[k] = true;
                rows.push(k);
                self.fill_row(k, u, &mut row);
                lp.add_row(&row)?;
            }
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..MAX_ITERS {
            let (upper, h) = lp.solve()?;
            // Cheapest first: a known piece that the LP point violates.
            let (mut worst, mut worst_k) = (f64::INFINITY, usize::MAX);
            for (k, w) in self.pieces.iter().enumerate() {
                if !in_lp[k] {
                    let v: f64 = w.iter().zip(u).zip(&h).map(|((a, b), c)| (a - b) * c).sum();
                    if v < worst {
                        worst = v;
                        worst_k = k;
                    }
                }
            }
            if worst < upper - 1e-12 && worst_k != usize::MAX {
                in_lp[worst_k] = true;
                rows.push(worst_k);
                self.fill_row(worst_k, u, &mut row);
                lp.add_row(&row)?;
                continue;
            }
            let (res, idx) = self.evaluate(&h);
            if idx == in_lp.len() {
                in_lp.push(false);
            }
            let g = res.value - dot(&h, u);
            if best.as_ref().is_none_or(|(b, _)| g > *b) {
                best = Some((g, h.clone()));
            }
            let (lower, h_best) = best.as_ref().expect("best is set");
            let certified = match stop_above {
                Some(c) => upper <= c || *lower > c,
                None => false,
            };
            if upper - lower <= gap_tol || certified {
                self.margin_active = rows
                    .iter()
                    .copied()
                    .filter(|k| {
                        let v: f64 = self.pieces[*k].iter().zip(u).zip(&h).map(|((a, b), c)| (a - b) * c).sum();
                        v <= upper + 1e-9
                    })
                    .collect();
                return Ok(MarginBounds {
                    lower: *lower,
                    upper,
                    h: TestDirection::normalized(h_best.clone())?,
                });
            }
            if !in_lp[idx] {
                in_lp[idx] = true;
                rows.push(idx);
                self.fill_row(idx, u, &mut row);
                lp.add_row(&row)?;
            } else {
                // The LP already holds this piece, so G(h) = upper up to LP round-off.
                return Ok(MarginBounds {
                    lower: *lower,
                    upper: upper.max(*lower),
                    h: TestDirection::normalized(h_best.clone())?,
                });
            }
        }
        Err(Error::NonConvergence(format!(
            "margin maximization exceeded {MAX_ITERS} iterations"
        )))
    }

    fn fill_row(&self, k: usize, u: &[f64], row: &mut [f64]) {
        for ((r, w), x) in row.iter_mut().zip(&self.pieces[k]).zip(u) {
            *r = w - x;
        }
    }
}

/// `max_h G(h)` to within `tol`, with an approximate maximizer.
///
/// `H_{P,eps}(u)` is declared nonempty by callers iff the returned value exceeds `eps + tol`.
pub fn violated_test_value(
    query: &MarginQuery,
    class: &HypothesisClass,
    tol: f64,
) -> Result<(f64, TestDirection)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let mut pool = SupportPool::new(class);
    let bounds = pool.max_margin(query.u.values(), tol * 1e-3, None)?;
    Ok((bounds.lower, bounds.h))
}

/// Indicator of the Yatracos set `{x : q_i(x) >= q_j(x)}`.
pub fn yatracos_set(i: usize, j: usize, class: &HypothesisClass) -> Result<Vec<bool>> {
    let qi = class.get(i)?;
    let qj = class.get(j)?;
    if i == j {
        return Err(Error::InvalidParameter(
            "a Yatracos set needs two distinct hypotheses".into(),
        ));
    }
    Ok(qi
        .probs()
        .iter()
        .zip(qj.probs())
        .map(|(a, b)| a >= b)
        .collect())
}

/// Finds `r` with `TV(r, q_i) <= u_i + eps + 2 tol` for every `i`.
///
/// Solved as `min_r max_i (TV(r, q_i) - u_i)`; fails if that value exceeds `eps + 2 tol`.
pub fn feasibility_round(
    u: &DistanceVector,
    eps: f64,
    class: &HypothesisClass,
    tol: f64,
) -> Result<Distribution> {
    if u.len() != class.len() {
        return Err(Error::DimensionMismatch {
            expected: class.len(),
            got: u.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let rows: Vec<&[f64]> = class.iter().map(|q| q.probs()).collect();
    let (_, r) = lp::min_max_excess(&rows, u.values())?;
    let r = Distribution::new(r)?;
    let excess = distance_vector_raw(r.probs(), class)
        .values()
        .iter()
        .zip(u.values())
        .map(|(v, ui)| v - ui)
        .fold(f64::NEG_INFINITY, f64::max);
    if excess > eps + 2.0 * tol {
        return Err(Error::Infeasible(format!(
            "no distribution within margin {eps}: best excess {excess}"
        )));
    }
    Ok(r)
}
