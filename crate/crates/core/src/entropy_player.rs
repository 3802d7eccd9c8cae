//! Maximum-entropy player.
//!
//! The core routine maximizes `H(h)` over `{h in Δ_n : a_k · h >= b_k}` through
//! its dual `min_{μ >= 0} LSE(Aᵀμ) - b · μ`, whose minimizer gives
//! `h = softmax(Aᵀμ)`. The dual is solved by a log-barrier Newton method with
//! an active set of constraints, so only the cuts that bind are carried in
//! the Newton system.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SupportPool;
use crate::model::{dot, entropy_slice, kl_slice, DistanceVector, HypothesisClass, TestDirection};

/// A maximum-entropy test and its certificates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropySolution {
    pub h: TestDirection,
    pub attained_entropy: f64,
    /// Exact `G(h)` for the queried `u`.
    pub certified_margin: f64,
    /// Duality gap of the final entropy program over the collected cuts.
    pub gap_certificate: f64,
}

/// Constraint `a · h >= b`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LinearCut {
    pub a: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct DualSolution {
    pub h: Vec<f64>,
    pub mu: Vec<f64>,
    pub gap: f64,
}

const MU_BLOWUP: f64 = 1e13;
const FINAL_GAP: f64 = 1e-12;

fn softmax(theta: &[f64]) -> (Vec<f64>, f64) {
    let m = theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut h: Vec<f64> = theta.iter().map(|t| (t - m).exp()).collect();
    let s: f64 = h.iter().sum();
    h.iter_mut().for_each(|x| *x /= s);
    (h, m + s.ln())
}

struct DualProblem<'a> {
    n: usize,
    rows: Vec<&'a [f64]>,
    b: Vec<f64>,
}

impl DualProblem<'_> {
    fn theta(&self, mu: &[f64]) -> Vec<f64> {
        let mut theta = vec![0.0; self.n];
        for (row, m) in self.rows.iter().zip(mu) {
            for (t, a) in theta.iter_mut().zip(row.iter()) {
                *t += m * a;
            }
        }
        theta
    }

    /// Barrier objective `LSE(Aᵀμ) - b·μ - t Σ ln μ`, or `None` outside `μ > 0`.
    fn barrier(&self, mu: &[f64], t: f64) -> Option<f64> {
        if mu.iter().any(|m| !(*m > 0.0)) {
            return None;
        }
        let (_, lse) = softmax(&self.theta(mu));
        Some(lse - dot(&self.b, mu) - t * mu.iter().map(|m| m.ln()).sum::<f64>())
    }
}

/// Solves `max H(h)` subject to the cuts. Errors with `Infeasible` when the
/// multipliers diverge, which happens exactly when the cuts exclude the simplex.
pub(crate) fn solve_dual(n: usize, cuts: &[&LinearCut]) -> Result<DualSolution> {
    let k = cuts.len();
    let uniform = vec![1.0 / n as f64; n];
    if k == 0 || cuts.iter().all(|c| dot(&c.a, &uniform) >= c.b) {
        return Ok(DualSolution {
            h: uniform,
            mu: vec![0.0; k],
            gap: 0.0,
        });
    }
    let prob = DualProblem {
        n,
        rows: cuts.iter().map(|c| c.a.as_slice()).collect(),
        b: cuts.iter().map(|c| c.b).collect(),
    };
    let mut mu = vec![1.0; k];
    let mut t = 1.0;
    loop {
        newton_center(&prob, &mut mu, t)?;
        if k as f64 * t <= FINAL_GAP {
            break;
        }
        t *= 0.1;
    }
    let (h, lse) = softmax(&prob.theta(&mu));
    let dual = lse - dot(&prob.b, &mu);
    let gap = (dual - entropy_slice(&h)).max(0.0);
    Ok(DualSolution { h, mu, gap })
}

fn newton_center(prob: &DualProblem<'_>, mu: &mut [f64], t: f64) -> Result<()> {
    let k = mu.len();
    let n = prob.n;
    for _ in 0..200 {
        let (h, _) = softmax(&prob.theta(mu));
        // ah_k = a_k · h
        let ah: Vec<f64> = prob.rows.iter().map(|r| dot(r, &h)).collect();
        let grad = DVector::from_iterator(
            k,
            (0..k).map(|i| ah[i] - prob.b[i] - t / mu[i]),
        );
        // Hessian: A diag(h) Aᵀ - (Ah)(Ah)ᵀ + t diag(1/μ²).
        let mut scaled = DMatrix::zeros(k, n);
        for i in 0..k {
            for x in 0..n {
                scaled[(i, x)] = prob.rows[i][x] * h[x].sqrt();
            }
        }
        let mut hess = &scaled * scaled.transpose();
        for i in 0..k {
            for j in 0..k {
                hess[(i, j)] -= ah[i] * ah[j];
            }
            hess[(i, i)] += t / (mu[i] * mu[i]);
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&(-&grad)),
            None => {
                let ridge = 1e-12 * (1.0 + hess.diagonal().amax());
                for i in 0..k {
                    hess[(i, i)] += ridge;
                }
                hess.cholesky()
                    .ok_or_else(|| Error::NonConvergence("entropy Newton system is singular".into()))?
                    .solve(&(-&grad))
            }
        };
        let decrement = -grad.dot(&step);
        if !decrement.is_finite() {
            return Err(Error::NonConvergence("entropy Newton step is not finite".into()));
        }
        if decrement <= 1e-24 {
            return Ok(());
        }
        let mut alpha: f64 = 1.0;
        for i in 0..k {
            if step[i] < 0.0 {
                alpha = alpha.min(-0.99 * mu[i] / step[i]);
            }
        }
        let phi = prob.barrier(mu, t).expect("interior point");
        let mut trial = mu.to_vec();
        // In the quadratic region the Armijo test drowns in round-off; take the step.
        let quadratic = decrement < 1e-12 && alpha >= 1.0;
        loop {
            for i in 0..k {
                trial[i] = mu[i] + alpha * step[i];
            }
            if let Some(v) = prob.barrier(&trial, t) {
                if quadratic || v <= phi - 1e-4 * alpha * decrement {
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-16 {
                // No further progress is representable; the point is centered to precision.
                return Ok(());
            }
        }
        mu.copy_from_slice(&trial);
        if mu.iter().any(|m| *m > MU_BLOWUP) {
            return Err(Error::Infeasible(
                "entropy constraints admit no point of the simplex".into(),
            ));
        }
    }
    Ok(())
}

/// Max-entropy point of `{h in Δ_n : a_k · h >= b_k for all k}` by active-set iteration.
///
/// `working` is warm-started and left holding the constraints that bind.
pub(crate) fn max_entropy_over_cuts(
    n: usize,
    cuts: &[LinearCut],
    working: &mut Vec<usize>,
    viol_tol: f64,
) -> Result<DualSolution> {
    working.retain(|k| *k < cuts.len());
    for _ in 0..10_000 {
        let active: Vec<&LinearCut> = working.iter().map(|k| &cuts[*k]).collect();
        let sol = solve_dual(n, &active)?;
        let mut violated: Vec<(f64, usize)> = cuts
            .iter()
            .enumerate()
            .filter(|(k, _)| !working.contains(k))
            .map(|(k, c)| (dot(&c.a, &sol.h) - c.b, k))
            .filter(|(s, _)| *s < -viol_tol)
            .collect();
        if violated.is_empty() {
            prune(working, &sol.mu);
            return Ok(sol);
        }
        violated.sort_by(|a, b| a.0.total_cmp(&b.0));
        prune(working, &sol.mu);
        working.extend(violated.iter().take(4).map(|(_, k)| *k));
    }
    Err(Error::NonConvergence("active-set entropy iteration did not settle".into()))
}

fn prune(working: &mut Vec<usize>, mu: &[f64]) {
    let top = mu.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        working.clear();
        return;
    }
    let keep: Vec<usize> = working
        .iter()
        .zip(mu)
        .filter(|(_, m)| **m > 1e-9 * top)
        .map(|(k, _)| *k)
        .collect();
    *working = keep;
}

/// Stateful max-entropy player over `H_{P,c}(u)` that keeps its supporting cuts between calls.
#[derive(Debug, Clone)]
pub struct EntropyPlayer {
    pool: SupportPool,
}

impl EntropyPlayer {
    pub fn new(class: &HypothesisClass) -> Self {
        Self {
            pool: SupportPool::new(class),
        }
    }

    pub fn pool(&self) -> &SupportPool {
        &self.pool
    }

    pub fn pool_mut(&mut self) -> &mut SupportPool {
        &mut self.pool
    }

    /// Max-entropy `h` over `{G ≥ target}` returned once `G(h) ≥ target - zeta`.
    ///
    /// Every cut comes from an exact support evaluation, so the cut model contains
    /// `{G ≥ target}` and the attained entropy is at least its supremum.
    pub fn solve(&mut self, u: &[f64], target: f64, zeta: f64) -> Result<EntropySolution> {
        let n = self.pool.class().len();
        if u.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: u.len(),
            });
        }
        let mut cuts: Vec<LinearCut> = (0..self.pool.len()).map(|k| self.cut(k, u, target)).collect();
        let mut working = self.pool.active.clone();
        for _ in 0..100_000 {
            let sol = max_entropy_over_cuts(n, &cuts, &mut working, 1e-10)?;
            let (res, idx) = self.pool.evaluate(&sol.h);
            let g = res.value - dot(&sol.h, u);
            if g >= target - zeta {
                self.pool.active = working;
                let h = TestDirection::normalized(sol.h)?;
                return Ok(EntropySolution {
                    attained_entropy: entropy_slice(h.weights()),
                    certified_margin: g,
                    gap_certificate: sol.gap,
                    h,
                });
            }
            if idx == cuts.len() {
                cuts.push(self.cut(idx, u, target));
            }
            if !working.contains(&idx) {
                working.push(idx);
            }
        }
        Err(Error::NonConvergence("max-entropy cutting planes did not converge".into()))
    }

    fn cut(&self, k: usize, u: &[f64], target: f64) -> LinearCut {
        LinearCut {
            a: self.pool.piece(k).iter().zip(u).map(|(w, ui)| w - ui).collect(),
            b: target,
        }
    }
}

/// Max-entropy test in `{h : G(h) ≥ eps + tol}`, returned with `G(h) ≥ eps + tol/2`.
///
/// Fails with `Infeasible` unless `max_h G(h) > eps + tol`.
pub fn max_entropy_test(
    u: &DistanceVector,
    eps: f64,
    class: &HypothesisClass,
    tol: f64,
) -> Result<EntropySolution> {
    if !(tol > 0.0) || !(eps >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need tol > 0 and eps >= 0, got tol={tol}, eps={eps}"
        )));
    }
    let mut player = EntropyPlayer::new(class);
    let target = eps + tol;
    let bounds = player.pool_mut().max_margin(u.values(), tol * 1e-3, Some(target))?;
    if bounds.upper <= target {
        return Err(Error::Infeasible(format!(
            "max margin {} does not exceed {target}",
            bounds.upper
        )));
    }
    player.solve(u.values(), target, (tol / 2.0).min(1e-7))
}

/// `KL(q, p) - KL(q, qstar) - KL(qstar, p)`; `+inf` if any term is infinite.
pub fn pythagorean_gap(q: &TestDirection, qstar: &TestDirection, p: &TestDirection) -> f64 {
    let a = kl_slice(q.weights(), p.weights());
    let b = kl_slice(q.weights(), qstar.weights());
    let c = kl_slice(qstar.weights(), p.weights());
    if !a.is_finite() || !b.is_finite() || !c.is_finite() {
        return f64::INFINITY;
    }
    a - b - c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{margin, MarginQuery};
    use approx::assert_abs_diff_eq;

    fn corners() -> HypothesisClass {
        HypothesisClass::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn uniform_when_unconstrained() {
        let q = corners();
        let sol = max_entropy_test(&DistanceVector::zeros(2), 0.2, &q, 1e-3).unwrap();
        assert_abs_diff_eq!(sol.h.weights()[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.attained_entropy, 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn matches_one_dimensional_grid() {
        let q = corners();
        let u = DistanceVector::new(vec![0.4, 0.0]).unwrap();
        let (eps, tol) = (0.2, 1e-4);
        // G(t, 1-t) = min(t, 1-t) - 0.4 t evaluated on a grid over p' as well.
        let grid_g = |t: f64| {
            (0..=1000)
                .map(|b| {
                    let x = b as f64 / 1000.0;
                    t * (1.0 - x) + (1.0 - t) * x
                })
                .fold(f64::INFINITY, f64::min)
                - 0.4 * t
        };
        let (mut best_t, mut best_h) = (f64::NAN, f64::NEG_INFINITY);
        for a in 0..=1000 {
            let t = a as f64 / 1000.0;
            if grid_g(t) >= eps + tol {
                let h = entropy_slice(&[t, 1.0 - t]);
                if h > best_h {
                    best_h = h;
                    best_t = t;
                }
            }
        }
        let sol = max_entropy_test(&u, eps, &q, tol).unwrap();
        assert_abs_diff_eq!(sol.h.weights()[0], best_t, epsilon = 1e-2);
        assert_abs_diff_eq!(sol.attained_entropy, best_h, epsilon = 1e-2);
        assert!(sol.certified_margin >= eps + tol / 2.0);
        let g = margin(&sol.h, &MarginQuery::new(u, eps).unwrap(), &q).unwrap();
        assert!(g >= eps);
    }

    #[test]
    fn rejects_unreachable_margin() {
        let q = corners();
        let err = max_entropy_test(&DistanceVector::zeros(2), 0.6, &q, 1e-3).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn pythagorean_identities() {
        let a = TestDirection::new(vec![0.2, 0.3, 0.5]).unwrap();
        let b = TestDirection::new(vec![0.6, 0.2, 0.2]).unwrap();
        assert_abs_diff_eq!(pythagorean_gap(&a, &a, &b), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pythagorean_gap(&a, &b, &b), 0.0, epsilon = 1e-15);
        let e1 = TestDirection::vertex(3, 0).unwrap();
        assert_eq!(pythagorean_gap(&a, &e1, &b), f64::INFINITY);
    }

    #[test]
    fn projection_satisfies_pythagoras() {
        // Max-entropy over {h_1 >= 0.7} is the I-projection of uniform onto a convex set.
        let cuts = vec![LinearCut {
            a: vec![1.0, 0.0, 0.0, 0.0],
            b: 0.7,
        }];
        let mut w = Vec::new();
        let sol = max_entropy_over_cuts(4, &cuts, &mut w, 1e-12).unwrap();
        assert_abs_diff_eq!(sol.h[0], 0.7, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.h[1], 0.1, epsilon = 1e-9);
        let star = TestDirection::normalized(sol.h).unwrap();
        let uni = TestDirection::uniform(4).unwrap();
        for q in [[0.7, 0.3, 0.0, 0.0], [0.9, 0.05, 0.03, 0.02], [1.0, 0.0, 0.0, 0.0]] {
            let q = TestDirection::new(q.to_vec()).unwrap();
            assert!(pythagorean_gap(&q, &star, &uni) >= -1e-6);
        }
    }

    #[test]
    fn detects_infeasible_cut_set() {
        let cuts = vec![
            LinearCut { a: vec![1.0, 0.0], b: 0.7 },
            LinearCut { a: vec![0.0, 1.0], b: 0.7 },
        ];
        let mut w = Vec::new();
        assert!(matches!(
            max_entropy_over_cuts(2, &cuts, &mut w, 1e-12),
            Err(Error::Infeasible(_))
        ));
    }
}
