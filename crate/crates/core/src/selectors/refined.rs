//! The refined selector: dyadic slices, a shrinking margin schedule, and the
//! verification wrapper for very small failure probabilities.

use serde::{Deserialize, Serialize};

use super::{check_oracle, check_unit, degenerate, Algorithm, RefinedParams, RunReport};
use crate::entropy_player::EntropyPlayer;
use crate::error::{Error, Result};
use crate::geometry::{feasibility_round, support_min_raw};
use crate::model::{DistanceVector, HypothesisClass, TestDirection};
use crate::sampling::{OracleMode, SampleOracle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SliceStatus {
    Success,
    Fail,
}

/// Outcome of one refined hypothesis-select call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceResult {
    /// Last slice examined; the terminating one on success.
    pub j: usize,
    pub v: DistanceVector,
    pub discriminators: Vec<Vec<f64>>,
    /// `E_{q_i}[F_i]` for each discriminator.
    pub baselines: Vec<f64>,
    pub samples_used: u64,
    /// `Σ_i min(2^{-j}, v_i - u_i) h_i` at the last slice.
    pub termination_sum: f64,
    pub status: SliceStatus,
}

/// `j_max = 2 + ⌈log2(1 + 1/d)⌉`.
pub fn slice_count(d: f64) -> usize {
    2 + (1.0 + 1.0 / d).log2().ceil() as usize
}

/// `m_j = ⌈C1 · ln(L/γ) · 4^j⌉` with `L = max(ln(1/d), 1)`.
pub fn slice_sample_size(j: usize, d: f64, gamma: f64, c1: f64) -> u64 {
    let l = (1.0 / d).ln().max(1.0);
    (c1 * (l / gamma).ln() * 4f64.powi(j as i32)).ceil() as u64
}

/// Searches slices `j = 0..=j_max` for an update `v` whose truncated gain on `h` exceeds `2 d'`.
#[allow(clippy::too_many_arguments)]
pub fn refined_hypothesis_select(
    u: &DistanceVector,
    h: &TestDirection,
    d: f64,
    dprime: f64,
    gamma: f64,
    params: &RefinedParams,
    oracle: &mut SampleOracle,
    class: &HypothesisClass,
) -> Result<SliceResult> {
    check_oracle(class, oracle)?;
    let n = class.len();
    if u.len() != n || h.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if u.len() != n { u.len() } else { h.len() },
        });
    }
    if !(d > 0.0 && d <= 1.0) || !(dprime > 0.0 && dprime < d) || !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < d' < d <= 1 and gamma in (0,1), got d={d}, d'={dprime}, gamma={gamma}"
        )));
    }
    let res = support_min_raw(h.weights(), class);
    let baselines: Vec<f64> = class
        .iter()
        .zip(&res.discriminators)
        .map(|(q, f)| q.expect(f))
        .collect();
    let j_max = slice_count(d);
    let before = oracle.samples_drawn();
    let mut last = (0, u.clone(), 0.0);
    for j in 0..=j_max {
        let m = match oracle.mode() {
            OracleMode::Sampled => slice_sample_size(j, d, gamma, params.c1),
            OracleMode::Exact => 0,
        };
        let est = oracle.estimate_expectations(&res.discriminators, m)?;
        let width = 0.5f64.powi(j as i32);
        let v: Vec<f64> = u
            .values()
            .iter()
            .zip(est.iter().zip(&baselines))
            .map(|(ui, (e, b))| ui.max(e - b - width / 2.0).min(1.0))
            .collect();
        let sum: f64 = v
            .iter()
            .zip(u.values())
            .zip(h.weights())
            .map(|((vi, ui), hi)| width.min(vi - ui) * hi)
            .sum();
        let v = DistanceVector::clamped(v);
        if sum > 2.0 * dprime {
            return Ok(SliceResult {
                j,
                v,
                discriminators: res.discriminators,
                baselines,
                samples_used: oracle.samples_drawn() - before,
                termination_sum: sum,
                status: SliceStatus::Success,
            });
        }
        last = (j, v, sum);
    }
    Ok(SliceResult {
        j: last.0,
        v: last.1,
        discriminators: res.discriminators,
        baselines,
        samples_used: oracle.samples_drawn() - before,
        termination_sum: last.2,
        status: SliceStatus::Fail,
    })
}

/// One accepted step of the refined primal game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedStep {
    pub d: f64,
    pub dprime: f64,
    pub j: usize,
    pub h: Vec<f64>,
    pub u_before: Vec<f64>,
    pub u_after: Vec<f64>,
}

impl RefinedStep {
    /// `Σ_i min(2^{-j}, u_after_i - u_before_i) h_i`, recomputed from the record.
    pub fn gain(&self) -> f64 {
        let width = 0.5f64.powi(self.j as i32);
        self.u_after
            .iter()
            .zip(&self.u_before)
            .zip(&self.h)
            .map(|((a, b), h)| width.min(a - b) * h)
            .sum()
    }
}

/// A coordinate raised by an accepted step, kept for re-verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateEvent {
    pub j: usize,
    pub i: usize,
    pub v: f64,
    pub discriminator: Vec<f64>,
    pub baseline: f64,
}

/// Per-`d` failure budget `min(d³, δ ε² / (64 ln n ln(2/ε)))` unless fixed by the parameters.
fn gamma_for(params: &RefinedParams, d: f64, n: usize, eps: f64, delta: f64) -> f64 {
    if let Some(g) = params.gamma {
        return g;
    }
    let base = delta * eps * eps / (64.0 * (n as f64).ln() * (2.0 / eps).ln());
    d.powi(3).min(base).min(0.5)
}

struct RefinedRun {
    report: RunReport,
    events: Vec<UpdateEvent>,
}

fn run_refined(
    class: &HypothesisClass,
    oracle: &mut SampleOracle,
    eps: f64,
    delta: f64,
    params: &RefinedParams,
    keep_events: bool,
) -> Result<RefinedRun> {
    params.validate()?;
    let n = class.len();
    let before = oracle.samples_drawn();
    let mut player = EntropyPlayer::new(class);
    let mut u = DistanceVector::zeros(n);
    let mut report = RunReport::trivial(Algorithm::Refined, class[0].clone());
    let mut events = Vec::new();
    // An upper bound on max G at the current u, valid until u changes.
    let mut known_max: Option<f64> = Some(1.0);
    let mut d = 1.0;
    let mut final_margin = 1.0;
    while d > eps / 2.0 {
        let dprime = d / (params.c0 * (1.0 + 1.0 / d).ln());
        let tau = dprime / 4.0;
        let target = d - dprime + tau;
        let gap = tau * 1e-3;
        let gamma = gamma_for(params, d, n, eps, delta);
        let cap = (16.0 * (n as f64).ln().max(1.0) / (dprime * dprime)).ceil() as usize;
        report.d_schedule.push(d);
        let mut steps_here = 0;
        loop {
            if known_max.is_some_and(|m| m <= target) {
                break;
            }
            let bounds = player.pool_mut().max_margin(u.values(), gap, Some(target))?;
            if bounds.lower <= target {
                known_max = Some(bounds.upper.max(bounds.lower));
                break;
            }
            steps_here += 1;
            if steps_here > cap {
                return Err(Error::NonConvergence(format!(
                    "refined inner loop exceeded {cap} steps at d = {d}"
                )));
            }
            let sol = player.solve(u.values(), target, (tau / 2.0).min(1e-7))?;
            let mut fails = 0;
            let slice = loop {
                let s = refined_hypothesis_select(&u, &sol.h, d, dprime, gamma, params, oracle, class)?;
                if s.status == SliceStatus::Success {
                    break s;
                }
                fails += 1;
                report.restarts += 1;
                if fails >= params.restart_cap {
                    return Err(Error::RestartCapExceeded { cap: params.restart_cap });
                }
            };
            if keep_events {
                for i in 0..n {
                    if slice.v.values()[i] > u.values()[i] {
                        events.push(UpdateEvent {
                            j: slice.j,
                            i,
                            v: slice.v.values()[i],
                            discriminator: slice.discriminators[i].clone(),
                            baseline: slice.baselines[i],
                        });
                    }
                }
            }
            let step = RefinedStep {
                d,
                dprime,
                j: slice.j,
                h: sol.h.weights().to_vec(),
                u_before: u.values().to_vec(),
                u_after: slice.v.values().to_vec(),
            };
            debug_assert!(step.gain() > 2.0 * dprime);
            report.j_values.push(slice.j);
            report.steps.push(step);
            report.rounds += 1;
            u = slice.v;
            known_max = None;
        }
        final_margin = target + gap;
        d -= dprime;
    }
    report.output = feasibility_round(&u, final_margin, class, 1e-9)?;
    report.samples_drawn = oracle.samples_drawn() - before;
    Ok(RefinedRun { report, events })
}

/// Refined primal game ending at margin `d <= eps/2`.
pub fn refined_primal_run(
    class: &HypothesisClass,
    oracle: &mut SampleOracle,
    eps: f64,
    delta: f64,
    params: &RefinedParams,
) -> Result<crate::model::Distribution> {
    Ok(refined_primal_run_report(class, oracle, eps, delta, params)?.output)
}

pub fn refined_primal_run_report(
    class: &HypothesisClass,
    oracle: &mut SampleOracle,
    eps: f64,
    delta: f64,
    params: &RefinedParams,
) -> Result<RunReport> {
    check_oracle(class, oracle)?;
    if degenerate(class, eps) {
        return Ok(RunReport::trivial(Algorithm::Refined, class[0].clone()));
    }
    check_unit("eps", eps)?;
    check_unit("delta", delta)?;
    Ok(run_refined(class, oracle, eps, delta, params, false)?.report)
}

/// Re-estimates every event on one fresh batch and checks
/// `Ê[F_i] - E_{q_i}[F_i] > v + 2^{-j-3}` for all of them.
pub fn verify_events(events: &[UpdateEvent], oracle: &mut SampleOracle, eps: f64, delta: f64) -> Result<bool> {
    if events.is_empty() {
        return Ok(true);
    }
    let e = events.len() as f64;
    let m = (64.0 * ((1.0 / delta).ln() + e.ln().max(0.0)) / (eps * eps)).ceil() as u64;
    let fs: Vec<&[f64]> = events.iter().map(|ev| ev.discriminator.as_slice()).collect();
    let est = oracle.estimate_expectations(&fs, m.max(1))?;
    Ok(events
        .iter()
        .zip(&est)
        .all(|(ev, x)| x - ev.baseline > ev.v + 0.5f64.powi(ev.j as i32 + 3)))
}

/// Refined run at `δ' = eps²/n³` repeated until its updates survive verification.
pub fn tiny_error_select(
    class: &HypothesisClass,
    oracle: &mut SampleOracle,
    eps: f64,
    delta: f64,
    params: &RefinedParams,
) -> Result<crate::model::Distribution> {
    Ok(tiny_error_select_report(class, oracle, eps, delta, params)?.output)
}

pub fn tiny_error_select_report(
    class: &HypothesisClass,
    oracle: &mut SampleOracle,
    eps: f64,
    delta: f64,
    params: &RefinedParams,
) -> Result<RunReport> {
    check_oracle(class, oracle)?;
    if degenerate(class, eps) {
        return Ok(RunReport::trivial(Algorithm::TinyError, class[0].clone()));
    }
    check_unit("eps", eps)?;
    check_unit("delta", delta)?;
    params.validate()?;
    let n = class.len();
    let inner_delta = super::tiny_error_threshold(n, eps).min(0.5);
    let before = oracle.samples_drawn();
    for restarts in 0..params.restart_cap {
        let run = run_refined(class, oracle, eps, inner_delta, params, true)?;
        if verify_events(&run.events, oracle, eps, delta)? {
            let mut report = run.report;
            report.algorithm = Algorithm::TinyError.name().into();
            report.samples_drawn = oracle.samples_drawn() - before;
            report.restarts += restarts;
            return Ok(report);
        }
    }
    Err(Error::RestartCapExceeded { cap: params.restart_cap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{distance_vector, l1, opt_index, tv_distance, Distribution};

    fn class3() -> HypothesisClass {
        HypothesisClass::from_rows(vec![
            vec![0.6, 0.2, 0.1, 0.1],
            vec![0.1, 0.6, 0.2, 0.1],
            vec![0.1, 0.1, 0.2, 0.6],
        ])
        .unwrap()
    }

    #[test]
    fn formula_examples() {
        assert_eq!(slice_count(0.25), 5);
        assert_eq!(slice_sample_size(0, 0.25, 0.01, 64.0), 316);
        assert_eq!(slice_sample_size(1, 0.25, 0.01, 64.0), (64.0 * (4f64.ln() / 0.01).ln() * 4.0f64).ceil() as u64);
    }

    #[test]
    fn exact_slice_terminates() {
        let q = class3();
        let p = Distribution::new(vec![0.3, 0.3, 0.2, 0.2]).unwrap();
        let h = TestDirection::uniform(3).unwrap();
        let u = DistanceVector::zeros(3);
        let g = support_min_raw(h.weights(), &q).value;
        let d: f64 = 0.3;
        let dprime = d / (256.0 * (1.0 + 1.0 / d).ln());
        assert!(g > d - dprime);
        let mut o = SampleOracle::exact(p.clone());
        let s = refined_hypothesis_select(&u, &h, d, dprime, 0.01, &RefinedParams::default(), &mut o, &q).unwrap();
        assert_eq!(s.status, SliceStatus::Success);
        assert!(s.j <= slice_count(d));
        assert!(s.v.dominates(&u, 0.0));
        assert!(distance_vector(&p, &q).unwrap().dominates(&s.v, 1e-12));
        assert!(s.termination_sum > 2.0 * dprime);
    }

    #[test]
    fn slice_sample_accounting() {
        let q = class3();
        let p = Distribution::new(vec![0.3, 0.3, 0.2, 0.2]).unwrap();
        let h = TestDirection::uniform(3).unwrap();
        let (d, gamma): (f64, f64) = (0.3, 0.01);
        let dprime = d / (256.0 * (1.0 + 1.0 / d).ln());
        let mut o = SampleOracle::sampled(p, 9);
        let s = refined_hypothesis_select(&DistanceVector::zeros(3), &h, d, dprime, gamma, &RefinedParams::default(), &mut o, &q)
            .unwrap();
        let expect: u64 = (0..=s.j).map(|j| slice_sample_size(j, d, gamma, 64.0)).sum();
        assert_eq!(s.samples_used, expect);
        assert_eq!(o.samples_drawn(), expect);
    }

    #[test]
    fn refined_exact_guarantee_and_replay() {
        let q = class3();
        let p = Distribution::new(vec![0.25, 0.25, 0.3, 0.2]).unwrap();
        let (_, opt) = opt_index(&p, &q).unwrap();
        let eps = 0.2;
        let mut o = SampleOracle::exact(p.clone());
        let r = refined_primal_run_report(&q, &mut o, eps, 0.1, &RefinedParams::default()).unwrap();
        assert!(tv_distance(&r.output, &p).unwrap() <= 2.0 * opt + eps + 1e-6);
        assert!((r.d_schedule.len() as f64) <= 4.0 * 256.0 * (2.0f64 / eps).ln().powi(2));
        for s in &r.steps {
            assert!(s.gain() > 2.0 * s.dprime);
        }
        for w in r.steps.windows(2) {
            if w[0].d == w[1].d {
                assert!(l1(&w[0].h, &w[1].h) > w[0].dprime * 2f64.powi(w[0].j as i32) - 1e-3);
            }
        }
    }

    #[test]
    fn tiny_error_exact_and_fault_injection() {
        let q = class3();
        let p = Distribution::new(vec![0.25, 0.25, 0.3, 0.2]).unwrap();
        let (_, opt) = opt_index(&p, &q).unwrap();
        let eps = 0.2;
        let mut o = SampleOracle::exact(p.clone());
        let r = tiny_error_select_report(&q, &mut o, eps, 1e-9, &RefinedParams::default()).unwrap();
        assert_eq!(r.restarts, 0);
        assert!(tv_distance(&r.output, &p).unwrap() <= 2.0 * opt + eps + 1e-6);

        // An event claiming more than the true gap by over 2^{-j-2} must fail verification.
        let f = vec![1.0, 0.0, 0.0, 0.0];
        let truth = p.expect(&f) - q[1].expect(&f);
        let j = 2;
        let bad = UpdateEvent {
            j,
            i: 1,
            v: truth + 1e-3,
            discriminator: f.clone(),
            baseline: q[1].expect(&f),
        };
        let mut o = SampleOracle::exact(p.clone());
        assert!(!verify_events(&[bad], &mut o, eps, 1e-9).unwrap());
        let baseline = q[1].expect(&f);
        let good = UpdateEvent {
            j,
            i: 1,
            v: truth - 0.5f64.powi(j as i32 + 1),
            discriminator: f,
            baseline,
        };
        assert!(verify_events(&[good], &mut o, eps, 1e-9).unwrap());
    }
}
