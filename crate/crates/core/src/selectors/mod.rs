//! End-to-end hypothesis selectors.
//!
//! Every selector returns a [`RunReport`]; the thin wrappers named after each
//! algorithm return only the output distribution.

mod refined;

use serde::{Deserialize, Serialize};

pub use refined::{
    refined_hypothesis_select, refined_primal_run, refined_primal_run_report, slice_count, slice_sample_size,
    tiny_error_select, tiny_error_select_report, verify_events, RefinedStep, SliceResult, SliceStatus,
    UpdateEvent,
};

use crate::entropy_player::EntropyPlayer;
use crate::error::{Error, Result};
use crate::games::dual_round_bound;
use crate::geometry::feasibility_round;
use crate::model::{Distribution, DistanceVector, HypothesisClass};
use crate::sampling::{progress_step, SampleOracle};

/// Selector names as used in configs, the CLI and CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Yatracos,
    Basic,
    Refined,
    TinyError,
    Select,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Yatracos,
        Algorithm::Basic,
        Algorithm::Refined,
        Algorithm::TinyError,
        Algorithm::Select,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Yatracos => "yatracos",
            Algorithm::Basic => "basic",
            Algorithm::Refined => "refined",
            Algorithm::TinyError => "tiny-error",
            Algorithm::Select => "select",
        }
    }

    /// Approximation factor the algorithm guarantees.
    pub fn factor(self) -> f64 {
        match self {
            Algorithm::Yatracos => 3.0,
            _ => 2.0,
        }
    }

    pub fn run(
        self,
        class: &HypothesisClass,
        oracle: &mut SampleOracle,
        eps: f64,
        delta: f64,
        params: &RefinedParams,
    ) -> Result<RunReport> {
        match self {
            Algorithm::Yatracos => yatracos_select_report(class, oracle, eps, delta),
            Algorithm::Basic => basic_select_report(class, oracle, eps, delta),
            Algorithm::Refined => refined_primal_run_report(class, oracle, eps, delta, params),
            Algorithm::TinyError => tiny_error_select_report(class, oracle, eps, delta, params),
            Algorithm::Select => select_report(class, oracle, eps, delta, params),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown algorithm `{s}`")))
    }
}

/// Constants of the refined selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinedParams {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// Per-call failure budget; derived from `(eps, delta, n)` and `d` when absent.
    pub gamma: Option<f64>,
    pub restart_cap: usize,
}

impl Default for RefinedParams {
    fn default() -> Self {
        Self {
            c0: 256.0,
            c1: 64.0,
            c2: 33.0,
            gamma: None,
            restart_cap: 100,
        }
    }
}

impl RefinedParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c2 > 32.0) {
            return Err(Error::InvalidParameter(format!("C2 = {} must exceed 32", self.c2)));
        }
        if !(self.c0 >= 4.0 * self.c2) {
            return Err(Error::InvalidParameter(format!(
                "C0 = {} must be at least 4·C2 = {}",
                self.c0,
                4.0 * self.c2
            )));
        }
        if !(self.c1 >= 8.0) {
            return Err(Error::InvalidParameter(format!("C1 = {} must be at least 8", self.c1)));
        }
        if self.restart_cap < 1 {
            return Err(Error::InvalidParameter("restart_cap must be at least 1".into()));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g < 1.0) {
                return Err(Error::InvalidParameter(format!("gamma = {g} must lie in (0,1)")));
            }
        }
        Ok(())
    }
}

/// What a selector run did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: String,
    pub samples_drawn: u64,
    pub rounds: usize,
    /// Values of `d` visited by the refined outer loop.
    pub d_schedule: Vec<f64>,
    /// Slice index of every accepted refined step.
    pub j_values: Vec<usize>,
    pub output: Distribution,
    /// Accepted refined steps, for replay checks.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub steps: Vec<RefinedStep>,
    /// Failed slices retried plus tiny-error verification restarts.
    pub restarts: usize,
}

impl RunReport {
    pub(crate) fn trivial(algorithm: Algorithm, output: Distribution) -> Self {
        Self {
            algorithm: algorithm.name().into(),
            samples_drawn: 0,
            rounds: 0,
            d_schedule: Vec::new(),
            j_values: Vec::new(),
            output,
            steps: Vec::new(),
            restarts: 0,
        }
    }
}

pub(crate) fn check_oracle(class: &HypothesisClass, oracle: &SampleOracle) -> Result<()> {
    if oracle.domain_size() != class.domain_size() {
        return Err(Error::DomainMismatch {
            expected: class.domain_size(),
            got: oracle.domain_size(),
        });
    }
    Ok(())
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::InvalidParameter(format!("{name} = {x} must lie in (0,1)")));
    }
    Ok(())
}

/// Degenerate inputs: a single hypothesis, or a tolerance no distance can exceed.
fn degenerate(class: &HypothesisClass, eps: f64) -> bool {
    class.len() == 1 || eps >= 2.0
}

/// Minimum-distance estimate over all Yatracos sets; a 3-approximation.
pub fn yatracos_select(class: &HypothesisClass, oracle: &mut SampleOracle, eps: f64, delta: f64) -> Result<Distribution> {
    Ok(yatracos_select_report(class, oracle, eps, delta)?.output)
}

pub fn yatracos_select_report(
    class: &HypothesisClass,
    oracle: &mut SampleOracle,
    eps: f64,
    delta: f64,
) -> Result<RunReport> {
    check_oracle(class, oracle)?;
    let n = class.len();
    if n == 1 {
        return Ok(RunReport::trivial(Algorithm::Yatracos, class[0].clone()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps} must be positive")));
    }
    check_unit("delta", delta)?;
    let mut sets: Vec<Vec<f64>> = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sets.push(
                    class[i]
                        .probs()
                        .iter()
                        .zip(class[j].probs())
                        .map(|(a, b)| if a >= b { 1.0 } else { 0.0 })
                        .collect(),
                );
            }
        }
    }
    // Hoeffding with a union bound over the sets at deviation eps/4.
    let m = (8.0 * (2.0 * sets.len() as f64 / delta).ln() / (eps * eps)).ceil() as u64;
    let before = oracle.samples_drawn();
    let est = oracle.estimate_expectations(&sets, m)?;
    let mut best = (f64::INFINITY, 0);
    for (i, q) in class.iter().enumerate() {
        let score = sets
            .iter()
            .zip(&est)
            .map(|(a, e)| (e - q.expect(a)).abs())
            .fold(0.0, f64::max);
        if score < best.0 {
            best = (score, i);
        }
    }
    Ok(RunReport {
        samples_drawn: oracle.samples_drawn() - before,
        rounds: 1,
        ..RunReport::trivial(Algorithm::Yatracos, class[best.1].clone())
    })
}

/// Max-entropy selector; a 2-approximation.
pub fn basic_select(class: &HypothesisClass, oracle: &mut SampleOracle, eps: f64, delta: f64) -> Result<Distribution> {
    Ok(basic_select_report(class, oracle, eps, delta)?.output)
}

/// Plays margin `3eps/4` with slack `eps/8`, so termination certifies
/// `max G <= 7eps/8` and the final rounding stays within `eps`.
pub fn basic_select_report(
    class: &HypothesisClass,
    oracle: &mut SampleOracle,
    eps: f64,
    delta: f64,
) -> Result<RunReport> {
    check_oracle(class, oracle)?;
    if degenerate(class, eps) {
        return Ok(RunReport::trivial(Algorithm::Basic, class[0].clone()));
    }
    check_unit("eps", eps)?;
    check_unit("delta", delta)?;
    let n = class.len();
    let before = oracle.samples_drawn();
    let bound = dual_round_bound(n, eps / 4.0);
    let (alpha, beta) = (eps / 2.0, delta / bound as f64);
    let slack = eps / 8.0;
    let target = 0.75 * eps + slack;
    let gap = slack * 1e-3;
    let mut player = EntropyPlayer::new(class);
    let mut u = DistanceVector::zeros(n);
    let mut rounds = 0;
    loop {
        let bounds = player.pool_mut().max_margin(u.values(), gap, Some(target))?;
        if bounds.lower <= target {
            break;
        }
        if rounds >= bound {
            return Err(Error::RoundBoundExceeded { bound });
        }
        let sol = player.solve(u.values(), target, (slack / 2.0).min(1e-7))?;
        let step = progress_step(&u, &sol.h, alpha, beta, oracle, class)?;
        u = u.join(&step.z);
        rounds += 1;
    }
    let output = feasibility_round(&u, target, class, gap)?;
    Ok(RunReport {
        samples_drawn: oracle.samples_drawn() - before,
        rounds,
        ..RunReport::trivial(Algorithm::Basic, output)
    })
}

/// Threshold `eps²/n³` separating the refined path from the tiny-error path.
pub fn tiny_error_threshold(n: usize, eps: f64) -> f64 {
    eps * eps / (n as f64).powi(3)
}

/// Dispatches on `delta` versus `eps²/n³`.
pub fn select(
    class: &HypothesisClass,
    oracle: &mut SampleOracle,
    eps: f64,
    delta: f64,
    params: &RefinedParams,
) -> Result<Distribution> {
    Ok(select_report(class, oracle, eps, delta, params)?.output)
}

pub fn select_report(
    class: &HypothesisClass,
    oracle: &mut SampleOracle,
    eps: f64,
    delta: f64,
    params: &RefinedParams,
) -> Result<RunReport> {
    check_oracle(class, oracle)?;
    if degenerate(class, eps) {
        return Ok(RunReport::trivial(Algorithm::Select, class[0].clone()));
    }
    check_unit("eps", eps)?;
    check_unit("delta", delta)?;
    let mut report = if delta >= tiny_error_threshold(class.len(), eps) {
        refined_primal_run_report(class, oracle, eps, delta, params)?
    } else {
        tiny_error_select_report(class, oracle, eps, delta, params)?
    };
    report.algorithm = format!("{}/{}", Algorithm::Select.name(), report.algorithm);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{opt_index, tv_distance};

    fn dist(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    fn corners() -> HypothesisClass {
        HypothesisClass::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(RefinedParams::default().validate().is_ok());
        let bad = RefinedParams { c2: 32.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = RefinedParams { c0: 100.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = RefinedParams { c1: 4.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = RefinedParams { restart_cap: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let parsed: RefinedParams = serde_json::from_str(r#"{"c1": 16}"#).unwrap();
        assert_eq!(parsed.c1, 16.0);
        assert_eq!(parsed.c0, 256.0);
    }

    #[test]
    fn yatracos_examples() {
        let q = corners();
        let mut o = SampleOracle::exact(q[0].clone());
        assert_eq!(yatracos_select(&q, &mut o, 0.1, 0.1).unwrap(), q[0]);
        let mut o = SampleOracle::exact(dist(&[0.9, 0.1]));
        assert_eq!(yatracos_select(&q, &mut o, 0.1, 0.1).unwrap(), q[0]);
        let single = HypothesisClass::from_rows(vec![vec![0.3, 0.7]]).unwrap();
        let mut o = SampleOracle::sampled(dist(&[0.5, 0.5]), 1);
        let r = yatracos_select_report(&single, &mut o, 0.1, 0.1).unwrap();
        assert_eq!(r.output, single[0]);
        assert_eq!(r.samples_drawn, 0);
    }

    #[test]
    fn basic_examples() {
        let q = HypothesisClass::from_rows(vec![
            vec![0.5, 0.3, 0.2],
            vec![0.1, 0.1, 0.8],
            vec![0.3, 0.4, 0.3],
        ])
        .unwrap();
        let eps = 0.1;
        let mut o = SampleOracle::exact(q[1].clone());
        let r = basic_select_report(&q, &mut o, eps, 0.1).unwrap();
        assert!(tv_distance(&r.output, &q[1]).unwrap() <= eps);
        assert!(r.rounds <= dual_round_bound(3, eps / 4.0));

        let p = dist(&[0.2, 0.5, 0.3]);
        let (_, opt) = opt_index(&p, &q).unwrap();
        let mut o = SampleOracle::exact(p.clone());
        let out = basic_select(&q, &mut o, eps, 0.1).unwrap();
        assert!(tv_distance(&out, &p).unwrap() <= 2.0 * opt + eps + 1e-6);
    }

    #[test]
    fn select_dispatch() {
        assert!(0.1 >= tiny_error_threshold(4, 0.1));
        assert!(1e-9 < tiny_error_threshold(4, 0.1));
        let q = corners();
        let mut o = SampleOracle::exact(dist(&[0.3, 0.7]));
        let r = select_report(&q, &mut o, 0.2, 0.1, &RefinedParams::default()).unwrap();
        assert_eq!(r.algorithm, "select/refined");
        let mut o = SampleOracle::exact(dist(&[0.3, 0.7]));
        let r = select_report(&q, &mut o, 0.2, 1e-9, &RefinedParams::default()).unwrap();
        assert_eq!(r.algorithm, "select/tiny-error");
        assert!(tv_distance(&r.output, &dist(&[0.3, 0.7])).unwrap() <= 0.2 + 1e-6);
    }

    #[test]
    fn algorithm_names_roundtrip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("nope".parse::<Algorithm>().is_err());
    }
}
