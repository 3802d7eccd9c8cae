use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::experiment::{ExperimentConfig, TrialRecord};
use crate::sampling::OracleMode;

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Per-algorithm aggregates of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub trials: usize,
    pub errors: usize,
    pub guarantee_failures: usize,
    pub mean_samples: f64,
    pub max_samples: u64,
    pub mean_rounds: f64,
    pub mean_tv_out: f64,
    pub mean_opt: f64,
    pub mean_wall_time_ms: f64,
}

/// Structured report written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub algorithms: Vec<AlgorithmSummary>,
    pub checks: Vec<CheckOutcome>,
    pub all_passed: bool,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, k) = xs.fold((0.0, 0usize), |(s, k), x| (s + x, k + 1));
    if k == 0 {
        f64::NAN
    } else {
        s / k as f64
    }
}

pub fn summarize_records(records: &[TrialRecord]) -> Vec<AlgorithmSummary> {
    let mut groups: BTreeMap<&str, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.algorithm.as_str()).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(name, rs)| {
            let ok: Vec<&&TrialRecord> = rs.iter().filter(|r| r.status == "ok").collect();
            AlgorithmSummary {
                algorithm: name.to_string(),
                trials: rs.len(),
                errors: rs.len() - ok.len(),
                guarantee_failures: rs.iter().filter(|r| !r.guarantee_ok).count(),
                mean_samples: mean(rs.iter().map(|r| r.samples_used as f64)),
                max_samples: rs.iter().map(|r| r.samples_used).max().unwrap_or(0),
                mean_rounds: mean(rs.iter().map(|r| r.rounds as f64)),
                mean_tv_out: mean(ok.iter().map(|r| r.tv_out)),
                mean_opt: mean(rs.iter().map(|r| r.opt)),
                mean_wall_time_ms: mean(rs.iter().map(|r| r.wall_time_ms)),
            }
        })
        .collect()
}

/// Guarantee checks for an experiment.
///
/// With an exact oracle every trial must meet its guarantee. With samples the
/// failure fraction may reach `2·delta`, leaving room for binomial noise over a
/// modest number of trials.
pub fn guarantee_checks(config: &ExperimentConfig, records: &[TrialRecord]) -> Vec<CheckOutcome> {
    let allowed = match config.oracle_mode {
        OracleMode::Exact => 0.0,
        OracleMode::Sampled => 2.0 * config.delta,
    };
    summarize_records(records)
        .into_iter()
        .map(|s| {
            let frac = s.guarantee_failures as f64 / s.trials.max(1) as f64;
            CheckOutcome::new(
                format!("guarantee/{}", s.algorithm),
                s.errors == 0 && frac <= allowed,
                format!(
                    "{} of {} trials missed the bound, {} errors (allowed fraction {allowed})",
                    s.guarantee_failures, s.trials, s.errors
                ),
            )
        })
        .collect()
}

pub fn run_summary(config: &ExperimentConfig, records: &[TrialRecord]) -> RunSummary {
    let checks = guarantee_checks(config, records);
    RunSummary {
        config: config.clone(),
        algorithms: summarize_records(records),
        all_passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_experiment, InstanceKind};
    use crate::selectors::{Algorithm, RefinedParams};

    #[test]
    fn summary_of_exact_run() {
        let cfg = ExperimentConfig {
            master_seed: 3,
            n: 4,
            domain_size: 5,
            eps: 0.25,
            delta: 0.1,
            algorithms: vec![Algorithm::Basic, Algorithm::Yatracos],
            trials: 2,
            instance_kind: InstanceKind::AdversarialCorners,
            params: RefinedParams::default(),
            oracle_mode: OracleMode::Exact,
            instances: Some(1),
            record_timing: false,
        };
        let recs = run_experiment(&cfg).unwrap();
        let summary = run_summary(&cfg, &recs);
        assert!(summary.all_passed, "{:?}", summary.checks);
        assert_eq!(summary.algorithms.len(), 2);
        assert_eq!(summary.algorithms[0].algorithm, "basic");
        assert_eq!(summary.algorithms[0].guarantee_failures, 0);
        let json = serde_json::to_string(&summary).unwrap();
        let back: RunSummary = serde_json::from_str(&json).unwrap();
        assert_eq!(back.checks, summary.checks);
    }

    #[test]
    fn failing_record_fails_check() {
        let cfg_text = r#"{"master_seed": 0, "n": 2, "domain_size": 2, "eps": 0.1, "delta": 0.1,
            "algorithms": ["basic"], "trials": 1, "instance_kind": "random-dirichlet", "oracle_mode": "exact"}"#;
        let cfg = ExperimentConfig::from_json(cfg_text).unwrap();
        let rec = TrialRecord {
            trial: 0,
            algorithm: "basic".into(),
            n: 2,
            domain_size: 2,
            eps: 0.1,
            delta: 0.1,
            samples_used: 0,
            rounds: 1,
            tv_out: 0.9,
            opt: 0.1,
            guarantee_ok: false,
            status: "ok".into(),
            wall_time_ms: 0.0,
        };
        let checks = guarantee_checks(&cfg, &[rec]);
        assert!(!checks[0].passed);
        assert!(checks[0].line().starts_with("FAIL guarantee/basic"));
    }
}
