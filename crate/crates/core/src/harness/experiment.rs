use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::instance::{brute_force_opt, generate_instance, InstanceKind};
use crate::error::{Error, Result};
use crate::model::tv_distance;
use crate::sampling::{derive_seed, OracleMode, SampleOracle};
use crate::selectors::{Algorithm, RefinedParams};

/// One experiment grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub n: usize,
    pub domain_size: usize,
    pub eps: f64,
    pub delta: f64,
    pub algorithms: Vec<Algorithm>,
    pub trials: usize,
    pub instance_kind: InstanceKind,
    #[serde(default)]
    pub params: RefinedParams,
    pub oracle_mode: OracleMode,
    /// Number of distinct instances cycled through by the trials; one per trial when absent.
    #[serde(default)]
    pub instances: Option<usize>,
    /// Record wall time; when off, `wall_time_ms` is written as 0 so runs are byte-reproducible.
    #[serde(default = "default_true")]
    pub record_timing: bool,
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) || !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eps and delta must lie in (0,1), got {} and {}",
                self.eps, self.delta
            )));
        }
        if self.n < 1 || self.domain_size < 2 {
            return Err(Error::InvalidParameter("need n >= 1 and domain_size >= 2".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidParameter("no algorithms requested".into()));
        }
        if self.instances == Some(0) {
            return Err(Error::InvalidParameter("instances must be at least 1".into()));
        }
        self.params.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn instance_index(&self, trial: usize) -> usize {
        match self.instances {
            Some(k) => trial % k,
            None => trial,
        }
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub algorithm: String,
    pub n: usize,
    pub domain_size: usize,
    pub eps: f64,
    pub delta: f64,
    pub samples_used: u64,
    pub rounds: usize,
    pub tv_out: f64,
    pub opt: f64,
    pub guarantee_ok: bool,
    pub status: String,
    pub wall_time_ms: f64,
}

pub const CSV_HEADER: &str =
    "trial,algorithm,n,domain_size,eps,delta,samples_used,rounds,tv_out,opt,guarantee_ok,status,wall_time_ms";

/// How trials are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is enabled, sequential otherwise.
    Parallel,
}

/// Runs one (trial, algorithm) pair; errors are recorded in `status`.
pub fn run_trial(config: &ExperimentConfig, trial: usize, algorithm: Algorithm) -> TrialRecord {
    let mut record = TrialRecord {
        trial,
        algorithm: algorithm.name().into(),
        n: config.n,
        domain_size: config.domain_size,
        eps: config.eps,
        delta: config.delta,
        samples_used: 0,
        rounds: 0,
        tv_out: f64::NAN,
        opt: f64::NAN,
        guarantee_ok: false,
        status: String::new(),
        wall_time_ms: 0.0,
    };
    let instance_seed = derive_seed(config.master_seed, config.instance_index(trial) as u64, 0);
    let (class, target) = match generate_instance(instance_seed, config.n, config.domain_size, config.instance_kind) {
        Ok(x) => x,
        Err(e) => {
            record.status = format!("error: {e}");
            return record;
        }
    };
    record.opt = brute_force_opt(&target, &class).unwrap_or(f64::NAN);
    let oracle_seed = derive_seed(config.master_seed, trial as u64, 1);
    let mut oracle = SampleOracle::new(target.clone(), oracle_seed, config.oracle_mode);
    let start = Instant::now();
    let outcome = algorithm.run(&class, &mut oracle, config.eps, config.delta, &config.params);
    if config.record_timing {
        record.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    }
    record.samples_used = oracle.samples_drawn();
    match outcome {
        Ok(report) => {
            record.rounds = report.rounds;
            record.tv_out = tv_distance(&report.output, &target).unwrap_or(f64::NAN);
            record.guarantee_ok = record.tv_out <= algorithm.factor() * record.opt + config.eps + 1e-6;
            record.status = "ok".into();
        }
        Err(e) => record.status = format!("error: {e}"),
    }
    record
}

/// All trials of the config, ordered by trial then algorithm.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    run_experiment_with(config, Execution::Parallel)
}

pub fn run_experiment_with(config: &ExperimentConfig, execution: Execution) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let jobs: Vec<(usize, Algorithm)> = (0..config.trials)
        .flat_map(|t| config.algorithms.iter().map(move |a| (t, *a)))
        .collect();
    Ok(match execution {
        Execution::Sequential => jobs.iter().map(|(t, a)| run_trial(config, *t, *a)).collect(),
        Execution::Parallel => run_parallel(config, &jobs),
    })
}

#[cfg(feature = "parallel")]
fn run_parallel(config: &ExperimentConfig, jobs: &[(usize, Algorithm)]) -> Vec<TrialRecord> {
    use rayon::prelude::*;
    jobs.par_iter().map(|(t, a)| run_trial(config, *t, *a)).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_parallel(config: &ExperimentConfig, jobs: &[(usize, Algorithm)]) -> Vec<TrialRecord> {
    jobs.iter().map(|(t, a)| run_trial(config, *t, *a)).collect()
}

pub fn write_csv<W: Write>(records: &[TrialRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(','))
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    for r in records {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(records: &[TrialRecord], path: &Path) -> Result<()> {
    write_csv(records, std::fs::File::create(path)?)
}

pub fn read_csv(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Parse(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            master_seed: 17,
            n: 3,
            domain_size: 4,
            eps: 0.2,
            delta: 0.1,
            algorithms: vec![Algorithm::Yatracos, Algorithm::Basic],
            trials: 3,
            instance_kind: InstanceKind::RandomDirichlet,
            params: RefinedParams::default(),
            oracle_mode: OracleMode::Exact,
            instances: None,
            record_timing: false,
        }
    }

    #[test]
    fn exact_runs_pass_and_are_reproducible() {
        let cfg = config();
        let a = run_experiment(&cfg).unwrap();
        assert_eq!(a.len(), 6);
        assert!(a.iter().all(|r| r.guarantee_ok && r.status == "ok"));
        let b = run_experiment_with(&cfg, Execution::Sequential).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_csv(&a, &mut x).unwrap();
        write_csv(&b, &mut y).unwrap();
        assert_eq!(x, y);
        let text = String::from_utf8(x).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    }

    #[test]
    fn csv_roundtrip_and_header_when_empty() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), CSV_HEADER);
        let cfg = ExperimentConfig {
            oracle_mode: OracleMode::Sampled,
            ..config()
        };
        let recs = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_csv_file(&recs, &path).unwrap();
        assert_eq!(read_csv(&path).unwrap(), recs);
        assert!(recs.iter().all(|r| r.samples_used > 0));
    }

    #[test]
    fn config_json() {
        let text = r#"{"master_seed": 1, "n": 4, "domain_size": 8, "eps": 0.1, "delta": 0.1,
            "algorithms": ["basic", "select"], "trials": 2, "instance_kind": "near-realizable",
            "oracle_mode": "exact", "params": {"c1": 32}}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.algorithms, vec![Algorithm::Basic, Algorithm::Select]);
        assert!(cfg.record_timing);
        assert_eq!(cfg.params.c1, 32.0);
        assert!(ExperimentConfig::from_json(&text.replace("\"trials\": 2", "\"trials\": 0")).is_err());
    }
}
