use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{opt_index, Distribution, HypothesisClass};

/// Families of generated instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceKind {
    /// Hypotheses and target drawn from a flat Dirichlet.
    RandomDirichlet,
    /// Hypotheses close to point masses.
    AdversarialCorners,
    /// Target within TV 0.05 of a random hypothesis.
    NearRealizable,
}

impl InstanceKind {
    pub const ALL: [InstanceKind; 3] = [
        InstanceKind::RandomDirichlet,
        InstanceKind::AdversarialCorners,
        InstanceKind::NearRealizable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InstanceKind::RandomDirichlet => "random-dirichlet",
            InstanceKind::AdversarialCorners => "adversarial-corners",
            InstanceKind::NearRealizable => "near-realizable",
        }
    }
}

impl std::str::FromStr for InstanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InstanceKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown instance kind `{s}`")))
    }
}

impl std::fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn dirichlet(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Renormalizes explicitly so construction never trips the tolerance check.
fn to_dist(mut v: Vec<f64>) -> Result<Distribution> {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    Distribution::new(v)
}

/// Deterministic instance for `(seed, n, domain_size, kind)`.
pub fn generate_instance(
    seed: u64,
    n: usize,
    domain_size: usize,
    kind: InstanceKind,
) -> Result<(HypothesisClass, Distribution)> {
    if n < 1 || domain_size < 2 {
        return Err(Error::InvalidParameter(format!(
            "instances need n >= 1 and domain_size >= 2, got n={n}, domain_size={domain_size}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Distribution> = match kind {
        InstanceKind::RandomDirichlet | InstanceKind::NearRealizable => (0..n)
            .map(|_| to_dist(dirichlet(&mut rng, domain_size)))
            .collect::<Result<_>>()?,
        InstanceKind::AdversarialCorners => (0..n)
            .map(|i| {
                let eta = rng.random_range(0.0..0.1);
                let mut v: Vec<f64> = dirichlet(&mut rng, domain_size).iter().map(|x| eta * x).collect();
                v[i % domain_size] += 1.0 - eta;
                to_dist(v)
            })
            .collect::<Result<_>>()?,
    };
    let class = HypothesisClass::new(rows)?;
    let target = match kind {
        InstanceKind::NearRealizable => {
            let star = rng.random_range(0..n);
            let lambda = rng.random_range(0.0..=0.05);
            let r = to_dist(dirichlet(&mut rng, domain_size))?;
            let mixed: Vec<f64> = class[star]
                .probs()
                .iter()
                .zip(r.probs())
                .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
                .collect();
            to_dist(mixed)?
        }
        _ => to_dist(dirichlet(&mut rng, domain_size))?,
    };
    Ok((class, target))
}

/// `min_i TV(p, q_i)` by direct evaluation.
pub fn brute_force_opt(p: &Distribution, class: &HypothesisClass) -> Result<f64> {
    Ok(opt_index(p, class)?.1)
}

/// On-disk instance: a JSON object with `domain_size`, `hypotheses` and `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub domain_size: usize,
    pub hypotheses: Vec<Vec<f64>>,
    pub target: Vec<f64>,
}

fn write_row(out: &mut String, row: &[f64]) {
    out.push('[');
    for (k, v) in row.iter().enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        write!(out, "{v:.16e}").expect("writing to a string");
    }
    out.push(']');
}

impl InstanceFile {
    pub fn from_instance(class: &HypothesisClass, target: &Distribution) -> Self {
        Self {
            domain_size: class.domain_size(),
            hypotheses: class.iter().map(|q| q.probs().to_vec()).collect(),
            target: target.probs().to_vec(),
        }
    }

    /// Validated class and target.
    pub fn into_instance(self) -> Result<(HypothesisClass, Distribution)> {
        let class = HypothesisClass::from_rows(self.hypotheses)?;
        if class.domain_size() != self.domain_size {
            return Err(Error::DomainMismatch {
                expected: self.domain_size,
                got: class.domain_size(),
            });
        }
        let target = Distribution::new(self.target)?;
        class.check_domain(&target)?;
        Ok((class, target))
    }

    /// Pretty JSON with every probability written to 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = format!("{{\n  \"domain_size\": {},\n  \"hypotheses\": [\n", self.domain_size);
        for (i, row) in self.hypotheses.iter().enumerate() {
            out.push_str("    ");
            write_row(&mut out, row);
            out.push_str(if i + 1 < self.hypotheses.len() { ",\n" } else { "\n" });
        }
        out.push_str("  ],\n  \"target\": ");
        write_row(&mut out, &self.target);
        out.push_str("\n}\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("instance file: {e}")))
    }
}

pub fn write_instance(path: &Path, class: &HypothesisClass, target: &Distribution) -> Result<()> {
    std::fs::write(path, InstanceFile::from_instance(class, target).to_text())?;
    Ok(())
}

pub fn read_instance(path: &Path) -> Result<(HypothesisClass, Distribution)> {
    InstanceFile::parse(&std::fs::read_to_string(path)?)?.into_instance()
}
