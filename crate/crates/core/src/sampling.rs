//! Sample access to a hidden target distribution and the progress step built on it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Binomial, Distribution as _};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::support_min_raw;
use crate::model::{Distribution, DistanceVector, HypothesisClass, TestDirection};

/// Whether expectation queries are answered from samples or exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMode {
    Sampled,
    Exact,
}

impl std::str::FromStr for OracleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sampled" => Ok(Self::Sampled),
            "exact" => Ok(Self::Exact),
            other => Err(Error::Parse(format!("unknown oracle mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for OracleMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sampled => "sampled",
            Self::Exact => "exact",
        })
    }
}

/// SplitMix64 finalizer over `(master, stream, salt)`; used to derive independent seeds.
pub fn derive_seed(master: u64, stream: u64, salt: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(salt.wrapping_mul(0xD1B5_4A32_D192_ED03));
    for _ in 0..2 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Oracle holding the target distribution. Selectors see it only through
/// [`SampleOracle::draw`] and [`SampleOracle::estimate_expectations`].
#[derive(Debug, Clone)]
pub struct SampleOracle {
    target: Distribution,
    seed: u64,
    mode: OracleMode,
    rng: ChaCha8Rng,
    samples_drawn: u64,
    exact_queries: u64,
}

impl SampleOracle {
    pub fn new(target: Distribution, seed: u64, mode: OracleMode) -> Self {
        Self {
            target,
            seed,
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
            samples_drawn: 0,
            exact_queries: 0,
        }
    }

    pub fn sampled(target: Distribution, seed: u64) -> Self {
        Self::new(target, seed, OracleMode::Sampled)
    }

    pub fn exact(target: Distribution) -> Self {
        Self::new(target, 0, OracleMode::Exact)
    }

    pub fn mode(&self) -> OracleMode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn domain_size(&self) -> usize {
        self.target.len()
    }

    /// Total samples consumed so far.
    pub fn samples_drawn(&self) -> u64 {
        self.samples_drawn
    }

    /// Expectation queries answered exactly (exact mode only).
    pub fn exact_queries(&self) -> u64 {
        self.exact_queries
    }

    /// `m` i.i.d. draws from the target.
    pub fn draw(&mut self, m: usize) -> Result<Vec<usize>> {
        if self.mode == OracleMode::Exact {
            return Err(Error::ExactModeMisuse);
        }
        if m == 0 {
            return Ok(Vec::new());
        }
        let index = WeightedIndex::new(self.target.probs())
            .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
        let out: Vec<usize> = (0..m).map(|_| index.sample(&mut self.rng)).collect();
        self.samples_drawn += m as u64;
        Ok(out)
    }

    /// Histogram of `m` fresh draws, sampled as a multinomial vector.
    fn draw_counts(&mut self, m: u64) -> Vec<u64> {
        let probs = self.target.probs();
        let mut counts = vec![0u64; probs.len()];
        let mut left = m;
        let mut mass = 1.0;
        for (x, p) in probs.iter().enumerate() {
            if left == 0 {
                break;
            }
            if x + 1 == probs.len() {
                counts[x] = left;
                break;
            }
            let frac = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 1.0 };
            let c = Binomial::new(left, frac)
                .expect("binomial parameters are valid")
                .sample(&mut self.rng);
            counts[x] = c;
            left -= c;
            mass -= p;
        }
        self.samples_drawn += m;
        counts
    }

    /// Empirical means of every function on one fresh batch of `m` samples,
    /// or true expectations in exact mode.
    pub fn estimate_expectations<F: AsRef<[f64]>>(&mut self, functions: &[F], m: u64) -> Result<Vec<f64>> {
        let domain = self.target.len();
        for f in functions {
            if f.as_ref().len() != domain {
                return Err(Error::DomainMismatch {
                    expected: domain,
                    got: f.as_ref().len(),
                });
            }
        }
        match self.mode {
            OracleMode::Exact => {
                self.exact_queries += 1;
                Ok(functions.iter().map(|f| self.target.expect(f.as_ref())).collect())
            }
            OracleMode::Sampled => {
                if m == 0 {
                    return Err(Error::InvalidParameter("sampled estimates need m >= 1".into()));
                }
                let counts = self.draw_counts(m);
                let scale = 1.0 / m as f64;
                Ok(functions
                    .iter()
                    .map(|f| {
                        f.as_ref()
                            .iter()
                            .zip(&counts)
                            .map(|(v, c)| v * *c as f64)
                            .sum::<f64>()
                            * scale
                    })
                    .collect())
            }
        }
    }
}

/// Output of one progress step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressOutput {
    pub z: DistanceVector,
    pub used_samples: u64,
    pub discriminators: Vec<Vec<f64>>,
}

/// Sample size `⌈8 (ln n + ln(2/β)) / α²⌉` of one progress step.
pub fn progress_sample_size(n: usize, alpha: f64, beta: f64) -> u64 {
    (8.0 * ((n as f64).ln() + (2.0 / beta).ln()) / (alpha * alpha)).ceil() as u64
}

/// A point `z` with `z <= v(p)` and `h · z >= min_{v in P} h · v - α`
/// (surely in exact mode, with probability `1 - β` otherwise).
///
/// `u` is not needed to form `z`; callers take `max(u, z)`.
pub fn progress_step(
    u: &DistanceVector,
    h: &TestDirection,
    alpha: f64,
    beta: f64,
    oracle: &mut SampleOracle,
    class: &HypothesisClass,
) -> Result<ProgressOutput> {
    if !(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha and beta must lie in (0,1), got {alpha} and {beta}"
        )));
    }
    let n = class.len();
    if u.len() != n || h.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if u.len() != n { u.len() } else { h.len() },
        });
    }
    if oracle.domain_size() != class.domain_size() {
        return Err(Error::DomainMismatch {
            expected: class.domain_size(),
            got: oracle.domain_size(),
        });
    }
    let res = support_min_raw(h.weights(), class);
    let m = match oracle.mode() {
        OracleMode::Sampled => progress_sample_size(n, alpha, beta),
        OracleMode::Exact => 0,
    };
    let before = oracle.samples_drawn();
    let est = oracle.estimate_expectations(&res.discriminators, m)?;
    let z = class
        .iter()
        .zip(&res.discriminators)
        .zip(&est)
        .map(|((q, f), e)| e - q.expect(f) - alpha / 2.0)
        .collect();
    Ok(ProgressOutput {
        z: DistanceVector::clamped(z),
        used_samples: oracle.samples_drawn() - before,
        discriminators: res.discriminators,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::distance_vector;
    use approx::assert_abs_diff_eq;

    fn dist(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn draw_examples() {
        let mut o = SampleOracle::sampled(dist(&[1.0, 0.0]), 1);
        assert_eq!(o.draw(5).unwrap(), vec![0; 5]);
        assert_eq!(o.samples_drawn(), 5);
        assert!(o.draw(0).unwrap().is_empty());
        assert_eq!(o.samples_drawn(), 5);

        let mut o = SampleOracle::sampled(dist(&[0.5, 0.5]), 7);
        let xs = o.draw(100_000).unwrap();
        let f = xs.iter().filter(|x| **x == 0).count() as f64 / 1e5;
        assert!((f - 0.5).abs() <= 0.01);

        let mut o = SampleOracle::exact(dist(&[0.5, 0.5]));
        assert!(matches!(o.draw(3), Err(Error::ExactModeMisuse)));
    }

    #[test]
    fn estimate_examples() {
        let mut o = SampleOracle::exact(dist(&[0.7, 0.3]));
        let e = o.estimate_expectations(&[vec![1.0, 0.0]], 0).unwrap();
        assert_abs_diff_eq!(e[0], 0.7, epsilon = 1e-15);
        assert_eq!(o.samples_drawn(), 0);
        assert_eq!(o.exact_queries(), 1);

        let mut o = SampleOracle::sampled(dist(&[0.7, 0.3]), 3);
        for m in [1, 10, 1000] {
            assert_eq!(o.estimate_expectations(&[vec![1.0, 1.0]], m).unwrap(), vec![1.0]);
        }
        assert_eq!(o.samples_drawn(), 1011);

        let mut hits = 0;
        for seed in 0..100 {
            let mut o = SampleOracle::sampled(dist(&[0.5, 0.5]), derive_seed(11, seed, 0));
            let e = o.estimate_expectations(&[vec![1.0, 0.0]], 400).unwrap()[0];
            if (e - 0.5).abs() <= 0.1 {
                hits += 1;
            }
        }
        assert!(hits >= 95);
    }

    #[test]
    fn batches_are_reproducible() {
        let mut a = SampleOracle::sampled(dist(&[0.2, 0.3, 0.5]), 42);
        let mut b = SampleOracle::sampled(dist(&[0.2, 0.3, 0.5]), 42);
        let f = [vec![1.0, 0.0, 0.5], vec![0.0, 1.0, 0.25]];
        assert_eq!(
            a.estimate_expectations(&f, 777).unwrap(),
            b.estimate_expectations(&f, 777).unwrap()
        );
        assert_ne!(derive_seed(1, 0, 0), derive_seed(1, 1, 0));
    }

    #[test]
    fn progress_exact_examples() {
        let q = HypothesisClass::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let p = dist(&[0.5, 0.5]);
        let h = TestDirection::uniform(2).unwrap();
        let alpha = 0.1;
        let mut o = SampleOracle::exact(p.clone());
        let out = progress_step(&DistanceVector::zeros(2), &h, alpha, 0.1, &mut o, &q).unwrap();
        assert_abs_diff_eq!(out.z.values()[0], 0.5 - alpha / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.z.values()[1], 0.5 - alpha / 2.0, epsilon = 1e-12);
        assert_eq!(out.used_samples, 0);
        let vp = distance_vector(&p, &q).unwrap();
        assert!(vp.dominates(&out.z, 1e-12));
    }

    #[test]
    fn progress_sampled_confidence() {
        let q = HypothesisClass::from_rows(vec![
            vec![0.6, 0.3, 0.1],
            vec![0.1, 0.2, 0.7],
            vec![0.3, 0.4, 0.3],
        ])
        .unwrap();
        let p = dist(&[0.25, 0.25, 0.5]);
        let vp = distance_vector(&p, &q).unwrap();
        let h = TestDirection::new(vec![0.5, 0.3, 0.2]).unwrap();
        let (alpha, beta) = (0.1, 0.1);
        let floor = support_min_raw(h.weights(), &q).value - alpha;
        let mut ok = 0;
        for seed in 0..100 {
            let mut o = SampleOracle::sampled(p.clone(), derive_seed(5, seed, 1));
            let out = progress_step(&DistanceVector::zeros(3), &h, alpha, beta, &mut o, &q).unwrap();
            assert_eq!(out.used_samples, progress_sample_size(3, alpha, beta));
            if vp.dominates(&out.z, 1e-12) && out.z.dot(&h) >= floor {
                ok += 1;
            }
        }
        assert!(ok >= 80);
    }
}
