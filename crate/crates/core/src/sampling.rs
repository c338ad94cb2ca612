//! Cochran sample sizes and seeded sampling without replacement.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_err, CoreError, Result};

/// Recorded in every sample so a replay can check it is using the same generator.
pub const PRNG_NAME: &str = "chacha8-rand0.8.5-partial_shuffle";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub confidence: f64,
    pub margin: f64,
    #[serde(default = "half")]
    pub proportion: f64,
    pub population: u64,
}

fn half() -> f64 {
    0.5
}

impl SampleSpec {
    pub fn new(population: u64, confidence: f64, margin: f64) -> Self {
        Self {
            confidence,
            margin,
            proportion: 0.5,
            population,
        }
    }

    /// 95% confidence, 2% margin.
    pub fn large(population: u64) -> Self {
        Self::new(population, 0.95, 0.02)
    }

    /// 95% confidence, 10% margin.
    pub fn small(population: u64) -> Self {
        Self::new(population, 0.95, 0.10)
    }

    pub fn validate(&self) -> Result<()> {
        let open = |v: f64| v > 0.0 && v < 1.0;
        if !open(self.confidence) || !open(self.margin) || !(0.0..=1.0).contains(&self.proportion) || self.population == 0 {
            return Err(CoreError::Invalid(format!("bad sample spec {self:?}")));
        }
        Ok(())
    }
}

/// Two-sided critical value. Common levels use the usual table values.
pub fn z_value(confidence: f64) -> f64 {
    const TABLE: [(f64, f64); 6] = [(0.80, 1.282), (0.85, 1.440), (0.90, 1.645), (0.95, 1.96), (0.98, 2.326), (0.99, 2.576)];
    TABLE
        .iter()
        .find(|(c, _)| (c - confidence).abs() < 1e-12)
        .map(|(_, z)| *z)
        .unwrap_or_else(|| sara_stats::special::normal_quantile(0.5 + confidence / 2.0))
}

/// n0 = z²p(1-p)/e², corrected by n0 / (1 + (n0-1)/N), rounded up and capped at N.
pub fn sample_size(spec: &SampleSpec) -> Result<u64> {
    spec.validate()?;
    let z = z_value(spec.confidence);
    let p = spec.proportion;
    let n0 = z * z * p * (1.0 - p) / (spec.margin * spec.margin);
    let n = n0 / (1.0 + (n0 - 1.0) / spec.population as f64);
    // keep float noise from pushing an exact integer up by one
    let n = (n - 1e-9).ceil().max(0.0) as u64;
    Ok(n.min(spec.population))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<SampleSpec>,
    pub seed: u64,
    pub prng: String,
    pub review_ids: Vec<String>,
}

impl Sample {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)?;
        std::fs::write(path, body + "\n").map_err(io_err(path))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&body)?)
    }
}

/// Uniform sample of `n` ids without replacement; asking for more than exist takes all.
pub fn draw_sample(ids: &[String], n: usize, seed: u64) -> Sample {
    if n > ids.len() {
        log::warn!("asked for {n} of {} ids, taking all", ids.len());
    }
    let n = n.min(ids.len());
    let mut pool = ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (picked, _) = pool.partial_shuffle(&mut rng, n);
    Sample {
        spec: None,
        seed,
        prng: PRNG_NAME.into(),
        review_ids: picked.to_vec(),
    }
}

/// Sizes the sample from `spec` (population = ids.len()) and draws it.
pub fn draw_for_spec(ids: &[String], spec: SampleSpec, seed: u64) -> Result<Sample> {
    let spec = SampleSpec {
        population: ids.len() as u64,
        ..spec
    };
    let n = sample_size(&spec)? as usize;
    Ok(Sample {
        spec: Some(spec),
        ..draw_sample(ids, n, seed)
    })
}

/// Per-purpose seed derived from the run's master seed.
pub fn derive_seed(master: u64, purpose: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(purpose.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}
