//! Tier-balanced suites forged from consecutive seeds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::schema::SCHEMA_VERSION;
use crate::task::{generate_task_with, GeneratorConfig, TaskBundle, Tier};

/// Seeds examined per batch; batches may be generated in parallel.
pub const SEED_BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierCounts {
    pub easy: usize,
    pub medium: usize,
    pub hard: usize,
}

impl Default for TierCounts {
    fn default() -> Self {
        Self {
            easy: 20,
            medium: 40,
            hard: 40,
        }
    }
}

impl TierCounts {
    pub fn get(&self, tier: Tier) -> usize {
        match tier {
            Tier::Easy => self.easy,
            Tier::Medium => self.medium,
            Tier::Hard => self.hard,
        }
    }

    pub fn total(&self) -> usize {
        self.easy + self.medium + self.hard
    }
}

impl std::str::FromStr for TierCounts {
    type Err = Error;

    /// Parses `easy,medium,hard`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidArgument(format!("bad counts `{s}`: {e}")))?;
        match parts[..] {
            [easy, medium, hard] => Ok(Self { easy, medium, hard }),
            _ => Err(Error::InvalidArgument(format!("counts need three values, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub schema_version: u32,
    pub suite_id: String,
    pub seed_base: u64,
    pub counts: TierCounts,
    pub seeds: BTreeMap<Tier, Vec<u64>>,
    pub task_ids: BTreeMap<Tier, Vec<String>>,
    pub generator_config_hash: String,
    pub seeds_scanned: u64,
}

impl SuiteManifest {
    pub fn validate(&self) -> Result<()> {
        for tier in Tier::ALL {
            let want = self.counts.get(tier);
            if want == 0 {
                return Err(Error::InvalidArgument(format!("{tier} count must be at least 1")));
            }
            let got = self.seeds.get(&tier).map_or(0, Vec::len);
            if got != want {
                return Err(Error::InvalidArgument(format!("{tier}: {got} seeds for count {want}")));
            }
        }
        let mut all: Vec<u64> = self.seeds.values().flatten().copied().collect();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("duplicate seed in suite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suite {
    pub manifest: SuiteManifest,
    pub tasks: Vec<TaskBundle>,
}

/// SHA-256 digest (hex) of the generator configuration's JSON form.
pub fn config_hash(cfg: &GeneratorConfig) -> String {
    let json = serde_json::to_vec(cfg).expect("config serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn forge_suite(seed_base: u64, counts: TierCounts, cfg: &GeneratorConfig) -> Result<Suite> {
    forge_suite_with(seed_base, counts, cfg, u64::MAX, |seeds| {
        seeds.iter().map(|&s| generate_task_with(s, cfg)).collect()
    })
}

/// Scans seeds upward from `seed_base`, filling each tier in seed order.
///
/// `generate` maps a batch of seeds to their tasks (in order) and may run in
/// parallel; the result does not depend on how it schedules work. Seeds whose
/// generator gives up are skipped.
pub fn forge_suite_with<F>(
    seed_base: u64,
    counts: TierCounts,
    cfg: &GeneratorConfig,
    max_seeds: u64,
    generate: F,
) -> Result<Suite>
where
    F: Fn(&[u64]) -> Vec<Result<TaskBundle>>,
{
    for tier in Tier::ALL {
        if counts.get(tier) == 0 {
            return Err(Error::InvalidArgument(format!("{tier} count must be at least 1")));
        }
    }
    let mut buckets: BTreeMap<Tier, Vec<TaskBundle>> = Tier::ALL.iter().map(|&t| (t, Vec::new())).collect();
    let full = |b: &BTreeMap<Tier, Vec<TaskBundle>>| Tier::ALL.iter().all(|&t| b[&t].len() >= counts.get(t));
    let mut next = seed_base;
    let mut scanned = 0u64;
    while !full(&buckets) {
        if scanned >= max_seeds {
            return Err(Error::InvalidArgument(format!(
                "suite not filled after {scanned} seeds from {seed_base}"
            )));
        }
        let n = (SEED_BATCH as u64).min(max_seeds - scanned);
        let seeds: Vec<u64> = (0..n).map(|i| next.wrapping_add(i)).collect();
        let tasks = generate(&seeds);
        for task in tasks {
            scanned += 1;
            let task = match task {
                Ok(t) => t,
                Err(Error::GenerationExhausted { .. }) => continue,
                Err(e) => return Err(e),
            };
            let bucket = buckets.get_mut(&task.tier).expect("all tiers present");
            if bucket.len() < counts.get(task.tier) {
                bucket.push(task);
            }
            if full(&buckets) {
                break;
            }
        }
        next = next.wrapping_add(n);
    }

    let hash = config_hash(cfg);
    let mut seeds = BTreeMap::new();
    let mut task_ids = BTreeMap::new();
    let mut tasks = Vec::with_capacity(counts.total());
    for (tier, bucket) in buckets {
        let mut ids = Vec::new();
        let mut tier_seeds = Vec::new();
        for (idx, mut task) in bucket.into_iter().enumerate() {
            task.task_id = format!("{tier}_{idx:03}");
            ids.push(task.task_id.clone());
            tier_seeds.push(task.seed.expect("generated tasks carry their seed"));
            tasks.push(task);
        }
        seeds.insert(tier, tier_seeds);
        task_ids.insert(tier, ids);
    }
    let manifest = SuiteManifest {
        schema_version: SCHEMA_VERSION,
        suite_id: format!("suite_{seed_base}_{}", &hash[..8]),
        seed_base,
        counts,
        seeds,
        task_ids,
        generator_config_hash: hash,
        seeds_scanned: scanned,
    };
    manifest.validate()?;
    Ok(Suite { manifest, tasks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_parse() {
        assert_eq!("20,40,40".parse::<TierCounts>().unwrap(), TierCounts::default());
        assert!("1,2".parse::<TierCounts>().is_err());
        assert!("a,2,3".parse::<TierCounts>().is_err());
    }

    #[test]
    fn small_suite_is_filled_in_seed_order() {
        let counts = TierCounts { easy: 2, medium: 2, hard: 2 };
        let cfg = GeneratorConfig::default();
        let suite = forge_suite(1000, counts, &cfg).unwrap();
        assert_eq!(suite.tasks.len(), 6);
        for tier in Tier::ALL {
            let s = &suite.manifest.seeds[&tier];
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(suite.manifest.task_ids[&tier], vec![format!("{tier}_000"), format!("{tier}_001")]);
        }
        for t in &suite.tasks {
            assert!(t.task_id.starts_with(t.tier.as_str()));
        }
        // identical regardless of batching strategy
        let again = forge_suite_with(1000, counts, &cfg, u64::MAX, |seeds| {
            seeds.iter().rev().map(|&s| generate_task_with(s, &cfg)).rev().collect()
        })
        .unwrap();
        assert_eq!(again, suite);
    }

    #[test]
    fn zero_count_and_seed_limit() {
        let cfg = GeneratorConfig::default();
        let zero = TierCounts { easy: 0, medium: 1, hard: 1 };
        assert!(forge_suite(0, zero, &cfg).is_err());
        let r = forge_suite_with(0, TierCounts { easy: 50, medium: 1, hard: 1 }, &cfg, 3, |s| {
            s.iter().map(|&x| generate_task_with(x, &cfg)).collect()
        });
        assert!(r.is_err());
    }

    #[test]
    fn config_hash_tracks_config() {
        let a = GeneratorConfig::default();
        let mut b = a;
        b.gp_probability = 0.5;
        assert_eq!(config_hash(&a), config_hash(&a));
        assert_ne!(config_hash(&a), config_hash(&b));
    }
}
