//! Aggregation of episode results into tier and criterion pass rates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::episode::{EpisodeResult, EpisodeStatus};
use crate::error::{Error, Result};
use crate::schema::SCHEMA_VERSION;
use crate::task::Tier;

/// Match thresholds re-applied by the sensitivity sweep.
pub const SWEEP_TAUS: [f64; 3] = [0.72, 0.80, 0.88];

/// Rates are percentages over tasks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub n_tasks: usize,
    pub pass_rate: f64,
    pub delta_bic_rate: f64,
    pub rms_rate: f64,
    pub match_rate: f64,
    pub count_rate: f64,
    pub env_done_rate: f64,
    pub mean_predicted_count: f64,
}

impl Rates {
    pub fn criterion_rates(&self) -> [f64; 4] {
        [self.delta_bic_rate, self.rms_rate, self.match_rate, self.count_rate]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: f64,
    pub pass_rate: f64,
    pub per_tier: BTreeMap<Tier, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub schema_version: u32,
    pub overall: Rates,
    pub per_tier: BTreeMap<Tier, Rates>,
    pub sweep: Vec<SweepRow>,
}

#[derive(Debug, Clone, Default)]
struct Tally {
    n: usize,
    passed: usize,
    criteria: [usize; 4],
    env_done: usize,
    predicted: usize,
    match_scores: Vec<Option<f64>>,
    passed_at: Vec<usize>,
}

impl Tally {
    fn push(&mut self, r: &EpisodeResult, taus: &[f64]) {
        self.n += 1;
        self.env_done += usize::from(r.status == EpisodeStatus::EnvDone);
        if self.passed_at.len() != taus.len() {
            self.passed_at = vec![0; taus.len()];
        }
        let Some(report) = &r.best_report else {
            self.match_scores.push(None);
            return;
        };
        self.passed += usize::from(report.passed);
        for (c, ok) in self.criteria.iter_mut().zip(report.criteria()) {
            *c += usize::from(ok);
        }
        self.predicted += report.n_guess;
        self.match_scores.push(Some(report.match_score));
        for (count, &tau) in self.passed_at.iter_mut().zip(taus) {
            *count += usize::from(report.passed_at(tau));
        }
    }

    fn rates(&self) -> Rates {
        let pct = |k: usize| 100.0 * k as f64 / self.n as f64;
        Rates {
            n_tasks: self.n,
            pass_rate: pct(self.passed),
            delta_bic_rate: pct(self.criteria[0]),
            rms_rate: pct(self.criteria[1]),
            match_rate: pct(self.criteria[2]),
            count_rate: pct(self.criteria[3]),
            env_done_rate: pct(self.env_done),
            mean_predicted_count: self.predicted as f64 / self.n as f64,
        }
    }

    fn sweep_rate(&self, i: usize) -> f64 {
        100.0 * self.passed_at.get(i).copied().unwrap_or(0) as f64 / self.n as f64
    }
}

/// Streaming aggregator: results are folded one at a time.
#[derive(Debug, Clone)]
pub struct Aggregator {
    taus: Vec<f64>,
    version: Option<u32>,
    overall: Tally,
    per_tier: BTreeMap<Tier, Tally>,
}

impl Default for Aggregator {
    fn default() -> Self {
        Self::new(&SWEEP_TAUS)
    }
}

impl Aggregator {
    pub fn new(taus: &[f64]) -> Self {
        Self {
            taus: taus.to_vec(),
            version: None,
            overall: Tally::default(),
            per_tier: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, r: &EpisodeResult) -> Result<()> {
        let mut versions = vec![r.schema_version];
        versions.extend(r.submissions.iter().filter_map(|s| s.outcome.report()).map(|rep| rep.schema_version));
        for v in versions {
            match self.version {
                None => self.version = Some(v),
                Some(seen) if seen != v => {
                    return Err(Error::Aggregation(format!(
                        "mixed schema versions {seen} and {v} (episode {})",
                        r.episode_id
                    )))
                }
                _ => {}
            }
        }
        self.overall.push(r, &self.taus);
        self.per_tier.entry(r.tier).or_default().push(r, &self.taus);
        Ok(())
    }

    pub fn finish(&self) -> Result<AggregateReport> {
        if self.overall.n == 0 {
            return Err(Error::Aggregation("no results to aggregate".into()));
        }
        let sweep = self
            .taus
            .iter()
            .enumerate()
            .map(|(i, &tau)| SweepRow {
                tau,
                pass_rate: self.overall.sweep_rate(i),
                per_tier: self.per_tier.iter().map(|(t, tally)| (*t, tally.sweep_rate(i))).collect(),
            })
            .collect();
        Ok(AggregateReport {
            schema_version: self.version.unwrap_or(SCHEMA_VERSION),
            overall: self.overall.rates(),
            per_tier: self.per_tier.iter().map(|(t, tally)| (*t, tally.rates())).collect(),
            sweep,
        })
    }

    /// Stored best-report match scores in push order (`None` when nothing was graded).
    pub fn match_scores(&self) -> &[Option<f64>] {
        &self.overall.match_scores
    }
}

pub fn aggregate<'a>(results: impl IntoIterator<Item = &'a EpisodeResult>) -> Result<AggregateReport> {
    let mut agg = Aggregator::default();
    for r in results {
        agg.push(r)?;
    }
    agg.finish()
}
