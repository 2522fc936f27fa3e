//! Grading of submitted planetary systems against ground truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orbit::{self, Keplerian, PlanetElements};
use crate::schema::SCHEMA_VERSION;
use crate::stats::{linspace, median, rms};
use crate::task::{RvDataset, TaskBundle, Tier};

pub const MIN_SUBMITTED_PERIOD_DAYS: f64 = 0.5;
pub const MAX_SUBMITTED_ECCENTRICITY: f64 = 0.8;
pub const RMS_TOLERANCE: f64 = 1.5;

/// Largest number of planets a submission may carry on each tier.
pub fn planet_cap(tier: Tier) -> usize {
    match tier {
        Tier::Easy => 3,
        Tier::Medium => 5,
        Tier::Hard => 8,
    }
}

/// A candidate planetary system. Offsets are optional; absent ones are solved
/// for in closed form.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub planets: Vec<PlanetElements>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<BTreeMap<String, f64>>,
}

impl Submission {
    pub fn new(planets: Vec<PlanetElements>) -> Self {
        Self {
            planets,
            offsets: None,
        }
    }

    /// Checks the submission bounds; violations are returned as rejections.
    pub fn validate(&self, max_planets: usize) -> Result<()> {
        if self.planets.len() > max_planets {
            return Err(Error::RejectedSubmission(format!(
                "{} planets submitted, at most {max_planets} allowed",
                self.planets.len()
            )));
        }
        for (i, p) in self.planets.iter().enumerate() {
            let fields = [
                p.period_days,
                p.m_sin_i_mjup,
                p.ecc,
                p.omega_rad,
                p.mean_longitude_rad,
                p.node_rad,
            ];
            if fields.iter().any(|v| !v.is_finite()) {
                return Err(Error::RejectedSubmission(format!(
                    "planet {i}: non-finite field"
                )));
            }
            if !(p.period_days > MIN_SUBMITTED_PERIOD_DAYS) {
                return Err(Error::RejectedSubmission(format!(
                    "planet {i}: P_days must exceed {MIN_SUBMITTED_PERIOD_DAYS}, got {}",
                    p.period_days
                )));
            }
            if !(0.0..=MAX_SUBMITTED_ECCENTRICITY).contains(&p.ecc) {
                return Err(Error::RejectedSubmission(format!(
                    "planet {i}: e must lie in [0, {MAX_SUBMITTED_ECCENTRICITY}], got {}",
                    p.ecc
                )));
            }
            if !(p.m_sin_i_mjup > 0.0) {
                return Err(Error::RejectedSubmission(format!(
                    "planet {i}: m_sin_i_mjup must be positive, got {}",
                    p.m_sin_i_mjup
                )));
            }
        }
        if let Some(offsets) = &self.offsets {
            if offsets.values().any(|g| !g.is_finite()) {
                return Err(Error::RejectedSubmission("non-finite offset".into()));
            }
        }
        Ok(())
    }
}

/// Per-instrument constants minimizing the weighted squared residual of
/// `rvs - signal`, i.e. the weighted mean residual of each instrument.
pub fn optimal_offsets(dataset: &RvDataset, signal: &[f64]) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for ((label, (&y, &s)), &m) in dataset
        .labels
        .iter()
        .zip(dataset.rvs_ms.iter().zip(&dataset.sigmas_ms))
        .zip(signal)
    {
        let w = 1.0 / (s * s);
        let e = acc.entry(label.clone()).or_insert((0.0, 0.0));
        e.0 += w * (y - m);
        e.1 += w;
    }
    acc.into_iter().map(|(k, (n, d))| (k, n / d)).collect()
}

/// Model velocities of a submission at the dataset timestamps.
pub fn forward_submission(sub: &Submission, dataset: &RvDataset) -> Result<Vec<f64>> {
    let star = dataset.star();
    let zero: BTreeMap<String, f64> = dataset
        .instruments()
        .into_iter()
        .map(|l| (l, 0.0))
        .collect();
    let signal = orbit::rv_model(&dataset.times_days, &sub.planets, &star, &zero, &dataset.labels)?;
    let offsets = match &sub.offsets {
        Some(o) => {
            if let Some(missing) = zero.keys().find(|l| !o.contains_key(*l)) {
                return Err(Error::RejectedSubmission(format!(
                    "no offset for instrument `{missing}`"
                )));
            }
            o.clone()
        }
        None => optimal_offsets(dataset, &signal),
    };
    Ok(signal
        .iter()
        .zip(&dataset.labels)
        .map(|(s, l)| s + offsets[l])
        .collect())
}

/// `(ok_rms, rms, median_sigma)`; the threshold is inclusive.
pub fn rms_check(observations: &[f64], predictions: &[f64], sigmas: &[f64]) -> (bool, f64, f64) {
    let r = rms(observations.iter().zip(predictions).map(|(y, m)| y - m));
    let med = median(sigmas);
    (r <= RMS_TOLERANCE * med, r, med)
}

/// Gaussian log-likelihood of residuals under the reported sigmas.
pub fn log_likelihood(observations: &[f64], predictions: &[f64], sigmas: &[f64]) -> f64 {
    observations
        .iter()
        .zip(predictions)
        .zip(sigmas)
        .map(|((y, m), s)| {
            let z = (y - m) / s;
            -0.5 * (z * z + (std::f64::consts::TAU * s * s).ln())
        })
        .sum()
}

pub fn bic(log_likelihood: f64, n_params: usize, n_points: usize) -> f64 {
    -2.0 * log_likelihood + n_params as f64 * (n_points as f64).ln()
}

/// Free parameters of a model with `n_pl` Keplerians and `n_inst` offsets.
pub fn n_params(n_pl: usize, n_inst: usize) -> usize {
    5 * n_pl + n_inst
}

/// Predictions of the null model: one weighted-mean constant per instrument.
pub fn null_predictions(dataset: &RvDataset) -> Vec<f64> {
    let zeros = vec![0.0; dataset.len()];
    let offsets = optimal_offsets(dataset, &zeros);
    dataset.labels.iter().map(|l| offsets[l]).collect()
}

/// `(ok_delta_bic, delta_bic_per_point)` with `ΔBIC = BIC_null − BIC_model`;
/// the per-point value must be strictly positive.
pub fn delta_bic_check(
    dataset: &RvDataset,
    predictions: &[f64],
    n_pl: usize,
    n_inst: usize,
) -> (bool, f64) {
    let n = dataset.len();
    let null = null_predictions(dataset);
    let bic_null = bic(
        log_likelihood(&dataset.rvs_ms, &null, &dataset.sigmas_ms),
        n_params(0, n_inst),
        n,
    );
    let bic_model = bic(
        log_likelihood(&dataset.rvs_ms, predictions, &dataset.sigmas_ms),
        n_params(n_pl, n_inst),
        n,
    );
    let per_point = (bic_null - bic_model) / n as f64;
    (per_point > 0.0, per_point)
}

/// Weights and thresholds of the matching stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub w_rv: f64,
    pub w_p: f64,
    pub w_k: f64,
    pub w_e: f64,
    pub reject_d: f64,
    pub count_penalty: f64,
    pub pass_threshold: f64,
    pub grid_points: usize,
    /// Average the pair scores over the number of truth planets instead of
    /// the number of kept pairs.
    #[serde(default)]
    pub normalize_by_truth: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            w_rv: 4.0,
            w_p: 1.0,
            w_k: 0.5,
            w_e: 0.5,
            reject_d: 5.0,
            count_penalty: 0.25,
            pass_threshold: 0.8,
            grid_points: 2048,
            normalize_by_truth: false,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = [self.w_rv, self.w_p, self.w_k, self.w_e];
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidArgument("match weights must be positive".into()));
        }
        if !(self.pass_threshold > 0.0 && self.pass_threshold < 1.0) {
            return Err(Error::InvalidArgument(
                "pass threshold must lie in (0, 1)".into(),
            ));
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidArgument("grid needs at least 2 points".into()));
        }
        Ok(())
    }
}

/// Distance between two single-planet signals.
///
/// The RV term compares both curves on a uniform grid over
/// `[t_ref, t_ref + span]` after removing their mean difference.
pub fn signal_distance(truth: &Keplerian, guess: &Keplerian, span_days: f64, cfg: &MatchConfig) -> Result<f64> {
    if !(truth.k_ms > 0.0) {
        return Err(Error::InvalidTruth(
            "truth semi-amplitude must be positive".into(),
        ));
    }
    let t0 = truth.t_ref_days;
    let grid = linspace(t0, t0 + span_days, cfg.grid_points);
    let diff: Vec<f64> = grid
        .iter()
        .map(|&t| Ok(truth.velocity(t)? - guess.velocity(t)?))
        .collect::<Result<_>>()?;
    let mean = diff.iter().sum::<f64>() / diff.len() as f64;
    let rv_term = rms(diff.iter().map(|d| d - mean)) / truth.k_ms;
    let k_term = if guess.k_ms > 0.0 {
        (guess.k_ms / truth.k_ms).ln().abs()
    } else {
        f64::INFINITY
    };
    Ok(cfg.w_rv * rv_term
        + cfg.w_p * (guess.period_days / truth.period_days).ln().abs()
        + cfg.w_k * k_term
        + cfg.w_e * (guess.ecc - truth.ecc).abs())
}

/// Distance between two planets around the same star.
pub fn pair_distance(
    truth: &PlanetElements,
    guess: &PlanetElements,
    star: &orbit::StarContext,
    span_days: f64,
    cfg: &MatchConfig,
) -> Result<f64> {
    signal_distance(
        &Keplerian::from_planet(truth, star)?,
        &Keplerian::from_planet(guess, star)?,
        span_days,
        cfg,
    )
}

/// Minimum-cost one-to-one assignment on a rectangular cost matrix.
///
/// Returns `min(rows, cols)` pairs `(row, col)` sorted by row.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    if rows > cols {
        let transposed: Vec<Vec<f64>> = (0..cols)
            .map(|j| (0..rows).map(|i| cost[i][j]).collect())
            .collect();
        let mut pairs: Vec<(usize, usize)> = min_cost_assignment(&transposed)
            .into_iter()
            .map(|(j, i)| (i, j))
            .collect();
        pairs.sort_unstable();
        return pairs;
    }
    // Shortest augmenting path with potentials; rows <= cols, 1-based sentinels.
    let (n, m) = (rows, cols);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| owner[j] != 0)
        .map(|j| (owner[j] - 1, j - 1))
        .collect();
    pairs.sort_unstable();
    pairs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub truth_index: usize,
    pub guess_index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub ok_match: bool,
    pub ok_count: bool,
    pub match_score: f64,
    pub assignment: Vec<MatchPair>,
}

/// Combines kept pair distances and the count mismatch into the match score.
pub fn score_from_distances(distances: &[f64], n_truth: usize, n_guess: usize, cfg: &MatchConfig) -> f64 {
    let total: f64 = distances.iter().map(|d| (-d).exp()).sum();
    let denom = if cfg.normalize_by_truth {
        n_truth
    } else {
        distances.len()
    };
    let mean = if denom == 0 { 0.0 } else { total / denom as f64 };
    mean - cfg.count_penalty * n_truth.abs_diff(n_guess) as f64
}

/// Matches guess signals to truth signals and scores the match.
pub fn match_signals(
    truth: &[Keplerian],
    guess: &[Keplerian],
    span_days: f64,
    cfg: &MatchConfig,
) -> Result<MatchOutcome> {
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|t| {
            guess
                .iter()
                .map(|g| signal_distance(t, g, span_days, cfg))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let assignment: Vec<MatchPair> = min_cost_assignment(&cost)
        .into_iter()
        .map(|(i, j)| MatchPair {
            truth_index: i,
            guess_index: j,
            distance: cost[i][j],
        })
        .filter(|p| p.distance <= cfg.reject_d)
        .collect();
    let distances: Vec<f64> = assignment.iter().map(|p| p.distance).collect();
    let match_score = score_from_distances(&distances, truth.len(), guess.len(), cfg);
    Ok(MatchOutcome {
        ok_match: match_score >= cfg.pass_threshold,
        ok_count: truth.len() == guess.len(),
        match_score,
        assignment,
    })
}

/// Planet-element front end of [`match_signals`].
pub fn match_and_score(
    truth: &[PlanetElements],
    guess: &[PlanetElements],
    star: &orbit::StarContext,
    span_days: f64,
    cfg: &MatchConfig,
) -> Result<MatchOutcome> {
    let t: Vec<Keplerian> = truth
        .iter()
        .map(|p| Keplerian::from_planet(p, star))
        .collect::<Result<_>>()?;
    let g: Vec<Keplerian> = guess
        .iter()
        .map(|p| Keplerian::from_planet(p, star))
        .collect::<Result<_>>()?;
    match_signals(&t, &g, span_days, cfg)
}

/// Plain-text feedback per failing criterion. Never contains truth values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Hints {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rms: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_bic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r#match: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport {
    pub schema_version: u32,
    pub ok_rms: bool,
    pub ok_delta_bic: bool,
    pub ok_match: bool,
    pub ok_count: bool,
    pub passed: bool,
    pub rms_ms: f64,
    pub median_sigma_ms: f64,
    pub delta_bic_per_point: f64,
    pub match_score: f64,
    pub match_threshold: f64,
    pub n_truth: usize,
    pub n_guess: usize,
    pub n_points: usize,
    pub assignment: Vec<MatchPair>,
    pub hints: Hints,
}

impl CriteriaReport {
    /// Overall verdict when the match criterion is re-applied at `tau`.
    pub fn passed_at(&self, tau: f64) -> bool {
        self.ok_rms && self.ok_delta_bic && self.ok_count && self.match_score >= tau
    }

    pub fn criteria(&self) -> [bool; 4] {
        [self.ok_delta_bic, self.ok_rms, self.ok_match, self.ok_count]
    }
}

/// Grades a submission against a bundle with the tier's planet cap.
pub fn evaluate(sub: &Submission, bundle: &TaskBundle, cfg: &MatchConfig) -> Result<CriteriaReport> {
    evaluate_capped(sub, bundle, cfg, planet_cap(bundle.tier))
}

pub fn evaluate_capped(
    sub: &Submission,
    bundle: &TaskBundle,
    cfg: &MatchConfig,
    max_planets: usize,
) -> Result<CriteriaReport> {
    sub.validate(max_planets)?;
    let ds = &bundle.dataset;
    let predictions = forward_submission(sub, ds)?;
    let (ok_rms, rms_ms, median_sigma_ms) = rms_check(&ds.rvs_ms, &predictions, &ds.sigmas_ms);
    let n_inst = ds.instruments().len();
    let (ok_delta_bic, delta_bic_per_point) =
        delta_bic_check(ds, &predictions, sub.planets.len(), n_inst);

    let star = ds.star();
    let truth = bundle.truth_signals()?;
    let guess: Vec<Keplerian> = sub
        .planets
        .iter()
        .map(|p| Keplerian::from_planet(p, &star))
        .collect::<Result<_>>()?;
    let span = ds.baseline_days();
    let outcome = match_signals(&truth, &guess, span, cfg)?;

    let n_truth = truth.len();
    let n_guess = guess.len();
    let mut hints = Hints::default();
    if !ok_rms {
        hints.rms = Some(format!(
            "residual RMS {rms_ms:.3} m/s exceeds {RMS_TOLERANCE} x median uncertainty ({median_sigma_ms:.3} m/s)"
        ));
    }
    if !ok_delta_bic {
        hints.delta_bic = Some(format!(
            "model does not beat the constant-offset null (ΔBIC per point {delta_bic_per_point:.3})"
        ));
    }
    if !outcome.ok_match {
        hints.r#match = Some(format!(
            "match score {:.3} below threshold {}",
            outcome.match_score, cfg.pass_threshold
        ));
    }
    if n_guess < n_truth {
        hints.count = Some("planet count is wrong: add planet(s)".into());
    } else if n_guess > n_truth {
        hints.count = Some("planet count is wrong: remove planet(s)".into());
    }

    Ok(CriteriaReport {
        schema_version: SCHEMA_VERSION,
        ok_rms,
        ok_delta_bic,
        ok_match: outcome.ok_match,
        ok_count: outcome.ok_count,
        passed: ok_rms && ok_delta_bic && outcome.ok_match && outcome.ok_count,
        rms_ms,
        median_sigma_ms,
        delta_bic_per_point,
        match_score: outcome.match_score,
        match_threshold: cfg.pass_threshold,
        n_truth,
        n_guess,
        n_points: ds.len(),
        assignment: outcome.assignment,
        hints,
    })
}

/// A submission reproducing the ground truth exactly.
pub fn truth_submission(bundle: &TaskBundle) -> Result<Submission> {
    Ok(Submission {
        planets: bundle.truth_elements_with_amplitudes()?,
        offsets: Some(bundle.truth_offsets.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseSpec;
    use crate::task::{generate_task, instrument_label, score_factors, DifficultyInputs, TruthPlanet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn star() -> orbit::StarContext {
        orbit::StarContext::new(1.0, 0.0)
    }

    fn kep(p: f64, k: f64, e: f64, w: f64, m0: f64) -> Keplerian {
        Keplerian {
            period_days: p,
            k_ms: k,
            ecc: e,
            omega_rad: w,
            mean_anomaly_at_ref: m0,
            t_ref_days: 0.0,
        }
    }

    fn dataset(times: Vec<f64>, rvs: Vec<f64>, sigma: f64) -> RvDataset {
        let n = times.len();
        RvDataset {
            t_ref_days: times[0],
            times_days: times,
            rvs_ms: rvs,
            sigmas_ms: vec![sigma; n],
            labels: vec![instrument_label(0); n],
            star_mass_sun: 1.0,
        }
    }

    fn bundle(ds: RvDataset, planets: Vec<PlanetElements>, gamma: f64) -> TaskBundle {
        let n = ds.len();
        TaskBundle {
            task_id: "fixture".into(),
            seed: None,
            noise: NoiseSpec::white(ds.sigmas_ms[0]),
            dataset: ds,
            truth_planets: planets.into_iter().map(TruthPlanet::new).collect(),
            truth_offsets: BTreeMap::from([(instrument_label(0), gamma)]),
            difficulty: score_factors(&DifficultyInputs {
                n_planets: 1,
                snr_value: 10.0,
                n_res: 0,
                coverage_ratio: 3.0,
                n_obs: n,
                sigma_gp_ms: None,
            }),
            tier: Tier::Medium,
        }
    }

    fn noiseless_bundle() -> TaskBundle {
        let planets = vec![
            PlanetElements::new(12.0, 0.3, 0.1, 1.0, 2.0, 0.0),
            PlanetElements::new(41.0, 0.6, 0.3, 4.0, 0.5, 0.0),
        ];
        let times: Vec<f64> = (0..80).map(|i| i as f64 * 1.37 + 0.2 * (i % 3) as f64).collect();
        let offsets = BTreeMap::from([(instrument_label(0), 3.2)]);
        let labels = vec![instrument_label(0); times.len()];
        let rvs = orbit::rv_model(&times, &planets, &star(), &offsets, &labels).unwrap();
        bundle(dataset(times, rvs, 1.0), planets, 3.2)
    }

    #[test]
    fn submission_bounds() {
        let ok = PlanetElements::new(10.0, 0.1, 0.8, 0.0, 0.0, 0.0);
        assert!(Submission::new(vec![ok]).validate(3).is_ok());
        let mut bad = ok;
        bad.ecc = 0.9;
        assert!(matches!(Submission::new(vec![bad]).validate(3), Err(Error::RejectedSubmission(_))));
        bad = ok;
        bad.period_days = 0.5;
        assert!(Submission::new(vec![bad]).validate(3).is_err());
        bad = ok;
        bad.m_sin_i_mjup = f64::NAN;
        assert!(Submission::new(vec![bad]).validate(3).is_err());
        assert!(Submission::new(vec![ok; 4]).validate(3).is_err());
    }

    #[test]
    fn truth_forward_model_is_exact_on_noiseless_data() {
        let b = noiseless_bundle();
        let sub = truth_submission(&b).unwrap();
        let pred = forward_submission(&sub, &b.dataset).unwrap();
        for (p, y) in pred.iter().zip(&b.dataset.rvs_ms) {
            assert!((p - y).abs() < 1e-9);
        }
        let report = evaluate(&sub, &b, &MatchConfig::default()).unwrap();
        assert!(report.passed);
        assert_eq!(report.match_score, 1.0);
    }

    #[test]
    fn zero_planet_offset_is_weighted_mean() {
        let mut ds = dataset(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 6.0], 1.0);
        ds.sigmas_ms = vec![1.0, 2.0, 0.5];
        let pred = forward_submission(&Submission::default(), &ds).unwrap();
        let expected = crate::stats::weighted_mean(&ds.rvs_ms, &ds.sigmas_ms);
        assert!(pred.iter().all(|p| (p - expected).abs() < 1e-12));
    }

    #[test]
    fn closed_form_offset_beats_grid_search() {
        let b = noiseless_bundle();
        let mut ds = b.dataset.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for y in &mut ds.rvs_ms {
            *y += rng.random_range(-2.0..2.0);
        }
        let planets = vec![b.truth_planets[0].elements];
        let free = forward_submission(&Submission::new(planets.clone()), &ds).unwrap();
        let gamma = free[0]
            - orbit::rv_single(ds.times_days[0], &planets[0], &ds.star()).unwrap();
        let chi2 = |g: f64| {
            let sub = Submission {
                planets: planets.clone(),
                offsets: Some(BTreeMap::from([(instrument_label(0), g)])),
            };
            let pred = forward_submission(&sub, &ds).unwrap();
            ds.rvs_ms.iter().zip(&pred).map(|(y, m)| (y - m).powi(2)).sum::<f64>()
        };
        let best_grid = (-4000..4000)
            .map(|i| gamma + i as f64 * 1e-4)
            .min_by(|a, b| chi2(*a).total_cmp(&chi2(*b)))
            .unwrap();
        assert!((best_grid - gamma).abs() <= 1e-4);
        let fixed = Submission {
            planets: planets.clone(),
            offsets: Some(BTreeMap::from([(instrument_label(0), gamma)])),
        };
        let pinned = forward_submission(&fixed, &ds).unwrap();
        for (a, b) in free.iter().zip(&pinned) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn missing_offset_is_rejected() {
        let b = noiseless_bundle();
        let sub = Submission {
            planets: vec![],
            offsets: Some(BTreeMap::from([("inst_Z".to_string(), 0.0)])),
        };
        assert!(matches!(forward_submission(&sub, &b.dataset), Err(Error::RejectedSubmission(_))));
    }

    #[test]
    fn rms_threshold_inclusive() {
        let obs = [1.5, -1.5, 1.5, -1.5];
        let pred = [0.0; 4];
        let (ok, r, med) = rms_check(&obs, &pred, &[1.0; 4]);
        assert_eq!((ok, r, med), (true, 1.5, 1.0));
        let (ok, _, _) = rms_check(&[2.0, -2.0], &[0.0, 0.0], &[1.0, 1.0]);
        assert!(!ok);
        let (ok, r, _) = rms_check(&obs, &obs, &[1.0; 4]);
        assert!(ok && r == 0.0);
    }

    #[test]
    fn null_model_gives_zero_delta_bic() {
        let ds = dataset(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, -1.0, 0.5, 2.0], 1.0);
        let pred = null_predictions(&ds);
        let (ok, per_point) = delta_bic_check(&ds, &pred, 0, 1);
        assert_eq!(per_point, 0.0);
        assert!(!ok);
    }

    #[test]
    fn delta_bic_matches_chi_square_oracle() {
        let b = noiseless_bundle();
        let mut ds = b.dataset.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for y in &mut ds.rvs_ms {
            *y += rng.random_range(-1.0..1.0);
        }
        let pred = forward_submission(&truth_submission(&b).unwrap(), &ds).unwrap();
        let (_, per_point) = delta_bic_check(&ds, &pred, 2, 1);
        let wm = crate::stats::weighted_mean(&ds.rvs_ms, &ds.sigmas_ms);
        let chi_null: f64 = ds.rvs_ms.iter().map(|y| (y - wm).powi(2)).sum();
        let chi_model: f64 = ds.rvs_ms.iter().zip(&pred).map(|(y, m)| (y - m).powi(2)).sum();
        let n = ds.len() as f64;
        let oracle = (chi_null - chi_model - 10.0 * n.ln()) / n;
        assert!((per_point - oracle).abs() < 1e-9);
    }

    #[test]
    fn overfitting_noise_loses_bic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let times: Vec<f64> = (0..40).map(|i| i as f64 * 2.1).collect();
        let rvs: Vec<f64> = (0..40).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let ds = dataset(times, rvs, 1.0);
        // a small sinusoid that tracks nothing in particular
        let sub = Submission::new(vec![PlanetElements::new(7.3, 0.002, 0.0, 0.0, 1.0, 0.0)]);
        let pred = forward_submission(&sub, &ds).unwrap();
        let (ok, per_point) = delta_bic_check(&ds, &pred, 1, 1);
        assert!(!ok && per_point < 0.0);
    }

    #[test]
    fn identical_signals_have_zero_distance() {
        let t = kep(30.0, 10.0, 0.1, 1.0, 2.0);
        assert_eq!(signal_distance(&t, &t, 90.0, &MatchConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn period_term_in_isolation() {
        let cfg = MatchConfig {
            w_rv: 1e-300,
            ..MatchConfig::default()
        };
        let t = kep(30.0, 10.0, 0.1, 1.0, 2.0);
        let g = kep(60.0, 10.0, 0.1, 1.0, 2.0);
        let d = signal_distance(&t, &g, 90.0, &cfg).unwrap();
        assert!((d - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn grid_refinement_oracle() {
        let t = kep(30.0, 10.0, 0.1, 0.7, 1.1);
        let g = kep(30.3, 11.0, 0.15, 0.7, 1.1);
        let span = 100.0;
        let cfg = MatchConfig::default();
        let d = signal_distance(&t, &g, span, &cfg).unwrap();
        // independent dense-grid evaluation
        let n = 16384;
        let diff: Vec<f64> = (0..n)
            .map(|i| {
                let x = span * i as f64 / (n - 1) as f64;
                t.velocity(x).unwrap() - g.velocity(x).unwrap()
            })
            .collect();
        let mean = diff.iter().sum::<f64>() / n as f64;
        let var = diff.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
        let oracle = 4.0 * var.sqrt() / 10.0
            + (30.3f64 / 30.0).ln().abs()
            + 0.5 * (1.1f64).ln().abs()
            + 0.5 * 0.05;
        assert!((d - oracle).abs() < 1e-3, "{d} vs {oracle}");
    }

    #[test]
    fn zero_truth_amplitude_is_invalid() {
        let t = kep(30.0, 0.0, 0.1, 1.0, 2.0);
        assert!(matches!(
            signal_distance(&t, &t, 90.0, &MatchConfig::default()),
            Err(Error::InvalidTruth(_))
        ));
    }

    #[test]
    fn low_eccentricity_degeneracy_is_absorbed() {
        // shifting omega and compensating the mean anomaly leaves a nearly circular signal unchanged
        let t = kep(25.0, 8.0, 0.01, 0.3, 1.0);
        let g = kep(25.0, 8.0, 0.01, 1.3, 0.0);
        let d = signal_distance(&t, &g, 75.0, &MatchConfig::default()).unwrap();
        assert!(d < 0.05, "{d}");
    }

    fn exhaustive(cost: &[Vec<f64>]) -> f64 {
        fn rec(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            let rows = cost.len();
            if row == rows {
                *best = best.min(acc);
                return;
            }
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    rec(cost, row + 1, used, acc + cost[row][j], best);
                    used[j] = false;
                }
            }
        }
        let rows = cost.len();
        let cols = cost[0].len();
        let c: Vec<Vec<f64>> = if rows <= cols {
            cost.to_vec()
        } else {
            (0..cols).map(|j| (0..rows).map(|i| cost[i][j]).collect()).collect()
        };
        let mut best = f64::INFINITY;
        rec(&c, 0, &mut vec![false; c[0].len()], 0.0, &mut best);
        best
    }

    #[test]
    fn assignment_matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let r = rng.random_range(1..=5);
            let c = rng.random_range(1..=5);
            let cost: Vec<Vec<f64>> = (0..r)
                .map(|_| (0..c).map(|_| rng.random_range(0.0..10.0)).collect())
                .collect();
            let pairs = min_cost_assignment(&cost);
            assert_eq!(pairs.len(), r.min(c));
            let total: f64 = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
            assert!((total - exhaustive(&cost)).abs() < 1e-9);
        }
    }

    #[test]
    fn match_score_examples() {
        let cfg = MatchConfig::default();
        let a = kep(10.0, 5.0, 0.1, 1.0, 2.0);
        let b = kep(40.0, 8.0, 0.2, 3.0, 1.0);
        let exact = match_signals(&[a, b], &[b, a], 60.0, &cfg).unwrap();
        assert_eq!(exact.match_score, 1.0);
        assert!(exact.ok_match && exact.ok_count);
        let extra = match_signals(&[a], &[a, b], 60.0, &cfg).unwrap();
        assert!((extra.match_score - 0.75).abs() < 1e-12);
        assert!(!extra.ok_match && !extra.ok_count);
    }

    #[test]
    fn boundary_distance() {
        let cfg = MatchConfig::default();
        assert!((score_from_distances(&[0.223], 1, 1, &cfg) - 0.8).abs() < 1e-3);
        assert!(score_from_distances(&[0.223], 1, 1, &cfg) >= 0.8);
        assert!(score_from_distances(&[0.230], 1, 1, &cfg) < 0.8);
    }

    #[test]
    fn rejected_pairs_leave_only_the_penalty() {
        let cfg = MatchConfig::default();
        let a = kep(10.0, 5.0, 0.1, 1.0, 2.0);
        let far = kep(290.0, 500.0, 0.7, 3.0, 1.0);
        let out = match_signals(&[a, a], &[far], 60.0, &cfg).unwrap();
        assert!(out.assignment.is_empty());
        assert_eq!(out.match_score, -0.25);
    }

    #[test]
    fn normalize_by_truth_variant() {
        let cfg = MatchConfig {
            normalize_by_truth: true,
            ..MatchConfig::default()
        };
        assert!((score_from_distances(&[0.0], 2, 1, &cfg) - (0.5 - 0.25)).abs() < 1e-12);
    }

    #[test]
    fn flat_line_fails_bic_and_count() {
        let b = noiseless_bundle();
        let report = evaluate(&Submission::default(), &b, &MatchConfig::default()).unwrap();
        assert!(!report.ok_delta_bic && !report.ok_count && !report.passed);
        assert_eq!(report.delta_bic_per_point, 0.0);
        assert_eq!(report.hints.count.as_deref(), Some("planet count is wrong: add planet(s)"));
    }

    #[test]
    fn generated_truth_round_trip() {
        for seed in 100..110 {
            let b = generate_task(seed).unwrap();
            let r = evaluate(&truth_submission(&b).unwrap(), &b, &MatchConfig::default()).unwrap();
            assert!(r.passed, "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn rescoring_is_monotone_in_tau() {
        let b = noiseless_bundle();
        let r = evaluate(&truth_submission(&b).unwrap(), &b, &MatchConfig::default()).unwrap();
        let mut last = true;
        for i in 0..=100 {
            let p = r.passed_at(i as f64 / 100.0 * 1.2);
            assert!(last || !p);
            last = p;
        }
    }
}
