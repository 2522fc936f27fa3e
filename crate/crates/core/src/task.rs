//! Task generation, difficulty scoring and archival ingestion.
//!
//! A synthetic task is a pure function of its seed. Each attempt draws from its
//! own ChaCha stream (`stream = attempt index`), so a rejected draw never shifts
//! the randomness of the next one.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator;
use crate::noise::{sample_noise, GpSpec, NoiseSpec};
use crate::orbit::{self, Keplerian, PlanetElements, StarContext};
use crate::stats::median;

/// Period ratios treated as near-resonant.
pub const RESONANT_RATIOS: [f64; 3] = [2.0, 1.5, 5.0 / 3.0];
/// Maximum fractional distance from a resonant ratio.
pub const RESONANCE_TOLERANCE: f64 = 0.03;

const KIPPING_ALPHA: f64 = 0.867;
const KIPPING_BETA: f64 = 3.03;
const TIME_NUDGE_DAYS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Easy,
    Medium,
    Hard,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Easy, Tier::Medium, Tier::Hard];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Easy => "easy",
            Tier::Medium => "medium",
            Tier::Hard => "hard",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "easy" => Ok(Tier::Easy),
            "medium" => Ok(Tier::Medium),
            "hard" => Ok(Tier::Hard),
            other => Err(Error::InvalidArgument(format!("unknown tier `{other}`"))),
        }
    }
}

/// Maps an integer difficulty in `1..=10` to its tier.
pub fn assign_tier(difficulty: i64) -> Result<Tier> {
    match difficulty {
        1..=2 => Ok(Tier::Easy),
        3..=6 => Ok(Tier::Medium),
        7..=10 => Ok(Tier::Hard),
        d => Err(Error::InvalidArgument(format!(
            "difficulty must lie in 1..=10, got {d}"
        ))),
    }
}

/// The agent-visible observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RvDataset {
    pub times_days: Vec<f64>,
    pub rvs_ms: Vec<f64>,
    pub sigmas_ms: Vec<f64>,
    pub labels: Vec<String>,
    pub star_mass_sun: f64,
    pub t_ref_days: f64,
}

impl RvDataset {
    pub fn len(&self) -> usize {
        self.times_days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_days.is_empty()
    }

    pub fn star(&self) -> StarContext {
        StarContext::new(self.star_mass_sun, self.t_ref_days)
    }

    /// Time between first and last observation.
    pub fn baseline_days(&self) -> f64 {
        match (self.times_days.first(), self.times_days.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub fn median_sigma(&self) -> f64 {
        median(&self.sigmas_ms)
    }

    /// Distinct instrument labels in sorted order.
    pub fn instruments(&self) -> Vec<String> {
        let mut v: Vec<String> = self.labels.clone();
        v.sort();
        v.dedup();
        v
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.times_days.len();
        if n == 0 {
            return Err(Error::InvalidArgument("dataset is empty".into()));
        }
        if self.rvs_ms.len() != n || self.sigmas_ms.len() != n || self.labels.len() != n {
            return Err(Error::InvalidArgument(
                "dataset arrays have unequal lengths".into(),
            ));
        }
        if self.times_days.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "times must be strictly increasing".into(),
            ));
        }
        if self.sigmas_ms.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidArgument("sigmas must be positive".into()));
        }
        if self
            .times_days
            .iter()
            .chain(&self.rvs_ms)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument("non-finite observation".into()));
        }
        if self.t_ref_days != self.times_days[0] {
            return Err(Error::InvalidArgument(
                "t_ref_days must equal the first timestamp".into(),
            ));
        }
        if !(self.star_mass_sun > 0.0) {
            return Err(Error::InvalidArgument("star mass must be positive".into()));
        }
        Ok(())
    }
}

/// A ground-truth planet; archival truths may carry the published semi-amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthPlanet {
    #[serde(flatten)]
    pub elements: PlanetElements,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_ms: Option<f64>,
}

impl TruthPlanet {
    pub fn new(elements: PlanetElements) -> Self {
        Self {
            elements,
            k_ms: None,
        }
    }

    /// Single-planet signal, honouring a reported semi-amplitude when present.
    pub fn signal(&self, star: &StarContext) -> Result<Keplerian> {
        let kep = Keplerian::from_planet(&self.elements, star)?;
        Ok(match self.k_ms {
            Some(k) => kep.with_amplitude(k),
            None => kep,
        })
    }
}

/// Raw inputs of the difficulty rubric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifficultyInputs {
    pub n_planets: usize,
    pub snr_value: f64,
    pub n_res: usize,
    pub coverage_ratio: f64,
    pub n_obs: usize,
    pub sigma_gp_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyBreakdown {
    pub d_base: u8,
    pub d_snr: u8,
    pub d_res: u8,
    pub d_cov: u8,
    pub d_obs: u8,
    pub d_gp: u8,
    pub d_total: u8,
    pub snr_value: f64,
    pub coverage_ratio: f64,
    pub n_res: usize,
}

/// Applies the additive difficulty rubric; the total is clipped to `[1, 10]`.
pub fn score_factors(inputs: &DifficultyInputs) -> DifficultyBreakdown {
    let d_base = inputs.n_planets.clamp(1, 4) as u8;
    let d_snr = if inputs.snr_value > 5.0 {
        0
    } else if inputs.snr_value > 2.0 {
        1
    } else if inputs.snr_value > 1.0 {
        2
    } else {
        3
    };
    let d_res = inputs.n_res.min(2) as u8;
    let d_cov = if inputs.coverage_ratio >= 3.0 {
        0
    } else if inputs.coverage_ratio >= 2.0 {
        1
    } else {
        2
    };
    let d_obs = match inputs.n_obs {
        n if n >= 80 => 0,
        n if n >= 50 => 1,
        n if n >= 30 => 2,
        _ => 3,
    };
    let d_gp = match inputs.sigma_gp_ms {
        None => 0,
        Some(s) if s < 0.5 => 1,
        Some(s) if s < 1.0 => 2,
        Some(_) => 3,
    };
    let sum = d_base + d_snr + d_res + d_cov + d_obs + d_gp;
    DifficultyBreakdown {
        d_base,
        d_snr,
        d_res,
        d_cov,
        d_obs,
        d_gp,
        d_total: sum.clamp(1, 10),
        snr_value: inputs.snr_value,
        coverage_ratio: inputs.coverage_ratio,
        n_res: inputs.n_res,
    }
}

/// Number of adjacent (period-sorted) pairs within tolerance of a resonant ratio.
pub fn count_resonant_pairs(periods: &[f64]) -> usize {
    let mut p = periods.to_vec();
    p.sort_by(f64::total_cmp);
    p.windows(2)
        .filter(|w| {
            let ratio = w[1] / w[0];
            RESONANT_RATIOS
                .iter()
                .any(|r| (ratio / r - 1.0).abs() <= RESONANCE_TOLERANCE)
        })
        .count()
}

/// `sqrt(median(sigma)^2 + sigma_gp^2)`.
pub fn effective_sigma(dataset: &RvDataset, noise: &NoiseSpec) -> f64 {
    dataset.median_sigma().hypot(noise.sigma_gp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskBundle {
    pub task_id: String,
    pub seed: Option<u64>,
    pub dataset: RvDataset,
    pub truth_planets: Vec<TruthPlanet>,
    pub truth_offsets: BTreeMap<String, f64>,
    pub noise: NoiseSpec,
    pub difficulty: DifficultyBreakdown,
    pub tier: Tier,
}

impl TaskBundle {
    pub fn truth_signals(&self) -> Result<Vec<Keplerian>> {
        let star = self.dataset.star();
        self.truth_planets.iter().map(|p| p.signal(&star)).collect()
    }

    pub fn truth_elements(&self) -> Vec<PlanetElements> {
        self.truth_planets.iter().map(|p| p.elements).collect()
    }
}

/// Computes the rubric factors of a bundle.
///
/// SNR is the weakest planet's `K / sigma_eff`; coverage is the baseline over
/// the longest truth period.
pub fn score_difficulty(bundle: &TaskBundle) -> Result<DifficultyBreakdown> {
    let signals = bundle.truth_signals()?;
    let sigma_eff = effective_sigma(&bundle.dataset, &bundle.noise);
    let snr_value = signals
        .iter()
        .map(|s| s.k_ms / sigma_eff)
        .fold(f64::INFINITY, f64::min);
    let periods: Vec<f64> = signals.iter().map(|s| s.period_days).collect();
    let longest = periods.iter().cloned().fold(0.0, f64::max);
    let coverage_ratio = if longest > 0.0 {
        bundle.dataset.baseline_days() / longest
    } else {
        f64::INFINITY
    };
    Ok(score_factors(&DifficultyInputs {
        n_planets: signals.len(),
        snr_value: if snr_value.is_finite() { snr_value } else { 0.0 },
        n_res: count_resonant_pairs(&periods),
        coverage_ratio,
        n_obs: bundle.dataset.len(),
        sigma_gp_ms: bundle.noise.gp.map(|g| g.sigma_gp_ms),
    }))
}

/// Thresholds of the identifiability filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityConfig {
    pub min_significance: f64,
    pub max_period_over_baseline: f64,
}

impl Default for IdentifiabilityConfig {
    fn default() -> Self {
        Self {
            min_significance: 4.0,
            max_period_over_baseline: 1.5,
        }
    }
}

/// `K * sqrt(n_obs / 2) / sigma_eff`.
pub fn detection_significance(k_ms: f64, n_obs: usize, sigma_eff: f64) -> f64 {
    k_ms * (n_obs as f64 / 2.0).sqrt() / sigma_eff
}

pub fn is_identifiable(bundle: &TaskBundle) -> bool {
    is_identifiable_with(bundle, &IdentifiabilityConfig::default())
}

pub fn is_identifiable_with(bundle: &TaskBundle, cfg: &IdentifiabilityConfig) -> bool {
    let Ok(signals) = bundle.truth_signals() else {
        return false;
    };
    let n = bundle.dataset.len();
    let sigma_eff = effective_sigma(&bundle.dataset, &bundle.noise);
    let baseline = bundle.dataset.baseline_days();
    signals.iter().all(|s| {
        detection_significance(s.k_ms, n, sigma_eff) >= cfg.min_significance
            && s.period_days <= cfg.max_period_over_baseline * baseline
    })
}

/// Priors of the planetary system draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemPriors {
    /// Fixed multiplicity; `None` draws uniformly from 1..=4.
    pub n_planets: Option<usize>,
    pub period_range_days: (f64, f64),
    pub mass_range_mjup: (f64, f64),
    pub resonance_probability: f64,
    pub max_eccentricity: f64,
    pub star_mass_range_sun: (f64, f64),
}

impl Default for SystemPriors {
    fn default() -> Self {
        Self {
            n_planets: None,
            period_range_days: (2.0, 300.0),
            mass_range_mjup: (0.01, 1.0),
            resonance_probability: 0.25,
            max_eccentricity: 0.8,
            star_mass_range_sun: (0.7, 1.3),
        }
    }
}

/// Draws an eccentricity from the Kipping Beta prior, truncated at `max_e`.
pub fn sample_eccentricity<R: Rng + ?Sized>(rng: &mut R, max_e: f64) -> f64 {
    let beta = Beta::new(KIPPING_ALPHA, KIPPING_BETA).expect("valid beta parameters");
    loop {
        let e: f64 = beta.sample(rng);
        if e <= max_e {
            return e;
        }
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Draws a planetary system (periods sorted ascending) and host star.
///
/// The returned star has `t_ref_days = 0`; the caller sets the epoch once the
/// observation schedule is known.
pub fn sample_system<R: Rng + ?Sized>(
    rng: &mut R,
    priors: &SystemPriors,
) -> (Vec<PlanetElements>, StarContext) {
    let n = priors.n_planets.unwrap_or_else(|| rng.random_range(1..=4));
    let (p_lo, p_hi) = priors.period_range_days;
    let mut periods: Vec<f64> = (0..n).map(|_| log_uniform(rng, p_lo, p_hi)).collect();
    periods.sort_by(f64::total_cmp);

    if n >= 2 && rng.random_bool(priors.resonance_probability) {
        let j = rng.random_range(0..n - 1);
        let ratio = RESONANT_RATIOS[rng.random_range(0..RESONANT_RATIOS.len())];
        let offset = rng.random_range(-RESONANCE_TOLERANCE..RESONANCE_TOLERANCE);
        periods[j + 1] = periods[j] * ratio * (1.0 + offset);
        periods.sort_by(f64::total_cmp);
    }

    let (m_lo, m_hi) = priors.mass_range_mjup;
    let planets = periods
        .into_iter()
        .map(|p| {
            let mass = rng.random_range(m_lo..m_hi);
            let e = sample_eccentricity(rng, priors.max_eccentricity);
            let omega = rng.random_range(0.0..TAU);
            let node = rng.random_range(0.0..TAU);
            let l = rng.random_range(0.0..TAU);
            PlanetElements::new(p, mass, e, omega, l, node)
        })
        .collect();
    let (s_lo, s_hi) = priors.star_mass_range_sun;
    let star = StarContext::new(rng.random_range(s_lo..s_hi), 0.0);
    (planets, star)
}

/// Draws observation times: 30–100 points uniform over a baseline of 2–4x the
/// shortest period, sorted and made strictly increasing.
pub fn schedule_observations<R: Rng + ?Sized>(rng: &mut R, planets: &[PlanetElements]) -> Vec<f64> {
    let min_p = planets
        .iter()
        .map(|p| p.period_days)
        .fold(f64::INFINITY, f64::min);
    let n: usize = rng.random_range(30..=100);
    let baseline = rng.random_range(2.0..4.0) * min_p;
    let mut times: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..baseline)).collect();
    times.sort_by(f64::total_cmp);
    make_strictly_increasing(&mut times);
    times
}

fn make_strictly_increasing(times: &mut [f64]) {
    for i in 1..times.len() {
        if times[i] <= times[i - 1] {
            times[i] = times[i - 1] + TIME_NUDGE_DAYS;
        }
    }
}

/// Generator knobs beyond the physical priors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub priors: SystemPriors,
    pub identifiability: IdentifiabilityConfig,
    /// Draw 2–3 instruments instead of one.
    pub multi_instrument: bool,
    pub gp_probability: f64,
    pub gp_amplitude_range_ms: (f64, f64),
    pub gp_rotation_range_days: (f64, f64),
    /// `log10` range of the white-noise scale.
    pub log10_sigma_w_range: (f64, f64),
    /// Per-point scatter of the instrumental sigma around `sigma_w`.
    pub sigma_spread: f64,
    /// Range of the extra jitter; `None` disables jitter.
    pub jitter_range_ms: Option<(f64, f64)>,
    pub offset_range_ms: (f64, f64),
    /// Also reject draws whose ground truth fails the statistical criteria.
    pub require_gradable_truth: bool,
    pub max_attempts: u32,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            priors: SystemPriors::default(),
            identifiability: IdentifiabilityConfig::default(),
            multi_instrument: false,
            gp_probability: 0.4,
            gp_amplitude_range_ms: (0.05, 1.6),
            gp_rotation_range_days: (10.0, 45.0),
            log10_sigma_w_range: (-0.3, 0.7),
            sigma_spread: 0.2,
            jitter_range_ms: None,
            offset_range_ms: (-20.0, 20.0),
            require_gradable_truth: true,
            max_attempts: 100,
        }
    }
}

/// Generic anonymised instrument label for index `i` (`inst_A`, `inst_B`, ...).
pub fn instrument_label(i: usize) -> String {
    let mut s = String::new();
    let mut n = i;
    loop {
        s.insert(0, (b'A' + (n % 26) as u8) as char);
        if n < 26 {
            break;
        }
        n = n / 26 - 1;
    }
    format!("inst_{s}")
}

/// Opaque, deterministic task identifier derived from the seed.
pub fn synthetic_task_id(seed: u64) -> String {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    format!("syn_{z:016x}")
}

pub fn generate_task(seed: u64) -> Result<TaskBundle> {
    generate_task_with(seed, &GeneratorConfig::default())
}

pub fn generate_task_with(seed: u64, cfg: &GeneratorConfig) -> Result<TaskBundle> {
    for attempt in 0..cfg.max_attempts {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(u64::from(attempt));
        let bundle = draw_candidate(&mut rng, seed, cfg)?;
        if !is_identifiable_with(&bundle, &cfg.identifiability) {
            continue;
        }
        if cfg.require_gradable_truth && !truth_is_gradable(&bundle)? {
            continue;
        }
        return Ok(bundle);
    }
    Err(Error::GenerationExhausted {
        seed,
        attempts: cfg.max_attempts,
    })
}

/// Whether the ground truth itself passes the RMS and ΔBIC criteria.
pub fn truth_is_gradable(bundle: &TaskBundle) -> Result<bool> {
    let ds = &bundle.dataset;
    let predictions = orbit::rv_model(
        &ds.times_days,
        &bundle.truth_elements_with_amplitudes()?,
        &ds.star(),
        &bundle.truth_offsets,
        &ds.labels,
    )?;
    let (ok_rms, _, _) = evaluator::rms_check(&ds.rvs_ms, &predictions, &ds.sigmas_ms);
    let (ok_bic, _) = evaluator::delta_bic_check(
        ds,
        &predictions,
        bundle.truth_planets.len(),
        ds.instruments().len(),
    );
    Ok(ok_rms && ok_bic)
}

impl TaskBundle {
    /// Truth elements, with reported amplitudes folded back into the masses.
    pub(crate) fn truth_elements_with_amplitudes(&self) -> Result<Vec<PlanetElements>> {
        let star = self.dataset.star();
        self.truth_planets
            .iter()
            .map(|tp| match tp.k_ms {
                None => Ok(tp.elements),
                Some(k) => {
                    let mut p = tp.elements;
                    p.m_sin_i_mjup =
                        orbit::min_mass_from_amplitude(k, p.period_days, p.ecc, star.star_mass_sun)?;
                    Ok(p)
                }
            })
            .collect()
    }
}

/// Draws the white-noise scale, optional correlated component and jitter.
pub fn sample_noise_spec<R: Rng + ?Sized>(rng: &mut R, cfg: &GeneratorConfig) -> NoiseSpec {
    let sigma_w = 10f64.powf(rng.random_range(cfg.log10_sigma_w_range.0..cfg.log10_sigma_w_range.1));
    let gp = if rng.random_bool(cfg.gp_probability) {
        Some(GpSpec {
            sigma_gp_ms: rng.random_range(cfg.gp_amplitude_range_ms.0..=cfg.gp_amplitude_range_ms.1),
            p_rot_days: rng.random_range(cfg.gp_rotation_range_days.0..=cfg.gp_rotation_range_days.1),
        })
    } else {
        None
    };
    let jitter = cfg
        .jitter_range_ms
        .map_or(0.0, |(lo, hi)| rng.random_range(lo..=hi));
    NoiseSpec {
        sigma_w_ms: sigma_w,
        jitter_ms: jitter,
        gp,
        sigmas_include_jitter: true,
    }
}

fn draw_candidate(rng: &mut ChaCha20Rng, seed: u64, cfg: &GeneratorConfig) -> Result<TaskBundle> {
    let (planets, star0) = sample_system(rng, &cfg.priors);
    let times = schedule_observations(rng, &planets);
    let star = StarContext::new(star0.star_mass_sun, times[0]);

    let noise = sample_noise_spec(rng, cfg);
    let sigma_w = noise.sigma_w_ms;

    let n_inst = if cfg.multi_instrument {
        rng.random_range(2..=3)
    } else {
        1
    };
    let mut offsets = BTreeMap::new();
    for i in 0..n_inst {
        offsets.insert(
            instrument_label(i),
            rng.random_range(cfg.offset_range_ms.0..cfg.offset_range_ms.1),
        );
    }
    let n = times.len();
    let labels: Vec<String> = if n_inst == 1 {
        vec![instrument_label(0); n]
    } else {
        // shuffled round-robin keeps every instrument populated
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            idx.swap(i, j);
        }
        let mut labels = vec![String::new(); n];
        for (slot, &k) in idx.iter().enumerate() {
            labels[k] = instrument_label(slot % n_inst);
        }
        labels
    };

    let spread = cfg.sigma_spread;
    let inst_sigmas: Vec<f64> = (0..n)
        .map(|_| sigma_w * rng.random_range(1.0 - spread..=1.0 + spread))
        .collect();
    let eps = sample_noise(rng, &times, &inst_sigmas, &noise)?;
    let clean = orbit::rv_model(&times, &planets, &star, &offsets, &labels)?;
    let rvs: Vec<f64> = clean.iter().zip(&eps).map(|(c, e)| c + e).collect();
    let sigmas: Vec<f64> = inst_sigmas.iter().map(|&s| noise.reported_sigma(s)).collect();

    let dataset = RvDataset {
        times_days: times,
        rvs_ms: rvs,
        sigmas_ms: sigmas,
        labels,
        star_mass_sun: star.star_mass_sun,
        t_ref_days: star.t_ref_days,
    };
    let mut bundle = TaskBundle {
        task_id: synthetic_task_id(seed),
        seed: Some(seed),
        dataset,
        truth_planets: planets.into_iter().map(TruthPlanet::new).collect(),
        truth_offsets: offsets,
        noise,
        difficulty: score_factors(&DifficultyInputs {
            n_planets: 1,
            snr_value: f64::INFINITY,
            n_res: 0,
            coverage_ratio: f64::INFINITY,
            n_obs: n,
            sigma_gp_ms: None,
        }),
        tier: Tier::Easy,
    };
    bundle.difficulty = score_difficulty(&bundle)?;
    bundle.tier = assign_tier(i64::from(bundle.difficulty.d_total))?;
    Ok(bundle)
}

/// One row of an archival RV table.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ArchiveRow {
    pub time: f64,
    pub rv: f64,
    pub sigma: f64,
    pub instrument: String,
}

/// Reads delimited archival rows with columns `time, rv, sigma, instrument`.
///
/// The delimiter is sniffed from the header line (comma, tab, semicolon or
/// whitespace).
pub fn read_archive_rows<R: Read>(mut reader: R) -> Result<Vec<ArchiveRow>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let header_line = text
        .lines()
        .find(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .ok_or_else(|| Error::Ingestion("empty archive table".into()))?;
    let delim = [b',', b'\t', b';']
        .into_iter()
        .find(|d| header_line.as_bytes().contains(d));
    let body: String = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .enumerate()
        .map(|(i, l)| {
            let l = match delim {
                Some(_) => l.trim().to_string(),
                None => l.split_whitespace().collect::<Vec<_>>().join(","),
            };
            if i == 0 {
                l.to_ascii_lowercase()
            } else {
                l
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delim.unwrap_or(b','))
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Ingestion(e.to_string()))?
        .clone();
    for col in ["time", "rv", "sigma", "instrument"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Ingestion(format!("missing `{col}` column")));
        }
    }
    rdr.deserialize()
        .map(|r| r.map_err(|e| Error::Ingestion(e.to_string())))
        .collect()
}

/// Published solution accompanying an archival table.
///
/// Anything else in the sidecar (target names, references) is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveTruth {
    pub star_mass_sun: f64,
    pub planets: Vec<TruthPlanet>,
    /// Offsets keyed by the original instrument names.
    #[serde(default)]
    pub offsets: BTreeMap<String, f64>,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
}

/// Converts an archival table into an anonymised task.
///
/// Instruments are renamed `inst_A, inst_B, ...` in order of first appearance;
/// times are sorted and rebased so the first observation is at `t = 0`.
pub fn ingest_archive(rows: &[ArchiveRow], truth: &ArchiveTruth, task_id: &str) -> Result<TaskBundle> {
    if rows.is_empty() {
        return Err(Error::Ingestion("no observations".into()));
    }
    for p in &truth.planets {
        if p.elements.ecc > 0.99 {
            return Err(Error::InvalidTruth(format!(
                "eccentricity {} exceeds 0.99",
                p.elements.ecc
            )));
        }
        p.elements
            .validate()
            .map_err(|e| Error::InvalidTruth(e.to_string()))?;
    }
    if !(truth.star_mass_sun > 0.0) {
        return Err(Error::InvalidTruth("star mass must be positive".into()));
    }
    for r in rows {
        if !(r.sigma > 0.0) || !r.time.is_finite() || !r.rv.is_finite() {
            return Err(Error::Ingestion(format!(
                "invalid row at t={}: rv={}, sigma={}",
                r.time, r.rv, r.sigma
            )));
        }
    }

    let mut names: Vec<&str> = Vec::new();
    for r in rows {
        if !names.contains(&r.instrument.as_str()) {
            names.push(&r.instrument);
        }
    }
    let rename: BTreeMap<&str, String> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (*n, instrument_label(i)))
        .collect();

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[a].time.total_cmp(&rows[b].time));
    let t0 = rows[order[0]].time;
    let mut times: Vec<f64> = order.iter().map(|&i| rows[i].time - t0).collect();
    make_strictly_increasing(&mut times);

    let dataset = RvDataset {
        times_days: times,
        rvs_ms: order.iter().map(|&i| rows[i].rv).collect(),
        sigmas_ms: order.iter().map(|&i| rows[i].sigma).collect(),
        labels: order
            .iter()
            .map(|&i| rename[rows[i].instrument.as_str()].clone())
            .collect(),
        star_mass_sun: truth.star_mass_sun,
        t_ref_days: 0.0,
    };
    let truth_offsets = truth
        .offsets
        .iter()
        .filter_map(|(name, g)| rename.get(name.as_str()).map(|l| (l.clone(), *g)))
        .collect();
    let noise = truth.noise.unwrap_or_else(|| NoiseSpec::white(dataset.median_sigma()));
    let mut bundle = TaskBundle {
        task_id: task_id.to_string(),
        seed: None,
        dataset,
        truth_planets: truth.planets.clone(),
        truth_offsets,
        noise,
        difficulty: score_factors(&DifficultyInputs {
            n_planets: 1,
            snr_value: f64::INFINITY,
            n_res: 0,
            coverage_ratio: f64::INFINITY,
            n_obs: rows.len(),
            sigma_gp_ms: None,
        }),
        tier: Tier::Easy,
    };
    bundle.difficulty = score_difficulty(&bundle)?;
    bundle.tier = assign_tier(i64::from(bundle.difficulty.d_total))?;
    Ok(bundle)
}
