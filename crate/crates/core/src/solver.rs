//! Classical baseline: periodogram search, circular initialization,
//! multi-start Keplerian least squares and greedy BIC-gated planet addition.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{self, Submission, MAX_SUBMITTED_ECCENTRICITY, MIN_SUBMITTED_PERIOD_DAYS};
use crate::orbit::{wrap_angle, Keplerian, PlanetElements};
use crate::stats::{linspace, rms};
use crate::task::RvDataset;

pub const DEFAULT_N_FREQ: usize = 40_000;
pub const DEFAULT_F_MAX: f64 = 2.0;
/// Maximum period searched or fitted, in units of the baseline.
pub const PERIOD_BASELINE_FACTOR: f64 = 3.0;

const START_ECCENTRICITIES: [f64; 4] = [0.0, 0.2, 0.4, 0.6];
const START_OMEGAS: [f64; 4] = [0.0, 0.5 * PI, PI, 1.5 * PI];
const MIN_OBSERVATIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub period_days: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Periodogram {
    pub frequencies: Vec<f64>,
    pub powers: Vec<f64>,
    /// Local maxima, highest first.
    pub peaks: Vec<Peak>,
}

impl Periodogram {
    pub fn best(&self) -> Option<Peak> {
        self.peaks.first().copied()
    }
}

/// Default frequency range for a baseline: `[1 / (3 T), 2]` cycles per day.
pub fn default_frequency_range(baseline_days: f64) -> (f64, f64) {
    (1.0 / (PERIOD_BASELINE_FACTOR * baseline_days), DEFAULT_F_MAX)
}

/// Generalized (weighted, floating-mean) Lomb–Scargle power at one frequency.
pub fn gls_power(times: &[f64], values: &[f64], weights: &[f64], freq: f64) -> f64 {
    let (mut y, mut c, mut s) = (0.0, 0.0, 0.0);
    let (mut yy, mut yc, mut ys, mut cc, mut cs) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&t, &v), &w) in times.iter().zip(values).zip(weights) {
        let (sn, cn) = (TAU * freq * t).sin_cos();
        y += w * v;
        c += w * cn;
        s += w * sn;
        yy += w * v * v;
        yc += w * v * cn;
        ys += w * v * sn;
        cc += w * cn * cn;
        cs += w * cn * sn;
    }
    let ss_hat = 1.0 - cc - s * s;
    let cc_hat = cc - c * c;
    let cs_hat = cs - c * s;
    let yy_hat = yy - y * y;
    let yc_hat = yc - y * c;
    let ys_hat = ys - y * s;
    let d = cc_hat * ss_hat - cs_hat * cs_hat;
    if yy_hat <= 1e-300 * y.abs().max(1.0) || d <= 0.0 {
        return 0.0;
    }
    let p = (ss_hat * yc_hat * yc_hat + cc_hat * ys_hat * ys_hat - 2.0 * cs_hat * yc_hat * ys_hat)
        / (yy_hat * d);
    p.clamp(0.0, 1.0)
}

fn normalized_weights(sigmas: &[f64]) -> Vec<f64> {
    let w: Vec<f64> = sigmas.iter().map(|s| 1.0 / (s * s)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Periodogram of arbitrary values sampled at `times` with uncertainties `sigmas`.
pub fn gls_periodogram_values(
    times: &[f64],
    values: &[f64],
    sigmas: &[f64],
    f_min: f64,
    f_max: f64,
    n_freq: usize,
) -> Result<Periodogram> {
    if times.len() < MIN_OBSERVATIONS {
        return Err(Error::InsufficientData(format!(
            "periodogram needs at least {MIN_OBSERVATIONS} observations, got {}",
            times.len()
        )));
    }
    if n_freq < 2 || !(f_min > 0.0 && f_min < f_max) {
        return Err(Error::InvalidArgument(
            "periodogram needs n_freq >= 2 and 0 < f_min < f_max".into(),
        ));
    }
    let t0 = times[0];
    let shifted: Vec<f64> = times.iter().map(|t| t - t0).collect();
    let w = normalized_weights(sigmas);
    let frequencies = linspace(f_min, f_max, n_freq);
    let powers: Vec<f64> = frequencies
        .iter()
        .map(|&f| gls_power(&shifted, values, &w, f))
        .collect();
    let mut peaks: Vec<Peak> = (0..n_freq)
        .filter(|&i| {
            let left = i == 0 || powers[i] > powers[i - 1];
            let right = i + 1 == n_freq || powers[i] >= powers[i + 1];
            left && right && powers[i] > 0.0
        })
        .map(|i| Peak {
            period_days: 1.0 / frequencies[i],
            power: powers[i],
        })
        .collect();
    peaks.sort_by(|a, b| b.power.total_cmp(&a.power).then(a.period_days.total_cmp(&b.period_days)));
    peaks.truncate(64);
    Ok(Periodogram {
        frequencies,
        powers,
        peaks,
    })
}

/// Periodogram of the dataset velocities.
pub fn gls_periodogram(dataset: &RvDataset, f_min: f64, f_max: f64, n_freq: usize) -> Result<Periodogram> {
    gls_periodogram_values(
        &dataset.times_days,
        &dataset.rvs_ms,
        &dataset.sigmas_ms,
        f_min,
        f_max,
        n_freq,
    )
}

/// Weighted linear least squares; returns coefficients of `design * x ≈ y`.
fn weighted_lstsq(design: &DMatrix<f64>, y: &[f64], sigmas: &[f64]) -> Result<DVector<f64>> {
    let (n, p) = design.shape();
    if n < p {
        return Err(Error::DegenerateFit(format!(
            "{n} observations for {p} linear parameters"
        )));
    }
    let mut a = design.clone();
    let mut b = DVector::from_column_slice(y);
    for i in 0..n {
        let inv = 1.0 / sigmas[i];
        a.row_mut(i).scale_mut(inv);
        b[i] *= inv;
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) || svd.singular_values.min() <= smax * 1e-10 {
        return Err(Error::DegenerateFit("singular design matrix".into()));
    }
    svd.solve(&b, 0.0)
        .map_err(|e| Error::DegenerateFit(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineFit {
    pub period_days: f64,
    pub amplitude_ms: f64,
    /// Phase `phi` of `A cos(2 pi (t - t_ref) / P - phi)`.
    pub phase_rad: f64,
    pub offsets: BTreeMap<String, f64>,
    pub rms_ms: f64,
}

impl SineFit {
    /// The circular Keplerian producing the same curve.
    pub fn as_keplerian(&self, t_ref_days: f64) -> Keplerian {
        Keplerian {
            period_days: self.period_days,
            k_ms: self.amplitude_ms,
            ecc: 0.0,
            omega_rad: 0.0,
            mean_anomaly_at_ref: wrap_angle(-self.phase_rad),
            t_ref_days,
        }
    }
}

/// Closed-form fit of one sinusoid plus per-instrument constants at fixed `P`.
pub fn fit_one_sine(dataset: &RvDataset, period_days: f64) -> Result<SineFit> {
    fit_sine_to(dataset, &dataset.rvs_ms, period_days)
}

fn fit_sine_to(dataset: &RvDataset, values: &[f64], period_days: f64) -> Result<SineFit> {
    if !(period_days > 0.0) {
        return Err(Error::InvalidArgument("period must be positive".into()));
    }
    let instruments = dataset.instruments();
    let n = dataset.len();
    let p = 2 + instruments.len();
    let mut design = DMatrix::zeros(n, p);
    for (i, (&t, label)) in dataset.times_days.iter().zip(&dataset.labels).enumerate() {
        let (s, c) = (TAU * (t - dataset.t_ref_days) / period_days).sin_cos();
        design[(i, 0)] = c;
        design[(i, 1)] = s;
        let j = instruments.binary_search(label).expect("label from dataset");
        design[(i, 2 + j)] = 1.0;
    }
    let x = weighted_lstsq(&design, values, &dataset.sigmas_ms)?;
    let fitted = &design * &x;
    let offsets = instruments
        .iter()
        .enumerate()
        .map(|(j, l)| (l.clone(), x[2 + j]))
        .collect();
    Ok(SineFit {
        period_days,
        amplitude_ms: x[0].hypot(x[1]),
        phase_rad: x[1].atan2(x[0]),
        offsets,
        rms_ms: rms(values.iter().zip(fitted.iter()).map(|(y, m)| y - m)),
    })
}

/// Knobs of the nonlinear fitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub step_tol: f64,
    pub cost_tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tol: 1e-8,
            step_tol: 1e-10,
            cost_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub planets: Vec<PlanetElements>,
    #[serde(skip)]
    pub signals: Vec<Keplerian>,
    pub offsets: BTreeMap<String, f64>,
    pub rms_ms: f64,
    pub chi2: f64,
    pub bic: f64,
    pub n_starts_converged: usize,
    /// Per planet: whether the period sits on a search boundary.
    pub period_at_bound: Vec<bool>,
}

impl FitResult {
    pub fn to_submission(&self) -> Submission {
        Submission {
            planets: self.planets.clone(),
            offsets: Some(self.offsets.clone()),
        }
    }
}

/// Flat parameter vector: per planet `(P, K, sqrt(e) cos w, sqrt(e) sin w, M0 + w)`,
/// then one offset per instrument.
struct Problem<'a> {
    ds: &'a RvDataset,
    inst_index: Vec<usize>,
    n_inst: usize,
    p_max: f64,
}

const PER_PLANET: usize = 5;

impl<'a> Problem<'a> {
    fn new(ds: &'a RvDataset) -> Self {
        let instruments = ds.instruments();
        let inst_index = ds
            .labels
            .iter()
            .map(|l| instruments.binary_search(l).expect("label from dataset"))
            .collect();
        Self {
            ds,
            inst_index,
            n_inst: instruments.len(),
            p_max: PERIOD_BASELINE_FACTOR * ds.baseline_days(),
        }
    }

    fn n_planets(&self, theta: &[f64]) -> usize {
        (theta.len() - self.n_inst) / PER_PLANET
    }

    fn signal(&self, block: &[f64]) -> Keplerian {
        let (h, k) = (block[2], block[3]);
        let ecc = (h * h + k * k).min(MAX_SUBMITTED_ECCENTRICITY);
        let omega = if ecc > 0.0 { k.atan2(h) } else { 0.0 };
        Keplerian {
            period_days: block[0],
            k_ms: block[1],
            ecc,
            omega_rad: wrap_angle(omega),
            mean_anomaly_at_ref: wrap_angle(block[4] - omega),
            t_ref_days: self.ds.t_ref_days,
        }
    }

    fn block(kep: &Keplerian) -> [f64; PER_PLANET] {
        let se = kep.ecc.sqrt();
        [
            kep.period_days,
            kep.k_ms,
            se * kep.omega_rad.cos(),
            se * kep.omega_rad.sin(),
            kep.mean_anomaly_at_ref + kep.omega_rad,
        ]
    }

    fn planet_curve(&self, block: &[f64]) -> Vec<f64> {
        let sig = self.signal(block);
        self.ds
            .times_days
            .iter()
            .map(|&t| sig.velocity(t).unwrap_or(f64::NAN))
            .collect()
    }

    /// Keeps the parameters inside the admissible region.
    fn project(&self, theta: &mut [f64]) {
        let np = self.n_planets(theta);
        for b in theta[..np * PER_PLANET].chunks_mut(PER_PLANET) {
            b[0] = b[0].clamp(MIN_SUBMITTED_PERIOD_DAYS * (1.0 + 1e-9), self.p_max);
            if b[1] < 0.0 {
                b[1] = -b[1];
                b[2] = -b[2];
                b[3] = -b[3];
                b[4] += PI;
            }
            let e = b[2] * b[2] + b[3] * b[3];
            if e > MAX_SUBMITTED_ECCENTRICITY {
                let f = (MAX_SUBMITTED_ECCENTRICITY / e).sqrt();
                b[2] *= f;
                b[3] *= f;
            }
            b[4] = wrap_angle(b[4]);
        }
    }

    /// Period parameters sitting on a bound with the descent direction pointing outward.
    fn pinned(&self, theta: &[f64], g: &DVector<f64>) -> Vec<usize> {
        let lo = MIN_SUBMITTED_PERIOD_DAYS * (1.0 + 1e-9);
        (0..self.n_planets(theta))
            .map(|j| j * PER_PLANET)
            .filter(|&i| (theta[i] >= self.p_max && g[i] > 0.0) || (theta[i] <= lo && g[i] < 0.0))
            .collect()
    }

    fn residuals(&self, curves: &[Vec<f64>], theta: &[f64]) -> DVector<f64> {
        let np = curves.len();
        let offsets = &theta[np * PER_PLANET..];
        DVector::from_iterator(
            self.ds.len(),
            (0..self.ds.len()).map(|i| {
                let model: f64 = curves.iter().map(|c| c[i]).sum::<f64>() + offsets[self.inst_index[i]];
                (self.ds.rvs_ms[i] - model) / self.ds.sigmas_ms[i]
            }),
        )
    }

    fn curves(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        let np = self.n_planets(theta);
        (0..np)
            .map(|j| self.planet_curve(&theta[j * PER_PLANET..(j + 1) * PER_PLANET]))
            .collect()
    }

    /// Jacobian of the model (not the residual), scaled by 1/sigma.
    fn jacobian(&self, theta: &[f64], curves: &[Vec<f64>]) -> DMatrix<f64> {
        let n = self.ds.len();
        let np = curves.len();
        let mut jac = DMatrix::zeros(n, theta.len());
        for j in 0..np {
            let base = j * PER_PLANET;
            for q in 0..PER_PLANET {
                let mut block: [f64; PER_PLANET] = theta[base..base + PER_PLANET].try_into().unwrap();
                let h = match q {
                    0 => 1e-7 * block[0] * (block[0] / self.ds.baseline_days().max(1e-3)).min(1.0),
                    1 => 1e-7 * block[1].abs().max(1e-3),
                    _ => 1e-7,
                };
                block[q] += h;
                let perturbed = self.planet_curve(&block);
                for i in 0..n {
                    jac[(i, base + q)] = (perturbed[i] - curves[j][i]) / h / self.ds.sigmas_ms[i];
                }
            }
        }
        for i in 0..n {
            jac[(i, np * PER_PLANET + self.inst_index[i])] = 1.0 / self.ds.sigmas_ms[i];
        }
        jac
    }
}

struct LmOutcome {
    theta: Vec<f64>,
    cost: f64,
    converged: bool,
}

fn levenberg_marquardt(problem: &Problem<'_>, mut theta: Vec<f64>, cfg: &FitConfig) -> LmOutcome {
    problem.project(&mut theta);
    let mut curves = problem.curves(&theta);
    let mut r = problem.residuals(&curves, &theta);
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return LmOutcome {
            theta,
            cost: f64::INFINITY,
            converged: false,
        };
    }
    let mut mu = 1e-3;
    let mut converged = false;
    for _ in 0..cfg.max_iterations {
        let jac = problem.jacobian(&theta, &curves);
        let jt = jac.transpose();
        let mut a = &jt * &jac;
        let mut g = &jt * &r;
        for idx in problem.pinned(&theta, &g) {
            g[idx] = 0.0;
            a.row_mut(idx).fill(0.0);
            a.column_mut(idx).fill(0.0);
            a[(idx, idx)] = 1.0;
        }
        if g.amax() < cfg.gradient_tol {
            converged = true;
            break;
        }
        let mut accepted = false;
        while mu < 1e12 {
            let mut damped = a.clone();
            for d in 0..damped.nrows() {
                damped[(d, d)] += mu * a[(d, d)].max(1e-12);
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&g)) else {
                mu *= 4.0;
                continue;
            };
            let mut trial = theta.clone();
            for (t, s) in trial.iter_mut().zip(step.iter()) {
                *t += s;
            }
            problem.project(&mut trial);
            let trial_curves = problem.curves(&trial);
            let trial_r = problem.residuals(&trial_curves, &trial);
            let trial_cost = trial_r.norm_squared();
            if trial_cost.is_finite() && trial_cost < cost {
                let step_norm = step.norm();
                let theta_norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
                let rel_change = (cost - trial_cost) / cost.max(1e-300);
                theta = trial;
                curves = trial_curves;
                r = trial_r;
                cost = trial_cost;
                mu = (mu / 3.0).max(1e-12);
                accepted = true;
                if step_norm < cfg.step_tol * (theta_norm + cfg.step_tol) || rel_change < cfg.cost_tol {
                    converged = true;
                }
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            // no descent direction at machine precision: a stationary point
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    LmOutcome {
        theta,
        cost,
        converged,
    }
}

fn finish_fit(problem: &Problem<'_>, theta: &[f64], cost: f64, n_converged: usize) -> Result<FitResult> {
    let ds = problem.ds;
    let np = problem.n_planets(theta);
    let signals: Vec<Keplerian> = theta[..np * PER_PLANET]
        .chunks(PER_PLANET)
        .map(|b| problem.signal(b))
        .collect();
    let instruments = ds.instruments();
    let offsets: BTreeMap<String, f64> = instruments
        .iter()
        .cloned()
        .zip(theta[np * PER_PLANET..].iter().copied())
        .collect();
    let planets = signals
        .iter()
        .map(|s| s.to_planet(ds.star_mass_sun))
        .collect::<Result<Vec<_>>>()?;
    let curves = problem.curves(theta);
    let r: Vec<f64> = (0..ds.len())
        .map(|i| {
            let model: f64 = curves.iter().map(|c| c[i]).sum::<f64>() + offsets[&ds.labels[i]];
            ds.rvs_ms[i] - model
        })
        .collect();
    let period_at_bound = signals
        .iter()
        .map(|s| {
            s.period_days >= problem.p_max * (1.0 - 1e-6)
                || s.period_days <= MIN_SUBMITTED_PERIOD_DAYS * (1.0 + 1e-6)
        })
        .collect();
    Ok(FitResult {
        planets,
        signals,
        offsets,
        rms_ms: rms(r.iter().copied()),
        chi2: cost,
        bic: model_bic(ds, cost, np),
        n_starts_converged: n_converged,
        period_at_bound,
    })
}

/// BIC of a model with `n_pl` planets given its chi-square.
fn model_bic(ds: &RvDataset, chi2: f64, n_pl: usize) -> f64 {
    let norm: f64 = ds.sigmas_ms.iter().map(|s| (TAU * s * s).ln()).sum();
    let ln_l = -0.5 * (chi2 + norm);
    evaluator::bic(ln_l, evaluator::n_params(n_pl, ds.instruments().len()), ds.len())
}

/// Offsets-only model: the constant null.
pub fn null_fit(dataset: &RvDataset) -> FitResult {
    let offsets = evaluator::optimal_offsets(dataset, &vec![0.0; dataset.len()]);
    let r: Vec<f64> = dataset
        .rvs_ms
        .iter()
        .zip(&dataset.labels)
        .map(|(y, l)| y - offsets[l])
        .collect();
    let chi2: f64 = r.iter().zip(&dataset.sigmas_ms).map(|(x, s)| (x / s).powi(2)).sum();
    FitResult {
        planets: Vec::new(),
        signals: Vec::new(),
        rms_ms: rms(r.iter().copied()),
        bic: model_bic(dataset, chi2, 0),
        chi2,
        offsets,
        n_starts_converged: 1,
        period_at_bound: Vec::new(),
    }
}

/// Fits `init` plus, optionally, a new planet at `new_period`.
///
/// Existing planets start from `init`; the new planet is started from the
/// circular solution on the current residuals, crossed with a grid of
/// eccentricities and periastron angles. The best converged start wins (ties
/// go to the lowest start index).
pub fn fit_keplerian(
    dataset: &RvDataset,
    init: &[Keplerian],
    new_period: Option<f64>,
    cfg: &FitConfig,
) -> Result<FitResult> {
    let problem = Problem::new(dataset);
    let prior_curve: Vec<f64> = dataset
        .times_days
        .iter()
        .map(|&t| init.iter().map(|s| s.velocity(t).unwrap_or(0.0)).sum())
        .collect();
    let resid: Vec<f64> = dataset.rvs_ms.iter().zip(&prior_curve).map(|(y, c)| y - c).collect();

    let mut prefix: Vec<f64> = init.iter().flat_map(|k| Problem::block(k)).collect();
    let starts: Vec<Vec<f64>> = match new_period {
        None => {
            let offsets = evaluator::optimal_offsets(dataset, &prior_curve);
            prefix.extend(offsets.values());
            vec![prefix]
        }
        Some(p) => {
            let sine = fit_sine_to(dataset, &resid, p)?;
            let circ = sine.as_keplerian(dataset.t_ref_days);
            let lambda = circ.mean_anomaly_at_ref;
            let mut starts = Vec::new();
            for &e in &START_ECCENTRICITIES {
                for &w in &START_OMEGAS {
                    let se = e.sqrt();
                    let mut theta = prefix.clone();
                    theta.extend([p, circ.k_ms.max(1e-6), se * w.cos(), se * w.sin(), lambda]);
                    theta.extend(sine.offsets.values());
                    starts.push(theta);
                }
            }
            starts
        }
    };

    let mut best: Option<LmOutcome> = None;
    let mut n_converged = 0;
    for start in starts {
        let out = levenberg_marquardt(&problem, start, cfg);
        if !out.converged || !out.cost.is_finite() {
            continue;
        }
        n_converged += 1;
        if best.as_ref().is_none_or(|b| out.cost < b.cost) {
            best = Some(out);
        }
    }
    let best = best.ok_or(Error::FitFailure)?;
    finish_fit(&problem, &best.theta, best.cost, n_converged)
}

/// Greedy solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedyConfig {
    pub max_planets: usize,
    /// Minimum BIC decrease required to keep an added planet.
    pub bic_gate: f64,
    pub n_freq: usize,
    pub f_max: f64,
    /// Alias candidates are fitted when their power is at least this fraction
    /// of the top peak.
    pub alias_power_ratio: f64,
    pub fit: FitConfig,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self {
            max_planets: 4,
            bic_gate: 10.0,
            n_freq: DEFAULT_N_FREQ,
            f_max: DEFAULT_F_MAX,
            alias_power_ratio: 0.7,
            fit: FitConfig::default(),
        }
    }
}

/// One step of the greedy loop, kept for fit logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub n_planets: usize,
    pub peak_period_days: f64,
    pub peak_power: f64,
    pub chosen_period_days: f64,
    pub bic_before: f64,
    pub bic_after: f64,
    pub accepted: bool,
    pub period_at_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyOutcome {
    pub submission: Submission,
    pub fit: FitResult,
    pub steps: Vec<GreedyStep>,
}

/// Periods of the one-day alias family around `period`.
pub fn alias_family(period: f64) -> Vec<f64> {
    let f = 1.0 / period;
    let mut out = vec![period];
    for g in [f + 1.0, (f - 1.0).abs()] {
        if g > 0.0 {
            out.push(1.0 / g);
        }
    }
    out.push(period / 2.0);
    out.push(period * 2.0);
    out
}

pub fn greedy_solve(dataset: &RvDataset) -> GreedyOutcome {
    greedy_solve_with(dataset, &GreedyConfig::default())
}

pub fn greedy_solve_with(dataset: &RvDataset, cfg: &GreedyConfig) -> GreedyOutcome {
    let mut current = null_fit(dataset);
    let mut steps = Vec::new();
    let baseline = dataset.baseline_days();
    if dataset.len() < MIN_OBSERVATIONS || !(baseline > 0.0) {
        return GreedyOutcome {
            submission: current.to_submission(),
            fit: current,
            steps,
        };
    }
    let (f_min, _) = default_frequency_range(baseline);
    let p_max = PERIOD_BASELINE_FACTOR * baseline;
    let w = normalized_weights(&dataset.sigmas_ms);
    let shifted: Vec<f64> = dataset.times_days.iter().map(|t| t - dataset.t_ref_days).collect();

    while current.signals.len() < cfg.max_planets {
        let resid = residuals_of(dataset, &current);
        let Ok(pg) = gls_periodogram_values(
            &dataset.times_days,
            &resid,
            &dataset.sigmas_ms,
            f_min,
            cfg.f_max,
            cfg.n_freq,
        ) else {
            break;
        };
        let Some(top) = pg.best() else { break };

        let mut candidates = vec![top.period_days];
        for alias in alias_family(top.period_days).into_iter().skip(1) {
            if alias <= MIN_SUBMITTED_PERIOD_DAYS || alias > p_max {
                continue;
            }
            if gls_power(&shifted, &resid, &w, 1.0 / alias) >= cfg.alias_power_ratio * top.power {
                candidates.push(alias);
            }
        }

        let mut best: Option<(f64, FitResult)> = None;
        for &p in &candidates {
            let fit = match fit_keplerian(dataset, &current.signals, Some(p), &cfg.fit) {
                Ok(f) => f,
                Err(_) => match circular_fallback(dataset, &current, p) {
                    Some(f) => f,
                    None => continue,
                },
            };
            if best.as_ref().is_none_or(|(_, b)| fit.chi2 < b.chi2) {
                best = Some((p, fit));
            }
        }
        let Some((chosen, fit)) = best else { break };
        let accepted = current.bic - fit.bic > cfg.bic_gate;
        steps.push(GreedyStep {
            n_planets: fit.signals.len(),
            peak_period_days: top.period_days,
            peak_power: top.power,
            chosen_period_days: chosen,
            bic_before: current.bic,
            bic_after: fit.bic,
            accepted,
            period_at_bound: fit.period_at_bound.last().copied().unwrap_or(false),
        });
        if !accepted {
            break;
        }
        current = fit;
    }
    GreedyOutcome {
        submission: current.to_submission(),
        fit: current,
        steps,
    }
}

fn residuals_of(dataset: &RvDataset, fit: &FitResult) -> Vec<f64> {
    dataset
        .times_days
        .iter()
        .zip(&dataset.rvs_ms)
        .zip(&dataset.labels)
        .map(|((&t, &y), l)| {
            let model: f64 = fit
                .signals
                .iter()
                .map(|s| s.velocity(t).unwrap_or(0.0))
                .sum::<f64>()
                + fit.offsets[l];
            y - model
        })
        .collect()
}

/// Previous planets held fixed plus a circular planet from the sine fit.
fn circular_fallback(dataset: &RvDataset, current: &FitResult, period: f64) -> Option<FitResult> {
    let problem = Problem::new(dataset);
    let curves_prev: Vec<f64> = dataset
        .times_days
        .iter()
        .map(|&t| current.signals.iter().map(|s| s.velocity(t).unwrap_or(0.0)).sum())
        .collect();
    let resid: Vec<f64> = dataset.rvs_ms.iter().zip(&curves_prev).map(|(y, c)| y - c).collect();
    let sine = fit_sine_to(dataset, &resid, period).ok()?;
    if !(sine.amplitude_ms > 0.0) {
        return None;
    }
    let mut theta: Vec<f64> = current.signals.iter().flat_map(Problem::block).collect();
    theta.extend(Problem::block(&sine.as_keplerian(dataset.t_ref_days)));
    theta.extend(sine.offsets.values());
    problem.project(&mut theta);
    let curves = problem.curves(&theta);
    let cost = problem.residuals(&curves, &theta).norm_squared();
    finish_fit(&problem, &theta, cost, 0).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::instrument_label;

    fn dataset_from(times: Vec<f64>, f: impl Fn(f64) -> f64, sigma: f64) -> RvDataset {
        let n = times.len();
        RvDataset {
            rvs_ms: times.iter().map(|&t| f(t)).collect(),
            sigmas_ms: vec![sigma; n],
            labels: vec![instrument_label(0); n],
            star_mass_sun: 1.0,
            t_ref_days: times[0],
            times_days: times,
        }
    }

    fn irregular_times(n: usize, span: f64) -> Vec<f64> {
        // deterministic quasi-random cadence
        let mut t: Vec<f64> = (0..n)
            .map(|i| span * ((i as f64 * 0.618_033_988_75).fract()))
            .collect();
        t.sort_by(f64::total_cmp);
        t
    }

    #[test]
    fn sinusoid_peak_recovered() {
        let times = irregular_times(80, 120.0);
        let ds = dataset_from(times, |t| 5.0 * (TAU * t / 20.0).sin() + 2.0, 1.0);
        let pg = gls_periodogram(&ds, 1.0 / 360.0, 2.0, 40_000).unwrap();
        let step = (2.0 - 1.0 / 360.0) / 39_999.0;
        assert!((1.0 / pg.best().unwrap().period_days - 1.0 / 20.0).abs() <= step);
        assert!(pg.powers.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn constant_series_has_no_power() {
        let ds = dataset_from(irregular_times(50, 60.0), |_| 3.3, 1.0);
        let pg = gls_periodogram(&ds, 0.01, 2.0, 2000).unwrap();
        assert!(pg.powers.iter().all(|&p| p <= 1e-10));
    }

    #[test]
    fn too_few_points() {
        let ds = dataset_from(vec![0.0, 1.0, 2.0, 3.0], |t| t, 1.0);
        assert!(matches!(gls_periodogram(&ds, 0.1, 1.0, 10), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn long_period_on_sparse_cadence() {
        let times = irregular_times(75, 106.7);
        let ds = dataset_from(times, |t| 20.0 * (TAU * t / 105.0 + 0.4).cos(), 2.0);
        let (fmin, _) = default_frequency_range(ds.baseline_days());
        let pg = gls_periodogram(&ds, fmin, 2.0, 40_000).unwrap();
        let p = pg.best().unwrap().period_days;
        assert!((p / 105.0 - 1.0).abs() < 0.1, "{p}");
    }

    #[test]
    fn sine_fit_exact() {
        let times = irregular_times(40, 50.0);
        let ds = dataset_from(times, |t| 3.0 * (TAU * t / 7.0 - 0.7).cos() + 1.5, 1.0);
        let fit = fit_one_sine(&ds, 7.0).unwrap();
        assert!(fit.rms_ms <= 1e-9);
        assert!((fit.amplitude_ms - 3.0).abs() < 1e-9);
        assert!((fit.phase_rad - 0.7).abs() < 1e-9);
        assert!((fit.offsets[&instrument_label(0)] - 1.5).abs() < 1e-9);
        let wrong = fit_one_sine(&ds, 11.3).unwrap();
        assert!(wrong.rms_ms > 1.5);
    }

    #[test]
    fn sine_fit_degenerate() {
        let ds = dataset_from(vec![0.0, 1.0], |t| t, 1.0);
        assert!(matches!(fit_one_sine(&ds, 3.0), Err(Error::DegenerateFit(_))));
    }

    fn eccentric_truth() -> Keplerian {
        Keplerian {
            period_days: 13.0,
            k_ms: 12.0,
            ecc: 0.5,
            omega_rad: 1.1,
            mean_anomaly_at_ref: 0.4,
            t_ref_days: 0.0,
        }
    }

    #[test]
    fn truth_initialized_fit_is_fixed_point() {
        let truth = eccentric_truth();
        let ds = dataset_from(irregular_times(60, 50.0), |t| truth.velocity(t).unwrap() + 4.0, 1.0);
        let fit = fit_keplerian(&ds, &[truth], None, &FitConfig::default()).unwrap();
        assert!(fit.rms_ms <= 1e-6, "{}", fit.rms_ms);
    }

    #[test]
    fn eccentric_signal_beats_sine() {
        let truth = eccentric_truth();
        let ds = dataset_from(irregular_times(60, 50.0), |t| truth.velocity(t).unwrap(), 1.0);
        let sine = fit_one_sine(&ds, 13.0).unwrap();
        let kep = fit_keplerian(&ds, &[], Some(13.0), &FitConfig::default()).unwrap();
        assert!(kep.rms_ms < sine.rms_ms);
        assert!(kep.rms_ms < 1e-4);
    }

    #[test]
    fn circular_injection_recovered() {
        let ds = dataset_from(irregular_times(70, 90.0), |t| 15.0 * (TAU * t / 23.0 + 2.0).cos(), 1.0);
        let out = greedy_solve(&ds);
        assert_eq!(out.fit.signals.len(), 1);
        let s = out.fit.signals[0];
        assert!((s.period_days / 23.0 - 1.0).abs() < 0.01);
        assert!((s.k_ms / 15.0 - 1.0).abs() < 0.1);
        assert!(out.steps[0].bic_before - out.steps[0].bic_after > 10.0);
    }

    #[test]
    fn noise_only_gives_no_planets() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let times = irregular_times(60, 80.0);
        let noise: Vec<f64> = (0..60).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut ds = dataset_from(times, |_| 0.0, 1.0);
        ds.rvs_ms = noise;
        let out = greedy_solve(&ds);
        assert!(out.submission.planets.is_empty());
    }

    #[test]
    fn bound_flag_at_maximum_period() {
        // a signal far longer than the baseline is pushed to the longest admissible period
        let ds = dataset_from(irregular_times(50, 40.0), |t| 30.0 * (TAU * t / 2000.0 + 1.0).sin(), 0.1);
        let fit = fit_keplerian(&ds, &[], Some(100.0), &FitConfig::default()).unwrap();
        let p_max = PERIOD_BASELINE_FACTOR * ds.baseline_days();
        assert!(fit.signals[0].period_days <= p_max);
        assert_eq!(fit.period_at_bound, vec![fit.signals[0].period_days >= p_max * (1.0 - 1e-6)]);
        assert!(fit.period_at_bound[0]);
    }

    #[test]
    fn alias_family_members() {
        let fam = alias_family(2.0);
        assert_eq!(fam[0], 2.0);
        assert!((fam[1] - 1.0 / 1.5).abs() < 1e-12);
        assert!((fam[2] - 2.0).abs() < 1e-12);
        assert_eq!(fam[3], 1.0);
        assert_eq!(fam[4], 4.0);
    }

    #[test]
    fn greedy_is_deterministic() {
        let ds = dataset_from(irregular_times(50, 60.0), |t| 8.0 * (TAU * t / 9.0).sin(), 1.0);
        assert_eq!(greedy_solve(&ds), greedy_solve(&ds));
    }
}
