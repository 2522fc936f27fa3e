//! Keplerian kinematics for radial-velocity modelling.
//!
//! Planets are described by [`PlanetElements`] (period, minimum mass,
//! eccentricity and angles). The mean anomaly at time `t` is
//! `M = l - omega - Omega + 2*pi*(t - t_ref)/P`, with `l` the mean
//! longitude at the reference epoch `t_ref` (the first observation).

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants shared by the generator, the evaluator and the solver.
pub mod constants {
    /// Newtonian constant of gravitation (CODATA 2018), m^3 kg^-1 s^-2.
    pub const G: f64 = 6.674_30e-11;
    /// Nominal solar mass parameter (IAU 2015 B3), m^3 s^-2.
    pub const GM_SUN: f64 = 1.327_124_4e20;
    /// Nominal Jovian mass parameter (IAU 2015 B3), m^3 s^-2.
    pub const GM_JUP: f64 = 1.266_865_3e17;
    /// Solar mass, kg.
    pub const M_SUN: f64 = GM_SUN / G;
    /// Jupiter mass, kg.
    pub const M_JUP: f64 = GM_JUP / G;
    /// Seconds per day.
    pub const DAY: f64 = 86_400.0;
}

const KEPLER_MAX_NEWTON: usize = 50;
const KEPLER_TOL: f64 = 1e-13;

/// Reduces an angle to `[0, 2*pi)`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Signed smallest difference `a - b` on the circle, in `(-pi, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Orbital elements of one planet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanetElements {
    #[serde(rename = "P_days")]
    pub period_days: f64,
    #[serde(rename = "m_sin_i_mjup")]
    pub m_sin_i_mjup: f64,
    #[serde(rename = "e")]
    pub ecc: f64,
    #[serde(rename = "omega_rad")]
    pub omega_rad: f64,
    #[serde(rename = "l_rad")]
    pub mean_longitude_rad: f64,
    #[serde(rename = "Omega_rad", default)]
    pub node_rad: f64,
}

impl PlanetElements {
    /// Builds a planet with all angles reduced to `[0, 2*pi)`.
    pub fn new(
        period_days: f64,
        m_sin_i_mjup: f64,
        ecc: f64,
        omega_rad: f64,
        mean_longitude_rad: f64,
        node_rad: f64,
    ) -> Self {
        Self {
            period_days,
            m_sin_i_mjup,
            ecc,
            omega_rad: wrap_angle(omega_rad),
            mean_longitude_rad: wrap_angle(mean_longitude_rad),
            node_rad: wrap_angle(node_rad),
        }
    }

    /// Builds a planet from its mean anomaly at the reference epoch.
    pub fn from_mean_anomaly(
        period_days: f64,
        m_sin_i_mjup: f64,
        ecc: f64,
        omega_rad: f64,
        node_rad: f64,
        mean_anomaly_at_ref: f64,
    ) -> Self {
        Self::new(
            period_days,
            m_sin_i_mjup,
            ecc,
            omega_rad,
            node_rad + omega_rad + mean_anomaly_at_ref,
            node_rad,
        )
    }

    /// Returns a copy with angles reduced to `[0, 2*pi)`.
    pub fn normalized(mut self) -> Self {
        self.omega_rad = wrap_angle(self.omega_rad);
        self.mean_longitude_rad = wrap_angle(self.mean_longitude_rad);
        self.node_rad = wrap_angle(self.node_rad);
        self
    }

    /// Mean anomaly at the reference epoch.
    pub fn mean_anomaly_at_ref(&self) -> f64 {
        wrap_angle(self.mean_longitude_rad - self.omega_rad - self.node_rad)
    }

    /// Checks the physical invariants of a truth planet (`0 <= e < 1`).
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.period_days,
            self.m_sin_i_mjup,
            self.ecc,
            self.omega_rad,
            self.mean_longitude_rad,
            self.node_rad,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("non-finite planet element".into()));
        }
        if self.period_days <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "period must be positive, got {}",
                self.period_days
            )));
        }
        if self.m_sin_i_mjup <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "minimum mass must be positive, got {}",
                self.m_sin_i_mjup
            )));
        }
        if !(0.0..1.0).contains(&self.ecc) {
            return Err(Error::InvalidArgument(format!(
                "eccentricity must lie in [0, 1), got {}",
                self.ecc
            )));
        }
        Ok(())
    }
}

/// Host star mass and the reference epoch of the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarContext {
    pub star_mass_sun: f64,
    pub t_ref_days: f64,
}

impl StarContext {
    pub fn new(star_mass_sun: f64, t_ref_days: f64) -> Self {
        Self {
            star_mass_sun,
            t_ref_days,
        }
    }
}

/// Mean, eccentric and true anomaly at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnomalyState {
    pub mean: f64,
    pub eccentric: f64,
    pub true_anomaly: f64,
}

impl AnomalyState {
    pub fn from_mean(mean: f64, ecc: f64) -> Result<Self> {
        let eccentric = solve_kepler(mean, ecc)?;
        Ok(Self {
            mean: wrap_angle(mean),
            eccentric,
            true_anomaly: eccentric_to_true(eccentric, ecc),
        })
    }
}

/// Solves Kepler's equation `E - e sin E = M` for the eccentric anomaly.
///
/// `M` is reduced to `[0, 2*pi)` first; the returned `E` lies in the same
/// interval. Newton iteration from `E0 = M + e sin M` is tried first and a
/// bisection on `[0, 2*pi]` takes over if it fails to converge in 50 steps.
pub fn solve_kepler(mean_anomaly: f64, ecc: f64) -> Result<f64> {
    if !mean_anomaly.is_finite() || !ecc.is_finite() {
        return Err(Error::InvalidArgument(
            "Kepler solver needs finite inputs".into(),
        ));
    }
    if !(0.0..1.0).contains(&ecc) {
        return Err(Error::InvalidArgument(format!(
            "Kepler solver needs 0 <= e < 1, got {ecc}"
        )));
    }
    let m = wrap_angle(mean_anomaly);
    if ecc == 0.0 {
        return Ok(m);
    }

    let mut e_anom = m + ecc * m.sin();
    for _ in 0..KEPLER_MAX_NEWTON {
        let f = e_anom - ecc * e_anom.sin() - m;
        let fp = 1.0 - ecc * e_anom.cos();
        let step = f / fp;
        e_anom -= step;
        if step.abs() <= KEPLER_TOL {
            if (0.0..=TAU).contains(&e_anom) {
                let resid = e_anom - ecc * e_anom.sin() - m;
                if resid.abs() <= 1e-12 {
                    return Ok(if e_anom >= TAU { 0.0 } else { e_anom });
                }
            }
            break;
        }
    }
    Ok(kepler_bisection(m, ecc))
}

fn kepler_bisection(m: f64, ecc: f64) -> f64 {
    // f(E) = E - e sin E - M is monotone on [0, 2*pi] with f(0) <= 0 <= f(2*pi)
    let (mut lo, mut hi) = (0.0_f64, TAU);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid - ecc * mid.sin() - m > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON {
            break;
        }
    }
    let e_anom = 0.5 * (lo + hi);
    if e_anom >= TAU {
        0.0
    } else {
        e_anom
    }
}

/// Converts eccentric anomaly to true anomaly, result in `(-pi, pi]`.
pub fn eccentric_to_true(eccentric: f64, ecc: f64) -> f64 {
    let half = 0.5 * eccentric;
    2.0 * ((1.0 + ecc).sqrt() * half.sin()).atan2((1.0 - ecc).sqrt() * half.cos())
}

/// Radial-velocity semi-amplitude in m/s.
///
/// Uses `M_star + m` in the denominator with `sin i = 1`.
pub fn semi_amplitude(planet: &PlanetElements, star: &StarContext) -> Result<f64> {
    semi_amplitude_raw(
        planet.period_days,
        planet.m_sin_i_mjup,
        planet.ecc,
        star.star_mass_sun,
    )
}

fn amplitude_prefactor(period_days: f64, ecc: f64) -> f64 {
    let period_s = period_days * constants::DAY;
    (TAU * constants::G / period_s).cbrt() / (1.0 - ecc * ecc).sqrt()
}

pub(crate) fn semi_amplitude_raw(
    period_days: f64,
    m_sin_i_mjup: f64,
    ecc: f64,
    star_mass_sun: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&ecc) {
        return Err(Error::InvalidArgument(format!(
            "semi-amplitude needs 0 <= e < 1, got {ecc}"
        )));
    }
    if period_days <= 0.0 || star_mass_sun <= 0.0 {
        return Err(Error::InvalidArgument(
            "period and star mass must be positive".into(),
        ));
    }
    let m_p = m_sin_i_mjup * constants::M_JUP;
    let m_s = star_mass_sun * constants::M_SUN;
    Ok(amplitude_prefactor(period_days, ecc) * m_p / (m_s + m_p).powf(2.0 / 3.0))
}

/// Inverse of [`semi_amplitude`]: minimum mass (Jupiter masses) producing `k_ms`.
pub fn min_mass_from_amplitude(
    k_ms: f64,
    period_days: f64,
    ecc: f64,
    star_mass_sun: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&ecc) || k_ms < 0.0 || period_days <= 0.0 || star_mass_sun <= 0.0 {
        return Err(Error::InvalidArgument(
            "cannot invert semi-amplitude for these inputs".into(),
        ));
    }
    let target = k_ms / amplitude_prefactor(period_days, ecc);
    let m_s = star_mass_sun * constants::M_SUN;
    // m = target * (M + m)^(2/3) is a contraction for m << M
    let mut m_p = target * m_s.powf(2.0 / 3.0);
    for _ in 0..100 {
        let next = target * (m_s + m_p).powf(2.0 / 3.0);
        let done = (next - m_p).abs() <= 1e-15 * next.abs();
        m_p = next;
        if done {
            break;
        }
    }
    Ok(m_p / constants::M_JUP)
}

/// Mean anomaly of `planet` at time `t_days` given the reference epoch.
pub fn mean_anomaly_at(planet: &PlanetElements, t_days: f64, t_ref_days: f64) -> f64 {
    wrap_angle(
        planet.mean_longitude_rad - planet.omega_rad - planet.node_rad
            + TAU * (t_days - t_ref_days) / planet.period_days,
    )
}

/// A single-planet RV signal in observable parameters.
///
/// This is the parameterization the fitter and the matcher work in:
/// semi-amplitude instead of mass, mean anomaly at the reference epoch
/// instead of mean longitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keplerian {
    pub period_days: f64,
    pub k_ms: f64,
    pub ecc: f64,
    pub omega_rad: f64,
    pub mean_anomaly_at_ref: f64,
    pub t_ref_days: f64,
}

impl Keplerian {
    pub fn from_planet(planet: &PlanetElements, star: &StarContext) -> Result<Self> {
        Ok(Self {
            period_days: planet.period_days,
            k_ms: semi_amplitude(planet, star)?,
            ecc: planet.ecc,
            omega_rad: planet.omega_rad,
            mean_anomaly_at_ref: planet.mean_anomaly_at_ref(),
            t_ref_days: star.t_ref_days,
        })
    }

    /// Same orbit with a directly supplied semi-amplitude.
    pub fn with_amplitude(mut self, k_ms: f64) -> Self {
        self.k_ms = k_ms;
        self
    }

    /// Converts back to planet elements with `Omega = 0`.
    pub fn to_planet(&self, star_mass_sun: f64) -> Result<PlanetElements> {
        let m = min_mass_from_amplitude(self.k_ms, self.period_days, self.ecc, star_mass_sun)?;
        Ok(PlanetElements::from_mean_anomaly(
            self.period_days,
            m,
            self.ecc,
            self.omega_rad,
            0.0,
            self.mean_anomaly_at_ref,
        ))
    }

    pub fn velocity(&self, t_days: f64) -> Result<f64> {
        let mean =
            self.mean_anomaly_at_ref + TAU * (t_days - self.t_ref_days) / self.period_days;
        let e_anom = solve_kepler(mean, self.ecc)?;
        let nu = eccentric_to_true(e_anom, self.ecc);
        Ok(self.k_ms * ((nu + self.omega_rad).cos() + self.ecc * self.omega_rad.cos()))
    }

    pub fn velocities(&self, times: &[f64]) -> Result<Vec<f64>> {
        times.iter().map(|&t| self.velocity(t)).collect()
    }
}

/// RV contribution of one planet at time `t_days`.
pub fn rv_single(t_days: f64, planet: &PlanetElements, star: &StarContext) -> Result<f64> {
    Keplerian::from_planet(planet, star)?.velocity(t_days)
}

/// Multi-planet RV model with one systemic offset per instrument label.
pub fn rv_model(
    times: &[f64],
    planets: &[PlanetElements],
    star: &StarContext,
    offsets: &BTreeMap<String, f64>,
    labels: &[String],
) -> Result<Vec<f64>> {
    if labels.len() != times.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} times",
            labels.len(),
            times.len()
        )));
    }
    let signals = planets
        .iter()
        .map(|p| Keplerian::from_planet(p, star))
        .collect::<Result<Vec<_>>>()?;
    model_from_signals(times, &signals, offsets, labels)
}

pub(crate) fn model_from_signals(
    times: &[f64],
    signals: &[Keplerian],
    offsets: &BTreeMap<String, f64>,
    labels: &[String],
) -> Result<Vec<f64>> {
    times
        .iter()
        .zip(labels)
        .map(|(&t, label)| {
            let gamma = *offsets
                .get(label)
                .ok_or_else(|| Error::MissingOffset(label.clone()))?;
            let mut v = gamma;
            for s in signals {
                v += s.velocity(t)?;
            }
            Ok(v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sun() -> StarContext {
        StarContext::new(1.0, 0.0)
    }

    #[test]
    fn kepler_fixed_points() {
        assert_eq!(solve_kepler(0.0, 0.7).unwrap(), 0.0);
        assert!((solve_kepler(PI, 0.5).unwrap() - PI).abs() < 1e-12);
    }

    #[test]
    fn kepler_matches_bisection_oracle() {
        // bisection on E - 0.5 sin E = 1 carried to 1e-15
        let e = solve_kepler(1.0, 0.5).unwrap();
        assert!((e - 1.498_701_133_517_848_4).abs() < 1e-12, "{e}");
    }

    #[test]
    fn kepler_rejects_bad_input() {
        assert!(solve_kepler(f64::NAN, 0.1).is_err());
        assert!(solve_kepler(1.0, 1.0).is_err());
        assert!(solve_kepler(f64::INFINITY, 0.1).is_err());
    }

    #[test]
    fn kepler_reduces_mean_anomaly() {
        let a = solve_kepler(1.0 + 4.0 * TAU, 0.3).unwrap();
        let b = solve_kepler(1.0, 0.3).unwrap();
        assert!((a - b).abs() < 1e-10);
        let c = solve_kepler(-0.5, 0.3).unwrap();
        assert!((0.0..TAU).contains(&c));
    }

    #[test]
    fn jupiter_analog_amplitude() {
        // closed form evaluated independently with the same constants:
        // (2 pi G / P)^(1/3) m / (M + m)^(2/3)
        let jup = PlanetElements::new(4332.59, 1.0, 0.0, 0.0, 0.0, 0.0);
        let k = semi_amplitude(&jup, &sun()).unwrap();
        assert!((k - 12.459_079_133_133_13).abs() < 1e-6, "{k}");
    }

    #[test]
    fn amplitude_eccentricity_ratio() {
        let a = PlanetElements::new(100.0, 0.3, 0.0, 0.0, 0.0, 0.0);
        let b = PlanetElements { ecc: 0.6, ..a };
        let ratio = semi_amplitude(&b, &sun()).unwrap() / semi_amplitude(&a, &sun()).unwrap();
        assert!((ratio - 1.25).abs() < 1e-12);
    }

    #[test]
    fn amplitude_vanishes_with_mass() {
        let a = PlanetElements::new(10.0, 1e-12, 0.0, 0.0, 0.0, 0.0);
        assert!(semi_amplitude(&a, &sun()).unwrap() < 1e-9);
        let bad = PlanetElements { ecc: 1.0, ..a };
        assert!(semi_amplitude(&bad, &sun()).is_err());
    }

    #[test]
    fn amplitude_inverts() {
        for &(p, m, e, ms) in &[(3.0, 0.01, 0.0, 0.8), (250.0, 1.0, 0.7, 1.3), (40.0, 0.2, 0.3, 1.0)] {
            let k = semi_amplitude_raw(p, m, e, ms).unwrap();
            let back = min_mass_from_amplitude(k, p, e, ms).unwrap();
            assert!((back - m).abs() <= 1e-12 * m, "{back} vs {m}");
        }
    }

    #[test]
    fn mean_anomaly_examples() {
        let p = PlanetElements::new(12.0, 0.1, 0.1, 0.4, 0.4, 0.0);
        assert!(mean_anomaly_at(&p, 5.0, 5.0).abs() < 1e-12);
        let m = mean_anomaly_at(&p, 17.0, 5.0);
        assert!(m.abs() < 1e-12 || (TAU - m).abs() < 1e-12);

        let q = PlanetElements::new(8.0, 0.1, 0.1, 0.5, 2.0, 0.0);
        let m = mean_anomaly_at(&q, 2.0, 0.0);
        assert!((m - 3.070_796_326_794_896_6).abs() < 1e-12);
    }

    #[test]
    fn circular_orbit_is_pure_sinusoid() {
        let p = PlanetElements::new(10.0, 0.5, 0.0, 1.1, 0.3, 0.0);
        let k = semi_amplitude(&p, &sun()).unwrap();
        for i in 0..200 {
            let t = i as f64 * 0.137;
            let v = rv_single(t, &p, &sun()).unwrap();
            let expected = k * (mean_anomaly_at(&p, t, 0.0) + p.omega_rad).cos();
            assert!((v - expected).abs() < 1e-9);
        }
    }

    /// Slow re-implementation: solves Kepler's equation by plain bisection and
    /// evaluates the RV formula from scratch.
    fn slow_rv(t: f64, p: f64, k: f64, e: f64, w: f64, m0: f64) -> f64 {
        let m = (m0 + 2.0 * PI * t / p).rem_euclid(2.0 * PI);
        let (mut lo, mut hi) = (0.0, 2.0 * PI);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid - e * mid.sin() > m {
                hi = mid
            } else {
                lo = mid
            }
        }
        let ea = 0.5 * (lo + hi);
        let nu = 2.0 * (((1.0 + e) / (1.0 - e)).sqrt() * (ea / 2.0).tan()).atan();
        k * ((nu + w).cos() + e * w.cos())
    }

    #[test]
    fn eccentric_orbit_matches_slow_oracle() {
        let star = sun();
        let p = PlanetElements::from_mean_anomaly(17.3, 0.4, 0.3, 2.2, 0.0, 0.9);
        let k = semi_amplitude(&p, &star).unwrap();
        for i in 0..1000 {
            let t = i as f64 * 0.0731;
            let fast = rv_single(t, &p, &star).unwrap();
            let slow = slow_rv(t, 17.3, k, 0.3, p.omega_rad, 0.9);
            assert!((fast - slow).abs() < 1e-9, "t={t}: {fast} vs {slow}");
        }
    }

    #[test]
    fn rv_bounded_by_amplitude() {
        let star = sun();
        let p = PlanetElements::new(5.0, 0.9, 0.75, 0.3, 1.0, 0.0);
        let k = semi_amplitude(&p, &star).unwrap();
        let max = (0..5000)
            .map(|i| rv_single(i as f64 * 0.001, &p, &star).unwrap().abs())
            .fold(0.0, f64::max);
        assert!(max <= k * (1.0 + p.ecc) + 1e-9);
    }

    #[test]
    fn amplitude_consistency_for_circular_orbit() {
        let star = sun();
        let p = PlanetElements::new(7.0, 0.2, 0.0, 0.0, 0.4, 0.0);
        let k = semi_amplitude(&p, &star).unwrap();
        let vs: Vec<f64> = (0..100_000)
            .map(|i| rv_single(7.0 * i as f64 / 100_000.0, &p, &star).unwrap())
            .collect();
        let max = vs.iter().cloned().fold(f64::MIN, f64::max);
        let min = vs.iter().cloned().fold(f64::MAX, f64::min);
        assert!((0.5 * (max - min) / k - 1.0).abs() < 1e-6);
    }

    #[test]
    fn model_with_no_planets_is_offset() {
        let times = vec![0.0, 1.0, 2.5];
        let labels = vec!["inst_A".to_string(); 3];
        let offsets = BTreeMap::from([("inst_A".to_string(), 3.2)]);
        let v = rv_model(&times, &[], &sun(), &offsets, &labels).unwrap();
        assert_eq!(v, vec![3.2; 3]);
    }

    #[test]
    fn model_reports_missing_offset() {
        let labels = vec!["inst_A".to_string(), "inst_B".to_string()];
        let offsets = BTreeMap::from([("inst_A".to_string(), 0.0)]);
        let err = rv_model(&[0.0, 1.0], &[], &sun(), &offsets, &labels).unwrap_err();
        assert!(matches!(err, Error::MissingOffset(l) if l == "inst_B"));
    }

    #[test]
    fn model_is_superposition() {
        let star = StarContext::new(0.9, 3.0);
        let planets = [
            PlanetElements::new(4.1, 0.3, 0.1, 0.2, 1.0, 0.0),
            PlanetElements::new(13.7, 0.7, 0.4, 4.0, 2.0, 0.0),
            PlanetElements::new(51.0, 0.05, 0.6, 5.5, 6.0, 0.3),
        ];
        let times: Vec<f64> = (0..500).map(|i| 3.0 + i as f64 * 0.29).collect();
        let labels: Vec<String> = (0..500)
            .map(|i| if i % 3 == 0 { "inst_B" } else { "inst_A" }.to_string())
            .collect();
        let offsets =
            BTreeMap::from([("inst_A".to_string(), -1.5), ("inst_B".to_string(), 7.0)]);
        let v = rv_model(&times, &planets, &star, &offsets, &labels).unwrap();
        for (k, &t) in times.iter().enumerate() {
            let mut acc = offsets[&labels[k]];
            for p in &planets {
                acc += rv_single(t, p, &star).unwrap();
            }
            assert!((v[k] - acc).abs() < 1e-9);
        }
    }

    #[test]
    fn kepler_residual_random_sweep() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100_000 {
            let m: f64 = rng.random_range(-20.0..20.0);
            let e: f64 = rng.random_range(0.0..=0.95);
            let big_e = solve_kepler(m, e).unwrap();
            let resid = big_e - e * big_e.sin() - wrap_angle(m);
            assert!(resid.abs() <= 1e-10, "M={m} e={e} resid={resid}");
        }
    }

    proptest! {
        #[test]
        fn phase_round_trip(w in 0.0..TAU, node in 0.0..TAU, m0 in 0.0..TAU, p in 0.6..400.0) {
            let planet = PlanetElements::from_mean_anomaly(p, 0.1, 0.2, w, node, m0);
            let back = mean_anomaly_at(&planet, 11.0, 11.0);
            prop_assert!(angle_diff(back, m0).abs() < 1e-9);
        }

        #[test]
        fn velocity_is_periodic(t in -500.0..500.0f64, p in 0.6..300.0f64, e in 0.0..0.9f64, w in 0.0..TAU, l in 0.0..TAU) {
            let star = StarContext::new(1.0, 0.0);
            let planet = PlanetElements::new(p, 0.3, e, w, l, 0.0);
            let a = rv_single(t, &planet, &star).unwrap();
            let b = rv_single(t + p, &planet, &star).unwrap();
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }
}
