//! White, jitter and quasi-periodic correlated noise.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coherence length of the quasi-periodic kernel, in rotation periods.
pub const GP_DECAY_ROTATIONS: f64 = 3.0;
/// Harmonic complexity of the quasi-periodic kernel.
pub const GP_HARMONIC_GAMMA: f64 = 2.0;

const NUGGET_FRACTION: f64 = 1e-10;
const NUGGET_RETRIES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpSpec {
    pub sigma_gp_ms: f64,
    pub p_rot_days: f64,
}

/// Noise configuration of one task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma_w_ms: f64,
    #[serde(default)]
    pub jitter_ms: f64,
    #[serde(default)]
    pub gp: Option<GpSpec>,
    /// Whether the reported error bars include the jitter term.
    #[serde(default = "default_true")]
    pub sigmas_include_jitter: bool,
}

fn default_true() -> bool {
    true
}

impl NoiseSpec {
    pub fn white(sigma_w_ms: f64) -> Self {
        Self {
            sigma_w_ms,
            jitter_ms: 0.0,
            gp: None,
            sigmas_include_jitter: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_w_ms > 0.0) {
            return Err(Error::InvalidArgument("sigma_w_ms must be positive".into()));
        }
        if !(self.jitter_ms >= 0.0) {
            return Err(Error::InvalidArgument("jitter_ms must be non-negative".into()));
        }
        if let Some(gp) = self.gp {
            if !(gp.sigma_gp_ms > 0.0 && gp.p_rot_days > 0.0) {
                return Err(Error::InvalidArgument(
                    "GP amplitude and rotation period must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn sigma_gp(&self) -> f64 {
        self.gp.map_or(0.0, |g| g.sigma_gp_ms)
    }

    /// Error bar shown to agents for a point with instrumental sigma `sigma`.
    pub fn reported_sigma(&self, sigma: f64) -> f64 {
        if self.sigmas_include_jitter {
            sigma.hypot(self.jitter_ms)
        } else {
            sigma
        }
    }
}

/// Quasi-periodic rotation kernel evaluated at lag `tau`.
pub fn quasi_periodic_kernel(tau: f64, gp: &GpSpec) -> f64 {
    let decay = GP_DECAY_ROTATIONS * gp.p_rot_days;
    let s = (std::f64::consts::PI * tau / gp.p_rot_days).sin();
    gp.sigma_gp_ms.powi(2)
        * (-tau * tau / (2.0 * decay * decay)).exp()
        * (-GP_HARMONIC_GAMMA * s * s).exp()
}

/// Symmetric covariance matrix of the correlated noise component, (m/s)^2.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix(pub DMatrix<f64>);

impl CovarianceMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Lower Cholesky factor of `self + nugget * I`, escalating the nugget.
    pub fn cholesky_with_nugget(&self, base_nugget: f64) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut nugget = base_nugget;
        for _ in 0..=NUGGET_RETRIES {
            let jittered = &self.0 + DMatrix::<f64>::identity(n, n) * nugget;
            if let Some(chol) = jittered.cholesky() {
                return Ok(chol.l());
            }
            nugget *= 10.0;
        }
        Err(Error::DegenerateCovariance)
    }
}

/// Builds the GP covariance for `times`; all zeros when `spec` has no GP.
pub fn build_covariance(times: &[f64], spec: &NoiseSpec) -> Result<CovarianceMatrix> {
    if times.is_empty() || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument(
            "covariance needs a non-empty set of finite times".into(),
        ));
    }
    let n = times.len();
    let Some(gp) = spec.gp else {
        return Ok(CovarianceMatrix(DMatrix::zeros(n, n)));
    };
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = gp.sigma_gp_ms * gp.sigma_gp_ms;
        for j in 0..i {
            let k = quasi_periodic_kernel((times[i] - times[j]).abs(), &gp);
            m[(i, j)] = k;
            m[(j, i)] = k;
        }
    }
    Ok(CovarianceMatrix(m))
}

/// Draws one noise realization.
///
/// White noise `N(0, sigma_k^2 + jitter^2)` is drawn first, in time order, then
/// the correlated component from the same generator. Both depend only on the
/// multiset of `(time, sigma)` pairs, not on their order in the input.
pub fn sample_noise<R: Rng + ?Sized>(
    rng: &mut R,
    times: &[f64],
    sigmas: &[f64],
    spec: &NoiseSpec,
) -> Result<Vec<f64>> {
    if sigmas.len() != times.len() {
        return Err(Error::InvalidArgument(format!(
            "{} sigmas for {} times",
            sigmas.len(),
            times.len()
        )));
    }
    if sigmas.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidArgument("sigmas must be positive".into()));
    }
    let n = times.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(sigmas[a].total_cmp(&sigmas[b])));

    let mut eps = vec![0.0; n];
    for &k in &order {
        let z: f64 = rng.sample(StandardNormal);
        eps[k] = z * sigmas[k].hypot(spec.jitter_ms);
    }

    if let Some(gp) = spec.gp {
        let sorted_times: Vec<f64> = order.iter().map(|&k| times[k]).collect();
        let cov = build_covariance(&sorted_times, spec)?;
        let l = cov.cholesky_with_nugget(NUGGET_FRACTION * gp.sigma_gp_ms * gp.sigma_gp_ms)?;
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let correlated = l * z;
        for (slot, &k) in order.iter().enumerate() {
            eps[k] += correlated[slot];
        }
    }
    Ok(eps)
}
