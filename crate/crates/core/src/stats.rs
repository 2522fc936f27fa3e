//! Small numeric helpers shared across modules.

/// Median of a non-empty slice (mean of the two central values for even length).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Inverse-variance weighted mean of `values`.
pub fn weighted_mean(values: &[f64], sigmas: &[f64]) -> f64 {
    let (num, den) = values
        .iter()
        .zip(sigmas)
        .fold((0.0, 0.0), |(n, d), (&y, &s)| {
            let w = 1.0 / (s * s);
            (n + w * y, d + w)
        });
    num / den
}

pub fn rms(residuals: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = residuals
        .into_iter()
        .fold((0.0, 0usize), |(s, n), r| (s + r * r, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Evenly spaced grid over `[start, end]` including both endpoints.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / (n - 1) as f64;
            (0..n).map(|i| start + step * i as f64).collect()
        }
    }
}
