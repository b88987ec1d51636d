use crate::error::{Error, Result};

/// Tolerance on `sum == 1` when validating a distribution.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// Mass added to every entry before a smoothed divergence.
pub const SMOOTHING: f64 = 1e-12;

/// Checks that `p` is a non-empty probability vector.
pub fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution("empty distribution".into()));
    }
    if let Some(bad) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidDistribution(format!("entry {bad} outside [0, inf)")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
    }
    Ok(())
}

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::InvalidDistribution(format!(
            "length mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    check_distribution(p)?;
    check_distribution(q)
}

/// Total variation distance `1/2 * sum |p_i - q_i|`.
pub fn tvd(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// TVD between the two-class distributions `(p, 1-p)` and `(q, 1-q)`.
pub fn binary_tvd(p: f64, q: f64) -> f64 {
    (p - q).abs()
}

/// `KL(p || q)` in nats with `0 * ln 0 = 0`.
///
/// Rejects `q_i = 0` where `p_i > 0`; see [`kl_smoothed`].
pub fn kl(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let mut total = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "q[{i}] = 0 where p[{i}] = {pi}; smooth before comparing"
            )));
        }
        total += pi * (pi / qi).ln();
    }
    Ok(total)
}

/// Adds [`SMOOTHING`] to every entry and renormalizes.
pub fn smooth(p: &[f64]) -> Vec<f64> {
    let total = 1.0 + SMOOTHING * p.len() as f64;
    p.iter().map(|v| (v + SMOOTHING) / total).collect()
}

/// `KL(smooth(p) || smooth(q))`, finite for any pair of distributions.
pub fn kl_smoothed(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    kl(&smooth(p), &smooth(q))
}

/// Jensen-Shannon divergence in nats, bounded by `ln 2`.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let m = 0.5 * (pi + qi);
        if pi > 0.0 {
            total += 0.5 * pi * (pi / m).ln();
        }
        if qi > 0.0 {
            total += 0.5 * qi * (qi / m).ln();
        }
    }
    // rounding can leave tiny negative values for identical inputs
    Ok(total.max(0.0))
}
