//! Closed forms for choosing and correcting the exploration constant.

use crate::error::{Error, Result};

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta {delta} must lie in (0, 1)")));
    }
    Ok(())
}

fn check_sizes(num_states: usize, num_actions: usize, m: u64) -> Result<()> {
    if num_states == 0 || num_actions == 0 || m == 0 {
        return Err(Error::Domain(format!(
            "sizes must be positive (states {num_states}, actions {num_actions}, m {m})"
        )));
    }
    Ok(())
}

/// `beta = (1 / (1 - gamma)) sqrt(ln(2 |S| |A| m / delta) / 2)`, the PAC-MDP
/// exploration constant of MBIE-EB.
pub fn theorem1_beta(num_states: usize, num_actions: usize, m: u64, delta: f64, gamma: f64) -> Result<f64> {
    check_sizes(num_states, num_actions, m)?;
    check_delta(delta)?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidDiscount(gamma));
    }
    let sam = (num_states * num_actions) as f64 * m as f64;
    Ok(((2.0 * sam / delta).ln() / 2.0).sqrt() / (1.0 - gamma))
}

/// `beta' = beta * b * sqrt(d)`: the constant that restores the guarantee when
/// pseudo-counts may overshoot empirical counts by `b^2 d`.
pub fn corrected_beta(beta: f64, b: f64, d: f64) -> Result<f64> {
    if !(b > 0.0 && d > 0.0) {
        return Err(Error::Domain(format!(
            "ratio constants b = {b}, d = {d} must be positive"
        )));
    }
    Ok(beta * b * d.sqrt())
}

/// `b^2 d / (a^2 c)`: worst-case inflation of the sample complexity when the
/// corrected constant is used.
pub fn over_exploration_factor(a: f64, b: f64, c: f64, d: f64) -> Result<f64> {
    if !(a > 0.0 && c > 0.0) {
        return Err(Error::Domain(format!(
            "ratio constants a = {a}, c = {c} must be positive"
        )));
    }
    Ok(b * b * d / (a * a * c))
}

/// `1 - delta/2 - K (delta / (2K))^p` with `K = |S_A| |A| m`: confidence left
/// when the bonus is scaled by `sqrt(p)`.
pub fn under_exploration_confidence(p: f64, delta: f64, num_states: usize, num_actions: usize, m: u64) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Domain(format!("scale p = {p} must be positive")));
    }
    check_sizes(num_states, num_actions, m)?;
    check_delta(delta)?;
    let k = (num_states * num_actions) as f64 * m as f64;
    // K x^p = (delta / 2) x^(p - 1), so p = 1 yields 1 - delta without rounding.
    let q = (delta / (2.0 * k)).powf(p - 1.0);
    Ok(1.0 - delta / 2.0 * (1.0 + q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theorem1_substitution() {
        let beta = theorem1_beta(2, 2, 1, 0.1, 0.9).unwrap();
        assert!((beta - 14.803).abs() < 1e-3, "{beta}");
        let ratio = theorem1_beta(2, 2, 1, 0.1, 0.5).unwrap() / theorem1_beta(2, 2, 1, 0.1, 0.75).unwrap();
        assert!((ratio - 0.5).abs() < 1e-12);
        assert!(theorem1_beta(2, 2, 1, 0.01, 0.9).unwrap() > beta);
        assert!(theorem1_beta(2, 2, 1, 1.0, 0.9).is_err());
        assert!(theorem1_beta(2, 2, 1, 0.1, 1.0).is_err());
    }

    #[test]
    fn correction_factors() {
        assert_eq!(corrected_beta(0.3, 1.0, 1.0).unwrap(), 0.3);
        assert_eq!(corrected_beta(0.3, 2.0, 1.0).unwrap(), 0.6);
        assert!((corrected_beta(0.05, 2.0, 4.0).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(over_exploration_factor(1.0, 1.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(over_exploration_factor(1.0, 2.0, 1.0, 1.0).unwrap(), 4.0);
        assert_eq!(over_exploration_factor(0.5, 1.0, 0.5, 1.0).unwrap(), 8.0);
        assert!(over_exploration_factor(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn confidence_values() {
        for &(delta, s, a, m) in &[(0.1, 2, 2, 1), (0.37, 9, 4, 3), (0.001, 225, 4, 10)] {
            assert_eq!(under_exploration_confidence(1.0, delta, s, a, m).unwrap(), 1.0 - delta);
            assert!(under_exploration_confidence(0.5, delta, s, a, m).unwrap() < 1.0 - delta);
            assert!(under_exploration_confidence(2.0, delta, s, a, m).unwrap() > 1.0 - delta);
        }
        let v = under_exploration_confidence(0.5, 0.1, 2, 2, 1).unwrap();
        let independent = 1.0 - 0.05 - 4.0 * (0.1f64 / 8.0).sqrt();
        assert!((v - independent).abs() < 1e-12 && (v - 0.5028).abs() < 1e-4);
    }
}
