//! Neyman-Pearson threshold for a zero-mean Gaussian statistic.

use statrs::function::erf::{erfc, erfc_inv};
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use crate::error::{Error, Result};

/// Standard normal tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Inverse of [`q_function`] on (0, 1), polished by Newton steps so the
/// round trip is exact to rounding.
pub fn q_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p_fa", format!("{p} must lie in (0, 1)")));
    }
    let mut x = SQRT_2 * erfc_inv(2.0 * p);
    for _ in 0..3 {
        let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if pdf == 0.0 {
            break;
        }
        x += (q_function(x) - p) / pdf;
    }
    Ok(x)
}

/// Threshold `r* = sqrt(var) · Q^{-1}(p_fa)`.
pub fn np_threshold(var_hat: f64, p_fa: f64) -> Result<f64> {
    if !(var_hat.is_finite() && var_hat > 0.0) {
        return Err(Error::invalid("var_hat", format!("{var_hat} must be positive")));
    }
    Ok(var_hat.sqrt() * q_inverse(p_fa)?)
}

pub fn false_alarm_prob(r_star: f64, var: f64) -> f64 {
    q_function(r_star / var.sqrt())
}

pub fn detection_prob(r_star: f64, var: f64, eta2: f64) -> f64 {
    q_function((r_star - eta2) / var.sqrt())
}

/// A calibrated threshold and the probabilities it implies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NpDecision {
    pub var_hat: f64,
    pub p_fa_target: f64,
    pub r_star: f64,
}

impl NpDecision {
    pub fn new(var_hat: f64, p_fa_target: f64) -> Result<Self> {
        Ok(Self {
            var_hat,
            p_fa_target,
            r_star: np_threshold(var_hat, p_fa_target)?,
        })
    }

    pub fn p_fa_predicted(&self) -> f64 {
        false_alarm_prob(self.r_star, self.var_hat)
    }

    pub fn p_d_predicted(&self, eta2: f64) -> f64 {
        detection_prob(self.r_star, self.var_hat, eta2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Bisection on Q, independent of the closed-form inverse.
    fn bisect_q_inverse(p: f64) -> f64 {
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if q_function(mid) > p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn threshold_examples() {
        assert!(np_threshold(1.0, 0.5).unwrap().abs() < 1e-14);
        assert!((np_threshold(1.0, 1e-3).unwrap() - bisect_q_inverse(1e-3)).abs() < 1e-10);
        assert!((np_threshold(1.0, 1e-3).unwrap() - 3.0902).abs() < 1e-4);
        assert!((np_threshold(4.0, 1e-2).unwrap() - 2.0 * bisect_q_inverse(1e-2)).abs() < 1e-10);
        assert!((np_threshold(4.0, 1e-2).unwrap() - 4.6527).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(np_threshold(0.0, 0.1).is_err());
        assert!(np_threshold(1.0, 0.0).is_err());
        assert!(np_threshold(1.0, 1.0).is_err());
        assert!(q_inverse(f64::NAN).is_err());
    }

    #[test]
    fn probability_examples() {
        assert_eq!(false_alarm_prob(0.0, 3.0), 0.5);
        assert!((false_alarm_prob(3.0902, 1.0) - 1e-3).abs() < 1e-6);
        assert_eq!(detection_prob(2.0, 1.0, 2.0), 0.5);
        assert_eq!(detection_prob(2.0, 1.7, 0.0), false_alarm_prob(2.0, 1.7));
        assert!((detection_prob(1.0, 4.0, 1.0 + 6.0) - 0.998_650_101_968_369_9).abs() < 1e-12);
    }

    #[test]
    fn round_trip_at_reference_targets() {
        for p in [1e-2, 1e-3, 1e-7] {
            for v in [1e-8, 0.3, 1.0, 250.0] {
                let r = np_threshold(v, p).unwrap();
                assert!(((false_alarm_prob(r, v) - p) / p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decision_struct() {
        let d = NpDecision::new(4.0, 0.05).unwrap();
        assert!((d.p_fa_predicted() - 0.05).abs() < 1e-14);
        assert_eq!(d.p_d_predicted(d.r_star), 0.5);
    }

    proptest! {
        #[test]
        fn q_round_trip(log_p in -9.0f64..-0.30103) {
            let p = 10f64.powf(log_p);
            let x = q_inverse(p).unwrap();
            prop_assert!(((q_function(x) - p) / p).abs() <= 1e-12);
            prop_assert!((x - bisect_q_inverse(p)).abs() < 1e-9);
        }

        #[test]
        fn threshold_monotone(p1 in 1e-9f64..0.5, p2 in 1e-9f64..0.5, v in 1e-6f64..1e6) {
            prop_assume!(p1 < p2);
            let (r1, r2) = (np_threshold(v, p1).unwrap(), np_threshold(v, p2).unwrap());
            prop_assert!(r1 > r2);
            prop_assert!(r2 >= 0.0);
        }
    }
}
