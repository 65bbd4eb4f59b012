/// Sample moments of a data set.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl Moments {
    /// Two-pass estimate; fewer than two values yields zero spread.
    pub fn from_slice(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self::default();
        }
        let nf = n as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for x in xs {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
        let (skewness, excess_kurtosis) = if m2 > 0.0 {
            (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
        } else {
            (0.0, 0.0)
        };
        Self {
            count: n,
            mean,
            variance: if n > 1 { m2 * nf / (nf - 1.0) } else { 0.0 },
            skewness,
            excess_kurtosis,
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance / self.count.max(1) as f64).sqrt()
    }
}

/// Standard deviation of an empirical rate with success probability `p`
/// over `n` independent draws.
pub fn binomial_std(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_moments() {
        let m = Moments::from_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.variance - 5.0 / 3.0).abs() < 1e-15);
        assert!(m.skewness.abs() < 1e-15);
        // Uniform-like four points: kurtosis 1.64 -> excess -1.36.
        assert!((m.excess_kurtosis + 1.36).abs() < 1e-12);
        assert_eq!(Moments::from_slice(&[]).count, 0);
        assert_eq!(Moments::from_slice(&[7.0]).variance, 0.0);
        assert!((binomial_std(0.5, 100) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn skewed_sample() {
        let m = Moments::from_slice(&[0.0, 0.0, 0.0, 10.0]);
        assert!(m.skewness > 1.0);
    }
}
