//! Zero-phase Butterworth low-pass smoothing.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Normalized biquad, `a0 = 1`, transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Section {
    b: [f64; 3],
    a: [f64; 2],
}

impl Section {
    /// State that makes a constant input of 1 pass unchanged (DC gain 1).
    fn unit_steady_state(&self) -> [f64; 2] {
        let z2 = self.b[2] - self.a[1];
        let z1 = 1.0 - self.b[0];
        [z1, z2]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + z[0];
            z[0] = self.b[1] * input - self.a[0] * y + z[1];
            z[1] = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }

    fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b[0] + z1 * self.b[1] + z2 * self.b[2]) / (1.0 + z1 * self.a[0] + z2 * self.a[1])
    }
}

/// Digital Butterworth low-pass (bilinear transform with prewarping) as
/// cascaded sections, each with unit DC gain.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    sections: Vec<Section>,
    order: usize,
    cutoff_hz: f64,
    sample_rate_hz: f64,
}

impl Butterworth {
    pub fn lowpass(order: usize, cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("filter_order", "must be at least 1"));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::invalid("sample_rate", format!("{sample_rate_hz} must be positive")));
        }
        if !(cutoff_hz.is_finite() && cutoff_hz > 0.0 && cutoff_hz < sample_rate_hz / 2.0) {
            return Err(Error::invalid(
                "cutoff_hz",
                format!("{cutoff_hz} Hz must lie in (0, {:.3}) Hz (Nyquist)", sample_rate_hz / 2.0),
            ));
        }
        let k = (PI * cutoff_hz / sample_rate_hz).tan();
        let mut sections = Vec::new();
        for i in 0..order / 2 {
            let theta = PI * (2 * i + 1) as f64 / (2 * order) as f64;
            let q = 1.0 / (2.0 * theta.sin());
            let norm = 1.0 / (1.0 + k / q + k * k);
            let b0 = k * k * norm;
            sections.push(Section {
                b: [b0, 2.0 * b0, b0],
                a: [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm],
            });
        }
        if order % 2 == 1 {
            let b0 = k / (1.0 + k);
            sections.push(Section {
                b: [b0, b0, 0.0],
                a: [(k - 1.0) / (k + 1.0), 0.0],
            });
        }
        Ok(Self {
            sections,
            order,
            cutoff_hz,
            sample_rate_hz,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn cutoff_hz(&self) -> f64 {
        self.cutoff_hz
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// One-pass magnitude response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / self.sample_rate_hz;
        self.sections.iter().map(|s| s.response(w)).product::<Complex64>().norm()
    }

    fn pad_len(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }

    /// Causal filtering from rest at the first sample's steady state.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.run_cascade(&mut y);
        y
    }

    fn run_cascade(&self, y: &mut [f64]) {
        let Some(&x0) = y.first() else { return };
        for s in &self.sections {
            let [z1, z2] = s.unit_steady_state();
            s.run(y, [z1 * x0, z2 * x0]);
        }
    }

    /// Forward-backward filtering with odd-extension padding; the
    /// magnitude response is squared and the phase is zero.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = self.pad_len().min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
        self.run_cascade(&mut ext);
        ext.reverse();
        self.run_cascade(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }

    pub fn filtfilt_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        let re = self.filtfilt(&x.iter().map(|v| v.re).collect::<Vec<_>>());
        let im = self.filtfilt(&x.iter().map(|v| v.im).collect::<Vec<_>>());
        re.into_iter().zip(im).map(|(r, i)| Complex64::new(r, i)).collect()
    }
}

/// Zero-phase low-pass of a real series.
pub fn lowpass(trace: &[f64], cutoff_hz: f64, order: usize, sample_rate_hz: f64) -> Result<Vec<f64>> {
    Ok(Butterworth::lowpass(order, cutoff_hz, sample_rate_hz)?.filtfilt(trace))
}

/// Zero-phase low-pass applied to real and imaginary parts separately.
pub fn lowpass_complex(
    trace: &[Complex64],
    cutoff_hz: f64,
    order: usize,
    sample_rate_hz: f64,
) -> Result<Vec<Complex64>> {
    Ok(Butterworth::lowpass(order, cutoff_hz, sample_rate_hz)?.filtfilt_complex(trace))
}
