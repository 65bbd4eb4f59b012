//! Dual square-wave correlators over one bit interval.

use num_complex::Complex64;

use crate::channel::{GridParams, ResourceGrid, TIME_SLACK};
use crate::error::{Error, Result};
use crate::sequences::{square_wave, FskParams};

/// Sample counts where each reference tone is +1 (`a`) or −1 (`b`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ToneCounts {
    pub a0: usize,
    pub b0: usize,
    pub a1: usize,
    pub b1: usize,
}

impl ToneCounts {
    /// `1/a_i + 1/b_i` for tone `bit`.
    pub fn inv_sum(&self, bit: u8) -> f64 {
        let (a, b) = if bit == 0 { (self.a0, self.b0) } else { (self.a1, self.b1) };
        1.0 / a as f64 + 1.0 / b as f64
    }

    /// Samples in the window (identical for both tones).
    pub fn window_len(&self) -> usize {
        self.a0 + self.b0
    }

    pub fn is_degenerate(&self) -> bool {
        self.a0 == 0 || self.b0 == 0 || self.a1 == 0 || self.b1 == 0
    }

    /// Bias of `|e_i|^2 - |e_j|^2` under noise of variance `sigma2`.
    pub fn imbalance(&self, bit: u8, sigma2: f64) -> f64 {
        sigma2 * (self.inv_sum(bit) - self.inv_sum(1 - bit))
    }

    /// Combiner weight for a code of `code_len` bits.
    pub fn combiner_weight(&self, code_len: usize) -> f64 {
        (self.inv_sum(0) + self.inv_sum(1)) / code_len as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatorOutput {
    pub e0: Complex64,
    pub e1: Complex64,
    pub counts: ToneCounts,
}

impl CorrelatorOutput {
    pub fn get(&self, bit: u8) -> Complex64 {
        if bit == 0 {
            self.e0
        } else {
            self.e1
        }
    }
}

/// Mean over the `+` samples minus mean over the `-` samples.
/// Returns `None` when either set is empty.
pub fn signed_mean_difference(y: &[Complex64], signs: &[i8]) -> Option<(Complex64, usize, usize)> {
    let zero = Complex64::new(0.0, 0.0);
    let (mut plus, mut minus, mut a, mut b) = (zero, zero, 0usize, 0usize);
    for (v, s) in y.iter().zip(signs) {
        if *s > 0 {
            plus += v;
            a += 1;
        } else {
            minus += v;
            b += 1;
        }
    }
    if a == 0 || b == 0 {
        return None;
    }
    Some((plus / a as f64 - minus / b as f64, a, b))
}

/// Correlates samples at arbitrary `times` with both reference tones over
/// `[start, start + T_b)`, references phase-aligned to `start`.
pub fn correlate_samples(
    times: &[f64],
    y: &[Complex64],
    fsk: &FskParams,
    start: f64,
) -> Result<CorrelatorOutput> {
    let end = start + fsk.bit_duration();
    let (mut ys, mut dts) = (Vec::new(), Vec::new());
    for (t, v) in times.iter().zip(y) {
        if *t >= start - TIME_SLACK && *t < end - TIME_SLACK {
            ys.push(*v);
            dts.push(*t - start);
        }
    }
    let signs = |f: f64| dts.iter().map(|&dt| square_wave(f, dt)).collect::<Vec<_>>();
    let r0 = signed_mean_difference(&ys, &signs(fsk.f0_hz()));
    let r1 = signed_mean_difference(&ys, &signs(fsk.f1_hz()));
    match (r0, r1) {
        (Some((e0, a0, b0)), Some((e1, a1, b1))) => Ok(CorrelatorOutput {
            e0,
            e1,
            counts: ToneCounts { a0, b0, a1, b1 },
        }),
        _ => {
            let count = |f: f64| {
                let s = signs(f);
                let a = s.iter().filter(|&&x| x > 0).count();
                (a, s.len() - a)
            };
            let ((a0, b0), (a1, b1)) = (count(fsk.f0_hz()), count(fsk.f1_hz()));
            Err(Error::DegenerateWindow {
                start_s: start,
                a0,
                b0,
                a1,
                b1,
            })
        }
    }
}

/// Correlator outputs of subcarrier `k` for the bit window starting at `start`.
pub fn correlate(grid: &ResourceGrid, fsk: &FskParams, start: f64, k: usize) -> Result<CorrelatorOutput> {
    if start < 0.0 || start + fsk.bit_duration() > grid.duration() {
        return Err(Error::invalid(
            "window_start",
            format!(
                "[{start}, {}) s is outside the {:.6} s capture",
                start + fsk.bit_duration(),
                grid.duration()
            ),
        ));
    }
    let first = grid.params().first_at_or_after(start);
    let last = grid.params().first_at_or_after(start + fsk.bit_duration()).min(grid.len());
    let times: Vec<f64> = (first..last).map(|l| grid.time(l)).collect();
    correlate_samples(&times, &grid.row(k)[first..last], fsk, start)
}

/// Per-component noise variance of a correlator output.
pub fn correlator_noise_var(sigma2: f64, a: usize, b: usize) -> f64 {
    sigma2 / 2.0 * (1.0 / a as f64 + 1.0 / b as f64)
}

/// Unbiased estimate of the reflected path power assuming bit `bit` was
/// sent: `|e_i|^2 - |e_j|^2 - eps`.
pub fn path_power_estimate(out: &CorrelatorOutput, bit: u8, sigma2: f64) -> f64 {
    out.get(bit).norm_sqr() - out.get(1 - bit).norm_sqr() - out.counts.imbalance(bit, sigma2)
}

/// Correlator taps for a window at a fixed position relative to an RS
/// index of given parity, in prefix-sum (boundary) form:
/// `e = Σ coef · P[n + offset]` with `P[i] = Σ_{l<i} y[l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPlan {
    taps: [Vec<(usize, f64)>; 2],
    counts: ToneCounts,
    /// Largest prefix index referenced, relative to `n`.
    reach: usize,
}

impl WindowPlan {
    /// Window starting `delay` seconds after RS instant `parity` (0 or 1).
    pub fn compile(grid: &GridParams, fsk: &FskParams, parity: usize, delay: f64) -> Result<Self> {
        let origin = grid.rs_time(parity);
        let start = origin + delay;
        let first = grid.first_at_or_after(start);
        let last = grid.first_at_or_after(start + fsk.bit_duration());
        let dts: Vec<f64> = (first..last).map(|l| grid.rs_time(l) - start).collect();
        let mut counts = ToneCounts::default();
        let mut taps: [Vec<(usize, f64)>; 2] = [Vec::new(), Vec::new()];
        for bit in 0..2u8 {
            let s: Vec<i8> = dts.iter().map(|&dt| square_wave(fsk.tone_hz(bit), dt)).collect();
            let a = s.iter().filter(|&&x| x > 0).count();
            let b = s.len() - a;
            if bit == 0 {
                counts.a0 = a;
                counts.b0 = b;
            } else {
                counts.a1 = a;
                counts.b1 = b;
            }
            if a == 0 || b == 0 {
                continue;
            }
            let w: Vec<f64> = s
                .iter()
                .map(|&x| if x > 0 { 1.0 / a as f64 } else { -1.0 / b as f64 })
                .collect();
            // Σ w[d] (P[d+1] - P[d]) = Σ (w[d-1] - w[d]) P[d], w[-1] = w[len] = 0.
            let base = first - parity;
            for d in 0..=w.len() {
                let prev = if d == 0 { 0.0 } else { w[d - 1] };
                let cur = if d == w.len() { 0.0 } else { w[d] };
                let c = prev - cur;
                if c != 0.0 {
                    taps[bit as usize].push((base + d, c));
                }
            }
        }
        if counts.is_degenerate() {
            return Err(Error::DegenerateWindow {
                start_s: start,
                a0: counts.a0,
                b0: counts.b0,
                a1: counts.a1,
                b1: counts.b1,
            });
        }
        let reach = last - parity;
        Ok(Self { taps, counts, reach })
    }

    pub fn counts(&self) -> ToneCounts {
        self.counts
    }

    pub fn reach(&self) -> usize {
        self.reach
    }

    /// Outputs for the window anchored at RS index `n` given prefix sums.
    pub fn apply(&self, prefix: &[Complex64], n: usize) -> (Complex64, Complex64) {
        let eval = |taps: &[(usize, f64)]| {
            taps.iter()
                .fold(Complex64::new(0.0, 0.0), |acc, &(d, c)| acc + prefix[n + d] * c)
        };
        (eval(&self.taps[0]), eval(&self.taps[1]))
    }
}

/// Prefix sums of a row after removing its mean (the mean cancels in every
/// correlator and removing it keeps the sums well conditioned).
pub fn centered_prefix(row: &[Complex64]) -> Vec<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    let mean = if row.is_empty() {
        zero
    } else {
        row.iter().sum::<Complex64>() / row.len() as f64
    };
    let mut out = Vec::with_capacity(row.len() + 1);
    let mut acc = zero;
    out.push(acc);
    for v in row {
        acc += v - mean;
        out.push(acc);
    }
    out
}

/// Per-bit-window correlator outputs for every RS start index.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorTrace {
    /// Window start times.
    pub times: Vec<f64>,
    /// `e0[k][n]`, `e1[k][n]`.
    pub e0: Vec<Vec<Complex64>>,
    pub e1: Vec<Vec<Complex64>>,
    pub counts: Vec<ToneCounts>,
}

impl CorrelatorTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn output(&self, k: usize, n: usize) -> CorrelatorOutput {
        CorrelatorOutput {
            e0: self.e0[k][n],
            e1: self.e1[k][n],
            counts: self.counts[n],
        }
    }
}

/// Correlators sliding over RS start indices, one plan per parity.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorBank {
    plans: [WindowPlan; 2],
}

impl CorrelatorBank {
    pub fn new(grid: &GridParams, fsk: &FskParams) -> Result<Self> {
        Ok(Self {
            plans: [
                WindowPlan::compile(grid, fsk, 0, 0.0)?,
                WindowPlan::compile(grid, fsk, 1, 0.0)?,
            ],
        })
    }

    pub fn plan(&self, n: usize) -> &WindowPlan {
        &self.plans[n % 2]
    }

    /// Number of start indices whose window fits in `len` samples.
    pub fn windows(&self, len: usize) -> usize {
        let fits = |n: usize| n + self.plan(n).reach <= len;
        let mut w = (len + 1).saturating_sub(self.plans[0].reach.min(self.plans[1].reach));
        while w > 0 && !(fits(w - 1) && (w < 2 || fits(w - 2))) {
            w -= 1;
        }
        w
    }

    /// Outputs for one subcarrier, as `(e0, e1)` per start index.
    pub fn stream(&self, row: &[Complex64]) -> Vec<(Complex64, Complex64)> {
        let prefix = centered_prefix(row);
        (0..self.windows(row.len()))
            .map(|n| self.plan(n).apply(&prefix, n))
            .collect()
    }

    pub fn trace(&self, grid: &ResourceGrid) -> CorrelatorTrace {
        let w = self.windows(grid.len());
        let mut e0 = Vec::with_capacity(grid.subcarriers());
        let mut e1 = Vec::with_capacity(grid.subcarriers());
        for k in 0..grid.subcarriers() {
            let (a, b): (Vec<_>, Vec<_>) = self.stream(grid.row(k)).into_iter().unzip();
            e0.push(a);
            e1.push(b);
        }
        CorrelatorTrace {
            times: (0..w).map(|n| grid.time(n)).collect(),
            e0,
            e1,
            counts: (0..w).map(|n| self.plan(n).counts).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{synthesize, ChannelCoeffs, NoiseModel, PhaseJitter};
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn fsk() -> FskParams {
        FskParams::new(125.0, 500.0, 1e-3, 32).unwrap()
    }

    fn lte(n_rb: usize) -> GridParams {
        GridParams::new(n_rb, 71.35e-6, [0, 7], 1.0).unwrap()
    }

    #[test]
    fn hand_evaluated_irregular_window() {
        let y = [c(2.0), c(2.0), c(2.0), c(4.0)];
        let (e, a, b) = signed_mean_difference(&y, &[1, 1, -1, -1]).unwrap();
        assert_eq!((a, b), (2, 2));
        assert!((e - c(-1.0)).norm() < 1e-15);
        assert!(signed_mean_difference(&y, &[1, 1, 1, 1]).is_none());
    }

    #[test]
    fn hand_example_through_sample_times() {
        // F0 = 125 Hz: + over [0, 4) ms, - over [4, 8) ms.
        let f = FskParams::new(125.0, 250.0, 8e-3, 1).unwrap();
        let times = [0.0, 1e-3, 4.5e-3, 6e-3];
        let y = [c(2.0), c(2.0), c(2.0), c(4.0)];
        let out = correlate_samples(&times, &y, &f, 0.0).unwrap();
        assert!((out.e0 - c(-1.0)).norm() < 1e-15);
        assert_eq!(out.counts.a0 + out.counts.b0, 4);
    }

    #[test]
    fn degenerate_window_is_reported() {
        let f = FskParams::new(125.0, 250.0, 8e-3, 1).unwrap();
        let err = correlate_samples(&[0.0, 1e-3], &[c(1.0), c(1.0)], &f, 0.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateWindow { b0: 0, .. }));
    }

    #[test]
    fn noise_variance_formula() {
        assert_eq!(correlator_noise_var(2.0, 2, 2), 1.0);
        assert!((correlator_noise_var(1.0, 1, 3) - 2.0 / 3.0).abs() < 1e-15);
        let l = 64;
        let best = (1..l).map(|a| correlator_noise_var(1.0, a, l - a)).fold(f64::MAX, f64::min);
        assert_eq!(best, correlator_noise_var(1.0, l / 2, l / 2));
    }

    #[test]
    fn path_power_examples() {
        let counts = ToneCounts { a0: 2, b0: 2, a1: 4, b1: 4 };
        let zero = CorrelatorOutput { e0: c(0.0), e1: c(0.0), counts };
        assert!((path_power_estimate(&zero, 0, 1.0) + 0.5).abs() < 1e-15);
        let bal = ToneCounts { a0: 3, b0: 3, a1: 3, b1: 3 };
        assert_eq!(bal.imbalance(0, 5.0), 0.0);
        let g = Complex64::new(0.3, 0.4);
        let aligned = CorrelatorOutput { e0: c(0.0), e1: g, counts: bal };
        assert!((path_power_estimate(&aligned, 1, 0.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn combiner_weight_lower_bound() {
        let l = 64;
        let bal = ToneCounts { a0: 32, b0: 32, a1: 32, b1: 32 };
        // Four reciprocal counts of 2/L each.
        assert!((bal.combiner_weight(25) - 8.0 / (l as f64 * 25.0)).abs() < 1e-15);
        for a in 1..l {
            let c = ToneCounts { a0: a, b0: l - a, a1: l - a, b1: a };
            assert!(c.combiner_weight(25) >= 4.0 / (l as f64 * 25.0));
            assert!(c.combiner_weight(25) >= bal.combiner_weight(25) - 1e-15);
        }
    }

    #[test]
    fn lte_windows_hold_65_samples() {
        let bank = CorrelatorBank::new(&lte(1), &fsk()).unwrap();
        for n in 0..2 {
            let c = bank.plan(n).counts();
            assert_eq!(c.window_len(), 65);
            assert_eq!(c.a1 + c.b1, 65);
        }
    }

    #[test]
    fn bank_matches_generic_correlator() {
        let g = lte(1);
        let noise = NoiseModel { sigma2: 1.0, jitter: PhaseJitter::IidUniform, seed: 5 };
        let grid = synthesize(&g, &[], &ChannelCoeffs::flat(4, c(1.0)), &noise, 0.2).unwrap();
        let bank = CorrelatorBank::new(&g, &fsk()).unwrap();
        let trace = bank.trace(&grid);
        assert_eq!(trace.len(), bank.windows(grid.len()));
        assert!(trace.len() > 300);
        for n in [0, 1, 2, 77, trace.len() - 2, trace.len() - 1] {
            for k in 0..4 {
                let direct = correlate(&grid, &fsk(), grid.time(n), k).unwrap();
                let fast = trace.output(k, n);
                assert!((direct.e0 - fast.e0).norm() < 1e-9, "n={n}");
                assert!((direct.e1 - fast.e1).norm() < 1e-9);
                assert_eq!(direct.counts, fast.counts);
            }
        }
        // One more start would run past the capture.
        let n = trace.len();
        assert!(n + bank.plan(n).reach() > grid.len());
    }

    #[test]
    fn delayed_plans_match_generic_correlator() {
        let g = lte(1);
        let noise = NoiseModel { sigma2: 1.0, jitter: PhaseJitter::None, seed: 8 };
        let grid = synthesize(&g, &[], &ChannelCoeffs::flat(4, c(0.0)), &noise, 0.3).unwrap();
        let prefix = centered_prefix(grid.row(2));
        for (parity, delay) in [(0, 0.032), (1, 0.064), (0, 0.0123), (1, 0.2)] {
            let plan = WindowPlan::compile(&g, &fsk(), parity, delay).unwrap();
            let n = parity + 10;
            let (e0, e1) = plan.apply(&prefix, n);
            let direct = correlate(&grid, &fsk(), grid.time(n) + delay, 2).unwrap();
            assert!((direct.e0 - e0).norm() < 1e-9);
            assert!((direct.e1 - e1).norm() < 1e-9);
        }
    }

    #[test]
    fn window_outside_capture_is_rejected() {
        let g = lte(1);
        let grid = ResourceGrid::zeros(g, 100);
        assert!(correlate(&grid, &fsk(), 0.03, 0).is_err());
        assert!(correlate(&grid, &fsk(), -0.001, 0).is_err());
    }

    proptest! {
        #[test]
        fn constant_input_cancels(
            re in -1e3f64..1e3, im in -1e3f64..1e3,
            raw in prop::collection::vec(0.0f64..0.032, 4..80),
        ) {
            let f = fsk();
            let mut times = raw;
            times.sort_by(f64::total_cmp);
            let y = vec![Complex64::new(re, im); times.len()];
            if let Ok(out) = correlate_samples(&times, &y, &f, 0.0) {
                let scale = Complex64::new(re, im).norm().max(1e-300);
                prop_assert!(out.e0.norm() <= 1e-12 * scale);
                prop_assert!(out.e1.norm() <= 1e-12 * scale);
                prop_assert_eq!(out.counts.a0 + out.counts.b0, times.len());
                prop_assert_eq!(out.counts.a1 + out.counts.b1, times.len());
            }
        }

        #[test]
        fn count_conservation_on_grid(delay in 0.0f64..0.5, parity in 0usize..2) {
            let plan = WindowPlan::compile(&lte(1), &fsk(), parity, delay).unwrap();
            let c = plan.counts();
            prop_assert_eq!(c.a0 + c.b0, c.a1 + c.b1);
            prop_assert!((64..=65).contains(&c.window_len()));
        }
    }
}
