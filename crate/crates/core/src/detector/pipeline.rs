//! Grid-to-contrast receive chain.

use std::io::Write;

use num_complex::Complex64;

use super::correlator::{centered_prefix, CorrelatorBank, ToneCounts, WindowPlan};
use super::filter::Butterworth;
use crate::channel::{GridParams, ResourceGrid};
use crate::error::{Error, Result};
use crate::sequences::{BitSequence, FskParams};

/// Where the low-pass smoothing sits in the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing {
    /// No smoothing; every bit of the code is correlated over its exact
    /// interval.
    Off,
    /// Smooth the per-window power difference `|e1|^2 - |e0|^2 - eps`
    /// sampled at every RS instant, then interpolate at bit offsets.
    Power { cutoff_hz: f64, order: usize },
    /// Smooth the complex correlator outputs before squaring. The
    /// correlator phase turns with the window start at the tone rate, so
    /// this mostly averages the tag away; kept for comparison.
    Complex { cutoff_hz: f64, order: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub code: BitSequence,
    pub fsk: FskParams,
    /// Noise variance used for the imbalance correction.
    pub sigma2: f64,
    pub smoothing: Smoothing,
}

/// Combined and per-subcarrier contrast for every start index.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastTrace {
    pub times: Vec<f64>,
    /// `per_subcarrier[k][n]`.
    pub per_subcarrier: Vec<Vec<f64>>,
    /// Combiner weight per start index (shared by all subcarriers).
    pub lambda: Vec<f64>,
    pub combined: Vec<f64>,
    /// Bit duration expressed in RS strides.
    pub bit_strides: f64,
}

impl ContrastTrace {
    pub fn len(&self) -> usize {
        self.combined.len()
    }

    pub fn is_empty(&self) -> bool {
        self.combined.is_empty()
    }

    /// CSV `n,t_seconds,R_M`.
    pub fn write_combined_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "t_seconds", "R_M"])?;
        for (n, (t, r)) in self.times.iter().zip(&self.combined).enumerate() {
            w.write_record(&[n.to_string(), format!("{t:.9}"), format!("{r:e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV `k,n,R,lambda`.
    pub fn write_subcarrier_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "n", "R", "lambda"])?;
        for (k, row) in self.per_subcarrier.iter().enumerate() {
            for (n, (r, l)) in row.iter().zip(&self.lambda).enumerate() {
                w.write_record(&[k.to_string(), n.to_string(), format!("{r:e}"), format!("{l:e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Bit `m` of the code sits at fractional start index `n + offset + frac`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Tap {
    offset: usize,
    frac: f64,
}

enum Mode {
    Exact {
        prefixes: Vec<Vec<Complex64>>,
        /// `plans[parity][m]`.
        plans: [Vec<WindowPlan>; 2],
    },
    Stream {
        /// Smoothed power difference per subcarrier.
        streams: Vec<Vec<f64>>,
        taps: [Vec<Tap>; 2],
    },
}

/// Evaluates the contrast of one capture at any valid start index.
pub struct Receiver {
    cfg: DetectorConfig,
    params: GridParams,
    bank: CorrelatorBank,
    signs: Vec<f64>,
    len: usize,
    mode: Mode,
}

impl Receiver {
    pub fn new(grid: &ResourceGrid, cfg: &DetectorConfig) -> Result<Self> {
        if !(cfg.sigma2.is_finite() && cfg.sigma2 >= 0.0) {
            return Err(Error::invalid("sigma2", format!("{} must be >= 0", cfg.sigma2)));
        }
        let params = *grid.params();
        let bank = CorrelatorBank::new(&params, &cfg.fsk)?;
        let tb = cfg.fsk.bit_duration();
        let n_bits = cfg.code.len();
        let signs = cfg.code.bipolar().into_iter().map(f64::from).collect();
        let (mode, len) = match cfg.smoothing {
            Smoothing::Off => {
                let plans = [0, 1].map(|p| {
                    (0..n_bits)
                        .map(|m| WindowPlan::compile(&params, &cfg.fsk, p, m as f64 * tb))
                        .collect::<Result<Vec<_>>>()
                });
                let [p0, p1] = plans;
                let plans = [p0?, p1?];
                let reach = |n: usize| plans[n % 2].iter().map(WindowPlan::reach).max().unwrap_or(0);
                let len = contiguous_count(grid.len(), |n| n + reach(n) <= grid.len());
                let prefixes = (0..grid.subcarriers()).map(|k| centered_prefix(grid.row(k))).collect();
                (Mode::Exact { prefixes, plans }, len)
            }
            Smoothing::Power { cutoff_hz, order } | Smoothing::Complex { cutoff_hz, order } => {
                let filter = Butterworth::lowpass(order, cutoff_hz, params.rs_rate())?;
                let complex = matches!(cfg.smoothing, Smoothing::Complex { .. });
                let windows = bank.windows(grid.len());
                let streams = (0..grid.subcarriers())
                    .map(|k| power_stream(&bank, grid.row(k), windows, cfg.sigma2, &filter, complex))
                    .collect();
                let taps = [0, 1].map(|p| {
                    (0..n_bits)
                        .map(|m| {
                            let pos = params.rs_position(params.rs_time(p) + m as f64 * tb) - p as f64;
                            let offset = pos.floor().max(0.0);
                            Tap {
                                offset: offset as usize,
                                frac: pos - offset,
                            }
                        })
                        .collect::<Vec<_>>()
                });
                let reach = |n: usize| taps[n % 2].iter().map(|t| t.offset + 1).max().unwrap_or(0);
                let len = contiguous_count(windows, |n| n + reach(n) < windows);
                (Mode::Stream { streams, taps }, len)
            }
        };
        Ok(Self {
            cfg: cfg.clone(),
            params,
            bank,
            signs,
            len,
            mode,
        })
    }

    /// Number of start indices with a complete code span.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn subcarriers(&self) -> usize {
        self.params.subcarriers()
    }

    pub fn time(&self, n: usize) -> f64 {
        self.params.rs_time(n)
    }

    pub fn counts(&self, n: usize) -> ToneCounts {
        self.bank.plan(n).counts()
    }

    /// Combiner weight of start index `n`.
    pub fn lambda(&self, n: usize) -> f64 {
        self.counts(n).combiner_weight(self.cfg.code.len())
    }

    fn check(&self, n: usize) -> Result<()> {
        if n >= self.len {
            return Err(Error::OutOfRange {
                index: n,
                valid_from: 0,
                valid_to: self.len,
            });
        }
        Ok(())
    }

    fn contrast_unchecked(&self, k: usize, n: usize) -> f64 {
        let sigma2 = self.cfg.sigma2;
        let sum: f64 = match &self.mode {
            Mode::Exact { prefixes, plans } => plans[n % 2]
                .iter()
                .zip(&self.signs)
                .map(|(plan, s)| {
                    let (e0, e1) = plan.apply(&prefixes[k], n);
                    s * (e1.norm_sqr() - e0.norm_sqr() - plan.counts().imbalance(1, sigma2))
                })
                .sum(),
            Mode::Stream { streams, taps } => {
                let d = &streams[k];
                taps[n % 2]
                    .iter()
                    .zip(&self.signs)
                    .map(|(t, s)| {
                        let i = n + t.offset;
                        s * ((1.0 - t.frac) * d[i] + t.frac * d[i + 1])
                    })
                    .sum()
            }
        };
        sum / self.signs.len() as f64
    }

    /// Contrast of subcarrier `k` at start index `n`.
    pub fn contrast_at(&self, k: usize, n: usize) -> Result<f64> {
        self.check(n)?;
        Ok(self.contrast_unchecked(k, n))
    }

    /// Combined contrast at start index `n`.
    pub fn combined_at(&self, n: usize) -> Result<f64> {
        self.check(n)?;
        let k = self.subcarriers();
        let sum: f64 = (0..k).map(|k| self.contrast_unchecked(k, n)).sum();
        Ok(sum / (k as f64 * self.lambda(n)))
    }

    pub fn combined(&self) -> Vec<f64> {
        (0..self.len).map(|n| self.combined_at(n).expect("in range")).collect()
    }

    pub fn trace(&self) -> ContrastTrace {
        let per_subcarrier: Vec<Vec<f64>> = (0..self.subcarriers())
            .map(|k| (0..self.len).map(|n| self.contrast_unchecked(k, n)).collect())
            .collect();
        let lambda: Vec<f64> = (0..self.len).map(|n| self.lambda(n)).collect();
        let k = self.subcarriers() as f64;
        let combined = (0..self.len)
            .map(|n| per_subcarrier.iter().map(|r| r[n]).sum::<f64>() / (k * lambda[n]))
            .collect();
        ContrastTrace {
            times: (0..self.len).map(|n| self.time(n)).collect(),
            per_subcarrier,
            lambda,
            combined,
            bit_strides: self.cfg.fsk.bit_duration() * self.params.rs_rate(),
        }
    }
}

/// Largest `w <= limit` such that `valid(n)` holds for every `n < w`,
/// assuming validity only fails past some point.
fn contiguous_count(limit: usize, valid: impl Fn(usize) -> bool) -> usize {
    let mut w = limit;
    while w > 0 && !(valid(w - 1) && (w < 2 || valid(w - 2))) {
        w -= 1;
    }
    w
}

fn power_stream(
    bank: &CorrelatorBank,
    row: &[Complex64],
    windows: usize,
    sigma2: f64,
    filter: &Butterworth,
    complex: bool,
) -> Vec<f64> {
    let prefix = centered_prefix(row);
    let outs: Vec<(Complex64, Complex64)> = (0..windows).map(|n| bank.plan(n).apply(&prefix, n)).collect();
    let eps = |n: usize| bank.plan(n).counts().imbalance(1, sigma2);
    if complex {
        let (e0, e1): (Vec<_>, Vec<_>) = outs.into_iter().unzip();
        let (f0, f1) = (filter.filtfilt_complex(&e0), filter.filtfilt_complex(&e1));
        (0..windows).map(|n| f1[n].norm_sqr() - f0[n].norm_sqr() - eps(n)).collect()
    } else {
        let d: Vec<f64> = outs
            .iter()
            .enumerate()
            .map(|(n, (e0, e1))| e1.norm_sqr() - e0.norm_sqr() - eps(n))
            .collect();
        filter.filtfilt(&d)
    }
}

/// Closed-form H0 variance of the combined contrast without smoothing:
/// bits use disjoint windows, so `R/λ` has variance
/// `σ⁴ N (c0² + c1²) / (c0 + c1)²` per subcarrier, with `c_i = 1/a_i + 1/b_i`.
pub fn analytic_h0_variance(params: &GridParams, cfg: &DetectorConfig) -> Result<f64> {
    if cfg.smoothing != Smoothing::Off {
        return Err(Error::invalid(
            "smoothing",
            "the closed-form variance only covers the unsmoothed chain; calibrate instead",
        ));
    }
    let counts = WindowPlan::compile(params, &cfg.fsk, 0, 0.0)?.counts();
    let (c0, c1) = (counts.inv_sum(0), counts.inv_sum(1));
    let n = cfg.code.len() as f64;
    Ok(cfg.sigma2.powi(2) * n * (c0 * c0 + c1 * c1) / ((c0 + c1).powi(2) * params.subcarriers() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{synthesize, ChannelCoeffs, NoiseModel, PhaseJitter, ZedConfig};
    use crate::sequences::npc25;

    /// 14 symbols per millisecond: RS every 0.5 ms, 64 per bit exactly.
    fn exact_grid() -> GridParams {
        GridParams::new(1, 1e-3 / 14.0, [0, 7], 1.0).unwrap()
    }

    fn fsk() -> FskParams {
        FskParams::new(125.0, 500.0, 1e-3, 32).unwrap()
    }

    fn cfg(smoothing: Smoothing, sigma2: f64) -> DetectorConfig {
        DetectorConfig { code: npc25(), fsk: fsk(), sigma2, smoothing }
    }

    fn one_tag(g: &GridParams, refl: Complex64, start: f64, sigma2: f64, seed: u64) -> (ResourceGrid, ZedConfig) {
        let tag = ZedConfig {
            code: npc25(),
            fsk: fsk(),
            wait_s: 0.6,
            start_offset_s: start - 0.6,
            reflect: vec![refl; g.subcarriers()],
        };
        let noise = NoiseModel { sigma2, jitter: PhaseJitter::None, seed };
        let grid = synthesize(g, &[tag.clone()], &ChannelCoeffs::flat(g.subcarriers(), Complex64::new(1.0, 0.0)), &noise, 2.0).unwrap();
        (grid, tag)
    }

    #[test]
    fn aligned_noise_free_tag_gives_path_power() {
        let g = exact_grid();
        let refl = Complex64::new(0.03, 0.04);
        let start = g.rs_time(400);
        let (grid, _) = one_tag(&g, refl, start, 0.0, 1);
        let rx = Receiver::new(&grid, &cfg(Smoothing::Off, 0.0)).unwrap();
        // The correlator sees (h + r) - (h - r): the effective gain is 2r.
        let eta2 = (2.0 * refl).norm_sqr();
        assert!((rx.contrast_at(0, 400).unwrap() - eta2).abs() < 1e-12);
        // Integer-stride contrast over the full correlator trace agrees.
        let bank = CorrelatorBank::new(&g, &fsk()).unwrap();
        let r = super::super::contrast::contrast(&bank.trace(&grid), &npc25(), 64, 0.0).unwrap();
        assert!((r[0][400] - eta2).abs() < 1e-12);
    }

    #[test]
    fn zero_input_gives_zero_contrast() {
        let g = exact_grid();
        let grid = ResourceGrid::zeros(g, 2000);
        for s in [Smoothing::Off, Smoothing::Power { cutoff_hz: 100.0, order: 4 }] {
            let rx = Receiver::new(&grid, &cfg(s, 0.0)).unwrap();
            assert!(rx.len() > 300);
            assert!(rx.combined().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn smoothing_modes_peak_at_alignment() {
        let g = exact_grid();
        let refl = Complex64::new(0.05, 0.0);
        let start = g.rs_time(500) + 0.1e-3;
        let (grid, _) = one_tag(&g, refl, start, 0.0, 1);
        let truth = g.rs_position(start).round() as usize;
        let peak_of = |s| {
            let r = Receiver::new(&grid, &cfg(s, 0.0)).unwrap().combined();
            let i = crate::detector::argmax(&r).unwrap();
            (i, r[i])
        };
        let (i_off, v_off) = peak_of(Smoothing::Off);
        let (i_pow, v_pow) = peak_of(Smoothing::Power { cutoff_hz: 100.0, order: 4 });
        let (_, v_cx) = peak_of(Smoothing::Complex { cutoff_hz: 100.0, order: 4 });
        assert!(i_off.abs_diff(truth) <= 1 && i_pow.abs_diff(truth) <= 1, "{i_off} {i_pow} {truth}");
        assert!(v_pow > 0.2 * v_off);
        assert!(v_cx < 0.1 * v_pow, "complex smoothing keeps {v_cx} vs {v_pow}");
    }

    #[test]
    fn out_of_range_is_an_error() {
        let g = exact_grid();
        let grid = ResourceGrid::zeros(g, 1700);
        let rx = Receiver::new(&grid, &cfg(Smoothing::Off, 0.0)).unwrap();
        assert!(rx.combined_at(rx.len()).is_err());
        assert!(rx.combined_at(rx.len() - 1).is_ok());
        let tiny = ResourceGrid::zeros(g, 10);
        assert!(Receiver::new(&tiny, &cfg(Smoothing::Off, 0.0)).unwrap().is_empty());
    }

    #[test]
    fn rejects_cutoff_above_nyquist() {
        let grid = ResourceGrid::zeros(exact_grid(), 2000);
        let bad = cfg(Smoothing::Power { cutoff_hz: 1500.0, order: 4 }, 0.0);
        assert!(Receiver::new(&grid, &bad).is_err());
    }

    #[test]
    fn analytic_variance_matches_simulation() {
        let g = GridParams::new(2, 71.35e-6, [0, 7], 1.0).unwrap();
        let c = cfg(Smoothing::Off, 1.0);
        let want = analytic_h0_variance(&g, &c).unwrap();
        let mut samples = Vec::new();
        for seed in 0..40 {
            let noise = NoiseModel { sigma2: 1.0, jitter: PhaseJitter::None, seed };
            let grid = synthesize(&g, &[], &ChannelCoeffs::flat(8, Complex64::new(1.0, 0.0)), &noise, 3.0).unwrap();
            let rx = Receiver::new(&grid, &c).unwrap();
            // Starts one code length apart share no samples.
            let step = 25 * 65;
            samples.extend((0..rx.len()).step_by(step).map(|n| rx.combined_at(n).unwrap()));
        }
        let m = samples.iter().sum::<f64>() / samples.len() as f64;
        let v = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
        // ~160 samples: relative standard error of a variance ~11%.
        assert!((v / want - 1.0).abs() < 0.35, "{v} vs {want}");
        assert!(analytic_h0_variance(&g, &cfg(Smoothing::Power { cutoff_hz: 100.0, order: 4 }, 1.0)).is_err());
    }

    #[test]
    fn csv_writers() {
        let g = exact_grid();
        let (grid, _) = one_tag(&g, Complex64::new(0.05, 0.0), g.rs_time(100), 0.0, 1);
        let tr = Receiver::new(&grid, &cfg(Smoothing::Power { cutoff_hz: 100.0, order: 4 }, 0.0)).unwrap().trace();
        let mut a = Vec::new();
        tr.write_combined_csv(&mut a).unwrap();
        let mut b = Vec::new();
        tr.write_subcarrier_csv(&mut b).unwrap();
        assert_eq!(String::from_utf8(a).unwrap().lines().count(), tr.len() + 1);
        assert_eq!(String::from_utf8(b).unwrap().lines().count(), 4 * tr.len() + 1);
        assert!((tr.bit_strides - 64.0).abs() < 1e-9);
    }
}
