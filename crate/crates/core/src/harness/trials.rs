use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::stats::Moments;
use crate::channel::{synthesize, ChannelCoeffs, GridParams, NoiseModel, PhaseJitter, ResourceGrid, ZedConfig};
use crate::detector::{detect, np_threshold, q_function, DetectionReport, DetectorConfig, Receiver, SearchParams};
use crate::error::{Error, Result};

/// Calibration flags captures with fewer windows than this.
pub const MIN_CALIBRATION_WINDOWS: usize = 1000;

const REALIZE_STREAM: u64 = 7;

/// A tag plus how it is randomized per trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TagSpec {
    pub config: ZedConfig,
    /// Draw the cycle start uniformly over one cycle each trial.
    pub random_start: bool,
    /// Rotate the reflected response by a uniform phase each trial.
    pub random_phase: bool,
}

impl TagSpec {
    pub fn fixed(config: ZedConfig) -> Self {
        Self {
            config,
            random_start: false,
            random_phase: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid: GridParams,
    pub channel: ChannelCoeffs,
    /// The seed is replaced per trial.
    pub noise: NoiseModel,
    pub tags: Vec<TagSpec>,
    pub detector: DetectorConfig,
    pub search: SearchParams,
    pub capture_s: f64,
}

impl Scenario {
    /// Same scenario with every tag removed.
    pub fn without_tags(&self) -> Self {
        Self {
            tags: Vec::new(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub scenario: Scenario,
    pub p_fa_targets: Vec<f64>,
    pub n_trials: usize,
    /// Trial `i` uses seed `seed_base + i`.
    pub seed_base: u64,
    /// Evaluate every `window_stride`-th start index where all windows
    /// are scanned (calibration and exceedance counting).
    pub window_stride: usize,
    /// Primary peaks within this many start indices of a true alignment
    /// count as correct.
    pub primary_tolerance: usize,
    /// Secondary peaks within this many seconds of a true alignment
    /// count as correct.
    pub secondary_tolerance_s: f64,
    /// Worker threads; 0 or 1 runs sequentially.
    pub workers: usize,
}

impl TrialSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::invalid("trials", "need at least one trial"));
        }
        if let Some(p) = self.p_fa_targets.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::invalid("p_fa", format!("{p} must lie in (0, 1)")));
        }
        if self.window_stride == 0 {
            return Err(Error::invalid("window_stride", "must be at least 1"));
        }
        if !(self.secondary_tolerance_s >= 0.0) {
            return Err(Error::invalid("secondary_tolerance", "must be >= 0"));
        }
        Ok(())
    }

    fn seed(&self, trial: usize) -> u64 {
        self.seed_base.wrapping_add(trial as u64)
    }

    fn thresholds(&self, var_hat: f64) -> Result<Vec<f64>> {
        self.p_fa_targets.iter().map(|&p| np_threshold(var_hat, p)).collect()
    }
}

/// Draws per-trial tag offsets and phases, then synthesizes the capture.
pub fn realize(scenario: &Scenario, seed: u64) -> Result<(ResourceGrid, Vec<ZedConfig>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(REALIZE_STREAM);
    let tags: Vec<ZedConfig> = scenario
        .tags
        .iter()
        .map(|t| {
            let mut c = t.config.clone();
            if t.random_start {
                c.start_offset_s = rng.random::<f64>() * c.cycle();
            }
            if t.random_phase {
                let rot = Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU);
                c.reflect.iter_mut().for_each(|r| *r *= rot);
            }
            c
        })
        .collect();
    let noise = NoiseModel {
        seed,
        ..scenario.noise
    };
    let grid = synthesize(&scenario.grid, &tags, &scenario.channel, &noise, scenario.capture_s)?;
    Ok((grid, tags))
}

/// Runs `f(0..n)` on `workers` threads, preserving index order.
fn run_indexed<T, F>(workers: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}

/// Contrast index nearest to each true sequence start of `tag`.
fn true_alignments(rx: &Receiver, params: &GridParams, tag: &ZedConfig) -> Vec<usize> {
    if rx.is_empty() {
        return Vec::new();
    }
    let end = rx.time(rx.len() - 1) + 0.5 / params.rs_rate();
    tag.sequence_starts(-0.5 / params.rs_rate(), end)
        .into_iter()
        .map(|t| params.rs_position(t).round().max(0.0) as usize)
        .filter(|&n| n < rx.len())
        .collect()
}

/// H0 statistics of the combined contrast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H0Calibration {
    pub var_hat: f64,
    pub moments: Moments,
}

impl H0Calibration {
    pub fn windows(&self) -> usize {
        self.moments.count
    }
}

fn strided_combined(rx: &Receiver, stride: usize) -> Vec<f64> {
    (0..rx.len())
        .step_by(stride)
        .map(|n| rx.combined_at(n).expect("in range"))
        .collect()
}

/// Sample variance of the combined contrast over tag-free captures.
pub fn calibrate_h0(spec: &TrialSpec) -> Result<H0Calibration> {
    spec.validate()?;
    if !spec.scenario.tags.is_empty() {
        return Err(Error::invalid("tags", "calibration needs a tag-free scenario"));
    }
    let per_trial = run_indexed(spec.workers, spec.n_trials, |i| {
        let (grid, _) = realize(&spec.scenario, spec.seed(i))?;
        let rx = Receiver::new(&grid, &spec.scenario.detector)?;
        Ok(strided_combined(&rx, spec.window_stride))
    })?;
    let all: Vec<f64> = per_trial.into_iter().flatten().collect();
    if all.len() < MIN_CALIBRATION_WINDOWS {
        return Err(Error::InsufficientWindows {
            got: all.len(),
            need: MIN_CALIBRATION_WINDOWS,
        });
    }
    let moments = Moments::from_slice(&all);
    Ok(H0Calibration {
        var_hat: moments.variance,
        moments,
    })
}

/// Windows scanned and, per threshold, how many exceeded it.
#[derive(Debug, Clone, PartialEq)]
pub struct Exceedance {
    pub windows: usize,
    pub exceed: Vec<usize>,
}

impl Exceedance {
    pub fn rate(&self, i: usize) -> f64 {
        self.exceed[i] as f64 / self.windows.max(1) as f64
    }
}

/// Counts contrast values above each threshold over all scanned windows.
pub fn count_exceedances(spec: &TrialSpec, thresholds: &[f64]) -> Result<Exceedance> {
    spec.validate()?;
    let per_trial = run_indexed(spec.workers, spec.n_trials, |i| {
        let (grid, _) = realize(&spec.scenario, spec.seed(i))?;
        let rx = Receiver::new(&grid, &spec.scenario.detector)?;
        let values = strided_combined(&rx, spec.window_stride);
        let counts: Vec<usize> = thresholds
            .iter()
            .map(|r| values.iter().filter(|v| *v > r).count())
            .collect();
        Ok((values.len(), counts))
    })?;
    let mut out = Exceedance {
        windows: 0,
        exceed: vec![0; thresholds.len()],
    };
    for (w, c) in per_trial {
        out.windows += w;
        out.exceed.iter_mut().zip(c).for_each(|(a, b)| *a += b);
    }
    Ok(out)
}

/// Counts for one false-alarm target.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PfaMetrics {
    pub p_fa: f64,
    pub r_star: f64,
    /// Threshold tests at true alignments, and how many passed.
    pub aligned_tests: usize,
    pub aligned_detections: usize,
    /// Observation windows searched.
    pub windows: usize,
    pub declared: usize,
    pub correct_detections: usize,
    pub false_alarms: usize,
    pub missed_detections: usize,
}

impl PfaMetrics {
    /// Fraction of true alignments whose contrast exceeds the threshold.
    pub fn p_d_observed(&self) -> f64 {
        self.aligned_detections as f64 / self.aligned_tests.max(1) as f64
    }

    /// Fraction of tag occurrences found by the windowed peak search.
    pub fn peak_detection_rate(&self) -> f64 {
        let total = self.correct_detections + self.missed_detections;
        self.correct_detections as f64 / total.max(1) as f64
    }

    fn merge(&mut self, o: &PfaMetrics) {
        self.aligned_tests += o.aligned_tests;
        self.aligned_detections += o.aligned_detections;
        self.windows += o.windows;
        self.declared += o.declared;
        self.correct_detections += o.correct_detections;
        self.false_alarms += o.false_alarms;
        self.missed_detections += o.missed_detections;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    pub trials: usize,
    pub per_target: Vec<PfaMetrics>,
    /// Peak time minus true alignment time of correct primaries at the
    /// first target, in trial order.
    pub timing_errors_s: Vec<f64>,
}

fn primary_accounting(
    report: &DetectionReport,
    truths: &[usize],
    tolerance: usize,
    times: impl Fn(usize) -> f64,
    m: &mut PfaMetrics,
    timing: &mut Vec<f64>,
) {
    for w in &report.windows {
        m.windows += 1;
        let inside = truths.iter().filter(|&&n| n >= w.start && n < w.end).count();
        let mut hit = false;
        if let Some(p) = w.primary {
            m.declared += 1;
            match truths.iter().find(|&&n| n.abs_diff(p.index) <= tolerance) {
                Some(&n) => {
                    m.correct_detections += 1;
                    timing.push(times(p.index) - times(n));
                    hit = n >= w.start && n < w.end;
                }
                None => m.false_alarms += 1,
            }
        }
        m.missed_detections += inside.saturating_sub(usize::from(hit));
    }
}

/// Single-tag trials: threshold tests at the true alignments plus a
/// windowed primary-peak search classified against ground truth.
pub fn run_single_tag(spec: &TrialSpec, var_hat: f64) -> Result<TrialMetrics> {
    spec.validate()?;
    if spec.scenario.tags.len() != 1 {
        return Err(Error::invalid("tags", "single-tag runs need exactly one tag"));
    }
    let r_stars = spec.thresholds(var_hat)?;
    let params = spec.scenario.grid;
    let per_trial = run_indexed(spec.workers, spec.n_trials, |i| {
        let (grid, tags) = realize(&spec.scenario, spec.seed(i))?;
        let rx = Receiver::new(&grid, &spec.scenario.detector)?;
        let truths = true_alignments(&rx, &params, &tags[0]);
        let combined = rx.combined();
        let times: Vec<f64> = (0..rx.len()).map(|n| rx.time(n)).collect();
        let mut timing = Vec::new();
        let metrics: Vec<PfaMetrics> = spec
            .p_fa_targets
            .iter()
            .zip(&r_stars)
            .enumerate()
            .map(|(j, (&p_fa, &r_star))| {
                let mut m = PfaMetrics { p_fa, r_star, ..Default::default() };
                m.aligned_tests = truths.len();
                m.aligned_detections = truths.iter().filter(|&&n| combined[n] > r_star).count();
                let report = detect(&combined, &times, r_star, &spec.scenario.search);
                let mut t = Vec::new();
                primary_accounting(&report, &truths, spec.primary_tolerance, |n| times[n], &mut m, &mut t);
                if j == 0 {
                    timing = t;
                }
                m
            })
            .collect();
        Ok((metrics, timing))
    })?;
    let mut out = TrialMetrics {
        trials: spec.n_trials,
        per_target: spec
            .p_fa_targets
            .iter()
            .zip(&r_stars)
            .map(|(&p_fa, &r_star)| PfaMetrics { p_fa, r_star, ..Default::default() })
            .collect(),
        timing_errors_s: Vec::new(),
    };
    for (metrics, timing) in per_trial {
        for (acc, m) in out.per_target.iter_mut().zip(&metrics) {
            acc.merge(m);
        }
        out.timing_errors_s.extend(timing);
    }
    Ok(out)
}

/// Two-tag accounting at one threshold and margin.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TwoTagMetrics {
    pub p_fa: f64,
    pub r_star: f64,
    pub margin_db: f64,
    pub windows: usize,
    pub primary_correct: usize,
    pub primary_false_alarms: usize,
    pub primary_missed: usize,
    /// Windows where the other tag sits inside the secondary search
    /// region, clear of the exclusion zone.
    pub secondary_eligible: usize,
    /// Eligible windows whose secondary landed on the other tag;
    /// `correct + missed == eligible`.
    pub secondary_correct: usize,
    /// Secondaries matching no occurrence of the other tag.
    pub secondary_false_alarms: usize,
    pub secondary_missed: usize,
}

impl TwoTagMetrics {
    pub fn secondary_rate(&self) -> f64 {
        self.secondary_correct as f64 / self.secondary_eligible.max(1) as f64
    }

    fn merge(&mut self, o: &TwoTagMetrics) {
        self.windows += o.windows;
        self.primary_correct += o.primary_correct;
        self.primary_false_alarms += o.primary_false_alarms;
        self.primary_missed += o.primary_missed;
        self.secondary_eligible += o.secondary_eligible;
        self.secondary_correct += o.secondary_correct;
        self.secondary_false_alarms += o.secondary_false_alarms;
        self.secondary_missed += o.secondary_missed;
    }
}

struct TwoTagTrace {
    combined: Vec<f64>,
    times: Vec<f64>,
    truths: [Vec<usize>; 2],
    bit_strides: f64,
}

fn two_tag_trace(spec: &TrialSpec, i: usize) -> Result<TwoTagTrace> {
    let (grid, tags) = realize(&spec.scenario, spec.seed(i))?;
    let rx = Receiver::new(&grid, &spec.scenario.detector)?;
    let params = spec.scenario.grid;
    Ok(TwoTagTrace {
        combined: rx.combined(),
        times: (0..rx.len()).map(|n| rx.time(n)).collect(),
        truths: [
            true_alignments(&rx, &params, &tags[0]),
            true_alignments(&rx, &params, &tags[1]),
        ],
        bit_strides: spec.scenario.detector.fsk.bit_duration() * params.rs_rate(),
    })
}

fn classify_two_tag(spec: &TrialSpec, tr: &TwoTagTrace, r_star: f64, search: &SearchParams) -> TwoTagMetrics {
    let report = detect(&tr.combined, &tr.times, r_star, search);
    let stride = 1.0 / spec.scenario.grid.rs_rate();
    let half_window = (0.5 * search.t_obs_s / stride).floor() as usize;
    let min_offset = (2.0 * tr.bit_strides).round() as usize;
    let sec_tol = (spec.secondary_tolerance_s / stride).round() as usize;
    let mut m = TwoTagMetrics {
        r_star,
        margin_db: search.margin_db,
        ..Default::default()
    };
    let matches = |tag: usize, idx: usize, tol: usize| tr.truths[tag].iter().any(|&n| n.abs_diff(idx) <= tol);
    for w in &report.windows {
        m.windows += 1;
        let inside = (0..2).any(|t| tr.truths[t].iter().any(|&n| n >= w.start && n < w.end));
        let Some(p) = w.primary else {
            if inside {
                m.primary_missed += 1;
            }
            continue;
        };
        let owner = (0..2).find(|&t| matches(t, p.index, spec.primary_tolerance));
        let Some(owner) = owner else {
            m.primary_false_alarms += 1;
            if inside {
                m.primary_missed += 1;
            }
            if w.secondary.is_some() {
                m.secondary_false_alarms += 1;
            }
            continue;
        };
        m.primary_correct += 1;
        let other = 1 - owner;
        let eligible: Vec<usize> = tr.truths[other]
            .iter()
            .copied()
            .filter(|&n| {
                let d = n.abs_diff(p.index);
                d >= min_offset && d <= half_window
            })
            .collect();
        // A declaration on any occurrence of the other tag is genuine; only
        // eligible occurrences count toward the detection rate.
        let declared = w.secondary.map(|q| q.index);
        if declared.is_some_and(|q| !matches(other, q, sec_tol)) {
            m.secondary_false_alarms += 1;
        }
        if !eligible.is_empty() {
            m.secondary_eligible += 1;
            if declared.is_some_and(|q| eligible.iter().any(|&n| n.abs_diff(q) <= sec_tol)) {
                m.secondary_correct += 1;
            } else {
                m.secondary_missed += 1;
            }
        }
    }
    m
}

fn check_two_tags(spec: &TrialSpec) -> Result<()> {
    spec.validate()?;
    let tags = &spec.scenario.tags;
    if tags.len() != 2 {
        return Err(Error::invalid("tags", "two-tag runs need exactly two tags"));
    }
    if (tags[0].config.cycle() - tags[1].config.cycle()).abs() < 1e-9 {
        return Err(Error::invalid("tags", "the two tags need distinct cycles"));
    }
    Ok(())
}

/// Two-tag trials, one entry per false-alarm target at the scenario margin.
pub fn run_two_tag(spec: &TrialSpec, var_hat: f64) -> Result<Vec<TwoTagMetrics>> {
    check_two_tags(spec)?;
    let r_stars = spec.thresholds(var_hat)?;
    let per_trial = run_indexed(spec.workers, spec.n_trials, |i| {
        let tr = two_tag_trace(spec, i)?;
        Ok(r_stars
            .iter()
            .map(|&r| classify_two_tag(spec, &tr, r, &spec.scenario.search))
            .collect::<Vec<_>>())
    })?;
    let mut out: Vec<TwoTagMetrics> = spec
        .p_fa_targets
        .iter()
        .zip(&r_stars)
        .map(|(&p_fa, &r_star)| TwoTagMetrics {
            p_fa,
            r_star,
            margin_db: spec.scenario.search.margin_db,
            ..Default::default()
        })
        .collect();
    for trial in per_trial {
        for (acc, m) in out.iter_mut().zip(&trial) {
            acc.merge(m);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginRow {
    pub margin_db: f64,
    pub false_alarms: usize,
    pub missed_detections: usize,
    pub metrics: TwoTagMetrics,
}

/// Secondary false alarms and misses per margin, at the first target.
pub fn margin_sweep(spec: &TrialSpec, var_hat: f64, margins_db: &[f64]) -> Result<Vec<MarginRow>> {
    check_two_tags(spec)?;
    if margins_db.is_empty() {
        return Err(Error::invalid("margins_db", "need at least one margin"));
    }
    let r_star = np_threshold(
        var_hat,
        *spec.p_fa_targets.first().ok_or_else(|| Error::invalid("p_fa", "need a target"))?,
    )?;
    let per_trial = run_indexed(spec.workers, spec.n_trials, |i| {
        let tr = two_tag_trace(spec, i)?;
        Ok(margins_db
            .iter()
            .map(|&m| {
                let search = SearchParams {
                    margin_db: m,
                    ..spec.scenario.search
                };
                classify_two_tag(spec, &tr, r_star, &search)
            })
            .collect::<Vec<_>>())
    })?;
    let mut acc: Vec<TwoTagMetrics> = margins_db
        .iter()
        .map(|&m| TwoTagMetrics {
            p_fa: spec.p_fa_targets[0],
            r_star,
            margin_db: m,
            ..Default::default()
        })
        .collect();
    for trial in per_trial {
        for (a, m) in acc.iter_mut().zip(&trial) {
            a.merge(m);
        }
    }
    Ok(acc
        .into_iter()
        .map(|m| MarginRow {
            margin_db: m.margin_db,
            false_alarms: m.secondary_false_alarms,
            missed_detections: m.secondary_missed,
            metrics: m,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocRow {
    pub eta2: f64,
    pub p_fa: f64,
    pub r_star: f64,
    pub p_d_predicted: f64,
    pub p_d_observed: f64,
    pub trials: usize,
}

/// Sweeps the path power of the single tag (start and phase held fixed)
/// and compares threshold tests at its alignment with the Gaussian law.
pub fn roc_sweep(spec: &TrialSpec, var_hat: f64, eta2_grid: &[f64], p_fa_grid: &[f64]) -> Result<Vec<RocRow>> {
    spec.validate()?;
    if spec.scenario.tags.len() != 1 {
        return Err(Error::invalid("tags", "ROC sweeps need exactly one tag"));
    }
    if eta2_grid.is_empty() || p_fa_grid.is_empty() {
        return Err(Error::invalid("sweep", "grids must be non-empty"));
    }
    if let Some(e) = eta2_grid.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
        return Err(Error::invalid("eta2", format!("{e} must be >= 0")));
    }
    let r_stars: Vec<f64> = p_fa_grid
        .iter()
        .map(|&p| np_threshold(var_hat, p))
        .collect::<Result<_>>()?;

    let mut base = spec.scenario.clone();
    base.tags[0].random_start = false;
    base.tags[0].random_phase = false;

    // Noise-free response of the nominal tag fixes the test position and
    // the path power per unit amplitude.
    let quiet = Scenario {
        noise: NoiseModel {
            sigma2: 0.0,
            jitter: PhaseJitter::None,
            seed: 0,
        },
        ..base.clone()
    };
    let (grid, tags) = realize(&quiet, 0)?;
    let rx = Receiver::new(&grid, &base.detector)?;
    let truth = *true_alignments(&rx, &base.grid, &tags[0])
        .first()
        .ok_or_else(|| Error::invalid("capture_s", "no complete sequence inside the capture"))?;
    let candidates = truth.saturating_sub(1)..(truth + 2).min(rx.len());
    let (n_test, unit_eta2) = candidates
        .map(|n| (n, rx.combined_at(n).expect("in range")))
        .fold((truth, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    if !(unit_eta2 > 0.0) {
        return Err(Error::invalid("reflect", "the nominal tag has no path power"));
    }

    let mut rows = Vec::new();
    for &eta2 in eta2_grid {
        let mut scn = base.clone();
        let scale = (eta2 / unit_eta2).sqrt();
        scn.tags[0].config.reflect.iter_mut().for_each(|r| *r *= scale);
        let values = run_indexed(spec.workers, spec.n_trials, |i| {
            let (grid, _) = realize(&scn, spec.seed(i))?;
            Receiver::new(&grid, &scn.detector)?.combined_at(n_test)
        })?;
        for (&p_fa, &r_star) in p_fa_grid.iter().zip(&r_stars) {
            let hits = values.iter().filter(|v| **v > r_star).count();
            rows.push(RocRow {
                eta2,
                p_fa,
                r_star,
                p_d_predicted: q_function((r_star - eta2) / var_hat.sqrt()),
                p_d_observed: hits as f64 / values.len() as f64,
                trials: values.len(),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelCoeffs;
    use crate::detector::Smoothing;
    use crate::sequences::{npc25, FskParams};

    fn fsk() -> FskParams {
        FskParams::new(125.0, 500.0, 1e-3, 32).unwrap()
    }

    fn spec(sigma2: f64, reflect: Option<f64>) -> TrialSpec {
        let grid = GridParams::new(1, 71.35e-6, [0, 7], 1.0).unwrap();
        let tags = reflect
            .map(|a| {
                vec![TagSpec::fixed(ZedConfig {
                    code: npc25(),
                    fsk: fsk(),
                    wait_s: 0.6,
                    start_offset_s: 0.3,
                    reflect: vec![Complex64::new(a, 0.0); 4],
                })]
            })
            .unwrap_or_default();
        TrialSpec {
            scenario: Scenario {
                grid,
                channel: ChannelCoeffs::flat(4, Complex64::new(1.0, 0.0)),
                noise: NoiseModel { sigma2, jitter: PhaseJitter::None, seed: 0 },
                tags,
                detector: DetectorConfig {
                    code: npc25(),
                    fsk: fsk(),
                    sigma2,
                    smoothing: Smoothing::Power { cutoff_hz: 100.0, order: 4 },
                },
                search: SearchParams { t_obs_s: 1.4, g_psl_db: 21.93, margin_db: 6.0, exclusion_s: 0.032 },
                capture_s: 3.0,
            },
            p_fa_targets: vec![1e-2, 1e-3],
            n_trials: 2,
            seed_base: 40,
            window_stride: 1,
            primary_tolerance: 1,
            secondary_tolerance_s: 0.016,
            workers: 1,
        }
    }

    #[test]
    fn calibration_is_reproducible_and_worker_invariant() {
        let s = spec(1.0, None);
        let a = calibrate_h0(&s).unwrap();
        assert_eq!(a, calibrate_h0(&s).unwrap());
        let par = TrialSpec { workers: 2, ..s.clone() };
        assert_eq!(a, calibrate_h0(&par).unwrap());
        let other = TrialSpec { seed_base: 41, ..s };
        assert_ne!(a.var_hat, calibrate_h0(&other).unwrap().var_hat);
    }

    #[test]
    fn calibration_scales_with_noise_power() {
        let a = calibrate_h0(&spec(1.0, None)).unwrap().var_hat;
        let b = calibrate_h0(&spec(2.0, None)).unwrap().var_hat;
        assert!((b / a - 4.0).abs() < 1e-9, "{}", b / a);
        assert_eq!(calibrate_h0(&spec(0.0, None)).unwrap().var_hat, 0.0);
    }

    #[test]
    fn calibration_errors() {
        assert!(calibrate_h0(&spec(1.0, Some(0.1))).is_err());
        let sparse = TrialSpec { n_trials: 1, window_stride: 100, ..spec(1.0, None) };
        assert!(matches!(calibrate_h0(&sparse), Err(Error::InsufficientWindows { .. })));
        assert!(calibrate_h0(&TrialSpec { n_trials: 0, ..spec(1.0, None) }).is_err());
        assert!(calibrate_h0(&TrialSpec { p_fa_targets: vec![0.0], ..spec(1.0, None) }).is_err());
    }

    #[test]
    fn exceedances_are_monotone_and_conserve_windows() {
        let s = spec(1.0, None);
        let ex = count_exceedances(&s, &[f64::NEG_INFINITY, 0.0, 1e-3, f64::INFINITY]).unwrap();
        assert_eq!(ex.exceed[0], ex.windows);
        assert_eq!(ex.exceed[3], 0);
        assert!(ex.exceed[1] >= ex.exceed[2]);
        assert_eq!(ex.windows, calibrate_h0(&s).unwrap().windows());
    }

    #[test]
    fn strong_tag_is_always_found_on_time() {
        let s = spec(0.01, Some(0.5));
        let var = calibrate_h0(&TrialSpec { scenario: s.scenario.without_tags(), ..s.clone() })
            .unwrap()
            .var_hat;
        let m = run_single_tag(&s, var).unwrap();
        for t in &m.per_target {
            assert!(t.aligned_tests >= s.n_trials);
            assert_eq!(t.aligned_detections, t.aligned_tests);
            assert_eq!(t.correct_detections, t.aligned_tests);
            assert_eq!(t.false_alarms + t.missed_detections, 0);
            assert_eq!(t.declared, t.correct_detections);
        }
        let stride = 1.0 / s.scenario.grid.rs_rate();
        assert!(m.timing_errors_s.iter().all(|e| e.abs() <= stride + 1e-12));
    }

    #[test]
    fn roc_is_monotone_in_path_power() {
        let s = TrialSpec { n_trials: 30, ..spec(1.0, Some(0.1)) };
        let var = calibrate_h0(&TrialSpec { scenario: s.scenario.without_tags(), n_trials: 2, ..s.clone() })
            .unwrap()
            .var_hat;
        let sd = var.sqrt();
        let rows = roc_sweep(&s, var, &[0.0, 2.0 * sd, 6.0 * sd], &[1e-2]).unwrap();
        assert!((rows[0].p_d_predicted - 1e-2).abs() < 1e-12);
        for w in rows.windows(2) {
            assert!(w[1].p_d_observed >= w[0].p_d_observed);
            assert!(w[1].p_d_predicted > w[0].p_d_predicted);
        }
        assert_eq!(rows[2].p_d_observed, 1.0);
        assert!(roc_sweep(&s, var, &[-1.0], &[1e-2]).is_err());
        assert!(roc_sweep(&spec(1.0, None), var, &[1.0], &[1e-2]).is_err());
    }

    fn synthetic(peaks: &[(usize, f64)], truths: [Vec<usize>; 2]) -> TwoTagTrace {
        let s = spec(1.0, None);
        let rate = s.scenario.grid.rs_rate();
        let mut combined = vec![0.0; 6000];
        for &(n, v) in peaks {
            combined[n] = v;
        }
        TwoTagTrace {
            times: (0..combined.len()).map(|n| n as f64 / rate).collect(),
            combined,
            truths,
            bit_strides: fsk().bit_duration() * rate,
        }
    }

    #[test]
    fn two_tag_classification() {
        let s = spec(1.0, None);
        let search = s.scenario.search;
        // -10.5 dB sits above s = -15.93 dB.
        let tr = synthetic(&[(1000, 1.0), (1500, 0.3)], [vec![1000], vec![1500]]);
        let m = classify_two_tag(&s, &tr, 0.05, &search);
        assert_eq!((m.windows, m.primary_correct, m.secondary_eligible, m.secondary_correct), (2, 1, 1, 1));
        assert_eq!(m.secondary_false_alarms + m.secondary_missed + m.primary_missed, 0);

        // Too weak for the secondary threshold.
        let tr = synthetic(&[(1000, 1.0), (1500, 0.1)], [vec![1000], vec![1500]]);
        let m = classify_two_tag(&s, &tr, 0.05, &search);
        assert_eq!((m.secondary_correct, m.secondary_missed, m.secondary_false_alarms), (0, 1, 0));

        // Strong peak in the wrong place: a false alarm and a miss.
        let tr = synthetic(&[(1000, 1.0), (1800, 0.3)], [vec![1000], vec![1500]]);
        let m = classify_two_tag(&s, &tr, 0.05, &search);
        assert_eq!((m.secondary_correct, m.secondary_missed, m.secondary_false_alarms), (0, 1, 1));

        // Primary on the second tag; a stray primary elsewhere is a false alarm.
        let tr = synthetic(&[(1500, 1.0), (4000, 1.0)], [vec![], vec![1500]]);
        let m = classify_two_tag(&s, &tr, 0.05, &search);
        assert_eq!((m.primary_correct, m.primary_false_alarms, m.secondary_eligible), (1, 1, 0));

        // A truth without any declaration is a primary miss.
        let tr = synthetic(&[], [vec![1000], vec![]]);
        let m = classify_two_tag(&s, &tr, 0.05, &search);
        assert_eq!((m.primary_correct, m.primary_missed), (0, 1));
    }
}
