//! TOML scenario files: one file describes one experiment.
//!
//! Physically meaningful values (noise variance, tag timing and the
//! false-alarm targets) have no defaults; the false-alarm targets may
//! instead come from a command-line override.

use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use crate::channel::{ChannelCoeffs, GridParams, NoiseModel, PhaseJitter, ZedConfig};
use crate::detector::{DetectorConfig, SearchParams, Smoothing};
use crate::error::{Error, Result};
use crate::harness::{Scenario, TagSpec, TrialSpec};
use crate::sequences::{npc25, BitSequence, FskParams};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub grid: GridSection,
    #[serde(default)]
    pub channel: ChannelSection,
    pub noise: NoiseSection,
    pub waveform: WaveformSection,
    #[serde(default)]
    pub tags: Vec<TagSection>,
    pub detector: DetectorSection,
    pub run: RunSection,
    #[serde(default)]
    pub calibration: CalibrationSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_rb: usize,
    pub t_ofdm_us: f64,
    #[serde(default = "default_rs_symbols")]
    pub rs_symbols: [usize; 2],
    #[serde(default = "one")]
    pub pilot_power: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    /// Flat direct-path response `[re, im]`.
    #[serde(default = "unit_complex")]
    pub direct: [f64; 2],
    /// Optional per-subcarrier response, overriding `direct`.
    pub direct_profile: Option<Vec<[f64; 2]>>,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            direct: unit_complex(),
            direct_profile: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum JitterKind {
    None,
    IidUniform,
    RandomWalk,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma2: f64,
    pub jitter: JitterKind,
    pub jitter_step_rad: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformSection {
    /// Comma-separated bits; the 25-bit near-perfect code when absent.
    pub code: Option<String>,
    pub f0_hz: f64,
    pub f1_hz: f64,
    pub chip_ms: f64,
    pub chips_per_bit: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagSection {
    pub name: Option<String>,
    pub cycle_s: f64,
    /// Required unless `random_start` is set.
    pub start_offset_s: Option<f64>,
    #[serde(default)]
    pub random_start: bool,
    /// Flat reflected response `[re, im]`.
    pub reflect: Option<[f64; 2]>,
    pub reflect_profile: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub random_phase: bool,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothingKind {
    Off,
    Power,
    Complex,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub smoothing: SmoothingKind,
    pub cutoff_hz: Option<f64>,
    pub filter_order: Option<usize>,
    pub g_psl_db: f64,
    pub margin_db: f64,
    /// Defaults to the shortest tag cycle.
    pub t_obs_s: Option<f64>,
    #[serde(default = "one")]
    pub exclusion_bits: f64,
    /// Known H0 variance; skips calibration when present.
    pub var_hat: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub capture_s: f64,
    pub trials: usize,
    pub seed: u64,
    pub p_fa: Option<Vec<f64>>,
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "one_usize")]
    pub primary_tolerance: usize,
    #[serde(default = "half")]
    pub secondary_tolerance_bits: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub trials: Option<usize>,
    pub capture_s: Option<f64>,
    pub window_stride: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub margins_db: Vec<f64>,
    #[serde(default)]
    pub eta2: Vec<f64>,
}

fn default_rs_symbols() -> [usize; 2] {
    [0, 7]
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn half() -> f64 {
    0.5
}
fn unit_complex() -> [f64; 2] {
    [1.0, 0.0]
}

/// Command-line values that replace file values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub p_fa: Option<Vec<f64>>,
    pub workers: Option<usize>,
}

/// A resolved, validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub tag_names: Vec<String>,
    pub trials: TrialSpec,
    /// Tag-free variant used to estimate the H0 variance.
    pub calibration: TrialSpec,
    pub var_hat: Option<f64>,
    pub margins_db: Vec<f64>,
    pub eta2: Vec<f64>,
}

fn field(prefix: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => Error::invalid(format!("{prefix}.{field}"), reason),
        other => other,
    }
}

fn complex(v: [f64; 2]) -> Complex64 {
    Complex64::new(v[0], v[1])
}

fn profile(name: &str, flat: Option<[f64; 2]>, prof: &Option<Vec<[f64; 2]>>, k: usize) -> Result<Vec<Complex64>> {
    match (flat, prof) {
        (_, Some(p)) => {
            if p.len() != k {
                return Err(Error::invalid(name, format!("{} entries for {k} subcarriers", p.len())));
            }
            Ok(p.iter().copied().map(complex).collect())
        }
        (Some(v), None) => Ok(vec![complex(v); k]),
        (None, None) => Err(Error::invalid(name, "missing; give a flat value or a per-subcarrier profile")),
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::invalid(name, format!("{v} must be positive")))
    }
}

impl ScenarioFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::ScenarioRead {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn resolve(&self, ov: &Overrides) -> Result<Experiment> {
        let g = &self.grid;
        let grid = GridParams::new(g.n_rb, g.t_ofdm_us * 1e-6, g.rs_symbols, g.pilot_power).map_err(|e| field("grid", e))?;
        let k = grid.subcarriers();

        let direct = match &self.channel.direct_profile {
            Some(_) => profile("channel.direct_profile", None, &self.channel.direct_profile, k)?,
            None => vec![complex(self.channel.direct); k],
        };

        let n = &self.noise;
        let jitter = match n.jitter {
            JitterKind::None => PhaseJitter::None,
            JitterKind::IidUniform => PhaseJitter::IidUniform,
            JitterKind::RandomWalk => PhaseJitter::RandomWalk {
                step_rad: n.jitter_step_rad.ok_or_else(|| {
                    Error::invalid("noise.jitter_step_rad", "required for jitter = \"random-walk\"")
                })?,
            },
        };
        let seed = ov.seed.unwrap_or(self.run.seed);
        let noise = NoiseModel { sigma2: n.sigma2, jitter, seed };
        noise.validate().map_err(|e| field("noise", e))?;

        let w = &self.waveform;
        let code = match &w.code {
            Some(s) => s.parse::<BitSequence>().map_err(|e| field("waveform", e))?,
            None => npc25(),
        };
        let fsk = FskParams::new(w.f0_hz, w.f1_hz, w.chip_ms * 1e-3, w.chips_per_bit).map_err(|e| field("waveform", e))?;
        let seq_s = code.len() as f64 * fsk.bit_duration();

        let mut tags = Vec::new();
        let mut tag_names = Vec::new();
        for (i, t) in self.tags.iter().enumerate() {
            let name = t.name.clone().unwrap_or_else(|| ((b'A' + i as u8) as char).to_string());
            let prefix = format!("tags[{i}]");
            if !(t.cycle_s.is_finite() && t.cycle_s >= seq_s) {
                return Err(Error::invalid(
                    format!("{prefix}.cycle_s"),
                    format!("{} s cannot hold the {seq_s} s sequence", t.cycle_s),
                ));
            }
            let start = match (t.start_offset_s, t.random_start) {
                (Some(s), false) => s,
                (None, true) => 0.0,
                (Some(_), true) => {
                    return Err(Error::invalid(
                        format!("{prefix}.start_offset_s"),
                        "conflicts with random_start = true",
                    ))
                }
                (None, false) => {
                    return Err(Error::invalid(
                        format!("{prefix}.start_offset_s"),
                        "required unless random_start = true",
                    ))
                }
            };
            let config = ZedConfig {
                code: code.clone(),
                fsk,
                wait_s: t.cycle_s - seq_s,
                start_offset_s: start,
                reflect: profile(&format!("{prefix}.reflect"), t.reflect, &t.reflect_profile, k)?,
            };
            config.validate(&grid, &prefix)?;
            tags.push(TagSpec {
                config,
                random_start: t.random_start,
                random_phase: t.random_phase,
            });
            tag_names.push(name);
        }
        if tags.len() > 2 {
            return Err(Error::invalid("tags", format!("{} tags; at most two are modelled", tags.len())));
        }

        let d = &self.detector;
        let smoothing = match d.smoothing {
            SmoothingKind::Off => Smoothing::Off,
            kind => {
                let cutoff_hz = d
                    .cutoff_hz
                    .ok_or_else(|| Error::invalid("detector.cutoff_hz", "required when smoothing is enabled"))?;
                let order = d
                    .filter_order
                    .ok_or_else(|| Error::invalid("detector.filter_order", "required when smoothing is enabled"))?;
                crate::detector::Butterworth::lowpass(order, cutoff_hz, grid.rs_rate()).map_err(|e| field("detector", e))?;
                if kind == SmoothingKind::Power {
                    Smoothing::Power { cutoff_hz, order }
                } else {
                    Smoothing::Complex { cutoff_hz, order }
                }
            }
        };
        let t_obs_s = match (d.t_obs_s, tags.iter().map(|t| t.config.cycle()).reduce(f64::min)) {
            (Some(t), _) => positive("detector.t_obs_s", t)?,
            (None, Some(t)) => t,
            (None, None) => return Err(Error::invalid("detector.t_obs_s", "required when there are no tags")),
        };
        if !(d.exclusion_bits.is_finite() && d.exclusion_bits >= 0.0) {
            return Err(Error::invalid("detector.exclusion_bits", "must be >= 0"));
        }
        if let Some(v) = d.var_hat {
            positive("detector.var_hat", v)?;
        }
        let detector = DetectorConfig {
            code,
            fsk,
            sigma2: n.sigma2,
            smoothing,
        };
        let search = SearchParams {
            t_obs_s,
            g_psl_db: d.g_psl_db,
            margin_db: d.margin_db,
            exclusion_s: d.exclusion_bits * fsk.bit_duration(),
        };

        let r = &self.run;
        let capture_s = positive("run.capture_s", r.capture_s)?;
        for (i, t) in tags.iter().enumerate() {
            if capture_s < t.config.cycle() {
                return Err(Error::invalid(
                    "run.capture_s",
                    format!("{capture_s} s is shorter than tags[{i}] cycle of {} s", t.config.cycle()),
                ));
            }
        }
        let p_fa = ov
            .p_fa
            .clone()
            .or_else(|| r.p_fa.clone())
            .ok_or_else(|| Error::invalid("run.p_fa", "required in the scenario file or via --pfa"))?;
        if p_fa.is_empty() {
            return Err(Error::invalid("run.p_fa", "need at least one target"));
        }
        let scenario = Scenario {
            grid,
            channel: ChannelCoeffs { direct },
            noise,
            tags,
            detector,
            search,
            capture_s,
        };
        let trials = TrialSpec {
            scenario: scenario.clone(),
            p_fa_targets: p_fa,
            n_trials: ov.trials.unwrap_or(r.trials),
            seed_base: seed,
            window_stride: self.calibration.window_stride.unwrap_or(1),
            primary_tolerance: r.primary_tolerance,
            secondary_tolerance_s: r.secondary_tolerance_bits * fsk.bit_duration(),
            workers: ov.workers.unwrap_or(r.workers),
        };
        trials.validate().map_err(|e| field("run", e))?;

        let c = &self.calibration;
        let mut cal_scenario = scenario.without_tags();
        cal_scenario.capture_s = positive("calibration.capture_s", c.capture_s.unwrap_or(capture_s))?;
        let calibration = TrialSpec {
            scenario: cal_scenario,
            n_trials: c.trials.unwrap_or(trials.n_trials),
            // Calibration noise must not reuse the trial noise.
            seed_base: seed ^ 0x9e37_79b9_7f4a_7c15,
            ..trials.clone()
        };
        calibration.validate().map_err(|e| field("calibration", e))?;

        Ok(Experiment {
            tag_names,
            trials,
            calibration,
            var_hat: d.var_hat,
            margins_db: self.sweep.margins_db.clone(),
            eta2: self.sweep.eta2.clone(),
        })
    }
}
