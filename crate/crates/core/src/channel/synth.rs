use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::grid::{GridParams, ResourceGrid};
use crate::error::{Error, Result};
use crate::sequences::{reflection_state, BitSequence, FskParams, ReflectionState};

/// Bits may last a whole number of TTIs give or take this fraction.
pub const TTI_ALIGNMENT_TOLERANCE: f64 = 0.05;

const NOISE_STREAM: u64 = 0;
const JITTER_STREAM: u64 = 1;

/// Direct-path response per subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelCoeffs {
    pub direct: Vec<Complex64>,
}

impl ChannelCoeffs {
    pub fn flat(subcarriers: usize, gamma: Complex64) -> Self {
        Self {
            direct: vec![gamma; subcarriers],
        }
    }
}

/// Common phase rotation applied per TTI (identical across subcarriers
/// and across the two RS symbols of a TTI).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseJitter {
    None,
    /// Independent uniform phase every TTI.
    IidUniform,
    /// Uniform start, then Gaussian increments of `step_rad` std per TTI.
    RandomWalk { step_rad: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma2: f64,
    pub jitter: PhaseJitter,
    pub seed: u64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2.is_finite() && self.sigma2 >= 0.0) {
            return Err(Error::invalid("sigma2", format!("{} must be >= 0", self.sigma2)));
        }
        if let PhaseJitter::RandomWalk { step_rad } = self.jitter {
            if !(step_rad.is_finite() && step_rad >= 0.0) {
                return Err(Error::invalid("jitter_step_rad", format!("{step_rad} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// One tag: its code, chip waveform, duty cycle and reflected channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ZedConfig {
    pub code: BitSequence,
    pub fsk: FskParams,
    /// Silent part of each cycle, preceding the sequence.
    pub wait_s: f64,
    /// Receiver time at which the tag's first cycle begins.
    pub start_offset_s: f64,
    /// Reflected response per subcarrier.
    pub reflect: Vec<Complex64>,
}

impl ZedConfig {
    pub fn sequence_duration(&self) -> f64 {
        self.code.len() as f64 * self.fsk.bit_duration()
    }

    pub fn cycle(&self) -> f64 {
        self.sequence_duration() + self.wait_s
    }

    /// State at receiver time `t`; idle while waiting.
    pub fn state_at(&self, t: f64) -> ReflectionState {
        let u = (t - self.start_offset_s).rem_euclid(self.cycle());
        if u < self.wait_s {
            ReflectionState::Idle
        } else {
            reflection_state(&self.code, &self.fsk, u - self.wait_s)
        }
    }

    pub fn is_active(&self, t: f64) -> bool {
        self.state_at(t) != ReflectionState::Idle
    }

    /// Receiver times in `[from, to)` at which a sequence starts.
    pub fn sequence_starts(&self, from: f64, to: f64) -> Vec<f64> {
        let first = self.start_offset_s + self.wait_s;
        let c = self.cycle();
        let j0 = ((from - first) / c).ceil() as i64;
        (j0..)
            .map(|j| first + j as f64 * c)
            .skip_while(|&t| t < from)
            .take_while(|&t| t < to)
            .collect()
    }

    pub fn validate(&self, grid: &GridParams, name: &str) -> Result<()> {
        if !(self.wait_s.is_finite() && self.wait_s >= 0.0) {
            return Err(Error::invalid(format!("{name}.wait"), "must be >= 0"));
        }
        if !self.start_offset_s.is_finite() {
            return Err(Error::invalid(format!("{name}.start_offset"), "must be finite"));
        }
        if self.reflect.len() != grid.subcarriers() {
            return Err(Error::invalid(
                format!("{name}.reflect"),
                format!("{} values for {} subcarriers", self.reflect.len(), grid.subcarriers()),
            ));
        }
        check_bit_timing(&self.fsk, grid).map_err(|e| match e {
            Error::InvalidParameter { reason, .. } => {
                Error::invalid(format!("{name}.chips_per_bit"), reason)
            }
            other => other,
        })
    }
}

/// A bit must span at least one TTI and be (nearly) a whole number of
/// TTIs, so each correlator window sees a stable RS pattern.
pub fn check_bit_timing(fsk: &FskParams, grid: &GridParams) -> Result<()> {
    let ratio = fsk.bit_duration() / grid.tti();
    let whole = ratio.round();
    if whole < 1.0 || (ratio - whole).abs() > TTI_ALIGNMENT_TOLERANCE {
        return Err(Error::invalid(
            "bit_duration",
            format!("bit lasts {ratio:.3} TTIs; need a whole number (within 0.05 TTI) of at least 1"),
        ));
    }
    Ok(())
}

/// Per-TTI phase rotations for `ttis` TTIs.
pub fn jitter_rotations(noise: &NoiseModel, ttis: usize) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(JITTER_STREAM);
    let two_pi = std::f64::consts::TAU;
    match noise.jitter {
        PhaseJitter::None => vec![Complex64::new(1.0, 0.0); ttis],
        PhaseJitter::IidUniform => (0..ttis)
            .map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * two_pi))
            .collect(),
        PhaseJitter::RandomWalk { step_rad } => {
            let mut phi = rng.random::<f64>() * two_pi;
            let step = Normal::new(0.0, step_rad).expect("validated step");
            (0..ttis)
                .map(|_| {
                    let r = Complex64::from_polar(1.0, phi);
                    phi += step.sample(&mut rng);
                    r
                })
                .collect()
        }
    }
}

/// Received RS samples for zero, one or two tags over `[0, duration)`:
/// `y = rot · sqrt(P) · (direct + Σ state · reflect) + noise`.
pub fn synthesize(
    grid: &GridParams,
    tags: &[ZedConfig],
    chans: &ChannelCoeffs,
    noise: &NoiseModel,
    duration: f64,
) -> Result<ResourceGrid> {
    let k_count = grid.subcarriers();
    if tags.len() > 2 {
        return Err(Error::invalid("tags", format!("{} tags; at most two are modelled", tags.len())));
    }
    if chans.direct.len() != k_count {
        return Err(Error::invalid(
            "channel.direct",
            format!("{} values for {k_count} subcarriers", chans.direct.len()),
        ));
    }
    noise.validate()?;
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::invalid("duration", format!("{duration} must be positive")));
    }
    for (i, tag) in tags.iter().enumerate() {
        let name = format!("tags[{i}]");
        tag.validate(grid, &name)?;
        if duration < tag.cycle() {
            return Err(Error::invalid(
                "duration",
                format!("{duration} s is shorter than {name} cycle of {} s", tag.cycle()),
            ));
        }
    }

    let len = grid.rs_count(duration);
    let rot = jitter_rotations(noise, len.div_ceil(2));
    let states: Vec<Vec<f64>> = tags
        .iter()
        .map(|tag| (0..len).map(|l| tag.state_at(grid.rs_time(l)).value()).collect())
        .collect();

    let amp = grid.pilot_power().sqrt();
    let noise_std = (noise.sigma2 / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(NOISE_STREAM);

    let mut out = ResourceGrid::zeros(*grid, len);
    for k in 0..k_count {
        let row = out.row_mut(k);
        for (l, y) in row.iter_mut().enumerate() {
            let mut h = chans.direct[k];
            for (tag, st) in tags.iter().zip(&states) {
                if st[l] != 0.0 {
                    h += tag.reflect[k] * st[l];
                }
            }
            let mut v = rot[l / 2] * h * amp;
            if noise_std > 0.0 {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                v += Complex64::new(re, im) * noise_std;
            }
            *y = v;
        }
    }
    Ok(out)
}
