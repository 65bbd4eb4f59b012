//! Binary synchronization codes, square-wave FSK chips and the tag's
//! reflection-state signal.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A binary code, `bits[m] ∈ {0, 1}`, never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitSequence {
    bits: Vec<u8>,
}

impl BitSequence {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::invalid("code", "a sequence needs at least one bit"));
        }
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::invalid(
                "code",
                format!("element {pos} is {}, expected 0 or 1", bits[pos]),
            ));
        }
        Ok(Self { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    /// Always false; kept for API symmetry with slices.
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Bit `m` mapped to ±1 (`2b - 1`).
    pub fn bipolar_at(&self, m: usize) -> i32 {
        2 * self.bits[m] as i32 - 1
    }

    pub fn bipolar(&self) -> Vec<i32> {
        (0..self.len()).map(|m| self.bipolar_at(m)).collect()
    }
}

impl fmt::Display for BitSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.bits.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl FromStr for BitSequence {
    type Err = Error;

    /// Accepts "0,1,1,0" (whitespace tolerated) or a bare "0110".
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let tokens: Vec<&str> = if s.contains(',') {
            s.split(',').map(str::trim).collect()
        } else {
            s.split_whitespace()
                .flat_map(|w| w.split("").filter(|c| !c.is_empty()))
                .collect()
        };
        let bits = tokens
            .iter()
            .map(|t| match *t {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                other => Err(Error::invalid("code", format!("unexpected token {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        BitSequence::new(bits)
    }
}

/// The 25-bit near-perfect code (peak 25, maximum sidelobe 2).
pub fn npc25() -> BitSequence {
    BitSequence {
        bits: vec![
            0, 1, 1, 0, 1, 1, 0, 1, 0, 1, 0, 1, 1, 1, 1, 1, 1, 0, 0, 0, 1, 1, 0, 0, 0,
        ],
    }
}

pub fn barker13() -> BitSequence {
    BitSequence {
        bits: vec![1, 1, 1, 1, 1, 0, 0, 1, 1, 0, 1, 0, 1],
    }
}

/// Aperiodic autocorrelation of the bipolar view for lags `0..len`.
pub fn aperiodic_autocorrelation(seq: &BitSequence) -> Vec<i64> {
    let s = seq.bipolar();
    let n = s.len();
    (0..n)
        .map(|lag| {
            s[..n - lag]
                .iter()
                .zip(&s[lag..])
                .map(|(a, b)| (*a * *b) as i64)
                .sum()
        })
        .collect()
}

/// Largest |autocorrelation| over nonzero lags, 0 for a single bit.
pub fn max_sidelobe(seq: &BitSequence) -> i64 {
    aperiodic_autocorrelation(seq)
        .iter()
        .skip(1)
        .map(|v| v.abs())
        .max()
        .unwrap_or(0)
}

/// Peak-to-sidelobe level in dB. Codes without any nonzero sidelobe
/// (including single bits) are perfect and report `+inf`.
pub fn psl_db(seq: &BitSequence) -> f64 {
    match max_sidelobe(seq) {
        0 => f64::INFINITY,
        side => 20.0 * (seq.len() as f64 / side as f64).log10(),
    }
}

/// Square-wave FSK parameters; the bit lasts `chips_per_bit` chips.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FskParams {
    f0_hz: f64,
    f1_hz: f64,
    chip_s: f64,
    chips_per_bit: u32,
}

impl FskParams {
    /// Both tones must complete an integer number of periods per bit.
    pub fn new(f0_hz: f64, f1_hz: f64, chip_s: f64, chips_per_bit: u32) -> Result<Self> {
        for (name, f) in [("f0_hz", f0_hz), ("f1_hz", f1_hz)] {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::invalid(name, format!("{f} must be positive")));
            }
        }
        if f0_hz == f1_hz {
            return Err(Error::invalid("f1_hz", "the two tones must differ"));
        }
        if !(chip_s.is_finite() && chip_s > 0.0) {
            return Err(Error::invalid("chip_s", format!("{chip_s} must be positive")));
        }
        if chips_per_bit == 0 {
            return Err(Error::invalid("chips_per_bit", "must be at least 1"));
        }
        let bit = chip_s * chips_per_bit as f64;
        for (name, f) in [("f0_hz", f0_hz), ("f1_hz", f1_hz)] {
            let cycles = bit * f;
            if cycles < 1.0 - 1e-9 || (cycles - cycles.round()).abs() > 1e-6 {
                return Err(Error::invalid(
                    name,
                    format!("{cycles:.6} periods per {:.3} ms bit; need a whole number", bit * 1e3),
                ));
            }
        }
        Ok(Self {
            f0_hz,
            f1_hz,
            chip_s,
            chips_per_bit,
        })
    }

    pub fn f0_hz(&self) -> f64 {
        self.f0_hz
    }

    pub fn f1_hz(&self) -> f64 {
        self.f1_hz
    }

    pub fn chip_s(&self) -> f64 {
        self.chip_s
    }

    pub fn chips_per_bit(&self) -> u32 {
        self.chips_per_bit
    }

    pub fn bit_duration(&self) -> f64 {
        self.chip_s * self.chips_per_bit as f64
    }

    /// Tone carrying bit value `bit` (0 or 1).
    pub fn tone_hz(&self, bit: u8) -> f64 {
        if bit == 0 {
            self.f0_hz
        } else {
            self.f1_hz
        }
    }
}

/// Antenna state of a tag at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReflectionState {
    Reflective,
    Transparent,
    /// Waiting or outside the sequence: no modulation.
    Idle,
}

impl ReflectionState {
    pub fn value(self) -> f64 {
        match self {
            ReflectionState::Reflective => 1.0,
            ReflectionState::Transparent => -1.0,
            ReflectionState::Idle => 0.0,
        }
    }
}

/// Phase slack so instants that sit on a transition up to rounding are
/// classified the same way by the tag and by the receiver.
const PHASE_SLACK: f64 = 1e-9;

/// 50% duty square wave, +1 over the first half of each period, with
/// phase zero at `dt = 0`.
pub fn square_wave(freq_hz: f64, dt: f64) -> i8 {
    let phase = (dt * freq_hz + PHASE_SLACK).rem_euclid(1.0);
    if phase < 0.5 {
        1
    } else {
        -1
    }
}

/// Reflection state at time `t` measured from the start of the sequence.
pub fn reflection_state(bits: &BitSequence, fsk: &FskParams, t: f64) -> ReflectionState {
    let tb = fsk.bit_duration();
    if !(t >= 0.0) || t >= tb * bits.len() as f64 {
        return ReflectionState::Idle;
    }
    let n = ((t / tb + PHASE_SLACK).floor() as usize).min(bits.len() - 1);
    let within = t - n as f64 * tb;
    match square_wave(fsk.tone_hz(bits.bits()[n]), within) {
        1 => ReflectionState::Reflective,
        _ => ReflectionState::Transparent,
    }
}
