//! Reference-signal grid timing and received-signal synthesis.

mod grid;
mod reference;
mod synth;

pub use grid::{GridParams, ResourceGrid, SYMBOLS_PER_TTI, TIME_SLACK};
pub use reference::{reference_params, ReferenceParams};
pub use synth::{
    check_bit_timing, jitter_rotations, synthesize, ChannelCoeffs, NoiseModel, PhaseJitter,
    ZedConfig, TTI_ALIGNMENT_TOLERANCE,
};
