use num_complex::Complex64;

use super::grid::GridParams;
use super::synth::ZedConfig;
use crate::sequences::{npc25, FskParams};

/// Constants of the reference over-the-air experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceParams {
    pub grid: GridParams,
    pub fsk: FskParams,
    pub bandwidth_hz: f64,
    pub fft_size: usize,
    pub cp_samples: usize,
    pub sequence_s: f64,
    pub cycle_a_s: f64,
    pub cycle_b_s: f64,
    pub wait_a_s: f64,
    pub wait_b_s: f64,
    pub g_psl_db: f64,
    pub margin_db: f64,
    pub cutoff_hz: f64,
    pub filter_order: usize,
}

impl ReferenceParams {
    /// Tag A template with a flat reflected response.
    pub fn tag_a(&self, reflect: Complex64, start_offset_s: f64) -> ZedConfig {
        self.tag(self.wait_a_s, reflect, start_offset_s)
    }

    pub fn tag_b(&self, reflect: Complex64, start_offset_s: f64) -> ZedConfig {
        self.tag(self.wait_b_s, reflect, start_offset_s)
    }

    fn tag(&self, wait_s: f64, reflect: Complex64, start_offset_s: f64) -> ZedConfig {
        ZedConfig {
            code: npc25(),
            fsk: self.fsk,
            wait_s,
            start_offset_s,
            reflect: vec![reflect; self.grid.subcarriers()],
        }
    }

    /// Observation window: the shorter of the two cycles.
    pub fn t_obs(&self) -> f64 {
        self.cycle_a_s.min(self.cycle_b_s)
    }
}

/// 2.5 MHz carrier, FFT 128, CP 8, T_ofdm = 71.35 µs, 125/500 Hz tones on
/// 32 ms bits, 0.8 s sequences, 1.4 s and 2.2 s cycles, 21.93 dB PSL gain
/// and 6 dB margin; 100 Hz fourth-order smoothing. Six resource blocks.
pub fn reference_params() -> ReferenceParams {
    let fsk = FskParams::new(125.0, 500.0, 1e-3, 32).expect("constants are valid");
    let sequence_s = 25.0 * fsk.bit_duration();
    ReferenceParams {
        grid: GridParams::new(6, 71.35e-6, [0, 7], 1.0).expect("constants are valid"),
        fsk,
        bandwidth_hz: 2.5e6,
        fft_size: 128,
        cp_samples: 8,
        sequence_s,
        cycle_a_s: 1.4,
        cycle_b_s: 2.2,
        wait_a_s: 1.4 - sequence_s,
        wait_b_s: 2.2 - sequence_s,
        g_psl_db: 21.93,
        margin_db: 6.0,
        cutoff_hz: 100.0,
        filter_order: 4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        let p = reference_params();
        assert_eq!(p.cycle_a_s, 1.4);
        assert!((p.wait_a_s - 0.6).abs() < 1e-12);
        assert!((p.wait_b_s - 1.4).abs() < 1e-12);
        assert_eq!(p.fsk.f1_hz() / p.fsk.f0_hz(), 4.0);
        assert!((p.sequence_s - 0.8).abs() < 1e-12);
        let a = p.tag_a(Complex64::new(0.1, 0.0), 0.0);
        assert!((a.cycle() - 1.4).abs() < 1e-12);
        assert!((p.tag_b(Complex64::new(0.1, 0.0), 0.0).cycle() - 2.2).abs() < 1e-12);
        assert_eq!(p.t_obs(), 1.4);
    }
}
