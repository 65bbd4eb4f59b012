#![allow(dead_code)]

use num_complex::Complex64;
use zed_detect::channel::{reference_params, ChannelCoeffs, GridParams, NoiseModel, PhaseJitter, ZedConfig};
use zed_detect::detector::{DetectorConfig, SearchParams, Smoothing};
use zed_detect::harness::{Scenario, TagSpec, TrialSpec};
use zed_detect::sequences::npc25;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn detector(sigma2: f64, smoothing: Smoothing) -> DetectorConfig {
    DetectorConfig { code: npc25(), fsk: reference_params().fsk, sigma2, smoothing }
}

pub fn power() -> Smoothing {
    Smoothing::Power { cutoff_hz: 100.0, order: 4 }
}

pub fn search() -> SearchParams {
    SearchParams { t_obs_s: 1.4, g_psl_db: 21.93, margin_db: 6.0, exclusion_s: 0.032 }
}

/// Reference timing on `grid`, tags with flat reflections.
pub fn scenario(grid: GridParams, sigma2: f64, tags: Vec<TagSpec>, capture_s: f64) -> Scenario {
    Scenario {
        grid,
        channel: ChannelCoeffs::flat(grid.subcarriers(), c(1.0)),
        noise: NoiseModel { sigma2, jitter: PhaseJitter::RandomWalk { step_rad: 0.005 }, seed: 0 },
        tags,
        detector: detector(sigma2, power()),
        search: search(),
        capture_s,
    }
}

pub fn tag_a(grid: &GridParams, reflect: f64, start: f64) -> ZedConfig {
    let mut t = reference_params().tag_a(c(reflect), start);
    t.reflect = vec![c(reflect); grid.subcarriers()];
    t
}

pub fn tag_b(grid: &GridParams, reflect: f64, start: f64) -> ZedConfig {
    let mut t = reference_params().tag_b(c(reflect), start);
    t.reflect = vec![c(reflect); grid.subcarriers()];
    t
}

pub fn random(config: ZedConfig) -> TagSpec {
    TagSpec { config, random_start: true, random_phase: true }
}

pub fn spec(scenario: Scenario, n_trials: usize, seed_base: u64) -> TrialSpec {
    TrialSpec {
        scenario,
        p_fa_targets: vec![1e-2, 1e-3],
        n_trials,
        seed_base,
        window_stride: 1,
        primary_tolerance: 10,
        secondary_tolerance_s: 0.016,
        workers: 1,
    }
}
