//! Two tags with the 1.4 s / 2.2 s cycles: how often the weaker one is
//! found next to the stronger one's sidelobes, per relative power.
//!
//!     cargo run --release --example two_tag_separation [trials]

use num_complex::Complex64;
use zed_detect::channel::{reference_params, ChannelCoeffs, NoiseModel, PhaseJitter};
use zed_detect::detector::{DetectorConfig, SearchParams, Smoothing};
use zed_detect::harness::{calibrate_h0, run_two_tag, Scenario, TagSpec, TrialSpec};
use zed_detect::sequences::npc25;

const SIGMA2: f64 = 0.01;
const REFLECT_A: f64 = 0.05;

fn main() -> zed_detect::Result<()> {
    let trials: usize = std::env::args().nth(1).map_or(20, |s| s.parse().expect("trials"));
    let p = reference_params();
    let k = p.grid.subcarriers();
    let tag = |cfg| TagSpec { config: cfg, random_start: true, random_phase: true };
    let base = Scenario {
        grid: p.grid,
        channel: ChannelCoeffs::flat(k, Complex64::new(1.0, 0.0)),
        noise: NoiseModel { sigma2: SIGMA2, jitter: PhaseJitter::RandomWalk { step_rad: 0.005 }, seed: 0 },
        tags: vec![],
        detector: DetectorConfig {
            code: npc25(),
            fsk: p.fsk,
            sigma2: SIGMA2,
            smoothing: Smoothing::Power { cutoff_hz: p.cutoff_hz, order: p.filter_order },
        },
        search: SearchParams { t_obs_s: p.t_obs(), g_psl_db: p.g_psl_db, margin_db: p.margin_db, exclusion_s: p.fsk.bit_duration() },
        capture_s: 15.0,
    };
    let mut spec = TrialSpec {
        scenario: base.clone(),
        p_fa_targets: vec![1e-3],
        n_trials: 4,
        seed_base: 500,
        window_stride: 1,
        // The 100 Hz smoothing flattens the peak over about 1/(2·100 Hz).
        primary_tolerance: (p.grid.rs_rate() / (2.0 * p.cutoff_hz)).round() as usize,
        secondary_tolerance_s: 0.5 * p.fsk.bit_duration(),
        workers: 1,
    };
    let var_hat = calibrate_h0(&spec)?.var_hat;
    println!("var_hat = {var_hat:.3e}");

    spec.n_trials = trials;
    println!(
        "{:>8} {:>8} {:>8} {:>8} | {:>9} {:>6} {:>7} {:>6}",
        "rel dB", "windows", "primary", "p false", "eligible", "found", "missed", "false"
    );
    for rel_db in [0.0, -10.0, -15.0, -20.0, -25.0] {
        // Contrast scales with amplitude squared: -X dB in contrast is -X/2 dB in amplitude.
        let b = REFLECT_A * 10f64.powf(rel_db / 40.0);
        spec.scenario.tags = vec![
            tag(p.tag_a(Complex64::new(REFLECT_A, 0.0), 0.0)),
            tag(p.tag_b(Complex64::new(b, 0.0), 0.0)),
        ];
        let m = run_two_tag(&spec, var_hat)?[0];
        println!(
            "{rel_db:>8.0} {:>8} {:>8} {:>8} | {:>9} {:>6} {:>7} {:>6}   rate {:.3}",
            m.windows, m.primary_correct, m.primary_false_alarms, m.secondary_eligible, m.secondary_correct, m.secondary_missed, m.secondary_false_alarms, m.secondary_rate()
        );
    }
    Ok(())
}
