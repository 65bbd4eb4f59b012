//! Secondary false alarms and misses against the margin M in
//! s = P0 - G_PSL + M, for two tags at moderate SNR.
//!
//!     cargo run --release --example margin_sweep [sigma2] [relative_db] [trials]

use num_complex::Complex64;
use zed_detect::channel::{reference_params, ChannelCoeffs, NoiseModel, PhaseJitter};
use zed_detect::detector::{DetectorConfig, SearchParams, Smoothing};
use zed_detect::harness::{calibrate_h0, margin_sweep, Scenario, TagSpec, TrialSpec};
use zed_detect::sequences::npc25;

fn main() -> zed_detect::Result<()> {
    let mut args = std::env::args().skip(1);
    let sigma2: f64 = args.next().map_or(0.1, |s| s.parse().expect("sigma2"));
    let rel_db: f64 = args.next().map_or(-10.0, |s| s.parse().expect("relative_db"));
    let trials: usize = args.next().map_or(40, |s| s.parse().expect("trials"));

    let p = reference_params();
    let k = p.grid.subcarriers();
    let tag = |cfg| TagSpec { config: cfg, random_start: true, random_phase: true };
    let reflect_a = 0.05;
    let reflect_b = reflect_a * 10f64.powf(rel_db / 40.0);
    let scenario = Scenario {
        grid: p.grid,
        channel: ChannelCoeffs::flat(k, Complex64::new(1.0, 0.0)),
        noise: NoiseModel { sigma2, jitter: PhaseJitter::RandomWalk { step_rad: 0.005 }, seed: 0 },
        tags: vec![
            tag(p.tag_a(Complex64::new(reflect_a, 0.0), 0.0)),
            tag(p.tag_b(Complex64::new(reflect_b, 0.0), 0.0)),
        ],
        detector: DetectorConfig {
            code: npc25(),
            fsk: p.fsk,
            sigma2,
            smoothing: Smoothing::Power { cutoff_hz: p.cutoff_hz, order: p.filter_order },
        },
        search: SearchParams { t_obs_s: p.t_obs(), g_psl_db: p.g_psl_db, margin_db: p.margin_db, exclusion_s: p.fsk.bit_duration() },
        capture_s: 15.0,
    };
    let spec = TrialSpec {
        scenario,
        p_fa_targets: vec![1e-3],
        n_trials: trials,
        seed_base: 900,
        window_stride: 1,
        primary_tolerance: (p.grid.rs_rate() / (2.0 * p.cutoff_hz)).round() as usize,
        secondary_tolerance_s: 0.5 * p.fsk.bit_duration(),
        workers: 1,
    };
    let h0 = TrialSpec { scenario: spec.scenario.without_tags(), n_trials: 4, seed_base: 1, ..spec.clone() };
    let var_hat = calibrate_h0(&h0)?.var_hat;
    println!("sigma2 {sigma2}, tag B at {rel_db} dB, var_hat {var_hat:.3e}");

    let rows = margin_sweep(&spec, var_hat, &[0.0, 2.0, 4.0, 6.0, 8.0, 10.0])?;
    println!("{:>6} {:>6} {:>6} {:>6}", "M dB", "FA", "MD", "sum");
    for r in &rows {
        println!("{:>6.1} {:>6} {:>6} {:>6}", r.margin_db, r.false_alarms, r.missed_detections, r.false_alarms + r.missed_detections);
    }
    let best = rows.iter().min_by_key(|r| r.false_alarms + r.missed_detections).expect("non-empty");
    println!("minimum at M = {} dB over {} windows", best.margin_db, best.metrics.windows);
    Ok(())
}
