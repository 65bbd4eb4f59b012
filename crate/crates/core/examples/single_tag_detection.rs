//! One tag at 1.4 s cycles: contrast trace, NP threshold, and the primary
//! peak in each observation window against the true sequence starts.
//!
//!     cargo run --release --example single_tag_detection [reflect]

use num_complex::Complex64;
use zed_detect::channel::{reference_params, synthesize, ChannelCoeffs, NoiseModel, PhaseJitter};
use zed_detect::detector::{detect, np_threshold, DetectorConfig, Receiver, SearchParams, Smoothing};
use zed_detect::harness::{calibrate_h0, Scenario, TrialSpec};
use zed_detect::sequences::npc25;

fn main() -> zed_detect::Result<()> {
    let reflect: f64 = std::env::args().nth(1).map_or(0.03, |s| s.parse().expect("reflect"));
    let p = reference_params();
    let k = p.grid.subcarriers();
    let sigma2 = 0.05;
    let noise = NoiseModel { sigma2, jitter: PhaseJitter::RandomWalk { step_rad: 0.005 }, seed: 21 };
    let detector = DetectorConfig {
        code: npc25(),
        fsk: p.fsk,
        sigma2,
        smoothing: Smoothing::Power { cutoff_hz: p.cutoff_hz, order: p.filter_order },
    };
    let search = SearchParams { t_obs_s: p.t_obs(), g_psl_db: p.g_psl_db, margin_db: p.margin_db, exclusion_s: p.fsk.bit_duration() };
    let channel = ChannelCoeffs::flat(k, Complex64::new(1.0, 0.0));

    // Threshold from tag-free captures.
    let h0 = TrialSpec {
        scenario: Scenario { grid: p.grid, channel: channel.clone(), noise, tags: vec![], detector: detector.clone(), search, capture_s: 8.0 },
        p_fa_targets: vec![1e-3],
        n_trials: 2,
        seed_base: 100,
        window_stride: 1,
        primary_tolerance: 1,
        secondary_tolerance_s: 0.016,
        workers: 1,
    };
    let var_hat = calibrate_h0(&h0)?.var_hat;
    let r_star = np_threshold(var_hat, 1e-3)?;

    let tag = p.tag_a(Complex64::new(reflect, 0.0), 0.37);
    let grid = synthesize(&p.grid, &[tag.clone()], &channel, &noise, 10.0)?;
    let rx = Receiver::new(&grid, &detector)?;
    let trace = rx.trace();
    let report = detect(&trace.combined, &trace.times, r_star, &search);

    println!("var_hat {var_hat:.3e}, r* {r_star:.3e} (p_fa 1e-3)");
    let truths = tag.sequence_starts(0.0, trace.times[trace.len() - 1]);
    let at: Vec<String> = truths.iter().map(|&t| format!("n={:.1}", p.grid.rs_position(t))).collect();
    println!("true starts: {}", at.join(" "));
    print!("{report}");
    Ok(())
}
