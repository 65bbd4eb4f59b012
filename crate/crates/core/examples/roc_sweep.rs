//! Detection probability against path power: Monte Carlo at the true
//! alignment versus the Gaussian law Q((r* - eta2)/sqrt(var)).
//!
//! Uses the unsmoothed chain, whose H0 variance has a closed form.
//!
//!     cargo run --release --example roc_sweep [n_rb] [trials]

use std::time::Instant;

use num_complex::Complex64;
use zed_detect::channel::{reference_params, ChannelCoeffs, GridParams, NoiseModel, PhaseJitter};
use zed_detect::detector::{analytic_h0_variance, np_threshold, q_inverse, DetectorConfig, SearchParams, Smoothing};
use zed_detect::harness::{roc_sweep, Scenario, TagSpec, TrialSpec};
use zed_detect::sequences::npc25;

const SIGMA2: f64 = 1.0;
const P_FA: f64 = 1e-2;

fn main() -> zed_detect::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_rb: usize = args.next().map_or(25, |s| s.parse().expect("n_rb"));
    let trials: usize = args.next().map_or(2000, |s| s.parse().expect("trials"));

    let p = reference_params();
    let grid = GridParams::new(n_rb, p.grid.t_ofdm(), p.grid.rs_symbols(), 1.0)?;
    let k = grid.subcarriers();
    let detector = DetectorConfig { code: npc25(), fsk: p.fsk, sigma2: SIGMA2, smoothing: Smoothing::Off };
    let var = analytic_h0_variance(&grid, &detector)?;

    // A short idle gap keeps each capture to one sequence.
    let mut tag = p.tag_a(Complex64::new(0.1, 0.0), 0.0);
    tag.wait_s = 0.02;
    tag.start_offset_s = 0.01;
    tag.reflect = vec![Complex64::new(0.1, 0.0); k];
    let spec = TrialSpec {
        scenario: Scenario {
            grid,
            channel: ChannelCoeffs::flat(k, Complex64::new(1.0, 0.0)),
            noise: NoiseModel { sigma2: SIGMA2, jitter: PhaseJitter::None, seed: 0 },
            tags: vec![TagSpec::fixed(tag)],
            detector,
            search: SearchParams { t_obs_s: p.t_obs(), g_psl_db: p.g_psl_db, margin_db: p.margin_db, exclusion_s: p.fsk.bit_duration() },
            capture_s: 0.85,
        },
        p_fa_targets: vec![P_FA],
        n_trials: trials,
        seed_base: 77,
        window_stride: 1,
        primary_tolerance: 1,
        secondary_tolerance_s: 0.5 * p.fsk.bit_duration(),
        workers: 1,
    };

    // Path powers that put the predicted P_D on a fixed ladder.
    let r_star = np_threshold(var, P_FA)?;
    let targets = [0.1, 0.3, 0.5, 0.7, 0.9, 0.99];
    let eta2: Vec<f64> = targets.iter().map(|&pd| Ok(r_star - var.sqrt() * q_inverse(pd)?)).collect::<zed_detect::Result<_>>()?;

    println!("{k} subcarriers, var {var:.4e}, r* {r_star:.4e}, {trials} trials per point");
    let t0 = Instant::now();
    let rows = roc_sweep(&spec, var, &eta2, &[P_FA])?;
    println!("{:>10} {:>10} {:>10} {:>8}", "eta2", "predicted", "observed", "gap");
    for r in &rows {
        println!("{:>10.4e} {:>10.4} {:>10.4} {:>+8.4}", r.eta2, r.p_d_predicted, r.p_d_observed, r.p_d_observed - r.p_d_predicted);
    }
    println!("{:.1} s", t0.elapsed().as_secs_f64());
    Ok(())
}
