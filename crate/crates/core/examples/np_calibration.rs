//! H0 calibration: estimate the variance of the combined contrast over
//! tag-free captures, derive Neyman-Pearson thresholds, then count how
//! often fresh H0 windows cross them.
//!
//!     cargo run --release --example np_calibration [sigma2] [trials]

use num_complex::Complex64;
use zed_detect::channel::{reference_params, ChannelCoeffs, NoiseModel, PhaseJitter};
use zed_detect::detector::{np_threshold, q_function, DetectorConfig, SearchParams, Smoothing};
use zed_detect::harness::{binomial_std, calibrate_h0, count_exceedances, Scenario, TrialSpec};
use zed_detect::sequences::npc25;

fn main() -> zed_detect::Result<()> {
    let mut args = std::env::args().skip(1);
    let sigma2: f64 = args.next().map_or(1.0, |s| s.parse().expect("sigma2"));
    let trials: usize = args.next().map_or(8, |s| s.parse().expect("trials"));

    let p = reference_params();
    let k = p.grid.subcarriers();
    let scenario = Scenario {
        grid: p.grid,
        channel: ChannelCoeffs::flat(k, Complex64::new(1.0, 0.0)),
        noise: NoiseModel { sigma2, jitter: PhaseJitter::RandomWalk { step_rad: 0.005 }, seed: 0 },
        tags: vec![],
        detector: DetectorConfig {
            code: npc25(),
            fsk: p.fsk,
            sigma2,
            smoothing: Smoothing::Power { cutoff_hz: p.cutoff_hz, order: p.filter_order },
        },
        search: SearchParams { t_obs_s: p.t_obs(), g_psl_db: p.g_psl_db, margin_db: p.margin_db, exclusion_s: p.fsk.bit_duration() },
        capture_s: 10.0,
    };
    let mut spec = TrialSpec {
        scenario,
        p_fa_targets: vec![1e-1, 1e-2, 1e-3],
        n_trials: trials,
        seed_base: 1,
        window_stride: 1,
        primary_tolerance: 1,
        secondary_tolerance_s: 0.5 * p.fsk.bit_duration(),
        workers: 1,
    };

    let cal = calibrate_h0(&spec)?;
    let m = cal.moments;
    println!("sigma2 = {sigma2}, {} subcarriers, {} windows", k, m.count);
    println!(
        "var_hat = {:.4e} (std {:.4e}); mean {:.2e}, skewness {:.3}, excess kurtosis {:.3}",
        cal.var_hat,
        cal.var_hat.sqrt(),
        m.mean,
        m.skewness,
        m.excess_kurtosis
    );

    // Held-out captures; one window per bit keeps neighbours nearly independent.
    spec.seed_base = 10_000;
    spec.window_stride = 64;
    let thresholds: Vec<f64> = spec.p_fa_targets.iter().map(|&p| np_threshold(cal.var_hat, p)).collect::<Result<_, _>>()?;
    let ex = count_exceedances(&spec, &thresholds)?;
    println!("\n{:>8} {:>12} {:>10} {:>10}", "p_fa", "r*", "observed", "3 sd");
    for (i, (&p_fa, &r)) in spec.p_fa_targets.iter().zip(&thresholds).enumerate() {
        println!("{p_fa:>8.0e} {r:>12.4e} {:>10.5} {:>10.5}", ex.rate(i), 3.0 * binomial_std(p_fa, ex.windows));
        debug_assert!((q_function(r / cal.var_hat.sqrt()) - p_fa).abs() < 1e-9);
    }
    println!("({} held-out windows)", ex.windows);
    Ok(())
}
