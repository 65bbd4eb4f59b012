//! Monte Carlo experiments: H0 calibration, single- and two-tag trials,
//! ROC and margin sweeps.

mod stats;
mod trials;

pub use stats::{binomial_std, Moments};
pub use trials::{
    calibrate_h0, count_exceedances, margin_sweep, realize, roc_sweep, run_single_tag,
    run_two_tag, Exceedance, H0Calibration, MarginRow, PfaMetrics, RocRow, Scenario, TagSpec,
    TrialMetrics, TrialSpec, TwoTagMetrics, MIN_CALIBRATION_WINDOWS,
};
