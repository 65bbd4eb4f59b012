//! Correlators, smoothing, contrast, Neyman-Pearson thresholds and the
//! peak search.

mod contrast;
mod correlator;
mod filter;
mod np;
mod peaks;
mod pipeline;

pub use contrast::{combine, contrast, power_difference};
pub use correlator::{
    centered_prefix, correlate, correlate_samples, correlator_noise_var, path_power_estimate,
    signed_mean_difference, CorrelatorBank, CorrelatorOutput, CorrelatorTrace, ToneCounts,
    WindowPlan,
};
pub use filter::{lowpass, lowpass_complex, Butterworth};
pub use np::{detection_prob, false_alarm_prob, np_threshold, q_function, q_inverse, NpDecision};
pub use peaks::{
    argmax, contrast_db, db_to_contrast, detect, detect_primary, detect_secondary,
    secondary_threshold, DetectionReport, Peak, SearchParams, WindowReport,
};
pub use pipeline::{analytic_h0_variance, ContrastTrace, DetectorConfig, Receiver, Smoothing};
