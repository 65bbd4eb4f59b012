//! Code-matched contrast and the multi-subcarrier combiner.

use super::correlator::{CorrelatorOutput, CorrelatorTrace};
use crate::error::{Error, Result};
use crate::sequences::BitSequence;

/// `|e1|^2 - |e0|^2` corrected for sampling imbalance. Equals the path
/// power when bit 1 is aligned and its negative when bit 0 is.
pub fn power_difference(out: &CorrelatorOutput, sigma2: f64) -> f64 {
    out.e1.norm_sqr() - out.e0.norm_sqr() - out.counts.imbalance(1, sigma2)
}

/// Per-subcarrier contrast `R[k][n]` with an integer stride of `delta_t`
/// start indices between bits, for every `n` whose last bit fits.
pub fn contrast(
    trace: &CorrelatorTrace,
    code: &BitSequence,
    delta_t: usize,
    sigma2: f64,
) -> Result<Vec<Vec<f64>>> {
    if delta_t == 0 {
        return Err(Error::invalid("delta_t", "stride must be at least 1"));
    }
    let span = (code.len() - 1) * delta_t;
    if trace.len() <= span {
        return Err(Error::OutOfRange {
            index: span,
            valid_from: 0,
            valid_to: trace.len(),
        });
    }
    let positions = trace.len() - span;
    let signs = code.bipolar();
    let inv_n = 1.0 / code.len() as f64;
    Ok((0..trace.e0.len())
        .map(|k| {
            let d: Vec<f64> = (0..trace.len())
                .map(|n| power_difference(&trace.output(k, n), sigma2))
                .collect();
            (0..positions)
                .map(|n| {
                    inv_n
                        * signs
                            .iter()
                            .enumerate()
                            .map(|(m, &s)| s as f64 * d[n + m * delta_t])
                            .sum::<f64>()
                })
                .collect()
        })
        .collect())
}

/// `R_M[n] = (1/K) Σ_k R[k][n] / λ[k][n]`.
pub fn combine(r: &[Vec<f64>], lambda: &[Vec<f64>]) -> Result<Vec<f64>> {
    if r.is_empty() || r.len() != lambda.len() {
        return Err(Error::invalid(
            "lambda",
            format!("{} weight rows for {} contrast rows", lambda.len(), r.len()),
        ));
    }
    let n = r[0].len();
    let mut out = vec![0.0; n];
    for (rk, lk) in r.iter().zip(lambda) {
        if rk.len() != n || lk.len() != n {
            return Err(Error::invalid("lambda", "rows differ in length"));
        }
        for (i, (v, w)) in rk.iter().zip(lk).enumerate() {
            if !(*w > 0.0) {
                return Err(Error::invalid("lambda", format!("weight {w} at index {i} must be positive")));
            }
            out[i] += v / w;
        }
    }
    let k = r.len() as f64;
    Ok(out.into_iter().map(|v| v / k).collect())
}
