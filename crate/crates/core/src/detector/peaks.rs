//! Primary and secondary peak search on the combined contrast.

use std::fmt;

/// Contrast in dB. The contrast scales with the code autocorrelation, so
/// amplitude convention (20·log10) puts it on the same scale as the PSL.
pub fn contrast_db(value: f64) -> f64 {
    20.0 * value.log10()
}

pub fn db_to_contrast(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Floor a secondary peak must clear: `P0 - G_PSL + M` in dB.
pub fn secondary_threshold(p0_db: f64, g_psl_db: f64, margin_db: f64) -> f64 {
    p0_db - g_psl_db + margin_db
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub value: f64,
}

impl Peak {
    pub fn power_db(&self) -> f64 {
        contrast_db(self.value)
    }
}

/// Index of the largest finite value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        if best.is_none_or(|b| *v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Strongest value of `r_m` if it exceeds `r_star`.
pub fn detect_primary(r_m: &[f64], r_star: f64) -> Option<Peak> {
    let index = argmax(r_m)?;
    (r_m[index] > r_star).then_some(Peak {
        index,
        value: r_m[index],
    })
}

/// Strongest value within `half_window` indices of the primary but more
/// than `exclusion` away from it, if it clears both `r_star` and `s_db`.
pub fn detect_secondary(
    r_m: &[f64],
    primary: &Peak,
    r_star: f64,
    s_db: f64,
    half_window: usize,
    exclusion: usize,
) -> Option<Peak> {
    let lo = primary.index.saturating_sub(half_window);
    let hi = (primary.index + half_window + 1).min(r_m.len());
    let floor = r_star.max(db_to_contrast(s_db));
    let mut best: Option<Peak> = None;
    for (i, &v) in r_m.iter().enumerate().take(hi).skip(lo) {
        if i.abs_diff(primary.index) <= exclusion || v.is_nan() || v <= floor {
            continue;
        }
        if best.is_none_or(|b| v > b.value) {
            best = Some(Peak { index: i, value: v });
        }
    }
    best
}

/// Parameters of the windowed search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    /// Observation window length.
    pub t_obs_s: f64,
    pub g_psl_db: f64,
    pub margin_db: f64,
    /// Half-width of the zone around the primary excluded from the
    /// secondary search.
    pub exclusion_s: f64,
}

/// Detections in one observation window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowReport {
    pub window: usize,
    /// Contrast index range `[start, end)` covered.
    pub start: usize,
    pub end: usize,
    pub primary: Option<Peak>,
    pub s_db: Option<f64>,
    pub secondary: Option<Peak>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub r_star: f64,
    pub windows: Vec<WindowReport>,
}

/// Splits the trace into consecutive windows of `t_obs_s` (dropping a
/// trailing partial window), then searches each for a primary and a
/// secondary peak. `times[n]` is the time of contrast index `n`.
pub fn detect(r_m: &[f64], times: &[f64], r_star: f64, params: &SearchParams) -> DetectionReport {
    let mut windows = Vec::new();
    if r_m.is_empty() {
        return DetectionReport { r_star, windows };
    }
    let stride = if times.len() > 1 {
        (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64
    } else {
        1.0
    };
    let half_window = (0.5 * params.t_obs_s / stride).floor() as usize;
    let exclusion = (params.exclusion_s / stride).round() as usize;
    let t0 = times[0];
    let mut start = 0;
    let mut w = 0;
    loop {
        let edge = t0 + (w + 1) as f64 * params.t_obs_s;
        if times[times.len() - 1] < edge {
            break;
        }
        let end = start + times[start..].partition_point(|&t| t < edge);
        let primary = detect_primary(&r_m[start..end], r_star).map(|p| Peak {
            index: p.index + start,
            ..p
        });
        let s_db = primary.map(|p| secondary_threshold(p.power_db(), params.g_psl_db, params.margin_db));
        let secondary = primary.and_then(|p| {
            detect_secondary(r_m, &p, r_star, s_db.unwrap_or(f64::INFINITY), half_window, exclusion)
        });
        windows.push(WindowReport {
            window: w,
            start,
            end,
            primary,
            s_db,
            secondary,
        });
        start = end;
        w += 1;
    }
    DetectionReport { r_star, windows }
}

impl fmt::Display for DetectionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "r_star = {:.6e}", self.r_star)?;
        for w in &self.windows {
            write!(f, "window {} [{}, {}):", w.window, w.start, w.end)?;
            match (w.primary, w.s_db) {
                (Some(p), Some(s)) => {
                    write!(f, " primary n={} ({:.2} dB), s = {:.2} dB", p.index, p.power_db(), s)?;
                    match w.secondary {
                        Some(q) => writeln!(f, ", secondary n={} ({:.2} dB)", q.index, q.power_db())?,
                        None => writeln!(f, ", no secondary")?,
                    }
                }
                _ => writeln!(f, " nothing above threshold")?,
            }
        }
        Ok(())
    }
}
