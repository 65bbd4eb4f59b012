use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const SYMBOLS_PER_TTI: usize = 14;

/// Absorbs rounding when comparing sample instants with window edges.
pub const TIME_SLACK: f64 = 1e-12;

/// Timing of the cell-specific reference signals: two RS-bearing OFDM
/// symbols per 14-symbol TTI on `4 * n_rb` subcarriers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    n_rb: usize,
    t_ofdm_s: f64,
    rs_symbols: [usize; 2],
    pilot_power: f64,
}

impl GridParams {
    pub fn new(n_rb: usize, t_ofdm_s: f64, rs_symbols: [usize; 2], pilot_power: f64) -> Result<Self> {
        if n_rb == 0 {
            return Err(Error::invalid("n_rb", "need at least one resource block"));
        }
        if !(t_ofdm_s.is_finite() && t_ofdm_s > 0.0) {
            return Err(Error::invalid("t_ofdm", format!("{t_ofdm_s} must be positive")));
        }
        if rs_symbols[0] >= rs_symbols[1] || rs_symbols[1] >= SYMBOLS_PER_TTI {
            return Err(Error::invalid(
                "rs_symbols",
                format!("{rs_symbols:?} must be two increasing positions below {SYMBOLS_PER_TTI}"),
            ));
        }
        if !(pilot_power.is_finite() && pilot_power > 0.0) {
            return Err(Error::invalid("pilot_power", format!("{pilot_power} must be positive")));
        }
        Ok(Self {
            n_rb,
            t_ofdm_s,
            rs_symbols,
            pilot_power,
        })
    }

    pub fn n_rb(&self) -> usize {
        self.n_rb
    }

    pub fn subcarriers(&self) -> usize {
        4 * self.n_rb
    }

    pub fn t_ofdm(&self) -> f64 {
        self.t_ofdm_s
    }

    pub fn rs_symbols(&self) -> [usize; 2] {
        self.rs_symbols
    }

    pub fn pilot_power(&self) -> f64 {
        self.pilot_power
    }

    pub fn tti(&self) -> f64 {
        SYMBOLS_PER_TTI as f64 * self.t_ofdm_s
    }

    /// Time of RS instant `l` (shared by every subcarrier).
    pub fn rs_time(&self, l: usize) -> f64 {
        (l / 2) as f64 * self.tti() + self.rs_symbols[l % 2] as f64 * self.t_ofdm_s
    }

    fn rs_time_signed(&self, l: i64) -> f64 {
        let q = l.div_euclid(2);
        q as f64 * self.tti() + self.rs_symbols[l.rem_euclid(2) as usize] as f64 * self.t_ofdm_s
    }

    /// Fractional RS index of time `t`: linear between neighbouring RS
    /// instants, so `rs_position(rs_time(l)) == l`.
    pub fn rs_position(&self, t: f64) -> f64 {
        let tti = self.tti();
        let q = (t / tti).floor() as i64;
        let r = t - q as f64 * tti;
        let p0 = self.rs_symbols[0] as f64 * self.t_ofdm_s;
        let p1 = self.rs_symbols[1] as f64 * self.t_ofdm_s;
        let mut l = 2 * q + if r >= p1 { 1 } else { 0 } - if r < p0 { 1 } else { 0 };
        // Guard against rounding at segment edges.
        while self.rs_time_signed(l) > t {
            l -= 1;
        }
        while self.rs_time_signed(l + 1) <= t {
            l += 1;
        }
        let t0 = self.rs_time_signed(l);
        let t1 = self.rs_time_signed(l + 1);
        l as f64 + (t - t0) / (t1 - t0)
    }

    /// Smallest RS index whose time is `>= t` (0 for negative `t`).
    /// Instants within [`TIME_SLACK`] below `t` count as at `t`.
    pub fn first_at_or_after(&self, t: f64) -> usize {
        let t = t - TIME_SLACK;
        if t <= 0.0 {
            return 0;
        }
        let mut l = self.rs_position(t).ceil().max(0.0) as usize;
        while l > 0 && self.rs_time(l - 1) >= t {
            l -= 1;
        }
        while self.rs_time(l) < t {
            l += 1;
        }
        l
    }

    /// Number of RS instants in `[0, duration)`.
    pub fn rs_count(&self, duration: f64) -> usize {
        self.first_at_or_after(duration)
    }

    /// Mean RS rate in Hz (two instants per TTI).
    pub fn rs_rate(&self) -> f64 {
        2.0 / self.tti()
    }
}

/// Received RS samples, one row of `len()` instants per subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    params: GridParams,
    len: usize,
    data: Vec<Complex64>,
}

impl ResourceGrid {
    pub fn zeros(params: GridParams, len: usize) -> Self {
        Self {
            params,
            len,
            data: vec![Complex64::new(0.0, 0.0); params.subcarriers() * len],
        }
    }

    /// Builds a grid from per-subcarrier rows of equal length.
    pub fn from_rows(params: GridParams, rows: Vec<Vec<Complex64>>) -> Result<Self> {
        if rows.len() != params.subcarriers() {
            return Err(Error::invalid(
                "rows",
                format!("{} rows for {} subcarriers", rows.len(), params.subcarriers()),
            ));
        }
        let len = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != len) {
            return Err(Error::invalid("rows", "rows differ in length"));
        }
        Ok(Self {
            params,
            len,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }

    pub fn subcarriers(&self) -> usize {
        self.params.subcarriers()
    }

    /// Number of RS instants per subcarrier.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn time(&self, l: usize) -> f64 {
        self.params.rs_time(l)
    }

    pub fn duration(&self) -> f64 {
        self.params.rs_time(self.len)
    }

    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.data[k * self.len..(k + 1) * self.len]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [Complex64] {
        &mut self.data[k * self.len..(k + 1) * self.len]
    }

    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        self.data[k * self.len + l]
    }

    /// CSV with columns `k,l,t_seconds,re,im`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "l", "t_seconds", "re", "im"])?;
        for k in 0..self.subcarriers() {
            for (l, y) in self.row(k).iter().enumerate() {
                w.write_record(&[
                    k.to_string(),
                    l.to_string(),
                    format!("{:.9}", self.time(l)),
                    format!("{:e}", y.re),
                    format!("{:e}", y.im),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lte() -> GridParams {
        GridParams::new(6, 71.35e-6, [0, 7], 1.0).unwrap()
    }

    #[test]
    fn rs_time_examples() {
        let g = lte();
        assert_eq!(g.rs_time(0), 0.0);
        assert!((g.rs_time(1) - 499.45e-6).abs() < 1e-15);
        assert!((g.rs_time(2) - 998.9e-6).abs() < 1e-15);
        assert_eq!(g.subcarriers(), 24);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(GridParams::new(0, 71.35e-6, [0, 7], 1.0).is_err());
        assert!(GridParams::new(6, 0.0, [0, 7], 1.0).is_err());
        assert!(GridParams::new(6, 71.35e-6, [7, 7], 1.0).is_err());
        assert!(GridParams::new(6, 71.35e-6, [0, 14], 1.0).is_err());
        assert!(GridParams::new(6, 71.35e-6, [0, 7], 0.0).is_err());
    }

    #[test]
    fn counts_and_first_index() {
        let g = lte();
        assert_eq!(g.rs_count(0.0), 0);
        assert_eq!(g.rs_count(1e-9), 1);
        assert_eq!(g.rs_count(g.rs_time(10)), 10);
        assert_eq!(g.first_at_or_after(g.rs_time(7) + 1e-9), 8);
    }

    #[test]
    fn uneven_rs_positions() {
        let g = GridParams::new(1, 1.0, [0, 4], 1.0).unwrap();
        assert_eq!(g.rs_time(1), 4.0);
        assert_eq!(g.rs_time(2), 14.0);
        assert!((g.rs_position(2.0) - 0.5).abs() < 1e-12);
        assert!((g.rs_position(9.0) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn csv_export_shape() {
        let g = GridParams::new(1, 71.35e-6, [0, 7], 1.0).unwrap();
        let grid = ResourceGrid::zeros(g, 3);
        let mut buf = Vec::new();
        grid.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 4 * 3);
        assert!(text.starts_with("k,l,t_seconds,re,im\n"));
    }

    proptest! {
        #[test]
        fn time_map_is_increasing_and_invertible(l in 0usize..100_000) {
            let g = lte();
            prop_assert!(g.rs_time(l + 1) > g.rs_time(l));
            prop_assert!((g.rs_position(g.rs_time(l)) - l as f64).abs() < 1e-9);
            prop_assert_eq!(g.first_at_or_after(g.rs_time(l)), l);
        }

        #[test]
        fn position_brackets_time(t in 0.0f64..20.0) {
            let g = lte();
            let p = g.rs_position(t);
            let l = p.floor() as usize;
            prop_assert!(g.rs_time(l) <= t + 1e-12);
            prop_assert!(g.rs_time(l + 1) > t - 1e-12);
        }
    }
}
