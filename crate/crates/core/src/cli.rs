//! Command-line front end: `detect`, `calibrate`, `sweep-roc`,
//! `sweep-margin` and `psl`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::detector::{contrast_db, detect, np_threshold, Receiver};
use crate::error::{Error, Result};
use crate::harness::{
    calibrate_h0, count_exceedances, margin_sweep, realize, roc_sweep, run_single_tag, run_two_tag,
};
use crate::scenario::{Experiment, Overrides, ScenarioFile};
use crate::sequences::{aperiodic_autocorrelation, max_sidelobe, npc25, psl_db, BitSequence};

#[derive(Debug, Parser)]
#[command(name = "zed-detect", version, about = "Backscatter beacon detection over an LTE reference-signal grid")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize captures, run the detector and classify peaks.
    Detect(CommonArgs),
    /// Estimate the H0 variance of the combined contrast.
    Calibrate(CommonArgs),
    /// Detection probability over the scenario's path-power grid.
    SweepRoc(CommonArgs),
    /// Secondary false alarms and misses over the scenario's margin grid.
    SweepMargin(CommonArgs),
    /// Peak-to-sidelobe level of a code.
    Psl(PslArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Comma-separated false-alarm targets, e.g. `1e-2,1e-3`.
    #[arg(long, value_delimiter = ',')]
    pub pfa: Option<Vec<f64>>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Also write the first capture's resource grid (`detect` only).
    #[arg(long)]
    pub grid_csv: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PslArgs {
    /// Code as comma-separated bits; the scenario's code or the 25-bit
    /// near-perfect code otherwise.
    #[arg(long)]
    pub code: Option<String>,
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Writes the autocorrelation table here when given.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Files produced by a command, written only once everything succeeded.
struct Outputs {
    dir: PathBuf,
    files: Vec<(&'static str, String)>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &'static str, body: String) {
        self.files.push((name, body));
    }

    fn write(self) -> Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        for (name, body) in self.files {
            std::fs::write(self.dir.join(name), body)?;
        }
        Ok(())
    }
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn load(args: &CommonArgs) -> Result<Experiment> {
    let file = ScenarioFile::load(&args.scenario)?;
    file.resolve(&Overrides {
        seed: args.seed,
        trials: args.trials,
        p_fa: args.pfa.clone(),
        workers: args.workers,
    })
}

/// Known variance from the file, or a fresh H0 calibration.
fn variance(exp: &Experiment, summary: &mut String) -> Result<f64> {
    if let Some(v) = exp.var_hat {
        writeln!(summary, "var_hat = {v:.4e} (from scenario)").ok();
        return Ok(v);
    }
    let cal = calibrate_h0(&exp.calibration)?;
    writeln!(
        summary,
        "var_hat = {:.4e} from {} H0 windows over {} captures (mean {:.3e}, skewness {:.4}, excess kurtosis {:.4})",
        cal.var_hat,
        cal.windows(),
        exp.calibration.n_trials,
        cal.moments.mean,
        cal.moments.skewness,
        cal.moments.excess_kurtosis
    )
    .ok();
    Ok(cal.var_hat)
}

fn f(v: f64) -> String {
    format!("{v:e}")
}

fn run_detect(args: &CommonArgs) -> Result<Outputs> {
    let exp = load(args)?;
    let mut summary = String::new();
    writeln!(summary, "scenario: {}", args.scenario.display()).ok();
    writeln!(summary, "tags: {}", exp.trial_names()).ok();
    let var_hat = variance(&exp, &mut summary)?;
    let spec = &exp.trials;
    let scn = &spec.scenario;
    let mut out = Outputs::new(&args.out);

    // First capture: full trace, per-subcarrier trace and peak report.
    let (grid, _) = realize(scn, spec.seed_base)?;
    let rx = Receiver::new(&grid, &scn.detector)?;
    let trace = rx.trace();
    let mut buf = Vec::new();
    trace.write_combined_csv(&mut buf)?;
    out.add("contrast.csv", String::from_utf8(buf).expect("utf-8"));
    let mut buf = Vec::new();
    trace.write_subcarrier_csv(&mut buf)?;
    out.add("subcarrier_contrast.csv", String::from_utf8(buf).expect("utf-8"));
    if args.grid_csv {
        let mut buf = Vec::new();
        grid.write_csv(&mut buf)?;
        out.add("grid.csv", String::from_utf8(buf).expect("utf-8"));
    }

    let mut rows = Vec::new();
    for &p in &spec.p_fa_targets {
        let r_star = np_threshold(var_hat, p)?;
        let report = detect(&trace.combined, &trace.times, r_star, &scn.search);
        for w in &report.windows {
            let peak = |p: Option<crate::detector::Peak>| match p {
                Some(p) => [p.index.to_string(), format!("{:.6}", trace.times[p.index]), format!("{:.3}", contrast_db(p.value))],
                None => [String::new(), String::new(), String::new()],
            };
            let mut row = vec![f(p), f(r_star), w.window.to_string(), w.start.to_string(), w.end.to_string()];
            row.extend(peak(w.primary));
            row.push(w.s_db.map(|s| format!("{s:.3}")).unwrap_or_default());
            row.extend(peak(w.secondary));
            rows.push(row);
        }
        if p == spec.p_fa_targets[0] {
            writeln!(summary, "\nfirst capture at p_fa = {p:e}:\n{report}").ok();
        }
    }
    out.add(
        "detections.csv",
        csv_string(
            &[
                "p_fa", "r_star", "window", "start_n", "end_n", "primary_n", "primary_t_seconds", "primary_db", "s_db",
                "secondary_n", "secondary_t_seconds", "secondary_db",
            ],
            rows,
        )?,
    );

    writeln!(summary, "trials: {} (seeds {}..)", spec.n_trials, spec.seed_base).ok();
    match scn.tags.len() {
        0 => {
            let thresholds: Vec<f64> = spec.p_fa_targets.iter().map(|&p| np_threshold(var_hat, p)).collect::<Result<_>>()?;
            let ex = count_exceedances(spec, &thresholds)?;
            let mut rows = Vec::new();
            for (i, (&p, &r)) in spec.p_fa_targets.iter().zip(&thresholds).enumerate() {
                writeln!(
                    summary,
                    "p_fa {p:e}: r* = {r:.4e}, declared-detection rate {:.5} ({} of {} windows)",
                    ex.rate(i),
                    ex.exceed[i],
                    ex.windows
                )
                .ok();
                rows.push(vec![f(p), f(r), ex.windows.to_string(), ex.exceed[i].to_string(), f(ex.rate(i))]);
            }
            out.add("metrics.csv", csv_string(&["p_fa", "r_star", "windows", "declared", "declared_rate"], rows)?);
        }
        1 => {
            let m = run_single_tag(spec, var_hat)?;
            let mut rows = Vec::new();
            for t in &m.per_target {
                writeln!(
                    summary,
                    "p_fa {:e}: r* = {:.4e}, P_D(aligned) = {:.4} over {} occurrences; windows {}: correct {}, missed {}, false alarms {}",
                    t.p_fa, t.r_star, t.p_d_observed(), t.aligned_tests, t.windows, t.correct_detections, t.missed_detections, t.false_alarms
                )
                .ok();
                rows.push(vec![
                    f(t.p_fa), f(t.r_star), t.aligned_tests.to_string(), t.aligned_detections.to_string(), f(t.p_d_observed()),
                    t.windows.to_string(), t.declared.to_string(), t.correct_detections.to_string(),
                    t.missed_detections.to_string(), t.false_alarms.to_string(),
                ]);
            }
            if !m.timing_errors_s.is_empty() {
                let worst = m.timing_errors_s.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                writeln!(summary, "largest timing error of correct primaries: {:.3} ms", worst * 1e3).ok();
            }
            out.add(
                "metrics.csv",
                csv_string(
                    &["p_fa", "r_star", "aligned_tests", "aligned_detections", "p_d_observed", "windows", "declared",
                      "correct", "missed", "false_alarms"],
                    rows,
                )?,
            );
        }
        _ => {
            let ms = run_two_tag(spec, var_hat)?;
            let mut rows = Vec::new();
            for m in &ms {
                writeln!(
                    summary,
                    "p_fa {:e}: windows {}, primary correct/missed/false {}/{}/{}, secondary eligible {} correct {} missed {} false {} (rate {:.3})",
                    m.p_fa, m.windows, m.primary_correct, m.primary_missed, m.primary_false_alarms,
                    m.secondary_eligible, m.secondary_correct, m.secondary_missed, m.secondary_false_alarms, m.secondary_rate()
                )
                .ok();
                rows.push(vec![
                    f(m.p_fa), f(m.r_star), m.windows.to_string(), m.primary_correct.to_string(), m.primary_missed.to_string(),
                    m.primary_false_alarms.to_string(), m.secondary_eligible.to_string(), m.secondary_correct.to_string(),
                    m.secondary_missed.to_string(), m.secondary_false_alarms.to_string(),
                ]);
            }
            out.add(
                "metrics.csv",
                csv_string(
                    &["p_fa", "r_star", "windows", "primary_correct", "primary_missed", "primary_false_alarms",
                      "secondary_eligible", "secondary_correct", "secondary_missed", "secondary_false_alarms"],
                    rows,
                )?,
            );
        }
    }
    out.add("summary.txt", summary);
    Ok(out)
}

fn run_calibrate(args: &CommonArgs) -> Result<Outputs> {
    let exp = load(args)?;
    let cal = calibrate_h0(&exp.calibration)?;
    let m = cal.moments;
    let mut out = Outputs::new(&args.out);
    out.add(
        "calibration.csv",
        csv_string(
            &["var_hat", "mean", "std_error", "skewness", "excess_kurtosis", "windows", "captures"],
            [vec![f(cal.var_hat), f(m.mean), f(m.std_error()), f(m.skewness), f(m.excess_kurtosis),
                  m.count.to_string(), exp.calibration.n_trials.to_string()]],
        )?,
    );
    let rows = exp
        .trials
        .p_fa_targets
        .iter()
        .map(|&p| Ok(vec![f(p), f(np_threshold(cal.var_hat, p)?)]))
        .collect::<Result<Vec<_>>>()?;
    out.add("thresholds.csv", csv_string(&["p_fa", "r_star"], rows)?);
    let mut summary = String::new();
    if !exp.trials.scenario.tags.is_empty() {
        writeln!(summary, "tags in the scenario are ignored for calibration").ok();
    }
    writeln!(
        summary,
        "var_hat = {:.4e} over {} windows ({} captures)\nmean = {:.3e} (standard error {:.3e})\nskewness = {:.4}, excess kurtosis = {:.4}",
        cal.var_hat, m.count, exp.calibration.n_trials, m.mean, m.std_error(), m.skewness, m.excess_kurtosis
    )
    .ok();
    out.add("summary.txt", summary);
    Ok(out)
}

fn run_sweep_roc(args: &CommonArgs) -> Result<Outputs> {
    let exp = load(args)?;
    if exp.eta2.is_empty() {
        return Err(Error::invalid("sweep.eta2", "sweep-roc needs a path-power grid in the scenario"));
    }
    let mut summary = String::new();
    let var_hat = variance(&exp, &mut summary)?;
    let rows = roc_sweep(&exp.trials, var_hat, &exp.eta2, &exp.trials.p_fa_targets)?;
    let mut gap: f64 = 0.0;
    let table = rows
        .iter()
        .map(|r| {
            gap = gap.max((r.p_d_observed - r.p_d_predicted).abs());
            vec![f(r.eta2), f(r.p_fa), f(r.r_star), f(r.p_d_predicted), f(r.p_d_observed), r.trials.to_string()]
        })
        .collect::<Vec<_>>();
    writeln!(summary, "{} points, {} trials each; largest |observed - predicted| = {gap:.4}", rows.len(), exp.trials.n_trials).ok();
    let mut out = Outputs::new(&args.out);
    out.add("roc.csv", csv_string(&["eta2", "p_fa", "r_star", "p_d_predicted", "p_d_observed", "trials"], table)?);
    out.add("summary.txt", summary);
    Ok(out)
}

fn run_sweep_margin(args: &CommonArgs) -> Result<Outputs> {
    let exp = load(args)?;
    if exp.margins_db.is_empty() {
        return Err(Error::invalid("sweep.margins_db", "sweep-margin needs a margin grid in the scenario"));
    }
    let mut summary = String::new();
    let var_hat = variance(&exp, &mut summary)?;
    let rows = margin_sweep(&exp.trials, var_hat, &exp.margins_db)?;
    let table = rows
        .iter()
        .map(|r| {
            writeln!(
                summary,
                "M = {:>5.1} dB: false alarms {:>5}, missed {:>5}, sum {:>5}",
                r.margin_db, r.false_alarms, r.missed_detections, r.false_alarms + r.missed_detections
            )
            .ok();
            vec![
                format!("{}", r.margin_db), r.false_alarms.to_string(), r.missed_detections.to_string(),
                r.metrics.secondary_eligible.to_string(), r.metrics.secondary_correct.to_string(), r.metrics.windows.to_string(),
            ]
        })
        .collect::<Vec<_>>();
    let mut out = Outputs::new(&args.out);
    out.add(
        "margin.csv",
        csv_string(&["margin_db", "false_alarms", "missed_detections", "eligible", "correct", "windows"], table)?,
    );
    out.add("summary.txt", summary);
    Ok(out)
}

/// Truncates to two decimals, the way the code's PSL is usually quoted.
fn two_decimals_down(v: f64) -> String {
    format!("{:.2}", (v * 100.0).floor() / 100.0)
}

fn run_psl(args: &PslArgs) -> Result<(String, Option<Outputs>)> {
    let code: BitSequence = match (&args.code, &args.scenario) {
        (Some(c), _) => c.parse()?,
        (None, Some(path)) => match &ScenarioFile::load(path)?.waveform.code {
            Some(c) => c.parse()?,
            None => npc25(),
        },
        (None, None) => npc25(),
    };
    let psl = psl_db(&code);
    let text = if psl.is_infinite() {
        format!("PSL: +inf dB (perfect code, {} bits)\n", code.len())
    } else {
        format!(
            "PSL: {} dB (exact {:.4} dB; peak {}, max sidelobe {}, {} bits)\n",
            two_decimals_down(psl),
            psl,
            code.len(),
            max_sidelobe(&code),
            code.len()
        )
    };
    let outputs = match &args.out {
        Some(dir) => {
            let mut out = Outputs::new(dir);
            let rows = aperiodic_autocorrelation(&code)
                .into_iter()
                .enumerate()
                .map(|(lag, v)| vec![lag.to_string(), v.to_string()]);
            out.add("autocorrelation.csv", csv_string(&["lag", "value"], rows)?);
            out.add("summary.txt", text.clone());
            Some(out)
        }
        None => None,
    };
    Ok((text, outputs))
}

impl Experiment {
    fn trial_names(&self) -> String {
        if self.tag_names.is_empty() {
            "none".to_string()
        } else {
            self.tag_names.join(", ")
        }
    }
}

/// Runs a parsed command; returns the text to print.
pub fn run(cli: &Cli) -> Result<String> {
    let (text, outputs) = match &cli.command {
        Command::Psl(a) => run_psl(a)?,
        Command::Detect(a) => finish(run_detect(a)?),
        Command::Calibrate(a) => finish(run_calibrate(a)?),
        Command::SweepRoc(a) => finish(run_sweep_roc(a)?),
        Command::SweepMargin(a) => finish(run_sweep_margin(a)?),
    };
    if let Some(o) = outputs {
        o.write()?;
    }
    Ok(text)
}

fn finish(out: Outputs) -> (String, Option<Outputs>) {
    let summary = out
        .files
        .iter()
        .find(|(n, _)| *n == "summary.txt")
        .map(|(_, s)| s.clone())
        .unwrap_or_default();
    let text = format!("{summary}wrote {} files to {}\n", out.files.len(), out.dir.display());
    (text, Some(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation() {
        assert_eq!(two_decimals_down(21.9382), "21.93");
        assert_eq!(two_decimals_down(6.0206), "6.02");
    }

    #[test]
    fn psl_text() {
        let (text, out) = run_psl(&PslArgs { code: None, scenario: None, out: None }).unwrap();
        assert!(text.contains("21.93 dB"));
        assert!(out.is_none());
        let (text, _) = run_psl(&PslArgs { code: Some("1".into()), scenario: None, out: None }).unwrap();
        assert!(text.contains("+inf"));
    }

    #[test]
    fn parses_flags() {
        let cli = Cli::try_parse_from([
            "zed-detect", "detect", "--scenario", "a.toml", "--out", "o", "--seed", "3", "--trials", "5",
            "--pfa", "1e-2,1e-3", "--workers", "2",
        ])
        .unwrap();
        let Command::Detect(a) = cli.command else { panic!("wrong subcommand") };
        assert_eq!(a.pfa, Some(vec![1e-2, 1e-3]));
        assert_eq!((a.seed, a.trials, a.workers), (Some(3), Some(5), Some(2)));
        assert!(Cli::try_parse_from(["zed-detect", "detect", "--out", "o"]).is_err());
    }
}
