//! Performance functionals of a distributed run and empirical rate fitting.
//!
//! A run produces a [`Trace`]: rows of optimization error (of the network mean
//! and of its running average), cumulative regret, and consensus disagreement,
//! at a configurable recording cadence. Traces serialize to a fixed CSV column
//! set, aggregate across seeds (mean and standard error per column), and feed
//! log-log least-squares rate fits.

use std::fmt::Write as _;

use crate::vecmath;
use crate::{Error, Result};

/// Metric columns recorded per trace row, in CSV order after `t`.
pub const TRACE_COLUMNS: [&str; 6] =
    ["eta", "h", "f_mean_err", "f_avg_err", "cum_regret", "consensus_e"];

const CSV_HEADER: &str = "t,eta,h,f_mean_err,f_avg_err,cum_regret,consensus_e";

/// Coordinatewise average of the agent states.
pub fn mean_iterate(states: &[Vec<f64>]) -> Vec<f64> {
    assert!(!states.is_empty(), "mean of zero agents");
    let d = states[0].len();
    let mut out = vec![0.0; d];
    for x in states {
        debug_assert_eq!(x.len(), d);
        for (o, v) in out.iter_mut().zip(x) {
            *o += v;
        }
    }
    let inv = 1.0 / states.len() as f64;
    for o in &mut out {
        *o *= inv;
    }
    out
}

/// Consensus disagreement `sum_i ||x^i - x_bar||^2`.
pub fn consensus_error(states: &[Vec<f64>]) -> f64 {
    let xbar = mean_iterate(states);
    states.iter().map(|x| vecmath::dist_sq(x, &xbar)).sum()
}

/// Incremental average of the mean iterate: `xhat <- xhat + (xbar - xhat)/t`.
#[derive(Debug, Clone)]
pub struct RunningAverage {
    value: Vec<f64>,
    count: u64,
}

impl RunningAverage {
    pub fn new(dim: usize) -> Self {
        Self { value: vec![0.0; dim], count: 0 }
    }

    /// Folds in the next mean iterate and returns the updated average.
    pub fn push(&mut self, xbar: &[f64]) -> &[f64] {
        debug_assert_eq!(xbar.len(), self.value.len());
        self.count += 1;
        let w = 1.0 / self.count as f64;
        for (v, x) in self.value.iter_mut().zip(xbar) {
            *v += (x - *v) * w;
        }
        &self.value
    }

    pub fn value(&self) -> &[f64] {
        &self.value
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

/// One recorded step of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: u64,
    pub eta: f64,
    pub h: f64,
    pub f_mean_err: f64,
    pub f_avg_err: f64,
    pub cum_regret: f64,
    pub consensus_e: f64,
    /// Mean gradient-estimate norm across agents; kept in memory only, not a
    /// CSV column.
    pub grad_norm_mean: Option<f64>,
}

impl TraceRow {
    fn column(&self, name: &str) -> Option<f64> {
        match name {
            "eta" => Some(self.eta),
            "h" => Some(self.h),
            "f_mean_err" => Some(self.f_mean_err),
            "f_avg_err" => Some(self.f_avg_err),
            "cum_regret" => Some(self.cum_regret),
            "consensus_e" => Some(self.consensus_e),
            _ => None,
        }
    }
}

/// Time-indexed record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub seed: u64,
    pub config_hash: String,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    /// Serializes the rows with the fixed header; floats print in shortest
    /// round-trip form.
    pub fn to_csv(&self) -> String {
        rows_to_csv(&self.rows)
    }

    /// Extracts `(t, value)` pairs for a named metric column.
    pub fn column(&self, name: &str) -> Result<Vec<(u64, f64)>> {
        self.rows
            .iter()
            .map(|r| {
                r.column(name)
                    .map(|v| (r.t, v))
                    .ok_or_else(|| Error::Csv(format!("unknown column `{name}`")))
            })
            .collect()
    }
}

/// Serializes rows under the fixed CSV contract.
pub fn rows_to_csv(rows: &[TraceRow]) -> String {
    let mut out = String::with_capacity(32 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t, r.eta, r.h, r.f_mean_err, r.f_avg_err, r.cum_regret, r.consensus_e
        );
    }
    out
}

/// Parses a trace CSV produced by [`rows_to_csv`]; the header must match the
/// contract exactly.
pub fn rows_from_csv(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Csv("empty input".into()))?;
    if header.trim_end() != CSV_HEADER {
        return Err(Error::Csv(format!("unexpected header `{header}`")));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Csv(format!(
                "row {}: expected 7 fields, got {}",
                idx + 2,
                fields.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Csv(format!("row {}: bad number `{s}`", idx + 2)))
        };
        rows.push(TraceRow {
            t: fields[0]
                .parse::<u64>()
                .map_err(|_| Error::Csv(format!("row {}: bad step `{}`", idx + 2, fields[0])))?,
            eta: num(fields[1])?,
            h: num(fields[2])?,
            f_mean_err: num(fields[3])?,
            f_avg_err: num(fields[4])?,
            cum_regret: num(fields[5])?,
            consensus_e: num(fields[6])?,
            grad_norm_mean: None,
        });
    }
    Ok(rows)
}

/// Recording cadence for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordSpec {
    /// Record t = 1, 1+k, 1+2k, ... plus the final step.
    Every(u64),
    /// Record the given number of log-spaced steps over [1, T], always
    /// including 1 and T.
    LogSpaced(usize),
}

/// Materializes the sorted, deduplicated set of recorded steps.
pub fn record_steps(spec: RecordSpec, t_max: u64) -> Result<Vec<u64>> {
    if t_max == 0 {
        return Err(Error::EmptyHorizon);
    }
    let mut steps = match spec {
        RecordSpec::Every(k) => {
            if k == 0 {
                return Err(Error::NonPositiveScale(0.0));
            }
            let mut v: Vec<u64> = (1..=t_max).step_by(k as usize).collect();
            v.push(t_max);
            v
        }
        RecordSpec::LogSpaced(points) => {
            if points < 1 {
                return Err(Error::FitWindow { need: 1, found: 0 });
            }
            let span = (t_max as f64).ln();
            let mut v = Vec::with_capacity(points + 1);
            for i in 0..points {
                let frac = if points == 1 { 0.0 } else { i as f64 / (points - 1) as f64 };
                let t = (span * frac).exp().round() as u64;
                v.push(t.clamp(1, t_max));
            }
            v.push(t_max);
            v
        }
    };
    steps.sort_unstable();
    steps.dedup();
    Ok(steps)
}

/// Least-squares power-law fit over a tail window.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Inclusive step range of the points used.
    pub window: (u64, u64),
    pub points: usize,
}

/// Fits `log(value) ~ intercept + slope * log(t)` over the last
/// `tail_fraction` of the recorded points. Nonpositive or non-finite values
/// are dropped; fewer than 5 survivors is an error.
pub fn fit_rate(series: &[(u64, f64)], tail_fraction: f64) -> Result<RateFit> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::TailFraction(tail_fraction));
    }
    let keep = ((series.len() as f64 * tail_fraction).ceil() as usize).min(series.len());
    let tail = &series[series.len() - keep..];
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .filter(|(t, v)| *t >= 1 && v.is_finite() && *v > 0.0)
        .map(|(t, v)| ((*t as f64).ln(), v.ln()))
        .collect();
    if pts.len() < 5 {
        return Err(Error::FitWindow { need: 5, found: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::FitWindow { need: 5, found: 1 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| (p.1 - (intercept + slope * p.0)).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let t_lo =
        tail.iter().find(|(_, v)| v.is_finite() && *v > 0.0).map(|(t, _)| *t).unwrap_or(tail[0].0);
    let t_hi = tail
        .iter()
        .rev()
        .find(|(_, v)| v.is_finite() && *v > 0.0)
        .map(|(t, _)| *t)
        .unwrap_or(tail[tail.len() - 1].0);
    Ok(RateFit { slope, intercept, r_squared, window: (t_lo, t_hi), points: pts.len() })
}

/// Seed-averaged trace: per recorded step, mean and standard error of every
/// metric column across traces.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateTrace {
    pub t: Vec<u64>,
    /// Row-major per-step `[eta, h, f_mean_err, f_avg_err, cum_regret,
    /// consensus_e]` means.
    pub mean: Vec<[f64; 6]>,
    /// Matching standard errors, `sample sd / sqrt(k)`; zero for k = 1.
    pub stderr: Vec<[f64; 6]>,
}

impl AggregateTrace {
    /// Extracts the mean series of a named column as `(t, value)` pairs.
    pub fn column(&self, name: &str) -> Result<Vec<(u64, f64)>> {
        let idx = TRACE_COLUMNS
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::Csv(format!("unknown column `{name}`")))?;
        Ok(self.t.iter().zip(&self.mean).map(|(t, m)| (*t, m[idx])).collect())
    }

    /// Serializes with `t` followed by `<col>_mean,<col>_stderr` pairs.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for c in TRACE_COLUMNS {
            let _ = write!(out, ",{c}_mean,{c}_stderr");
        }
        out.push('\n');
        for ((t, m), s) in self.t.iter().zip(&self.mean).zip(&self.stderr) {
            let _ = write!(out, "{t}");
            for k in 0..6 {
                let _ = write!(out, ",{},{}", m[k], s[k]);
            }
            out.push('\n');
        }
        out
    }
}

/// Averages traces sharing an identical step grid.
pub fn aggregate_traces(traces: &[Trace]) -> Result<AggregateTrace> {
    let first = traces.first().ok_or(Error::EmptyHorizon)?;
    let t: Vec<u64> = first.rows.iter().map(|r| r.t).collect();
    for tr in traces {
        if tr.rows.len() != t.len() {
            return Err(Error::Shape { expected: t.len(), got: tr.rows.len() });
        }
        for (row, expect) in tr.rows.iter().zip(&t) {
            if row.t != *expect {
                return Err(Error::Csv(format!(
                    "trace step grids disagree: {} vs {}",
                    row.t, expect
                )));
            }
        }
    }
    let k = traces.len() as f64;
    let mut mean = vec![[0.0; 6]; t.len()];
    let mut stderr = vec![[0.0; 6]; t.len()];
    for (i, _) in t.iter().enumerate() {
        for (c, name) in TRACE_COLUMNS.iter().enumerate() {
            let vals: Vec<f64> = traces.iter().map(|tr| tr.rows[i].column(name).unwrap()).collect();
            let m = vals.iter().sum::<f64>() / k;
            mean[i][c] = m;
            if traces.len() > 1 {
                let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (k - 1.0);
                stderr[i][c] = (var.max(0.0) / k).sqrt();
            }
        }
    }
    Ok(AggregateTrace { t, mean, stderr })
}

/// Generic numeric CSV with named columns, for rate fits on arbitrary files.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub header: Vec<String>,
    /// Column-major values.
    pub columns: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Csv("empty input".into()))?
            .trim_end()
            .split(',')
            .map(str::to_owned)
            .collect();
        let mut columns = vec![Vec::new(); header.len()];
        for (idx, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != header.len() {
                return Err(Error::Csv(format!(
                    "row {}: expected {} fields, got {}",
                    idx + 2,
                    header.len(),
                    fields.len()
                )));
            }
            for (col, field) in columns.iter_mut().zip(&fields) {
                let v = field
                    .parse::<f64>()
                    .map_err(|_| Error::Csv(format!("row {}: bad number `{field}`", idx + 2)))?;
                col.push(v);
            }
        }
        Ok(Self { header, columns })
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        let idx = self
            .header
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Csv(format!("unknown column `{name}`")))?;
        Ok(&self.columns[idx])
    }

    /// Pairs the `t` column with a named value column for rate fitting.
    pub fn series(&self, name: &str) -> Result<Vec<(u64, f64)>> {
        let t = self.column("t")?;
        let v = self.column(name)?;
        Ok(t.iter().zip(v).map(|(t, v)| (t.round() as u64, *v)).collect())
    }
}
