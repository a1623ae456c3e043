//! CSV serialization of run logs.
//!
//! All floats are written as `{:.9e}` (ten significant digits), so repeated
//! runs with the same seed produce byte-identical files. Layout per run
//! directory:
//!
//! - `metrics.csv` — one row per step:
//!   `step,rmse_distkp,rmse_oracle,rmse_baseline,disagreement,messages`.
//!   RMSE columns are empty for estimators that were not run; disagreement
//!   and message counts come from the distributed Kalman run when present,
//!   otherwise from the baseline.
//! - `field_t<STEP>_agent<ID>.csv` — per checkpoint and agent:
//!   `x,y,mean,variance` over the evaluation grid (row-major, x fastest).
//! - `truth_t<STEP>.csv` — ground truth at each checkpoint: `x,y,value`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::runlog::{RunKind, RunLog};
use crate::sim::field_estimate;

fn fmt_f(v: f64) -> String {
    format!("{v:.9e}")
}

/// Write `metrics.csv` merging the runs (same seed, same horizon) into one
/// table.
pub fn write_metrics_csv(path: &Path, logs: &[&RunLog]) -> Result<()> {
    if logs.is_empty() {
        return Err(Error::InvalidInput("no runs to serialize".into()));
    }
    let by_kind = |kind: RunKind| logs.iter().find(|l| l.kind == kind);
    let distkp = by_kind(RunKind::Distkp);
    let oracle = by_kind(RunKind::Oracle);
    let baseline = by_kind(RunKind::Baseline);
    let network = distkp.or(baseline);

    let steps = logs.iter().map(|l| l.metrics.len()).max().unwrap_or(0);
    let mut out = String::new();
    out.push_str("step,rmse_distkp,rmse_oracle,rmse_baseline,disagreement,messages\n");
    for row in 0..steps {
        let step = row as u64 + 1;
        let rmse_of = |log: Option<&&RunLog>| {
            log.and_then(|l| l.metrics.get(row)).map(|m| fmt_f(m.rmse)).unwrap_or_default()
        };
        let (dis, msg) = network
            .and_then(|l| l.metrics.get(row))
            .map(|m| (fmt_f(m.disagreement), m.messages.to_string()))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{step},{},{},{},{dis},{msg}",
            rmse_of(distkp),
            rmse_of(oracle),
            rmse_of(baseline),
        );
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write per-checkpoint per-agent posterior field grids.
pub fn write_field_csvs(dir: &Path, log: &RunLog) -> Result<()> {
    for cp in &log.checkpoints {
        for (agent, state) in cp.estimates.iter().enumerate() {
            let (means, vars) = field_estimate(state, &log.basis, &log.eval_grid)?;
            let mut out = String::new();
            out.push_str("x,y,mean,variance\n");
            for (i, p) in log.eval_grid.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    fmt_f(p[0]),
                    fmt_f(p[1]),
                    fmt_f(means[i]),
                    fmt_f(vars[i])
                );
            }
            let name = format!("field_t{}_agent{}.csv", cp.step, agent);
            fs::write(dir.join(name), out)?;
        }
    }
    Ok(())
}

/// Write ground-truth grids for every checkpoint of a run.
pub fn write_truth_csvs(dir: &Path, log: &RunLog) -> Result<()> {
    for cp in &log.checkpoints {
        let truth = log.truth_at_step(cp.step);
        let mut out = String::new();
        out.push_str("x,y,value\n");
        for (i, p) in log.eval_grid.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", fmt_f(p[0]), fmt_f(p[1]), fmt_f(truth[i]));
        }
        fs::write(dir.join(format!("truth_t{}.csv", cp.step)), out)?;
    }
    Ok(())
}

/// Convenience: write metrics, per-agent fields, and ground truth for a set
/// of runs into one directory.
pub fn write_run_artifacts(dir: &Path, logs: &[&RunLog]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_metrics_csv(&dir.join("metrics.csv"), logs)?;
    for log in logs {
        write_field_csvs(dir, log)?;
    }
    // Identical realizations across runs: one truth dump suffices.
    if let Some(log) = logs.first() {
        write_truth_csvs(dir, log)?;
    }
    Ok(())
}

/// Minimal reader for `metrics.csv`, used by the round-trip tests.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty metrics file".into()))?;
    if header != "step,rmse_distkp,rmse_oracle,rmse_baseline,disagreement,messages" {
        return Err(Error::InvalidInput(format!("unexpected header: {header}")));
    }
    let parse_opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            return Ok(None);
        }
        s.parse::<f64>()
            .map(Some)
            .map_err(|_| Error::InvalidInput(format!("bad float: {s}")))
    };
    let mut rows = Vec::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(Error::InvalidInput(format!("bad row: {line}")));
        }
        rows.push(MetricsRow {
            step: f[0]
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad step: {}", f[0])))?,
            rmse_distkp: parse_opt(f[1])?,
            rmse_oracle: parse_opt(f[2])?,
            rmse_baseline: parse_opt(f[3])?,
            disagreement: parse_opt(f[4])?,
            messages: if f[5].is_empty() {
                None
            } else {
                Some(
                    f[5].parse()
                        .map_err(|_| Error::InvalidInput(format!("bad count: {}", f[5])))?,
                )
            },
        });
    }
    Ok(rows)
}

/// One parsed row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub rmse_distkp: Option<f64>,
    pub rmse_oracle: Option<f64>,
    pub rmse_baseline: Option<f64>,
    pub disagreement: Option<f64>,
    pub messages: Option<u64>,
}
