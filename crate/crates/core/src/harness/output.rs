use std::path::Path;

use serde::Serialize;

use super::{Algorithm, RunResult};
use crate::error::{Error, Result};
use crate::policies::CurvePoint;

pub const COMPARISON_HEADER: [&str; 8] = [
    "algorithm",
    "seed",
    "completion_s",
    "decision_s",
    "psi",
    "penalized_s",
    "power",
    "misses",
];

/// One vehicle in one slot of a `simulate` run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub slot: u64,
    pub vehicle: String,
    pub action: &'static str,
    pub server: String,
    pub omega: f64,
    pub rate: f64,
    pub delay: f64,
    pub deadline_met: bool,
}

/// Per-algorithm mean and sample standard deviation over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub algorithm: Algorithm,
    pub runs: usize,
    pub completion_mean: f64,
    pub completion_std: f64,
    pub decision_mean: f64,
    pub decision_std: f64,
    pub penalized_mean: f64,
    pub penalized_std: f64,
    pub power_mean: f64,
    pub power_std: f64,
    pub misses_mean: f64,
    pub misses_std: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarize(results: &[RunResult]) -> Vec<Summary> {
    let mut algorithms: Vec<Algorithm> = results.iter().map(|r| r.algorithm).collect();
    algorithms.sort();
    algorithms.dedup();
    algorithms
        .into_iter()
        .map(|alg| {
            let rows: Vec<&RunResult> = results.iter().filter(|r| r.algorithm == alg).collect();
            let col =
                |f: fn(&RunResult) -> f64| mean_std(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (completion_mean, completion_std) = col(|r| r.completion_s);
            let (decision_mean, decision_std) = col(|r| r.decision_s);
            let (penalized_mean, penalized_std) = col(|r| r.penalized_s);
            let (power_mean, power_std) = col(|r| r.power);
            let (misses_mean, misses_std) = col(|r| r.misses as f64);
            Summary {
                algorithm: alg,
                runs: rows.len(),
                completion_mean,
                completion_std,
                decision_mean,
                decision_std,
                penalized_mean,
                penalized_std,
                power_mean,
                power_std,
                misses_mean,
                misses_std,
            }
        })
        .collect()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    }
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_comparison(path: &Path, results: &[RunResult]) -> Result<()> {
    if results.is_empty() {
        return Err(Error::Config("no results to write".into()));
    }
    write_rows(
        path,
        &COMPARISON_HEADER,
        results.iter().map(|r| {
            [
                r.algorithm.name().to_string(),
                r.seed.to_string(),
                r.completion_s.to_string(),
                r.decision_s.to_string(),
                r.psi.to_string(),
                r.penalized_s.to_string(),
                r.power.to_string(),
                r.misses.to_string(),
            ]
        }),
    )
}

pub fn write_summary(path: &Path, summary: &[Summary]) -> Result<()> {
    let header = [
        "algorithm",
        "runs",
        "completion_mean",
        "completion_std",
        "decision_mean",
        "decision_std",
        "penalized_mean",
        "penalized_std",
        "power_mean",
        "power_std",
        "misses_mean",
        "misses_std",
    ];
    write_rows(
        path,
        &header,
        summary.iter().map(|s| {
            [s.algorithm.name().to_string(), s.runs.to_string()]
                .into_iter()
                .chain(
                    [
                        s.completion_mean,
                        s.completion_std,
                        s.decision_mean,
                        s.decision_std,
                        s.penalized_mean,
                        s.penalized_std,
                        s.power_mean,
                        s.power_std,
                        s.misses_mean,
                        s.misses_std,
                    ]
                    .map(|v| v.to_string()),
                )
        }),
    )
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    write_rows(
        path,
        &[
            "slot",
            "vehicle",
            "action",
            "server",
            "omega",
            "rate",
            "delay",
            "deadline_met",
        ],
        rows.iter().map(|r| {
            [
                r.slot.to_string(),
                r.vehicle.clone(),
                r.action.to_string(),
                r.server.clone(),
                r.omega.to_string(),
                r.rate.to_string(),
                r.delay.to_string(),
                r.deadline_met.to_string(),
            ]
        }),
    )
}

pub fn write_learning_curve(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    write_rows(
        path,
        &CurvePoint::csv_header().split(',').collect::<Vec<_>>(),
        curve.iter().map(|c| {
            c.csv_row()
                .split(',')
                .map(str::to_string)
                .collect::<Vec<_>>()
        }),
    )
}
