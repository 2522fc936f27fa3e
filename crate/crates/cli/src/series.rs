//! CSV data series for plotting outside the tool.

use std::fs;
use std::path::Path;

use anyhow::Result;
use serde::Serialize;

use rvbench_core::evaluator::{forward_submission, Submission};
use rvbench_core::orbit::Keplerian;
use rvbench_core::report::AggregateReport;
use rvbench_core::solver::Periodogram;
use rvbench_core::RvDataset;

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PeriodogramRow {
    frequency_per_day: f64,
    period_days: f64,
    power: f64,
}

pub fn periodogram(path: &Path, pg: &Periodogram) -> Result<()> {
    write_rows(
        path,
        pg.frequencies.iter().zip(&pg.powers).map(|(&f, &p)| PeriodogramRow {
            frequency_per_day: f,
            period_days: 1.0 / f,
            power: p,
        }),
    )
}

#[derive(Serialize)]
struct ResidualRow<'a> {
    time_days: f64,
    rv_ms: f64,
    model_ms: f64,
    residual_ms: f64,
    sigma_ms: f64,
    label: &'a str,
}

pub fn residuals(path: &Path, ds: &RvDataset, sub: &Submission) -> Result<()> {
    let model = forward_submission(sub, ds)?;
    write_rows(
        path,
        (0..ds.len()).map(|i| ResidualRow {
            time_days: ds.times_days[i],
            rv_ms: ds.rvs_ms[i],
            model_ms: model[i],
            residual_ms: ds.rvs_ms[i] - model[i],
            sigma_ms: ds.sigmas_ms[i],
            label: &ds.labels[i],
        }),
    )
}

#[derive(Serialize)]
struct PhaseRow {
    planet: usize,
    period_days: f64,
    phase: f64,
    time_days: f64,
    rv_ms: f64,
    model_ms: f64,
    sigma_ms: f64,
}

/// Per planet: data with the offsets and all other planets removed, folded on its period.
pub fn phase_fold(path: &Path, ds: &RvDataset, sub: &Submission) -> Result<()> {
    let total = forward_submission(sub, ds)?;
    let star = ds.star();
    let curves: Vec<Vec<f64>> = sub
        .planets
        .iter()
        .map(|p| Keplerian::from_planet(p, &star)?.velocities(&ds.times_days))
        .collect::<rvbench_core::Result<_>>()?;
    let mut rows = Vec::new();
    for (k, p) in sub.planets.iter().enumerate() {
        for i in 0..ds.len() {
            let t = ds.times_days[i];
            let others = total[i] - curves[k][i];
            rows.push(PhaseRow {
                planet: k,
                period_days: p.period_days,
                phase: ((t - ds.t_ref_days) / p.period_days).rem_euclid(1.0),
                time_days: t,
                rv_ms: ds.rvs_ms[i] - others,
                model_ms: curves[k][i],
                sigma_ms: ds.sigmas_ms[i],
            });
        }
    }
    write_rows(path, rows)
}

#[derive(Serialize)]
struct SweepRow {
    tau: f64,
    scope: String,
    pass_rate: f64,
}

pub fn sweep(path: &Path, report: &AggregateReport) -> Result<()> {
    let mut rows = Vec::new();
    for r in &report.sweep {
        rows.push(SweepRow {
            tau: r.tau,
            scope: "overall".into(),
            pass_rate: r.pass_rate,
        });
        for (tier, rate) in &r.per_tier {
            rows.push(SweepRow {
                tau: r.tau,
                scope: tier.to_string(),
                pass_rate: *rate,
            });
        }
    }
    write_rows(path, rows)
}
