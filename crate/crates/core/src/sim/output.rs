use serde::Serialize;
use std::fs;
use std::path::Path;

use super::{EpisodeRecord, MetricsReport, SimContext, SimError, SweepReport};
use crate::grid::baseline_violation;

fn num(v: f64) -> String {
    format!("{v}")
}

pub fn write_acceptance_csv(path: &Path, ep: &EpisodeRecord) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "t",
        "p_req_mw",
        "p_acc_mw",
        "kappa_mw",
        "mechanism",
        "dispatch_cost",
        "max_line_utilization",
    ])?;
    for r in &ep.steps {
        w.write_record([
            r.t.to_string(),
            num(r.p_req),
            num(r.p_acc),
            num(r.kappa),
            r.mechanism.to_string(),
            num(r.dispatch_cost),
            num(r.max_line_utilization),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_execution_csv(path: &Path, ep: &EpisodeRecord) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "t",
        "s_1a",
        "s_1b",
        "s_2",
        "p_ch_mw",
        "p_dis_mw",
        "soc_mwh",
        "p_it_mw",
        "p_cool_mw",
        "balance_residual_mw",
    ])?;
    for r in &ep.steps {
        let x = &r.execution;
        w.write_record([
            r.t.to_string(),
            num(x.s[0]),
            num(x.s[1]),
            num(x.s[2]),
            num(x.p_ch),
            num(x.p_dis),
            num(x.e_next),
            num(x.p_it_total),
            num(x.p_cool),
            num(x.residual),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SimError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Episode logs plus `metrics.json` in `dir`.
pub fn write_run(dir: &Path, ep: &EpisodeRecord, metrics: &MetricsReport) -> Result<(), SimError> {
    fs::create_dir_all(dir)?;
    write_acceptance_csv(&dir.join("acceptance.csv"), ep)?;
    write_execution_csv(&dir.join("execution.csv"), ep)?;
    let mut w = csv::Writer::from_path(dir.join("rewards.csv"))?;
    w.write_record(["t", "reward", "workload", "rejection", "curtailment", "lag_1a_pct", "lag_1b_pct"])?;
    for (r, lag) in ep.steps.iter().zip(&metrics.completion_lag_pct) {
        w.write_record([
            r.t.to_string(),
            num(r.reward.total),
            num(r.reward.workload),
            num(r.reward.rejection),
            num(r.reward.curtailment),
            num(lag[0]),
            num(lag[1]),
        ])?;
    }
    w.flush()?;
    write_json(&dir.join("metrics.json"), metrics)
}

pub fn read_metrics(dir: &Path) -> Result<MetricsReport, SimError> {
    let text = fs::read_to_string(dir.join("metrics.json"))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Serialize)]
struct BaselineSummary<'a> {
    scenario: &'a str,
    horizon: usize,
    cost: f64,
    lp_solves: usize,
    rows_generated: usize,
    max_violation: f64,
}

/// Baseline dispatch, line flows and a summary in `dir`.
pub fn write_baseline(dir: &Path, ctx: &SimContext) -> Result<(), SimError> {
    fs::create_dir_all(dir)?;
    let b = &ctx.baseline;
    let mut w = csv::Writer::from_path(dir.join("baseline_dispatch.csv"))?;
    let mut header = vec!["t".to_string()];
    header.extend(ctx.grid.generators.iter().enumerate().map(|(i, g)| format!("g{}_bus{}_mw", i + 1, g.bus)));
    header.push("step_cost".into());
    w.write_record(&header)?;
    for (t, g) in b.g.iter().enumerate() {
        let mut row = vec![(t + 1).to_string()];
        row.extend(g.iter().map(|v| num(*v)));
        row.push(num(b.step_cost[t]));
        w.write_record(&row)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("baseline_flows.csv"))?;
    let mut header = vec!["t".to_string()];
    header.extend(ctx.grid.lines.iter().map(|l| format!("f_{}_{}_mw", l.from, l.to)));
    w.write_record(&header)?;
    for (t, f) in b.flows.iter().enumerate() {
        let mut row = vec![(t + 1).to_string()];
        row.extend(f.iter().map(|v| num(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    write_json(
        &dir.join("baseline.json"),
        &BaselineSummary {
            scenario: &ctx.scenario.name,
            horizon: ctx.horizon(),
            cost: b.cost,
            lp_solves: b.lp_solves,
            rows_generated: b.rows_generated,
            max_violation: baseline_violation(&ctx.grid, &ctx.scenario.trace, b),
        },
    )
}

/// `gamma,eps,curtail_freq,status`; `curtail_freq` is empty unless the cell completed.
pub fn write_sweep_csv(path: &Path, report: &SweepReport) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["gamma", "eps", "curtail_freq", "status"])?;
    for c in &report.cells {
        w.write_record([
            num(c.gamma),
            num(c.eps),
            c.curtail_freq.map(num).unwrap_or_default(),
            c.status.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
