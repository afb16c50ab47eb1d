//! CSV writers. Floats use Rust's shortest round-trip formatting so a file
//! re-read with `str::parse::<f64>` gives back the exact values.

use std::path::Path;

use anyhow::{Context, Result};
use manicon_core::analysis::{DampingRow, SweepRow};
use manicon_core::{ConsensusReport, Trace};

/// Per-agent columns of trace.csv, in order.
pub const AGENT_COLUMNS: [&str; 19] = [
    "q1", "q2", "qdot1", "qdot2", "x1", "x2", "xo1", "xo2", "dxo1", "dxo2", "theta_hat1",
    "theta_hat2", "vartheta_hat1", "vartheta_hat2", "vartheta_hat3", "tau1", "tau2", "v", "v_star",
];

pub fn trace_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for i in 0..n {
        h.extend(AGENT_COLUMNS.iter().map(|c| format!("a{i}_{c}")));
    }
    h
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_trace(path: &Path, trace: &Trace, every: usize) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(trace_header(trace.n_agents()))?;
    let mut row = Vec::with_capacity(1 + 19 * trace.n_agents());
    for k in (0..trace.len()).step_by(every.max(1)) {
        row.clear();
        row.push(num(trace.time(k)));
        for a in &trace.samples[k] {
            let s = &a.state;
            let dx = s.x_o - a.x;
            for v in s.q.iter()
                .chain(s.qdot.iter())
                .chain(a.x.iter())
                .chain(s.x_o.iter())
                .chain(dx.iter())
                .chain(s.theta_hat.iter())
                .chain(s.vartheta_hat.iter())
                .chain(a.tau.iter())
            {
                row.push(num(*v));
            }
            row.push(num(a.v));
            row.push(num(a.v_star));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report(path: &Path, name: &str, steps: usize, report: &ConsensusReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["metric", "value"])?;
    w.write_record(["scenario", name])?;
    w.write_record(["steps", &steps.to_string()])?;
    for (key, v) in report.scalars() {
        let value = match key {
            "settled" => report.settled().to_string(),
            _ if v.is_nan() => String::new(),
            _ => num(v),
        };
        w.write_record([key, value.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep(path: &Path, param: &str, rows: &[(f64, manicon_core::Result<SweepRow>)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        param,
        "final_mean_x",
        "final_mean_y",
        "final_weighted_x",
        "final_weighted_y",
        "offset",
        "settling_time",
        "error",
    ])?;
    for (p, row) in rows {
        match row {
            Ok(r) => w.write_record([
                num(r.param),
                num(r.final_mean[0]),
                num(r.final_mean[1]),
                num(r.final_weighted[0]),
                num(r.final_weighted[1]),
                opt(r.offset),
                opt(r.settling_time),
                String::new(),
            ])?,
            Err(e) => {
                let mut rec = vec![num(*p)];
                rec.extend(std::iter::repeat_n(String::new(), 6));
                rec.push(e.to_string());
                w.write_record(rec)?
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_damping(path: &Path, rows: &[(f64, manicon_core::Result<DampingRow>)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["kd_scale", "displacement", "error"])?;
    for (p, row) in rows {
        match row {
            Ok(r) => w.write_record([num(r.scale), num(r.displacement), String::new()])?,
            Err(e) => w.write_record([num(*p), String::new(), e.to_string()])?,
        }
    }
    w.flush()?;
    Ok(())
}
