use std::fmt::Write as _;
use std::str::FromStr;

use super::ExperimentError;
use crate::accounting::{format_real, RunTrace, TraceRow};

/// Relative-error levels reported in summaries.
pub const THRESHOLDS: [f64; 4] = [1e-2, 1e-4, 1e-6, 1e-8];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reach {
    pub iterations: u64,
    pub comm_rounds: u64,
    pub grad_rounds: u64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub status: String,
    pub iterations: u64,
    pub final_rel_err: Option<f64>,
    pub plateau: Option<f64>,
    /// First recorded row at or below each of [`THRESHOLDS`].
    pub reach: Vec<Option<Reach>>,
}

/// Mean relative error over the final 10% of rows (at least one row).
pub fn plateau(rows: &[TraceRow]) -> Option<f64> {
    if rows.is_empty() {
        return None;
    }
    let tail = (rows.len() / 10).max(1);
    let slice = &rows[rows.len() - tail..];
    Some(slice.iter().map(|r| r.rel_err).sum::<f64>() / tail as f64)
}

pub fn summarize(traces: &[RunTrace]) -> Vec<SummaryRow> {
    traces
        .iter()
        .map(|t| {
            let cost = t.primary_cost();
            let reach = THRESHOLDS
                .iter()
                .map(|&thr| {
                    t.rows.iter().find(|r| r.rel_err <= thr).map(|r| Reach {
                        iterations: r.k,
                        comm_rounds: r.comm_rounds,
                        grad_rounds: r.grad_rounds,
                        cost: cost.cost(r.comm_rounds, r.grad_rounds),
                    })
                })
                .collect();
            SummaryRow {
                label: t.label().to_string(),
                status: t.manifest.get("status").unwrap_or("unknown").to_string(),
                iterations: t.rows.last().map_or(0, |r| r.k),
                final_rel_err: t.rows.last().map(|r| r.rel_err),
                plateau: plateau(&t.rows),
                reach,
            }
        })
        .collect()
}

fn opt_real(v: Option<f64>) -> String {
    v.map_or("none".to_string(), format_real)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("label,status,iterations,final_rel_err,plateau_rel_err");
    for thr in THRESHOLDS {
        let t = format!("{thr:e}");
        let _ = write!(out, ",iters_{t},comm_{t},grad_{t},cost_{t}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            csv_field(&r.label),
            csv_field(&r.status),
            r.iterations,
            opt_real(r.final_rel_err),
            opt_real(r.plateau)
        );
        for reach in &r.reach {
            match reach {
                Some(x) => {
                    let _ = write!(
                        out,
                        ",{},{},{},{}",
                        x.iterations,
                        x.comm_rounds,
                        x.grad_rounds,
                        format_real(x.cost)
                    );
                }
                None => out.push_str(",not reached,not reached,not reached,not reached"),
            }
        }
        out.push('\n');
    }
    out
}

/// Human-readable table: errors plus iterations (and cost) to each threshold.
pub fn summary_table(rows: &[SummaryRow]) -> String {
    let mut header = vec![
        "method".to_string(),
        "final".to_string(),
        "plateau".to_string(),
    ];
    header.extend(THRESHOLDS.iter().map(|t| format!("iters/cost@{t:e}")));
    header.push("status".into());
    let mut table = vec![header];
    for r in rows {
        let mut line = vec![
            r.label.clone(),
            r.final_rel_err.map_or("-".into(), |v| format!("{v:.3e}")),
            r.plateau.map_or("-".into(), |v| format!("{v:.3e}")),
        ];
        line.extend(r.reach.iter().map(|x| match x {
            Some(x) => format!("{}/{}", x.iterations, format_real(x.cost)),
            None => "not reached".into(),
        }));
        line.push(r.status.clone());
        table.push(line);
    }
    let widths: Vec<usize> = (0..table[0].len())
        .map(|c| table.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for line in &table {
        let cells: Vec<String> = line
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotAxis {
    Iterations,
    Cost,
    GradRounds,
    CommRounds,
}

impl FromStr for PlotAxis {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "iterations" => Ok(PlotAxis::Iterations),
            "cost" => Ok(PlotAxis::Cost),
            "grad_rounds" => Ok(PlotAxis::GradRounds),
            "comm_rounds" => Ok(PlotAxis::CommRounds),
            other => Err(ExperimentError::Input(format!("unknown axis {other:?}"))),
        }
    }
}

/// Long-format `label,x,rel_err` rows for every trace. Traces must share a
/// problem (same `problem` manifest entry).
pub fn emit_plot_data(traces: &[RunTrace], axis: PlotAxis) -> Result<String, ExperimentError> {
    if let Some(first) = traces.first() {
        let problem = first.manifest.get("problem");
        if let Some(other) = traces.iter().find(|t| t.manifest.get("problem") != problem) {
            return Err(ExperimentError::Input(format!(
                "traces {:?} and {:?} are from different problems",
                first.label(),
                other.label()
            )));
        }
    }
    let mut out = String::from("label,x,rel_err\n");
    for t in traces {
        let cost = t.primary_cost();
        let label = csv_field(t.label());
        for r in &t.rows {
            let x = match axis {
                PlotAxis::Iterations => r.k.to_string(),
                PlotAxis::Cost => format_real(cost.cost(r.comm_rounds, r.grad_rounds)),
                PlotAxis::GradRounds => r.grad_rounds.to_string(),
                PlotAxis::CommRounds => r.comm_rounds.to_string(),
            };
            let _ = writeln!(out, "{label},{x},{}", format_real(r.rel_err));
        }
    }
    Ok(out)
}
