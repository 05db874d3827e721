//! Cost framework, error metrics and per-iteration traces.

use std::fmt::Write as _;

use thiserror::Error;

use crate::iterate::StackedIterate;
use crate::linalg;
use crate::objectives::GroundTruth;

#[derive(Debug, Error, PartialEq)]
pub enum AccountingError {
    #[error("cost weights must be finite, nonnegative and not both zero (got c_c={c_c}, c_g={c_g})")]
    BadCostModel { c_c: f64, c_g: f64 },
    #[error("relative error undefined for x* = 0")]
    ZeroOptimum,
    #[error("dimension mismatch: point has {got} entries, optimum has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("trace line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// `Cost = #communications * c_c + #computations * c_g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub c_c: f64,
    pub c_g: f64,
}

impl CostModel {
    pub fn new(c_c: f64, c_g: f64) -> Result<Self, AccountingError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(c_c) || !ok(c_g) || (c_c == 0.0 && c_g == 0.0) {
            return Err(AccountingError::BadCostModel { c_c, c_g });
        }
        Ok(Self { c_c, c_g })
    }

    pub fn cost(&self, comm_rounds: u64, grad_rounds: u64) -> f64 {
        comm_rounds as f64 * self.c_c + grad_rounds as f64 * self.c_g
    }

    /// Column name for an additional cost model.
    pub fn column_name(&self) -> String {
        format!("cost_{}_{}", self.c_c, self.c_g)
    }

    /// `c_c:c_g`
    pub fn to_spec(&self) -> String {
        format!("{}:{}", self.c_c, self.c_g)
    }

    pub fn parse_spec(s: &str) -> Result<Self, AccountingError> {
        let bad = || AccountingError::Parse {
            line: 0,
            reason: format!("bad cost model {s:?}, expected c_c:c_g"),
        };
        let (a, b) = s.trim().split_once(':').ok_or_else(bad)?;
        let c_c = a.trim().parse().map_err(|_| bad())?;
        let c_g = b.trim().parse().map_err(|_| bad())?;
        Self::new(c_c, c_g)
    }
}

impl Default for CostModel {
    fn default() -> Self {
        Self { c_c: 1.0, c_g: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub k: u64,
    pub t_k: u64,
    pub comm_rounds: u64,
    pub grad_rounds: u64,
    pub rel_err: f64,
    pub cons_err: f64,
}

pub const TRACE_HEADER: &str = "k,t_k,comm_rounds,grad_rounds,rel_err,cons_err,cost";

/// Ordered `key=value` manifest.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `key`, replacing an existing value in place.
    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string().replace('\n', " ");
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub manifest: Manifest,
    pub rows: Vec<TraceRow>,
    /// The first model fills the `cost` column, the rest get their own columns.
    pub cost_models: Vec<CostModel>,
}

/// Keys that vary between otherwise identical runs.
pub const VOLATILE_MANIFEST_KEYS: &[&str] = &["timestamp"];

impl RunTrace {
    pub fn label(&self) -> &str {
        self.manifest.get("label").unwrap_or("")
    }

    pub fn primary_cost(&self) -> CostModel {
        self.cost_models.first().copied().unwrap_or_default()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.manifest.entries() {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str(TRACE_HEADER);
        for m in self.cost_models.iter().skip(1) {
            out.push(',');
            out.push_str(&m.column_name());
        }
        out.push('\n');
        let primary = self.primary_cost();
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{}",
                r.k,
                r.t_k,
                r.comm_rounds,
                r.grad_rounds,
                format_real(r.rel_err),
                format_real(r.cons_err),
                format_real(primary.cost(r.comm_rounds, r.grad_rounds))
            );
            for m in self.cost_models.iter().skip(1) {
                let _ = write!(out, ",{}", format_real(m.cost(r.comm_rounds, r.grad_rounds)));
            }
            out.push('\n');
        }
        out
    }

    /// CSV without volatile manifest lines, for replay comparison.
    pub fn to_csv_stable(&self) -> String {
        strip_volatile(&self.to_csv())
    }

    pub fn parse_csv(text: &str) -> Result<Self, AccountingError> {
        let mut manifest = Manifest::new();
        let mut rows = Vec::new();
        let mut header: Option<Vec<String>> = None;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let err = |reason: String| AccountingError::Parse {
                line: lineno,
                reason,
            };
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.trim_start().split_once('=') {
                    manifest.set(k.trim(), v);
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let Some(cols) = &header else {
                if !line.starts_with(TRACE_HEADER) {
                    return Err(err(format!("expected header {TRACE_HEADER:?}")));
                }
                header = Some(fields.iter().map(|s| s.to_string()).collect());
                continue;
            };
            if fields.len() != cols.len() {
                return Err(err(format!("expected {} fields, got {}", cols.len(), fields.len())));
            }
            let int = |i: usize| {
                fields[i]
                    .parse::<u64>()
                    .map_err(|_| err(format!("bad integer {:?}", fields[i])))
            };
            let real = |i: usize| {
                fields[i]
                    .parse::<f64>()
                    .map_err(|_| err(format!("bad number {:?}", fields[i])))
            };
            rows.push(TraceRow {
                k: int(0)?,
                t_k: int(1)?,
                comm_rounds: int(2)?,
                grad_rounds: int(3)?,
                rel_err: real(4)?,
                cons_err: real(5)?,
            });
        }
        if header.is_none() {
            return Err(AccountingError::Parse {
                line: text.lines().count(),
                reason: "missing header".into(),
            });
        }
        let cost_models = match manifest.get("cost_models") {
            Some(spec) if !spec.trim().is_empty() => spec
                .split(',')
                .map(CostModel::parse_spec)
                .collect::<Result<Vec<_>, _>>()?,
            _ => vec![CostModel::default()],
        };
        Ok(Self {
            manifest,
            rows,
            cost_models,
        })
    }
}

/// Drops manifest lines for [`VOLATILE_MANIFEST_KEYS`].
pub fn strip_volatile(csv: &str) -> String {
    csv.lines()
        .filter(|line| {
            !VOLATILE_MANIFEST_KEYS
                .iter()
                .any(|k| line.starts_with(&format!("# {k}=")))
        })
        .fold(String::new(), |mut acc, l| {
            acc.push_str(l);
            acc.push('\n');
            acc
        })
}

/// Shortest round-trip decimal; scientific notation outside `[1e-4, 1e16)`.
pub fn format_real(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Collects trace rows, keeping every `stride`-th iteration and the last one.
#[derive(Debug, Clone)]
pub struct TraceRecorder {
    stride: u64,
    rows: Vec<TraceRow>,
    pending: Option<TraceRow>,
}

impl TraceRecorder {
    pub fn new(stride: u64) -> Self {
        Self {
            stride: stride.max(1),
            rows: Vec::new(),
            pending: None,
        }
    }

    pub fn stride(&self) -> u64 {
        self.stride
    }

    pub fn record(&mut self, row: TraceRow) {
        if row.k.is_multiple_of(self.stride) {
            self.rows.push(row);
            self.pending = None;
        } else {
            self.pending = Some(row);
        }
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn finish(mut self) -> Vec<TraceRow> {
        if let Some(row) = self.pending.take() {
            self.rows.push(row);
        }
        self.rows
    }
}

impl Default for TraceRecorder {
    fn default() -> Self {
        Self::new(1)
    }
}

/// Cumulative cost per recorded row.
pub fn cost_series(trace: &RunTrace, model: &CostModel) -> Vec<f64> {
    trace
        .rows
        .iter()
        .map(|r| model.cost(r.comm_rounds, r.grad_rounds))
        .collect()
}

/// `‖x̄ - x*‖² / ‖x*‖²`
pub fn relative_error(x_bar: &[f64], truth: &GroundTruth) -> Result<f64, AccountingError> {
    let denom = checked_denominator(x_bar.len(), truth)?;
    Ok(linalg::dist_sq(x_bar, &truth.x_star) / denom)
}

/// `(1/n) Σ ‖x_i - x*‖² / ‖x*‖²`
pub fn consensus_error(x: &StackedIterate, truth: &GroundTruth) -> Result<f64, AccountingError> {
    let denom = checked_denominator(x.p(), truth)?;
    let total: f64 = x.blocks().map(|b| linalg::dist_sq(b, &truth.x_star)).sum();
    Ok(total / x.n() as f64 / denom)
}

fn checked_denominator(p: usize, truth: &GroundTruth) -> Result<f64, AccountingError> {
    if p != truth.x_star.len() {
        return Err(AccountingError::Dimension {
            expected: truth.x_star.len(),
            got: p,
        });
    }
    let denom = linalg::norm_sq(&truth.x_star);
    if denom == 0.0 {
        return Err(AccountingError::ZeroOptimum);
    }
    Ok(denom)
}
