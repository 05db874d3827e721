use super::{EngineError, Init, Method, MethodConfig};
use crate::accounting::{consensus_error, relative_error, AccountingError, TraceRecorder, TraceRow};
use crate::iterate::StackedIterate;
use crate::linalg;
use crate::objectives::{GroundTruth, LocalObjectiveSet};
use crate::topology::ConsensusMatrix;

/// Runs abort once the relative error exceeds this.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Agreement is only checked once an iteration has done this many rounds.
const SATURATION_MIN_ROUNDS: u64 = 16;
/// Blocks count as agreed when within this many ulps of the largest mean entry.
const SATURATION_ULPS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunDiagnostics {
    /// `max_k ‖x̄_{k+1} - (x̄_k - α g_k)‖ / (1 + ‖x̄_k‖)`
    pub max_mean_residual: f64,
    /// NEAR-DGD only: `max_k ‖x̄_k - ȳ_k‖ / (1 + ‖ȳ_k‖)`
    pub max_mean_identity_gap: f64,
    /// Consensus rounds counted but not simulated because the blocks had
    /// already agreed to working precision.
    pub skipped_rounds: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub iterations: u64,
    pub comm_rounds: u64,
    pub grad_rounds: u64,
    /// Per-agent gradient evaluations, `n * grad_rounds`.
    pub grad_evals: u64,
    pub final_iterate: StackedIterate,
    pub final_mean: Vec<f64>,
    pub diagnostics: RunDiagnostics,
}

/// Executes `config.max_iters` iterations, recording one row per iteration.
///
/// Row `k` describes the state after the `k`-th gradient step: `rel_err`
/// uses the block mean of the method's iterate (`x_k` for DGD, `y_k` for
/// NEAR-DGD) and `cons_err` the latest post-consensus local iterates.
pub fn run(
    config: &MethodConfig,
    w: &ConsensusMatrix,
    objectives: &dyn LocalObjectiveSet,
    truth: &GroundTruth,
    recorder: &mut TraceRecorder,
) -> Result<RunOutcome, EngineError> {
    let n = objectives.n();
    let p = objectives.p();
    config.validate(p)?;
    if w.n() != n || truth.x_star.len() != p {
        return Err(EngineError::DimensionMismatch(format!(
            "W is {0}x{0}, objectives are {n}x{p}, x* has {1} entries",
            w.n(),
            truth.x_star.len()
        )));
    }
    if linalg::norm_sq(&truth.x_star) == 0.0 {
        return Err(EngineError::ZeroOptimum);
    }

    let mut state = match &config.init {
        Init::Zeros => StackedIterate::zeros(n, p),
        Init::Shared(point) => StackedIterate::replicated(n, point),
    };
    let mut mixed = StackedIterate::zeros(n, p);
    let mut scratch = StackedIterate::zeros(n, p);
    let mut next = StackedIterate::zeros(n, p);
    let mut grad = vec![0.0; p];
    let mut grad_sum = vec![0.0; p];
    let alpha = config.alpha;

    let mut diagnostics = RunDiagnostics::default();
    let mut comm_rounds = 0u64;
    let mut grad_rounds = 0u64;
    let mut mean = state.mean();

    for k in 1..=config.max_iters {
        let t = config.schedule.rounds(k);
        let prev_mean = mean;
        let prev_norm = linalg::norm(&prev_mean);

        mixed.as_mut_slice().copy_from_slice(state.as_slice());
        diagnostics.skipped_rounds += mix_rounds(w, &mut mixed, &mut scratch, t);
        comm_rounds = comm_rounds.saturating_add(t);
        grad_sum.fill(0.0);

        let diverged = |reason: String| EngineError::Diverged {
            iteration: k,
            reason,
        };
        match config.method {
            Method::Dgd | Method::DgdT => {
                gradient_pass(objectives, alpha, &mixed, &state, &mut grad, &mut grad_sum, &mut next)
                    .map_err(|agent| diverged(format!("non-finite gradient at agent {agent}")))?;
            }
            Method::NearDgd => {
                let gap = linalg::dist(&mixed.mean(), &prev_mean) / (1.0 + prev_norm);
                diagnostics.max_mean_identity_gap = diagnostics.max_mean_identity_gap.max(gap);
                gradient_pass(objectives, alpha, &mixed, &mixed, &mut grad, &mut grad_sum, &mut next)
                    .map_err(|agent| diverged(format!("non-finite gradient at agent {agent}")))?;
                for _ in 1..config.gradient_steps {
                    std::mem::swap(&mut scratch, &mut next);
                    gradient_pass(
                        objectives, alpha, &scratch, &scratch, &mut grad, &mut grad_sum, &mut next,
                    )
                    .map_err(|agent| diverged(format!("non-finite gradient at agent {agent}")))?;
                }
            }
        }
        grad_rounds += config.gradient_steps as u64;

        if !next.is_finite() {
            return Err(diverged("non-finite iterate".into()));
        }
        mean = next.mean();
        let mut expected = prev_mean.clone();
        linalg::axpy(-alpha / n as f64, &grad_sum, &mut expected);
        let residual = linalg::dist(&mean, &expected) / (1.0 + prev_norm);
        diagnostics.max_mean_residual = diagnostics.max_mean_residual.max(residual);

        let rel_err = relative_error(&mean, truth).map_err(accounting_error)?;
        if !(rel_err <= DIVERGENCE_THRESHOLD) {
            return Err(diverged(format!("relative error {rel_err:e}")));
        }
        let local = match config.method {
            Method::NearDgd => &mixed,
            _ => &next,
        };
        let cons_err = consensus_error(local, truth).map_err(accounting_error)?;
        recorder.record(TraceRow {
            k,
            t_k: t,
            comm_rounds,
            grad_rounds,
            rel_err,
            cons_err,
        });
        std::mem::swap(&mut state, &mut next);
    }

    Ok(RunOutcome {
        iterations: config.max_iters,
        comm_rounds,
        grad_rounds,
        grad_evals: grad_rounds.saturating_mul(n as u64),
        final_iterate: state,
        final_mean: mean,
        diagnostics,
    })
}

fn accounting_error(e: AccountingError) -> EngineError {
    match e {
        AccountingError::ZeroOptimum => EngineError::ZeroOptimum,
        other => EngineError::DimensionMismatch(other.to_string()),
    }
}

/// `out_i = base_i - α∇f_i(at_i)`, adding every gradient into `grad_sum`.
/// Returns the first agent with a non-finite gradient on failure.
fn gradient_pass(
    objectives: &dyn LocalObjectiveSet,
    alpha: f64,
    base: &StackedIterate,
    at: &StackedIterate,
    grad: &mut [f64],
    grad_sum: &mut [f64],
    out: &mut StackedIterate,
) -> Result<(), usize> {
    for i in 0..objectives.n() {
        objectives.gradient_into(i, at.block(i), grad);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(i);
        }
        for ((o, b), g) in out.block_mut(i).iter_mut().zip(base.block(i)).zip(grad.iter()) {
            *o = b - alpha * g;
        }
        for (s, g) in grad_sum.iter_mut().zip(grad.iter()) {
            *s += g;
        }
    }
    Ok(())
}

/// Applies `t` rounds of `W` to `cur` in place. Once the blocks agree to
/// working precision further rounds cannot change them beyond rounding, so
/// they are snapped to their mean and the remaining rounds skipped.
/// Returns the number of skipped rounds.
fn mix_rounds(
    w: &ConsensusMatrix,
    cur: &mut StackedIterate,
    scratch: &mut StackedIterate,
    t: u64,
) -> u64 {
    let p = cur.p();
    for r in 1..=t {
        w.mix_into(p, cur.as_slice(), scratch.as_mut_slice());
        std::mem::swap(cur, scratch);
        if r >= SATURATION_MIN_ROUNDS && r < t && snap_if_agreed(cur) {
            return t - r;
        }
    }
    0
}

fn snap_if_agreed(x: &mut StackedIterate) -> bool {
    let mean = x.mean();
    let scale = mean.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let tol = SATURATION_ULPS * f64::EPSILON * scale;
    let agreed = x
        .blocks()
        .all(|b| b.iter().zip(&mean).all(|(v, m)| (v - m).abs() <= tol));
    if agreed {
        for i in 0..x.n() {
            x.block_mut(i).copy_from_slice(&mean);
        }
    }
    agreed
}
