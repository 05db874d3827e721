//! Config-driven experiments: problem setup, parallel method runs, trace
//! files, summaries and plot data.

mod config;
mod report;

use std::fs;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use thiserror::Error;

use crate::accounting::{format_real, AccountingError, Manifest, RunTrace, TraceRecorder};
use crate::datasets::{self, DatasetError};
use crate::engine::{max_stepsize, run, EngineError, Init, Method, MethodConfig, RunOutcome};
use crate::linalg;
use crate::objectives::{
    build_logistic, centralized_solve, default_reference_tolerance, generate_quadratic,
    quadratic_optimum, GroundTruth, LocalObjectiveSet, ObjectiveError,
};
use crate::topology::{build_topology, metropolis_weights, ConsensusMatrix, TopologyError};

pub use config::{
    parse_variant, AlphaPolicy, DatasetSource, ExperimentConfig, MethodSpec, ProblemSpec,
    DEFAULT_ALPHA_SCALE, DEFAULT_LOGISTIC_ITERS, DEFAULT_QUADRATIC_ITERS, SYNTHETIC_GROUPS,
    SYNTHETIC_RAW_P, SYNTHETIC_ROWS,
};
pub use report::{
    emit_plot_data, plateau, summarize, summary_csv, summary_table, PlotAxis, Reach, SummaryRow,
    THRESHOLDS,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("dataset: {0}")]
    Dataset(#[from] DatasetError),
    #[error("objective: {0}")]
    Objective(#[from] ObjectiveError),
    #[error("topology: {0}")]
    Topology(#[from] TopologyError),
    #[error("engine: {0}")]
    Engine(#[from] EngineError),
    #[error("trace: {0}")]
    Trace(#[from] AccountingError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Input(String),
}

/// A built problem instance with its consensus matrix and reference optimum.
pub struct Prepared {
    pub spec: ProblemSpec,
    pub objectives: Box<dyn LocalObjectiveSet>,
    pub truth: GroundTruth,
    pub w: ConsensusMatrix,
    pub topology: String,
}

pub fn prepare(
    spec: &ProblemSpec,
    topology: crate::topology::TopologyKind,
) -> Result<Prepared, ExperimentError> {
    let (objectives, truth): (Box<dyn LocalObjectiveSet>, GroundTruth) = match spec {
        ProblemSpec::Quadratic { n, p, kappa, seed } => {
            let q = generate_quadratic(*n, *p, *kappa, *seed)?;
            let truth = quadratic_optimum(&q)?;
            (Box::new(q), truth)
        }
        ProblemSpec::Logistic {
            source,
            n,
            p,
            partition,
            seed,
            normalize,
        } => {
            let mut data = match source {
                DatasetSource::Synthetic => {
                    datasets::synthetic_separable(SYNTHETIC_ROWS, SYNTHETIC_RAW_P, SYNTHETIC_GROUPS, *seed)
                }
                DatasetSource::File(path) => {
                    let file = fs::File::open(path).map_err(DatasetError::from)?;
                    datasets::parse_sparse_text(std::io::BufReader::new(file))?
                }
            };
            if let Some(p) = p {
                data = data.with_dimension(*p)?;
            }
            if *normalize {
                data.normalize_rows();
            }
            let shards = datasets::partition(&data, *n, *seed, *partition, true)?;
            let problem = build_logistic(shards)?.with_label(spec.describe());
            let truth = centralized_solve(&problem, default_reference_tolerance(&problem))?;
            (Box::new(problem), truth)
        }
    };
    let w = if spec.n() == 1 {
        ConsensusMatrix::single_agent()
    } else {
        metropolis_weights(&build_topology(topology, spec.n())?)?
    };
    Ok(Prepared {
        spec: spec.clone(),
        objectives,
        truth,
        w,
        topology: topology.to_string(),
    })
}

impl Prepared {
    /// Stepsize bound of the theory for one method.
    pub fn stepsize_bound(&self, spec: &MethodSpec) -> f64 {
        let t = match spec.method {
            Method::DgdT => spec
                .schedule
                .rounds(1)
                .min(u32::MAX as u64) as u32,
            _ => 1,
        };
        max_stepsize(spec.method, self.objectives.as_ref(), &self.w, t)
    }
}

/// Resolves stepsizes and iteration counts into runnable configurations.
pub fn resolve_methods(config: &ExperimentConfig, prepared: &Prepared) -> Vec<MethodConfig> {
    let bounds: Vec<f64> = config
        .methods
        .iter()
        .map(|m| prepared.stepsize_bound(m))
        .collect();
    let shared = bounds.iter().copied().fold(f64::INFINITY, f64::min);
    config
        .methods
        .iter()
        .zip(&bounds)
        .map(|(m, &bound)| {
            let derived = match config.alpha_policy {
                AlphaPolicy::PerMethod => config.alpha_scale * bound,
                AlphaPolicy::Shared => config.alpha_scale * shared,
            };
            MethodConfig {
                label: m.label.clone(),
                method: m.method,
                schedule: m.schedule,
                gradient_steps: m.gradient_steps,
                alpha: m.alpha.unwrap_or(derived),
                max_iters: m.max_iters.unwrap_or(config.max_iters),
                init: m.init.clone(),
                stride: config.stride,
            }
        })
        .collect()
}

pub struct MethodResult {
    pub config: MethodConfig,
    pub trace: RunTrace,
    pub outcome: Result<RunOutcome, EngineError>,
}

impl MethodResult {
    pub fn diverged(&self) -> bool {
        self.outcome.is_err()
    }
}

/// Runs one method and assembles its trace with a full manifest.
pub fn run_method(
    config: &ExperimentConfig,
    prepared: &Prepared,
    method: &MethodConfig,
) -> MethodResult {
    let mut recorder = TraceRecorder::new(method.stride);
    let outcome = run(
        method,
        &prepared.w,
        prepared.objectives.as_ref(),
        &prepared.truth,
        &mut recorder,
    );
    let rows = recorder.finish();
    let mut m = Manifest::new();
    m.set("label", &method.label);
    m.set("method", method.method);
    m.set("schedule", method.schedule);
    m.set("gradient_steps", method.gradient_steps);
    m.set("alpha", format_real(method.alpha));
    m.set(
        "alpha_policy",
        match config.alpha_policy {
            AlphaPolicy::PerMethod => "per_method",
            AlphaPolicy::Shared => "shared",
        },
    );
    m.set("max_iters", method.max_iters);
    m.set(
        "init",
        match &method.init {
            Init::Zeros => "zeros".to_string(),
            Init::Shared(v) => v.iter().map(|&x| format_real(x)).collect::<Vec<_>>().join(";"),
        },
    );
    m.set("stride", method.stride);
    m.set("problem", prepared.spec.describe());
    m.set("topology", &prepared.topology);
    m.set("n", prepared.objectives.n());
    m.set("p", prepared.objectives.p());
    m.set("beta", format_real(prepared.w.beta()));
    m.set("lambda_min", format_real(prepared.w.lambda_min()));
    m.set("x_star_norm", format_real(linalg::norm(&prepared.truth.x_star)));
    m.set("reference_gradient_norm", format_real(prepared.truth.tolerance));
    m.set(
        "cost_models",
        config
            .cost_models
            .iter()
            .map(|c| c.to_spec())
            .collect::<Vec<_>>()
            .join(","),
    );
    m.set("grad_evals_per_round", prepared.objectives.n());
    m.set(
        "convergence_theory",
        if method.outside_theory() { "none" } else { "applies" },
    );
    match &outcome {
        Ok(o) => {
            m.set("status", "ok");
            m.set("max_mean_residual", format_real(o.diagnostics.max_mean_residual));
            m.set("max_mean_identity_gap", format_real(o.diagnostics.max_mean_identity_gap));
        }
        Err(e) => m.set("status", format!("failed: {e}")),
    }
    m.set("version", env!("CARGO_PKG_VERSION"));
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    m.set("timestamp", stamp);
    MethodResult {
        config: method.clone(),
        trace: RunTrace {
            manifest: m,
            rows,
            cost_models: config.cost_models.clone(),
        },
        outcome,
    }
}

pub struct ExperimentReport {
    pub results: Vec<MethodResult>,
    pub summary: Vec<SummaryRow>,
    pub trace_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
}

impl ExperimentReport {
    pub fn all_diverged(&self) -> bool {
        !self.results.is_empty() && self.results.iter().all(MethodResult::diverged)
    }
}

/// File name for a method's trace, prefixed with its position.
pub fn trace_file_name(index: usize, label: &str) -> String {
    let mut slug = String::new();
    for c in label.chars() {
        match c {
            c if c.is_ascii_alphanumeric() || c == '-' => slug.push(c),
            '+' => slug.push_str("plus"),
            _ => {
                if !slug.ends_with('_') {
                    slug.push('_')
                }
            }
        }
    }
    format!("{:02}_{}.csv", index + 1, slug.trim_matches('_'))
}

/// Runs every method (in parallel) and writes one trace CSV per method plus
/// `summary.csv` into the output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let prepared = prepare(&config.problem, config.topology)?;
    let methods = resolve_methods(config, &prepared);
    for m in &methods {
        m.validate(prepared.objectives.p())?;
    }
    let results: Vec<MethodResult> = methods
        .par_iter()
        .map(|m| run_method(config, &prepared, m))
        .collect();

    let dir = &config.output_dir;
    let io = |path: &PathBuf| {
        let path = path.clone();
        move |source| ExperimentError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut trace_paths = Vec::with_capacity(results.len());
    for (i, r) in results.iter().enumerate() {
        let path = dir.join(trace_file_name(i, &r.config.label));
        fs::write(&path, r.trace.to_csv()).map_err(io(&path))?;
        trace_paths.push(path);
    }
    let traces: Vec<RunTrace> = results.iter().map(|r| r.trace.clone()).collect();
    let summary = summarize(&traces);
    let summary_path = dir.join("summary.csv");
    fs::write(&summary_path, summary_csv(&summary)).map_err(io(&summary_path))?;
    Ok(ExperimentReport {
        results,
        summary,
        trace_paths,
        summary_path,
    })
}

/// Reads trace CSV files.
pub fn load_traces(paths: &[PathBuf]) -> Result<Vec<RunTrace>, ExperimentError> {
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|source| ExperimentError::Io {
                path: p.clone(),
                source,
            })?;
            RunTrace::parse_csv(&text).map_err(ExperimentError::from)
        })
        .collect()
}
