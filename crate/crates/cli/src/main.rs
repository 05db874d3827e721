use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dgdsim::experiment::{
    emit_plot_data, load_traces, run_experiment, summarize, summary_csv, summary_table,
    ExperimentConfig, ExperimentError, PlotAxis,
};
use dgdsim::{build_topology, metropolis_weights, ConsensusMatrix, TopologyKind};

const EXIT_CONFIG: u8 = 1;
const EXIT_DATASET: u8 = 2;
const EXIT_ALL_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "dgdsim", version, about = "Decentralized gradient method simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method of an experiment config and write traces + summary.
    Run {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long, env = "DGDSIM_OUTPUT_DIR")]
        output_dir: Option<PathBuf>,
    },
    /// Long-format `label,x,rel_err` data from trace files.
    Plotdata {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// iterations, cost, grad_rounds or comm_rounds
        #[arg(long, default_value = "iterations")]
        axis: String,
        /// Write to a file instead of stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Summary table recomputed from trace files.
    Summarize {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Print CSV instead of an aligned table.
        #[arg(long)]
        csv: bool,
    },
    /// Spectral data of the Metropolis matrix of a topology.
    Spectrum {
        /// cyclic, path, star or complete
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: usize,
        /// Neighbors per agent for cyclic graphs.
        #[arg(long)]
        k: Option<usize>,
        /// Also report β and λ_n of W^t.
        #[arg(long)]
        power: Option<u32>,
        /// Dump W as CSV.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
}

fn exit_code(err: &ExperimentError) -> u8 {
    match err {
        ExperimentError::Dataset(_) => EXIT_DATASET,
        _ => EXIT_CONFIG,
    }
}

fn fail(err: impl std::fmt::Display, code: u8) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, output_dir } => {
            let mut cfg = match ExperimentConfig::from_path(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e, exit_code(&e)),
            };
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            let report = match run_experiment(&cfg) {
                Ok(r) => r,
                Err(e) => return fail(&e, exit_code(&e)),
            };
            print!("{}", summary_table(&report.summary));
            for r in &report.results {
                if r.config.outside_theory() {
                    eprintln!("note: {}: no convergence guarantee (multiple gradient steps)", r.config.label);
                }
                if let Err(e) = &r.outcome {
                    eprintln!("warning: {}: {e}", r.config.label);
                }
            }
            println!("traces written to {}", cfg.output_dir.display());
            if report.all_diverged() {
                return ExitCode::from(EXIT_ALL_DIVERGED);
            }
            ExitCode::SUCCESS
        }
        Command::Plotdata { traces, axis, out } => {
            let result = axis
                .parse::<PlotAxis>()
                .and_then(|axis| emit_plot_data(&load_traces(&traces)?, axis));
            match result {
                Ok(csv) => match out {
                    Some(path) => match std::fs::write(&path, csv) {
                        Ok(()) => ExitCode::SUCCESS,
                        Err(e) => fail(format!("{}: {e}", path.display()), EXIT_CONFIG),
                    },
                    None => {
                        print!("{csv}");
                        ExitCode::SUCCESS
                    }
                },
                Err(e) => fail(e, EXIT_CONFIG),
            }
        }
        Command::Summarize { traces, csv } => match load_traces(&traces) {
            Ok(traces) => {
                let rows = summarize(&traces);
                if csv {
                    print!("{}", summary_csv(&rows));
                } else {
                    print!("{}", summary_table(&rows));
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e, EXIT_CONFIG),
        },
        Command::Spectrum {
            kind,
            n,
            k,
            power,
            dump,
        } => {
            let w = TopologyKind::parse(&kind, k).and_then(|kind| {
                if n == 1 {
                    Ok(ConsensusMatrix::single_agent())
                } else {
                    metropolis_weights(&build_topology(kind, n)?)
                }
            });
            let w = match w {
                Ok(w) => w,
                Err(e) => return fail(e, EXIT_CONFIG),
            };
            println!("beta={}", w.beta());
            println!("lambda_n={}", w.lambda_min());
            if let Some(t) = power {
                println!("beta^{t}={}", w.spectrum().beta_pow(t as u64));
                println!("lambda_n(W^{t})={}", w.spectrum().lambda_min_pow(t));
            }
            if let Some(path) = dump {
                if let Err(e) = std::fs::write(&path, w.to_csv()) {
                    return fail(format!("{}: {e}", path.display()), EXIT_CONFIG);
                }
            }
            ExitCode::SUCCESS
        }
    }
}
