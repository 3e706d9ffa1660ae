//! `cyclebench`: generate randomized cycle benchmarking circuits, simulate
//! them, and estimate fidelities. Stages exchange files only, so measured
//! records can replace the `simulate` stage.
//!
//! Exit codes: 0 on success, 1 for invalid input, 2 for runtime failures.
//! Errors are printed to stderr as `{"error": ..., "kind": ..., "stage": ...}`.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use cyclebench::estimator::{BootstrapMode, EstimateOptions, ScalingModel};
use cyclebench::simulator::Backend;

use crate::commands::*;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "cyclebench", version, about = "Cycle benchmarking experiments from config to fidelity")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "CYCLEBENCH_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a config into a bundle of randomized circuits.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed of every config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        exhaustive_paulis: bool,
    },
    /// Run a bundle under a noise model and write decay records.
    Simulate {
        #[arg(long)]
        bundle: PathBuf,
        /// Noise model JSON; noiseless when omitted.
        #[arg(long)]
        noise: Option<PathBuf>,
        #[arg(long)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "frame", value_parser = parse_backend)]
        backend: Backend,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate fidelities from decay records.
    Analyze {
        #[arg(long)]
        records: PathBuf,
        #[command(flatten)]
        estimate: EstimateFlags,
        /// Report JSON; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Mean overlap per Pauli and length, for plotting.
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Spread of estimates from random Pauli subsets of each size.
    Subsample {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        m1: Option<usize>,
        #[arg(long)]
        m2: Option<usize>,
        /// Inclusive range `a..b` or a comma-separated list.
        #[arg(long, default_value = "1..100", value_parser = parse_sizes)]
        sizes: SizeList,
        #[arg(long, default_value_t = 30)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cycle key to analyze when the records hold several.
        #[arg(long)]
        cycle: Option<String>,
        /// Per-size rows as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the per-qubit or per-pair error rate across register sizes.
    Scaling {
        /// CSV with columns n_qubits, fidelity, std_error.
        #[arg(long)]
        points: PathBuf,
        #[arg(long, value_parser = parse_model)]
        model: ScalingModel,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate, simulate and analyze, writing every artifact to a directory.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        noise: Option<PathBuf>,
        /// Defaults to the config's shots_per_sequence.
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "frame", value_parser = parse_backend)]
        backend: Backend,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        exhaustive_paulis: bool,
        #[arg(long)]
        m1: Option<usize>,
        #[arg(long)]
        m2: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        resamples: usize,
    },
}

#[derive(Args)]
struct EstimateFlags {
    /// Shorter length; defaults to the smallest in the records.
    #[arg(long)]
    m1: Option<usize>,
    /// Longer length; defaults to the largest in the records.
    #[arg(long)]
    m2: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `paulis` resamples Paulis and sequences; `sequences` keeps the Pauli set.
    #[arg(long, default_value = "paulis", value_parser = parse_bootstrap)]
    bootstrap: BootstrapMode,
}

type SizeList = Vec<usize>;

fn parse_backend(s: &str) -> Result<Backend, String> {
    s.parse().map_err(|e: cyclebench::error::CbError| e.to_string())
}

fn parse_model(s: &str) -> Result<ScalingModel, String> {
    s.parse().map_err(|e: cyclebench::error::CbError| e.to_string())
}

fn parse_bootstrap(s: &str) -> Result<BootstrapMode, String> {
    match s {
        "paulis" => Ok(BootstrapMode::PaulisAndSequences),
        "sequences" => Ok(BootstrapMode::SequencesOnly),
        other => Err(format!("unknown bootstrap mode {other:?}; use paulis or sequences")),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::validation("args", "--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::runtime("args", e.to_string()))?;
    }
    match cli.command {
        Command::Generate { config, out, seed, exhaustive_paulis } => {
            generate(&GenerateArgs { config, out, seed, exhaustive_paulis })
        }
        Command::Simulate { bundle, noise, shots, seed, backend, out } => {
            simulate(&SimulateArgs { bundle, noise, shots, seed, backend, out })
        }
        Command::Analyze { records, estimate, out, curves } => {
            let args = AnalyzeArgs {
                m1: estimate.m1,
                m2: estimate.m2,
                options: EstimateOptions {
                    resamples: estimate.resamples,
                    seed: estimate.seed,
                    mode: estimate.bootstrap,
                },
            };
            analyze(&AnalyzeFiles { records, out, curves }, &args)
        }
        Command::Subsample { records, m1, m2, sizes, trials, seed, cycle, out } => {
            subsample(&SubsampleArgs { records, m1, m2, sizes, trials, seed, cycle, out })
        }
        Command::Scaling { points, model, out } => scaling(&points, model, out.as_deref()),
        Command::Pipeline { config, noise, shots, seed, backend, out_dir, exhaustive_paulis, m1, m2, resamples } => {
            pipeline(&PipelineArgs {
                config,
                noise,
                shots,
                seed,
                backend,
                out_dir,
                exhaustive_paulis,
                m1,
                m2,
                resamples,
            })
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return;
        }
        Err(e) => {
            let err = CliError::validation("args", e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            std::process::exit(err.kind.exit_code());
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("{}", err.to_json());
        std::process::exit(err.kind.exit_code());
    }
}
