use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use symnmf_cli::experiment::{format_summary, load_problem};
use symnmf_cli::{run_experiment, save_matrix, CliError, ExperimentConfig, InputSpec, Overrides, SolverKind};
use symnmf_core::problem::sparsify;
use symnmf_core::{DataMatrix, GenKind, GenSpec};

/// Symmetric nonnegative matrix factorization experiments.
///
/// Without a subcommand, runs every selected solver from shared random
/// initializations and writes per-run trace CSVs, a summary and optional
/// certificates to the output directory.
#[derive(Debug, Parser)]
#[command(name = "symnmf", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic data matrix to a file.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML experiment file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Data matrix: Matrix Market or dense text.
    #[arg(long, conflicts_with = "generate")]
    input: Option<PathBuf>,

    /// Synthetic data kind: low_rank, full_rank or adjacency.
    #[arg(long, value_parser = parse_kind)]
    generate: Option<GenKind>,

    #[arg(long)]
    n: Option<usize>,

    /// Factorization rank.
    #[arg(long)]
    k: Option<usize>,

    /// Solver to run; repeat for several. Defaults to all.
    #[arg(long = "solver", value_enum)]
    solvers: Vec<SolverKind>,

    #[arg(long)]
    restarts: Option<usize>,

    /// Base seed; restart r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Certify the splitting-method outputs.
    #[arg(long)]
    certify: bool,

    /// Stopping threshold on the splitting method's progress metric.
    #[arg(long)]
    stop_eps: Option<f64>,

    /// Iteration budget for every solver.
    #[arg(long)]
    max_iters: Option<usize>,

    /// Do not print the summary table.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, value_parser = parse_kind)]
    kind: GenKind,

    #[arg(long)]
    n: usize,

    #[arg(long)]
    k: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Write Matrix Market coordinate format instead of dense text.
    #[arg(long)]
    sparse: bool,

    #[arg(long)]
    out: PathBuf,
}

fn parse_kind(s: &str) -> Result<GenKind, String> {
    s.parse().map_err(|e: symnmf_core::SymNmfError| e.to_string())
}

fn run(args: RunArgs) -> Result<i32, CliError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    Overrides {
        input: args.input,
        generate: args.generate,
        n: args.n,
        k: args.k,
        solvers: args.solvers,
        restarts: args.restarts,
        seed: args.seed,
        out: args.out,
        certify: args.certify,
        stop_eps: args.stop_eps,
        max_iters: args.max_iters,
    }
    .apply(&mut cfg)?;
    let report = run_experiment(&cfg)?;
    if !args.quiet {
        print!("{}", format_summary(&report));
        println!("outputs in {}", cfg.output_dir.display());
    }
    Ok(report.exit_code())
}

fn generate(args: GenerateArgs) -> Result<i32, CliError> {
    let spec = match args.kind {
        GenKind::LowRank => GenSpec::low_rank(args.n, args.k, args.seed),
        GenKind::FullRank => GenSpec::full_rank(args.n, args.k, args.seed),
        GenKind::Adjacency => GenSpec::adjacency(args.n, args.k, args.seed),
    };
    let prob = load_problem(&InputSpec::Generate(spec))?;
    let z = if args.sparse {
        DataMatrix::Sparse(sparsify(&prob.z().to_dense())?)
    } else {
        DataMatrix::Dense(prob.z().to_dense())
    };
    save_matrix(&args.out, &z)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Some(Command::Generate(g)) => generate(g),
        None => run(cli.run),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
