use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use adcl_cli::{bench_command, parse_seed_order, replay_command, solve_command, Output, SolveOptions};
use adcl_core::engine::SeedOrder;
use adcl_core::smt::SOLVER_ENV;
use clap::{Args, Parser, Subcommand};

/// Prove non-termination of integer transition systems.
#[derive(Parser)]
#[command(name = "adcl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SolverArgs {
    /// SMT-LIB 2 solver binary.
    #[arg(long, env = SOLVER_ENV, default_value = "z3")]
    smt: PathBuf,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Maximal trace length.
    #[arg(long)]
    depth: Option<usize>,
    /// Order of input transitions: `file` or `shuffle:<seed>`.
    #[arg(long, default_value = "file", value_parser = parse_seed_order)]
    seed_order: SeedOrder,
}

impl SolverArgs {
    fn options(&self, proof: bool, log_derivation: bool) -> SolveOptions {
        SolveOptions {
            smt: Some(self.smt.clone()),
            timeout: self.timeout,
            depth: self.depth,
            seed_order: self.seed_order,
            proof,
            log_derivation,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one `.its` file; the first output line is NO, MAYBE or ERROR.
    Solve {
        path: PathBuf,
        /// Print a replayable proof after a NO.
        #[arg(long)]
        proof: bool,
        /// Print one line per rule application.
        #[arg(long)]
        log_derivation: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Check a proof against its input; exit 0 iff every check passes.
    Replay {
        input: PathBuf,
        proof: PathBuf,
        #[arg(long, env = SOLVER_ENV, default_value = "z3")]
        smt: PathBuf,
    },
    /// Solve every `.its` file in a directory and print CSV statistics.
    Bench {
        dir: PathBuf,
        /// Expected verdicts (`<file> <verdict>` per line); defaults to
        /// `<dir>/manifest.txt` when present.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

fn emit(out: Output) -> ExitCode {
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    let _ = std::io::stdout().flush();
    ExitCode::from(out.code as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            println!("ERROR");
            let _ = e.print();
            return ExitCode::from(adcl_cli::EXIT_INPUT as u8);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match cli.command {
        Command::Solve {
            path,
            proof,
            log_derivation,
            solver,
        } => emit(solve_command(&path, &solver.options(proof, log_derivation))),
        Command::Replay { input, proof, smt } => {
            let opts = SolveOptions {
                smt: Some(smt),
                ..SolveOptions::default()
            };
            emit(replay_command(&input, &proof, &opts.solver_config()))
        }
        Command::Bench {
            dir,
            manifest,
            jobs,
            solver,
        } => emit(bench_command(&dir, manifest.as_deref(), jobs, &solver.options(false, false))),
    }
}
