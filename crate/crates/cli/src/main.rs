mod commands;
mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "kantorel", version, about = "Exact sensitivity analysis for pWhile programs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Float,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Args, Clone, Debug)]
pub struct Global {
    /// Arithmetic for transport solves; the other analyses are always exact.
    #[arg(long, global = true, value_enum, env = "KANTOREL_MODE", default_value_t = Mode::Exact)]
    pub mode: Mode,
    /// Float-mode tolerance, residual mass cut-off and omega-limit tolerance.
    #[arg(long, global = true, env = "KANTOREL_EPSILON", default_value_t = 1e-9)]
    pub epsilon: f64,
    /// Cap on loop iterations and fixpoint rounds.
    #[arg(long, global = true, env = "KANTOREL_MAX_ITERS", default_value_t = 100_000)]
    pub max_iters: usize,
    /// Depth of omega-invariant checks.
    #[arg(long, global = true, env = "KANTOREL_N_MAX", default_value_t = 64)]
    pub n_max: usize,
    /// Seed for simulations.
    #[arg(long, global = true, env = "KANTOREL_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 1 runs everything on the calling thread.
    #[arg(long, global = true, env = "KANTOREL_JOBS")]
    pub jobs: Option<usize>,
    #[arg(long, global = true, value_enum, env = "KANTOREL_FORMAT", default_value_t = Format::Table)]
    pub format: Format,
}

/// Selects a built-in case study and its parameters.
#[derive(Args, Clone, Debug, Default)]
pub struct CaseArgs {
    /// Built-in case study (see `cases list`).
    #[arg(long)]
    pub case: Option<String>,
    #[arg(short = 'N', value_name = "N")]
    pub n: Option<String>,
    #[arg(short = 'K', value_name = "K")]
    pub k: Option<String>,
    /// Further case parameters, e.g. `--param N2=5 --param p=1/3`.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
}

/// A program file or a case study.
#[derive(Args, Clone, Debug)]
pub struct Target {
    /// Program file.
    pub program: Option<PathBuf>,
    #[command(flatten)]
    pub case: CaseArgs,
}

/// State pairs given inline or in a file with one pair per line.
#[derive(Args, Clone, Debug, Default)]
pub struct PairArgs {
    /// `{x = 0} | {x = 1}`; repeatable.
    #[arg(long = "pair", value_name = "PAIR")]
    pub pair: Vec<String>,
    /// File with one pair per line.
    #[arg(long = "pairs", value_name = "FILE")]
    pub pairs: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Output sub-distribution of a program from one state.
    Run {
        program: PathBuf,
        /// Input state, inline or as a file.
        #[arg(long, default_value = "{}")]
        state: String,
        /// Keep only these variables (comma separated).
        #[arg(long)]
        project: Option<String>,
    },
    /// Kantorovich distance between two output distributions.
    Dist {
        a: Option<PathBuf>,
        /// Second program; defaults to the first.
        b: Option<PathBuf>,
        /// Input state for both runs.
        #[arg(long)]
        state: Option<String>,
        #[arg(long)]
        s1: Option<String>,
        #[arg(long)]
        s2: Option<String>,
        /// Inline distribution over `x`, e.g. `table{0: 1/2, 1: 1/2}`.
        #[arg(long)]
        d1: Option<String>,
        #[arg(long)]
        d2: Option<String>,
        /// `discrete` or a relational expectation (inline or file).
        #[arg(long, default_value = "discrete")]
        cost: String,
        #[arg(long)]
        project: Option<String>,
        /// Also print an optimal coupling.
        #[arg(long)]
        plan: bool,
    },
    /// Relational pre-expectation at state pairs.
    Rpe {
        #[command(flatten)]
        target: Target,
        /// Post-expectation; defaults to the case distance.
        #[arg(long)]
        exp: Option<String>,
        /// Coupling annotations, `site : coupling` per line.
        #[arg(long)]
        couplings: Option<String>,
        #[command(flatten)]
        pairs: PairArgs,
    },
    /// Synchronous loop-invariant check.
    CheckInv {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        exp: Option<String>,
        #[arg(long)]
        inv: Option<String>,
        #[arg(long)]
        couplings: Option<String>,
        #[command(flatten)]
        pairs: PairArgs,
    },
    /// Asynchronous loop-invariant check.
    CheckAsync {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        exp: Option<String>,
        #[arg(long)]
        inv: Option<String>,
        #[arg(long)]
        couplings: Option<String>,
        #[command(flatten)]
        pairs: PairArgs,
    },
    /// Upper and lower omega-invariant checks with a supplied limit.
    CheckOmega {
        #[command(flatten)]
        target: Target,
        /// Post-expectation of the loop.
        #[arg(long)]
        f: String,
        /// Family `I_n` mentioning `$n`.
        #[arg(long)]
        family: String,
        /// Claimed limit `I_inf`.
        #[arg(long)]
        limit: String,
        /// Initial states; reachable loop-head states are added.
        #[arg(long = "state")]
        states: Vec<String>,
    },
    /// Weakest pre-expectation at states.
    Wpe {
        program: PathBuf,
        #[arg(long)]
        f: String,
        #[arg(long = "state", required = true)]
        states: Vec<String>,
    },
    /// Lower bound on Total Variation from a test function in [0, 1].
    LowerBound {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        f: String,
        #[command(flatten)]
        pairs: PairArgs,
    },
    /// Mixing curve of a hypercube or shuffle case.
    Mix {
        #[command(flatten)]
        case: CaseArgs,
        /// Step counts, comma separated or `lo..hi`; defaults to 0..=K.
        #[arg(long)]
        ks: Option<String>,
        /// Estimate by coupled simulation instead of exact distributions.
        #[arg(long)]
        simulate: bool,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
    /// Exact distance to the uniform distribution.
    Uniformity {
        #[command(flatten)]
        case: CaseArgs,
    },
    /// Coupled simulation of two runs.
    Simulate {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        exp: Option<String>,
        #[arg(long)]
        couplings: Option<String>,
        #[command(flatten)]
        pairs: PairArgs,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        /// Number of leading traces to include in the report.
        #[arg(long, default_value_t = 0)]
        keep_traces: usize,
    },
    /// Built-in case studies.
    Cases {
        #[command(subcommand)]
        action: CasesAction,
    },
}

#[derive(Subcommand, Debug)]
enum CasesAction {
    /// Names and descriptions.
    List,
    /// Source, distance, invariant and couplings of one case.
    Show {
        #[command(flatten)]
        case: CaseArgs,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let g = cli.global.clone();
    let run = move || commands::dispatch(cli.command, &cli.global);
    let result = match pool(&g) {
        Ok(Some(p)) => p.install(run),
        Ok(None) => run(),
        Err(e) => Err(e),
    };
    match result {
        Ok(out) => out.emit(&g),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(output::error_code(&e))
        }
    }
}

#[cfg(feature = "parallel")]
fn pool(g: &Global) -> anyhow::Result<Option<rayon::ThreadPool>> {
    match g.jobs {
        Some(n) if n > 1 => Ok(Some(rayon::ThreadPoolBuilder::new().num_threads(n).build()?)),
        _ => Ok(None),
    }
}

#[cfg(not(feature = "parallel"))]
fn pool(_: &Global) -> anyhow::Result<Option<NoPool>> {
    Ok(None)
}

#[cfg(not(feature = "parallel"))]
struct NoPool;

#[cfg(not(feature = "parallel"))]
impl NoPool {
    fn install<R>(&self, f: impl FnOnce() -> R) -> R {
        f()
    }
}
