//! `pathmeas`: build, evaluate, sample and audit measures on the path spaces
//! of generalized Bratteli diagrams from JSON descriptions.
//!
//! Exit codes: 0 ok, 1 a check ran and failed, 2 bad input or any other error.

mod commands;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pathmeas::SolverConfig;

use report::{usage, CliError};

#[derive(Parser, Debug)]
#[command(name = "pathmeas", version, about = "Measures on path spaces of generalized Bratteli diagrams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a diagram file against the structural requirements.
    Validate {
        #[arg(long)]
        diagram: PathBuf,
    },
    /// Perron eigenpair of a stationary diagram.
    Eigen {
        #[arg(long)]
        diagram: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// `csv` prints the iteration/residual trace instead of the report.
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Evaluate, audit or sample a measure.
    #[command(subcommand)]
    Measure(MeasureCmd),
    /// Same as `measure check`.
    Check(CheckArgs),
    /// Same as `measure sample`.
    Sample(SampleArgs),
    /// Semibranching function system of a stationary 0-1 diagram.
    #[command(subcommand)]
    Sfs(SfsCmd),
    /// Finite-cell model of a measurable diagram.
    #[command(subcommand)]
    Kernel(KernelCmd),
    /// Heights, edge graph and irreducibility.
    #[command(subcommand)]
    Diagram(DiagramCmd),
}

#[derive(Subcommand, Debug)]
enum MeasureCmd {
    /// Measure of one or more cylinders.
    Eval(EvalArgs),
    Check(CheckArgs),
    Sample(SampleArgs),
}

#[derive(Subcommand, Debug)]
enum SfsCmd {
    /// Finite-depth Radon-Nikodym estimates of a branch map.
    Rn {
        #[command(flatten)]
        input: MeasureInput,
        /// Branch edge, `w->v` or `w->v#k`.
        #[arg(long)]
        edge: String,
        /// Path literal starting at the range vertex of the edge.
        #[arg(long)]
        path: String,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Level-ratio products of a Markov measure along a path.
    Qstat {
        #[command(flatten)]
        input: MeasureInput,
        #[arg(long)]
        path: String,
        #[arg(long, default_value_t = pathmeas::sfs::DEFAULT_QSTAT_TERMS)]
        terms: usize,
        #[arg(long, default_value_t = pathmeas::sfs::DEFAULT_QSTAT_TOL)]
        tol: f64,
        #[arg(long)]
        window: Option<u64>,
    },
    /// The Cuntz-Krieger matrix over the edge set.
    Ck {
        #[arg(long)]
        diagram: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum KernelCmd {
    /// Marginal and transition kernel of an edge measure.
    Disintegrate {
        #[arg(long)]
        kernel: PathBuf,
    },
    /// Harmonicity, fixed-point identity and consistency on cell cylinders.
    Check {
        #[arg(long)]
        kernel: PathBuf,
        /// Longest cylinder, in cell sets.
        #[arg(long, default_value_t = 3)]
        len: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Measure of cell cylinders such as `a,b|c|*`.
    Eval {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long, required = true)]
        cylinder: Vec<String>,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Iterate the fixed-point operator from the uniform cylinder table.
    Iterate {
        #[arg(long)]
        kernel: PathBuf,
        /// Longest cylinder in the table, in cells.
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// Defaults to `depth - 1`.
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

#[derive(Subcommand, Debug)]
enum DiagramCmd {
    /// Height vector `H^(n)` on a window.
    Height {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long, default_value_t = 1)]
        level: usize,
        #[arg(long)]
        window: Option<u64>,
    },
    /// Edge graph of a stationary 0-1 diagram.
    EdgeGraph {
        #[arg(long)]
        diagram: PathBuf,
    },
    /// Irreducibility on a window, with paths of length up to `max-m`.
    Irreducible {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long)]
        window: Option<u64>,
        #[arg(long, default_value_t = 16)]
        max_m: usize,
    },
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-10, allow_hyphen_values = true)]
    tol: f64,
    /// Largest truncation radius on infinite vertex sets.
    #[arg(long)]
    window: Option<u64>,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig, CliError> {
        let mut cfg = SolverConfig::default().with_tol(positive_tol(self.tol)?);
        cfg.max_iter = self.max_iter;
        if let Some(r) = self.window {
            cfg = cfg.up_to_radius(r);
        }
        Ok(cfg)
    }
}

fn positive_tol(tol: f64) -> Result<f64, CliError> {
    if tol > 0.0 && tol.is_finite() {
        Ok(tol)
    } else {
        Err(usage(format!("--tol must be a positive number, got {tol}")))
    }
}

#[derive(Args, Debug, Clone)]
struct MeasureInput {
    #[arg(long)]
    diagram: PathBuf,
    #[arg(long)]
    measure: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    input: MeasureInput,
    /// Path literal `v0-v1-v2:k0,k1`; repeat for several cylinders.
    #[arg(long, required = true)]
    path: Vec<String>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long)]
    diagram: PathBuf,
    /// Not needed for `shift-condition`.
    #[arg(long)]
    measure: Option<PathBuf>,
    #[arg(long, value_enum)]
    what: What,
    /// Longest cylinder checked, or the sample path length for `empirical`.
    #[arg(long, default_value_t = 3)]
    len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    /// Start vertex for IFS sampling.
    #[arg(long, allow_hyphen_values = true)]
    start: Option<i64>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    input: MeasureInput,
    #[arg(long, default_value_t = 10)]
    len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Start vertex for IFS sampling.
    #[arg(long, allow_hyphen_values = true)]
    start: Option<i64>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum What {
    Consistency,
    Tail,
    Shift,
    Ifs,
    Empirical,
    ShiftCondition,
}

impl What {
    fn name(self) -> &'static str {
        match self {
            What::Consistency => "consistency",
            What::Tail => "tail",
            What::Shift => "shift",
            What::Ifs => "ifs",
            What::Empirical => "empirical",
            What::ShiftCondition => "shift-condition",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = usage(e.render().to_string().trim().to_string());
            eprintln!("{}", serde_json::to_string_pretty(&err.to_json()).unwrap_or_default());
            return ExitCode::from(2);
        }
    };
    match commands::run(cli.command) {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(outcome.render().as_bytes()).is_err() {
                return ExitCode::from(2);
            }
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("{}", serde_json::to_string_pretty(&err.to_json()).unwrap_or_default());
            ExitCode::from(2)
        }
    }
}
