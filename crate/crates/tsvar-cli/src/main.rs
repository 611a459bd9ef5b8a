//! Command line for the variational engine: problem-file ingestion,
//! evaluation and residual reports, solvers, duality checks, and the
//! worked-example reproductions.

use clap::{Parser, Subcommand, ValueEnum};

use tsvar_cli::{commands, OutputMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputArg {
    Text,
    Machine,
}

impl From<OutputArg> for OutputMode {
    fn from(v: OutputArg) -> Self {
        match v {
            OutputArg::Text => OutputMode::Text,
            OutputArg::Machine => OutputMode::Machine,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "tsvar",
    about = "Backwards variational calculus on finite time scales",
    version
)]
struct Cli {
    /// report format
    #[arg(long, global = true, value_enum, default_value_t = OutputArg::Text)]
    output: OutputArg,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the component integrals and the functional at a candidate
    Eval {
        #[arg(long)]
        problem: std::path::PathBuf,
        /// candidate as a closed-form expression in t
        #[arg(long, conflicts_with = "x_values")]
        x: Option<String>,
        /// candidate as a comma-separated value list (one per scale point)
        #[arg(long)]
        x_values: Option<String>,
    },
    /// Euler-Lagrange and natural-boundary residuals of a candidate
    Residual {
        #[arg(long)]
        problem: std::path::PathBuf,
        #[arg(long, conflicts_with = "x_values")]
        x: Option<String>,
        #[arg(long)]
        x_values: Option<String>,
        /// verify max residual against this tolerance (exit 4 on failure)
        #[arg(long)]
        verify_tol: Option<f64>,
    },
    /// Find a stationary trajectory of the problem
    Solve {
        #[arg(long)]
        problem: std::path::PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Scan dL/dm over a range for a problem with one free value
    Scan1d {
        #[arg(long)]
        problem: std::path::PathBuf,
        /// the scale point carrying the free value
        #[arg(long)]
        free_point: f64,
        /// scan range LO:HI
        #[arg(long)]
        range: String,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Solve a Q-constant self-consistency system in q1..qn
    SolveQ {
        /// residual expression, one per equation (repeat)
        #[arg(long = "residual", required = true)]
        residuals: Vec<String>,
        /// guard expression that must stay nonzero at a valid root (repeat)
        #[arg(long = "guard")]
        guards: Vec<String>,
        /// start box LO:HI applied per axis
        #[arg(long, default_value = "-10:10")]
        range: String,
        #[arg(long, default_value_t = 16)]
        starts: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
    },
    /// Print the dual time scale and the dualized problem
    Dualize {
        #[arg(long)]
        problem: std::path::PathBuf,
    },
    /// Run the randomized duality identity suite
    CheckDuality {
        /// number of random (scale, function, Lagrangian) triples
        #[arg(long, default_value_t = 1000)]
        random: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Reproduce a worked example end to end with pass/fail checks
    Reproduce {
        /// ex1-real | ex1-3pt | ex2
        example: String,
    },
}

fn main() {
    let cli = Cli::parse();
    let output: OutputMode = cli.output.into();
    let result = match cli.command {
        Command::Eval {
            problem,
            x,
            x_values,
        } => commands::eval(&problem, x.as_deref(), x_values.as_deref(), output),
        Command::Residual {
            problem,
            x,
            x_values,
            verify_tol,
        } => commands::residual(
            &problem,
            x.as_deref(),
            x_values.as_deref(),
            verify_tol,
            output,
        ),
        Command::Solve {
            problem,
            tol,
            max_iter,
            seed,
        } => commands::solve(&problem, tol, max_iter, seed, output),
        Command::Scan1d {
            problem,
            free_point,
            range,
            samples,
            tol,
        } => commands::scan1d(&problem, free_point, &range, samples, tol, output),
        Command::SolveQ {
            residuals,
            guards,
            range,
            starts,
            tol,
            max_iter,
        } => commands::solve_q(&residuals, &guards, &range, starts, tol, max_iter, output),
        Command::Dualize { problem } => commands::dualize(&problem, output),
        Command::CheckDuality { random, seed } => commands::check_duality(random, seed, output),
        Command::Reproduce { example } => commands::reproduce(&example, output),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
