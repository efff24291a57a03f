//! `resbvp`: analyze, certify, solve and cross-check resonant discrete
//! boundary value problems read from JSON problem files.

mod commands;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use resbvp::conditions::DEFAULT_D_CAP;
use resbvp::oracle::{DEFAULT_NEWTON_TOL, DEFAULT_SEED, DEFAULT_STARTS};
use resbvp::Orientation;

use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "resbvp", version, about = "Scalar multipoint difference boundary value problems at resonance")]
#[command(after_help = "Exit status: 0 success, 1 a condition failed, 2 bad input, 3 numerical failure.\n\n\
Problem files are JSON: {\"n\", \"N\", \"m\", \"a\": [a_0 .. a_{n-1}], \"B\": [B_0 .. B_N], \"g\"}.\n\
Each a_j is a number or a table over t = 0..N-1; each B_k is a list of rows or a flat row-major list.\n\
g is an expression in t and x: + - * / ^, comparisons, if(cond, a, b), abs sign exp ln sqrt sin cos atan tanh min max, pi.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Boundary map, kernel bases, S, Psi, sign sets and the norm bound.
    Analyze {
        problem: PathBuf,
        #[command(flatten)]
        tol: Tolerances,
        #[command(flatten)]
        out: Output,
    },
    /// Checks the existence conditions at (c, d), or searches for a pair.
    Check {
        problem: PathBuf,
        #[command(flatten)]
        cert: CertArgs,
        #[command(flatten)]
        tol: Tolerances,
        #[command(flatten)]
        out: Output,
    },
    /// Certifies, then solves through the bifurcation equation.
    Solve {
        problem: PathBuf,
        #[command(flatten)]
        cert: CertArgs,
        #[command(flatten)]
        tol: Tolerances,
        #[command(flatten)]
        out: Output,
        /// Writes the scalar solution as `t,y` rows.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Newton on the full scalar system: multistart, or from a warm start.
    Oracle {
        problem: PathBuf,
        #[command(flatten)]
        oracle: OracleArgs,
        #[command(flatten)]
        tol: Tolerances,
        #[command(flatten)]
        out: Output,
    },
    /// Runs the built-in eight-step example and compares with its
    /// reference tables.
    Example5 {
        #[command(flatten)]
        tol: Tolerances,
        #[command(flatten)]
        out: Output,
    },
    /// analyze, check, solve, then confirm the solution with the oracle.
    All {
        problem: PathBuf,
        #[command(flatten)]
        cert: CertArgs,
        #[command(flatten)]
        oracle: OracleArgs,
        #[command(flatten)]
        tol: Tolerances,
        #[command(flatten)]
        out: Output,
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OrientationArg {
    Standard,
    Reversed,
    Both,
}

impl OrientationArg {
    fn orientations(self) -> Vec<Orientation> {
        match self {
            OrientationArg::Standard => vec![Orientation::Standard],
            OrientationArg::Reversed => vec![Orientation::Reversed],
            OrientationArg::Both => Orientation::BOTH.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Args)]
struct CertArgs {
    /// Lower end of the sign interval; needs --d.
    #[arg(long, requires = "d", conflicts_with = "auto")]
    c: Option<f64>,
    /// Upper end of the sign interval; needs --c.
    #[arg(long, requires = "c", conflicts_with = "auto")]
    d: Option<f64>,
    /// Searches c over a fixed grid and doubles d until the conditions hold
    /// (the default when --c/--d are absent).
    #[arg(long)]
    auto: bool,
    #[arg(long, value_enum, default_value = "both")]
    orientation: OrientationArg,
    /// Largest d tried by the search.
    #[arg(long, default_value_t = DEFAULT_D_CAP)]
    d_cap: f64,
}

#[derive(Debug, Clone, Args)]
struct OracleArgs {
    /// Number of random Newton starts.
    #[arg(long, default_value_t = DEFAULT_STARTS)]
    starts: usize,
    /// Half-width of the start box; defaults to 2d for a certified (c, d),
    /// otherwise 10. Solutions closer than 1e-6 (1 + |y|) are merged.
    #[arg(long = "box", value_name = "RADIUS")]
    box_radius: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Starts Newton from the `y` of a JSON report (e.g. `solve --json`)
    /// instead of random points.
    #[arg(long, value_name = "PATH")]
    warm: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct Tolerances {
    /// Rank threshold relative to the largest singular value.
    #[arg(long, default_value_t = 1e-10)]
    tol_rank: f64,
    /// Zero threshold for the sign sets, relative to the largest entry.
    #[arg(long, default_value_t = 1e-10)]
    tol_sign: f64,
    /// Slack for strict inequalities, relative to the compared values.
    #[arg(long, default_value_t = 1e-9)]
    tol_strict: f64,
    /// Residual target for the solver.
    #[arg(long, default_value_t = 1e-10)]
    tol_solve: f64,
    /// Residual target for the Newton oracle.
    #[arg(long, default_value_t = DEFAULT_NEWTON_TOL)]
    tol_newton: f64,
}

#[derive(Debug, Clone, Args)]
struct Output {
    /// Emits a JSON report instead of text.
    #[arg(long)]
    json: bool,
    /// Writes the report to PATH instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<(), CliError> {
        for (name, v) in [
            ("--tol-rank", self.tol_rank),
            ("--tol-sign", self.tol_sign),
            ("--tol-strict", self.tol_strict),
            ("--tol-solve", self.tol_solve),
            ("--tol-newton", self.tol_newton),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Input(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}
