//! `calderon-lab`: symbol computations, boundary-condition checks, disc
//! experiments, Weyl fits and the acceptance suite.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 for
//! malformed input, 3 for numerical failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use calderon_core::report::Tolerances;
use calderon_core::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "calderon-lab", version, about = "Calderon projectors and boundary conditions, numerically")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Override a named tolerance, e.g. --tol-override duality=1e-7 (repeatable)
    #[arg(long = "tol-override", global = true, value_name = "KEY=VALUE")]
    tol_override: Vec<String>,
}

#[derive(Args, Clone)]
pub struct Output {
    /// Write the JSON report here (printed to stdout otherwise)
    #[arg(long, visible_aliases = ["json", "report"], value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Also flatten the main table to CSV
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Conormal roots and p_+ on a cosphere grid, by companion split and residues
    Symbol {
        #[arg(long)]
        op: PathBuf,
        #[arg(long, default_value = "circle:64")]
        grid: String,
        /// split, residue or both
        #[arg(long, default_value = "both")]
        method: String,
        #[command(flatten)]
        output: Output,
    },
    /// Shapiro-Lopatinskii and regularity verdicts for B = ker P
    SlCheck {
        #[arg(long)]
        op: PathBuf,
        #[arg(long)]
        proj: PathBuf,
        #[arg(long, default_value = "circle:128")]
        grid: String,
        #[command(flatten)]
        output: Output,
    },
    /// Symbol of the adjoint boundary condition and the pairing checks
    AdjointBc {
        #[arg(long)]
        op: PathBuf,
        #[arg(long)]
        proj: PathBuf,
        #[arg(long, default_value = "circle:16")]
        grid: String,
        #[command(flatten)]
        output: Output,
    },
    /// Per-mode experiments on the unit disc
    Disc {
        /// d0, d_alpha or laplace
        #[arg(long, default_value = "d_alpha")]
        model: String,
        #[arg(long, default_value = "cubic:1.0")]
        alpha_profile: String,
        /// constant potential of the Laplace model
        #[arg(long, default_value_t = 1.0)]
        shift: f64,
        #[arg(long, default_value_t = 64)]
        trunc: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Index of a realization from the Fredholm pair (B, C_D)
    Index {
        /// d0 (with --aps-cut) or laplace (with --bc)
        #[arg(long, default_value = "d0")]
        model: String,
        #[arg(long, allow_hyphen_values = true)]
        aps_cut: Option<i64>,
        /// dirichlet or robin:a (Laplace model)
        #[arg(long)]
        bc: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        shift: f64,
        #[arg(long, default_value_t = 128)]
        trunc: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Weyl constant by quadrature against model eigenvalues
    Weyl {
        /// disc, interval[:L] or rectangle[:a,b]
        #[arg(long, default_value = "disc")]
        manifold: String,
        /// dirichlet, neumann or robin:c
        #[arg(long, default_value = "dirichlet")]
        bc: String,
        #[arg(long, default_value_t = 2000)]
        count: usize,
        #[arg(long, default_value_t = 16)]
        resolution: usize,
        /// also fit truncated singular values, e.g. d0:aps:48
        #[arg(long, value_name = "MODEL:REALIZATION:TRUNC")]
        singular_values: Option<String>,
        #[command(flatten)]
        output: Output,
    },
    /// Every acceptance criterion, run twice for the determinism check
    Suite {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Symbol { .. } => "symbol",
            Command::SlCheck { .. } => "sl-check",
            Command::AdjointBc { .. } => "adjoint-bc",
            Command::Disc { .. } => "disc",
            Command::Index { .. } => "index",
            Command::Weyl { .. } => "weyl",
            Command::Suite { .. } => "suite",
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Schema { .. }
        | Error::Json(_)
        | Error::Io(_)
        | Error::InvalidInput(_)
        | Error::Dimension(_)
        | Error::UnsupportedGeometry(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var_os("CALDERON_THREADS") {
        let parsed = n.to_str().and_then(|s| s.parse::<usize>().ok()).filter(|&n| n > 0);
        match parsed {
            Some(n) => {
                if let Err(e) = calderon_core::configure_threads(n) {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
            None => {
                eprintln!("error: CALDERON_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    let mut tol = Tolerances::default();
    for spec in &cli.tol_override {
        if let Err(e) = tol.apply(spec) {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let name = cli.command.name();
    let result = match cli.command {
        Command::Symbol { op, grid, method, output } => commands::symbol(&op, &grid, &method, &tol, &output),
        Command::SlCheck { op, proj, grid, output } => commands::sl_check(&op, &proj, &grid, &tol, &output),
        Command::AdjointBc { op, proj, grid, output } => commands::adjoint_bc(&op, &proj, &grid, &tol, &output),
        Command::Disc { model, alpha_profile, shift, trunc, output } => {
            commands::disc(&model, &alpha_profile, shift, trunc, &tol, &output)
        }
        Command::Index { model, aps_cut, bc, shift, trunc, output } => {
            commands::index(&model, aps_cut, bc.as_deref(), shift, trunc, &tol, &output)
        }
        Command::Weyl { manifold, bc, count, resolution, singular_values, output } => {
            commands::weyl(&manifold, &bc, count, resolution, singular_values.as_deref(), &tol, &output)
        }
        Command::Suite { seed, output } => commands::suite(seed, &tol, &output),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let code = exit_code_for(&e);
            if code == 3 {
                eprintln!("numerical error in {name}: {e}");
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(code)
        }
    }
}
