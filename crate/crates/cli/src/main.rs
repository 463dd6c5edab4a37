//! `inflap` command-line front end.
//!
//! Exit codes: 0 success, 1 usage/config/IO error, 2 solver
//! non-convergence, 3 verdict failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RunConfig, Settings, OUT_ENV};

#[derive(Parser)]
#[command(name = "inflap", version, about = "First p-Laplacian eigenpairs, their large-p limit, and transport to the boundary")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// Flat `key = value` config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// disk, square, rectangle, l_shape, annulus or polygon.
    #[arg(long, global = true)]
    shape: Option<String>,
    /// Lattice spacing.
    #[arg(long, global = true)]
    h: Option<f64>,
    /// Output directory (beats INFLAP_OUT and the config file).
    #[arg(long, global = true)]
    out: Option<String>,
    /// Comma-separated subset of csv,json,svg.
    #[arg(long, global = true)]
    formats: Option<String>,
    /// Also write the resolved settings as a replayable config file.
    #[arg(long, global = true)]
    reproducible: bool,
    /// Seed for randomized sources.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    radius: Option<f64>,
    /// Center as x,y.
    #[arg(long, global = true, allow_hyphen_values = true)]
    center: Option<String>,
    #[arg(long, global = true)]
    r_in: Option<f64>,
    #[arg(long, global = true)]
    r_out: Option<f64>,
    #[arg(long, global = true)]
    side: Option<f64>,
    #[arg(long, global = true)]
    width: Option<f64>,
    #[arg(long, global = true)]
    height: Option<f64>,
    #[arg(long, global = true)]
    outer_side: Option<f64>,
    #[arg(long, global = true)]
    notch_side: Option<f64>,
    /// Polygon vertices as x,y;x,y;...
    #[arg(long, global = true, allow_hyphen_values = true)]
    vertices: Option<String>,
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    #[arg(long, global = true)]
    grad_tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the first eigenpair at one exponent.
    Solve {
        #[arg(long)]
        p: Option<f64>,
    },
    /// Sweep exponents and check the large-p behaviour.
    Study {
        /// Comma-separated increasing exponents.
        #[arg(long)]
        p_list: Option<String>,
    },
    /// Transport a measure to the boundary.
    Transport(commands::TransportArgs),
    /// Re-evaluate the verdict of a finished study.
    Report {
        /// Directory holding `sweep.json` (defaults to the output directory).
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
}

fn settings(common: &Common, extra: &[(&str, Option<String>)]) -> Result<Settings, String> {
    let mut s = match &common.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let flags: Vec<(&str, Option<String>)> = vec![
        ("shape", common.shape.clone()),
        ("h", common.h.map(|v| v.to_string())),
        ("formats", common.formats.clone()),
        ("reproducible", common.reproducible.then(|| "true".to_string())),
        ("seed", common.seed.map(|v| v.to_string())),
        ("radius", common.radius.map(|v| v.to_string())),
        ("center", common.center.clone()),
        ("r_in", common.r_in.map(|v| v.to_string())),
        ("r_out", common.r_out.map(|v| v.to_string())),
        ("side", common.side.map(|v| v.to_string())),
        ("width", common.width.map(|v| v.to_string())),
        ("height", common.height.map(|v| v.to_string())),
        ("outer_side", common.outer_side.map(|v| v.to_string())),
        ("notch_side", common.notch_side.map(|v| v.to_string())),
        ("vertices", common.vertices.clone()),
        ("max_iters", common.max_iters.map(|v| v.to_string())),
        ("grad_tol", common.grad_tol.map(|v| v.to_string())),
    ];
    for (k, v) in flags.into_iter().chain(extra.iter().cloned()) {
        if let Some(v) = v {
            s.set(k, &v)?;
        }
    }
    Ok(s)
}

fn run(cli: Cli) -> Result<u8, String> {
    let extra: Vec<(&str, Option<String>)> = match &cli.command {
        Command::Solve { p } => vec![("p", p.map(|v| v.to_string()))],
        Command::Study { p_list } => vec![("p_list", p_list.clone())],
        Command::Transport(_) | Command::Report { .. } => vec![],
    };
    let s = settings(&cli.common, &extra)?;
    let cfg = RunConfig::resolve(&s, std::env::var(OUT_ENV).ok(), cli.common.out.as_deref())?;
    match cli.command {
        Command::Solve { .. } => commands::solve(&cfg, &s),
        Command::Study { .. } => commands::study(&cfg, &s),
        Command::Transport(args) => commands::transport(&cfg, &s, &args),
        Command::Report { input } => commands::report(&cfg, input.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(commands::EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("inflap: {msg}");
            ExitCode::from(commands::EXIT_CONFIG)
        }
    }
}
