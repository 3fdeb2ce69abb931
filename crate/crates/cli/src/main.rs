//! `speedlimit` command-line tool.
//!
//! Exit codes: 0 success, 1 domain error (invalid scenario, infeasible
//! policy, bad option values), 2 I/O or parse error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "speedlimit", version, about = "Pareto-optimal speed limits for traffic and air quality")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a scenario: adjoint CFL condition, road visibility, graph.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        /// Accepted for symmetry with the other commands; nothing is written.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate one policy and write trajectory, emission and objectives.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Speed limits in road order, e.g. "1,1,1,1,1,1".
        #[arg(long)]
        policy: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search the Pareto front of speed-limit policies.
    Optimize {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Objective set: "2d" (flow, pollution) or "3d" (flow, dispersion, queue).
        #[arg(long)]
        mode: Option<String>,
        /// Idle-traffic weight; defaults to the scenario's value.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2000, allow_negative_numbers = true)]
        budget: i64,
        /// Threads for concurrent policy evaluations.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Re-express a stored front in other objective coordinates.
    Export {
        #[arg(long)]
        front: PathBuf,
        #[arg(long, value_enum)]
        coords: Coords,
        /// Idle-traffic weight used to recompute J_poll.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Scenario the front came from, recorded in the manifest.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Coords {
    FlowPoll,
    DiffQueue,
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn domain(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 1,
            error: error.into(),
        }
    }

    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 2,
            error: error.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { scenario, .. } => commands::validate(&scenario),
        Command::Simulate {
            scenario,
            policy,
            out,
        } => commands::simulate(&scenario, &policy, &out),
        Command::Optimize {
            scenario,
            out,
            mode,
            delta,
            seed,
            budget,
            jobs,
        } => commands::optimize(&commands::OptimizeArgs {
            scenario,
            out,
            mode,
            delta,
            seed,
            budget,
            jobs,
        }),
        Command::Export {
            front,
            coords,
            delta,
            out,
            scenario,
        } => commands::export(&front, coords, delta, &out, scenario.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
