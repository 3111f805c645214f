//! `deskcraft`: episodes, sweeps, skill and dataset tooling.
//!
//! Exit codes: 0 ok, 1 task or validation failure, 2 usage or I/O error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(m: impl Into<String>) -> Self {
        CliError { code: 2, message: m.into() }
    }
    pub fn io(m: impl Into<String>) -> Self {
        CliError { code: 2, message: m.into() }
    }
    pub fn failure(m: impl Into<String>) -> Self {
        CliError { code: 1, message: m.into() }
    }
}

#[derive(Debug, Parser)]
#[command(name = "deskcraft", version, about = "Perceive, plan and act in a deterministic voxel world")]
#[command(after_help = "Exit codes: 0 ok, 1 task or validation failure, 2 usage or I/O error.\n\
The remote backend reads its bearer token from the variable named by remote.auth_env (default DESKCRAFT_API_KEY).")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// World seed (episode) or base seed (tech-tree).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Episodes to run in parallel.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Chat backend for every role.
    #[arg(long, global = true, value_parser = config::BACKENDS)]
    pub backend: Option<String>,
    /// Directory for reports and records.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one episode and write its record.
    Episode(commands::EpisodeArgs),
    /// Ten-diamond search and free 100-iteration runs per seed.
    BlockSearch(commands::BlockSearchArgs),
    /// Tool tiers from wooden to diamond over several trials.
    TechTree(commands::TechTreeArgs),
    /// List, query or validate skills.
    #[command(subcommand)]
    Skills(commands::SkillsCommand),
    /// Validate, round-trip or replay record files.
    #[command(subcommand)]
    Dataset(commands::DatasetCommand),
    /// Score an answer file against a ground-truth QA pack.
    Qa(commands::QaArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
