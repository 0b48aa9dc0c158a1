//! The `uno` command.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 for
//! failures while running.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod config;
pub mod eval;
pub mod play;
pub mod serve;
pub mod train;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "uno", version, about = "Train, evaluate and play Uno agents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train an agent from a TOML config file.
    Train(TrainArgs),
    /// Play checkpoints (or `random`) against each other.
    Eval(EvalArgs),
    /// Host tables over UDP and WebSocket.
    Serve(ServeArgs),
    /// Terminal client for a running server.
    Play(PlayArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Config file; every key is optional.
    pub config: PathBuf,
    /// Overrides `out_dir`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Overrides `episodes`.
    #[arg(long)]
    pub episodes: Option<u64>,
    /// Overrides `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Only print evaluation lines.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// One per seat: a checkpoint path or `random`.
    #[arg(required = true, num_args = 2..)]
    pub agents: Vec<String>,
    #[arg(long, default_value_t = 1000)]
    pub games: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep every agent in its listed seat.
    #[arg(long)]
    pub no_rotate: bool,
    /// Write the report as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// TOML file with any of the options below (flags win).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// UDP bind address.
    #[arg(long)]
    pub udp: Option<String>,
    /// WebSocket bind address.
    #[arg(long)]
    pub ws: Option<String>,
    #[arg(long)]
    pub no_udp: bool,
    #[arg(long)]
    pub no_ws: bool,
    /// Files served over HTTP on the WebSocket port.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Master seed for tables created without one.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub turn_timeout_ms: Option<u64>,
    #[arg(long)]
    pub bot_delay_ms: Option<u64>,
    /// Directory for finished session transcripts.
    #[arg(long)]
    pub log_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlayArgs {
    /// Server UDP address, e.g. 127.0.0.1:7777.
    #[arg(long, conflicts_with = "ws", required_unless_present = "ws")]
    pub udp: Option<String>,
    /// Server WebSocket URL, e.g. ws://127.0.0.1:7778/ws.
    #[arg(long)]
    pub ws: Option<String>,
    /// Join an existing table instead of creating one.
    #[arg(long, conflicts_with = "create")]
    pub session: Option<String>,
    /// Seats of a new table, comma separated.
    #[arg(long, default_value = "human,random")]
    pub create: String,
    #[arg(long)]
    pub seat: Option<usize>,
    /// Seed of a new table.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub turn_timeout_ms: Option<u64>,
    /// Play the first legal action without asking.
    #[arg(long)]
    pub auto: bool,
    /// Give up after this long without hearing from the server.
    #[arg(long, default_value_t = 600)]
    pub idle_timeout_s: u64,
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => train::cmd_train(&a),
        Command::Eval(a) => eval::cmd_eval(&a),
        Command::Serve(a) => runtime()?.block_on(serve::cmd_serve(&a)),
        Command::Play(a) => runtime()?.block_on(play::cmd_play(&a)),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, CliError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start runtime: {e}")))
}
