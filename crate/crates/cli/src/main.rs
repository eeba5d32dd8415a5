//! `invcloud`: reference-cloud initialisation, simulation, tracking,
//! evaluation and multi-contact mapping from the command line.

mod commands;
mod error;
mod evaluate;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::{CliError, CliResult};
use invcloud_core::config::SEED_ENV;
use invcloud_core::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "invcloud", version, about = "Six-DoF tactile pose tracking with a globally indexed reference cloud")]
struct Cli {
    /// TOML run configuration; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the reference cloud from a no-contact frame.
    InitCloud(InitCloudArgs),
    /// Render a scenario into a frame directory.
    Simulate(SimulateArgs),
    /// Track a frame directory and write a pose-track CSV.
    Track(TrackArgs),
    /// Compute drift, repeatability or accuracy reports from tracks.
    Evaluate(EvaluateArgs),
    /// Fuse contact patches into one map.
    Slam(SlamArgs),
    /// Run quick built-in consistency checks.
    Selftest,
}

#[derive(Args, Debug)]
pub struct InitCloudArgs {
    /// Frame directory holding `reference.ichm`, `markers.png` and `scenario.toml`.
    #[arg(long, conflicts_with_all = ["reference", "markers"])]
    pub frames: Option<PathBuf>,
    /// No-contact height map (binary container).
    #[arg(long, requires = "markers")]
    pub reference: Option<PathBuf>,
    /// Marker mask PNG of the no-contact frame.
    #[arg(long, requires = "reference")]
    pub markers: Option<PathBuf>,
    /// Physical marker layout as ROWSxCOLS; read from the scenario when omitted.
    #[arg(long, value_parser = parse_dims)]
    pub marker_grid: Option<(usize, usize)>,
    /// Dense grid as ROWSxCOLS, e.g. 31x41.
    #[arg(long, value_parser = parse_dims)]
    pub grid: Option<(usize, usize)>,
    /// Output cloud file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Built-in scenario name.
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    pub preset: Option<String>,
    /// Scenario TOML file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Seed; overrides the config file and the environment.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output frame directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Id-anchored reference cloud tracker.
    Invariant,
    /// Frame-to-frame nearest-neighbour ICP.
    Baseline,
}

#[derive(Args, Debug)]
pub struct TrackArgs {
    #[arg(long)]
    pub frames: Option<PathBuf>,
    #[arg(long)]
    pub cloud: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "invariant")]
    pub method: Method,
    /// Output track CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Drift,
    Repeat,
    Accuracy,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long, value_enum)]
    pub experiment: Experiment,
    /// `LABEL TRACK_CSV FRAMES_DIR`; repeat the flag for more runs. Runs that
    /// share a label are trials of one method and are averaged.
    #[arg(long = "run", num_args = 3, value_names = ["LABEL", "TRACK", "FRAMES"], required = true)]
    pub runs: Vec<String>,
    /// Output directory for the report files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write SVG charts.
    #[arg(long)]
    pub emit_plots: bool,
}

#[derive(Args, Debug)]
pub struct SlamArgs {
    /// Frame directories; every frame is one contact patch.
    #[arg(long = "patches", num_args = 1.., required = true)]
    pub patches: Vec<PathBuf>,
    #[arg(long)]
    pub cloud: Option<PathBuf>,
    /// Scenario whose object is the reference outline; defaults to the first
    /// patch directory's scenario when it describes an outline.
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// Output directory for the map, journal and report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected ROWSxCOLS, got {s:?}"))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((p(r)?, p(c)?))
}

fn load_config(path: Option<&PathBuf>) -> CliResult<RunConfig> {
    let cfg = match path {
        Some(p) => RunConfig::load(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        None => RunConfig::default(),
    };
    cfg.with_seed_override(std::env::var(SEED_ENV).ok().as_deref())
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> CliResult {
    let cfg = load_config(cli.config.as_ref())?;
    match cli.command {
        Command::InitCloud(a) => commands::init_cloud(&cfg, a),
        Command::Simulate(a) => commands::simulate(&cfg, a),
        Command::Track(a) => commands::track(&cfg, a),
        Command::Evaluate(a) => evaluate::evaluate(&cfg, a),
        Command::Slam(a) => commands::slam(&cfg, a),
        Command::Selftest => selftest::selftest(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code() as u8)
        }
    }
}
