//! `rehab`: command-line front end for the balance rehabilitation platform
//! models.

mod commands;
mod config;
mod error;
mod units;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "rehab", version, about = "Balance rehabilitation platform kinematics, dynamics, control and posturography")]
pub struct Cli {
    /// Scenario configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random stream; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for CSV and summary output.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for independent scenarios.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Leg lengths for a constrained pose.
    Ik(IkArgs),
    /// Platform pose from three leg lengths.
    Fk(FkArgs),
    /// Computed-torque tracking of a reference trajectory.
    Simulate(SimulateArgs),
    /// Actuator PID loops.
    #[command(subcommand)]
    Control(ControlCommand),
    /// Load-cell synthesis and analysis.
    #[command(subcommand)]
    Posture(PostureCommand),
}

#[derive(Debug, Args)]
pub struct IkArgs {
    /// Tilt azimuth (deg by default, or rad).
    #[arg(long, default_value = "0", value_parser = units::angle, allow_hyphen_values = true)]
    pub alpha: f64,
    /// Tilt angle (deg by default, or rad).
    #[arg(long, default_value = "0", value_parser = units::angle, allow_hyphen_values = true)]
    pub beta: f64,
    /// Platform height (m by default, or cm/mm); home height when omitted.
    #[arg(long, value_parser = units::length)]
    pub z: Option<f64>,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct FkArgs {
    /// Leg lengths `l1,l2,l3` (m by default, or cm/mm).
    #[arg(long, value_parser = units::lengths3)]
    pub lengths: [f64; 3],
    /// Azimuth used to pick the (alpha, beta) branch.
    #[arg(long, value_parser = units::angle, allow_hyphen_values = true)]
    pub alpha_guess: Option<f64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RefKind {
    Sine,
    Step,
    Composite,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Reference shape; replaces the configured reference kind.
    #[arg(long = "ref", value_enum)]
    pub reference: Option<RefKind>,
    /// Reference length (s by default, or ms).
    #[arg(long, value_parser = units::time)]
    pub duration: Option<f64>,
    /// Integration step (s by default, or ms).
    #[arg(long, value_parser = units::time)]
    pub dt: Option<f64>,
    /// Plant mass scale; a comma list runs one scenario per value.
    #[arg(long, value_delimiter = ',')]
    pub mass_scale: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrackKind {
    Step,
    Sine,
}

#[derive(Debug, Subcommand)]
pub enum ControlCommand {
    /// Run the three motor loops with fixed gains.
    Sim(ControlSimArgs),
    /// Search PID gains per reference.
    Tune(ControlTuneArgs),
}

#[derive(Debug, Args)]
pub struct ControlSimArgs {
    #[arg(long = "ref", value_enum, default_value = "step")]
    pub reference: TrackKind,
    /// Gains `kp,ki,kd`.
    #[arg(long, value_delimiter = ',')]
    pub gains: Option<Vec<f64>>,
    /// Motor plant (JSON).
    #[arg(long)]
    pub plant: Option<PathBuf>,
    #[arg(long, value_parser = units::time)]
    pub duration: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ControlTuneArgs {
    /// References to tune for.
    #[arg(long = "ref", value_enum, value_delimiter = ',', default_value = "step,sine")]
    pub reference: Vec<TrackKind>,
    #[arg(long)]
    pub plant: Option<PathBuf>,
    /// Evaluation budget per reference.
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum PostureCommand {
    /// Write a synthetic load-cell stream.
    Synth(PostureSynthArgs),
    /// Summarize a load-cell stream and detect reactions.
    Analyze(PostureAnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct PostureSynthArgs {
    /// Case name (static-1..3, standing, dynamic-plantar|dorsi|inver|ever) or `all`.
    #[arg(long, default_value = "static-1")]
    pub case: String,
    /// Static case length (s by default, or ms).
    #[arg(long, value_parser = units::time)]
    pub duration: Option<f64>,
    /// Disable measurement noise.
    #[arg(long)]
    pub no_noise: bool,
}

#[derive(Debug, Args)]
pub struct PostureAnalyzeArgs {
    /// Load-cell CSV.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Foot layout (JSON).
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// Stimulus times `t1,t2,...` (s by default, or ms).
    #[arg(long, value_parser = units::time, value_delimiter = ',')]
    pub stimuli: Option<Vec<f64>>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
