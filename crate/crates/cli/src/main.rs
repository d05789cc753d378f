mod commands;
mod experiment;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use report::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "shadowlab", version, about = "Pseudotrajectories, shadowing checks and the gluing-field constructions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one orbit and write it as CSV.
    Simulate(commands::SimulateArgs),
    /// Generate and check pseudotrajectory files.
    #[command(subcommand)]
    Pseudo(PseudoCommand),
    /// Shadowing searches.
    #[command(subcommand)]
    Shadow(ShadowCommand),
    /// The glued field on S² × S².
    #[command(subcommand)]
    Xstar(XStarCommand),
    /// Return maps of transverse sections.
    #[command(subcommand)]
    Poincare(PoincareCommand),
    /// Run a named experiment.
    Experiment(ExperimentArgs),
}

#[derive(Subcommand, Debug)]
enum PseudoCommand {
    /// Write a pseudotrajectory file.
    Gen(commands::PseudoGenArgs),
    /// Sup of the defect over the verification grid.
    Check(commands::PseudoCheckArgs),
}

#[derive(Subcommand, Debug)]
enum ShadowCommand {
    /// Search for an orbit that shadows a pseudotrajectory file.
    Check(commands::ShadowCheckArgs),
}

#[derive(Subcommand, Debug)]
enum XStarCommand {
    /// Build the glued field and list its rest points.
    Build(commands::XStarBuildArgs),
    /// Spectra, rest point census, dr1/dt sign and seam continuity.
    Verify(ExperimentIo),
}

#[derive(Subcommand, Debug)]
enum PoincareCommand {
    /// Iterate the first-return map of a section and write the hits as CSV.
    Map(commands::PoincareMapArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct ExperimentIo {
    /// JSON config file (an experiment name plus a params object).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parameter override, key=JSON value; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// JSON report path (stdout by default).
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV table of the checks.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Print the resolved config file (defaults filled in) and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ExperimentName {
    #[value(name = "lemma1-rest")]
    Lemma1Rest,
    #[value(name = "lemma1-orbit")]
    Lemma1Orbit,
    CaseB1,
    PsDelta,
    FourBalls,
    ThreeBalls,
    #[value(name = "lemma3-table")]
    Lemma3Table,
    SaddleNoise,
    MatcherOracle,
    AlphaCheck,
    PolarRates,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Experiment name; may instead come from --config.
    name: Option<ExperimentName>,
    #[command(flatten)]
    io: ExperimentIo,
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    m: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    m1: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    #[arg(long)]
    draws: Option<usize>,
    /// Random seed (rng_seed).
    #[arg(long)]
    seed: Option<u64>,
}

fn name_of(n: ExperimentName) -> String {
    n.to_possible_value().expect("no skipped variants").get_name().to_string()
}

fn run_experiment(a: ExperimentArgs) -> CliResult<u8> {
    let mut shortcuts = vec![];
    let mut push = |k: &str, v: Option<serde_json::Value>| {
        if let Some(v) = v {
            shortcuts.push(format!("{k}={v}"));
        }
    };
    push("eps", a.eps.map(Into::into));
    push("m", a.m.map(Into::into));
    push("m1", a.m1.map(Into::into));
    push("n", a.n.map(Into::into));
    push("delta", a.delta.map(Into::into));
    push("draws", a.draws.map(Into::into));
    push("rng_seed", a.seed.map(Into::into));
    let mut io = a.io;
    io.set.splice(0..0, shortcuts);
    commands::experiment(a.name.map(name_of), io)
}

fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("SHADOWLAB_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| CliError::Config(format!("SHADOWLAB_THREADS={v:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Runtime(e.to_string()))
}

fn dispatch(cli: Cli) -> CliResult<u8> {
    init_threads()?;
    match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Pseudo(PseudoCommand::Gen(a)) => commands::pseudo_gen(a),
        Command::Pseudo(PseudoCommand::Check(a)) => commands::pseudo_check(a),
        Command::Shadow(ShadowCommand::Check(a)) => commands::shadow_check(a),
        Command::Xstar(XStarCommand::Build(a)) => commands::xstar_build(a),
        Command::Xstar(XStarCommand::Verify(io)) => commands::experiment(Some("xstar-verify".into()), io),
        Command::Poincare(PoincareCommand::Map(a)) => commands::poincare_map(a),
        Command::Experiment(a) => run_experiment(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(match e {
                CliError::Config(_) => 4,
                CliError::Runtime(_) => 1,
            })
        }
    }
}
