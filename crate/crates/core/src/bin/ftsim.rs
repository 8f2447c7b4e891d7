use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ftsim::report::{render_report, write_report};
use ftsim::trace::write_trace;
use ftsim::{load_scenario, run_simulation, ReportFormat, ScenarioError};

#[derive(Parser)]
#[command(name = "ftsim", version, about = "Failure-recovery energy simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and print or write the savings report.
    Run {
        scenario: PathBuf,
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Cascade search depth, or `auto` to use the pattern's own depth.
        #[arg(long, value_name = "N|auto")]
        depth: Option<String>,
        /// Reference run: no frequency changes, sleeps or anticipated checkpoints.
        #[arg(long)]
        no_strategies: bool,
        #[arg(long, value_name = "SECONDS")]
        horizon: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Text,
}

enum Failure {
    Invalid(String),
    Io(String),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io(_) => Failure::Io(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

fn parse_depth(v: &str) -> Result<Option<usize>, Failure> {
    if v == "auto" {
        return Ok(None);
    }
    match v.parse::<usize>() {
        Ok(d) if d >= 1 => Ok(Some(d)),
        _ => Err(Failure::Invalid(format!(
            "invalid depth `{v}`: expected a positive integer or auto"
        ))),
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    let Command::Run {
        scenario,
        trace,
        report,
        format,
        depth,
        no_strategies,
        horizon,
    } = cmd;

    let mut s = load_scenario(&scenario).map_err(|e| match e {
        ScenarioError::Io(io) => Failure::Io(format!("{}: {io}", scenario.display())),
        other => other.into(),
    })?;
    if let Some(h) = horizon {
        s = s.with_horizon(h)?;
    }
    if let Some(d) = depth {
        s = s.with_depth(parse_depth(&d)?)?;
    }
    if no_strategies {
        s = s.with_strategies(false);
    }

    let out = run_simulation(&s);
    let format = match format {
        Format::Csv => ReportFormat::Csv,
        Format::Text => ReportFormat::Text,
    };
    if let Some(path) = trace {
        write_trace(&out.trace, &path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    }
    match report {
        Some(path) => {
            write_report(&out.report, &path, format).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?
        }
        None => print!("{}", render_report(&out.report, format)),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("ftsim: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("ftsim: {msg}");
            ExitCode::from(2)
        }
    }
}
