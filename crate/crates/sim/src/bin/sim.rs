use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, ValueEnum};
use dipole_core::spectra::Method;
use dipole_sim::{run_command, Command, Format, Grid, Request};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    /// Weak-probe susceptibility over a detuning grid
    Spectrum,
    /// Dressed states of the singly excited manifold
    Dressed,
    /// Time evolution of the scenario's initial state
    Evolve,
    /// Run the scenario's protocol (gate fidelity or Raman transfer)
    Protocol,
    /// Minimal gate fidelity over the scenario's sweep grid
    Sweep,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Fmt {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Analytic,
    Numeric,
}

/// Two dipole-coupled multilevel atoms: spectra, dynamics and gate protocols.
#[derive(Debug, Parser)]
#[command(name = "sim", version)]
struct Cli {
    command: Cmd,
    scenario: PathBuf,
    /// Override a scenario value by dotted path, e.g. coupling.g_value=20
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
    /// Result file (default: <scenario>.<command>.<format> in the working directory)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Fmt,
    /// Grid as lo:hi:n (spectrum detunings or sweep values)
    #[arg(long, value_parser = clap::value_parser!(Grid))]
    grid: Option<Grid>,
    /// Worker threads (default: available parallelism)
    #[arg(long)]
    jobs: Option<usize>,
    /// Spectrum evaluation path
    #[arg(long, value_enum, default_value = "numeric")]
    method: MethodArg,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let _ = e.print();
            eprintln!("\n{}", Cli::command().render_usage());
            return ExitCode::from(2);
        }
    };
    let command = match cli.command {
        Cmd::Spectrum => Command::Spectrum,
        Cmd::Dressed => Command::Dressed,
        Cmd::Evolve => Command::Evolve,
        Cmd::Protocol => Command::Protocol,
        Cmd::Sweep => Command::Sweep,
    };
    let req = Request {
        command,
        scenario_path: cli.scenario,
        overrides: cli.overrides,
        out: cli.out,
        format: match cli.format {
            Fmt::Csv => Format::Csv,
            Fmt::Json => Format::Json,
        },
        grid: cli.grid,
        jobs: cli.jobs,
        method: match cli.method {
            MethodArg::Analytic => Method::Analytic,
            MethodArg::Numeric => Method::Numeric,
        },
    };
    match run_command(&req) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("{w}");
            }
            for p in &outcome.outputs {
                println!("{}", p.display());
            }
            println!("{}", outcome.manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
