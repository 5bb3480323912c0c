use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bandcrlb::{
    render_convergence_csv, render_crlb_csv, render_mc_csv, Error, ErrorCategory, Scenario, Unit,
};
use clap::{Args, Parser, Subcommand};

/// Delay-estimation bounds for signals spread over several frequency bands.
#[derive(Parser)]
#[command(name = "bandcrlb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the three bounds over SNR and write one CSV row per point.
    Crlb(RunArgs),
    /// Run the Monte Carlo ML estimators described in the `[mc]` section.
    Mc(RunArgs),
    /// Compare every functional at the configured step and at half of it.
    Convergence(RunArgs),
    /// Parse and check a scenario file without computing anything.
    Validate { config: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    config: PathBuf,
    /// Write CSV here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Override the output unit: seconds or meters.
    #[arg(long)]
    unit: Option<String>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn load(&self) -> Result<Scenario, Error> {
        let mut s = Scenario::load(&self.config)?;
        if let Some(u) = &self.unit {
            s.file.unit = u.parse::<Unit>()?;
        }
        if let Some(seed) = self.seed {
            s.file.seed = seed;
        }
        Ok(s)
    }
}

fn emit(csv: &str, output: Option<&Path>) -> Result<(), Error> {
    match output {
        Some(path) => fs::write(path, csv)
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display()))),
        None => io::stdout()
            .lock()
            .write_all(csv.as_bytes())
            .map_err(|e| Error::Config(format!("cannot write to stdout: {e}"))),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Crlb(args) => {
            let s = args.load()?;
            let csv = render_crlb_csv(&s.crlb_rows()?, s.unit())?;
            emit(&csv, args.output.as_deref())
        }
        Command::Mc(args) => {
            let s = args.load()?;
            let csv = render_mc_csv(&s.mc_rows()?, s.unit())?;
            emit(&csv, args.output.as_deref())
        }
        Command::Convergence(args) => {
            let s = args.load()?;
            let rows = s.convergence()?;
            let unconverged = rows.iter().filter(|(_, _, r)| !r.converged()).count();
            emit(&render_convergence_csv(&rows)?, args.output.as_deref())?;
            if unconverged > 0 {
                eprintln!("warning: {unconverged} signal(s) not converged at this step");
            }
            Ok(())
        }
        Command::Validate { config } => {
            let s = Scenario::load(&config)?;
            eprintln!(
                "{}: ok ({} modulation(s), {} SNR point(s))",
                config.display(),
                s.modulations.len(),
                s.file.snr_db.len()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.category() {
                ErrorCategory::Config => 2,
                ErrorCategory::Numerical => 3,
                ErrorCategory::MonteCarlo => 4,
            })
        }
    }
}
