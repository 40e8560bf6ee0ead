use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use quasireg_cli::{exit_code, run_files, Command, Flags, Format};

/// Solvability checks and solution construction for quasi-regulator
/// equations of SISO plants with non-smooth exogenous generators.
#[derive(Parser)]
#[command(name = "quasireg", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the verdict chain and write `<name>.report.json`.
    Check(Args),
    /// As `check`, plus `<name>.solution.{csv,json}` when solvable.
    Solve(Args),
    /// As `solve`, plus the simulated `<name>.trace.{csv,json}`.
    Simulate(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Scenario JSON files; several run concurrently.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Override the end of the horizon.
    #[arg(long)]
    horizon: Option<f64>,
    /// Override the grid step.
    #[arg(long)]
    step: Option<f64>,
    /// Residual tolerance for certification.
    #[arg(long)]
    tol_res: Option<f64>,
    /// Growth-slope tolerance for boundedness.
    #[arg(long)]
    slope_tol: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    output: PathBuf,
    /// Format of solution and trace samples.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (cmd, args) = match cli.cmd {
        Cmd::Check(a) => (Command::Check, a),
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
    };
    let flags = Flags {
        horizon: args.horizon,
        step: args.step,
        tol_res: args.tol_res,
        slope_tol: args.slope_tol,
        output: args.output,
        format: args.format,
    };
    let results = run_files(cmd, &args.files, &flags);
    for (path, r) in args.files.iter().zip(&results) {
        match r {
            Ok(o) => println!("{}", o.summary()),
            Err(e) => eprintln!("{}: error: {e}", path.display()),
        }
    }
    ExitCode::from(exit_code(&results) as u8)
}
