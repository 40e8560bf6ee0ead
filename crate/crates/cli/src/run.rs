//! Command execution for one or many scenarios.

use std::path::{Path, PathBuf};

use serde::Serialize;

use quasireg_core::solver::{
    simulate_error_zeroing, solvability_pipeline, Overall, PipelineOptions, SolvabilityReport,
};

use crate::output::{solution_csv, solution_json, trace_csv, trace_json, write_atomic};
use crate::scenario::{load_scenario, Scenario};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Report the verdict chain only.
    Check,
    /// Also write solution samples.
    Solve,
    /// Also simulate the plant from `omega0` and write the trace.
    Simulate,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    #[default]
    Csv,
}

/// Command-line overrides of scenario settings.
#[derive(Clone, Debug)]
pub struct Flags {
    /// End of the horizon; the start stays at the scenario's `t0`.
    pub horizon: Option<f64>,
    pub step: Option<f64>,
    pub tol_res: Option<f64>,
    pub slope_tol: Option<f64>,
    pub output: PathBuf,
    pub format: Format,
}

impl Default for Flags {
    fn default() -> Self {
        Self {
            horizon: None,
            step: None,
            tol_res: None,
            slope_tol: None,
            output: PathBuf::from("."),
            format: Format::Csv,
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub name: String,
    pub overall: Overall,
    pub files: Vec<PathBuf>,
    /// Largest `|e|` of the simulated trace, for `simulate`.
    pub max_error: Option<f64>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self.overall {
            Overall::Solvable => 0,
            Overall::Unsolvable(_) => 2,
            Overall::Inconclusive => 3,
        }
    }

    /// One status line for the terminal.
    pub fn summary(&self) -> String {
        let mut s = match self.overall {
            Overall::Solvable => format!("{}: solvable", self.name),
            Overall::Unsolvable(r) => format!("{}: unsolvable ({r})", self.name),
            Overall::Inconclusive => format!("{}: inconclusive", self.name),
        };
        if let Some(e) = self.max_error {
            s.push_str(&format!(", max |e| = {e:.3e}"));
        }
        s
    }
}

#[derive(Serialize)]
struct ReportFile<'a> {
    scenario: &'a str,
    command: Command,
    report: &'a SolvabilityReport,
}

fn file_stem(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "scenario".into()
    } else {
        s
    }
}

fn with_overrides(scenario: &Scenario, flags: &Flags) -> Result<Scenario, CliError> {
    let mut s = scenario.clone();
    if let Some(t) = flags.horizon {
        s.horizon[1] = t;
    }
    if let Some(h) = flags.step {
        s.step = h;
    }
    if flags.tol_res.is_some() || flags.slope_tol.is_some() {
        let mut t = s.tolerances.take().unwrap_or_default();
        t.res = flags.tol_res.or(t.res);
        t.slope = flags.slope_tol.or(t.slope);
        s.tolerances = Some(t);
    }
    s.validate()?;
    Ok(s)
}

/// Runs one command on one scenario and writes its artifacts to
/// `flags.output`.
pub fn run_scenario(cmd: Command, scenario: &Scenario, flags: &Flags) -> Result<Outcome, CliError> {
    let s = with_overrides(scenario, flags)?;
    if cmd == Command::Simulate && s.omega0.is_none() {
        return Err(CliError::Usage(format!("{}: omega0 required for simulate", s.name)));
    }
    let plant = s.plant()?;
    let gen = s.generator()?;
    let grid = s.grid()?;
    let opts = PipelineOptions {
        tolerances: s.tolerances(),
        initial: s.initial_condition()?,
        ..PipelineOptions::default()
    };
    let report = solvability_pipeline(&plant, &gen, &grid, &opts)?;

    let stem = file_stem(&s.name);
    let dir = &flags.output;
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut files = Vec::new();
    let mut emit = |suffix: &str, body: &str| -> Result<(), CliError> {
        let path = dir.join(format!("{stem}.{suffix}"));
        write_atomic(&path, body)?;
        files.push(path);
        Ok(())
    };
    let mut json = serde_json::to_string_pretty(&ReportFile {
        scenario: &s.name,
        command: cmd,
        report: &report,
    })
    .expect("report serialises");
    json.push('\n');
    emit("report.json", &json)?;

    let mut max_error = None;
    if let (Some(sol), true) = (&report.solution, cmd != Command::Check) {
        match flags.format {
            Format::Csv => emit("solution.csv", &solution_csv(sol))?,
            Format::Json => emit("solution.json", &solution_json(sol))?,
        }
        if cmd == Command::Simulate {
            let omega0 = s.omega0.as_deref().expect("checked above");
            let trace = simulate_error_zeroing(&plant, &gen, sol, omega0, &grid)?;
            max_error = Some(trace.max_abs_error());
            match flags.format {
                Format::Csv => emit("trace.csv", &trace_csv(&trace))?,
                Format::Json => emit("trace.json", &trace_json(&trace))?,
            }
        }
    }
    Ok(Outcome {
        name: s.name.clone(),
        overall: report.overall,
        files,
        max_error,
    })
}

/// Loads and runs every file concurrently; results keep the input order.
pub fn run_files(cmd: Command, paths: &[PathBuf], flags: &Flags) -> Vec<Result<Outcome, CliError>> {
    let one = |p: &Path| -> Result<Outcome, CliError> { run_scenario(cmd, &load_scenario(p)?, flags) };
    std::thread::scope(|scope| {
        let handles: Vec<_> = paths.iter().map(|p| scope.spawn(move || one(p))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Usage("scenario worker panicked".into()))))
            .collect()
    })
}

/// 1 if anything failed, else the most severe verdict code
/// (inconclusive 3 over unsolvable 2 over solvable 0).
pub fn exit_code(results: &[Result<Outcome, CliError>]) -> i32 {
    if results.iter().any(Result::is_err) {
        return 1;
    }
    results
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .map(Outcome::exit_code)
        .max()
        .unwrap_or(0)
}
