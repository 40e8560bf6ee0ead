//! CSV/JSON rendering and atomic file writes.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use quasireg_core::solver::{RegulatorSolution, SimTrace};
use quasireg_core::numerics::NodeSide;

use crate::CliError;

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io(e)
    })
}

fn push_row(out: &mut String, t: f64, side: NodeSide, values: impl IntoIterator<Item = f64>) {
    write!(out, "{t},{}", side.tag()).unwrap();
    for v in values {
        write!(out, ",{v}").unwrap();
    }
    out.push('\n');
}

/// Header `t,side,Pi_1_1..Pi_n_ν,Delta_1..Delta_ν,residual`.
pub fn solution_csv(sol: &RegulatorSolution) -> String {
    let first = sol.pi_x.first().expect("non-empty solution");
    let (n, nu) = first.shape();
    let mut out = String::from("t,side");
    for i in 1..=n {
        for j in 1..=nu {
            write!(out, ",Pi_{i}_{j}").unwrap();
        }
    }
    for j in 1..=nu {
        write!(out, ",Delta_{j}").unwrap();
    }
    out.push_str(",residual\n");
    for (((t, ns, pi), (_, _, delta)), r) in sol.pi_x.iter().zip(sol.delta.iter()).zip(&sol.residual_trace) {
        let pis = (0..n).flat_map(|i| (0..nu).map(move |j| pi[(i, j)]));
        push_row(&mut out, t, ns, pis.chain(delta.iter().copied()).chain([*r]));
    }
    out
}

#[derive(Serialize)]
struct SolutionSamples<'a> {
    t: Vec<f64>,
    side: Vec<NodeSide>,
    /// Row-major `n×ν` per node.
    #[serde(rename = "Pi")]
    pi: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "Delta")]
    delta: Vec<Vec<f64>>,
    residual: &'a [f64],
}

pub fn solution_json(sol: &RegulatorSolution) -> String {
    let samples = SolutionSamples {
        t: sol.pi_x.iter().map(|(t, _, _)| t).collect(),
        side: sol.pi_x.iter().map(|(_, ns, _)| ns).collect(),
        pi: sol.pi_x.iter().map(|(_, _, m)| quasireg_core::numerics::to_rows(m)).collect(),
        delta: sol.delta.iter().map(|(_, _, m)| m.iter().copied().collect()).collect(),
        residual: &sol.residual_trace,
    };
    let mut s = serde_json::to_string_pretty(&samples).expect("samples serialise");
    s.push('\n');
    s
}

/// Header `t,side,e,x_1..x_n,u,omega_1..omega_ν`.
pub fn trace_csv(tr: &SimTrace) -> String {
    let n = tr.x.first().map_or(0, Vec::len);
    let nu = tr.omega.first().map_or(0, Vec::len);
    let mut out = String::from("t,side,e");
    for i in 1..=n {
        write!(out, ",x_{i}").unwrap();
    }
    out.push_str(",u");
    for j in 1..=nu {
        write!(out, ",omega_{j}").unwrap();
    }
    out.push('\n');
    for k in 0..tr.len() {
        let vals = std::iter::once(tr.e[k])
            .chain(tr.x[k].iter().copied())
            .chain([tr.u[k]])
            .chain(tr.omega[k].iter().copied());
        push_row(&mut out, tr.times[k], tr.sides[k], vals);
    }
    out
}

pub fn trace_json(tr: &SimTrace) -> String {
    let mut s = serde_json::to_string_pretty(tr).expect("trace serialises");
    s.push('\n');
    s
}
