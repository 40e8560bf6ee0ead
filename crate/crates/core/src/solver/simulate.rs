use serde::Serialize;

use super::RegulatorSolution;
use crate::error::{Error, Result};
use crate::exogen::Generator;
use crate::numerics::{integrate_ode, Matrix, NodeSide, Side, TimeGrid};
use crate::plant::Plant;

/// Open-loop simulation of the plant driven by `u = Δ Λ ω0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimTrace {
    pub times: Vec<f64>,
    pub sides: Vec<NodeSide>,
    pub x: Vec<Vec<f64>>,
    pub u: Vec<f64>,
    pub e: Vec<f64>,
    pub omega: Vec<Vec<f64>>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest `|e|` over all rows, one-sided rows included.
    pub fn max_abs_error(&self) -> f64 {
        self.e.iter().fold(0.0, |m: f64, v| if v.is_nan() { f64::INFINITY } else { m.max(v.abs()) })
    }
}

/// Integrates `x' = Ax + Bu + PΛω0` from `x(t0) = Ψ_x(t0) ω0` with
/// `u(t) = Δ(t) Λ(t) ω0` and records `e = Cx + Du + QΛω0`.
pub fn simulate_error_zeroing(
    plant: &Plant,
    gen: &Generator,
    sol: &RegulatorSolution,
    omega0: &[f64],
    grid: &TimeGrid,
) -> Result<SimTrace> {
    if omega0.len() != plant.nu() || gen.dim() != plant.nu() {
        return Err(Error::Dimension(format!(
            "omega0 has {} entries, plant expects {}",
            omega0.len(),
            plant.nu()
        )));
    }
    let grid = gen.align(grid);
    let w0 = Matrix::from_column_slice(omega0.len(), 1, omega0);
    let u_at = |t: f64, side: Side| -> Result<(f64, Matrix)> {
        let p = sol.eval(t, side)?;
        let w = gen.eval(t, side) * &w0;
        Ok(((&p.delta * &w)[(0, 0)], w))
    };
    let x0 = sol.eval(grid.t0(), Side::Right)?.psi_x * &w0;
    // The right-hand side cannot return errors; remember the first one.
    let failure = std::cell::RefCell::new(None);
    let traj = integrate_ode(
        |t, side, x| match u_at(t, side) {
            Ok((u, w)) => plant.a() * x + plant.b() * u + plant.p() * w,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                Matrix::from_element(x.nrows(), 1, f64::NAN)
            }
        },
        &x0,
        &grid,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let traj = traj?;
    let mut out = SimTrace {
        times: Vec::with_capacity(traj.len()),
        sides: Vec::with_capacity(traj.len()),
        x: Vec::with_capacity(traj.len()),
        u: Vec::with_capacity(traj.len()),
        e: Vec::with_capacity(traj.len()),
        omega: Vec::with_capacity(traj.len()),
    };
    for (t, ns, x) in traj.iter() {
        let (u, w) = u_at(t, ns.side())?;
        let e = (plant.c() * x)[(0, 0)] + plant.d() * u + (plant.q() * &w)[(0, 0)];
        out.times.push(t);
        out.sides.push(ns);
        out.x.push(x.iter().copied().collect());
        out.u.push(u);
        out.e.push(e);
        out.omega.push(w.iter().copied().collect());
    }
    Ok(out)
}
