use serde::Serialize;

use super::Generator;
use crate::error::{Error, Result};
use crate::numerics::{norm2, Matrix, NodeSide, TimeGrid, Trajectory};

/// Numerical verdict on nonsingularity, finite-time boundedness and the
/// uniform bound `h` on `‖Λ(τ) Λ(t)^{-1}‖` for `t ≥ τ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeneratorReport {
    pub horizon: (f64, f64),
    /// Distinct probe samples (one-sided values at breakpoints count twice).
    pub probe_nodes: usize,
    /// Number of `(τ, t)` pairs examined for `h`.
    pub pair_count: usize,
    pub min_abs_det: f64,
    pub max_norm: f64,
    pub nonsingular: bool,
    pub finite_time_bounded: bool,
    /// `h` stays put when the horizon is halved (within a factor 1.5).
    pub ratio_bounded: bool,
    /// Estimated `h` over the full horizon.
    pub h: f64,
    /// Same estimate over the first half of the horizon.
    pub h_half: f64,
    pub passed: bool,
}

/// Probes `gen` on `probe` (restricted to `horizon`). `h` is the maximum of
/// `‖Λ(τ) Λ(t)^{-1}‖` over pairs `τ ≤ t` with `τ` thinned to every
/// `⌈√N⌉`-th sample and `t` ranging over all later samples. A bounded ratio
/// is judged by comparing the estimate on the full horizon with the one on
/// its first half.
pub fn check_generator(
    gen: &Generator,
    horizon: (f64, f64),
    probe: &TimeGrid,
) -> Result<GeneratorReport> {
    let (a, b) = horizon;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidTime(format!("bad horizon [{a}, {b}]")));
    }
    let grid = gen.align(&probe.restricted(a.max(probe.t0()), b.min(probe.t_end()))?);
    let lam = Trajectory::sample(&grid, |t, s| Ok(gen.eval(t, s)))?;
    let inv = Trajectory::sample(&grid, |t, s| Ok(gen.inv(t, s)))?;
    let samples: Vec<(f64, NodeSide, &Matrix, &Matrix)> = lam
        .iter()
        .zip(inv.iter())
        .map(|((t, side, l), (_, _, li))| (t, side, l, li))
        .collect();
    let n = samples.len();
    let nu = gen.dim() as i32;

    let mut min_abs_det = f64::INFINITY;
    let mut max_norm: f64 = 0.0;
    let mut finite = true;
    for (_, _, l, li) in &samples {
        if !(l.iter().all(|v| v.is_finite()) && li.iter().all(|v| v.is_finite())) {
            finite = false;
            continue;
        }
        let nl = norm2(l);
        max_norm = max_norm.max(nl);
        // |det| relative to the scale ‖Λ‖^ν so that the test is unit-free.
        let scale = nl.max(1e-300).powi(nu);
        min_abs_det = min_abs_det.min(l.determinant().abs() / scale);
    }
    let nonsingular = finite && min_abs_det > 1e-12;
    let finite_time_bounded = finite && max_norm.is_finite();

    let stride = (n as f64).sqrt().ceil().max(1.0) as usize;
    let t_half = a + 0.5 * (b - a);
    let mut h: f64 = 0.0;
    let mut h_half: f64 = 0.0;
    let mut pair_count = 0;
    for i in (0..n).step_by(stride) {
        let (tau, _, l_tau, _) = samples[i];
        for &(t, _, _, li) in &samples[i..] {
            let r = norm2(&(l_tau * li));
            let r = if r.is_finite() { r } else { f64::INFINITY };
            h = h.max(r);
            if tau <= t_half && t <= t_half {
                h_half = h_half.max(r);
            }
            pair_count += 1;
        }
    }
    let ratio_bounded = h.is_finite() && h <= 1.5 * h_half.max(1e-300);
    let passed = nonsingular && finite_time_bounded && ratio_bounded && h.is_finite();
    Ok(GeneratorReport {
        horizon,
        probe_nodes: n,
        pair_count,
        min_abs_det,
        max_norm,
        nonsingular,
        finite_time_bounded,
        ratio_bounded,
        h,
        h_half,
        passed,
    })
}

/// A coarse probe grid for `horizon` with at most about `max_nodes` nodes.
pub fn probe_grid(gen: &Generator, horizon: (f64, f64), step: f64, max_nodes: usize) -> Result<TimeGrid> {
    let step = step.max((horizon.1 - horizon.0) / max_nodes.max(1) as f64);
    let grid = TimeGrid::new(horizon.0, horizon.1, step, &[])?;
    Ok(gen.align(&grid))
}
