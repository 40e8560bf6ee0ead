//! Non-resonance between the zero dynamics of the plant and the exogenous
//! generator: boundedness of
//! `Ω(t) = Φ(t, t0) Ω(t0) + ∫_{t0}^t Φ(t, τ) dτ`,
//! `Φ(t, τ) = (Λ(τ) Λ(t)^{-1})ᵀ ⊗ e^{A_z (t - τ)}`,
//! for some initial value, judged numerically over a finite horizon.

mod growth;
mod omega;

use nalgebra::Complex;
use serde::Serialize;

pub use growth::{classify_growth, Growth, WINDOWS};

use crate::error::{Error, Result};
use crate::exogen::{check_generator, probe_grid, Generator};
use crate::numerics::{condition_number, expm, inverse, kron, norm2, Matrix, TimeGrid, Trajectory};
use crate::plant::{eigenvalues, Plant};
pub(crate) use omega::matrix_sign;
use omega::OmegaPropagator;

/// Growth slopes (per unit time) below this count as bounded.
pub const SLOPE_TOL: f64 = 1e-3;
/// Sups at or above this are treated as unbounded.
pub const HUGE: f64 = 1e12;
/// Margin factor applied to the slowest zero when choosing the decay rate.
pub const BETA_MARGIN: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NonResonanceVerdict {
    NonResonant,
    Resonant,
    Inconclusive,
}

/// One tried initial value `Ω(t0)` and the growth of its trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Candidate {
    pub label: String,
    pub description: String,
    pub omega0_norm: f64,
    pub sup_norm: f64,
    pub growth_slope: f64,
    pub monotone: bool,
    pub bounded: bool,
    /// Fixed-point residual for candidates defined by a fixed-point
    /// equation.
    pub residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinimumPhaseBound {
    pub alpha: f64,
    pub beta: f64,
    pub h: f64,
    /// `α h / β`.
    pub bound: f64,
    /// Measured `sup ‖∫_{t0}^t Φ(t, τ) dτ‖` over the horizon.
    pub measured_sup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonResonanceReport {
    pub verdict: NonResonanceVerdict,
    pub horizon: (f64, f64),
    pub zero_dynamics_dim: usize,
    /// Transmission zeros as `[re, im]`.
    pub zeros: Vec<[f64; 2]>,
    pub candidates: Vec<Candidate>,
    pub minimum_phase_shortcut: bool,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub h: Option<f64>,
    pub bound_alpha_h_over_beta: Option<f64>,
    pub measured_integral_sup: Option<f64>,
    /// Spectral test `σ(A_z) ∩ σ(S) = ∅`, available for LTI generators.
    pub classical: Option<bool>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NonResonanceOptions {
    pub slope_tol: f64,
    /// Ratio bound `h` from a previous generator check; computed when
    /// absent.
    pub h: Option<f64>,
}

impl Default for NonResonanceOptions {
    fn default() -> Self {
        Self {
            slope_tol: SLOPE_TOL,
            h: None,
        }
    }
}

/// `true` iff no transmission zero lies within `1e-8·scale` of an
/// eigenvalue of `S`.
pub fn classical_nonresonance(plant: &Plant, s: &Matrix) -> Result<bool> {
    crate::numerics::ensure_square(s)?;
    if s.nrows() != plant.nu() {
        return Err(Error::Dimension(format!(
            "S must be {0}x{0}, got {1}x{1}",
            plant.nu(),
            s.nrows()
        )));
    }
    let zeros = plant.transmission_zeros()?;
    let eig = eigenvalues(s);
    let scale = zeros
        .iter()
        .chain(&eig)
        .map(|z| z.norm())
        .fold(1.0, f64::max);
    Ok(zeros
        .iter()
        .all(|z| eig.iter().all(|e| (z - e).norm() > 1e-8 * scale)))
}

/// `A_S = I_ν ⊗ A_z - Sᵀ ⊗ I`.
pub fn sylvester_operator(az: &Matrix, s: &Matrix) -> Matrix {
    let m = az.nrows();
    let nu = s.nrows();
    kron(&Matrix::identity(nu, nu), az) - kron(&s.transpose(), &Matrix::identity(m, m))
}

/// `Ω` trajectory from `omega0` on `grid` (aligned to the generator's
/// breakpoints).
pub fn omega_trajectory(az: &Matrix, gen: &Generator, omega0: &Matrix, grid: &TimeGrid) -> Result<Trajectory> {
    crate::numerics::ensure_square(az)?;
    OmegaPropagator::new(az, gen).forward(omega0, &gen.align(grid), None, None)
}

/// `β = 0.9·|max Re z|` and `α = sup_s ‖e^{A_z s}‖ e^{β s}` sampled on
/// `[0, span]`.
fn alpha_beta(az: &Matrix, span: f64) -> Result<(f64, f64)> {
    let slowest = eigenvalues(az)
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if slowest >= 0.0 {
        return Err(Error::NotMinimumPhase);
    }
    let beta = BETA_MARGIN * slowest.abs();
    let samples = 4000;
    let mut alpha: f64 = 1.0;
    for k in 1..=samples {
        let s = span * k as f64 / samples as f64;
        alpha = alpha.max(norm2(&expm(az, s)?) * (beta * s).exp());
    }
    Ok((alpha, beta))
}

fn ratio_bound(gen: &Generator, horizon: (f64, f64), step: f64) -> Result<f64> {
    let probe = probe_grid(gen, horizon, step, 2000)?;
    Ok(check_generator(gen, horizon, &probe)?.h)
}

/// `α h / β` for a minimum-phase plant, with the measured sup of the
/// integral term over the horizon for comparison.
pub fn minimum_phase_bound(
    plant: &Plant,
    gen: &Generator,
    horizon: (f64, f64),
    grid: &TimeGrid,
    h: Option<f64>,
) -> Result<MinimumPhaseBound> {
    if !plant.is_minimum_phase()? {
        return Err(Error::NotMinimumPhase);
    }
    let az = plant.zero_dynamics()?;
    if az.nrows() == 0 {
        return Err(Error::InvalidArgument(
            "plant has no zero dynamics; the bound is vacuous".into(),
        ));
    }
    let g = horizon_grid(gen, horizon, grid)?;
    let (alpha, beta) = alpha_beta(&az, horizon.1 - horizon.0)?;
    let h = match h {
        Some(h) => h,
        None => ratio_bound(gen, horizon, g.step())?,
    };
    let d = az.nrows() * gen.dim();
    let tr = OmegaPropagator::new(&az, gen).forward(&Matrix::zeros(d, d), &g, None, None)?;
    Ok(MinimumPhaseBound {
        alpha,
        beta,
        h,
        bound: alpha * h / beta,
        measured_sup: tr.sup_by(norm2),
    })
}

fn horizon_grid(gen: &Generator, horizon: (f64, f64), grid: &TimeGrid) -> Result<TimeGrid> {
    if (horizon.0 - gen.t0()).abs() > 1e-12 * gen.t0().abs().max(1.0) {
        return Err(Error::InvalidTime(format!(
            "horizon must start at the generator's t0 = {}",
            gen.t0()
        )));
    }
    Ok(gen.align(&TimeGrid::new(horizon.0, horizon.1, grid.step(), &[])?))
}

fn candidate_from(
    label: &str,
    description: String,
    omega0: &Matrix,
    tr: Result<Trajectory>,
    residual: Option<f64>,
    slope_tol: f64,
) -> Candidate {
    let (sup, slope, monotone) = match tr {
        Ok(tr) => {
            let (t, v) = tr.norm_series(norm2);
            let g = classify_growth(&t, &v);
            (g.sup, g.slope, g.monotone)
        }
        Err(_) => (f64::INFINITY, f64::INFINITY, true),
    };
    Candidate {
        label: label.into(),
        description,
        omega0_norm: norm2(omega0),
        sup_norm: sup,
        growth_slope: slope,
        monotone,
        bounded: sup < HUGE && slope < slope_tol,
        residual,
    }
}

/// Largest deviation of the trajectory from `omega0` over the first few
/// steps, relative to `1 + ‖Ω0‖`.
fn constancy_residual(prop: &OmegaPropagator, omega0: &Matrix, g: &TimeGrid) -> Result<f64> {
    let t_short = (g.t0() + 10.0 * g.step()).min(g.t_end());
    let short = g.restricted(g.t0(), t_short)?;
    let tr = prop.forward(omega0, &short, None, None)?;
    let dev = tr
        .iter()
        .map(|(_, _, v)| norm2(&(v - omega0)))
        .fold(0.0, f64::max);
    Ok(dev / (1.0 + norm2(omega0)))
}

fn lti_candidate(az: &Matrix, gen: &Generator, s: &Matrix, g: &TimeGrid, tol: f64) -> Option<Candidate> {
    let a_s = sylvester_operator(az, s);
    let scale = norm2(az).max(norm2(s)).max(1.0);
    let smin = a_s.clone().svd(false, false).singular_values.min();
    if smin <= 1e-8 * scale || condition_number(&a_s) > 1e12 {
        return None;
    }
    let omega0 = -inverse(&a_s)?;
    let prop = OmegaPropagator::new(az, gen);
    let residual = constancy_residual(&prop, &omega0, g).ok()?;
    let description = "-A_S^{-1}, constant trajectory of the LTI fixed point".to_string();
    if residual <= 1e-8 {
        // The trajectory is exactly constant; forward propagation would
        // only amplify rounding along unstable directions.
        let norm = norm2(&omega0);
        return Some(Candidate {
            label: "lti-fixed-point".into(),
            description,
            omega0_norm: norm,
            sup_norm: norm,
            growth_slope: 0.0,
            monotone: true,
            bounded: norm < HUGE,
            residual: Some(residual),
        });
    }
    let tr = prop.forward(&omega0, g, None, None);
    Some(candidate_from("lti-fixed-point", description, &omega0, tr, Some(residual), tol))
}

fn periodic_candidate(az: &Matrix, gen: &Generator, period: f64, g: &TimeGrid, tol: f64) -> Option<Candidate> {
    let (t0, t_end) = (g.t0(), g.t_end());
    if period >= t_end - t0 {
        return None;
    }
    let d = az.nrows() * gen.dim();
    let prop = OmegaPropagator::new(az, gen);
    let one = gen.align(&TimeGrid::new(t0, t0 + period, g.step(), &[]).ok()?);
    let tp = t0 + period;
    // Jump at the period boundary onto the right limit.
    let jump = |m: &Matrix| {
        let x = gen.eval(tp, crate::numerics::Side::Left) * gen.inv(tp, crate::numerics::Side::Right);
        kron(&x.transpose(), &Matrix::identity(az.nrows(), az.nrows())) * m
    };
    let zero = prop.forward(&Matrix::zeros(d, d), &one, None, None).ok()?;
    let integral = jump(zero.last()?);
    let x = gen.eval(t0, crate::numerics::Side::Right) * gen.inv(tp, crate::numerics::Side::Right);
    let phi = kron(&x.transpose(), &expm(az, period).ok()?);
    let lhs = Matrix::identity(d, d) - phi;
    if condition_number(&lhs) > 1e12 {
        return None;
    }
    let omega0 = inverse(&lhs)? * integral;
    let again = prop.forward(&omega0, &one, None, None).ok()?;
    let residual = norm2(&(jump(again.last()?) - &omega0)) / (1.0 + norm2(&omega0));
    let k_max = ((t_end - t0) / period).floor() as usize;
    let resets: Vec<f64> = (1..=k_max).map(|k| t0 + k as f64 * period).collect();
    let g = g.with_breakpoints(&resets);
    let tr = if residual <= 1e-6 {
        prop.forward(&omega0, &g, Some((&resets, &omega0)), None)
    } else {
        prop.forward(&omega0, &g, None, None)
    };
    Some(candidate_from(
        "periodic-fixed-point",
        format!("(I - Φ(t0+T, t0))^{{-1}} ∫ over one period, T = {period}"),
        &omega0,
        tr,
        Some(residual),
        tol,
    ))
}

/// Bounded solution of the split problem: stable directions of `A_z`
/// integrated forward from 0, unstable directions integrated backward from
/// a point beyond the horizon.
fn dichotomy_candidate(az: &Matrix, gen: &Generator, g: &TimeGrid, tol: f64) -> Option<Candidate> {
    let (t0, t_end) = (g.t0(), g.t_end());
    // Directions whose e-folding time is not well inside the horizon cannot
    // be told apart from neutral ones.
    let closest = eigenvalues(az)
        .iter()
        .map(|z| z.re.abs())
        .fold(f64::INFINITY, f64::min);
    if closest < 3.0 / (t_end - t0) {
        return None;
    }
    let sign = matrix_sign(az)?;
    let m = az.nrows();
    let id = Matrix::identity(m, m);
    let ps = (&id - &sign) * 0.5;
    let pu = (&id + &sign) * 0.5;
    let slowest_unstable = eigenvalues(az)
        .iter()
        .filter(|z| z.re > 0.0)
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min);
    if !slowest_unstable.is_finite() {
        return None;
    }
    let pad = (30.0 / slowest_unstable).clamp(1.0, 10.0 * (t_end - t0));
    let mut bps = gen.breakpoints(t0, t_end + pad);
    bps.push(t_end);
    let ext = TimeGrid::new(t0, t_end + pad, g.step(), &bps).ok()?;
    let fwd_grid = ext.restricted(t0, t_end).ok()?;
    let nu = gen.dim();
    let d = m * nu;
    let unstable = OmegaPropagator::new(az, gen)
        .with_projector(pu)
        .backward(&ext);
    let stable = OmegaPropagator::new(az, gen).with_projector(ps.clone()).forward(
        &Matrix::zeros(d, d),
        &fwd_grid,
        None,
        Some(&kron(&Matrix::identity(nu, nu), &ps)),
    );
    let description = "stable part forward from 0, unstable part backward from beyond the horizon".to_string();
    let tr = match (unstable, stable) {
        (Ok(u), Ok(s)) => {
            let segments = s
                .segments
                .iter()
                .zip(&u.segments)
                .map(|(a, b)| crate::numerics::TrajSegment {
                    times: a.times.clone(),
                    values: a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect(),
                })
                .collect();
            Ok(Trajectory { segments })
        }
        (Err(e), _) | (_, Err(e)) => Err(e),
    };
    let omega0 = match &tr {
        Ok(t) => t.first()?.clone(),
        Err(_) => Matrix::zeros(d, d),
    };
    Some(candidate_from("dichotomy", description, &omega0, tr, None, tol))
}

pub fn check_nonresonance(
    plant: &Plant,
    gen: &Generator,
    horizon: (f64, f64),
    grid: &TimeGrid,
) -> Result<NonResonanceReport> {
    check_nonresonance_with(plant, gen, horizon, grid, &NonResonanceOptions::default())
}

pub fn check_nonresonance_with(
    plant: &Plant,
    gen: &Generator,
    horizon: (f64, f64),
    grid: &TimeGrid,
    opts: &NonResonanceOptions,
) -> Result<NonResonanceReport> {
    if gen.dim() != plant.nu() {
        return Err(Error::Dimension(format!(
            "generator dimension {} does not match plant ν = {}",
            gen.dim(),
            plant.nu()
        )));
    }
    let az = plant.zero_dynamics()?;
    let zeros: Vec<Complex<f64>> = plant.transmission_zeros()?;
    let g = horizon_grid(gen, horizon, grid)?;
    let classical = match gen.lti_matrix() {
        Some(s) => Some(classical_nonresonance(plant, s)?),
        None => None,
    };
    let mut report = NonResonanceReport {
        verdict: NonResonanceVerdict::Inconclusive,
        horizon,
        zero_dynamics_dim: az.nrows(),
        zeros: zeros.iter().map(|z| [z.re, z.im]).collect(),
        candidates: Vec::new(),
        minimum_phase_shortcut: false,
        alpha: None,
        beta: None,
        h: None,
        bound_alpha_h_over_beta: None,
        measured_integral_sup: None,
        classical,
        notes: Vec::new(),
    };
    if az.nrows() == 0 {
        report.verdict = NonResonanceVerdict::NonResonant;
        report.minimum_phase_shortcut = true;
        report.notes.push("no zero dynamics: Ω is empty".into());
        return Ok(report);
    }
    let tol = opts.slope_tol;
    let d = az.nrows() * gen.dim();
    let zero0 = Matrix::zeros(d, d);
    let zero_tr = OmegaPropagator::new(&az, gen).forward(&zero0, &g, None, None);
    let zero_cand = candidate_from(
        "zero",
        "Ω(t0) = 0, the integral term alone".into(),
        &zero0,
        zero_tr,
        None,
        tol,
    );
    report.measured_integral_sup = Some(zero_cand.sup_norm);
    report.candidates.push(zero_cand);

    if plant.is_minimum_phase()? {
        let (alpha, beta) = alpha_beta(&az, horizon.1 - horizon.0)?;
        let h = match opts.h {
            Some(h) => h,
            None => ratio_bound(gen, horizon, g.step())?,
        };
        report.minimum_phase_shortcut = true;
        report.alpha = Some(alpha);
        report.beta = Some(beta);
        report.h = Some(h);
        report.bound_alpha_h_over_beta = Some(alpha * h / beta);
        report.verdict = NonResonanceVerdict::NonResonant;
    } else {
        if let Some(s) = gen.lti_matrix() {
            match lti_candidate(&az, gen, s, &g, tol) {
                Some(c) => report.candidates.push(c),
                None => report
                    .notes
                    .push("A_S is singular or ill-conditioned; no LTI fixed point".into()),
            }
        }
        if let Some(p) = gen.period() {
            match periodic_candidate(&az, gen, p, &g, tol) {
                Some(c) => report.candidates.push(c),
                None => report.notes.push(format!(
                    "no periodic fixed point for period {p} (singular one-period map or period beyond horizon)"
                )),
            }
        }
        match dichotomy_candidate(&az, gen, &g, tol) {
            Some(c) => report.candidates.push(c),
            None => report
                .notes
                .push("zero dynamics have eigenvalues on or near the imaginary axis; no dichotomy split".into()),
        }
        report.verdict = if report.candidates.iter().any(|c| c.bounded) {
            NonResonanceVerdict::NonResonant
        } else if report
            .candidates
            .iter()
            .all(|c| c.growth_slope > tol && c.monotone)
        {
            NonResonanceVerdict::Resonant
        } else {
            NonResonanceVerdict::Inconclusive
        };
    }
    if let Some(c) = report.classical {
        let trajectory = report.verdict == NonResonanceVerdict::NonResonant;
        if c != trajectory && report.verdict != NonResonanceVerdict::Inconclusive {
            report.notes.push(format!(
                "spectral test says {} but the trajectory test says {:?}",
                if c { "non-resonant" } else { "resonant" },
                report.verdict
            ));
        }
    }
    Ok(report)
}
