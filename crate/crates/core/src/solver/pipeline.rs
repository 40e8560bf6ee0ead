use std::fmt;

use serde::Serialize;

use super::{solve_with, RegulatorSolution, Tolerances};
use crate::error::{Error, Result};
use crate::exogen::{check_generator, probe_grid, Generator, GeneratorReport};
use crate::numerics::{Matrix, TimeGrid};
use crate::plant::Plant;
use crate::smoothness::{check_relative_degree_necessity, compute_profile, Necessity, SmoothnessProfile};
use crate::solvability::{check_nonresonance_with, NonResonanceOptions, NonResonanceReport, NonResonanceVerdict};

/// Choice of the internal initial value `Π̂(t0)` / `Π̄_z(t0)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum InitialCondition {
    /// Zero when the reduced dynamics are Hurwitz, otherwise the Sylvester
    /// warm start for LTI generators, otherwise the bounded split.
    #[default]
    Auto,
    Zero,
    Sylvester,
    Given(Matrix),
    Bounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOptions {
    pub tolerances: Tolerances,
    pub initial: InitialCondition,
    /// Upper bound on probe nodes for the generator check.
    pub probe_nodes: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            initial: InitialCondition::Auto,
            probe_nodes: 2000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnsolvableReason {
    /// `QΛ` is not locally Lipschitz while `D = 0`.
    QLambdaNotLipschitz,
    /// `r > j* + 1`.
    RelativeDegreeExceedsSmoothness,
    /// No initial value keeps `Ω` bounded.
    Resonant,
}

impl fmt::Display for UnsolvableReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnsolvableReason::QLambdaNotLipschitz => "Q·Λ is not locally Lipschitz and D = 0",
            UnsolvableReason::RelativeDegreeExceedsSmoothness => "relative degree exceeds j* + 1",
            UnsolvableReason::Resonant => "resonant: no bounded Ω trajectory",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "kebab-case")]
pub enum Overall {
    Solvable,
    Unsolvable(UnsolvableReason),
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlantSummary {
    pub n: usize,
    pub nu: usize,
    pub d: f64,
    pub relative_degree: Option<usize>,
    /// `[re, im]` pairs.
    pub zeros: Option<Vec<[f64; 2]>>,
    pub minimum_phase: Option<bool>,
}

impl PlantSummary {
    fn new(plant: &Plant) -> Self {
        let zeros = plant
            .transmission_zeros()
            .ok()
            .map(|z| z.iter().map(|c| [c.re, c.im]).collect());
        Self {
            n: plant.n(),
            nu: plant.nu(),
            d: plant.d(),
            relative_degree: plant.relative_degree().ok(),
            zeros,
            minimum_phase: plant.is_minimum_phase().ok(),
        }
    }
}

/// The full chain of checks with the evidence behind the verdict.
#[derive(Clone, Debug, Serialize)]
pub struct SolvabilityReport {
    pub plant: PlantSummary,
    pub generator: String,
    pub horizon: [f64; 2],
    pub step: f64,
    pub generator_check: GeneratorReport,
    pub profile: Option<SmoothnessProfile>,
    pub rd_necessity: Option<Necessity>,
    pub nonresonance: Option<NonResonanceReport>,
    pub overall: Overall,
    pub explanation: Vec<String>,
    pub solution: Option<RegulatorSolution>,
}

/// Generator check, then for `D = 0` the Lipschitz and relative-degree
/// gates, then the non-resonance test, then construction and
/// certification. Stage failures become verdicts; only invalid inputs are
/// returned as errors.
pub fn solvability_pipeline(
    plant: &Plant,
    gen: &Generator,
    grid: &TimeGrid,
    opts: &PipelineOptions,
) -> Result<SolvabilityReport> {
    if gen.dim() != plant.nu() {
        return Err(Error::Dimension(format!(
            "generator dimension {} does not match plant exogenous dimension {}",
            gen.dim(),
            plant.nu()
        )));
    }
    if (grid.t0() - gen.t0()).abs() > 1e-12 * gen.t0().abs().max(1.0) {
        return Err(Error::InvalidTime(format!(
            "grid starts at {} but the generator starts at {}",
            grid.t0(),
            gen.t0()
        )));
    }
    let grid = gen.align(grid);
    let horizon = (grid.t0(), grid.t_end());
    let probe = probe_grid(gen, horizon, grid.step(), opts.probe_nodes)?;
    let generator_check = check_generator(gen, horizon, &probe)?;
    let mut report = SolvabilityReport {
        plant: PlantSummary::new(plant),
        generator: gen.label(),
        horizon: [horizon.0, horizon.1],
        step: grid.step(),
        generator_check,
        profile: None,
        rd_necessity: None,
        nonresonance: None,
        overall: Overall::Inconclusive,
        explanation: Vec::new(),
        solution: None,
    };
    let why = &mut report.explanation;
    if !report.generator_check.passed {
        why.push("generator check failed: Λ is not invertible, finite-time bounded and ratio-bounded on the probe".into());
        return Ok(report);
    }

    if plant.d() == 0.0 {
        let r = match plant.relative_degree() {
            Ok(r) => r,
            Err(e) => {
                why.push(format!("relative degree: {e}"));
                return Ok(report);
            }
        };
        let profile = match compute_profile(plant, gen, &grid) {
            Ok(p) => p,
            Err(e) => {
                why.push(format!("smoothness profile: {e}"));
                return Ok(report);
            }
        };
        let lipschitz = profile.lipschitz_q_lambda;
        let regular = profile.q_lambda_regular;
        let jstar = profile.jstar;
        let necessity = check_relative_degree_necessity(plant, &profile)?;
        report.profile = Some(profile);
        report.rd_necessity = Some(necessity);
        let why = &mut report.explanation;
        if !lipschitz {
            report.overall = Overall::Unsolvable(UnsolvableReason::QLambdaNotLipschitz);
            why.push("Q·Λ jumps or is not locally Lipschitz; without feedthrough the error cannot be zeroed".into());
            return Ok(report);
        }
        if necessity == Necessity::Fail {
            report.overall = Overall::Unsolvable(UnsolvableReason::RelativeDegreeExceedsSmoothness);
            why.push(format!("relative degree {r} exceeds j* + 1 with j* = {jstar}"));
            return Ok(report);
        }
        if r >= 2 {
            why.push(format!(
                "relative degree {r} passes the necessary test (j* = {jstar}) but only r = 1 has a construction"
            ));
            return Ok(report);
        }
        if !regular {
            why.push("Q·Λ is not piecewise differentiable with a bounded derivative row".into());
            return Ok(report);
        }
    }

    let nr_opts = NonResonanceOptions {
        slope_tol: opts.tolerances.slope,
        h: Some(report.generator_check.h),
    };
    let nonresonance = match check_nonresonance_with(plant, gen, horizon, &grid, &nr_opts) {
        Ok(nr) => nr,
        Err(e) => {
            report.explanation.push(format!("non-resonance test: {e}"));
            return Ok(report);
        }
    };
    let verdict = nonresonance.verdict;
    report.nonresonance = Some(nonresonance);
    match verdict {
        NonResonanceVerdict::Resonant => {
            report.overall = Overall::Unsolvable(UnsolvableReason::Resonant);
            report
                .explanation
                .push("every candidate Ω trajectory grows over the horizon".into());
            return Ok(report);
        }
        NonResonanceVerdict::Inconclusive => {
            report
                .explanation
                .push("non-resonance could not be decided from the candidate Ω trajectories".into());
            return Ok(report);
        }
        NonResonanceVerdict::NonResonant => {}
    }

    let mut attempts = vec![opts.initial.clone()];
    if opts.initial == InitialCondition::Auto {
        attempts.push(InitialCondition::Bounded);
    }
    for init in attempts {
        match solve_with(plant, gen, &grid, &init) {
            Ok(mut sol) => {
                if sol.certify(&opts.tolerances) {
                    report.overall = Overall::Solvable;
                    report.explanation.push(format!(
                        "certified solution: max residual {:.3e}, differential residual {:.3e}, sup Π {:.3e}, sup Δ {:.3e}",
                        sol.max_residual, sol.dynamics_residual, sol.sup_pi, sol.sup_delta
                    ));
                    report.solution = Some(sol);
                    return Ok(report);
                }
                report.explanation.push(format!(
                    "{:?} initial value did not certify: max residual {:.3e}, differential residual {:.3e}, growth slope {:.3e}",
                    sol.initial, sol.max_residual, sol.dynamics_residual, sol.growth_slope
                ));
            }
            Err(e) => report.explanation.push(format!("construction failed: {e}")),
        }
    }
    Ok(report)
}
