//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use quasireg_core::exogen::{affine_carrier_generator, lti_generator, Carrier};
use quasireg_core::numerics::{norm2, repeated_integral, to_rows, Matrix, Side, TimeGrid};
use quasireg_core::smoothness::{compute_profile, Degree};
use quasireg_core::solvability::{
    check_nonresonance, classical_nonresonance, minimum_phase_bound, NonResonanceVerdict,
};
use quasireg_core::solver::{
    dae_residual, simulate_error_zeroing, solvability_pipeline, solve_unitary_rd, sylvester_initial,
    Overall, PipelineOptions, UnsolvableReason,
};
use quasireg_core::{Generator, Plant};

type Outcome = Result<String, String>;

fn m(r: usize, c: usize, v: &[f64]) -> Matrix {
    Matrix::from_row_slice(r, c, v)
}

fn grid(t_end: f64, step: f64) -> TimeGrid {
    TimeGrid::new(0.0, t_end, step, &[]).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// `A = [[0,1],[-2,-3]]`, `B = [0;1]`, `Q = [1,0]`.
fn plant2(c: &[f64], d: f64) -> Plant {
    Plant::new(
        m(2, 2, &[0.0, 1.0, -2.0, -3.0]),
        m(2, 1, &[0.0, 1.0]),
        m(1, 2, c),
        d,
        m(2, 2, &[0.3, -0.2, 0.5, 0.1]),
        m(1, 2, &[1.0, 0.0]),
    )
    .unwrap()
}

fn plant_a() -> Plant {
    plant2(&[1.0, 0.0], 0.0)
}

fn plant_b() -> Plant {
    plant2(&[1.0, 1.0], 0.0)
}

fn triangular() -> Generator {
    affine_carrier_generator(Carrier::Triangular { period: 2.0, amplitude: 1.0 }, 0.0).unwrap()
}

fn square() -> Generator {
    let c = Carrier::Square {
        period: 2.0,
        duty: 0.5,
        low: 0.0,
        high: 1.0,
    };
    affine_carrier_generator(c, 0.0).unwrap()
}

fn random_matrix(rng: &mut StdRng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// Built in the unit-relative-degree normal form with Hurwitz zero
/// dynamics, then moved to random coordinates.
fn random_minimum_phase_plant(rng: &mut StdRng, n: usize, nu: usize) -> Plant {
    let z = n - 1;
    let mut a11 = random_matrix(rng, z, z);
    let abscissa = a11
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|e| e.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = rng.random_range(0.3..1.0);
    a11 -= Matrix::identity(z, z) * (abscissa + margin);
    let mut a = Matrix::zeros(n, n);
    a.view_mut((0, 0), (z, z)).copy_from(&a11);
    a.view_mut((0, z), (z, 1)).copy_from(&random_matrix(rng, z, 1));
    a.view_mut((z, 0), (1, z)).copy_from(&random_matrix(rng, 1, z));
    a[(z, z)] = rng.random_range(-1.0..1.0);
    let mut b = Matrix::zeros(n, 1);
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    b[(z, 0)] = sign * rng.random_range(0.5..2.0);
    let mut c = Matrix::zeros(1, n);
    c[(0, z)] = 1.0;
    let p = random_matrix(rng, n, nu);
    let q = random_matrix(rng, 1, nu);
    let w = Matrix::identity(n, n) + random_matrix(rng, n, n) * 0.3;
    Plant::new(a, b, c, 0.0, p, q).unwrap().transformed(&w).unwrap()
}

fn rotation(w: f64) -> Matrix {
    m(2, 2, &[0.0, w, -w, 0.0])
}

fn sylvester_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x51_17_e5);
    let mut worst_drift: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    for case in 0..20 {
        let n = 2 + case % 4;
        let w = rng.random_range(0.5..2.0);
        let s = match case % 3 {
            0 => rotation(w),
            1 => {
                let mut s = Matrix::zeros(3, 3);
                s.view_mut((0, 0), (2, 2)).copy_from(&rotation(w));
                s
            }
            _ => m(1, 1, &[rng.random_range(-0.2..0.2)]),
        };
        let plant = random_minimum_phase_plant(&mut rng, n, s.nrows());
        ensure(plant.relative_degree() == Ok(1) && plant.is_minimum_phase() == Ok(true), || {
            format!("case {case}: generated plant is not minimum phase with r = 1")
        })?;
        ensure(classical_nonresonance(&plant, &s).unwrap(), || format!("case {case}: spectra overlap"))?;
        let gen = lti_generator(s, 0.0).unwrap();
        let x = sylvester_initial(&plant, &gen).map_err(|e| format!("case {case}: {e}"))?;
        let sol = solve_unitary_rd(&plant, &gen, &grid(10.0, 1e-3), &x).map_err(|e| format!("case {case}: {e}"))?;
        let drift = sol.pi_internal.sup_by(|v| norm2(&(v - &x)));
        let res = dae_residual(&plant, &gen, &sol).into_iter().fold(0.0, f64::max);
        worst_drift = worst_drift.max(drift);
        worst_res = worst_res.max(res);
    }
    ensure(worst_drift <= 1e-6 && worst_res <= 1e-6, || {
        format!("drift {worst_drift:.3e}, residual {worst_res:.3e}")
    })?;
    Ok(format!("20 plants, max drift {worst_drift:.3e}, max residual {worst_res:.3e}"))
}

fn lipschitz_gate() -> Outcome {
    let opts = PipelineOptions::default();
    let r = solvability_pipeline(&plant_b(), &square(), &grid(50.0, 0.01), &opts).map_err(|e| e.to_string())?;
    ensure(r.overall == Overall::Unsolvable(UnsolvableReason::QLambdaNotLipschitz), || {
        format!("D = 0 verdict {:?}", r.overall)
    })?;
    let plant = plant2(&[1.0, 1.0], 1.0);
    let g = grid(50.0, 0.01);
    let r = solvability_pipeline(&plant, &square(), &g, &opts).map_err(|e| e.to_string())?;
    ensure(r.overall == Overall::Solvable, || format!("D = 1 verdict {:?}: {:?}", r.overall, r.explanation))?;
    let sol = r.solution.as_ref().unwrap();
    let tr = simulate_error_zeroing(&plant, &square(), sol, &[0.0, 1.0], &g).map_err(|e| e.to_string())?;
    let e = tr.max_abs_error();
    ensure(sol.max_residual <= 1e-6 && e <= 1e-5, || {
        format!("residual {:.3e}, |e| {e:.3e}", sol.max_residual)
    })?;
    Ok(format!("D = 0 unsolvable; D = 1 residual {:.3e}, max |e| {e:.3e}", sol.max_residual))
}

fn relative_degree_gate() -> Outcome {
    let opts = PipelineOptions::default();
    let g = grid(50.0, 0.01);
    let r = solvability_pipeline(&plant_a(), &triangular(), &g, &opts).map_err(|e| e.to_string())?;
    let jstar = r.profile.as_ref().map(|p| p.jstar);
    ensure(jstar == Some(Degree::Finite(0)), || format!("plant A j* = {jstar:?}"))?;
    ensure(
        r.overall == Overall::Unsolvable(UnsolvableReason::RelativeDegreeExceedsSmoothness),
        || format!("plant A verdict {:?}", r.overall),
    )?;
    let r = solvability_pipeline(&plant_b(), &triangular(), &g, &opts).map_err(|e| e.to_string())?;
    ensure(r.overall == Overall::Solvable, || format!("plant B verdict {:?}", r.overall))?;
    let sol = r.solution.as_ref().unwrap();
    let tr = simulate_error_zeroing(&plant_b(), &triangular(), sol, &[0.0, 1.0], &g).map_err(|e| e.to_string())?;
    let e = tr.max_abs_error();
    ensure(e <= 1e-5, || format!("plant B |e| {e:.3e}"))?;
    Ok(format!("plant A unsolvable (j* = 0, r = 2); plant B max |e| {e:.3e}"))
}

fn degree_structure() -> Outcome {
    let g = grid(10.0, 0.01);
    let mut seen = Vec::new();
    for (label, plant) in [("A", plant_a()), ("B", plant_b())] {
        let p = compute_profile(&plant, &triangular(), &g).map_err(|e| e.to_string())?;
        let js = p.jstar.exact().ok_or_else(|| format!("plant {label}: j* only bounded below"))?;
        for (j, c) in p.degrees.iter().enumerate() {
            let j = j as i64;
            if j <= js {
                ensure(c.is_at_least(j), || format!("plant {label}: c_{j} = {c} < {j}"))?;
            } else {
                ensure(*c == p.jstar, || format!("plant {label}: c_{j} = {c} != j* = {}", p.jstar))?;
            }
        }
        seen.push(format!("{label}: {:?}", p.degrees.iter().map(|d| d.to_string()).collect::<Vec<_>>()));
    }
    let rot = lti_generator(rotation(1.0), 0.0).unwrap();
    for (label, plant) in [("A", plant_a()), ("B", plant_b())] {
        let p = compute_profile(&plant, &rot, &g).map_err(|e| e.to_string())?;
        ensure(p.jstar.is_at_least(plant.n() as i64), || {
            format!("plant {label}, LTI generator: j* = {}", p.jstar)
        })?;
    }
    Ok(format!("triangular degrees {}; LTI j* >= n", seen.join(", ")))
}

fn minimum_phase_bound_holds() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0xb0_07d);
    let gens = [
        ("triangular", triangular()),
        ("square", square()),
        (
            "sawtooth",
            affine_carrier_generator(Carrier::Sawtooth { period: 1.5, amplitude: 2.0 }, 0.0).unwrap(),
        ),
        (
            "pwm",
            affine_carrier_generator(
                Carrier::Pwm {
                    period: 1.0,
                    duties: vec![0.2, 0.7, 0.5],
                    low: -1.0,
                    high: 1.0,
                },
                0.0,
            )
            .unwrap(),
        ),
        ("rotation", lti_generator(rotation(1.3), 0.0).unwrap()),
    ];
    let mut worst: f64 = 0.0;
    for case in 0..10 {
        let (label, gen) = &gens[case % gens.len()];
        let n = 2 + case % 3;
        let plant = random_minimum_phase_plant(&mut rng, n, 2);
        let b = minimum_phase_bound(&plant, gen, (0.0, 100.0), &grid(100.0, 0.01), None)
            .map_err(|e| format!("case {case} ({label}): {e}"))?;
        let ratio = b.measured_sup / b.bound;
        ensure(b.measured_sup <= 1.05 * b.bound, || {
            format!("case {case} ({label}): sup {:.4e} > 1.05 x bound {:.4e}", b.measured_sup, b.bound)
        })?;
        worst = worst.max(ratio);
    }
    Ok(format!("10 plants, worst measured/bound {worst:.3}"))
}

fn resonance_detected() -> Outcome {
    let plant = Plant::new(
        m(2, 2, &[0.0, 1.0, -2.0, -3.0]),
        m(2, 1, &[0.0, 1.0]),
        m(1, 2, &[0.0, 1.0]),
        0.0,
        m(2, 1, &[0.5, 0.5]),
        m(1, 1, &[1.0]),
    )
    .unwrap();
    let s = Matrix::zeros(1, 1);
    let gen = lti_generator(s.clone(), 0.0).unwrap();
    let r = check_nonresonance(&plant, &gen, (0.0, 30.0), &grid(30.0, 0.01)).map_err(|e| e.to_string())?;
    ensure(r.verdict == NonResonanceVerdict::Resonant, || format!("verdict {:?}", r.verdict))?;
    let min_slope = r.candidates.iter().map(|c| c.growth_slope).fold(f64::INFINITY, f64::min);
    ensure(min_slope > 1e-3, || format!("a candidate grows with slope {min_slope:.3e}"))?;
    ensure(!classical_nonresonance(&plant, &s).unwrap(), || "spectral test says non-resonant".into())?;
    Ok(format!("{} candidates, smallest growth slope {min_slope:.3e}", r.candidates.len()))
}

/// `k`-fold cumulative trapezoid on a uniform grid, one-sided samples at
/// breakpoints, Richardson-extrapolated over `h` and `h/2`.
fn nested_quadrature<F: Fn(f64, Side) -> f64>(f: &F, k: usize, t_end: f64, h: f64) -> impl Fn(f64) -> f64 {
    let level = |h: f64| {
        let n = (t_end / h).round() as usize;
        let mut vals: Vec<(f64, f64)> = (0..=n)
            .map(|i| {
                let t = i as f64 * h;
                (f(t, Side::Left), f(t, Side::Right))
            })
            .collect();
        for _ in 0..k {
            let mut acc = 0.0;
            let mut next = Vec::with_capacity(n + 1);
            next.push((0.0, 0.0));
            for i in 0..n {
                acc += 0.5 * h * (vals[i].1 + vals[i + 1].0);
                next.push((acc, acc));
            }
            vals = next;
        }
        vals.into_iter().map(|v| v.0).collect::<Vec<f64>>()
    };
    let coarse = level(h);
    let fine = level(h / 2.0);
    move |t: f64| {
        let i = (t / h).round() as usize;
        (4.0 * fine[2 * i] - coarse[i]) / 3.0
    }
}

fn repeated_integral_identity() -> Outcome {
    let t_end = 10.0;
    let saw = Carrier::Sawtooth { period: 1.3, amplitude: 1.0 };
    let tri = Carrier::Triangular { period: 1.7, amplitude: 2.0 };
    let saw_bps = saw.breakpoints(0.0, t_end);
    let tri_bps = tri.breakpoints(0.0, t_end);
    let cases: Vec<(&str, Box<dyn Fn(f64, Side) -> f64>, Vec<f64>)> = vec![
        ("sawtooth", Box::new(move |t, s| saw.value(t, s)), saw_bps),
        ("triangular", Box::new(move |t, s| tri.value(t, s)), tri_bps),
        ("analytic", Box::new(|t, _| (2.0 * t).sin() * (-t / 5.0).exp()), Vec::new()),
    ];
    let mut rng = StdRng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let h = 1e-3;
    for (label, f, bps) in &cases {
        // The oracle's grid must contain every breakpoint; snap them.
        let snapped: Vec<f64> = bps.iter().map(|b| (b / h).round() * h).collect();
        let fs = |t: f64, side: Side| {
            let near = snapped.iter().position(|s| (s - t).abs() < 1e-9);
            match near {
                Some(i) => f(bps[i], side),
                None => f(t, side),
            }
        };
        let g = TimeGrid::new(0.0, t_end, 0.01, &snapped).unwrap();
        let probes: Vec<f64> = (0..50).map(|_| rng.random_range(1..=1000) as f64 * 0.01).collect();
        for k in 1..=4 {
            let oracle = nested_quadrature(&fs, k, t_end, h);
            let kernel = |t: f64, side: Side| Matrix::from_element(1, 1, fs(t, side));
            for &t in &probes {
                let v = repeated_integral(&kernel, k, 0.0, t, &g).map_err(|e| e.to_string())?[(0, 0)];
                let err = (v - oracle(t)).abs();
                ensure(err <= 1e-7, || format!("{label}, k = {k}, t = {t}: error {err:.3e}"))?;
                worst = worst.max(err);
            }
        }
    }
    Ok(format!("3 integrands x k = 1..4 x 50 times, max error {worst:.3e}"))
}

fn nonuniqueness() -> Outcome {
    let g = grid(50.0, 0.01);
    let a = solve_unitary_rd(&plant_b(), &triangular(), &g, &Matrix::zeros(1, 2)).map_err(|e| e.to_string())?;
    let b = solve_unitary_rd(&plant_b(), &triangular(), &g, &m(1, 2, &[1.0, -1.0])).map_err(|e| e.to_string())?;
    ensure(a.certified && b.certified, || "a solution failed to certify".into())?;
    let gap = norm2(&(a.initial_value() - b.initial_value()));
    ensure(gap > 0.0, || "initial values coincide".into())?;
    for sol in [&a, &b] {
        let tr = simulate_error_zeroing(&plant_b(), &triangular(), sol, &[0.5, 1.0], &g).map_err(|e| e.to_string())?;
        ensure(tr.max_abs_error() <= 1e-5, || format!("|e| {:.3e}", tr.max_abs_error()))?;
    }
    Ok(format!(
        "both certified, Π̄_z(t0) gap {gap:.3}, residuals {:.1e} / {:.1e}",
        a.max_residual, b.max_residual
    ))
}

/// Serialized reports and samples of the pipeline scenarios.
fn pipeline_artifacts() -> Result<String, String> {
    let opts = PipelineOptions::default();
    let g = grid(50.0, 0.01);
    let mut out = String::new();
    let runs = [
        (plant_b(), square()),
        (plant2(&[1.0, 1.0], 1.0), square()),
        (plant_a(), triangular()),
        (plant_b(), triangular()),
    ];
    for (plant, gen) in runs {
        let r = solvability_pipeline(&plant, &gen, &g, &opts).map_err(|e| e.to_string())?;
        out.push_str(&serde_json::to_string(&r).map_err(|e| e.to_string())?);
        if let Some(sol) = &r.solution {
            let pis: Vec<_> = sol.pi_x.iter().map(|(t, _, v)| (t, to_rows(v))).collect();
            let deltas: Vec<_> = sol.delta.iter().map(|(_, _, v)| to_rows(v)).collect();
            out.push_str(&serde_json::to_string(&(pis, deltas)).map_err(|e| e.to_string())?);
            let tr = simulate_error_zeroing(&plant, &gen, sol, &[0.0, 1.0], &g).map_err(|e| e.to_string())?;
            out.push_str(&serde_json::to_string(&tr).map_err(|e| e.to_string())?);
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let start = Instant::now();
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("sylvester oracle equivalence", sylvester_oracle),
        ("lipschitz gate", lipschitz_gate),
        ("relative degree gate", relative_degree_gate),
        ("degree sequence structure", degree_structure),
        ("minimum phase integral bound", minimum_phase_bound_holds),
        ("resonance detection", resonance_detected),
        ("repeated integral identity", repeated_integral_identity),
        ("nonuniqueness witness", nonuniqueness),
    ];
    let mut failed = 0;
    let mut report = |i: usize, name: &str, outcome: Outcome| match outcome {
        Ok(detail) => println!("criterion {i} [{name}]: PASS ({detail})"),
        Err(why) => {
            failed += 1;
            println!("criterion {i} [{name}]: FAIL ({why})");
        }
    };
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = run().map(|d| format!("{d}; {:.1} s", t.elapsed().as_secs_f64()));
        report(i + 1, name, outcome);
    }
    let determinism = (|| {
        let first = pipeline_artifacts()?;
        let second = pipeline_artifacts()?;
        ensure(first == second, || "pipeline artifacts differ between runs".into())?;
        let total = start.elapsed().as_secs_f64();
        ensure(total < 120.0, || format!("suite took {total:.1} s"))?;
        Ok(format!("{} identical bytes over two runs; suite {total:.1} s", first.len()))
    })();
    report(9, "determinism and runtime", determinism);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
