//! Scenario files: JSON with row-major matrices. See `docs/scenario-schema.md`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use quasireg_core::exogen::{
    affine_carrier_generator, lti_generator, BreakpointPattern, Carrier, LtvGenerator, PiecewisePolynomialGenerator,
    PolySegment,
};
use quasireg_core::numerics::from_rows;
use quasireg_core::solver::{InitialCondition, Tolerances};
use quasireg_core::{Error, Generator, Matrix, Plant, Result, Side, TimeGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub plant: PlantSpec,
    pub generator: GeneratorSpec,
    /// `[t0, t_end]`; `t0` is also the generator's initial time.
    pub horizon: [f64; 2],
    pub step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<Vec<f64>>,
    /// Initial value of the internal solution state, `Π̄_z(t0)` for `D = 0`
    /// or `Π̂(t0)` for `D ≠ 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    #[serde(rename = "D", default)]
    pub d: f64,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Lti {
        #[serde(rename = "S")]
        s: Vec<Vec<f64>>,
    },
    /// `S̃` constant between sample times.
    LtvSampled {
        samples: Vec<SampleSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<f64>,
    },
    Sawtooth {
        period: f64,
        amplitude: f64,
    },
    Triangular {
        period: f64,
        amplitude: f64,
    },
    Square {
        period: f64,
        duty: f64,
        low: f64,
        high: f64,
    },
    Pwm {
        period: f64,
        duties: Vec<f64>,
        low: f64,
        high: f64,
    },
    CustomPiecewise {
        segments: Vec<PolySegmentSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<f64>,
    },
}

pub const GENERATOR_KINDS: &[&str] = &[
    "lti",
    "ltv-sampled",
    "sawtooth",
    "triangular",
    "square",
    "pwm",
    "custom-piecewise",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    /// Offset from `t0` where this sample takes over.
    pub at: f64,
    #[serde(rename = "S")]
    pub s: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolySegmentSpec {
    /// Offset from `t0`.
    pub start: f64,
    /// `coeffs[i][j][k]` multiplies `τ^k` in entry `(i, j)`.
    pub coeffs: Vec<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub res: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Named(InitialName),
    Value(Vec<Vec<f64>>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialName {
    Auto,
    Zero,
    Sylvester,
    Bounded,
}

fn field_err(path: &str, message: impl Into<String>) -> Error {
    Error::Scenario {
        path: path.into(),
        message: message.into(),
    }
}

fn matrix(path: &str, rows: &[Vec<f64>], shape: Option<(usize, usize)>) -> Result<Matrix> {
    let cols = rows.first().map_or(0, Vec::len);
    let m = from_rows(rows, cols).ok_or_else(|| field_err(path, "rows have different lengths"))?;
    if let Some((r, c)) = shape {
        if m.shape() != (r, c) {
            return Err(field_err(
                path,
                format!("expected {r}x{c}, got {}x{}", m.nrows(), m.ncols()),
            ));
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(field_err(path, "entries must be finite"));
    }
    Ok(m)
}

fn vector(path: &str, v: &[f64], len: usize, column: bool) -> Result<Matrix> {
    if v.len() != len {
        return Err(field_err(path, format!("expected {len} entries, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(field_err(path, "entries must be finite"));
    }
    Ok(if column {
        Matrix::from_column_slice(len, 1, v)
    } else {
        Matrix::from_row_slice(1, len, v)
    })
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(field_err(path, format!("must be positive and finite, got {v}")))
    }
}

impl GeneratorSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            GeneratorSpec::Lti { .. } => "lti",
            GeneratorSpec::LtvSampled { .. } => "ltv-sampled",
            GeneratorSpec::Sawtooth { .. } => "sawtooth",
            GeneratorSpec::Triangular { .. } => "triangular",
            GeneratorSpec::Square { .. } => "square",
            GeneratorSpec::Pwm { .. } => "pwm",
            GeneratorSpec::CustomPiecewise { .. } => "custom-piecewise",
        }
    }

    /// Dimension `ν` of the exogenous state.
    pub fn dim(&self) -> usize {
        match self {
            GeneratorSpec::Lti { s } => s.len(),
            GeneratorSpec::LtvSampled { samples, .. } => samples.first().map_or(0, |s| s.s.len()),
            GeneratorSpec::CustomPiecewise { segments, .. } => segments.first().map_or(0, |s| s.coeffs.len()),
            _ => 2,
        }
    }

    fn carrier(&self) -> Option<Carrier> {
        Some(match self.clone() {
            GeneratorSpec::Sawtooth { period, amplitude } => Carrier::Sawtooth { period, amplitude },
            GeneratorSpec::Triangular { period, amplitude } => Carrier::Triangular { period, amplitude },
            GeneratorSpec::Square { period, duty, low, high } => Carrier::Square { period, duty, low, high },
            GeneratorSpec::Pwm { period, duties, low, high } => Carrier::Pwm { period, duties, low, high },
            _ => return None,
        })
    }

    /// `grid` sets the cache range of sampled time-varying generators.
    pub fn build(&self, t0: f64, grid: &TimeGrid) -> Result<Generator> {
        let wrap = |e: Error| field_err("generator", e.to_string());
        if let Some(c) = self.carrier() {
            return affine_carrier_generator(c, t0).map_err(wrap);
        }
        match self {
            GeneratorSpec::Lti { s } => {
                let s = matrix("generator.S", s, None)?;
                if !s.is_square() || s.nrows() == 0 {
                    return Err(field_err("generator.S", "must be square and non-empty"));
                }
                lti_generator(s, t0).map_err(wrap)
            }
            GeneratorSpec::LtvSampled { samples, period } => {
                if samples.is_empty() {
                    return Err(field_err("generator.samples", "at least one sample required"));
                }
                let nu = samples[0].s.len();
                let mut mats = Vec::with_capacity(samples.len());
                for (k, smp) in samples.iter().enumerate() {
                    let path = format!("generator.samples[{k}]");
                    mats.push(matrix(&format!("{path}.S"), &smp.s, Some((nu, nu)))?);
                    let ordered = if k == 0 { smp.at == 0.0 } else { smp.at > samples[k - 1].at };
                    if !smp.at.is_finite() || !ordered {
                        return Err(field_err(
                            &format!("{path}.at"),
                            "sample times must start at 0 and increase",
                        ));
                    }
                }
                let offsets: Vec<f64> = samples.iter().map(|s| s.at).collect();
                if let Some(p) = period {
                    positive("generator.period", *p)?;
                    if *p <= *offsets.last().unwrap() {
                        return Err(field_err("generator.period", "must exceed the last sample time"));
                    }
                }
                let pattern = BreakpointPattern {
                    offsets: offsets[1..].iter().copied().chain(period.map(|_| 0.0)).collect(),
                    period: *period,
                };
                let (offs, per) = (offsets.clone(), *period);
                let sgen = move |t: f64, side: Side| {
                    let mut s = t - t0;
                    if let Some(p) = per {
                        s -= (s / p).floor() * p;
                        if side == Side::Left && s.abs() <= 1e-11 * p.max(1.0) && t > t0 {
                            s = p;
                        }
                    }
                    let tol = 1e-11 * s.abs().max(1.0);
                    let k = match side {
                        Side::Right => offs.partition_point(|o| *o <= s + tol),
                        Side::Left => offs.partition_point(|o| *o < s - tol),
                    };
                    mats[k.saturating_sub(1)].clone()
                };
                let g = LtvGenerator::new(sgen, pattern, grid, true).map_err(wrap)?;
                Ok(Generator::new(g))
            }
            GeneratorSpec::CustomPiecewise { segments, period } => {
                let segs = segments
                    .iter()
                    .map(|s| PolySegment {
                        start: s.start,
                        coeffs: s.coeffs.clone(),
                    })
                    .collect();
                let g = PiecewisePolynomialGenerator::new(t0, segs, *period).map_err(wrap)?;
                Ok(Generator::new(g))
            }
            _ => unreachable!("carrier kinds handled above"),
        }
    }
}

impl Scenario {
    /// Checks dimensions and values, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        self.plant()?;
        let [t0, t1] = self.horizon;
        if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
            return Err(field_err("horizon", "must be a finite interval [t0, t_end] with t0 < t_end"));
        }
        positive("step", self.step)?;
        if let Some(t) = &self.tolerances {
            if let Some(r) = t.res {
                positive("tolerances.res", r)?;
            }
            if let Some(s) = t.slope {
                positive("tolerances.slope", s)?;
            }
        }
        let nu = self.plant.q.len();
        if self.generator.dim() != nu {
            return Err(field_err(
                "generator",
                format!("dimension {} does not match plant.Q length {nu}", self.generator.dim()),
            ));
        }
        if let Some(w) = &self.omega0 {
            vector("omega0", w, nu, true)?;
        }
        if let Some(InitialSpec::Value(rows)) = &self.initial {
            let n = self.plant.a.len();
            let expect = if self.plant.d != 0.0 { n } else { n.saturating_sub(1) };
            matrix("initial", rows, Some((expect, nu))).or_else(|e| {
                // An empty internal state serialises as `[]`.
                if expect == 0 && rows.is_empty() {
                    Ok(Matrix::zeros(0, nu))
                } else {
                    Err(e)
                }
            })?;
        }
        let g = self.grid()?;
        self.generator.build(t0, &g)?;
        Ok(())
    }

    pub fn plant(&self) -> Result<Plant> {
        let s = &self.plant;
        let n = s.a.len();
        if n == 0 {
            return Err(field_err("plant.A", "must be non-empty"));
        }
        let a = matrix("plant.A", &s.a, Some((n, n)))?;
        let b = vector("plant.B", &s.b, n, true)?;
        let c = vector("plant.C", &s.c, n, false)?;
        let nu = s.q.len();
        if nu == 0 {
            return Err(field_err("plant.Q", "must be non-empty"));
        }
        let q = vector("plant.Q", &s.q, nu, false)?;
        let p = matrix("plant.P", &s.p, Some((n, nu)))?;
        if !s.d.is_finite() {
            return Err(field_err("plant.D", "must be finite"));
        }
        Plant::new(a, b, c, s.d, p, q).map_err(|e| field_err("plant", e.to_string()))
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon[0], self.horizon[1], self.step, &[]).map_err(|e| field_err("horizon", e.to_string()))
    }

    pub fn generator(&self) -> Result<Generator> {
        self.generator.build(self.horizon[0], &self.grid()?)
    }

    pub fn tolerances(&self) -> Tolerances {
        let mut tol = Tolerances::default();
        if let Some(t) = &self.tolerances {
            tol.res = t.res.unwrap_or(tol.res);
            tol.slope = t.slope.unwrap_or(tol.slope);
        }
        tol
    }

    pub fn initial_condition(&self) -> Result<InitialCondition> {
        Ok(match &self.initial {
            None | Some(InitialSpec::Named(InitialName::Auto)) => InitialCondition::Auto,
            Some(InitialSpec::Named(InitialName::Zero)) => InitialCondition::Zero,
            Some(InitialSpec::Named(InitialName::Sylvester)) => InitialCondition::Sylvester,
            Some(InitialSpec::Named(InitialName::Bounded)) => InitialCondition::Bounded,
            Some(InitialSpec::Value(rows)) => {
                let nu = self.plant.q.len();
                if rows.is_empty() {
                    InitialCondition::Given(Matrix::zeros(0, nu))
                } else {
                    InitialCondition::Given(matrix("initial", rows, None)?)
                }
            }
        })
    }
}

/// Parses and validates a scenario from JSON text.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let s: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let mut message = inner.to_string();
        if message.contains("unknown variant") && path.starts_with("generator") {
            message = format!("{message}; supported kinds: {}", GENERATOR_KINDS.join(", "));
        }
        field_err(if path == "." { "<root>" } else { &path }, message)
    })?;
    s.validate()?;
    Ok(s)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| field_err(&path.display().to_string(), e.to_string()))?;
    parse_scenario(&text)
}

/// Pretty JSON that [`parse_scenario`] reads back to an equal value.
pub fn write_scenario(s: &Scenario) -> String {
    let mut out = serde_json::to_string_pretty(s).expect("scenario serialises");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "minimal",
        "plant": {"A": [[-1]], "B": [1], "C": [1], "P": [[0]], "Q": [1]},
        "generator": {"kind": "lti", "S": [[0]]},
        "horizon": [0, 1],
        "step": 0.1
    }"#;

    #[test]
    fn minimal_file_loads() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.plant.d, 0.0);
        assert_eq!(s.plant().unwrap().n(), 1);
        assert_eq!(s.generator().unwrap().dim(), 1);
    }

    #[test]
    fn wrong_b_length_names_field() {
        let bad = MINIMAL.replace(r#""B": [1]"#, r#""B": [1, 2]"#);
        match parse_scenario(&bad).unwrap_err() {
            Error::Scenario { path, .. } => assert_eq!(path, "plant.B"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_kind_lists_supported_kinds() {
        let bad = MINIMAL.replace(r#""kind": "lti", "S": [[0]]"#, r#""kind": "chirp""#);
        let msg = parse_scenario(&bad).unwrap_err().to_string();
        for k in GENERATOR_KINDS {
            assert!(msg.contains(k), "{msg}");
        }
    }

    #[test]
    fn unknown_field_is_rejected() {
        let bad = MINIMAL.replace(r#""step": 0.1"#, r#""step": 0.1, "stepp": 2"#);
        assert!(parse_scenario(&bad).is_err());
    }

    #[test]
    fn initial_shape_is_checked() {
        let bad = MINIMAL.replace(r#""step": 0.1"#, r#""step": 0.1, "initial": [[1, 2]]"#);
        match parse_scenario(&bad).unwrap_err() {
            Error::Scenario { path, .. } => assert_eq!(path, "initial"),
            e => panic!("{e}"),
        }
        let ok = MINIMAL.replace(r#""step": 0.1"#, r#""step": 0.1, "initial": "sylvester""#);
        assert_eq!(
            parse_scenario(&ok).unwrap().initial_condition().unwrap(),
            InitialCondition::Sylvester
        );
    }

    #[test]
    fn sampled_generator_switches_at_sample_times() {
        let text = MINIMAL.replace(
            r#"{"kind": "lti", "S": [[0]]}"#,
            r#"{"kind": "ltv-sampled", "samples": [{"at": 0, "S": [[0]]}, {"at": 0.5, "S": [[1]]}], "period": 1}"#,
        );
        let s = parse_scenario(&text).unwrap();
        let g = s.generator().unwrap();
        // ω' = 0 on [0, 0.5), ω' = ω on [0.5, 1).
        assert!((g.eval(0.5, Side::Right)[(0, 0)] - 1.0).abs() < 1e-12);
        // RK4 with the scenario step 0.1.
        assert!((g.eval(1.0, Side::Right)[(0, 0)] - 0.5f64.exp()).abs() < 1e-5);
        assert!(g.breakpoints(0.0, 1.0).contains(&0.5));
    }

    #[test]
    fn round_trip() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(parse_scenario(&write_scenario(&s)).unwrap(), s);
    }
}
