use super::{on_grid_tol, ExplicitGenerator};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Side};

/// Scalar non-smooth waveforms, defined on `s = t - t0 >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub enum Carrier {
    /// Ramp from 0 to `amplitude` over each period, then drop.
    Sawtooth { period: f64, amplitude: f64 },
    /// 0 → `amplitude` over the first half period, back to 0 over the second.
    Triangular { period: f64, amplitude: f64 },
    /// `high` for the first `duty` fraction of each period, `low` after.
    Square {
        period: f64,
        duty: f64,
        low: f64,
        high: f64,
    },
    /// Like `Square` but the duty cycle of period `k` is
    /// `duties[k % duties.len()]`.
    Pwm {
        period: f64,
        duties: Vec<f64>,
        low: f64,
        high: f64,
    },
}

/// Splits `s` into period index and phase in `[0, 1]`. At a period boundary
/// the left limit belongs to the previous period with phase 1.
fn locate(s: f64, period: f64, side: Side) -> (i64, f64) {
    let k = (s / period).round();
    if (s - k * period).abs() <= on_grid_tol(s) && (side == Side::Right || k <= 0.0) {
        return (k as i64, 0.0);
    }
    if (s - k * period).abs() <= on_grid_tol(s) {
        return (k as i64 - 1, 1.0);
    }
    let k = (s / period).floor();
    (k as i64, ((s - k * period) / period).clamp(0.0, 1.0))
}

/// Level of a two-level waveform at phase `frac` with switch at `duty`.
fn two_level(frac: f64, duty: f64, side: Side, low: f64, high: f64, period: f64) -> f64 {
    let at_switch = ((frac - duty) * period).abs() <= on_grid_tol(frac * period);
    if at_switch {
        return if side == Side::Left { high } else { low };
    }
    if frac < duty {
        high
    } else {
        low
    }
}

impl Carrier {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("carrier: {m}")));
        let period = match self {
            Carrier::Sawtooth { period, amplitude } | Carrier::Triangular { period, amplitude } => {
                if !amplitude.is_finite() {
                    return bad("amplitude must be finite");
                }
                *period
            }
            Carrier::Square {
                period,
                duty,
                low,
                high,
            } => {
                if !(0.0..=1.0).contains(duty) {
                    return bad("duty must lie in [0, 1]");
                }
                if !(low.is_finite() && high.is_finite()) {
                    return bad("levels must be finite");
                }
                *period
            }
            Carrier::Pwm {
                period,
                duties,
                low,
                high,
            } => {
                if duties.is_empty() || duties.iter().any(|d| !(0.0..=1.0).contains(d)) {
                    return bad("duty sequence must be non-empty with entries in [0, 1]");
                }
                if !(low.is_finite() && high.is_finite()) {
                    return bad("levels must be finite");
                }
                *period
            }
        };
        if !(period.is_finite() && period > 0.0) {
            return bad("period must be positive");
        }
        Ok(())
    }

    fn base_period(&self) -> f64 {
        match self {
            Carrier::Sawtooth { period, .. }
            | Carrier::Triangular { period, .. }
            | Carrier::Square { period, .. }
            | Carrier::Pwm { period, .. } => *period,
        }
    }

    /// Repetition period of the whole waveform.
    pub fn full_period(&self) -> f64 {
        match self {
            Carrier::Pwm { period, duties, .. } => period * duties.len() as f64,
            _ => self.base_period(),
        }
    }

    /// Whether the waveform itself is continuous.
    pub fn is_continuous(&self) -> bool {
        matches!(self, Carrier::Triangular { .. })
    }

    pub fn value(&self, s: f64, side: Side) -> f64 {
        let p = self.base_period();
        let (k, frac) = locate(s, p, side);
        match self {
            Carrier::Sawtooth { amplitude, .. } => amplitude * frac,
            Carrier::Triangular { amplitude, .. } => amplitude * (1.0 - (1.0 - 2.0 * frac).abs()),
            Carrier::Square {
                duty, low, high, ..
            } => two_level(frac, *duty, side, *low, *high, p),
            Carrier::Pwm {
                duties, low, high, ..
            } => {
                let d = duties[k.rem_euclid(duties.len() as i64) as usize];
                two_level(frac, d, side, *low, *high, p)
            }
        }
    }

    /// One-sided time derivative.
    pub fn slope(&self, s: f64, side: Side) -> f64 {
        let p = self.base_period();
        match self {
            Carrier::Sawtooth { amplitude, .. } => amplitude / p,
            Carrier::Triangular { amplitude, .. } => {
                let (_, frac) = locate(s, p, side);
                let at_peak = ((frac - 0.5) * p).abs() <= on_grid_tol(frac * p);
                let rising = if at_peak {
                    side == Side::Left
                } else {
                    frac < 0.5
                };
                if rising {
                    2.0 * amplitude / p
                } else {
                    -2.0 * amplitude / p
                }
            }
            Carrier::Square { .. } | Carrier::Pwm { .. } => 0.0,
        }
    }

    /// Switching/kink instants in `[a, b]` (times relative to the carrier
    /// origin).
    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let p = self.base_period();
        let k0 = (a / p).floor().max(0.0) as i64;
        let k1 = (b / p).ceil() as i64;
        let mut out = Vec::new();
        for k in k0..=k1 {
            let start = k as f64 * p;
            let inner = match self {
                Carrier::Sawtooth { .. } => None,
                Carrier::Triangular { .. } => Some(0.5),
                Carrier::Square { duty, .. } => Some(*duty),
                Carrier::Pwm { duties, .. } => Some(duties[k.rem_euclid(duties.len() as i64) as usize]),
            };
            if k > 0 {
                out.push(start);
            }
            if let Some(f) = inner {
                if f > 0.0 && f < 1.0 {
                    out.push(start + f * p);
                }
            }
        }
        out.retain(|t| *t >= a && *t <= b);
        out.sort_by(|x, y| x.partial_cmp(y).unwrap());
        out.dedup();
        out
    }

    pub fn sup_abs(&self) -> f64 {
        match self {
            Carrier::Sawtooth { amplitude, .. } | Carrier::Triangular { amplitude, .. } => {
                amplitude.abs()
            }
            Carrier::Square { low, high, .. } | Carrier::Pwm { low, high, .. } => {
                low.abs().max(high.abs())
            }
        }
    }
}

/// Unipotent generator `Λ(t) = [[1, φ(t - t0) - φ(0)], [0, 1]]`.
#[derive(Clone, Debug)]
pub struct AffineCarrierGenerator {
    carrier: Carrier,
    t0: f64,
    offset: f64,
}

impl AffineCarrierGenerator {
    pub fn new(carrier: Carrier, t0: f64) -> Result<Self> {
        carrier.validate()?;
        if !t0.is_finite() {
            return Err(Error::InvalidTime("t0 must be finite".into()));
        }
        let offset = carrier.value(0.0, Side::Right);
        // Probe ten full periods for runaway samples.
        let span = 10.0 * carrier.full_period();
        for i in 0..=1000 {
            let s = span * i as f64 / 1000.0;
            let v = carrier.value(s, Side::Right) - offset;
            if !v.is_finite() || v.abs() > 1e12 {
                return Err(Error::UnboundedCarrier {
                    time: t0 + s,
                    value: v,
                });
            }
        }
        Ok(Self {
            carrier,
            t0,
            offset,
        })
    }

    pub fn carrier(&self) -> &Carrier {
        &self.carrier
    }

    /// Normalised carrier `φ(t - t0) - φ(0)`.
    pub fn phi(&self, t: f64, side: Side) -> f64 {
        self.carrier.value(t - self.t0, side) - self.offset
    }
}

impl ExplicitGenerator for AffineCarrierGenerator {
    fn dim(&self) -> usize {
        2
    }

    fn t0(&self) -> f64 {
        self.t0
    }

    fn eval(&self, t: f64, side: Side) -> Matrix {
        Matrix::from_row_slice(2, 2, &[1.0, self.phi(t, side), 0.0, 1.0])
    }

    fn inv(&self, t: f64, side: Side) -> Matrix {
        Matrix::from_row_slice(2, 2, &[1.0, -self.phi(t, side), 0.0, 1.0])
    }

    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        self.carrier
            .breakpoints(a - self.t0, b - self.t0)
            .into_iter()
            .map(|s| s + self.t0)
            .collect()
    }

    fn derivative(&self, t: f64, order: usize, side: Side) -> Option<Matrix> {
        Some(match order {
            0 => self.eval(t, side),
            1 => Matrix::from_row_slice(
                2,
                2,
                &[0.0, self.carrier.slope(t - self.t0, side), 0.0, 0.0],
            ),
            _ => Matrix::zeros(2, 2),
        })
    }

    fn sgen(&self, t: f64, side: Side) -> Option<Matrix> {
        // Jumping carriers have no bounded S̃.
        if !self.carrier.is_continuous() {
            return None;
        }
        self.derivative(t, 1, side)
    }

    fn period(&self) -> Option<f64> {
        Some(self.carrier.full_period())
    }

    fn label(&self) -> String {
        format!("affine-carrier({:?})", self.carrier)
    }
}
