use super::{Matrix, Side, TimeGrid};
use crate::error::{Error, Result};

/// Marks whether a stored node is a one-sided value at a breakpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeSide {
    /// Left limit at a breakpoint.
    Before,
    Interior,
    /// Right limit at a breakpoint.
    After,
}

impl NodeSide {
    pub fn tag(self) -> &'static str {
        match self {
            NodeSide::Before => "-",
            NodeSide::Interior => "·",
            NodeSide::After => "+",
        }
    }

    pub fn side(self) -> Side {
        match self {
            NodeSide::Before => Side::Left,
            _ => Side::Right,
        }
    }
}

impl serde::Serialize for NodeSide {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.tag())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajSegment {
    pub times: Vec<f64>,
    pub values: Vec<Matrix>,
}

/// Matrix-valued samples organised by inter-breakpoint segment. A breakpoint
/// node appears twice: as the last sample of one segment (left limit) and
/// the first sample of the next (right limit).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Trajectory {
    pub segments: Vec<TrajSegment>,
}

impl Trajectory {
    /// Samples `f` on every grid node, one-sided at breakpoints.
    pub fn sample<F>(grid: &TimeGrid, mut f: F) -> Result<Self>
    where
        F: FnMut(f64, Side) -> Result<Matrix>,
    {
        let mut segments = Vec::with_capacity(grid.segments().len());
        for nodes in grid.segments() {
            let last = nodes.len() - 1;
            let mut values = Vec::with_capacity(nodes.len());
            for (i, &t) in nodes.iter().enumerate() {
                let side = if i == last && last > 0 { Side::Left } else { Side::Right };
                values.push(f(t, side)?);
            }
            segments.push(TrajSegment {
                times: nodes.clone(),
                values,
            });
        }
        Ok(Self { segments })
    }

    /// Iterates over `(t, node side, value)` in time order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, NodeSide, &Matrix)> + '_ {
        let nseg = self.segments.len();
        self.segments.iter().enumerate().flat_map(move |(k, seg)| {
            let last = seg.times.len() - 1;
            seg.times
                .iter()
                .zip(seg.values.iter())
                .enumerate()
                .map(move |(i, (&t, v))| {
                    let ns = if i == 0 && k > 0 {
                        NodeSide::After
                    } else if i == last && k + 1 < nseg {
                        NodeSide::Before
                    } else {
                        NodeSide::Interior
                    };
                    (t, ns, v)
                })
        })
    }

    pub fn len(&self) -> usize {
        self.segments.iter().map(|s| s.times.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn first(&self) -> Option<&Matrix> {
        self.segments.first().and_then(|s| s.values.first())
    }

    pub fn last(&self) -> Option<&Matrix> {
        self.segments.last().and_then(|s| s.values.last())
    }

    pub fn map<F>(&self, mut f: F) -> Trajectory
    where
        F: FnMut(f64, Side, &Matrix) -> Matrix,
    {
        let segments = self
            .segments
            .iter()
            .map(|seg| {
                let last = seg.times.len() - 1;
                let values = seg
                    .times
                    .iter()
                    .zip(&seg.values)
                    .enumerate()
                    .map(|(i, (&t, v))| {
                        let side = if i == last && i > 0 {
                            Side::Left
                        } else {
                            Side::Right
                        };
                        f(t, side, v)
                    })
                    .collect();
                TrajSegment {
                    times: seg.times.clone(),
                    values,
                }
            })
            .collect();
        Trajectory { segments }
    }

    /// Largest value of `norm` over all samples.
    pub fn sup_by<F: Fn(&Matrix) -> f64>(&self, norm: F) -> f64 {
        self.iter().map(|(_, _, v)| norm(v)).fold(0.0, f64::max)
    }

    /// `(t, norm(value))` pairs in time order.
    pub fn norm_series<F: Fn(&Matrix) -> f64>(&self, norm: F) -> (Vec<f64>, Vec<f64>) {
        self.iter().map(|(t, _, v)| (t, norm(v))).unzip()
    }
}

/// Classical fourth-order Runge–Kutta on the grid. Steps never straddle a
/// breakpoint; the right-hand side is queried one-sided from within each
/// step. The state is continuous across breakpoints.
pub fn integrate_ode<F>(rhs: F, x0: &Matrix, grid: &TimeGrid) -> Result<Trajectory>
where
    F: Fn(f64, Side, &Matrix) -> Matrix,
{
    let mut x = x0.clone();
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::BlowUp { time: grid.t0() });
    }
    let mut segments = Vec::with_capacity(grid.segments().len());
    for nodes in grid.segments() {
        let mut values = Vec::with_capacity(nodes.len());
        values.push(x.clone());
        for w in nodes.windows(2) {
            let (t, t1) = (w[0], w[1]);
            let h = t1 - t;
            let tm = t + 0.5 * h;
            let k1 = rhs(t, Side::Right, &x);
            let k2 = rhs(tm, Side::Right, &(&x + &k1 * (0.5 * h)));
            let k3 = rhs(tm, Side::Right, &(&x + &k2 * (0.5 * h)));
            let k4 = rhs(t1, Side::Left, &(&x + &k3 * h));
            x += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::BlowUp { time: t1 });
            }
            values.push(x.clone());
        }
        segments.push(TrajSegment {
            times: nodes.clone(),
            values,
        });
    }
    Ok(Trajectory { segments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::expm;
    use proptest::prelude::*;

    #[test]
    fn zero_rhs_keeps_initial_value() {
        let g = TimeGrid::new(0.0, 1.0, 0.1, &[0.5]).unwrap();
        let x0 = Matrix::identity(2, 2);
        let tr = integrate_ode(|_, _, x| x * 0.0, &x0, &g).unwrap();
        assert!(tr.iter().all(|(_, _, v)| *v == x0));
    }

    #[test]
    fn exponential_decay() {
        let g = TimeGrid::new(0.0, 1.0, 1e-3, &[]).unwrap();
        let tr = integrate_ode(|_, _, x| -x, &Matrix::from_element(1, 1, 1.0), &g).unwrap();
        let end = tr.last().unwrap()[(0, 0)];
        assert!((end - (-1.0f64).exp()).abs() < 1e-9, "{end}");
        assert!((end - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn square_wave_forcing_matches_antiderivative() {
        // sq(t) = +1 on [2m, 2m+1), -1 on [2m+1, 2m+2); antiderivative is a
        // triangle wave: F(t) = tau on rising parts, 2 - tau on falling parts
        // with tau = t mod 2.
        let sq = |t: f64, side: Side| {
            let mut tau = t.rem_euclid(2.0);
            if side == Side::Left && (tau == 0.0 || tau == 1.0) && t > 0.0 {
                tau = if tau == 0.0 { 2.0 } else { 1.0 };
                return if tau > 1.0 { -1.0 } else { 1.0 };
            }
            if tau < 1.0 {
                1.0
            } else {
                -1.0
            }
        };
        let anti = |t: f64| {
            let tau = t.rem_euclid(2.0);
            if tau <= 1.0 {
                tau
            } else {
                2.0 - tau
            }
        };
        let bps: Vec<f64> = (1..7).map(|k| k as f64).collect();
        let g = TimeGrid::new(0.0, 7.0, 1e-2, &bps).unwrap();
        let tr = integrate_ode(
            |t, side, _| Matrix::from_element(1, 1, sq(t, side)),
            &Matrix::zeros(1, 1),
            &g,
        )
        .unwrap();
        for (t, _, v) in tr.iter() {
            assert!((v[(0, 0)] - anti(t)).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn reports_blow_up_time() {
        let g = TimeGrid::new(0.0, 10.0, 0.5, &[]).unwrap();
        let err = integrate_ode(|_, _, x| x.map(|v| v * v * 1e3), &Matrix::from_element(1, 1, 1.0), &g)
            .unwrap_err();
        assert!(matches!(err, Error::BlowUp { time } if time > 0.0));
    }

    #[test]
    fn deterministic_output() {
        let g = TimeGrid::new(0.0, 3.0, 1e-2, &[1.3]).unwrap();
        let m = Matrix::from_row_slice(2, 2, &[0.1, 1.0, -2.0, -0.3]);
        let run = || integrate_ode(|_, _, x| &m * x, &Matrix::identity(2, 2), &g).unwrap();
        assert_eq!(run(), run());
    }

    #[test]
    fn node_side_tags() {
        let g = TimeGrid::new(0.0, 2.0, 0.5, &[1.0]).unwrap();
        let tr = Trajectory::sample(&g, |t, _| Ok(Matrix::from_element(1, 1, t))).unwrap();
        let tags: Vec<_> = tr.iter().map(|(_, s, _)| s.tag()).collect();
        assert_eq!(tags, vec!["·", "·", "-", "+", "·", "·"]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn linear_ode_matches_expm(v in proptest::collection::vec(-2.0f64..2.0, 4)) {
            let m = Matrix::from_row_slice(2, 2, &v);
            prop_assume!(m.clone().svd(false, false).singular_values.max() <= 5.0);
            let g = TimeGrid::new(0.0, 1.0, 1e-3, &[]).unwrap();
            let x0 = Matrix::from_row_slice(2, 1, &[1.0, -0.5]);
            let tr = integrate_ode(|_, _, x| &m * x, &x0, &g).unwrap();
            let exact = expm(&m, 1.0).unwrap() * &x0;
            prop_assert!((tr.last().unwrap() - exact).amax() <= 1e-6);
        }
    }
}
