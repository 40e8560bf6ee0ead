use super::{Matrix, Side};

/// Fornberg weights for the `m`-th derivative at 0 from samples at `x`.
pub fn fornberg_weights(x: &[f64], m: usize) -> Vec<f64> {
    let n = x.len();
    // c[j][k]: weight of x[j] for derivative k.
    let mut c = vec![vec![0.0; m + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0];
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i];
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (x[i] * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = x[i] * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// One-sided estimate of the `m`-th derivative of `f` at `t`, using `m + 3`
/// samples on the requested side within distance `reach`. Returns the
/// estimate and a crude error bound from halving the step.
pub fn one_sided_derivative<F>(f: &F, t: f64, m: usize, side: Side, reach: f64) -> (Matrix, f64)
where
    F: Fn(f64, Side) -> Matrix + ?Sized,
{
    if m == 0 {
        return (f(t, side), 0.0);
    }
    let points = m + 3;
    let scale = t.abs().max(1.0);
    let h_opt = f64::EPSILON.powf(1.0 / points as f64) * scale;
    let h = h_opt.min(reach / (points - 1) as f64);
    let dir = if side == Side::Left { -1.0 } else { 1.0 };
    let estimate = |h: f64| {
        let offsets: Vec<f64> = (0..points).map(|i| dir * h * i as f64).collect();
        let w = fornberg_weights(&offsets, m);
        let mut acc = f(t, side) * w[0];
        for (o, wi) in offsets.iter().zip(&w).skip(1) {
            acc += f(t + o, side) * *wi;
        }
        acc
    };
    let d1 = estimate(h);
    let d2 = estimate(0.5 * h);
    let err = (&d1 - &d2).amax();
    (d2, err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_second_derivative_weights() {
        let w = fornberg_weights(&[-1.0, 0.0, 1.0], 2);
        assert!((w[0] - 1.0).abs() < 1e-14);
        assert!((w[1] + 2.0).abs() < 1e-14);
        assert!((w[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn one_sided_first_derivative_weights() {
        let w = fornberg_weights(&[0.0, 1.0, 2.0], 1);
        assert!((w[0] + 1.5).abs() < 1e-14);
        assert!((w[1] - 2.0).abs() < 1e-14);
        assert!((w[2] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn derivatives_of_exponential() {
        let f = |t: f64, _| Matrix::from_element(1, 1, t.exp());
        for m in 1..=3 {
            for side in [Side::Left, Side::Right] {
                let (d, err) = one_sided_derivative(&f, 0.5, m, side, 1.0);
                let tol = [0.0, 1e-8, 1e-6, 1e-4][m];
                assert!((d[(0, 0)] - 0.5f64.exp()).abs() < tol, "m={m}");
                assert!(err < tol);
            }
        }
    }

    #[test]
    fn respects_reach_on_kinked_function() {
        let f = |t: f64, side: Side| {
            let right = t > 1.0 || (t == 1.0 && side == Side::Right);
            Matrix::from_element(1, 1, if right { 2.0 - t } else { t })
        };
        let (l, _) = one_sided_derivative(&f, 1.0, 1, Side::Left, 0.5);
        let (r, _) = one_sided_derivative(&f, 1.0, 1, Side::Right, 0.5);
        assert!((l[(0, 0)] - 1.0).abs() < 1e-9);
        assert!((r[(0, 0)] + 1.0).abs() < 1e-9);
    }
}
