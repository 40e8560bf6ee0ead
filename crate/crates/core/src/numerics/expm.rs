use super::{ensure_finite, ensure_square, Matrix};
use crate::error::Result;

// Padé scaling-and-squaring (Higham 2005). Thresholds on the 1-norm below
// which the [m/m] approximant is accurate to unit roundoff.
const THETA: [(usize, f64); 5] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
    (13, 5.371920351148152e0),
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn norm1(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `e^{m·dt}` by Padé scaling and squaring.
pub fn expm(m: &Matrix, dt: f64) -> Result<Matrix> {
    let n = ensure_square(m)?;
    ensure_finite(m, "expm argument")?;
    if !dt.is_finite() {
        return Err(crate::Error::NonFinite("expm time step".into()));
    }
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let a = m * dt;
    let nrm = norm1(&a);
    let ident = Matrix::identity(n, n);
    if nrm == 0.0 {
        return Ok(ident);
    }

    for &(order, theta) in &THETA[..4] {
        if nrm <= theta {
            let (u, v) = pade_low(&a, order, &ident);
            return pade_solve(&u, &v);
        }
    }

    let s = ((nrm / THETA[4].1).log2().ceil()).max(0.0) as i32;
    let a = a / 2f64.powi(s);
    let (u, v) = pade13(&a, &ident);
    let mut r = pade_solve(&u, &v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

fn pade_low(a: &Matrix, order: usize, ident: &Matrix) -> (Matrix, Matrix) {
    let b: &[f64] = match order {
        3 => &B3,
        5 => &B5,
        7 => &B7,
        _ => &B9,
    };
    let a2 = a * a;
    let mut powers = vec![ident.clone(), a2.clone()];
    while powers.len() <= order / 2 {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let mut u_inner = Matrix::zeros(a.nrows(), a.ncols());
    let mut v = Matrix::zeros(a.nrows(), a.ncols());
    for (k, p) in powers.iter().enumerate() {
        u_inner += p * b[2 * k + 1];
        v += p * b[2 * k];
    }
    (a * u_inner, v)
}

fn pade13(a: &Matrix, ident: &Matrix) -> (Matrix, Matrix) {
    let b = &B13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_hi = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = a * (u_hi + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + ident * b[1]);
    let v_hi = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = v_hi + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + ident * b[0];
    (u, v)
}

fn pade_solve(u: &Matrix, v: &Matrix) -> Result<Matrix> {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| crate::Error::InvalidArgument("singular Padé denominator".into()))
}
