//! Adaptive Dormand-Prince 5(4) integration of linear matrix ODEs
//! `Y' = A(x) Y` with complex coefficients.
//!
//! Monodromy matrices and Evans frames are both columnwise solutions of the
//! same first-order system, so a single matrix-valued integrator serves both.

use crate::error::{Error, Result};
use crate::linalg::CMat;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
// 5th order solution weights
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// embedded 4th order weights
const E1: f64 = 5179.0 / 57600.0;
const E3: f64 = 7571.0 / 16695.0;
const E4: f64 = 393.0 / 640.0;
const E5: f64 = -92097.0 / 339200.0;
const E6: f64 = 187.0 / 2100.0;
const E7: f64 = 1.0 / 40.0;

/// Integrate `Y' = A(x) Y` from `x0` to `x1` (either direction).
///
/// `tol` is used as both absolute and relative local error tolerance on the
/// max-norm of the entries.
pub fn integrate_matrix<F>(field: &F, x0: f64, x1: f64, y0: CMat, tol: f64) -> Result<CMat>
where
    F: Fn(f64) -> CMat,
{
    let span = x1 - x0;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let mut x = x0;
    let mut y = y0;
    let mut h = (span.abs() * 0.05).min(0.1).max(1e-6) * dir;
    let min_h = span.abs() * 1e-14 + 1e-300;
    let mut k1 = field(x) * &y;
    let mut steps = 0usize;
    loop {
        if (x1 - x) * dir <= 0.0 {
            return Ok(y);
        }
        if (x + h - x1) * dir > 0.0 {
            h = x1 - x;
        }
        let y2 = &y + &k1 * cpx(h * A21);
        let k2 = field(x + C[1] * h) * y2;
        let y3 = &y + &k1 * cpx(h * A31) + &k2 * cpx(h * A32);
        let k3 = field(x + C[2] * h) * y3;
        let y4 = &y + &k1 * cpx(h * A41) + &k2 * cpx(h * A42) + &k3 * cpx(h * A43);
        let k4 = field(x + C[3] * h) * y4;
        let y5 = &y
            + &k1 * cpx(h * A51)
            + &k2 * cpx(h * A52)
            + &k3 * cpx(h * A53)
            + &k4 * cpx(h * A54);
        let k5 = field(x + C[4] * h) * y5;
        let y6 = &y
            + &k1 * cpx(h * A61)
            + &k2 * cpx(h * A62)
            + &k3 * cpx(h * A63)
            + &k4 * cpx(h * A64)
            + &k5 * cpx(h * A65);
        let k6 = field(x + C[5] * h) * y6;
        let ynew = &y
            + &k1 * cpx(h * B1)
            + &k3 * cpx(h * B3)
            + &k4 * cpx(h * B4)
            + &k5 * cpx(h * B5)
            + &k6 * cpx(h * B6);
        let k7 = field(x + h) * &ynew;
        let ylow = &y
            + &k1 * cpx(h * E1)
            + &k3 * cpx(h * E3)
            + &k4 * cpx(h * E4)
            + &k5 * cpx(h * E5)
            + &k6 * cpx(h * E6)
            + &k7 * cpx(h * E7);
        // scaled max-norm error
        let mut err: f64 = 0.0;
        let mut ymax: f64 = 0.0;
        for (a, b) in ynew.iter().zip(ylow.iter()) {
            err = err.max((a - b).norm());
            ymax = ymax.max(a.norm());
        }
        let scale = tol * (1.0 + ymax);
        let ratio = err / scale;
        if ratio <= 1.0 {
            x += h;
            y = ynew;
            k1 = k7; // FSAL
            steps += 1;
            if steps > 50_000_000 {
                return Err(Error::IntegrationFailure { x });
            }
        }
        let factor = if ratio > 0.0 {
            (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
        if h.abs() < min_h {
            return Err(Error::IntegrationFailure { x });
        }
    }
}

#[inline]
fn cpx(v: f64) -> num_complex::Complex64 {
    num_complex::Complex64::new(v, 0.0)
}

/// Adaptive Simpson quadrature of a complex scalar function.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64) -> num_complex::Complex64
where
    F: Fn(f64) -> num_complex::Complex64,
{
    fn recurse<F>(
        f: &F,
        a: f64,
        b: f64,
        fa: num_complex::Complex64,
        fm: num_complex::Complex64,
        fb: num_complex::Complex64,
        whole: num_complex::Complex64,
        tol: f64,
        depth: usize,
    ) -> num_complex::Complex64
    where
        F: Fn(f64) -> num_complex::Complex64,
    {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let h = b - a;
        let left = (fa + flm * 4.0 + fm) * (h / 12.0);
        let right = (fm + frm * 4.0 + fb) * (h / 12.0);
        let sum = left + right;
        if depth == 0 || (sum - whole).norm() < 15.0 * tol {
            sum + (sum - whole) / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (fa + fm * 4.0 + fb) * ((b - a) / 6.0);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn constant_system_exponential() {
        // Y' = A Y with A = [[0, 1], [4, 0]]: eigenvalues +-2
        let a = CMat::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(4.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        let field = |_: f64| a.clone();
        let y = integrate_matrix(&field, 0.0, 1.0, CMat::identity(2, 2), 1e-11).unwrap();
        // exp([[0,1],[4,0]]) = [[cosh 2, sinh(2)/2], [2 sinh 2, cosh 2]]
        let c = 2.0f64.cosh();
        let s = 2.0f64.sinh();
        assert!((y[(0, 0)].re - c).abs() < 1e-9);
        assert!((y[(0, 1)].re - s / 2.0).abs() < 1e-9);
        assert!((y[(1, 0)].re - 2.0 * s).abs() < 1e-9);
    }

    #[test]
    fn backward_integration_inverts_forward() {
        let field = |x: f64| {
            CMat::from_row_slice(
                2,
                2,
                &[
                    Complex64::new(0.0, 0.0),
                    Complex64::new(1.0, 0.0),
                    Complex64::new(1.0 + 0.5 * (2.0 * x).sin(), 0.0),
                    Complex64::new(0.0, 0.0),
                ],
            )
        };
        let fwd = integrate_matrix(&field, 0.0, 3.0, CMat::identity(2, 2), 1e-12).unwrap();
        let back = integrate_matrix(&field, 3.0, 0.0, fwd.clone(), 1e-12).unwrap();
        assert!((back - CMat::identity(2, 2)).norm() < 1e-9);
    }

    #[test]
    fn simpson_integrates_oscillatory() {
        let f = |x: f64| Complex64::new((3.0 * x).cos(), 0.0);
        let v = adaptive_simpson(&f, 0.0, 2.0, 1e-12);
        assert!((v.re - (6.0f64).sin() / 3.0).abs() < 1e-10);
    }
}
