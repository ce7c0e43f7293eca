//! Adaptive Dormand-Prince 5(4) integration of complex systems over a real parameter.

use crate::{Error, Result, C64};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    /// Local error bound, mixed absolute/relative: `|e_i| <= tol (1 + |y_i|)`.
    pub tol: f64,
    /// Initial step as a fraction of the interval length.
    pub initial_fraction: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            initial_fraction: 1e-2,
            max_steps: 2_000_000,
        }
    }
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t1 > t0`.
///
/// `first_derivative`, when given, replaces the evaluation of `rhs` at `t0`.
/// This is how regular singular start points are handled: the limit of the
/// right-hand side exists although its formula cannot be evaluated there.
pub fn integrate<F>(
    mut rhs: F,
    y0: &[C64],
    t0: f64,
    t1: f64,
    opts: &OdeOptions,
    first_derivative: Option<&[C64]>,
) -> Result<Vec<C64>>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    if n == 0 || t1 <= t0 {
        return Ok(y);
    }
    let span = t1 - t0;
    let mut k1 = vec![C64::new(0.0, 0.0); n];
    match first_derivative {
        Some(d) => k1.copy_from_slice(d),
        None => rhs(t0, &y, &mut k1),
    }
    let mut k2 = vec![C64::new(0.0, 0.0); n];
    let mut k3 = k2.clone();
    let mut k4 = k2.clone();
    let mut k5 = k2.clone();
    let mut k6 = k2.clone();
    let mut k7 = k2.clone();
    let mut tmp = k2.clone();
    let mut ynew = k2.clone();

    let mut t = t0;
    let mut h = span * opts.initial_fraction;
    let h_min = span * 1e-15;
    let mut steps = 0usize;
    while t < t1 {
        if steps >= opts.max_steps {
            return Err(Error::ToleranceNotMet { at: t });
        }
        steps += 1;
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        for i in 0..n {
            tmp[i] = y[i] + k1[i] * (h * A21);
        }
        rhs(t + C2 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
        }
        rhs(t + C3 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
        }
        rhs(t + C4 * h, &tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
        }
        rhs(t + C5 * h, &tmp, &mut k5);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
        }
        let t_end = if last { t1 } else { t + h };
        rhs(t_end, &tmp, &mut k6);
        for i in 0..n {
            ynew[i] = y[i] + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * h;
        }
        rhs(t_end, &ynew, &mut k7);

        let mut err = 0.0f64;
        for i in 0..n {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let scale = opts.tol * (1.0 + y[i].norm().max(ynew[i].norm()));
            err = err.max(e.norm() / scale);
        }
        if !err.is_finite() {
            err = 1e10;
        }
        if err <= 1.0 {
            t = t_end;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            if last {
                break;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < h_min {
                return Err(Error::ToleranceNotMet { at: t });
            }
        }
    }
    Ok(y)
}
