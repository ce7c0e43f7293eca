//! Adaptive Gauss-Kronrod (7, 15) quadrature of vector-valued complex integrands.

use crate::{Error, Result, C64};

const XK: [f64; 8] = [
    0.991_455_371_120_813,
    0.949_107_912_342_759,
    0.864_864_423_359_769,
    0.741_531_185_599_394,
    0.586_087_235_467_691,
    0.405_845_151_377_397,
    0.207_784_955_007_898,
    0.0,
];

const WK: [f64; 8] = [
    0.022_935_322_010_529,
    0.063_092_092_629_979,
    0.104_790_010_322_250,
    0.140_653_259_715_525,
    0.169_004_726_639_267,
    0.190_350_578_064_785,
    0.204_432_940_075_298,
    0.209_482_141_084_728,
];

// Gauss weights at XK[1], XK[3], XK[5], XK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_870,
    0.279_705_391_489_277,
    0.381_830_050_505_119,
    0.417_959_183_673_469,
];

struct Panel {
    a: f64,
    b: f64,
    value: Vec<C64>,
    err: f64,
}

fn panel<F>(f: &mut F, a: f64, b: f64, dim: usize) -> Panel
where
    F: FnMut(f64) -> Vec<C64>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = vec![C64::new(0.0, 0.0); dim];
    let mut g = vec![C64::new(0.0, 0.0); dim];
    for (j, &x) in XK.iter().enumerate() {
        let pts: Vec<f64> = if x == 0.0 { vec![c] } else { vec![c - h * x, c + h * x] };
        for p in pts {
            let v = f(p);
            for i in 0..dim {
                k[i] += v[i] * WK[j];
                if j % 2 == 1 {
                    g[i] += v[i] * WG[j / 2];
                }
            }
        }
    }
    let mut err = 0.0f64;
    for i in 0..dim {
        k[i] *= h;
        g[i] *= h;
        err = err.max((k[i] - g[i]).norm());
    }
    Panel { a, b, value: k, err }
}

/// Integrates `f` over `[a, b]` until the estimated absolute error of every
/// component is below `tol`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, dim: usize, tol: f64) -> Result<Vec<C64>>
where
    F: FnMut(f64) -> Vec<C64>,
{
    if b <= a || dim == 0 {
        return Ok(vec![C64::new(0.0, 0.0); dim]);
    }
    let mut panels = vec![panel(&mut f, a, b, dim)];
    for _ in 0..20_000 {
        let total: f64 = panels.iter().map(|p| p.err).sum();
        if total <= tol {
            break;
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .expect("nonempty");
        let worst = panels.swap_remove(idx);
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::ToleranceNotMet { at: mid });
        }
        panels.push(panel(&mut f, worst.a, mid, dim));
        panels.push(panel(&mut f, mid, worst.b, dim));
    }
    let total: f64 = panels.iter().map(|p| p.err).sum();
    if !(total <= tol) {
        return Err(Error::ToleranceNotMet { at: a });
    }
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut out = vec![C64::new(0.0, 0.0); dim];
    for p in &panels {
        for (o, v) in out.iter_mut().zip(&p.value) {
            *o += v;
        }
    }
    Ok(out)
}
