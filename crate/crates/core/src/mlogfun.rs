//! The multilogarithm families `M_n`, `L_n`, `Q_n` and the chain sum `Q̃_n`.
//!
//! All evaluators take the tuple `(z_1, …, z_n)` and work with the partial
//! sums `s_i = z_1 + ⋯ + z_i`. Outside `(ℂ*)ⁿ` (some `z_i = 0`) they return 0.

use std::f64::consts::PI;

use crate::complexpath::{
    build_detour_segment_with, build_multiplier_contour, iterated_integral, on_open_segment, segment_distance,
    DetourShape, IteratedIntegralSpec, Orientation, ANGLE_TOL, SNAP,
};
use crate::{Error, Result, C64, TWO_PI_I};

/// Relative distance below which a pole is "almost but not quite" on a path.
pub const GUARD: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct ZTuple {
    z: Vec<C64>,
    s: Vec<C64>,
}

impl ZTuple {
    pub fn new(z: Vec<C64>) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::Invalid("empty tuple".into()));
        }
        if z.iter().any(|w| *w == C64::new(0.0, 0.0)) {
            return Err(Error::Invalid("tuple entries must be nonzero".into()));
        }
        let s = partial_sums(&z);
        Ok(Self { z, s })
    }

    pub fn entries(&self) -> &[C64] {
        &self.z
    }

    pub fn partial_sums(&self) -> &[C64] {
        &self.s
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Some `s_i` with `0 < i < n` equals `0` or `s_n`.
    pub fn interior_collision(&self) -> bool {
        let n = self.s.len();
        let sn = self.s[n - 1];
        let snap = SNAP * scale_of(&self.s);
        self.s[..n - 1]
            .iter()
            .any(|&s| s.norm() <= snap || (s - sn).norm() <= snap)
    }

    /// Some consecutive pair has `z_i / z_{i+1} ∈ ℝ_{>0}`.
    pub fn ray_aligned(&self) -> bool {
        self.z.windows(2).any(|w| {
            let q = w[0] / w[1];
            q.re > 0.0 && q.im.abs() <= ANGLE_TOL * q.norm()
        })
    }
}

pub fn partial_sums(z: &[C64]) -> Vec<C64> {
    let mut acc = C64::new(0.0, 0.0);
    z.iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

fn scale_of(s: &[C64]) -> f64 {
    s.iter().map(|w| w.norm()).fold(1.0, f64::max)
}

fn off_domain(z: &[C64]) -> bool {
    z.iter().any(|w| *w == C64::new(0.0, 0.0))
}

/// Partial sums with interior values within `SNAP` of `0` or `s_n` moved onto them.
fn snapped_sums(z: &[C64]) -> Vec<C64> {
    let mut s = partial_sums(z);
    let n = s.len();
    let sn = s[n - 1];
    let snap = SNAP * scale_of(&s);
    for v in &mut s[..n - 1] {
        if v.norm() <= snap {
            *v = C64::new(0.0, 0.0);
        } else if (*v - sn).norm() <= snap {
            *v = sn;
        }
    }
    s
}

/// Options for the path-based evaluators.
#[derive(Debug, Clone, Copy)]
pub struct PathOptions {
    pub tol: f64,
    /// Detour radius; defaults to `0.05 ×` the smallest gap between relevant points.
    pub radius: Option<f64>,
    pub shape: DetourShape,
    /// Big-circle radius for `Q_n` as a multiple of `max |s_i|`.
    pub big_factor: f64,
}

impl PathOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            radius: None,
            shape: DetourShape::HalfCircle,
            big_factor: 4.0,
        }
    }
}

/// `M_n(z)`: `2πi ∫ dt/(t-s_1) ∘ ⋯ ∘ dt/(t-s_{n-1})` along `(0, s_n)` with clockwise arcs.
pub fn eval_m(z: &[C64], tol: f64) -> Result<C64> {
    eval_m_with(z, &PathOptions::new(tol))
}

pub fn eval_m_with(z: &[C64], opts: &PathOptions) -> Result<C64> {
    let n = z.len();
    if n == 0 {
        return Err(Error::Invalid("empty tuple".into()));
    }
    if off_domain(z) {
        return Ok(C64::new(0.0, 0.0));
    }
    if n == 1 {
        return Ok(TWO_PI_I);
    }
    let s = snapped_sums(z);
    let sn = s[n - 1];
    let scale = scale_of(&s);
    if sn.norm() <= SNAP * scale {
        return Ok(C64::new(0.0, 0.0));
    }
    let zero = C64::new(0.0, 0.0);
    let poles = &s[..n - 1];
    let mut marks = vec![zero, sn];
    let mut off_gap = f64::INFINITY;
    for &p in poles {
        if p == zero || p == sn {
            continue;
        }
        if on_open_segment(zero, sn, p).is_some() {
            marks.push(p);
        } else {
            let d = segment_distance(zero, sn, p);
            if d < GUARD * scale {
                return Err(Error::NonGeneric(format!(
                    "partial sum {p} lies within {d:e} of the segment [0, {sn}]"
                )));
            }
            off_gap = off_gap.min(d);
        }
    }
    let radius = opts.radius.unwrap_or_else(|| 0.05 * min_gap(&marks).min(off_gap));
    let detours: Vec<(C64, Orientation)> = poles.iter().map(|&p| (p, Orientation::Clockwise)).collect();
    let path = build_detour_segment_with(zero, sn, &detours, radius, opts.shape)?;
    let v = iterated_integral(&path, &IteratedIntegralSpec::nostar(poles.to_vec()), opts.tol)?;
    Ok(TWO_PI_I * v)
}

fn min_gap(points: &[C64]) -> f64 {
    let mut gap = f64::INFINITY;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = (a - b).norm();
            if d > 0.0 {
                gap = gap.min(d);
            }
        }
    }
    gap
}

/// Enumerates chains `0 = i_0 < ⋯ < i_k = n`, calling `visit` with the cut list
/// `[i_0, …, i_k]`, where `admissible(a, b)` decides whether block `(a, b]` may
/// follow block `(prev_a, a]` (given as `prev`).
fn for_each_chain<F, V>(n: usize, admissible: &F, visit: &mut V) -> Result<()>
where
    F: Fn(Option<(usize, usize)>, usize, usize) -> Result<bool>,
    V: FnMut(&[usize]) -> Result<()>,
{
    fn rec<F, V>(n: usize, cuts: &mut Vec<usize>, admissible: &F, visit: &mut V) -> Result<()>
    where
        F: Fn(Option<(usize, usize)>, usize, usize) -> Result<bool>,
        V: FnMut(&[usize]) -> Result<()>,
    {
        let a = *cuts.last().expect("nonempty");
        if a == n {
            return visit(cuts);
        }
        let prev = if cuts.len() >= 2 {
            Some((cuts[cuts.len() - 2], a))
        } else {
            None
        };
        for b in a + 1..=n {
            if admissible(prev, a, b)? {
                cuts.push(b);
                rec(n, cuts, admissible, visit)?;
                cuts.pop();
            }
        }
        Ok(())
    }
    let mut cuts = vec![0];
    rec(n, &mut cuts, admissible, visit)
}

/// `L_n(z)`: chain sum of `(1/k)·∏ M` over chains of `k` blocks whose sums
/// lie on `ℝ_{>0}·s_n`.
///
/// The weight is `1/k`, not `(-1)^{k-1}/k`: the path-reversal rule for
/// iterated integrals carries a sign `(-1)^n`, which makes the true Stokes
/// factor coefficient `(-1)^{n-1} M_n`. Taking its logarithm gives this
/// weight, and only this weight yields a Lie transform on aligned tuples
/// (e.g. `L_2(1, 1) = 0`).
pub fn eval_l(z: &[C64], tol: f64) -> Result<C64> {
    eval_l_by(z, &|w: &[C64]| eval_m(w, tol))
}

/// `L_n` with a caller-supplied `M` evaluator (used for memoization).
pub fn eval_l_by<M>(z: &[C64], m: &M) -> Result<C64>
where
    M: Fn(&[C64]) -> Result<C64>,
{
    let n = z.len();
    if n == 0 {
        return Err(Error::Invalid("empty tuple".into()));
    }
    if off_domain(z) {
        return Ok(C64::new(0.0, 0.0));
    }
    if n == 1 {
        return Ok(TWO_PI_I);
    }
    let s = snapped_sums(z);
    let sn = s[n - 1];
    if sn.norm() <= SNAP * scale_of(&s) {
        return Ok(C64::new(0.0, 0.0));
    }
    // position along s_n of each cut point that lies on the open segment
    let zero = C64::new(0.0, 0.0);
    let pos: Vec<Option<f64>> = (0..=n)
        .map(|i| match i {
            0 => Some(0.0),
            _ if i == n => Some(1.0),
            _ => on_open_segment(zero, sn, s[i - 1]),
        })
        .collect();
    let admissible = |_: Option<(usize, usize)>, a: usize, b: usize| -> Result<bool> {
        Ok(match (pos[a], pos[b]) {
            (Some(u), Some(v)) => v - u > SNAP,
            _ => false,
        })
    };
    let mut total = C64::new(0.0, 0.0);
    for_each_chain(n, &admissible, &mut |cuts: &[usize]| {
        let k = cuts.len() - 1;
        let mut prod = C64::new(1.0 / k as f64, 0.0);
        for w in cuts.windows(2) {
            prod *= m(&z[w[0]..w[1]])?;
        }
        total += prod;
        Ok(())
    })?;
    Ok(total)
}

fn unit(angle_pi: f64) -> C64 {
    C64::from_polar(1.0, PI * angle_pi)
}

/// Side of `w` relative to the ray `r = e^{iπθ}`: `Some(true)` in `i·H̄_r`
/// (the open left half-plane plus `-r`), `Some(false)` otherwise, `None` if zero.
fn in_closed_left(w: C64, r_angle: f64, scale: f64) -> Option<bool> {
    if w.norm() <= SNAP * scale {
        return None;
    }
    let q = w / unit(r_angle);
    if q.im.abs() <= ANGLE_TOL * q.norm() {
        return Some(q.re < 0.0);
    }
    Some(q.im > 0.0)
}

/// Phase `φ(w) = arg(w)/π ∈ (θ, θ+1]` of a point of `i·H̄_r`.
fn phase(w: C64, r_angle: f64) -> f64 {
    let q = w / unit(r_angle);
    let a = q.im.atan2(q.re);
    // a ∈ (0, π], with -r mapped to π
    let a = if a <= 0.0 { a + 2.0 * PI } else { a };
    r_angle + a / PI
}

/// `Q̃_n(z)` relative to the ray at angle `r_angle·π`; requires `s_n ∈ i·H_r`.
///
/// Chain sum of `(-1)^{k-1}·∏ M` over chains of `k` blocks with strictly
/// decreasing phases in `i·H̄_r`, the sign coming from the same reversal rule
/// as in [`eval_l`].
pub fn eval_qtilde(z: &[C64], r_angle: f64, tol: f64) -> Result<C64> {
    eval_qtilde_by(z, r_angle, &|w: &[C64]| eval_m(w, tol))
}

pub fn eval_qtilde_by<M>(z: &[C64], r_angle: f64, m: &M) -> Result<C64>
where
    M: Fn(&[C64]) -> Result<C64>,
{
    let n = z.len();
    if n == 0 {
        return Err(Error::Invalid("empty tuple".into()));
    }
    if off_domain(z) {
        return Ok(C64::new(0.0, 0.0));
    }
    let s = snapped_sums(z);
    let scale = scale_of(&s);
    let sn = s[n - 1];
    let q = sn / unit(r_angle);
    if !(q.im > ANGLE_TOL * q.norm()) {
        return Err(Error::InadmissibleRay { angle: r_angle });
    }
    let point = |i: usize| if i == 0 { C64::new(0.0, 0.0) } else { s[i - 1] };
    let block_phase = |a: usize, b: usize| -> Option<f64> {
        let w = point(b) - point(a);
        match in_closed_left(w, r_angle, scale) {
            Some(true) => Some(phase(w, r_angle)),
            _ => None,
        }
    };
    let admissible = |prev: Option<(usize, usize)>, a: usize, b: usize| -> Result<bool> {
        let Some(phi) = block_phase(a, b) else {
            return Ok(false);
        };
        match prev {
            None => Ok(true),
            Some((pa, pb)) => {
                let before = block_phase(pa, pb).expect("admitted block");
                Ok(before - phi > ANGLE_TOL)
            }
        }
    };
    let mut total = C64::new(0.0, 0.0);
    for_each_chain(n, &admissible, &mut |cuts: &[usize]| {
        let k = cuts.len() - 1;
        let mut prod = C64::new(if k % 2 == 1 { 1.0 } else { -1.0 }, 0.0);
        for w in cuts.windows(2) {
            prod *= m(&z[w[0]..w[1]])?;
        }
        total += prod;
        Ok(())
    })?;
    Ok(total)
}

/// `Q_n(z)` relative to the ray at angle `r_angle·π`.
///
/// Zero unless `±s_n ∈ i·H_r`; for `s_n ∈ -i·H_r` the opposite ray is used.
pub fn eval_q(z: &[C64], r_angle: f64, tol: f64) -> Result<C64> {
    eval_q_with(z, r_angle, &PathOptions::new(tol))
}

pub fn eval_q_with(z: &[C64], r_angle: f64, opts: &PathOptions) -> Result<C64> {
    let n = z.len();
    if n == 0 {
        return Err(Error::Invalid("empty tuple".into()));
    }
    if off_domain(z) {
        return Ok(C64::new(0.0, 0.0));
    }
    let s = snapped_sums(z);
    let scale = scale_of(&s);
    let sn = s[n - 1];
    if sn.norm() <= SNAP * scale {
        return Ok(C64::new(0.0, 0.0));
    }
    let q = sn / unit(r_angle);
    if q.im.abs() <= ANGLE_TOL * q.norm() {
        return Err(Error::InadmissibleRay { angle: r_angle });
    }
    if n == 1 {
        return Ok(TWO_PI_I);
    }
    let r = if q.im > 0.0 { r_angle } else { r_angle + 1.0 };
    let dir = unit(r);
    let zero = C64::new(0.0, 0.0);
    let poles = &s[..n - 1];

    let mut marks = vec![zero, sn];
    let mut off_gap = f64::INFINITY;
    for &p in poles {
        if p == zero || p == sn {
            continue;
        }
        let mut on_path = false;
        if on_open_segment(zero, sn, p).is_some() {
            on_path = true;
        } else {
            let d = segment_distance(zero, sn, p);
            if d < GUARD * scale {
                return Err(Error::NonGeneric(format!(
                    "partial sum {p} lies within {d:e} of the segment [0, {sn}]"
                )));
            }
            off_gap = off_gap.min(d);
        }
        for base in [zero, sn] {
            let w = (p - base) / (-dir);
            if w.re > 0.0 && w.im.abs() <= ANGLE_TOL * w.norm() {
                on_path = true;
            } else {
                let d = if w.re > 0.0 { w.im.abs() } else { w.norm() };
                if d < GUARD * scale {
                    return Err(Error::RayHitsPole { pole: p, distance: d });
                }
                off_gap = off_gap.min(d);
            }
        }
        if on_path {
            marks.push(p);
        }
    }
    let radius = opts.radius.unwrap_or_else(|| 0.05 * min_gap(&marks).min(off_gap));
    let big = opts.big_factor * scale_of(&s).max(sn.norm());
    let path = build_multiplier_contour(r, sn, poles, big, radius)?;
    let v = iterated_integral(&path, &IteratedIntegralSpec::nostar(poles.to_vec()), opts.tol)?;
    Ok(TWO_PI_I * v)
}
