//! Piecewise contours with pole detours and iterated integrals of `dz/(z - s)` along them.

use std::f64::consts::PI;

use crate::ode::{self, OdeOptions};
use crate::{Error, Result, C64};

/// Relative distance below which two points are treated as the same point.
pub const SNAP: f64 = 1e-12;
/// Angular tolerance (radians) for "lies on this line" tests.
pub const ANGLE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    Clockwise,
    Anticlockwise,
}

impl Orientation {
    pub fn flip(self) -> Self {
        match self {
            Orientation::Clockwise => Orientation::Anticlockwise,
            Orientation::Anticlockwise => Orientation::Clockwise,
        }
    }
}

/// How a pole lying on a segment is avoided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DetourShape {
    #[default]
    HalfCircle,
    /// Three sides of a square of half-width `radius`, on the same side as the half-circle.
    Polygon,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    Segment {
        from: C64,
        to: C64,
    },
    /// Angles in radians; `end_angle < start_angle` iff clockwise.
    Arc {
        center: C64,
        radius: f64,
        start_angle: f64,
        end_angle: f64,
        orientation: Orientation,
    },
}

impl Piece {
    pub fn arc(center: C64, radius: f64, start_angle: f64, end_angle: f64) -> Piece {
        let orientation = if end_angle < start_angle {
            Orientation::Clockwise
        } else {
            Orientation::Anticlockwise
        };
        Piece::Arc {
            center,
            radius,
            start_angle,
            end_angle,
            orientation,
        }
    }

    pub fn point(&self, tau: f64) -> C64 {
        match *self {
            Piece::Segment { from, to } => from + (to - from) * tau,
            Piece::Arc {
                center,
                radius,
                start_angle,
                end_angle,
                ..
            } => center + C64::from_polar(radius, start_angle + tau * (end_angle - start_angle)),
        }
    }

    pub fn derivative(&self, tau: f64) -> C64 {
        match *self {
            Piece::Segment { from, to } => to - from,
            Piece::Arc {
                radius,
                start_angle,
                end_angle,
                ..
            } => {
                let d = end_angle - start_angle;
                C64::i() * d * C64::from_polar(radius, start_angle + tau * d)
            }
        }
    }

    pub fn start(&self) -> C64 {
        match *self {
            Piece::Segment { from, .. } => from,
            _ => self.point(0.0),
        }
    }

    pub fn end(&self) -> C64 {
        match *self {
            Piece::Segment { to, .. } => to,
            _ => self.point(1.0),
        }
    }

    pub fn reversed(&self) -> Piece {
        match *self {
            Piece::Segment { from, to } => Piece::Segment { from: to, to: from },
            Piece::Arc {
                center,
                radius,
                start_angle,
                end_angle,
                orientation,
            } => Piece::Arc {
                center,
                radius,
                start_angle: end_angle,
                end_angle: start_angle,
                orientation: orientation.flip(),
            },
        }
    }

    pub fn split(&self, tau: f64) -> (Piece, Piece) {
        match *self {
            Piece::Segment { from, to } => {
                let m = self.point(tau);
                (Piece::Segment { from, to: m }, Piece::Segment { from: m, to })
            }
            Piece::Arc {
                center,
                radius,
                start_angle,
                end_angle,
                orientation,
            } => {
                let mid = start_angle + tau * (end_angle - start_angle);
                (
                    Piece::Arc {
                        center,
                        radius,
                        start_angle,
                        end_angle: mid,
                        orientation,
                    },
                    Piece::Arc {
                        center,
                        radius,
                        start_angle: mid,
                        end_angle,
                        orientation,
                    },
                )
            }
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Piece::Segment { from, to } => (to - from).norm(),
            Piece::Arc {
                radius,
                start_angle,
                end_angle,
                ..
            } => radius * (end_angle - start_angle).abs(),
        }
    }

    pub fn distance_to(&self, p: C64) -> f64 {
        match *self {
            Piece::Segment { from, to } => segment_distance(from, to, p),
            Piece::Arc {
                center,
                radius,
                start_angle,
                end_angle,
                ..
            } => {
                let w = p - center;
                let (lo, hi) = if start_angle <= end_angle {
                    (start_angle, end_angle)
                } else {
                    (end_angle, start_angle)
                };
                let phi = w.arg();
                let k = ((lo - phi) / (2.0 * PI)).ceil();
                let phi = phi + 2.0 * PI * k;
                if phi <= hi {
                    (w.norm() - radius).abs()
                } else {
                    (p - self.start()).norm().min((p - self.end()).norm())
                }
            }
        }
    }
}

pub fn segment_distance(a: C64, b: C64, p: C64) -> f64 {
    let d = b - a;
    let l2 = d.norm_sqr();
    if l2 == 0.0 {
        return (p - a).norm();
    }
    let u = ((p - a) * d.conj()).re / l2;
    (p - (a + d * u.clamp(0.0, 1.0))).norm()
}

/// Position `u ∈ (0, 1)` of `p` on the open segment `(a, b)`, if it lies there.
pub fn on_open_segment(a: C64, b: C64, p: C64) -> Option<f64> {
    let scale = 1.0 + a.norm().max(b.norm());
    if (p - a).norm() <= SNAP * scale || (p - b).norm() <= SNAP * scale {
        return None;
    }
    let u = (p - a) / (b - a);
    if u.re > 0.0 && u.re < 1.0 && u.im.abs() <= ANGLE_TOL * u.norm() {
        Some(u.re)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    pieces: Vec<Piece>,
}

impl PathSpec {
    /// Checks that consecutive pieces share endpoints.
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::DegeneratePath);
        }
        let scale = pieces
            .iter()
            .map(|p| p.start().norm().max(p.end().norm()))
            .fold(1.0, f64::max);
        for w in pieces.windows(2) {
            let gap = (w[0].end() - w[1].start()).norm();
            if gap > SNAP * scale {
                return Err(Error::Invalid(format!("path pieces do not join: gap {gap:e}")));
            }
        }
        Ok(Self { pieces })
    }

    pub fn segment(from: C64, to: C64) -> Result<Self> {
        if from == to {
            return Err(Error::DegeneratePath);
        }
        Ok(Self {
            pieces: vec![Piece::Segment { from, to }],
        })
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn start(&self) -> C64 {
        self.pieces[0].start()
    }

    pub fn end(&self) -> C64 {
        self.pieces[self.pieces.len() - 1].end()
    }

    pub fn endpoints(&self) -> (C64, C64) {
        (self.start(), self.end())
    }

    pub fn reversed(&self) -> Self {
        Self {
            pieces: self.pieces.iter().rev().map(Piece::reversed).collect(),
        }
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &PathSpec) -> Result<Self> {
        let mut pieces = self.pieces.clone();
        pieces.extend_from_slice(&other.pieces);
        Self::new(pieces)
    }

    pub fn length(&self) -> f64 {
        self.pieces.iter().map(Piece::length).sum()
    }

    pub fn scale(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.start().norm().max(p.end().norm()))
            .fold(1.0, f64::max)
    }

    pub fn distance_to(&self, p: C64) -> f64 {
        self.pieces
            .iter()
            .map(|q| q.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Splits the path into two halves at a piece boundary (or the middle of a single piece).
    pub fn halves(&self) -> (Vec<Piece>, Vec<Piece>) {
        let n = self.pieces.len();
        if n == 1 {
            let (a, b) = self.pieces[0].split(0.5);
            (vec![a], vec![b])
        } else {
            (self.pieces[..n / 2].to_vec(), self.pieces[n / 2..].to_vec())
        }
    }
}

/// Straight segment `from → to` with a half-circle (or polygonal) detour around each pole on it.
///
/// A clockwise detour passes on the left of the direction of travel.
pub fn build_detour_segment(from: C64, to: C64, poles: &[(C64, Orientation)], radius: f64) -> Result<PathSpec> {
    build_detour_segment_with(from, to, poles, radius, DetourShape::HalfCircle)
}

pub fn build_detour_segment_with(
    from: C64,
    to: C64,
    poles: &[(C64, Orientation)],
    radius: f64,
    shape: DetourShape,
) -> Result<PathSpec> {
    Ok(PathSpec {
        pieces: detour_pieces(from, to, poles, radius, shape)?,
    })
}

fn detour_pieces(
    from: C64,
    to: C64,
    poles: &[(C64, Orientation)],
    radius: f64,
    shape: DetourShape,
) -> Result<Vec<Piece>> {
    if from == to {
        return Err(Error::DegeneratePath);
    }
    let mut hits: Vec<(f64, C64, Orientation)> = Vec::new();
    for &(p, o) in poles {
        if let Some(u) = on_open_segment(from, to, p) {
            if let Some(prev) = hits.iter().find(|h| h.1 == p) {
                if prev.2 != o {
                    return Err(Error::Invalid(format!("conflicting orientations at pole {p}")));
                }
                continue;
            }
            hits.push((u, p, o));
        }
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut stops = vec![from];
    stops.extend(hits.iter().map(|h| h.1));
    stops.push(to);
    let limit = stops
        .windows(2)
        .map(|w| 0.5 * (w[1] - w[0]).norm())
        .fold(f64::INFINITY, f64::min);
    if !hits.is_empty() && !(radius < limit) {
        return Err(Error::RadiusTooLarge { radius, limit });
    }

    let dir = (to - from) / (to - from).norm();
    let theta = dir.arg();
    let mut pieces = Vec::new();
    let mut current = from;
    for &(_, p, o) in &hits {
        let a = p - dir * radius;
        let b = p + dir * radius;
        pieces.push(Piece::Segment { from: current, to: a });
        match shape {
            DetourShape::HalfCircle => {
                let end = match o {
                    Orientation::Clockwise => theta,
                    Orientation::Anticlockwise => theta + 2.0 * PI,
                };
                pieces.push(Piece::Arc {
                    center: p,
                    radius,
                    start_angle: theta + PI,
                    end_angle: end,
                    orientation: o,
                });
            }
            DetourShape::Polygon => {
                let normal = match o {
                    Orientation::Clockwise => C64::i() * dir,
                    Orientation::Anticlockwise => -C64::i() * dir,
                };
                let a2 = a + normal * radius;
                let b2 = b + normal * radius;
                pieces.push(Piece::Segment { from: a, to: a2 });
                pieces.push(Piece::Segment { from: a2, to: b2 });
                pieces.push(Piece::Segment { from: b2, to: b });
            }
        }
        // land exactly on the arc end so the next piece joins without a gap
        current = pieces.last().expect("nonempty").end();
    }
    pieces.push(Piece::Segment { from: current, to });
    Ok(pieces)
}

fn ray_dir(angle_pi: f64) -> C64 {
    C64::from_polar(1.0, PI * angle_pi)
}

/// Classifies `p` against the ray `base + ρ·dir`, `ρ > 0`.
/// Returns `Ok(true)` if it lies on the ray, `Ok(false)` if comfortably off it.
fn check_ray(base: C64, dir: C64, p: C64, guard: f64) -> Result<bool> {
    let w = (p - base) / dir;
    let scale = 1.0 + base.norm();
    if w.norm() <= SNAP * scale {
        return Ok(false);
    }
    if w.re > 0.0 && w.im.abs() <= ANGLE_TOL * w.norm() {
        return Ok(true);
    }
    let distance = if w.re > 0.0 { w.im.abs() } else { w.norm() };
    if distance < guard {
        return Err(Error::RayHitsPole { pole: p, distance });
    }
    Ok(false)
}

fn rotated(z: C64, angle_pi: f64) -> C64 {
    z / ray_dir(angle_pi)
}

fn leg_length_to_circle(base: C64, dir: C64, big_radius: f64) -> f64 {
    // |base - ρ dir| = R, the positive root
    let s = base / dir;
    s.re + (big_radius * big_radius - s.im * s.im).sqrt()
}

/// The contour of the multiplier integrals as literally described: from 0 out
/// along `-r` (clockwise detours), clockwise round the circle of radius
/// `big_radius`, and back along `target - r` (anticlockwise detours) to `target`.
///
/// The ray `r` is `e^{iπ·r_angle}`.
pub fn build_multiplier_contour(
    r_angle: f64,
    target: C64,
    poles: &[C64],
    big_radius: f64,
    small_radius: f64,
) -> Result<PathSpec> {
    let dir = ray_dir(r_angle);
    validate_multiplier_geometry(dir, r_angle, target, poles, big_radius, small_radius)?;
    let theta = PI * r_angle;
    let out_end = -dir * big_radius;
    let rho = leg_length_to_circle(target, dir, big_radius);
    let in_start = target - dir * rho;
    let on_out: Vec<(C64, Orientation)> = poles
        .iter()
        .filter(|&&p| check_ray(C64::new(0.0, 0.0), -dir, p, 0.0).unwrap_or(false))
        .map(|&p| (p, Orientation::Clockwise))
        .collect();
    let on_in: Vec<(C64, Orientation)> = poles
        .iter()
        .filter(|&&p| check_ray(target, -dir, p, 0.0).unwrap_or(false))
        .map(|&p| (p, Orientation::Anticlockwise))
        .collect();
    let mut pieces = detour_pieces(
        C64::new(0.0, 0.0),
        out_end,
        &on_out,
        small_radius,
        DetourShape::HalfCircle,
    )?;
    let end_angle = theta + PI + rotated(in_start, r_angle + 1.0).arg();
    pieces.push(Piece::Arc {
        center: C64::new(0.0, 0.0),
        radius: big_radius,
        start_angle: theta + PI,
        end_angle,
        orientation: Orientation::Clockwise,
    });
    let mut inbound = detour_pieces(in_start, target, &on_in, small_radius, DetourShape::HalfCircle)?;
    if let Piece::Segment { from, .. } = &mut inbound[0] {
        *from = pieces.last().expect("nonempty").end();
    }
    pieces.extend(inbound);
    PathSpec::new(pieces)
}

fn validate_multiplier_geometry(
    dir: C64,
    r_angle: f64,
    target: C64,
    poles: &[C64],
    big_radius: f64,
    small_radius: f64,
) -> Result<()> {
    let im = rotated(target, r_angle).im;
    if !(im > ANGLE_TOL * target.norm()) {
        return Err(Error::InadmissibleRay { angle: r_angle });
    }
    let max_pole = poles.iter().map(|p| p.norm()).fold(target.norm(), f64::max);
    if !(big_radius > 2.0 * max_pole) {
        return Err(Error::RadiusTooLarge {
            radius: big_radius,
            limit: 2.0 * max_pole,
        });
    }
    for &p in poles {
        check_ray(C64::new(0.0, 0.0), -dir, p, small_radius)?;
        check_ray(target, -dir, p, small_radius)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Convention {
    /// `∫ ω_1 … ω_n` with `ω_1` integrated first (earliest along the path).
    #[default]
    NoStar,
    /// `∫* ω_1 … ω_n = ∫ ω_n … ω_1`.
    Star,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IteratedIntegralSpec {
    /// The forms are `dz/(z - poles[i])`.
    pub poles: Vec<C64>,
    pub convention: Convention,
}

impl IteratedIntegralSpec {
    pub fn nostar(poles: Vec<C64>) -> Self {
        Self {
            poles,
            convention: Convention::NoStar,
        }
    }

    pub fn star(poles: Vec<C64>) -> Self {
        Self {
            poles,
            convention: Convention::Star,
        }
    }

    /// Same integral in the other convention.
    pub fn converted(&self) -> Self {
        let mut poles = self.poles.clone();
        poles.reverse();
        let convention = match self.convention {
            Convention::NoStar => Convention::Star,
            Convention::Star => Convention::NoStar,
        };
        Self { poles, convention }
    }

    fn nostar_poles(&self) -> Vec<C64> {
        let mut p = self.poles.clone();
        if self.convention == Convention::Star {
            p.reverse();
        }
        p
    }
}

/// Iterated integral of the forms of `spec` along `path`.
///
/// The first (earliest) form may not have its pole at the start point and the
/// last may not have its pole at the end point; other forms may. The prefix
/// integrals are integrated forwards over the first half of the path and the
/// suffix integrals backwards over the second half; Chen's formula joins them.
pub fn iterated_integral(path: &PathSpec, spec: &IteratedIntegralSpec, tol: f64) -> Result<C64> {
    let forms = spec.nostar_poles();
    let n = forms.len();
    if n == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    let scale = path.scale();
    let snap = SNAP * scale;
    let (z0, z1) = path.endpoints();
    let first = path.pieces().first().expect("nonempty");
    let last = path.pieces().last().expect("nonempty");
    for (k, &p) in forms.iter().enumerate() {
        let at_start = (p - z0).norm() <= snap;
        let at_end = (p - z1).norm() <= snap;
        if (at_start && k == 0) || (at_end && k == n - 1) {
            return Err(Error::PoleOnPath { pole: p });
        }
        let d = path
            .pieces()
            .iter()
            .filter(|q| !(at_start && std::ptr::eq(*q, first)) && !(at_end && std::ptr::eq(*q, last)))
            .map(|q| q.distance_to(p))
            .fold(f64::INFINITY, f64::min);
        if d <= 1e-10 * scale {
            return Err(Error::PoleOnPath { pole: p });
        }
    }

    let (head, tail) = path.halves();
    let a = prefix_integrals(&head, &forms, snap, tol)?;
    let tail_rev: Vec<Piece> = tail.iter().rev().map(Piece::reversed).collect();
    let forms_rev: Vec<C64> = forms.iter().rev().copied().collect();
    let c = prefix_integrals(&tail_rev, &forms_rev, snap, tol)?;
    // ∫_β ω_{k+1}…ω_n = (-1)^{n-k} ∫_{β̄} ω_n…ω_{k+1}
    let mut total = C64::new(0.0, 0.0);
    for k in 0..=n {
        let sign = if (n - k).is_multiple_of(2) { 1.0 } else { -1.0 };
        total += a[k] * c[n - k] * sign;
    }
    Ok(total)
}

/// Solves `v_0 = 1`, `dv_k = v_{k-1} dz/(z - forms[k-1])` along `pieces`, returning `v(end)`.
fn prefix_integrals(pieces: &[Piece], forms: &[C64], snap: f64, tol: f64) -> Result<Vec<C64>> {
    let n = forms.len();
    let mut v = vec![C64::new(0.0, 0.0); n + 1];
    v[0] = C64::new(1.0, 0.0);
    let opts = OdeOptions {
        tol: tol.max(1e-15),
        ..OdeOptions::default()
    };
    for (j, piece) in pieces.iter().enumerate() {
        let rhs = |tau: f64, y: &[C64], out: &mut [C64]| {
            let z = piece.point(tau);
            let dz = piece.derivative(tau);
            out[0] = C64::new(0.0, 0.0);
            for k in 1..=n {
                out[k] = dz / (z - forms[k - 1]) * y[k - 1];
            }
        };
        let start = piece.start();
        let singular = j == 0 && forms.iter().any(|&p| (p - start).norm() <= snap);
        let g = if singular {
            let dz = piece.derivative(0.0);
            let mut g = vec![C64::new(0.0, 0.0); n + 1];
            for k in 1..=n {
                g[k] = if (forms[k - 1] - start).norm() <= snap {
                    g[k - 1]
                } else {
                    dz / (start - forms[k - 1]) * v[k - 1]
                };
            }
            Some(g)
        } else {
            None
        };
        v = ode::integrate(rhs, &v, 0.0, 1.0, &opts, g.as_deref())?;
    }
    Ok(v)
}

/// Default detour radius: `0.05 ×` the smallest distance between distinct points of `points`.
pub fn default_radius(points: &[C64]) -> f64 {
    let mut gap = f64::INFINITY;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = (a - b).norm();
            if d > 0.0 {
                gap = gap.min(d);
            }
        }
    }
    if gap.is_finite() {
        0.05 * gap
    } else {
        0.05
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn joined(path: &PathSpec) -> bool {
        path.pieces()
            .windows(2)
            .all(|w| (w[0].end() - w[1].start()).norm() < 1e-12)
    }

    #[test]
    fn single_detour_has_three_pieces() {
        let p = build_detour_segment(c(0.0, 0.0), c(2.0, 0.0), &[(c(1.0, 0.0), Orientation::Clockwise)], 0.1).unwrap();
        assert_eq!(p.pieces().len(), 3);
        assert!((p.pieces()[0].end() - c(0.9, 0.0)).norm() < 1e-15);
        assert!((p.pieces()[2].start() - c(1.1, 0.0)).norm() < 1e-15);
        // clockwise passes above the pole when travelling right
        assert!((p.pieces()[1].point(0.5) - c(1.0, 0.1)).norm() < 1e-14);
        assert!(joined(&p));
    }

    #[test]
    fn off_segment_pole_is_ignored() {
        let p = build_detour_segment(
            c(0.0, 0.0),
            c(-1.0, 1.0),
            &[(c(-1.0, 0.0), Orientation::Clockwise)],
            0.1,
        )
        .unwrap();
        assert_eq!(p.pieces().len(), 1);
    }

    #[test]
    fn opposite_orientations() {
        let p = build_detour_segment(
            c(0.0, 0.0),
            c(3.0, 0.0),
            &[
                (c(1.0, 0.0), Orientation::Clockwise),
                (c(2.0, 0.0), Orientation::Anticlockwise),
            ],
            0.1,
        )
        .unwrap();
        assert_eq!(p.pieces().len(), 5);
        assert!(joined(&p));
        assert!(p.pieces()[1].point(0.5).im > 0.0);
        assert!(p.pieces()[3].point(0.5).im < 0.0);
    }

    #[test]
    fn radius_and_degenerate_errors() {
        let e = build_detour_segment(c(0.0, 0.0), c(2.0, 0.0), &[(c(1.0, 0.0), Orientation::Clockwise)], 0.6);
        assert!(matches!(e, Err(Error::RadiusTooLarge { .. })));
        let e = build_detour_segment(c(1.0, 0.0), c(1.0, 0.0), &[], 0.1);
        assert_eq!(e, Err(Error::DegeneratePath));
    }

    #[test]
    fn empty_form_list_is_one() {
        let p = PathSpec::segment(c(0.0, 0.0), c(1.0, 1.0)).unwrap();
        let v = iterated_integral(&p, &IteratedIntegralSpec::default(), 1e-12).unwrap();
        assert_eq!(v, c(1.0, 0.0));
    }

    #[test]
    fn single_form_is_a_logarithm() {
        let p = PathSpec::segment(c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        let v = iterated_integral(&p, &IteratedIntegralSpec::nostar(vec![c(2.0, 0.0)]), 1e-13).unwrap();
        assert!((v - c(0.5f64.ln(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn literal_contour_without_poles_has_three_pieces() {
        let p = build_multiplier_contour(0.0, c(0.0, 1.0), &[], 4.0, 0.05).unwrap();
        assert_eq!(p.pieces().len(), 3);
        assert!(joined(&p));
        assert!((p.end() - c(0.0, 1.0)).norm() < 1e-12);
        let p = build_multiplier_contour(0.0, c(0.0, 1.0), &[c(-1.0, 0.0)], 4.0, 0.05).unwrap();
        assert_eq!(p.pieces().len(), 5);
        assert!(matches!(
            build_multiplier_contour(0.0, c(0.0, 1.0), &[c(-1.0, 0.01)], 4.0, 0.05),
            Err(Error::RayHitsPole { .. })
        ));
    }
}
