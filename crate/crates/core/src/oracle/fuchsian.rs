//! Fuchsian systems `dΦ/dz = Σ_i A_i/(z - p_i) Φ`: parallel transport,
//! canonical solutions at the poles, regularized transport between poles.

use crate::complexpath::{iterated_integral, IteratedIntegralSpec, PathSpec, Piece};
use crate::liealg::GradedSystem;
use crate::ode::{self, OdeOptions};
use crate::{CMat, Error, Result, C64};

#[derive(Debug, Clone)]
pub struct FuchsianSystem {
    poles: Vec<C64>,
    residues: Vec<CMat>,
    dim: usize,
}

fn mat_norm(m: &CMat) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

impl FuchsianSystem {
    pub fn new(poles: Vec<C64>, residues: Vec<CMat>) -> Result<Self> {
        if poles.is_empty() || poles.len() != residues.len() {
            return Err(Error::Invalid("need one residue per pole".into()));
        }
        let dim = residues[0].nrows();
        for (i, a) in residues.iter().enumerate() {
            if a.nrows() != dim || a.ncols() != dim {
                return Err(Error::Invalid("residues must be square of equal size".into()));
            }
            if poles[..i].contains(&poles[i]) {
                return Err(Error::Invalid(format!("repeated pole {}", poles[i])));
            }
            // nilpotent residues are never resonant
            let mut p = a.clone();
            for _ in 1..dim {
                p = &p * a;
            }
            if mat_norm(&p) > 1e-10 * (1.0 + mat_norm(a)).powi(dim as i32) {
                return Err(Error::Resonant);
            }
        }
        Ok(Self { poles, residues, dim })
    }

    /// The dual system with poles at the block eigenvalues of `Z` and
    /// residues `A_i = P_i F`.
    pub fn from_zf(sys: &GradedSystem, f: &CMat) -> Result<Self> {
        let poles = sys.eigenvalues().to_vec();
        let residues = (0..sys.block_count()).map(|b| sys.projector(b) * f).collect();
        Self::new(poles, residues)
    }

    pub fn poles(&self) -> &[C64] {
        &self.poles
    }

    pub fn residues(&self) -> &[CMat] {
        &self.residues
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Σ_i A_i/(z - p_i)`.
    pub fn omega(&self, z: C64) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for (p, a) in self.poles.iter().zip(&self.residues) {
            m += a / (z - p);
        }
        m
    }

    /// Distance from `z` to the nearest pole other than `skip`.
    pub fn pole_gap(&self, z: C64, skip: Option<usize>) -> f64 {
        self.poles
            .iter()
            .enumerate()
            .filter(|(k, _)| Some(*k) != skip)
            .map(|(_, p)| (z - p).norm())
            .fold(f64::INFINITY, f64::min)
    }

    fn pole_at(&self, z: C64, snap: f64) -> Option<usize> {
        self.poles.iter().position(|p| (z - p).norm() <= snap)
    }
}

/// Transport of the identity along `path`.
pub fn parallel_transport(sys: &FuchsianSystem, path: &PathSpec, tol: f64) -> Result<CMat> {
    let scale = path.scale();
    for &p in sys.poles() {
        if path.distance_to(p) <= 1e-10 * scale {
            return Err(Error::PoleOnPath { pole: p });
        }
    }
    transport_pieces(sys, path.pieces(), CMat::identity(sys.dim, sys.dim), tol)
}

fn transport_pieces(sys: &FuchsianSystem, pieces: &[Piece], start: CMat, tol: f64) -> Result<CMat> {
    let n = sys.dim;
    let opts = OdeOptions {
        tol: tol.max(1e-15),
        ..OdeOptions::default()
    };
    let mut y: Vec<C64> = start.as_slice().to_vec();
    let cols = start.ncols();
    for piece in pieces {
        let rhs = |tau: f64, y: &[C64], out: &mut [C64]| {
            let z = piece.point(tau);
            let w = sys.omega(z) * piece.derivative(tau);
            let ym = CMat::from_column_slice(n, cols, y);
            out.copy_from_slice((w * ym).as_slice());
        };
        y = ode::integrate(rhs, &y, 0.0, 1.0, &opts, None)?;
    }
    Ok(CMat::from_column_slice(n, cols, &y))
}

/// Truncated Chen series `1 + Σ_{n ≤ order} I*(p_1, …, p_n) A_{p_1}⋯A_{p_n}`.
pub fn chen_series(sys: &FuchsianSystem, path: &PathSpec, order: usize, tol: f64) -> Result<CMat> {
    transport_series(sys, path, order, tol, None, None)
}

/// Truncated series of `Q·PT^reg·P` for a path from the pole `start` to the
/// pole `end`, dropping words with `p_1 = end` or `p_n = start`.
pub fn regularized_series(
    sys: &FuchsianSystem,
    path: &PathSpec,
    left: &CMat,
    right: &CMat,
    order: usize,
    tol: f64,
) -> Result<CMat> {
    let snap = 1e-12 * path.scale();
    let start = sys.pole_at(path.start(), snap);
    let end = sys.pole_at(path.end(), snap);
    Ok(left * transport_series(sys, path, order, tol, start, end)? * right)
}

fn transport_series(
    sys: &FuchsianSystem,
    path: &PathSpec,
    order: usize,
    tol: f64,
    start: Option<usize>,
    end: Option<usize>,
) -> Result<CMat> {
    let m = sys.poles.len();
    let n = sys.dim;
    let mut total = CMat::identity(n, n);
    let mut words: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..order {
        let mut next = Vec::with_capacity(words.len() * m);
        for w in &words {
            for k in 0..m {
                let mut v = w.clone();
                v.push(k);
                next.push(v);
            }
        }
        words = next;
        for w in &words {
            if Some(w[0]) == end || Some(*w.last().expect("nonempty")) == start {
                continue;
            }
            let mut prod = CMat::identity(n, n);
            for &k in w {
                prod *= &sys.residues[k];
            }
            if mat_norm(&prod) == 0.0 {
                continue;
            }
            let poles: Vec<C64> = w.iter().map(|&k| sys.poles[k]).collect();
            let i = iterated_integral(path, &IteratedIntegralSpec::star(poles), tol)?;
            total += prod * i;
        }
    }
    Ok(total)
}

/// Power series `Σ_k c_k (z - center)^k`.
#[derive(Debug, Clone)]
pub struct LocalSeries {
    pub center: C64,
    pub coeffs: Vec<CMat>,
}

impl LocalSeries {
    pub fn eval(&self, z: C64) -> CMat {
        let w = z - self.center;
        let mut acc = self.coeffs.last().expect("nonempty").clone();
        for c in self.coeffs.iter().rev().skip(1) {
            acc = acc * w + c;
        }
        acc
    }
}

const MAX_TERMS: usize = 20_000;

/// Solves `(k - ad_A) X = r` for nilpotent `A`.
fn sylvester(a: &CMat, r: &CMat, k: f64) -> CMat {
    let mut term = r / C64::new(k, 0.0);
    let mut x = term.clone();
    for _ in 0..2 * a.nrows() {
        term = (a * &term - &term * a) / C64::new(k, 0.0);
        if mat_norm(&term) == 0.0 {
            break;
        }
        x += &term;
    }
    x
}

/// Taylor coefficients of `Σ_{j≠skip} A_j/(z - p_j)` at `center`, up to `count`.
fn omega_coeffs(sys: &FuchsianSystem, center: C64, skip: Option<usize>, count: usize) -> Vec<CMat> {
    let n = sys.dim;
    let mut out = vec![CMat::zeros(n, n); count];
    for (j, (p, a)) in sys.poles.iter().zip(&sys.residues).enumerate() {
        if Some(j) == skip {
            continue;
        }
        // 1/(w - d) = -Σ_k w^k / d^{k+1},  d = p - center
        let d = p - center;
        let mut pow = C64::new(1.0, 0.0) / d;
        for c in out.iter_mut() {
            *c -= a * pow;
            pow /= d;
        }
    }
    out
}

fn enough(coeffs: &[CMat], reach: f64, rel: f64) -> bool {
    let k = coeffs.len();
    if k < 8 {
        return false;
    }
    let size = mat_norm(&coeffs[0]).max(1.0);
    (k - 3..k).all(|i| mat_norm(&coeffs[i]) * reach.powi(i as i32) <= rel * size)
}

/// `H_p` at the pole `index`: `Φ_p = H_p (z - p)^{A_p}`, `H_p(p) = 1`, with
/// enough terms for `|z - p| ≤ reach`.
pub fn h_series(sys: &FuchsianSystem, index: usize, reach: f64) -> Result<LocalSeries> {
    let p = sys.poles[index];
    let a = &sys.residues[index];
    let n = sys.dim;
    let mut b: Vec<CMat> = omega_coeffs(sys, p, Some(index), 64);
    let mut h = vec![CMat::identity(n, n)];
    while !enough(&h, reach, 1e-17) {
        let k = h.len();
        if k >= MAX_TERMS {
            return Err(Error::ToleranceNotMet { at: reach });
        }
        if b.len() < k {
            b = omega_coeffs(sys, p, Some(index), 2 * k);
        }
        // k H_k - [A, H_k] = Σ_{j<k} B_j H_{k-1-j}
        let mut r = CMat::zeros(n, n);
        for j in 0..k {
            r += &b[j] * &h[k - 1 - j];
        }
        h.push(sylvester(a, &r, k as f64));
    }
    Ok(LocalSeries { center: p, coeffs: h })
}

/// Solution of the system near a regular point `center` with value `value` there.
pub fn regular_series(sys: &FuchsianSystem, center: C64, value: &CMat, reach: f64) -> Result<LocalSeries> {
    let mut om = omega_coeffs(sys, center, None, 64);
    let mut c = vec![value.clone()];
    while !enough(&c, reach, 1e-17) {
        let k = c.len();
        if k >= MAX_TERMS {
            return Err(Error::ToleranceNotMet { at: reach });
        }
        if om.len() < k {
            om = omega_coeffs(sys, center, None, 2 * k);
        }
        // (k) C_k = Σ_{m<k} Ω_m C_{k-1-m}
        let mut r = CMat::zeros(value.nrows(), value.ncols());
        for m in 0..k {
            r += &om[m] * &c[k - 1 - m];
        }
        c.push(r / C64::new(k as f64, 0.0));
    }
    Ok(LocalSeries { center, coeffs: c })
}

/// `exp(A log w)` with the principal branch, shifted by `2πi·sheet`.
pub fn power(a: &CMat, w: C64, sheet: i32) -> CMat {
    let log = w.ln() + C64::new(0.0, std::f64::consts::TAU * sheet as f64);
    let n = a.nrows();
    let x = a * log;
    let mut term = CMat::identity(n, n);
    let mut acc = term.clone();
    for k in 1..=n {
        term = &term * &x / C64::new(k as f64, 0.0);
        acc += &term;
    }
    acc
}

/// `H_p(z)` for `z` in the disc around the pole free of other poles.
pub fn canonical_h(sys: &FuchsianSystem, index: usize, z: C64) -> Result<CMat> {
    let p = sys.poles[index];
    let radius = sys.pole_gap(p, Some(index));
    let d = (z - p).norm();
    if d >= radius {
        return Err(Error::OutOfDisc { z, radius });
    }
    Ok(h_series(sys, index, d)?.eval(z))
}

/// `Φ_p(z) = H_p(z) (z - p)^{A_p}` with the principal branch of `log(z - p)`.
pub fn canonical_solution(sys: &FuchsianSystem, index: usize, z: C64) -> Result<CMat> {
    let p = sys.poles[index];
    if z == p {
        return Err(Error::Invalid("canonical solution is multivalued at its pole".into()));
    }
    Ok(canonical_h(sys, index, z)? * power(&sys.residues[index], z - p, 0))
}

/// Analytic continuation of `H_i P_i` from the pole `i` along a ray,
/// stored as a chain of re-centered power series.
#[derive(Debug, Clone)]
pub struct RayChain {
    origin: C64,
    dir: C64,
    /// (position along the ray, reach, series)
    links: Vec<(f64, f64, LocalSeries)>,
}

impl RayChain {
    /// Continues `H_i·P` from the pole `i` up to distance `length` along
    /// `dir`. Needs `A_i·P = 0`, which makes `H_i·P` a solution.
    pub fn from_pole(sys: &FuchsianSystem, index: usize, right: &CMat, dir: C64, length: f64) -> Result<Self> {
        let p = sys.poles[index];
        let a = &sys.residues[index];
        let residual = mat_norm(&(a * right));
        if residual > 1e-12 * (1.0 + mat_norm(a) * mat_norm(right)) {
            return Err(Error::ProjectorMismatch { residual });
        }
        let dir = dir / dir.norm();
        let rho = sys.pole_gap(p, Some(index));
        let reach = 0.5 * rho;
        let mut h = h_series(sys, index, reach)?;
        for c in h.coeffs.iter_mut() {
            *c = &*c * right;
        }
        let mut links = vec![(0.0, reach, h)];
        let mut u = 0.0;
        let mut last_reach = reach;
        while u + last_reach < length {
            let next_u = u + last_reach;
            let z = p + dir * next_u;
            let value = links.last().expect("nonempty").2.eval(z);
            let rho = sys.pole_gap(z, None);
            let reach = 0.5 * rho;
            if reach < 1e-9 * (1.0 + next_u) {
                return Err(Error::RayHitsPole { pole: z, distance: rho });
            }
            links.push((next_u, reach, regular_series(sys, z, &value, reach)?));
            u = next_u;
            last_reach = reach;
        }
        Ok(Self { origin: p, dir, links })
    }

    pub fn len(&self) -> f64 {
        let (u, r, _) = self.links.last().expect("nonempty");
        u + r
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Value at distance `u` along the ray.
    pub fn eval(&self, u: f64) -> CMat {
        let k = match self.links.binary_search_by(|l| l.0.total_cmp(&u)) {
            Ok(k) => k,
            Err(0) => 0,
            Err(k) => k - 1,
        };
        self.links[k].2.eval(self.origin + self.dir * u)
    }
}

fn first_exit(pieces: &[Piece], center: C64, radius: f64, from_end: bool) -> Option<(usize, f64)> {
    let order: Vec<usize> = if from_end {
        (0..pieces.len()).rev().collect()
    } else {
        (0..pieces.len()).collect()
    };
    for j in order {
        let piece = &pieces[j];
        let param = |s: f64| if from_end { 1.0 - s } else { s };
        let dist = |s: f64| (piece.point(param(s)) - center).norm();
        let samples = 256;
        let mut prev = 0.0;
        for k in 1..=samples {
            let s = k as f64 / samples as f64;
            if dist(s) >= radius {
                let (mut lo, mut hi) = (prev, s);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if dist(mid) >= radius {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some((j, param(hi)));
            }
            prev = s;
        }
    }
    None
}

/// `Q·PT^reg_γ·P` for a path whose endpoints may be poles.
///
/// With `Q·A_q = 0` and `A_p·P = 0` the regularized transport equals
/// `Q·H_q(b)⁻¹·PT_{a→b}·H_p(a)·P` for any points `a`, `b` on the path inside
/// the discs of convergence at `p` and `q`.
pub fn regularized_transport(
    sys: &FuchsianSystem,
    path: &PathSpec,
    left: &CMat,
    right: &CMat,
    tol: f64,
) -> Result<CMat> {
    let scale = path.scale();
    let snap = 1e-12 * scale;
    let start = sys.pole_at(path.start(), snap);
    let end = sys.pole_at(path.end(), snap);
    for (k, &p) in sys.poles().iter().enumerate() {
        if Some(k) == start || Some(k) == end {
            continue;
        }
        if path.distance_to(p) <= 1e-10 * scale {
            return Err(Error::PoleOnPath { pole: p });
        }
    }
    let check = |residual: f64, size: f64| -> Result<()> {
        if residual > 1e-12 * (1.0 + size) {
            return Err(Error::ProjectorMismatch { residual });
        }
        Ok(())
    };
    if let Some(p) = start {
        let a = &sys.residues[p];
        check(mat_norm(&(a * right)), mat_norm(a) * mat_norm(right))?;
    }
    if let Some(q) = end {
        let a = &sys.residues[q];
        check(mat_norm(&(left * a)), mat_norm(a) * mat_norm(left))?;
    }

    let mut pieces: Vec<Piece> = path.pieces().to_vec();
    let mut h_start = CMat::identity(sys.dim, sys.dim);
    if let Some(p) = start {
        let radius = 0.25 * sys.pole_gap(sys.poles[p], Some(p));
        let (j, tau) = first_exit(&pieces, sys.poles[p], radius, false)
            .ok_or_else(|| Error::Invalid("path never leaves its start pole".into()))?;
        let (_, rest) = pieces[j].split(tau);
        pieces.drain(..j);
        pieces[0] = rest;
        h_start = canonical_h(sys, p, pieces[0].start())?;
    }
    let mut h_end_inv = CMat::identity(sys.dim, sys.dim);
    if let Some(q) = end {
        let radius = 0.25 * sys.pole_gap(sys.poles[q], Some(q));
        let (j, tau) = first_exit(&pieces, sys.poles[q], radius, true)
            .ok_or_else(|| Error::Invalid("path never leaves its end pole".into()))?;
        let (head, _) = pieces[j].split(tau);
        pieces.truncate(j + 1);
        pieces[j] = head;
        let b = pieces[j].end();
        h_end_inv = canonical_h(sys, q, b)?
            .try_inverse()
            .ok_or(Error::Invalid("singular canonical solution".into()))?;
    }
    let pt = transport_pieces(sys, &pieces, h_start * right, tol)?;
    Ok(left * h_end_inv * pt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexpath::{build_detour_segment, Orientation};
    use std::f64::consts::TAU;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn nilpotent(x: C64) -> CMat {
        CMat::from_row_slice(2, 2, &[c(0.0, 0.0), x, c(0.0, 0.0), c(0.0, 0.0)])
    }

    fn two_pole() -> FuchsianSystem {
        // rank one u vᵀ with vᵀu = 0 is nilpotent
        let u = nalgebra::DVector::from_vec(vec![c(0.3, 0.1), c(-0.2, 0.2)]);
        let v = nalgebra::DVector::from_vec(vec![c(0.2, -0.2), c(0.3, 0.1)]);
        let a1 = &u * v.transpose();
        let u2 = nalgebra::DVector::from_vec(vec![c(0.1, 0.0), c(0.25, -0.1)]);
        let v2 = nalgebra::DVector::from_vec(vec![c(0.25, -0.1), c(-0.1, 0.0)]);
        let a2 = &u2 * v2.transpose();
        FuchsianSystem::new(vec![c(0.0, 0.0), c(1.0, 0.3)], vec![a1, a2]).unwrap()
    }

    #[test]
    fn zero_residues_transport_trivially() {
        let sys = FuchsianSystem::new(vec![c(0.0, 0.0)], vec![CMat::zeros(2, 2)]).unwrap();
        let path = PathSpec::segment(c(1.0, 0.0), c(0.0, 2.0)).unwrap();
        let pt = parallel_transport(&sys, &path, 1e-12).unwrap();
        assert!((pt - CMat::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn loop_monodromy_is_exponential() {
        let a = nilpotent(c(0.3, -0.2));
        let sys = FuchsianSystem::new(vec![c(0.0, 0.0)], vec![a.clone()]).unwrap();
        let path = PathSpec::new(vec![Piece::arc(c(0.0, 0.0), 0.5, 0.0, TAU)]).unwrap();
        let pt = parallel_transport(&sys, &path, 1e-12).unwrap();
        let expect = CMat::identity(2, 2) + a * c(0.0, TAU);
        assert!((pt - expect).norm() < 1e-10);
    }

    #[test]
    fn chen_series_matches_transport() {
        let sys = two_pole();
        let path = PathSpec::segment(c(0.4, -0.5), c(0.6, 0.9)).unwrap();
        let pt = parallel_transport(&sys, &path, 1e-12).unwrap();
        let chen = chen_series(&sys, &path, 6, 1e-12).unwrap();
        let err = (pt - chen).norm();
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn pole_on_path_rejected() {
        let sys = two_pole();
        let path = PathSpec::segment(c(-1.0, 0.0), c(1.0, 0.0)).unwrap();
        assert!(matches!(
            parallel_transport(&sys, &path, 1e-12),
            Err(Error::PoleOnPath { .. })
        ));
    }

    #[test]
    fn canonical_solution_is_flat_and_normalized() {
        let sys = two_pole();
        let p = sys.poles()[0];
        // Φ_p(z) (z-p)^{-A} → 1
        let z = p + C64::from_polar(1e-4, 0.7);
        let phi = canonical_solution(&sys, 0, z).unwrap();
        let r = phi * power(&sys.residues()[0], z - p, 0).try_inverse().unwrap();
        assert!((r - CMat::identity(2, 2)).norm() < 1e-3);
        // flatness at a probe point
        let z = p + c(0.3, 0.2);
        let h = 1e-5;
        let dphi = (canonical_solution(&sys, 0, z + h).unwrap() - canonical_solution(&sys, 0, z - h).unwrap())
            / C64::new(2.0 * h, 0.0);
        let resid = dphi - sys.omega(z) * canonical_solution(&sys, 0, z).unwrap();
        assert!(resid.norm() < 1e-8, "{}", resid.norm());
    }

    #[test]
    fn out_of_disc() {
        let sys = two_pole();
        assert!(matches!(
            canonical_h(&sys, 0, c(2.0, 0.0)),
            Err(Error::OutOfDisc { .. })
        ));
    }

    #[test]
    fn ray_chain_matches_ode() {
        let sys = two_pole();
        let right = kernel_projector(&sys.residues()[0]);
        let dir = C64::from_polar(1.0, 0.9);
        let chain = RayChain::from_pole(&sys, 0, &right, dir, 6.0).unwrap();
        let a = dir * 0.1;
        let start = canonical_h(&sys, 0, a).unwrap() * &right;
        let path = PathSpec::segment(a, dir * 5.0).unwrap();
        let pt = parallel_transport(&sys, &path, 1e-13).unwrap();
        let expect = pt * start;
        let err = (chain.eval(5.0) - &expect).norm();
        assert!(err < 1e-9, "{err} {}", expect.norm());
    }

    #[test]
    fn regularized_transport_matches_series() {
        let sys = two_pole();
        let (p, q) = (sys.poles()[0], sys.poles()[1]);
        let path = PathSpec::segment(p, q).unwrap();
        // projectors onto kernels: A_p P = 0, Q A_q = 0
        let right = kernel_projector(&sys.residues()[0]);
        let left = kernel_projector(&sys.residues()[1].transpose()).transpose();
        let reg = regularized_transport(&sys, &path, &left, &right, 1e-12).unwrap();
        let series = regularized_series(&sys, &path, &left, &right, 5, 1e-12).unwrap();
        let err = (reg - series).norm();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn projector_mismatch() {
        let sys = two_pole();
        let path = PathSpec::segment(sys.poles()[0], sys.poles()[1]).unwrap();
        let id = CMat::identity(2, 2);
        assert!(matches!(
            regularized_transport(&sys, &path, &id, &id, 1e-12),
            Err(Error::ProjectorMismatch { .. })
        ));
    }

    #[test]
    fn monodromy_jump_of_regularized_transport() {
        // poles p, q, s collinear: α from p to q, β from q to s
        let a = |u: C64, v: C64| {
            let u = nalgebra::DVector::from_vec(vec![u, C64::new(1.0, 0.0) * 0.2]);
            let vv = nalgebra::DVector::from_vec(vec![v, -u[0] * v / u[1]]);
            &u * vv.transpose()
        };
        let residues = vec![
            a(c(0.1, 0.1), c(0.2, 0.0)),
            a(c(-0.2, 0.1), c(0.1, 0.1)),
            a(c(0.15, -0.1), c(0.1, -0.2)),
        ];
        let poles = vec![c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)];
        let sys = FuchsianSystem::new(poles.clone(), residues).unwrap();
        let right = kernel_projector(&sys.residues()[0]);
        let left = kernel_projector(&sys.residues()[2].transpose()).transpose();
        let plus = build_detour_segment(poles[0], poles[2], &[(poles[1], Orientation::Anticlockwise)], 0.1).unwrap();
        let minus = build_detour_segment(poles[0], poles[2], &[(poles[1], Orientation::Clockwise)], 0.1).unwrap();
        let lhs = regularized_transport(&sys, &plus, &left, &right, 1e-12).unwrap()
            - regularized_transport(&sys, &minus, &left, &right, 1e-12).unwrap();
        // the minus detour passes above q, homotopic to α then β through x
        let x = poles[1] + c(0.0, 0.1);
        let alpha = PathSpec::segment(poles[0], x).unwrap();
        let beta = PathSpec::segment(x, poles[2]).unwrap();
        let hq = canonical_h(&sys, 1, x).unwrap();
        let aq = &sys.residues()[1];
        let jump = &hq * (power(aq, c(1.0, 0.0), 1) - CMat::identity(2, 2)) * hq.try_inverse().unwrap();
        let id = CMat::identity(2, 2);
        let rhs = regularized_transport(&sys, &beta, &left, &id, 1e-12).unwrap()
            * jump
            * regularized_transport(&sys, &alpha, &id, &right, 1e-12).unwrap();
        let err = (lhs - rhs).norm();
        assert!(err < 1e-6, "{err}");
    }

    /// Projector onto the kernel of a rank-one 2×2 matrix (along a complement).
    fn kernel_projector(a: &CMat) -> CMat {
        // kernel vector k with a k = 0, complement e with a e ≠ 0
        let k = if a[(0, 1)].norm() + a[(1, 1)].norm() > 0.0 {
            nalgebra::DVector::from_vec(vec![a[(0, 1)] + a[(1, 1)], -(a[(0, 0)] + a[(1, 0)])])
        } else {
            nalgebra::DVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)])
        };
        let k = if (a * &k).norm() > 1e-12 {
            nalgebra::DVector::from_vec(vec![a[(0, 1)], -a[(0, 0)]])
        } else {
            k
        };
        // P = k wᵀ / (wᵀ k) with w ⟂ range-complement; choose w = conj(k)
        let w = k.map(|v| v.conj());
        let s = (w.transpose() * &k)[(0, 0)];
        &k * w.transpose() / s
    }
}
