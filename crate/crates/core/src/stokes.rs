//! Stokes factors, the Stokes map and its inverse, Stokes multipliers, and
//! the conversions between factor data `δ` and multiplier data `κ`.
//!
//! Every series has the shape
//! `x_γ = Σ_n Σ_{α_1+⋯+α_n=γ} F_n(Z(α_1), …, Z(α_n)) f_{α_1}⋯f_{α_n}`
//! for a transform `F`; in a matrix realization the words `α_1⋯α_n` are
//! chains of blocks `b_0 → b_1 → ⋯ → b_n` and `γ = (b_0, b_n)`.

use std::collections::BTreeMap;

use crate::complexpath::ANGLE_TOL;
use crate::liealg::{angle_distance, GradedElement, GradedSystem, Kind, Ray, Root};
use crate::mlogfun::GUARD;
use crate::transforms::{make_j_over, Transform};
use crate::{CMat, Error, Result, C64};

#[derive(Debug, Clone, Copy)]
pub struct TruncationPolicy {
    /// Highest word length `n` kept.
    pub max_order: usize,
    /// Evaluation tolerance of the coefficient functions.
    pub tol: f64,
    /// Fail with `NotConverged` unless the last order contributes less than `tol`.
    pub convergence_check: bool,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            max_order: 8,
            tol: 1e-10,
            convergence_check: false,
        }
    }
}

impl TruncationPolicy {
    pub fn new(max_order: usize, tol: f64) -> Result<Self> {
        if max_order == 0 {
            return Err(Error::Invalid("truncation order must be positive".into()));
        }
        Ok(Self {
            max_order,
            tol,
            convergence_check: false,
        })
    }

    pub fn checked(mut self) -> Self {
        self.convergence_check = true;
        self
    }
}

/// Result of a truncated series together with the size of each order.
#[derive(Debug, Clone)]
pub struct Series {
    pub value: GradedElement,
    /// `order_norms[n-1]`: max entry of the order-`n` contribution.
    pub order_norms: Vec<f64>,
}

fn max_entry(m: &CMat) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Sums `(-1)^{n-1} F_n(Z(α_1), …, Z(α_n)) f_{α_1}⋯f_{α_n}` over block
/// chains whose endpoint pair is accepted by `keep`.
///
/// The sign comes from reversing the segment between two poles of the dual
/// Fuchsian system, which multiplies an iterated integral of length `n - 1`
/// by `(-1)^{n-1}`. It is checked against the Laplace oracle.
pub fn chain_series<P>(
    sys: &GradedSystem,
    f: &GradedElement,
    coeff: &Transform,
    policy: &TruncationPolicy,
    kind: Kind,
    keep: P,
) -> Result<Series>
where
    P: Fn(Root) -> bool,
{
    let mut out = GradedElement::zero(sys, kind);
    let mut order_contrib: Vec<CMat> = vec![CMat::zeros(sys.dim(), sys.dim()); policy.max_order];
    let mut next: BTreeMap<usize, Vec<(usize, &CMat)>> = BTreeMap::new();
    for (&(i, j), m) in f.components() {
        if i != j && sys.has_root((i, j)) && max_entry(m) > 0.0 {
            next.entry(i).or_default().push((j, m));
        }
    }

    struct Walk<'a, P> {
        sys: &'a GradedSystem,
        next: &'a BTreeMap<usize, Vec<(usize, &'a CMat)>>,
        coeff: &'a Transform,
        max_order: usize,
        keep: &'a P,
        out: &'a mut GradedElement,
        order_contrib: &'a mut Vec<CMat>,
        zs: Vec<C64>,
    }

    impl<P: Fn(Root) -> bool> Walk<'_, P> {
        fn go(&mut self, start: usize, at: usize, prod: &CMat) -> Result<()> {
            let n = self.zs.len();
            if n > 0 && at != start && self.keep((start, at)) {
                let c = self.coeff.eval(&self.zs)?;
                let c = if n.is_multiple_of(2) { -c } else { c };
                if c != C64::new(0.0, 0.0) {
                    let term = prod * c;
                    self.order_contrib[n - 1] += &term;
                    self.out.add_to((start, at), &term);
                }
            }
            if n == self.max_order {
                return Ok(());
            }
            let Some(steps) = self.next.get(&at) else {
                return Ok(());
            };
            for &(to, m) in steps {
                let p = prod * m;
                if max_entry(&p) == 0.0 {
                    continue;
                }
                self.zs.push(self.sys.eigenvalue(at) - self.sys.eigenvalue(to));
                let r = self.go(start, to, &p);
                self.zs.pop();
                r?;
            }
            Ok(())
        }

        fn keep(&self, a: Root) -> bool {
            (self.keep)(a)
        }
    }

    let id = CMat::identity(sys.dim(), sys.dim());
    for b in 0..sys.block_count() {
        let mut walk = Walk {
            sys,
            next: &next,
            coeff,
            max_order: policy.max_order,
            keep: &keep,
            out: &mut out,
            order_contrib: &mut order_contrib,
            zs: Vec::new(),
        };
        let p = sys.projector(b);
        let start = &id * &p;
        walk.go(b, b, &start)?;
    }
    let order_norms: Vec<f64> = order_contrib.iter().map(max_entry).collect();
    if policy.convergence_check {
        let last = *order_norms.last().expect("order >= 1");
        if !(last < policy.tol) {
            return Err(Error::NotConverged {
                order: policy.max_order,
                norm: last,
            });
        }
    }
    Ok(Series {
        value: out,
        order_norms,
    })
}

/// `δ` on the Stokes ray `ℓ`: `S_ℓ = 1 + Σ_γ δ_γ` with coefficients `M_n`.
pub fn stokes_factor_series(
    sys: &GradedSystem,
    f: &GradedElement,
    ray: &Ray,
    policy: &TruncationPolicy,
) -> Result<GradedElement> {
    stokes_factor_series_with(sys, f, ray, policy, &Transform::m(policy.tol))
}

pub fn stokes_factor_series_with(
    sys: &GradedSystem,
    f: &GradedElement,
    ray: &Ray,
    policy: &TruncationPolicy,
    m: &Transform,
) -> Result<GradedElement> {
    Ok(chain_series(sys, f, m, policy, Kind::Delta, |a| ray.contains(sys.z_of(a)))?.value)
}

/// `S_ℓ` as a matrix.
pub fn stokes_factor_matrix(
    sys: &GradedSystem,
    f: &GradedElement,
    ray: &Ray,
    policy: &TruncationPolicy,
) -> Result<CMat> {
    let d = stokes_factor_series(sys, f, ray, policy)?;
    Ok(CMat::identity(sys.dim(), sys.dim()) + d.to_matrix())
}

/// `ε = 𝒮(f)` with coefficients `L_n`.
pub fn stokes_map(sys: &GradedSystem, f: &GradedElement, policy: &TruncationPolicy) -> Result<GradedElement> {
    stokes_map_with(sys, f, policy, &Transform::l(policy.tol))
}

pub fn stokes_map_with(
    sys: &GradedSystem,
    f: &GradedElement,
    policy: &TruncationPolicy,
    l: &Transform,
) -> Result<GradedElement> {
    Ok(chain_series(sys, f, l, policy, Kind::Epsilon, |_| true)?.value)
}

/// `f = 𝒮⁻¹(ε)` with coefficients `J_n`.
pub fn stokes_inverse(sys: &GradedSystem, eps: &GradedElement, policy: &TruncationPolicy) -> Result<GradedElement> {
    stokes_inverse_with(sys, eps, policy, &make_j_over(&Transform::l(policy.tol)))
}

pub fn stokes_inverse_with(
    sys: &GradedSystem,
    eps: &GradedElement,
    policy: &TruncationPolicy,
    j: &Transform,
) -> Result<GradedElement> {
    Ok(chain_series(sys, eps, j, policy, Kind::F, |_| true)?.value)
}

/// Stokes multipliers `(S_+, S_-)` for the ray `r`.
#[derive(Debug, Clone)]
pub struct Multipliers {
    pub plus: CMat,
    pub minus: CMat,
}

fn check_pair_admissible(sys: &GradedSystem, r: &Ray) -> Result<()> {
    if !sys.is_admissible(r)? || !sys.is_admissible(&r.opposite())? {
        return Err(Error::InadmissibleRay { angle: r.angle });
    }
    Ok(())
}

/// Stokes rays split into those at angles in `(θ, θ+1)` and `(θ+1, θ+2)`,
/// each in increasing angle.
pub fn rays_by_half(sys: &GradedSystem, r: &Ray) -> Result<(Vec<Ray>, Vec<Ray>)> {
    let mut rel: Vec<(f64, Ray)> = sys
        .stokes_rays()?
        .into_iter()
        .map(|l| ((l.angle - r.angle).rem_euclid(2.0), l))
        .collect();
    rel.sort_by(|a, b| a.0.total_cmp(&b.0));
    let upper = rel.iter().filter(|(a, _)| *a < 1.0).map(|x| x.1).collect();
    let lower = rel.iter().filter(|(a, _)| *a > 1.0).map(|x| x.1).collect();
    Ok((upper, lower))
}

/// `S_+ = S_{ℓ_{m1}}⋯S_{ℓ_1}` and `S_- = S_{ℓ_{m1+1}}^{-1}⋯S_{ℓ_{m1+m2}}^{-1}`.
pub fn multipliers_from_factors(
    sys: &GradedSystem,
    f: &GradedElement,
    r: &Ray,
    policy: &TruncationPolicy,
) -> Result<Multipliers> {
    check_pair_admissible(sys, r)?;
    let m = Transform::m(policy.tol);
    let factor = |l: &Ray| -> Result<CMat> {
        let d = stokes_factor_series_with(sys, f, l, policy, &m)?;
        Ok(CMat::identity(sys.dim(), sys.dim()) + d.to_matrix())
    };
    let (upper, lower) = rays_by_half(sys, r)?;
    let n = sys.dim();
    let mut plus = CMat::identity(n, n);
    for l in &upper {
        plus = factor(l)? * plus;
    }
    let mut minus = CMat::identity(n, n);
    for l in &lower {
        let s = factor(l)?;
        let inv = s.try_inverse().ok_or(Error::Invalid("singular Stokes factor".into()))?;
        minus *= inv;
    }
    Ok(Multipliers { plus, minus })
}

/// Multipliers from the series with coefficients `Q_n`: the part with
/// `Z(γ) ∈ i·H_r` is `S_+ - 1`, the part with `Z(γ) ∈ -i·H_r` is `S_-^{-1} - 1`.
pub fn multipliers_series(
    sys: &GradedSystem,
    f: &GradedElement,
    r: &Ray,
    policy: &TruncationPolicy,
) -> Result<Multipliers> {
    multipliers_series_with(sys, f, r, policy, &Transform::q(r.angle, policy.tol))
}

pub fn multipliers_series_with(
    sys: &GradedSystem,
    f: &GradedElement,
    r: &Ray,
    policy: &TruncationPolicy,
    q: &Transform,
) -> Result<Multipliers> {
    check_pair_admissible(sys, r)?;
    let kappa = chain_series(sys, f, q, policy, Kind::Kappa, |_| true)?.value;
    Ok(multipliers_from_kappa(sys, &kappa, r))
}

/// Splits `κ` into `(S_+, S_-)`.
pub fn multipliers_from_kappa(sys: &GradedSystem, kappa: &GradedElement, r: &Ray) -> Multipliers {
    let n = sys.dim();
    let mut plus = CMat::identity(n, n);
    let mut minus_inv = CMat::identity(n, n);
    for (&a, m) in kappa.components() {
        if a.0 == a.1 {
            continue;
        }
        if r.left_of(sys.z_of(a)) {
            plus += m;
        } else {
            minus_inv += m;
        }
    }
    let minus = minus_inv.try_inverse().expect("unipotent");
    Multipliers { plus, minus }
}

/// Scalars or matrices that `κ`/`δ` components may take.
pub trait Coeff: Clone {
    fn mul(&self, other: &Self) -> Self;
    fn add_assign(&mut self, other: &Self);
    fn neg(&self) -> Self;
}

impl Coeff for C64 {
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }
    fn neg(&self) -> Self {
        -self
    }
}

impl Coeff for CMat {
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }
    fn neg(&self) -> Self {
        -self
    }
}

/// Weight arithmetic for the Reineke conversions.
pub struct WeightOps<'a, K> {
    /// Phase `φ(γ) ∈ (θ, θ+1)` in units of `π`, or `None` off the half-plane.
    pub phase: &'a dyn Fn(&K) -> Option<f64>,
    /// `γ + γ'`, or `None` if the product vanishes identically.
    pub add: &'a dyn Fn(&K, &K) -> Option<K>,
    /// Whether a weight lies in the truncation window.
    pub in_window: &'a dyn Fn(&K) -> bool,
    /// Longest product considered.
    pub max_len: usize,
}

/// `Some(true)` if `a > b`, `Some(false)` if `a < b` or equal; errors on near ties.
fn phase_greater(a: f64, b: f64) -> Result<bool> {
    let d = angle_distance(a, b);
    if d <= ANGLE_TOL / std::f64::consts::PI {
        return Ok(false);
    }
    if d < GUARD {
        return Err(Error::NonGeneric(format!("phases {a} and {b} nearly tie")));
    }
    Ok(a > b)
}

fn check_window<K, V>(x: &BTreeMap<K, V>, ops: &WeightOps<K>, height: usize) -> Result<()> {
    if x.keys().any(|k| !(ops.in_window)(k)) {
        return Err(Error::WindowTooSmall { height });
    }
    Ok(())
}

/// Products `x_{γ_1}⋯x_{γ_n}` over all sequences from the support of `x`,
/// passed to `visit` with the partial sums.
fn for_each_word<K, V, F>(x: &BTreeMap<K, V>, ops: &WeightOps<K>, visit: &mut F) -> Result<()>
where
    K: Ord + Clone,
    V: Coeff,
    F: FnMut(&[K], &[f64], &V) -> Result<()>,
{
    let items: Vec<(&K, &V, f64)> = x
        .iter()
        .filter_map(|(k, v)| (ops.phase)(k).map(|p| (k, v, p)))
        .collect();
    fn rec<K: Ord + Clone, V: Coeff, F: FnMut(&[K], &[f64], &V) -> Result<()>>(
        items: &[(&K, &V, f64)],
        ops: &WeightOps<K>,
        sums: &mut Vec<K>,
        phases: &mut Vec<f64>,
        prod: &V,
        visit: &mut F,
    ) -> Result<()> {
        visit(sums, phases, prod)?;
        if sums.len() == ops.max_len {
            return Ok(());
        }
        let last = sums.last().cloned().expect("nonempty");
        for &(k, v, p) in items {
            let Some(s) = (ops.add)(&last, k) else { continue };
            if !(ops.in_window)(&s) {
                continue;
            }
            let Some(ps) = (ops.phase)(&s) else { continue };
            sums.push(s);
            phases.push(p);
            let _ = ps;
            let r = rec(items, ops, sums, phases, &prod.mul(v), visit);
            sums.pop();
            phases.pop();
            r?;
        }
        Ok(())
    }
    for &(k, v, p) in &items {
        let mut sums = vec![k.clone()];
        let mut phases = vec![p];
        rec(&items, ops, &mut sums, &mut phases, v, visit)?;
    }
    Ok(())
}

/// `κ_γ = Σ δ_{γ_1}⋯δ_{γ_n}` over `φ(γ_1) > ⋯ > φ(γ_n)`.
pub fn reineke_forward<K, V>(delta: &BTreeMap<K, V>, ops: &WeightOps<K>, height: usize) -> Result<BTreeMap<K, V>>
where
    K: Ord + Clone,
    V: Coeff,
{
    check_window(delta, ops, height)?;
    let mut out: BTreeMap<K, V> = BTreeMap::new();
    // sequences are pruned as soon as the phase condition fails
    let items: Vec<(&K, &V, f64)> = delta
        .iter()
        .filter_map(|(k, v)| (ops.phase)(k).map(|p| (k, v, p)))
        .collect();
    fn rec<K: Ord + Clone, V: Coeff>(
        items: &[(&K, &V, f64)],
        ops: &WeightOps<K>,
        sum: &K,
        last_phase: f64,
        len: usize,
        prod: &V,
        out: &mut BTreeMap<K, V>,
    ) -> Result<()> {
        match out.get_mut(sum) {
            Some(acc) => acc.add_assign(prod),
            None => {
                out.insert(sum.clone(), prod.clone());
            }
        }
        if len == ops.max_len {
            return Ok(());
        }
        for &(k, v, p) in items {
            if !phase_greater(last_phase, p)? {
                continue;
            }
            let Some(s) = (ops.add)(sum, k) else { continue };
            if !(ops.in_window)(&s) {
                continue;
            }
            rec(items, ops, &s, p, len + 1, &prod.mul(v), out)?;
        }
        Ok(())
    }
    for &(k, v, p) in &items {
        rec(&items, ops, k, p, 1, v, &mut out)?;
    }
    Ok(out)
}

/// `δ_γ = Σ (-1)^{n-1} κ_{γ_1}⋯κ_{γ_n}` over `φ(γ_1+⋯+γ_i) > φ(γ)` for `i < n`.
pub fn reineke_backward<K, V>(kappa: &BTreeMap<K, V>, ops: &WeightOps<K>, height: usize) -> Result<BTreeMap<K, V>>
where
    K: Ord + Clone,
    V: Coeff,
{
    check_window(kappa, ops, height)?;
    let mut out: BTreeMap<K, V> = BTreeMap::new();
    for_each_word(kappa, ops, &mut |sums: &[K], _phases: &[f64], prod: &V| {
        let n = sums.len();
        let total = &sums[n - 1];
        let Some(pt) = (ops.phase)(total) else {
            return Ok(());
        };
        for s in &sums[..n - 1] {
            match (ops.phase)(s) {
                Some(ps) if phase_greater(ps, pt)? => {}
                _ => return Ok(()),
            }
        }
        let term = if n % 2 == 1 { prod.clone() } else { prod.neg() };
        match out.get_mut(total) {
            Some(acc) => acc.add_assign(&term),
            None => {
                out.insert(total.clone(), term);
            }
        }
        Ok(())
    })?;
    Ok(out)
}

fn block_ops<'a>(
    sys: &'a GradedSystem,
    r: &'a Ray,
    phase: &'a dyn Fn(&Root) -> Option<f64>,
    add: &'a dyn Fn(&Root, &Root) -> Option<Root>,
    window: &'a dyn Fn(&Root) -> bool,
) -> WeightOps<'a, Root> {
    let _ = r;
    WeightOps {
        phase,
        add,
        in_window: window,
        max_len: sys.block_count(),
    }
}

fn element_to_map(e: &GradedElement) -> BTreeMap<Root, CMat> {
    e.components().iter().map(|(k, v)| (*k, v.clone())).collect()
}

fn map_to_element(sys: &GradedSystem, m: BTreeMap<Root, CMat>, kind: Kind) -> GradedElement {
    let mut e = GradedElement::zero(sys, kind);
    for (k, v) in m {
        e.insert(k, v);
    }
    e
}

/// Block-level `κ` from the `δ` of all Stokes rays in one half-plane.
pub fn kappa_from_delta(sys: &GradedSystem, delta: &GradedElement, r: &Ray) -> Result<GradedElement> {
    convert_blocks(sys, delta, r, Kind::Kappa, true)
}

/// Inverse of [`kappa_from_delta`].
pub fn delta_from_kappa(sys: &GradedSystem, kappa: &GradedElement, r: &Ray) -> Result<GradedElement> {
    convert_blocks(sys, kappa, r, Kind::Delta, false)
}

fn convert_blocks(sys: &GradedSystem, x: &GradedElement, r: &Ray, kind: Kind, forward: bool) -> Result<GradedElement> {
    let phase = |a: &Root| -> Option<f64> {
        let z = sys.z_of(*a);
        if a.0 == a.1 || !r.left_of(z) {
            return None;
        }
        Some(r.angle + (Ray::angle_of(z) - r.angle).rem_euclid(2.0))
    };
    let add = |a: &Root, b: &Root| -> Option<Root> { (a.1 == b.0 && a.0 != b.1).then_some((a.0, b.1)) };
    let window = |a: &Root| a.0 != a.1 && r.left_of(sys.z_of(*a));
    let ops = block_ops(sys, r, &phase, &add, &window);
    let map = element_to_map(x);
    let out = if forward {
        reineke_forward(&map, &ops, sys.block_count())?
    } else {
        reineke_backward(&map, &ops, sys.block_count())?
    };
    Ok(map_to_element(sys, out, kind))
}

/// Lattice of nonnegative integer combinations of roots with given `Z`-values.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub basis_z: Vec<C64>,
    pub height: usize,
    pub ray: Ray,
}

impl Lattice {
    pub fn z(&self, w: &[i64]) -> C64 {
        w.iter().zip(&self.basis_z).map(|(&c, &z)| z * c as f64).sum()
    }

    pub fn phase(&self, w: &[i64]) -> Option<f64> {
        let z = self.z(w);
        if !self.ray.left_of(z) {
            return None;
        }
        Some(self.ray.angle + (Ray::angle_of(z) - self.ray.angle).rem_euclid(2.0))
    }

    fn in_window(&self, w: &[i64]) -> bool {
        w.iter().all(|&c| c >= 0) && w.iter().sum::<i64>() as usize <= self.height && w.iter().any(|&c| c > 0)
    }

    fn with_ops<T>(&self, run: impl FnOnce(&WeightOps<Vec<i64>>) -> T) -> T {
        let phase = |w: &Vec<i64>| self.phase(w);
        let add = |a: &Vec<i64>, b: &Vec<i64>| Some(a.iter().zip(b).map(|(x, y)| x + y).collect());
        let window = |w: &Vec<i64>| self.in_window(w);
        run(&WeightOps {
            phase: &phase,
            add: &add,
            in_window: &window,
            max_len: self.height,
        })
    }

    pub fn kappa_from_delta<V: Coeff>(&self, delta: &BTreeMap<Vec<i64>, V>) -> Result<BTreeMap<Vec<i64>, V>> {
        self.with_ops(|ops| reineke_forward(delta, ops, self.height))
    }

    pub fn delta_from_kappa<V: Coeff>(&self, kappa: &BTreeMap<Vec<i64>, V>) -> Result<BTreeMap<Vec<i64>, V>> {
        self.with_ops(|ops| reineke_backward(kappa, ops, self.height))
    }
}
