//! Transforms: families `F_n : ℂⁿ → ℂ` with composition, inversion and a
//! Lie-polynomial test.
//!
//! The composite is
//! `(G∘F)_n(z) = Σ G_k(S_1, …, S_k) ∏_j F_{|B_j|}(B_j)` over ordered splittings
//! of `z` into consecutive blocks `B_1, …, B_k` with sums `S_j`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::mlogfun::{eval_l_by, eval_m, eval_q, eval_qtilde_by};
use crate::trees::{enumerate, tree_weight, PlaneTree};
use crate::{Error, Result, C64, TWO_PI_I};

type Evaluator = dyn Fn(&[C64]) -> Result<C64> + Send + Sync;

#[derive(Clone)]
pub struct Transform {
    name: String,
    zero_sum: bool,
    f: Arc<Evaluator>,
}

impl std::fmt::Debug for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transform")
            .field("name", &self.name)
            .field("zero_sum", &self.zero_sum)
            .finish()
    }
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

impl Transform {
    /// Wraps an evaluator. `zero_sum` records that `F_n` vanishes when the
    /// entries sum to zero and `n ≥ 2`.
    pub fn new<F>(name: &str, zero_sum: bool, f: F) -> Self
    where
        F: Fn(&[C64]) -> Result<C64> + Send + Sync + 'static,
    {
        Self {
            name: name.to_string(),
            zero_sum,
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn zero_sum_vanishing(&self) -> bool {
        self.zero_sum
    }

    /// `F_n(z)`; zero off `(ℂ*)ⁿ`.
    pub fn eval(&self, z: &[C64]) -> Result<C64> {
        if z.is_empty() {
            return Err(Error::Invalid("empty tuple".into()));
        }
        if z.iter().any(|w| *w == zero()) {
            return Ok(zero());
        }
        (self.f)(z)
    }

    /// `id_1 = 1`, `id_n = 0` otherwise.
    pub fn identity() -> Self {
        Self::scaled_identity(one())
    }

    /// `c · id`.
    pub fn scaled_identity(c: C64) -> Self {
        Self::new("id", true, move |z| Ok(if z.len() == 1 { c } else { zero() }))
    }

    /// Pointwise product `c · F`.
    pub fn scaled(&self, c: C64) -> Self {
        let f = self.clone();
        Self::new(
            &format!("{}*{c}", self.name),
            self.zero_sum,
            move |z| Ok(c * f.eval(z)?),
        )
    }

    /// Caches values keyed by the exact bits of the tuple.
    pub fn memoized(&self) -> Self {
        let memo = Memo::default();
        let f = self.clone();
        Self::new(&self.name, self.zero_sum, move |z| memo.get_or(z, |z| f.eval(z)))
    }

    /// `M_n` at tolerance `tol`.
    pub fn m(tol: f64) -> Self {
        Self::new("M", true, move |z| eval_m(z, tol)).memoized()
    }

    /// `L_n` at tolerance `tol`, built on a memoized `M`.
    pub fn l(tol: f64) -> Self {
        Self::l_over(&Self::m(tol))
    }

    /// `L_n` as the chain sum of the given `M`.
    pub fn l_over(m: &Transform) -> Self {
        let m = m.clone();
        Self::new("L", true, move |z| eval_l_by(z, &|w: &[C64]| m.eval(w))).memoized()
    }

    /// `Q̃_n` relative to the ray at angle `r·π`.
    pub fn qtilde(r: f64, tol: f64) -> Self {
        Self::qtilde_over(r, &Self::m(tol))
    }

    pub fn qtilde_over(r: f64, m: &Transform) -> Self {
        let m = m.clone();
        Self::new("Qtilde", true, move |z| eval_qtilde_by(z, r, &|w: &[C64]| m.eval(w))).memoized()
    }

    /// `Q_n` from the multiplier contour relative to the ray at angle `r·π`.
    pub fn q(r: f64, tol: f64) -> Self {
        Self::new("Q", true, move |z| eval_q(z, r, tol)).memoized()
    }
}

#[derive(Default)]
struct Memo {
    map: Mutex<HashMap<Vec<(u64, u64)>, C64>>,
}

impl Memo {
    fn get_or<F>(&self, z: &[C64], f: F) -> Result<C64>
    where
        F: FnOnce(&[C64]) -> Result<C64>,
    {
        let key: Vec<(u64, u64)> = z.iter().map(|w| (w.re.to_bits(), w.im.to_bits())).collect();
        if let Some(v) = self.map.lock().expect("memo lock").get(&key) {
            return Ok(*v);
        }
        // computed outside the lock so recursive evaluators can reenter
        let v = f(z)?;
        self.map.lock().expect("memo lock").insert(key, v);
        Ok(v)
    }
}

/// Calls `visit(cuts)` for every splitting `0 = c_0 < ⋯ < c_k = n`.
pub fn for_each_splitting<V>(n: usize, visit: &mut V) -> Result<()>
where
    V: FnMut(&[usize]) -> Result<()>,
{
    // bit i of the mask set means a cut after position i + 1
    for mask in 0u64..(1u64 << (n - 1)) {
        let mut cuts = Vec::with_capacity(n + 1);
        cuts.push(0);
        for i in 0..n - 1 {
            if mask >> i & 1 == 1 {
                cuts.push(i + 1);
            }
        }
        cuts.push(n);
        visit(&cuts)?;
    }
    Ok(())
}

fn block_sums(z: &[C64], cuts: &[usize]) -> Vec<C64> {
    cuts.windows(2).map(|w| z[w[0]..w[1]].iter().sum()).collect()
}

/// `G ∘ F`.
pub fn compose(g: &Transform, f: &Transform) -> Transform {
    let (g, f) = (g.clone(), f.clone());
    let name = format!("({})o({})", g.name, f.name);
    let zero_sum = g.zero_sum && f.zero_sum;
    Transform::new(&name, zero_sum, move |z| {
        let mut total = zero();
        for_each_splitting(z.len(), &mut |cuts| {
            let mut prod = one();
            for w in cuts.windows(2) {
                prod *= f.eval(&z[w[0]..w[1]])?;
                if prod == zero() {
                    return Ok(());
                }
            }
            total += g.eval(&block_sums(z, cuts))? * prod;
            Ok(())
        })?;
        Ok(total)
    })
}

/// Quasi-random probe points in the annulus `1/2 ≤ |z| ≤ 2`.
pub fn probe_points() -> Vec<C64> {
    let golden = 0.618_033_988_749_895_f64;
    (0..16)
        .map(|k| {
            let u = (k as f64 * golden).fract();
            let v = (k as f64 + 0.5) / 16.0;
            C64::from_polar(0.5 * 4f64.powf(v), std::f64::consts::TAU * u)
        })
        .collect()
}

/// Inverse by the inductive solver of `G ∘ F = id`.
pub fn invert(f: &Transform) -> Result<Transform> {
    for p in probe_points() {
        if f.eval(&[p])?.norm() == 0.0 {
            return Err(Error::NotInvertible { at: p });
        }
    }
    let inner = Arc::new(Inverse {
        f: f.clone(),
        memo: Memo::default(),
    });
    let name = format!("inv({})", f.name);
    Ok(Transform::new(&name, f.zero_sum, move |z| inner.eval(z)))
}

struct Inverse {
    f: Transform,
    memo: Memo,
}

impl Inverse {
    fn eval(&self, z: &[C64]) -> Result<C64> {
        if z.iter().any(|w| *w == zero()) {
            return Ok(zero());
        }
        self.memo.get_or(z, |z| self.solve(z))
    }

    fn solve(&self, z: &[C64]) -> Result<C64> {
        let n = z.len();
        let mut diag = one();
        for &w in z {
            let v = self.f.eval(&[w])?;
            if v == zero() {
                return Err(Error::NotInvertible { at: w });
            }
            diag *= v;
        }
        if n == 1 {
            return Ok(one() / diag);
        }
        let mut rest = zero();
        for_each_splitting(n, &mut |cuts| {
            let k = cuts.len() - 1;
            if k == n {
                return Ok(());
            }
            let mut prod = one();
            for w in cuts.windows(2) {
                prod *= self.f.eval(&z[w[0]..w[1]])?;
                if prod == zero() {
                    return Ok(());
                }
            }
            rest += self.eval(&block_sums(z, cuts))? * prod;
            Ok(())
        })?;
        Ok(-rest / diag)
    }
}

/// Inverse of a transform with `F_1 ≡ 1` by the tree formula
/// `(F⁻¹)_n = Σ_T (-1)^{|V(T)|} F_T`.
pub fn invert_unit(f: &Transform) -> Result<Transform> {
    for p in probe_points() {
        let v = f.eval(&[p])?;
        if (v - one()).norm() > 1e-12 {
            return Err(Error::NotUnit { at: p, value: v });
        }
    }
    let f = f.clone();
    let trees: Arc<Mutex<HashMap<usize, Arc<Vec<PlaneTree>>>>> = Arc::default();
    let name = format!("treeinv({})", f.name);
    let zero_sum = f.zero_sum;
    Ok(Transform::new(&name, zero_sum, move |z| {
        let n = z.len();
        let list = {
            let mut cache = trees.lock().expect("tree cache");
            match cache.get(&n) {
                Some(l) => l.clone(),
                None => {
                    let l = Arc::new(enumerate(n)?);
                    cache.insert(n, l.clone());
                    l
                }
            }
        };
        if n == 1 {
            return Ok(one());
        }
        let mut total = zero();
        for t in list.iter() {
            let sign = if t.vertex_count() % 2 == 0 { 1.0 } else { -1.0 };
            total += tree_weight(t, &f, z)? * sign;
        }
        Ok(total)
    }))
}

/// `J = L⁻¹` by the tree formula,
/// `J_n = (2πi)^{-n} Σ_T (-1)^{|V|} ∏_v L_v / (2πi)`.
pub fn make_j(tol: f64) -> Transform {
    make_j_over(&Transform::l(tol))
}

pub fn make_j_over(l: &Transform) -> Transform {
    let unit = invert_unit(&l.scaled(one() / TWO_PI_I)).expect("L_1 = 2πi");
    let t = Transform::new("J", true, move |z| Ok(unit.eval(z)? / TWO_PI_I.powi(z.len() as i32)));
    t.memoized()
}

type Poly = HashMap<Vec<u8>, C64>;

fn add_into(acc: &mut Poly, word: Vec<u8>, c: C64) {
    *acc.entry(word).or_insert(zero()) += c;
}

/// Left-normed bracketing `x_1 x_2 ⋯ x_n ↦ [⋯[x_1, x_2], …, x_n]`.
fn dynkin(word: &[u8]) -> Poly {
    let mut p: Poly = HashMap::new();
    p.insert(vec![word[0]], one());
    for &x in &word[1..] {
        let mut next: Poly = HashMap::new();
        for (w, c) in p {
            let mut right = w.clone();
            right.push(x);
            add_into(&mut next, right, c);
            let mut left = vec![x];
            left.extend_from_slice(&w);
            add_into(&mut next, left, -c);
        }
        p = next;
    }
    p
}

fn permutations(n: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut cur: Vec<u8> = (0..n as u8).collect();
    fn rec(k: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if k == cur.len() {
            out.push(cur.clone());
            return;
        }
        for i in k..cur.len() {
            cur.swap(k, i);
            rec(k + 1, cur, out);
            cur.swap(k, i);
        }
    }
    rec(0, &mut cur, &mut out);
    out
}

/// Whether `Σ_σ F_n(z_σ) x_σ(1)⋯x_σ(n)` is a Lie polynomial, tested by the
/// Dynkin criterion `D(P) = n·P` with coefficient tolerance `n!·10·tol`.
pub fn lie_transform_check(f: &Transform, n: usize, z: &[C64], tol: f64) -> bool {
    if n == 0 || n > 6 || z.len() != n {
        return false;
    }
    let mut p: Poly = HashMap::new();
    for sigma in permutations(n) {
        let zs: Vec<C64> = sigma.iter().map(|&i| z[i as usize]).collect();
        match f.eval(&zs) {
            Ok(v) => {
                p.insert(sigma, v);
            }
            Err(_) => return false,
        }
    }
    let mut d: Poly = HashMap::new();
    for (w, c) in &p {
        for (dw, dc) in dynkin(w) {
            add_into(&mut d, dw, dc * c);
        }
    }
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    let bound = fact * 10.0 * tol;
    for (w, c) in &d {
        let target = p.get(w).copied().unwrap_or(zero()) * n as f64;
        if (c - target).norm() > bound {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tuple(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
        (0..n)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn poly_transform() -> Transform {
        // a cheap transform with F_1 = 1 and nontrivial higher terms
        Transform::new("poly", false, |z: &[C64]| {
            if z.len() == 1 {
                return Ok(one());
            }
            let mut acc = C64::new(0.3, 0.1);
            for (i, w) in z.iter().enumerate() {
                acc += w * (i as f64 + 1.0) * 0.7 + w * w * 0.2;
            }
            Ok(acc / z.len() as f64)
        })
    }

    #[test]
    fn identity_is_neutral() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let f = poly_transform();
        let left = compose(&Transform::identity(), &f);
        let right = compose(&f, &Transform::identity());
        for n in 1..=4 {
            for _ in 0..10 {
                let z = random_tuple(&mut rng, n);
                let v = f.eval(&z).unwrap();
                assert!((left.eval(&z).unwrap() - v).norm() < 1e-12);
                assert!((right.eval(&z).unwrap() - v).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn single_block_composite() {
        let f = Transform::new("a", false, |_| Ok(C64::new(2.0, 1.0)));
        let g = Transform::new("b", false, |_| Ok(C64::new(0.0, 3.0)));
        let v = compose(&g, &f).eval(&[C64::new(1.0, 0.0)]).unwrap();
        assert!((v - C64::new(2.0, 1.0) * C64::new(0.0, 3.0)).norm() < 1e-15);
    }

    #[test]
    fn tree_and_inductive_inverses_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let f = poly_transform();
        let a = invert_unit(&f).unwrap();
        let b = invert(&f).unwrap();
        for n in 1..=5 {
            let z = random_tuple(&mut rng, n);
            let (x, y) = (a.eval(&z).unwrap(), b.eval(&z).unwrap());
            assert!((x - y).norm() < 1e-10 * (1.0 + x.norm()), "n = {n}: {x} vs {y}");
        }
    }

    #[test]
    fn inverse_is_two_sided() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = poly_transform();
        let g = invert(&f).unwrap();
        let gf = compose(&g, &f);
        let fg = compose(&f, &g);
        for n in 1..=5 {
            let z = random_tuple(&mut rng, n);
            let expect = if n == 1 { one() } else { zero() };
            assert!((gf.eval(&z).unwrap() - expect).norm() < 1e-10);
            assert!((fg.eval(&z).unwrap() - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn second_order_tree_inverse_is_negation() {
        let f = poly_transform();
        let g = invert_unit(&f).unwrap();
        let z = [C64::new(0.3, 0.2), C64::new(-0.5, 0.9)];
        assert!((g.eval(&z).unwrap() + f.eval(&z).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn third_order_tree_inverse() {
        let f = poly_transform();
        let g = invert_unit(&f).unwrap();
        let z = [C64::new(0.3, 0.2), C64::new(-0.5, 0.9), C64::new(0.1, -0.4)];
        let f2 = |a: C64, b: C64| f.eval(&[a, b]).unwrap();
        let expect =
            f2(z[0] + z[1], z[2]) * f2(z[0], z[1]) + f2(z[0], z[1] + z[2]) * f2(z[1], z[2]) - f.eval(&z).unwrap();
        assert!((g.eval(&z).unwrap() - expect).norm() < 1e-14);
    }

    #[test]
    fn identity_inverts_to_itself() {
        let g = invert_unit(&Transform::identity()).unwrap();
        assert!((g.eval(&[C64::new(0.4, 0.1)]).unwrap() - one()).norm() < 1e-15);
        assert_eq!(g.eval(&[C64::new(0.4, 0.1), C64::new(1.0, 0.0)]).unwrap(), zero());
    }

    #[test]
    fn scaled_identity_inverse() {
        let c = C64::new(0.5, -2.0);
        let g = invert(&Transform::scaled_identity(c)).unwrap();
        let z = [C64::new(0.4, 0.1)];
        assert!((g.eval(&z).unwrap() - one() / c).norm() < 1e-15);
        assert_eq!(g.eval(&[z[0], z[0]]).unwrap(), zero());
    }

    #[test]
    fn non_unit_is_rejected() {
        assert!(matches!(
            invert_unit(&Transform::scaled_identity(C64::new(2.0, 0.0))),
            Err(Error::NotUnit { .. })
        ));
        assert!(matches!(
            invert(&Transform::scaled_identity(zero())),
            Err(Error::NotInvertible { .. })
        ));
    }

    #[test]
    fn j_low_orders() {
        let tol = 1e-12;
        let j = make_j(tol);
        let z1 = [C64::new(0.3, 0.8)];
        assert!((j.eval(&z1).unwrap() - one() / TWO_PI_I).norm() < 1e-15);
        let z = [C64::new(-1.0, 0.3), C64::new(0.4, 1.0)];
        let l2 = Transform::l(tol).eval(&z).unwrap();
        let expect = -l2 / TWO_PI_I.powi(3);
        assert!((j.eval(&z).unwrap() - expect).norm() < 1e-12);
        let inductive = invert(&Transform::l(tol)).unwrap();
        assert!((inductive.eval(&z).unwrap() - expect).norm() < 1e-12);
    }

    #[test]
    fn j_inverts_l() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let l = Transform::l(1e-12);
        let jl = compose(&make_j_over(&l), &l);
        for n in 1..=4 {
            let z = random_tuple(&mut rng, n);
            let expect = if n == 1 { one() } else { zero() };
            let v = jl.eval(&z).unwrap();
            assert!((v - expect).norm() < 1e-8, "n = {n}: {v}");
        }
    }

    #[test]
    fn symmetric_words_are_not_lie() {
        let f = Transform::new("one", false, |_| Ok(one()));
        let z = [C64::new(0.3, 0.1), C64::new(-0.2, 0.5)];
        assert!(!lie_transform_check(&f, 2, &z, 1e-12));
    }

    #[test]
    fn l_is_lie_at_order_two() {
        let z = [C64::new(0.3, 0.1), C64::new(-0.2, 0.5)];
        assert!(lie_transform_check(&Transform::l(1e-12), 2, &z, 1e-12));
    }

    #[test]
    fn m_fails_lie_test_on_aligned_tuple() {
        // s_1 lies on the open segment (0, s_2)
        let z = [C64::new(0.5, 0.5), C64::new(1.0, 1.0)];
        assert!(!lie_transform_check(&Transform::m(1e-12), 2, &z, 1e-12));
    }

    #[test]
    fn dynkin_of_lie_word_scales_by_degree() {
        // [x0, x1] = x0 x1 - x1 x0 must satisfy D(P) = 2P
        let mut d: Poly = HashMap::new();
        for (w, c) in [(vec![0u8, 1], one()), (vec![1u8, 0], -one())] {
            for (dw, dc) in dynkin(&w) {
                add_into(&mut d, dw, dc * c);
            }
        }
        assert!((d[&vec![0u8, 1]] - 2.0).norm() < 1e-15);
        assert!((d[&vec![1u8, 0]] + 2.0).norm() < 1e-15);
    }
}
