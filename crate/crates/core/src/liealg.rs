//! Graded matrix Lie algebras: block structure of a diagonal `Z`, roots,
//! Stokes rays, block-sparse elements and nilpotent `exp`/`log`.
//!
//! The root `α = (i, j)` is the block pair (row block `i`, column block `j`),
//! so `ad(Z)` acts on it by `Z(α) = z_i - z_j`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::complexpath::ANGLE_TOL;
use crate::mlogfun::GUARD;
use crate::{CMat, Error, Result, C64};

/// Diagonal `Z` with distinct block eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedSystem {
    dim: usize,
    eigenvalues: Vec<C64>,
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
    roots: Vec<(usize, usize)>,
}

pub type Root = (usize, usize);

impl GradedSystem {
    /// Groups equal diagonal entries of `Z` into blocks.
    pub fn from_diagonal(diag: &[C64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::Invalid("empty diagonal".into()));
        }
        let mut eigenvalues: Vec<C64> = Vec::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut block_of = Vec::with_capacity(diag.len());
        for (k, &z) in diag.iter().enumerate() {
            match eigenvalues.iter().position(|&w| w == z) {
                Some(b) => {
                    blocks[b].push(k);
                    block_of.push(b);
                }
                None => {
                    eigenvalues.push(z);
                    blocks.push(vec![k]);
                    block_of.push(eigenvalues.len() - 1);
                }
            }
        }
        let m = eigenvalues.len();
        let roots = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        Ok(Self {
            dim: diag.len(),
            eigenvalues,
            blocks,
            block_of,
            roots,
        })
    }

    /// Contiguous blocks with the given eigenvalues and multiplicities.
    pub fn new(eigenvalues: &[C64], multiplicities: &[usize]) -> Result<Self> {
        if eigenvalues.len() != multiplicities.len() || multiplicities.contains(&0) {
            return Err(Error::Invalid("eigenvalue/multiplicity mismatch".into()));
        }
        for (i, a) in eigenvalues.iter().enumerate() {
            if eigenvalues[i + 1..].contains(a) {
                return Err(Error::Invalid(format!("repeated block eigenvalue {a}")));
            }
        }
        let diag: Vec<C64> = eigenvalues
            .iter()
            .zip(multiplicities)
            .flat_map(|(&z, &k)| std::iter::repeat_n(z, k))
            .collect();
        Self::from_diagonal(&diag)
    }

    /// Restricts to the subalgebra spanned by the diagonal blocks and the
    /// roots accepted by `keep` (e.g. a Borel subalgebra).
    pub fn restrict_roots<F: Fn(Root) -> bool>(mut self, keep: F) -> Self {
        self.roots.retain(|&a| keep(a));
        self
    }

    /// Upper-triangular Borel subalgebra: roots `(i, j)` with `i < j`.
    pub fn borel(self) -> Self {
        self.restrict_roots(|(i, j)| i < j)
    }

    /// Same blocks and roots with new block eigenvalues.
    pub fn with_eigenvalues(&self, z: &[C64]) -> Result<Self> {
        if z.len() != self.eigenvalues.len() {
            return Err(Error::Invalid(format!(
                "expected {} eigenvalues, got {}",
                self.eigenvalues.len(),
                z.len()
            )));
        }
        for (i, a) in z.iter().enumerate() {
            if z[i + 1..].contains(a) {
                return Err(Error::Invalid(format!("repeated block eigenvalue {a}")));
            }
        }
        Ok(Self {
            eigenvalues: z.to_vec(),
            ..self.clone()
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block_count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, block: usize) -> C64 {
        self.eigenvalues[block]
    }

    /// Matrix indices of a block.
    pub fn block(&self, b: usize) -> &[usize] {
        &self.blocks[b]
    }

    pub fn block_of(&self, index: usize) -> usize {
        self.block_of[index]
    }

    pub fn multiplicities(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// Roots with nonzero `Z(α)`; all roots, since block eigenvalues are distinct.
    pub fn roots(&self) -> &[Root] {
        &self.roots
    }

    pub fn has_root(&self, a: Root) -> bool {
        self.roots.contains(&a)
    }

    pub fn z_of(&self, a: Root) -> C64 {
        self.eigenvalues[a.0] - self.eigenvalues[a.1]
    }

    pub fn z_matrix(&self) -> CMat {
        CMat::from_fn(self.dim, self.dim, |r, c| {
            if r == c {
                self.eigenvalues[self.block_of[r]]
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// Orthogonal projector onto a block.
    pub fn projector(&self, b: usize) -> CMat {
        let mut p = CMat::zeros(self.dim, self.dim);
        for &k in &self.blocks[b] {
            p[(k, k)] = C64::new(1.0, 0.0);
        }
        p
    }

    /// `P_i M P_j`.
    pub fn block_part(&self, m: &CMat, a: Root) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        for &r in &self.blocks[a.0] {
            for &c in &self.blocks[a.1] {
                out[(r, c)] = m[(r, c)];
            }
        }
        out
    }

    /// Largest `|z_i - z_j|`.
    pub fn spread(&self) -> f64 {
        let mut s: f64 = 0.0;
        for a in &self.eigenvalues {
            for b in &self.eigenvalues {
                s = s.max((a - b).norm());
            }
        }
        s
    }

    /// Distinct Stokes rays `ℝ_{>0}·Z(α)`, sorted by angle in `[0, 2)`.
    pub fn stokes_rays(&self) -> Result<Vec<Ray>> {
        let mut angles: Vec<f64> = self.roots.iter().map(|&a| Ray::angle_of(self.z_of(a))).collect();
        angles.sort_by(f64::total_cmp);
        let mut rays: Vec<Ray> = Vec::new();
        for a in angles {
            if let Some(last) = rays.last() {
                let d = angle_distance(a, last.angle);
                if d <= ANGLE_TOL / PI {
                    continue;
                }
                if d <= GUARD {
                    return Err(Error::NonGeneric(format!(
                        "Stokes rays at {a}π and {}π nearly coincide",
                        last.angle
                    )));
                }
            }
            rays.push(Ray::new(a));
        }
        if rays.len() >= 2 {
            let (first, last) = (rays[0].angle, rays[rays.len() - 1].angle);
            if angle_distance(first, last) <= ANGLE_TOL / PI {
                rays.pop();
            }
        }
        Ok(rays)
    }

    /// Whether a ray avoids every Stokes ray.
    pub fn is_admissible(&self, r: &Ray) -> Result<bool> {
        Ok(self
            .stokes_rays()?
            .iter()
            .all(|l| angle_distance(l.angle, r.angle) > ANGLE_TOL / PI))
    }
}

/// Distance between two angles in units of `π`, modulo 2.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0);
    d.min(2.0 - d)
}

/// The ray `ℝ_{>0}·e^{iπ·angle}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub angle: f64,
}

impl Ray {
    pub fn new(angle: f64) -> Self {
        Self {
            angle: angle.rem_euclid(2.0),
        }
    }

    /// Angle of `w` in `[0, 2)`, units of `π`.
    pub fn angle_of(w: C64) -> f64 {
        (w.arg() / PI).rem_euclid(2.0)
    }

    pub fn direction(&self) -> C64 {
        C64::from_polar(1.0, PI * self.angle)
    }

    pub fn opposite(&self) -> Self {
        Self::new(self.angle + 1.0)
    }

    /// `w ∈ ℓ` up to the angular tolerance.
    pub fn contains(&self, w: C64) -> bool {
        w.norm() > 0.0 && angle_distance(Self::angle_of(w), self.angle) <= ANGLE_TOL / PI
    }

    /// `w` in the open half-plane `i·H_r` to the left of the ray.
    pub fn left_of(&self, w: C64) -> bool {
        let q = w / self.direction();
        q.im > ANGLE_TOL * q.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    F,
    Epsilon,
    Delta,
    Kappa,
}

/// Block-sparse element `Σ_α x_α` with `x_α = P_i x P_j`, stored as full matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedElement {
    pub kind: Kind,
    dim: usize,
    components: BTreeMap<Root, CMat>,
}

impl GradedElement {
    pub fn zero(sys: &GradedSystem, kind: Kind) -> Self {
        Self {
            kind,
            dim: sys.dim(),
            components: BTreeMap::new(),
        }
    }

    /// Splits `m` into block components, dropping exact zeros.
    pub fn from_matrix(sys: &GradedSystem, m: &CMat, kind: Kind) -> Self {
        let mut e = Self::zero(sys, kind);
        for i in 0..sys.block_count() {
            for j in 0..sys.block_count() {
                let part = sys.block_part(m, (i, j));
                if part.iter().any(|v| v.norm() > 0.0) {
                    e.components.insert((i, j), part);
                }
            }
        }
        e
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &BTreeMap<Root, CMat> {
        &self.components
    }

    pub fn get(&self, a: Root) -> Option<&CMat> {
        self.components.get(&a)
    }

    pub fn insert(&mut self, a: Root, m: CMat) {
        self.components.insert(a, m);
    }

    pub fn add_to(&mut self, a: Root, m: &CMat) {
        match self.components.get_mut(&a) {
            Some(x) => *x += m,
            None => {
                self.components.insert(a, m.clone());
            }
        }
    }

    pub fn to_matrix(&self) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for c in self.components.values() {
            m += c;
        }
        m
    }

    /// Max absolute entry.
    pub fn norm(&self) -> f64 {
        self.to_matrix().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Components whose `Z`-value lies on `ℓ`.
    pub fn restrict_to_ray(&self, sys: &GradedSystem, ray: &Ray) -> Self {
        let mut out = self.clone();
        out.components.retain(|&a, _| a.0 != a.1 && ray.contains(sys.z_of(a)));
        out
    }

    /// Roots carrying a component.
    pub fn support(&self) -> Vec<Root> {
        self.components.keys().copied().collect()
    }

    fn single_ray(&self, sys: &GradedSystem) -> Result<()> {
        let mut ray: Option<Ray> = None;
        for &a in self.components.keys() {
            if a.0 == a.1 {
                return Err(Error::MixedRays);
            }
            let z = sys.z_of(a);
            match ray {
                None => ray = Some(Ray::new(Ray::angle_of(z))),
                Some(r) if r.contains(z) => {}
                Some(_) => return Err(Error::MixedRays),
            }
        }
        Ok(())
    }
}

/// Off-diagonal part of `m`: blocks `P_i m P_j` with `z_i ≠ z_j`.
pub fn project_offdiagonal(m: &CMat, sys: &GradedSystem) -> GradedElement {
    let mut e = GradedElement::from_matrix(sys, m, Kind::F);
    e.components.retain(|a, _| a.0 != a.1);
    e
}

/// `δ = exp(x) - 1` for `x` supported on one ray.
pub fn exp_nilpotent(x: &GradedElement, sys: &GradedSystem) -> Result<GradedElement> {
    x.single_ray(sys)?;
    let m = x.to_matrix();
    let n = m.nrows();
    let mut term = CMat::identity(n, n);
    let mut acc = CMat::zeros(n, n);
    for k in 1..=n {
        term = &term * &m / C64::new(k as f64, 0.0);
        acc += &term;
    }
    Ok(GradedElement::from_matrix(sys, &acc, Kind::Delta))
}

/// `x = log(1 + δ)` for `δ` supported on one ray.
pub fn log_unipotent(d: &GradedElement, sys: &GradedSystem) -> Result<GradedElement> {
    d.single_ray(sys)?;
    let m = d.to_matrix();
    let n = m.nrows();
    let mut power = CMat::identity(n, n);
    let mut acc = CMat::zeros(n, n);
    for k in 1..=n {
        power = &power * &m;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        acc += &power * C64::new(sign / k as f64, 0.0);
    }
    Ok(GradedElement::from_matrix(sys, &acc, Kind::Epsilon))
}
