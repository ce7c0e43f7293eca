//! Fundamental solutions of `d - (Z/t² + F/t) dt` as Laplace integrals of
//! solutions of the dual Fuchsian system, and Stokes factors from them.

use std::f64::consts::PI;

use super::fuchsian::{regularized_transport, FuchsianSystem, RayChain};
use crate::complexpath::{build_detour_segment, default_radius, Orientation};
use crate::liealg::{angle_distance, GradedElement, GradedSystem, Ray};
use crate::quad;
use crate::{CMat, Error, Result, C64, TWO_PI_I};

/// `Z` (as a graded system), `F`, and the dual system with residues `P_i F`.
#[derive(Debug, Clone)]
pub struct IrregularSystem {
    graded: GradedSystem,
    f: CMat,
    dual: FuchsianSystem,
}

impl IrregularSystem {
    pub fn new(graded: GradedSystem, f: CMat) -> Result<Self> {
        for b in 0..graded.block_count() {
            let p = graded.projector(b);
            let diag = &p * &f * &p;
            if diag.iter().any(|v| v.norm() > 1e-14 * (1.0 + f.norm())) {
                return Err(Error::Invalid("F has a nonzero diagonal block".into()));
            }
        }
        let dual = FuchsianSystem::from_zf(&graded, &f)?;
        Ok(Self { graded, f, dual })
    }

    pub fn from_element(graded: GradedSystem, f: &GradedElement) -> Result<Self> {
        let m = f.to_matrix();
        Self::new(graded, m)
    }

    pub fn graded(&self) -> &GradedSystem {
        &self.graded
    }

    pub fn f(&self) -> &CMat {
        &self.f
    }

    pub fn dual(&self) -> &FuchsianSystem {
        &self.dual
    }

    /// `Z/t² + F/t`.
    pub fn connection(&self, t: C64) -> CMat {
        self.graded.z_matrix() / (t * t) + &self.f / t
    }
}

#[derive(Debug, Clone)]
pub struct LaplaceConfig {
    pub ray: Ray,
    pub t_grid: Vec<C64>,
    pub truncation_radius: f64,
    pub quad_tol: f64,
}

/// `t ∈ H_r`, the open half-plane centred on `r`.
pub fn in_half_plane(r: &Ray, t: C64) -> bool {
    (t / r.direction()).re > 0.0
}

/// Decay rate of `|e^{-u e^{iπr}/t}|` per unit `u`.
fn decay(r: &Ray, t: C64) -> f64 {
    (r.direction() / t).re
}

/// Truncation radius making `e^{-κR}` negligible against `tol` for every `t`.
pub fn auto_radius(r: &Ray, t_grid: &[C64], tol: f64) -> f64 {
    t_grid
        .iter()
        .map(|&t| ((1.0 / tol).ln() + 12.0) / decay(r, t))
        .fold(1.0, f64::max)
}

impl LaplaceConfig {
    pub fn new(ray: Ray, t_grid: Vec<C64>, truncation_radius: f64, quad_tol: f64) -> Result<Self> {
        if let Some(&t) = t_grid.iter().find(|&&t| !in_half_plane(&ray, t)) {
            return Err(Error::Invalid(format!("t = {t} is not in the half-plane of the ray")));
        }
        if !(truncation_radius > 0.0 && quad_tol > 0.0) {
            return Err(Error::Invalid("radius and tolerance must be positive".into()));
        }
        Ok(Self {
            ray,
            t_grid,
            truncation_radius,
            quad_tol,
        })
    }

    /// Config with the truncation radius chosen from the tail bound.
    pub fn auto(ray: Ray, t_grid: Vec<C64>, quad_tol: f64) -> Result<Self> {
        let r = auto_radius(&ray, &t_grid, quad_tol);
        Self::new(ray, t_grid, r, quad_tol)
    }
}

fn check_ray(sys: &IrregularSystem, r: &Ray) -> Result<()> {
    if !sys.graded.is_admissible(r)? {
        return Err(Error::InadmissibleRay { angle: r.angle });
    }
    Ok(())
}

/// `φ^{(z_i)} = H_i P_i` continued along `z_i + r` up to `length`.
pub fn ray_solution(sys: &IrregularSystem, i: usize, r: &Ray, length: f64) -> Result<RayChain> {
    RayChain::from_pole(&sys.dual, i, &sys.graded.projector(i), r.direction(), length)
}

/// `Y^{(z_i)}_r(t)·e^{z_i/t} = (1/t)∫_0^R φ(z_i + u·d) e^{-u·d/t} d du`.
fn normalized_y(chain: &RayChain, r: &Ray, t: C64, radius: f64, tol: f64) -> Result<CMat> {
    let d = r.direction();
    let k = decay(r, t);
    if k <= 0.0 {
        return Err(Error::Invalid(format!("t = {t} is not in the half-plane of the ray")));
    }
    let n = chain.eval(0.0).nrows();
    let tail =
        2.0 * chain.eval(radius).iter().map(|v| v.norm()).fold(0.0, f64::max) * (-k * radius).exp() / (k * t.norm());
    if tail > tol {
        return Err(Error::TailBoundExceeded { bound: tail });
    }
    let scale = d / t;
    let v = quad::integrate(
        |u| {
            let w = (-(d * u) / t).exp() * scale;
            (chain.eval(u) * w).as_slice().to_vec()
        },
        0.0,
        radius,
        n * n,
        0.1 * tol,
    )?;
    Ok(CMat::from_column_slice(n, n, &v))
}

/// `Y^{(z_i)}_r(t) = (1/t)∫_{z_i + r} φ^{(z_i)}(z) e^{-z/t} dz`, as an
/// `n × n` matrix supported on the columns of block `i`.
pub fn laplace_y(sys: &IrregularSystem, cfg: &LaplaceConfig, i: usize, t: C64) -> Result<CMat> {
    check_ray(sys, &cfg.ray)?;
    if !in_half_plane(&cfg.ray, t) {
        return Err(Error::Invalid(format!("t = {t} is not in the half-plane of the ray")));
    }
    let chain = ray_solution(sys, i, &cfg.ray, cfg.truncation_radius)?;
    let z = sys.graded.eigenvalue(i);
    Ok(normalized_y(&chain, &cfg.ray, t, cfg.truncation_radius, cfg.quad_tol)? * (-z / t).exp())
}

/// `Y_r(t)·e^{Z/t}` evaluated block by block, which stays bounded as `t → 0`.
pub fn normalized_fundamental(sys: &IrregularSystem, cfg: &LaplaceConfig, t: C64) -> Result<CMat> {
    check_ray(sys, &cfg.ray)?;
    let n = sys.graded.dim();
    let mut y = CMat::zeros(n, n);
    for i in 0..sys.graded.block_count() {
        let chain = ray_solution(sys, i, &cfg.ray, cfg.truncation_radius)?;
        y += normalized_y(&chain, &cfg.ray, t, cfg.truncation_radius, cfg.quad_tol)?;
    }
    Ok(y)
}

/// `Y_r(t) = Σ_i Y^{(z_i)}_r(t) P_i` at every point of the grid.
pub fn fundamental(sys: &IrregularSystem, cfg: &LaplaceConfig) -> Result<Vec<CMat>> {
    check_ray(sys, &cfg.ray)?;
    if cfg.t_grid.iter().any(|&t| !in_half_plane(&cfg.ray, t)) {
        return Err(Error::Invalid("t outside the half-plane of the ray".into()));
    }
    let n = sys.graded.dim();
    let chains = (0..sys.graded.block_count())
        .map(|i| ray_solution(sys, i, &cfg.ray, cfg.truncation_radius))
        .collect::<Result<Vec<_>>>()?;
    let at = |t: C64| -> Result<CMat> {
        let mut y = CMat::zeros(n, n);
        for (i, chain) in chains.iter().enumerate() {
            let z = sys.graded.eigenvalue(i);
            y += normalized_y(chain, &cfg.ray, t, cfg.truncation_radius, cfg.quad_tol)? * (-z / t).exp();
        }
        Ok(y)
    };
    std::thread::scope(|s| {
        let handles: Vec<_> = cfg.t_grid.iter().map(|&t| s.spawn(move || at(t))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("laplace worker panicked"))
            .collect()
    })
}

/// Both estimates of a Stokes factor.
#[derive(Debug, Clone)]
pub struct NumericStokesFactor {
    /// `Y_{r+}(t)⁻¹·Y_{r-}(t)` averaged over the grid, `r±` the anticlockwise
    /// and clockwise perturbations of the Stokes ray.
    pub laplace: CMat,
    /// Largest entrywise deviation of a grid estimate from the average.
    pub spread: f64,
    /// Blocks `2πi·P_j F·PT^reg·P_i`.
    pub block: CMat,
}

/// Half the angular gap (units of `π`) from `l` to its neighbouring Stokes rays.
fn half_gap(sys: &GradedSystem, l: &Ray) -> Result<f64> {
    let rays = sys.stokes_rays()?;
    if !rays.iter().any(|r| angle_distance(r.angle, l.angle) < 1e-9) {
        return Err(Error::Invalid(format!("{}π is not a Stokes ray", l.angle)));
    }
    let gap = rays
        .iter()
        .map(|r| angle_distance(r.angle, l.angle))
        .filter(|&d| d >= 1e-9)
        .fold(1.0, f64::min);
    Ok((0.5 * gap).min(0.25))
}

/// Default grid: `|t|` at half and the full eigenvalue spread, arguments on
/// either side of `l`.
pub fn default_t_grid(sys: &GradedSystem, l: &Ray) -> Result<Vec<C64>> {
    let delta = half_gap(sys, l)?;
    let s = sys.spread();
    let mut grid = Vec::new();
    for m in [0.5, 1.0] {
        for side in [-0.25, 0.25] {
            grid.push(C64::from_polar(m * s, PI * (l.angle + side * delta)));
        }
    }
    Ok(grid)
}

/// Blocks of the Stokes factor on `l` from regularized transport along the
/// segments between poles.
pub fn stokes_factor_blocks(sys: &IrregularSystem, l: &Ray, tol: f64) -> Result<CMat> {
    let g = &sys.graded;
    let n = g.dim();
    let zs = g.eigenvalues();
    let radius = default_radius(zs);
    let mut s = CMat::identity(n, n);
    for i in 0..g.block_count() {
        for j in 0..g.block_count() {
            if i == j || !l.contains(zs[j] - zs[i]) {
                continue;
            }
            let (a, b) = (zs[i], zs[j]);
            let between: Vec<(C64, Orientation)> = zs
                .iter()
                .filter(|&&p| p != a && p != b)
                .filter(|&&p| crate::complexpath::on_open_segment(a, b, p).is_some())
                .map(|&p| (p, Orientation::Anticlockwise))
                .collect();
            let path = build_detour_segment(a, b, &between, radius)?;
            let left = g.projector(j) * &sys.f;
            let v = regularized_transport(&sys.dual, &path, &left, &g.projector(i), tol)? * TWO_PI_I;
            s += v;
        }
    }
    Ok(s)
}

/// The Stokes factor on `l` by Laplace integrals on either side of it and by
/// the block formula.
pub fn stokes_factor_numeric(
    sys: &IrregularSystem,
    l: &Ray,
    t_grid: Option<Vec<C64>>,
    tol: f64,
) -> Result<NumericStokesFactor> {
    let g = &sys.graded;
    let delta = half_gap(g, l)?;
    let grid = match t_grid {
        Some(v) => v,
        None => default_t_grid(g, l)?,
    };
    let plus = Ray::new(l.angle + delta);
    let minus = Ray::new(l.angle - delta);
    let cfg_plus = LaplaceConfig::auto(plus, grid.clone(), tol)?;
    let cfg_minus = LaplaceConfig::auto(minus, grid.clone(), tol)?;
    let (yp, ym) = std::thread::scope(|s| {
        let hp = s.spawn(|| fundamental(sys, &cfg_plus));
        let hm = s.spawn(|| fundamental(sys, &cfg_minus));
        (hp.join().expect("worker panicked"), hm.join().expect("worker panicked"))
    });
    let (yp, ym) = (yp?, ym?);
    let n = g.dim();
    let mut estimates = Vec::with_capacity(grid.len());
    for (p, m) in yp.iter().zip(&ym) {
        let inv = p
            .clone()
            .try_inverse()
            .ok_or(Error::Invalid("singular fundamental solution".into()))?;
        estimates.push(inv * m);
    }
    let mut mean = CMat::zeros(n, n);
    for e in &estimates {
        mean += e;
    }
    mean /= C64::new(estimates.len() as f64, 0.0);
    let spread = estimates
        .iter()
        .flat_map(|e| e.iter().zip(mean.iter()).map(|(a, b)| (a - b).norm()))
        .fold(0.0, f64::max);
    if spread > 10.0 * tol {
        return Err(Error::SpreadTooLarge { spread });
    }
    let block = stokes_factor_blocks(sys, l, tol)?;
    Ok(NumericStokesFactor {
        laplace: mean,
        spread,
        block,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liealg::GradedSystem;
    use crate::stokes::{stokes_factor_matrix, TruncationPolicy};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn gl2(a: C64, b: C64) -> IrregularSystem {
        let g = GradedSystem::new(&[c(0.0, 0.0), c(1.0, 0.0)], &[1, 1]).unwrap();
        let f = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), a, b, c(0.0, 0.0)]);
        IrregularSystem::new(g, f).unwrap()
    }

    #[test]
    fn zero_f_gives_exponentials() {
        let sys = gl2(c(0.0, 0.0), c(0.0, 0.0));
        let t = c(0.4, 0.5);
        let cfg = LaplaceConfig::auto(Ray::new(0.3), vec![t], 1e-12).unwrap();
        for i in 0..2 {
            let y = laplace_y(&sys, &cfg, i, t).unwrap();
            let expect = sys.graded().projector(i) * (-sys.graded().eigenvalue(i) / t).exp();
            assert!((y - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn fundamental_solves_the_irregular_equation() {
        let sys = gl2(c(0.05, 0.02), c(-0.03, 0.04));
        let t = c(0.3, 0.6);
        let h = 1e-4;
        let grid = vec![t - h, t, t + h];
        let cfg = LaplaceConfig::auto(Ray::new(0.3), grid, 1e-13).unwrap();
        let y = fundamental(&sys, &cfg).unwrap();
        let dy = (&y[2] - &y[0]) / C64::new(2.0 * h, 0.0);
        let resid = dy - sys.connection(t) * &y[1];
        assert!(resid.norm() < 1e-6, "{}", resid.norm());
    }

    #[test]
    fn inadmissible_ray_rejected() {
        let sys = gl2(c(0.05, 0.0), c(0.05, 0.0));
        let cfg = LaplaceConfig::auto(Ray::new(0.0), vec![c(1.0, 0.0)], 1e-10).unwrap();
        assert!(matches!(
            laplace_y(&sys, &cfg, 0, c(1.0, 0.0)),
            Err(Error::InadmissibleRay { .. })
        ));
    }

    #[test]
    fn tail_bound_reported() {
        let sys = gl2(c(0.05, 0.0), c(0.05, 0.0));
        let cfg = LaplaceConfig::new(Ray::new(0.3), vec![c(1.0, 1.0)], 0.5, 1e-12).unwrap();
        assert!(matches!(
            laplace_y(&sys, &cfg, 0, c(1.0, 1.0)),
            Err(Error::TailBoundExceeded { .. })
        ));
    }

    #[test]
    fn zero_f_factor_is_identity() {
        let sys = gl2(c(0.0, 0.0), c(0.0, 0.0));
        let s = stokes_factor_numeric(&sys, &Ray::new(0.0), None, 1e-10).unwrap();
        assert!((s.laplace - CMat::identity(2, 2)).norm() < 1e-9);
        assert!((s.block - CMat::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn gl2_factor_matches_series() {
        let (a, b) = (c(0.04, 0.01), c(-0.02, 0.03));
        let sys = gl2(a, b);
        let l = Ray::new(1.0);
        let s = stokes_factor_numeric(&sys, &l, None, 1e-10).unwrap();
        let f = GradedElement::from_matrix(sys.graded(), sys.f(), crate::liealg::Kind::F);
        let series = stokes_factor_matrix(sys.graded(), &f, &l, &TruncationPolicy::default()).unwrap();
        assert!((&s.laplace - &series).norm() < 1e-8, "{}\n{}", s.laplace, series);
        assert!((&s.block - &series).norm() < 1e-8, "{}\n{}", s.block, series);
        // single entry at (2, 1): Z = z_2 - z_1 ∈ ℓ? here z_1 - z_2 = -1 ∈ ℝ₋
        assert!(series[(1, 0)].norm() < 1e-15);
        assert!((series[(0, 1)] / (TWO_PI_I * a) - 1.0).norm() < 0.01);
    }

    #[test]
    fn normalized_solution_tends_to_identity() {
        let sys = gl2(c(0.005, 0.002), c(-0.003, 0.004));
        let r = Ray::new(0.3);
        let t = C64::from_polar(1e-2, PI * 0.3);
        let cfg = LaplaceConfig::auto(r, vec![t], 1e-12).unwrap();
        let y = normalized_fundamental(&sys, &cfg, t).unwrap();
        assert!((y - CMat::identity(2, 2)).norm() < 1e-4);
    }

    #[test]
    fn rays_in_one_sector_agree() {
        let sys = gl2(c(0.05, 0.02), c(-0.03, 0.04));
        let t = c(0.3, 0.6);
        let a = fundamental(&sys, &LaplaceConfig::auto(Ray::new(0.25), vec![t], 1e-12).unwrap()).unwrap();
        let b = fundamental(&sys, &LaplaceConfig::auto(Ray::new(0.45), vec![t], 1e-12).unwrap()).unwrap();
        assert!((&a[0] - &b[0]).norm() < 1e-9);
    }

    #[test]
    fn gl3_factors_match_series() {
        let g = GradedSystem::new(&[c(0.0, 0.0), c(1.0, 0.2), c(2.0, 0.4)], &[1, 1, 1]).unwrap();
        let f = CMat::from_row_slice(
            3,
            3,
            &[
                c(0.0, 0.0),
                c(0.03, 0.01),
                c(-0.02, 0.02),
                c(0.01, -0.03),
                c(0.0, 0.0),
                c(0.04, 0.0),
                c(0.02, 0.01),
                c(-0.01, 0.03),
                c(0.0, 0.0),
            ],
        );
        let sys = IrregularSystem::new(g.clone(), f.clone()).unwrap();
        let fe = GradedElement::from_matrix(&g, &f, crate::liealg::Kind::F);
        for l in g.stokes_rays().unwrap() {
            let s = stokes_factor_numeric(&sys, &l, None, 1e-10).unwrap();
            let series = stokes_factor_matrix(&g, &fe, &l, &TruncationPolicy::default()).unwrap();
            assert!((&s.laplace - &series).norm() < 1e-7, "{}\n{}", s.laplace, series);
            assert!((&s.block - &series).norm() < 1e-7, "{}\n{}", s.block, series);
        }
    }
}
