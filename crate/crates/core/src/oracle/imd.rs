//! Isomonodromic deformations: the flow
//! `df_α = Σ_{β+γ=α} [f_β, f_γ] dlog Z(γ)` along a path of block eigenvalues.
//!
//! For `α = (i, k)` the decompositions are `β = (i, j), γ = (j, k)` and
//! `β = (j, k), γ = (i, j)`, so in blocks
//! `df_ik = Σ_j f_ij f_jk (dlog(z_j - z_k) - dlog(z_i - z_j))`.

use crate::liealg::{GradedElement, GradedSystem, Kind};
use crate::ode::{integrate, OdeOptions};
use crate::{CMat, Error, Result, C64};

/// Relative distance to a root hyperplane below which a path is rejected.
const HYPERPLANE_GUARD: f64 = 1e-7;

fn check_segment(a: &[C64], b: &[C64]) -> Result<()> {
    let scale = a.iter().chain(b).map(|z| z.norm()).fold(1.0, f64::max);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let w0 = a[i] - a[j];
            let dw = (b[i] - b[j]) - w0;
            // closest point of s ↦ w0 + s·dw on [0, 1] to the origin
            let s = if dw.norm_sqr() > 0.0 {
                (-(w0.conj() * dw).re / dw.norm_sqr()).clamp(0.0, 1.0)
            } else {
                0.0
            };
            if (w0 + dw * s).norm() <= HYPERPLANE_GUARD * scale {
                return Err(Error::HyperplaneCrossing { root: (i, j) });
            }
        }
    }
    Ok(())
}

/// Integrates the isomonodromy equations along the piecewise-linear path
/// through `z_path` (block eigenvalues of `sys`, one tuple per vertex; the
/// first tuple is the start point, not `sys`'s own eigenvalues). Each
/// segment is split into `steps` equal pieces before adaptive stepping.
pub fn isomonodromy_flow(
    sys: &GradedSystem,
    f0: &GradedElement,
    z_path: &[Vec<C64>],
    steps: usize,
    tol: f64,
) -> Result<GradedElement> {
    let m = sys.block_count();
    if z_path.is_empty() || z_path.iter().any(|z| z.len() != m) {
        return Err(Error::Invalid(format!("path vertices must have {m} block eigenvalues")));
    }
    let steps = steps.max(1);
    for w in z_path.windows(2) {
        check_segment(&w[0], &w[1])?;
    }
    check_segment(&z_path[0], &z_path[0])?;

    // block triples (i, j, k) with all three roots present
    let triples: Vec<(usize, usize, usize)> = (0..m)
        .flat_map(|i| (0..m).flat_map(move |j| (0..m).map(move |k| (i, j, k))))
        .filter(|&(i, j, k)| {
            i != j && j != k && i != k && sys.has_root((i, j)) && sys.has_root((j, k)) && sys.has_root((i, k))
        })
        .collect();
    let roots: Vec<(usize, usize)> = sys.roots().to_vec();
    let n = sys.dim();
    let blocks: Vec<Vec<usize>> = (0..m).map(|b| sys.block(b).to_vec()).collect();

    let mut f = f0.to_matrix();
    if triples.is_empty() {
        return Ok(GradedElement::from_matrix(sys, &f, Kind::F));
    }
    let opts = OdeOptions {
        tol,
        ..OdeOptions::default()
    };
    let sub = |mat: &CMat, (i, j): (usize, usize)| -> CMat {
        CMat::from_fn(blocks[i].len(), blocks[j].len(), |r, c| {
            mat[(blocks[i][r], blocks[j][c])]
        })
    };

    for w in z_path.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let delta: Vec<C64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
        for piece in 0..steps {
            let (s0, s1) = (piece as f64 / steps as f64, (piece + 1) as f64 / steps as f64);
            let rhs = |s: f64, y: &[C64], dy: &mut [C64]| {
                let fm = CMat::from_column_slice(n, n, y);
                let z: Vec<C64> = a.iter().zip(&delta).map(|(x, d)| x + d * s).collect();
                let dlog = |p: usize, q: usize| (delta[p] - delta[q]) / (z[p] - z[q]);
                let mut out = CMat::zeros(n, n);
                for &(i, j, k) in &triples {
                    let term = sub(&fm, (i, j)) * sub(&fm, (j, k)) * (dlog(j, k) - dlog(i, j));
                    for (r, &gr) in blocks[i].iter().enumerate() {
                        for (c, &gc) in blocks[k].iter().enumerate() {
                            out[(gr, gc)] += term[(r, c)];
                        }
                    }
                }
                dy.copy_from_slice(out.as_slice());
            };
            let y = integrate(rhs, f.as_slice(), s0, s1, &opts, None)?;
            f = CMat::from_column_slice(n, n, &y);
        }
    }
    let mut out = GradedElement::zero(sys, Kind::F);
    for &a in &roots {
        let part = sys.block_part(&f, a);
        if part.iter().any(|v| v.norm() > 0.0) {
            out.insert(a, part);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liealg::{project_offdiagonal, Ray};
    use crate::stokes::{multipliers_series, TruncationPolicy};
    use crate::transforms::{make_j_over, Transform};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_f(sys: &GradedSystem, seed: u64, scale: f64) -> GradedElement {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = sys.dim();
        let m = CMat::from_fn(n, n, |_, _| {
            c(rng.random_range(-scale..scale), rng.random_range(-scale..scale))
        });
        project_offdiagonal(&m, sys)
    }

    #[test]
    fn gl2_flow_is_constant() {
        let sys = GradedSystem::from_diagonal(&[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let f = random_f(&sys, 42, 0.3);
        let path = vec![
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(0.2, 0.5), c(-1.0, 0.3)],
            vec![c(1.0, 1.0), c(0.0, 2.0)],
        ];
        let g = isomonodromy_flow(&sys, &f, &path, 5, 1e-12).unwrap();
        assert_eq!(g.to_matrix(), f.to_matrix());
    }

    #[test]
    fn hyperplane_crossing_is_rejected() {
        let sys = GradedSystem::from_diagonal(&[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let f = random_f(&sys, 1, 0.1);
        let path = vec![
            vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)],
            vec![c(0.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0)],
        ];
        let err = isomonodromy_flow(&sys, &f, &path, 4, 1e-10).unwrap_err();
        assert_eq!(err, Error::HyperplaneCrossing { root: (0, 1) });
    }

    fn circle_path(center: &[C64], radius: f64, which: usize, points: usize) -> Vec<Vec<C64>> {
        (0..=points)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / points as f64;
                let mut z = center.to_vec();
                z[which] += C64::from_polar(radius, th) - radius;
                z
            })
            .collect()
    }

    #[test]
    fn contractible_loop_returns_to_start() {
        let z0 = [c(0.0, 0.0), c(1.0, 0.2), c(0.3, 0.9)];
        let sys = GradedSystem::from_diagonal(&z0).unwrap();
        let f = random_f(&sys, 42, 0.3);
        // the loop around z_2 stays away from z_0 and z_1
        let path = circle_path(&z0, 0.2, 2, 50);
        let g = isomonodromy_flow(&sys, &f, &path, 2, 1e-12).unwrap();
        assert!((g.to_matrix() - f.to_matrix()).norm() < 1e-5);
    }

    #[test]
    fn non_contractible_loop_moves_f() {
        let z0 = [c(0.0, 0.0), c(1.0, 0.0), c(0.3, 0.9)];
        let sys = GradedSystem::from_diagonal(&z0).unwrap();
        let f = random_f(&sys, 42, 0.3);
        // z_2 circles z_0 and z_1
        let path: Vec<Vec<C64>> = (0..=80)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / 80.0;
                vec![
                    z0[0],
                    z0[1],
                    c(0.5, 0.0) + (z0[2] - c(0.5, 0.0)) * C64::from_polar(1.0, th),
                ]
            })
            .collect();
        let g = isomonodromy_flow(&sys, &f, &path, 2, 1e-12).unwrap();
        assert!((g.to_matrix() - f.to_matrix()).norm() > 1e-3);
    }

    #[test]
    fn gl3_multipliers_are_constant() {
        let za = vec![c(0.0, 0.0), c(1.0, 0.2), c(0.3, 0.9)];
        let zb = vec![c(0.1, -0.1), c(1.2, 0.5), c(0.2, 1.1)];
        let sys = GradedSystem::from_diagonal(&za).unwrap();
        let f = random_f(&sys, 42, 0.1);
        let path: Vec<Vec<C64>> = (0..=50)
            .map(|k| {
                let s = k as f64 / 50.0;
                za.iter().zip(&zb).map(|(a, b)| a + (b - a) * s).collect()
            })
            .collect();
        let g = isomonodromy_flow(&sys, &f, &path, 1, 1e-12).unwrap();
        assert!(
            (g.to_matrix() - f.to_matrix()).norm() > 1e-4,
            "{}",
            (g.to_matrix() - f.to_matrix()).norm()
        );
        let end = sys.with_eigenvalues(&zb).unwrap();
        let policy = TruncationPolicy::default();
        let r = Ray::new(0.55);
        let m0 = multipliers_series(&sys, &f, &r, &policy).unwrap();
        let m1 = multipliers_series(&end, &g, &r, &policy).unwrap();
        assert!((&m0.plus - &m1.plus).norm() < 1e-4, "{}\n{}", m0.plus, m1.plus);
        assert!((&m0.minus - &m1.minus).norm() < 1e-4, "{}\n{}", m0.minus, m1.minus);
    }

    /// The coefficient applied to a word of length `n` in the inverse series
    /// is `(-1)^{n-1} J_n`; it satisfies
    /// `dJ_n = Σ_i J_i(z_1..z_i) J_{n-i}(z_{i+1}..z_n) dlog((z_{i+1}+⋯+z_n)/(z_1+⋯+z_i))`.
    #[test]
    fn j_satisfies_its_pde() {
        let j = make_j_over(&Transform::l(1e-12));
        let jt = |z: &[C64]| {
            let v = j.eval(z).unwrap();
            if z.len().is_multiple_of(2) {
                -v
            } else {
                v
            }
        };
        let h = 1e-5;
        for z in [
            vec![c(1.0, 0.3), c(-0.4, 0.9)],
            vec![c(1.0, 0.3), c(-0.4, 0.9), c(0.2, -0.7)],
            vec![c(0.5, 0.3), c(0.4, 0.9), c(-0.6, 0.2)],
        ] {
            let n = z.len();
            for v in 0..n {
                let (mut zp, mut zm) = (z.clone(), z.clone());
                zp[v] += h;
                zm[v] -= h;
                let fd = (jt(&zp) - jt(&zm)) / (2.0 * h);
                let mut rhs = c(0.0, 0.0);
                for i in 1..n {
                    let head: C64 = z[..i].iter().sum();
                    let tail: C64 = z[i..].iter().sum();
                    let d = if v >= i { 1.0 / tail } else { -1.0 / head };
                    rhs += jt(&z[..i]) * jt(&z[i..]) * d;
                }
                assert!((fd - rhs).norm() <= 1e-4 * rhs.norm(), "n={n} v={v}: {fd} vs {rhs}");
            }
        }
    }
}
