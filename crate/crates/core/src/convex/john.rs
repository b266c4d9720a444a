//! Maximal-volume inscribed ellipsoids and reducing matrices.
//!
//! For a sampled body `K = {x : |⟨x, u_i⟩| ≤ h_i}` write the ellipsoid as
//! `X^{1/2}·B`. Containment is linear in `X`: `u_iᵀ X u_i ≤ h_i²`. Maximizing
//! `log det X` under these constraints is solved by a log-barrier Newton
//! method in the `d(d+1)/2` entries of `X`. The barrier multipliers give
//! weights `π` with `M = Σ π_i a_i a_iᵀ`, `a_i = u_i / h_i`, and since
//! `xᵀ M x = Σ π_i ⟨a_i, x⟩² ≤ 1` on `K`, the factor
//! `c² = λ_max(M⁻¹ X)` certifies `K ⊆ c·X^{1/2}·B`; at the optimum `c² = d`.

use super::{ConvexBody, DirectionSet};
use crate::error::{domain, Error, Result};
use crate::grid::{check_exponent, Cube, DyadicField};
use crate::linalg::{dot, Mat, SpdMatrix};

/// Cap on Newton steps of the ellipsoid solver.
pub const JOHN_MAX_ITERATIONS: usize = 10_000;
const GAP: f64 = 1e-9;
const CENTERING_STEPS: usize = 50;
const ACCEPT: f64 = 2e-6;
const DECREMENT: f64 = 1e-10;

/// `A` such that `A·B ⊆ K ⊆ √d·A·B`, up to sampling.
pub fn john_ellipsoid(k: &ConvexBody) -> Result<SpdMatrix> {
    k.check_absorbing()?;
    match k {
        ConvexBody::Ellipsoid(a) => Ok(a.clone()),
        ConvexBody::Segment(v) => Ok(SpdMatrix::scalar(v[0].abs())),
        ConvexBody::Sampled(s) => {
            if s.dirs.dim() == 1 {
                return Ok(SpdMatrix::scalar(s.h[0]));
            }
            inscribed(&s.dirs, &s.h)
        }
    }
}

/// Entry positions `(r, c)`, `r ≤ c`, parameterizing a symmetric matrix.
fn basis(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|r| (r..d).map(move |c| (r, c))).collect()
}

fn assemble(d: usize, basis: &[(usize, usize)], x: &[f64]) -> Mat {
    let mut m = Mat::zeros(d);
    for (&(r, c), &v) in basis.iter().zip(x) {
        m.set(r, c, v);
        m.set(c, r, v);
    }
    m
}

/// Largest ellipsoid inside `{x : |⟨x, u_i⟩| ≤ h_i ∀i}`.
fn inscribed(dirs: &DirectionSet, h: &[f64]) -> Result<SpdMatrix> {
    let d = dirs.dim();
    let top = h.iter().copied().fold(0.0, f64::max);
    let hh: Vec<f64> = h.iter().map(|v| (v / top).powi(2)).collect();
    let basis = basis(d);
    let k = basis.len();
    // q_i · x = u_iᵀ X u_i
    let q: Vec<Vec<f64>> = dirs
        .iter()
        .map(|u| {
            basis
                .iter()
                .map(|&(r, c)| if r == c { u[r] * u[r] } else { 2.0 * u[r] * u[c] })
                .collect()
        })
        .collect();
    let slack = |x: &[f64]| -> Vec<f64> { q.iter().zip(&hh).map(|(qi, hi)| hi - dot(qi, x)).collect() };
    let feasible = |x: &[f64]| slack(x).iter().all(|v| *v > 0.0) && invert_spd(&assemble(d, &basis, x)).is_some();

    let low = hh.iter().copied().fold(f64::INFINITY, f64::min);
    let mut x: Vec<f64> = basis.iter().map(|&(r, c)| if r == c { 0.25 * low } else { 0.0 }).collect();
    let m = h.len() as f64;
    let mut t = 1.0;
    let mut steps = 0;
    loop {
        for _ in 0..CENTERING_STEPS {
            if steps >= JOHN_MAX_ITERATIONS {
                return Err(Error::NoConvergence {
                    iterations: steps,
                    residual: m / t,
                });
            }
            steps += 1;
            let xm = assemble(d, &basis, &x);
            let (inv, _) = invert_spd(&xm).ok_or_else(|| domain("ellipsoid iterate lost definiteness"))?;
            let s = slack(&x);
            let mut grad = vec![0.0; k];
            let mut hess = vec![0.0; k * k];
            let units: Vec<Mat> = basis
                .iter()
                .map(|&(r, c)| {
                    let mut e = Mat::zeros(d);
                    e.set(r, c, 1.0);
                    e.set(c, r, 1.0);
                    inv.mul(&e)
                })
                .collect();
            for b in 0..k {
                let (r, c) = basis[b];
                grad[b] = t * if r == c { inv.get(r, r) } else { 2.0 * inv.get(r, c) };
                for l in 0..k {
                    let prod = units[b].mul(&units[l]);
                    hess[b * k + l] = t * (0..d).map(|i| prod.get(i, i)).sum::<f64>();
                }
            }
            for (qi, si) in q.iter().zip(&s) {
                for b in 0..k {
                    grad[b] -= qi[b] / si;
                    for l in 0..k {
                        hess[b * k + l] += qi[b] * qi[l] / (si * si);
                    }
                }
            }
            let step = solve_spd(k, &hess, &grad).ok_or_else(|| domain("ellipsoid Newton system is singular"))?;
            let decrement = dot(&grad, &step);
            if decrement <= DECREMENT {
                break;
            }
            // damped Newton step for a self-concordant objective
            let lam = decrement.sqrt();
            let mut alpha = if lam > 0.25 { 1.0 / (1.0 + lam) } else { 1.0 };
            loop {
                let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + alpha * b).collect();
                if feasible(&trial) {
                    x = trial;
                    break;
                }
                alpha *= 0.5;
            }
        }
        if m / t <= GAP {
            break;
        }
        t *= 8.0;
    }

    let xm = assemble(d, &basis, &x);
    let s = slack(&x);
    // π_i ∝ h_i² / s_i, the barrier multipliers in the a_i scaling
    let weights: Vec<f64> = s.iter().zip(&hh).map(|(si, hi)| hi / si).collect();
    let total: f64 = weights.iter().sum();
    let mut moment = Mat::zeros(d);
    for ((u, w), hi) in dirs.iter().zip(&weights).zip(&hh) {
        for r in 0..d {
            for c in 0..d {
                moment.set(r, c, moment.get(r, c) + w / total * u[r] * u[c] / hi);
            }
        }
    }
    let (minv, _) = invert_spd(&moment).ok_or_else(|| domain("ellipsoid certificate is singular"))?;
    let factor = crate::linalg::sym_max_eigenvalue(&symmetric_product(&xm, &minv)?);
    let residual = factor / d as f64 - 1.0;
    if residual > ACCEPT {
        return Err(Error::NoConvergence {
            iterations: steps,
            residual,
        });
    }
    Ok(SpdMatrix::new(xm.scaled(top * top))?.sqrt())
}

/// `X^{1/2} Y X^{1/2}`, which has the spectrum of `Y X`.
fn symmetric_product(x: &Mat, y: &Mat) -> Result<Mat> {
    let r = SpdMatrix::new(x.clone())?.sqrt();
    Ok(r.mat().mul(y).mul(r.mat()))
}

/// Solves `H z = g` for symmetric positive definite `H` (row-major, `k×k`).
fn solve_spd(k: usize, hess: &[f64], g: &[f64]) -> Option<Vec<f64>> {
    let (inv, _) = invert_spd(&Mat::from_row_major(k, hess.to_vec()))?;
    Some(inv.mul_vec(g))
}

/// Inverse and log-determinant through a Cholesky factorization.
fn invert_spd(m: &Mat) -> Option<(Mat, f64)> {
    let n = m.dim();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let logdet = 2.0 * (0..n).map(|i| l[i * n + i].ln()).sum::<f64>();
    // columns of L⁻¹, then M⁻¹ = L⁻ᵀ L⁻¹
    let mut linv = vec![0.0; n * n];
    for c in 0..n {
        for i in c..n {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in c..i {
                s -= l[i * n + k] * linv[k * n + c];
            }
            linv[i * n + c] = s / l[i * n + i];
        }
    }
    let mut inv = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            inv[r * n + c] = (r.max(c)..n).map(|k| linv[k * n + r] * linv[k * n + c]).sum();
        }
    }
    Some((Mat::from_row_major(n, inv), logdet))
}

/// Matrix whose ellipsoid is the John ellipsoid of `{v : ⟨ρ_W⟩_{p,Q}(v) ≤ 1}`.
///
/// For `p = 2` the unit ball is itself the ellipsoid of `(avg_Q W²)^{-1/2}`.
/// Otherwise the ball is approximated from inside by the symmetric hull of
/// the boundary points `u / ⟨ρ_W⟩_{p,Q}(u)` on the standard directions.
pub fn reducing_matrix(w: &DyadicField<SpdMatrix>, cube: &Cube, p: f64) -> Result<SpdMatrix> {
    check_exponent(p)?;
    let grid = w.grid();
    grid.check(cube)?;
    let cells = grid.cells_of(cube);
    let d = w.values()[0].dim();
    let n = cells.len() as f64;
    if p == 2.0 {
        let mut acc = Mat::zeros(d);
        for &c in &cells {
            let m = w.get(c).mat();
            acc.add_assign(&m.mul(m));
        }
        acc.scale_mut(1.0 / n);
        return SpdMatrix::new(acc)?.power(-0.5);
    }
    if d == 1 {
        let s: f64 = cells.iter().map(|&c| w.get(c).mat().get(0, 0).powf(p)).sum();
        return SpdMatrix::scalar((s / n).powf(1.0 / p)).power(-1.0);
    }
    john_of_norm(d, |u| {
        let s: f64 = cells.iter().map(|&c| w.get(c).mat().mul_vec_norm(u).powf(p)).sum();
        (s / n).powf(1.0 / p)
    })
}

/// John ellipsoid of the unit ball of a norm given by evaluation.
///
/// The ball is approximated from inside by the symmetric hull of boundary
/// points `u / N(u)`. A second pass resamples in the coordinates where the
/// first-pass ellipsoid is round, so the points are evenly spread even for
/// elongated balls.
pub(crate) fn john_of_norm(d: usize, eval: impl Fn(&[f64]) -> f64) -> Result<SpdMatrix> {
    let first = john_of_inner_hull(d, &eval)?;
    let t = first.mat();
    let second = john_of_inner_hull(d, |z: &[f64]| eval(&t.mul_vec(z)))?;
    let ta = t.mul(second.mat());
    SpdMatrix::new(ta.mul(&ta.transpose()))?.power(0.5)
}

fn john_of_inner_hull(d: usize, eval: impl Fn(&[f64]) -> f64) -> Result<SpdMatrix> {
    let dirs = DirectionSet::standard(d);
    let avg: Vec<f64> = dirs.iter().map(eval).collect();
    if let Some(j) = avg.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::DegenerateNorm {
            direction: dirs.dir(j).to_vec(),
            cell: None,
        });
    }
    let h: Vec<f64> = dirs
        .iter()
        .map(|uj| {
            dirs.iter()
                .zip(&avg)
                .map(|(ui, a)| dot(ui, uj).abs() / a)
                .fold(0.0, f64::max)
        })
        .collect();
    john_ellipsoid(&ConvexBody::sampled(dirs, h)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::zonotope;
    use crate::grid::DyadicGrid;

    fn sandwich(k: &ConvexBody, a: &SpdMatrix) {
        let e = ConvexBody::ellipsoid(a.clone());
        let d = k.dim() as f64;
        assert!(k.contains(&e, 1e-6), "ellipsoid not inside");
        assert!(e.scale(d.sqrt()).unwrap().contains(k, 1e-6), "body not inside √d·E");
    }

    #[test]
    fn ellipsoid_is_its_own_john_ellipsoid() {
        let a = SpdMatrix::new(Mat::from_rows([[2.0, 0.5], [0.5, 1.0]])).unwrap();
        assert_eq!(john_ellipsoid(&ConvexBody::ellipsoid(a.clone())).unwrap(), a);
    }

    #[test]
    fn square_gives_unit_disc() {
        let sq = zonotope(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let a = john_ellipsoid(&sq).unwrap();
        assert!(a.mat().sub(&Mat::identity(2)).frobenius() < 1e-6);
        sandwich(&sq, &a);
    }

    #[test]
    fn sampled_ellipsoid_is_recovered() {
        let a = SpdMatrix::from_eigen(vec![0.5, 2.0], Mat::rotation(0.4));
        let k = ConvexBody::ellipsoid(a.clone()).to_sampled(&DirectionSet::standard(2));
        let got = john_ellipsoid(&k).unwrap();
        assert!(got.mat().sub(a.mat()).frobenius() < 1e-3);
        sandwich(&k, &got);
    }

    #[test]
    fn three_dimensional_box() {
        let k = zonotope(&[vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 0.0], vec![0.0, 0.0, 0.5]]).unwrap();
        let a = john_ellipsoid(&k).unwrap();
        sandwich(&k, &a);
    }

    #[test]
    fn segment_in_the_plane_is_rejected() {
        assert!(matches!(
            john_ellipsoid(&ConvexBody::segment(vec![1.0, 0.0])),
            Err(Error::NotAbsorbing { .. })
        ));
    }

    #[test]
    fn reducing_matrix_examples() {
        let g = DyadicGrid::new(1, 3).unwrap();
        let cw = DyadicField::from_fn(g, |_| SpdMatrix::diag(&[3.0, 3.0]));
        for p in [1.5, 2.0, 3.0] {
            let r = reducing_matrix(&cw, &g.root(), p).unwrap();
            assert!(r.mat().sub(&Mat::identity(2).scaled(1.0 / 3.0)).frobenius() < 1e-8, "p={p}");
        }

        let w = DyadicField::from_fn(g, |i| SpdMatrix::scalar(1.0 + i as f64));
        let r = reducing_matrix(&w, &g.root(), 3.0).unwrap();
        let avg: f64 = (0..8).map(|i| (1.0 + i as f64).powi(3)).sum::<f64>() / 8.0;
        assert!((r.mat().get(0, 0) - avg.powf(-1.0 / 3.0)).abs() < 1e-14);

        let diag = DyadicField::from_fn(g, |i| SpdMatrix::diag(&[1.0 + i as f64, 2.0 / (1.0 + i as f64)]));
        let exact = reducing_matrix(&diag, &g.root(), 2.0).unwrap();
        let a1: f64 = (0..8).map(|i| (1.0 + i as f64).powi(2)).sum::<f64>() / 8.0;
        let a2: f64 = (0..8).map(|i| (2.0 / (1.0 + i as f64)).powi(2)).sum::<f64>() / 8.0;
        let want = Mat::diag(&[a1.powf(-0.5), a2.powf(-0.5)]);
        assert!(exact.mat().sub(&want).frobenius() < 1e-12);
        // p = 2 through the sampled construction agrees with the closed form
        let rho = crate::convex::NormFunction::Matrix(diag.clone());
        let sampled = john_of_norm(2, |u| rho.p_average(&g.root(), 2.0, u).unwrap()).unwrap();
        assert!(sampled.mat().sub(&want).frobenius() < 1e-4 * want.frobenius());
    }
}
