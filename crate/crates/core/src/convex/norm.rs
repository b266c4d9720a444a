//! Norm functions `ρ(x, v)` that vary from cell to cell.

use super::{ConvexBody, DirectionSet};
use crate::error::{Error, Result};
use crate::grid::{check_exponent, Cube, DyadicField, DyadicGrid};
use crate::linalg::{dot, norm, SpdMatrix};

/// A norm on `ℝ^d` for every cell of a grid.
#[derive(Clone, Debug)]
pub enum NormFunction {
    /// `ρ(x, v) = |W(x) v|`.
    Matrix(DyadicField<SpdMatrix>),
    /// `ρ(x, v)` is the Minkowski gauge of `F(x)`.
    Body(DyadicField<ConvexBody>),
}

impl NormFunction {
    pub fn grid(&self) -> &DyadicGrid {
        match self {
            NormFunction::Matrix(w) => w.grid(),
            NormFunction::Body(f) => f.grid(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            NormFunction::Matrix(w) => w.values()[0].dim(),
            NormFunction::Body(f) => f.values()[0].dim(),
        }
    }

    fn check_vec(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// `ρ(x, v)`; infinite when `v` leaves the span of a degenerate body.
    pub fn eval(&self, cell: usize, v: &[f64]) -> f64 {
        match self {
            NormFunction::Matrix(w) => w.get(cell).mat().mul_vec_norm(v),
            NormFunction::Body(f) => gauge(f.get(cell), v),
        }
    }

    /// `ρ*(x, v) = sup{|⟨v, w⟩| : ρ(x, w) ≤ 1}`.
    ///
    /// Matrix norms use `|W(x)^{-1} v|`; for a body the dual of its gauge is
    /// its support function.
    pub fn dual(&self, cell: usize, v: &[f64]) -> Result<f64> {
        self.check_vec(v)?;
        match self {
            NormFunction::Matrix(w) => {
                let inv = w.get(cell).inverse().map_err(|e| with_cell(e, cell))?;
                Ok(inv.mat().mul_vec_norm(v))
            }
            NormFunction::Body(f) => {
                let body = f.get(cell);
                body.check_absorbing().map_err(|e| match e {
                    Error::NotAbsorbing { direction, .. } => {
                        let dirs = DirectionSet::standard(body.dim());
                        Error::DegenerateNorm {
                            direction: dirs.dir(direction).to_vec(),
                            cell: Some(cell),
                        }
                    }
                    other => other,
                })?;
                Ok(body.support_vec(v))
            }
        }
    }

    /// `⟨ρ⟩_{p,Q}(v) = (avg_Q ρ(x, v)^p)^{1/p}`.
    pub fn p_average(&self, cube: &Cube, p: f64, v: &[f64]) -> Result<f64> {
        check_exponent(p)?;
        self.check_vec(v)?;
        self.grid().check(cube)?;
        let cells = self.grid().cells_of(cube);
        let sum: f64 = cells.iter().map(|&c| self.eval(c, v).powf(p)).sum();
        Ok((sum / cells.len() as f64).powf(1.0 / p))
    }

    /// `⟨ρ*⟩_{p,Q}(v)`, the `p`-average of the pointwise dual norms.
    pub fn p_average_of_dual(&self, cube: &Cube, p: f64, v: &[f64]) -> Result<f64> {
        check_exponent(p)?;
        self.check_vec(v)?;
        self.grid().check(cube)?;
        let cells = self.grid().cells_of(cube);
        let mut sum = 0.0;
        for &c in &cells {
            sum += self.dual(c, v)?.powf(p);
        }
        Ok((sum / cells.len() as f64).powf(1.0 / p))
    }

    /// `⟨ρ⟩_{p,Q}` on each standard direction.
    pub fn p_average_on_directions(&self, cube: &Cube, p: f64) -> Result<Vec<f64>> {
        check_exponent(p)?;
        self.grid().check(cube)?;
        let dirs = DirectionSet::standard(self.dim());
        let cells = self.grid().cells_of(cube);
        let out: Vec<f64> = dirs
            .iter()
            .map(|u| {
                let s: f64 = cells.iter().map(|&c| self.eval(c, u).powf(p)).sum();
                (s / cells.len() as f64).powf(1.0 / p)
            })
            .collect();
        Ok(out)
    }

    /// `(⟨ρ⟩_{p,Q})*(v)`: dual of the averaged norm, maximized over the standard directions.
    pub fn dual_of_p_average(&self, cube: &Cube, p: f64, v: &[f64]) -> Result<f64> {
        self.check_vec(v)?;
        let avg = self.p_average_on_directions(cube, p)?;
        dual_by_sampling(self.dim(), &avg, v)
    }
}

/// `sup_u |⟨v, u⟩| / ρ(u)` over the standard directions, with `ρ(u_i) = values[i]`.
pub fn dual_by_sampling(d: usize, values: &[f64], v: &[f64]) -> Result<f64> {
    let dirs = DirectionSet::standard(d);
    let mut best = 0.0f64;
    for (u, r) in dirs.iter().zip(values) {
        if !(*r > 0.0 && r.is_finite()) {
            return Err(Error::DegenerateNorm {
                direction: u.to_vec(),
                cell: None,
            });
        }
        best = best.max(dot(u, v).abs() / r);
    }
    Ok(best)
}

fn with_cell(e: Error, cell: usize) -> Error {
    match e {
        Error::Singular { eigenvalue, .. } => Error::Singular {
            eigenvalue,
            cell: Some(cell),
        },
        other => other,
    }
}

/// Minkowski gauge `inf{t > 0 : v ∈ tK}`.
pub(crate) fn gauge(body: &ConvexBody, v: &[f64]) -> f64 {
    let n = norm(v);
    if n == 0.0 {
        return 0.0;
    }
    match body {
        ConvexBody::Segment(s) => {
            let ss = dot(s, s);
            if ss == 0.0 {
                return f64::INFINITY;
            }
            let t = dot(s, v) / ss;
            let resid: f64 = v.iter().zip(s).map(|(a, b)| (a - t * b).powi(2)).sum();
            if resid.sqrt() > 1e-12 * n {
                f64::INFINITY
            } else {
                t.abs()
            }
        }
        ConvexBody::Ellipsoid(a) => {
            let vecs = a.eigenvectors();
            let d = a.dim();
            let mut sum = 0.0;
            for (i, &lam) in a.eigenvalues().iter().enumerate() {
                let c: f64 = (0..d).map(|r| vecs.get(r, i) * v[r]).sum();
                if lam <= 0.0 {
                    if c.abs() > 1e-12 * n {
                        return f64::INFINITY;
                    }
                } else {
                    sum += (c / lam).powi(2);
                }
            }
            sum.sqrt()
        }
        ConvexBody::Sampled(s) => {
            let mut best = 0.0f64;
            for (u, h) in s.dirs.iter().zip(&s.h) {
                let c = dot(u, v).abs();
                if *h == 0.0 {
                    if c > 1e-12 * n {
                        return f64::INFINITY;
                    }
                } else {
                    best = best.max(c / h);
                }
            }
            best
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::zonotope;
    use crate::linalg::Mat;

    fn grid() -> DyadicGrid {
        DyadicGrid::new(1, 1).unwrap()
    }

    fn constant_matrix(m: SpdMatrix) -> NormFunction {
        NormFunction::Matrix(DyadicField::from_fn(grid(), |_| m.clone()))
    }

    fn constant_body(k: ConvexBody) -> NormFunction {
        NormFunction::Body(DyadicField::from_fn(grid(), |_| k.clone()))
    }

    /// `sup{|⟨v, w⟩| : ρ(w) ≤ 1}` over boundary points `u/ρ(u)`.
    fn brute_dual(rho: &NormFunction, v: &[f64]) -> f64 {
        (0..20000)
            .map(|k| {
                let t = std::f64::consts::PI * k as f64 / 20000.0;
                let u = [t.cos(), t.sin()];
                dot(&u, v).abs() / rho.eval(0, &u)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn dual_examples() {
        let euclid = constant_matrix(SpdMatrix::identity(2));
        assert!((euclid.dual(0, &[3.0, 4.0]).unwrap() - 5.0).abs() < 1e-14);
        let diag = constant_matrix(SpdMatrix::diag(&[2.0, 1.0]));
        assert!((diag.dual(0, &[1.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);

        // ℓ¹ norm: gauge of the diamond, whose dual is ℓ^∞
        let s = 0.5f64.sqrt();
        let diamond = zonotope(&[vec![s, s], vec![s, -s]]).unwrap().scale(s).unwrap();
        let l1 = constant_body(diamond);
        assert!((l1.eval(0, &[1.0, -2.0]) - 3.0).abs() < 1e-12);
        let dv = l1.dual(0, &[1.0, 1.0]).unwrap();
        assert!((dv - 1.0).abs() < 1e-12);
        assert!((brute_dual(&l1, &[1.0, 1.0]) - 1.0).abs() < 1e-6);

        let sq = constant_body(zonotope(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap());
        assert!((sq.dual(0, &[1.0, 1.0]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_body_is_reported() {
        let seg = constant_body(ConvexBody::segment(vec![1.0, 0.0]));
        assert!(matches!(seg.dual(0, &[1.0, 1.0]), Err(Error::DegenerateNorm { .. })));
        assert!(seg.eval(0, &[0.0, 1.0]).is_infinite());
        assert_eq!(seg.eval(0, &[2.0, 0.0]), 2.0);
    }

    #[test]
    fn matrix_duality_is_an_involution() {
        let w = SpdMatrix::new(Mat::from_rows([[3.0, 1.0], [1.0, 2.0]])).unwrap();
        let rho = constant_matrix(w.clone());
        let dual_vals: Vec<f64> = DirectionSet::standard(2)
            .iter()
            .map(|u| rho.dual(0, u).unwrap())
            .collect();
        for v in [[1.0, 0.0], [0.3, -0.7], [2.0, 5.0]] {
            let back = dual_by_sampling(2, &dual_vals, &v).unwrap();
            let exact = rho.eval(0, &v);
            assert!((back - exact).abs() <= 1e-3 * exact, "{back} vs {exact}");
        }
    }

    #[test]
    fn p_average_examples() {
        let g = grid();
        let w = DyadicField::new(g, vec![SpdMatrix::scalar(2.0), SpdMatrix::scalar(1.0)]).unwrap();
        let rho = NormFunction::Matrix(w);
        let v = rho.p_average(&g.root(), 2.0, &[1.0]).unwrap();
        assert!((v - 2.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(rho.p_average(&g.root(), 2.0, &[0.0]).unwrap(), 0.0);
        assert!(rho.p_average(&g.root(), 0.5, &[1.0]).is_err());

        let c = constant_matrix(SpdMatrix::diag(&[2.0, 5.0]));
        for v in [[1.0, 2.0], [-3.0, 0.5]] {
            let a = c.p_average(&g.root(), 3.0, &v).unwrap();
            assert!((a - c.eval(0, &v)).abs() < 1e-13);
        }
    }

    #[test]
    fn p_average_is_a_norm() {
        let g = DyadicGrid::new(1, 3).unwrap();
        let w = DyadicField::from_fn(g, |i| {
            SpdMatrix::from_eigen(vec![1.0 + i as f64, 0.5], Mat::rotation(0.3 * i as f64))
        });
        let rho = NormFunction::Matrix(w);
        let vs = [[1.0, 0.0], [0.2, -1.3], [-0.7, 0.4], [3.0, 3.0]];
        for a in &vs {
            for b in &vs {
                let sum = [a[0] + b[0], a[1] + b[1]];
                let lhs = rho.p_average(&g.root(), 2.5, &sum).unwrap();
                let rhs = rho.p_average(&g.root(), 2.5, a).unwrap() + rho.p_average(&g.root(), 2.5, b).unwrap();
                assert!(lhs <= rhs * (1.0 + 1e-14));
            }
        }
    }
}
