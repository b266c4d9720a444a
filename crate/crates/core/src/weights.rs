//! Weight characteristics: scalar `A_p` and `A_1`, the three matrix
//! formulations, the norm-function `A_p` constant, and the convex-body `A_1`
//! class. Every supremum runs over all dyadic cubes of the field's grid and
//! the report records which cube attains it.

use std::fmt;
use std::str::FromStr;

use crate::convex::{ConvexBody, DirectionSet, NormFunction};
use crate::error::{domain, Error, Result};
use crate::grid::{Cube, DyadicField, DyadicGrid, Pyramid};
use crate::linalg::{op_norm_of_product, Mat, SpdMatrix, EIGEN_FLOOR};
use crate::operators::maximal::max_over_chains;
use crate::par;

/// Which definition a characteristic follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `(avg w)(avg w^{1−p'})^{p−1}`.
    ScalarAp,
    /// `avg_Q w / w(x)`.
    ScalarA1,
    /// `|(avg W)^{1/2} (avg W^{-1})^{1/2}|_op`.
    TreilVolberg,
    /// `avg_x (avg_y |W^{1/p}(x) W^{-1/p}(y)|^{p'})^{p/p'}`.
    Roudenko,
    /// `avg_y |W^{-1}(x) W(y)|_op`.
    MatrixA1,
    /// `⟨ρ*⟩_{p',Q}(v) / (⟨ρ⟩_{p,Q})*(v)`.
    NormAp,
    /// `h_{MF(x)}(u) / h_{F(x)}(u)`.
    ConvexA1,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::ScalarAp,
        Variant::ScalarA1,
        Variant::TreilVolberg,
        Variant::Roudenko,
        Variant::MatrixA1,
        Variant::NormAp,
        Variant::ConvexA1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::ScalarAp => "scalar-ap",
            Variant::ScalarA1 => "scalar-a1",
            Variant::TreilVolberg => "tv",
            Variant::Roudenko => "roudenko",
            Variant::MatrixA1 => "matrix-a1",
            Variant::NormAp => "norm-ap",
            Variant::ConvexA1 => "convex-a1",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| domain(format!("unknown variant {s:?}")))
    }
}

/// A characteristic together with the cube attaining it.
#[derive(Clone, Debug, PartialEq)]
pub struct CharacteristicReport {
    pub value: f64,
    pub variant: Variant,
    pub p: Option<f64>,
    pub argmax_cube: Cube,
    /// Whether any matrix had eigenvalues raised to the floor.
    pub clamped: bool,
}

impl CharacteristicReport {
    /// The larger of several reports, e.g. over translated grids; ties keep the first.
    pub fn max_of(reports: impl IntoIterator<Item = CharacteristicReport>) -> Option<CharacteristicReport> {
        let mut best: Option<CharacteristicReport> = None;
        let mut clamped = false;
        for r in reports {
            clamped |= r.clamped;
            if best.as_ref().is_none_or(|b| r.value > b.value) {
                best = Some(r);
            }
        }
        best.map(|mut b| {
            b.clamped = clamped;
            b
        })
    }
}

/// Sup of `per_cube` over every cube, level by level; the first maximum wins.
fn sup_over_cubes(grid: &DyadicGrid, per_cube: impl Fn(&Cube) -> f64 + Sync + Send) -> (f64, Cube) {
    let cubes: Vec<Cube> = grid.all_cubes().collect();
    let vals = par::map_slice(&cubes, |q| per_cube(q));
    let mut best = (f64::NEG_INFINITY, grid.root());
    for (q, v) in cubes.iter().zip(vals) {
        if v > best.0 {
            best = (v, *q);
        }
    }
    best
}

fn check_positive(w: &DyadicField<f64>) -> Result<()> {
    match w.values().iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        Some(cell) => Err(Error::InvalidCell {
            cell,
            msg: format!("weight value {} is not positive", w.values()[cell]),
        }),
        None => Ok(()),
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(domain(format!("exponent must satisfy 1 < p < ∞, got {p}")));
    }
    Ok(())
}

/// `p' = p / (p − 1)`.
pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

/// `[w]_{A_p} = sup_Q (avg_Q w)(avg_Q w^{1−p'})^{p−1}`.
pub fn scalar_ap(w: &DyadicField<f64>, p: f64) -> Result<CharacteristicReport> {
    check_p(p)?;
    check_positive(w)?;
    let sigma = dual_weight(w, p)?;
    let pw = w.pyramid();
    let ps = sigma.pyramid();
    let (value, cube) = sup_over_cubes(w.grid(), |q| pw.get(q) * ps.get(q).powf(p - 1.0));
    Ok(CharacteristicReport {
        value,
        variant: Variant::ScalarAp,
        p: Some(p),
        argmax_cube: cube,
        clamped: false,
    })
}

/// `[w]_{A_1} = sup_Q ess sup_{x ∈ Q} avg_Q w / w(x)`.
pub fn scalar_a1(w: &DyadicField<f64>) -> Result<CharacteristicReport> {
    check_positive(w)?;
    let avg = w.pyramid();
    let low = min_pyramid(w);
    let (value, cube) = sup_over_cubes(w.grid(), |q| avg.get(q) / low[q.level as usize][w.grid().linear(q)]);
    Ok(CharacteristicReport {
        value,
        variant: Variant::ScalarA1,
        p: None,
        argmax_cube: cube,
        clamped: false,
    })
}

/// Cellwise minimum over every cube, indexed like a [`Pyramid`].
fn min_pyramid(w: &DyadicField<f64>) -> Vec<Vec<f64>> {
    let g = w.grid();
    let depth = g.depth() as usize;
    let mut levels = vec![Vec::new(); depth + 1];
    levels[depth] = w.values().to_vec();
    for k in (0..depth).rev() {
        levels[k] = (0..g.cubes_at(k as u32))
            .map(|i| {
                g.children(&g.cube(k as u32, i))
                    .iter()
                    .map(|c| levels[k + 1][g.linear(c)])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
    }
    levels
}

/// `σ = w^{1−p'}`.
pub fn dual_weight(w: &DyadicField<f64>, p: f64) -> Result<DyadicField<f64>> {
    check_p(p)?;
    check_positive(w)?;
    let e = 1.0 - conjugate(p);
    Ok(w.map(|v| v.powf(e)))
}

/// `w₀ · w₁^{1−p}`.
pub fn reverse_factorization_scalar(w0: &DyadicField<f64>, w1: &DyadicField<f64>, p: f64) -> Result<DyadicField<f64>> {
    check_p(p)?;
    w0.same_grid(w1)?;
    check_positive(w0)?;
    check_positive(w1)?;
    let values = w0.values().iter().zip(w1.values()).map(|(a, b)| a * b.powf(1.0 - p)).collect();
    DyadicField::new(*w0.grid(), values)
}

/// Cellwise matrices with eigenvalues at least `EIGEN_FLOOR·λ_max`, and whether any was raised.
fn regularize(w: &DyadicField<SpdMatrix>) -> Result<(Vec<SpdMatrix>, bool)> {
    let mut clamped = false;
    let mut out = Vec::with_capacity(w.values().len());
    for (cell, m) in w.values().iter().enumerate() {
        if m.max_eigenvalue() <= 0.0 {
            return Err(Error::Singular {
                eigenvalue: m.max_eigenvalue(),
                cell: Some(cell),
            });
        }
        if m.min_eigenvalue() < EIGEN_FLOOR * m.max_eigenvalue() {
            clamped = true;
            out.push(m.regularized());
        } else {
            out.push(m.clone());
        }
    }
    Ok((out, clamped))
}

/// Copy of `w` with near-singular cells clamped to the eigenvalue floor, and whether any was.
pub fn regularize_weight(w: &DyadicField<SpdMatrix>) -> Result<(DyadicField<SpdMatrix>, bool)> {
    let (ws, clamped) = regularize(w)?;
    Ok((DyadicField::new(*w.grid(), ws)?, clamped))
}

fn cellwise_power(ws: &[SpdMatrix], t: f64) -> Result<Vec<Mat>> {
    ws.iter()
        .enumerate()
        .map(|(cell, m)| {
            m.power(t).map(|r| r.mat().clone()).map_err(|e| match e {
                Error::Singular { eigenvalue, .. } => Error::Singular {
                    eigenvalue,
                    cell: Some(cell),
                },
                other => other,
            })
        })
        .collect()
}

/// `sup_Q |(avg_Q W)^{1/2} (avg_Q W^{-1})^{1/2}|_op`.
pub fn matrix_a2_tv(w: &DyadicField<SpdMatrix>) -> Result<CharacteristicReport> {
    let (ws, clamped) = regularize(w)?;
    let grid = *w.grid();
    let direct = DyadicField::new(grid, ws.iter().map(|m| m.mat().clone()).collect())?;
    let inverse = DyadicField::new(grid, cellwise_power(&ws, -1.0)?)?;
    let pa = Pyramid::build(&direct);
    let pb = Pyramid::build(&inverse);
    let cubes: Vec<Cube> = grid.all_cubes().collect();
    let vals = par::try_map_range(cubes.len(), |i| -> Result<f64> {
        let a = SpdMatrix::new(pa.get(&cubes[i]).clone())?.sqrt();
        let b = SpdMatrix::new(pb.get(&cubes[i]).clone())?.sqrt();
        Ok(op_norm_of_product(a.mat(), b.mat()))
    })?;
    let (value, cube) = first_max(&cubes, &vals);
    Ok(CharacteristicReport {
        value,
        variant: Variant::TreilVolberg,
        p: Some(2.0),
        argmax_cube: cube,
        clamped,
    })
}

fn first_max(cubes: &[Cube], vals: &[f64]) -> (f64, Cube) {
    let mut best = (f64::NEG_INFINITY, cubes[0]);
    for (q, &v) in cubes.iter().zip(vals) {
        if v > best.0 {
            best = (v, *q);
        }
    }
    best
}

/// `sup_Q avg_{x∈Q} (avg_{y∈Q} |W^{1/p}(x) W^{-1/p}(y)|_op^{p'})^{p/p'}`.
pub fn matrix_ap_roudenko(w: &DyadicField<SpdMatrix>, p: f64) -> Result<CharacteristicReport> {
    check_p(p)?;
    let (ws, clamped) = regularize(w)?;
    let up = cellwise_power(&ws, 1.0 / p)?;
    let down = cellwise_power(&ws, -1.0 / p)?;
    let q = conjugate(p);
    let grid = w.grid();
    let (value, cube) = sup_over_cubes(grid, |cube| {
        let cells = grid.cells_of(cube);
        let n = cells.len() as f64;
        let mut outer = 0.0;
        for &x in &cells {
            let inner: f64 = cells.iter().map(|&y| op_norm_of_product(&up[x], &down[y]).powf(q)).sum();
            outer += (inner / n).powf(p / q);
        }
        outer / n
    });
    Ok(CharacteristicReport {
        value,
        variant: Variant::Roudenko,
        p: Some(p),
        argmax_cube: cube,
        clamped,
    })
}

/// `sup_Q ess sup_{x∈Q} avg_{y∈Q} |W^{-1}(x) W(y)|_op`.
pub fn matrix_a1(w: &DyadicField<SpdMatrix>) -> Result<CharacteristicReport> {
    let (ws, clamped) = regularize(w)?;
    let inv = cellwise_power(&ws, -1.0)?;
    let grid = w.grid();
    let (value, cube) = sup_over_cubes(grid, |cube| {
        let cells = grid.cells_of(cube);
        let n = cells.len() as f64;
        cells
            .iter()
            .map(|&x| cells.iter().map(|&y| op_norm_of_product(&inv[x], ws[y].mat())).sum::<f64>() / n)
            .fold(f64::NEG_INFINITY, f64::max)
    });
    Ok(CharacteristicReport {
        value,
        variant: Variant::MatrixA1,
        p: None,
        argmax_cube: cube,
        clamped,
    })
}

/// Smallest `C` with `⟨ρ*⟩_{p',Q}(v) ≤ C·(⟨ρ⟩_{p,Q})*(v)` over all cubes and the given vectors.
pub fn tv_norm_ap_constant(rho: &NormFunction, p: f64, test_vectors: &[Vec<f64>]) -> Result<CharacteristicReport> {
    check_p(p)?;
    if test_vectors.is_empty() {
        return Err(domain("at least one test vector is required"));
    }
    let q = conjugate(p);
    let grid = *rho.grid();
    let cubes: Vec<Cube> = grid.all_cubes().collect();
    let vals = par::try_map_range(cubes.len(), |i| -> Result<f64> {
        let cube = &cubes[i];
        let mut best = 0.0f64;
        for v in test_vectors {
            let num = rho.p_average_of_dual(cube, q, v)?;
            let den = rho.dual_of_p_average(cube, p, v)?;
            if den > 0.0 {
                best = best.max(num / den);
            }
        }
        Ok(best)
    })?;
    let (value, cube) = first_max(&cubes, &vals);
    Ok(CharacteristicReport {
        value,
        variant: Variant::NormAp,
        p: Some(p),
        argmax_cube: cube,
        clamped: false,
    })
}

/// Smallest `C` with `MF(x) ⊆ C·F(x)` on every cell and standard direction.
pub fn a1k_characteristic(f: &DyadicField<ConvexBody>) -> Result<CharacteristicReport> {
    let d = f.values()[0].dim();
    for (cell, body) in f.values().iter().enumerate() {
        if body.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: body.dim(),
            });
        }
        body.check_absorbing().map_err(|e| Error::InvalidCell {
            cell,
            msg: e.to_string(),
        })?;
    }
    let dirs = DirectionSet::standard(d);
    let grid = *f.grid();
    let table: Vec<Vec<f64>> = par::map_slice(f.values(), |b| b.support_on(&dirs));
    // per direction: the dyadic maximal function of y ↦ h_{F(y)}(u), with its cube
    let per_dir = par::map_range(dirs.len(), |j| {
        let column: Vec<f64> = table.iter().map(|h| h[j]).collect();
        let field = DyadicField::new(grid, column).expect("one value per cell");
        max_over_chains(&field.pyramid())
    });
    let mut best = (f64::NEG_INFINITY, grid.root());
    for cell in 0..grid.cell_count() {
        for (j, (vals, levels)) in per_dir.iter().enumerate() {
            let r = vals[cell] / table[cell][j];
            if r > best.0 {
                best = (r, grid.cube(levels[cell], grid.ancestor(cell, levels[cell])));
            }
        }
    }
    Ok(CharacteristicReport {
        value: best.0,
        variant: Variant::ConvexA1,
        p: None,
        argmax_cube: best.1,
        clamped: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(depth: u32) -> DyadicGrid {
        DyadicGrid::new(1, depth).unwrap()
    }

    fn two_point() -> DyadicField<f64> {
        DyadicField::new(grid1(1), vec![2.0, 1.0]).unwrap()
    }

    #[test]
    fn scalar_ap_examples() {
        let ones = DyadicField::constant(grid1(3), 1.0);
        assert_eq!(scalar_ap(&ones, 2.5).unwrap().value, 1.0);
        let r = scalar_ap(&two_point(), 2.0).unwrap();
        assert!((r.value - 9.0 / 8.0).abs() < 1e-15);
        assert_eq!(r.argmax_cube, grid1(1).root());
        let scaled = two_point().map(|v| 7.0 * v);
        assert!((scalar_ap(&scaled, 2.0).unwrap().value - 9.0 / 8.0).abs() < 1e-14);
        assert!(scalar_ap(&ones, 1.0).is_err());
    }

    #[test]
    fn scalar_a1_examples() {
        assert_eq!(scalar_a1(&DyadicField::constant(grid1(2), 3.0)).unwrap().value, 1.0);
        assert!((scalar_a1(&two_point()).unwrap().value - 1.5).abs() < 1e-15);
        let mut prev = 0.0;
        for eps in [0.5, 0.1, 0.01, 0.001] {
            let w = DyadicField::new(grid1(2), vec![1.0, 1.0, eps, 1.0]).unwrap();
            let v = scalar_a1(&w).unwrap().value;
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn dual_weight_examples() {
        let ones = DyadicField::constant(grid1(2), 1.0);
        assert!(dual_weight(&ones, 3.0).unwrap().values().iter().all(|v| *v == 1.0));
        let s = dual_weight(&two_point(), 2.0).unwrap();
        assert_eq!(s.values(), &[0.5, 1.0]);
        assert!((scalar_ap(&s, 2.0).unwrap().value - 9.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn matrix_characteristics_collapse_in_one_dimension() {
        let w = two_point();
        let m = w.map(|v| SpdMatrix::scalar(*v));
        assert!((matrix_ap_roudenko(&m, 2.0).unwrap().value - 9.0 / 8.0).abs() < 1e-14);
        assert!((matrix_a1(&m).unwrap().value - 1.5).abs() < 1e-14);
        assert!((matrix_a2_tv(&m).unwrap().value - (9.0f64 / 8.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn matrix_characteristic_examples() {
        let g = grid1(2);
        let a = SpdMatrix::new(Mat::from_rows([[2.0, 0.5], [0.5, 1.0]])).unwrap();
        let c = DyadicField::from_fn(g, |_| a.clone());
        assert!((matrix_a2_tv(&c).unwrap().value - 1.0).abs() < 1e-12);
        assert!((matrix_ap_roudenko(&c, 3.0).unwrap().value - 1.0).abs() < 1e-12);
        assert!((matrix_a1(&c).unwrap().value - 1.0).abs() < 1e-12);

        let diag = two_point().map(|v| SpdMatrix::diag(&[*v, 1.0]));
        assert!((matrix_a2_tv(&diag).unwrap().value - (9.0f64 / 8.0).sqrt()).abs() < 1e-14);

        let w0 = DyadicField::from_fn(g, |i| SpdMatrix::from_eigen(vec![1.0, 2.0 + i as f64], Mat::rotation(i as f64)));
        let w5 = w0.map(|m| m.scaled(5.0));
        let a = matrix_a1(&w0).unwrap().value;
        assert!((matrix_a1(&w5).unwrap().value - a).abs() < 1e-12 * a);
    }

    #[test]
    fn roudenko_diagonal_bounds() {
        let g = grid1(3);
        let w1 = DyadicField::from_fn(g, |i| 1.0 + i as f64);
        let w2 = DyadicField::from_fn(g, |i| 1.0 / (1.0 + (i * i) as f64));
        let m = DyadicField::from_fn(g, |i| SpdMatrix::diag(&[w1.values()[i], w2.values()[i]]));
        for p in [1.5, 2.0, 3.0] {
            let a = scalar_ap(&w1, p).unwrap().value;
            let b = scalar_ap(&w2, p).unwrap().value;
            let r = matrix_ap_roudenko(&m, p).unwrap().value;
            assert!(r >= a.max(b) * (1.0 - 1e-12), "p={p}");
            assert!(r <= 2f64.powf(p) * (a + b), "p={p}");
        }
    }

    #[test]
    fn singular_weights_are_clamped_and_reported() {
        let g = grid1(1);
        let w = DyadicField::new(g, vec![SpdMatrix::diag(&[1.0, 0.0]), SpdMatrix::identity(2)]).unwrap();
        let r = matrix_a2_tv(&w).unwrap();
        assert!(r.clamped);
        assert!(r.value.is_finite());
    }

    #[test]
    fn norm_ap_constant() {
        let g = grid1(1);
        let vs = vec![vec![1.0]];
        let rho = NormFunction::Matrix(two_point().map(|v| SpdMatrix::scalar(*v)));
        for p in [1.5, 2.0, 3.0] {
            let c = tv_norm_ap_constant(&rho, p, &vs).unwrap().value;
            let wp = two_point().map(|v| v.powf(p));
            let want = scalar_ap(&wp, p).unwrap().value.powf(1.0 / p);
            assert!((c - want).abs() < 1e-12, "p={p}: {c} vs {want}");
        }
        let constant = NormFunction::Matrix(DyadicField::from_fn(g, |_| SpdMatrix::diag(&[2.0, 1.0])));
        let dirs: Vec<Vec<f64>> = DirectionSet::standard(2).iter().map(|u| u.to_vec()).collect();
        let c = tv_norm_ap_constant(&constant, 2.0, &dirs).unwrap().value;
        assert!((c - 1.0).abs() < 1e-3, "{c}");
    }

    #[test]
    fn convex_a1_examples() {
        let g = grid1(1);
        let k = ConvexBody::ellipsoid(SpdMatrix::diag(&[1.0, 2.0]));
        let c = DyadicField::from_fn(g, |_| k.clone());
        assert!((a1k_characteristic(&c).unwrap().value - 1.0).abs() < 1e-14);

        let f = two_point().map(|v| ConvexBody::unit_ball(2).scale(*v).unwrap());
        let r = a1k_characteristic(&f).unwrap();
        assert!((r.value - 1.5).abs() < 1e-14);
        assert_eq!(r.argmax_cube, g.root());

        let seg = DyadicField::from_fn(g, |_| ConvexBody::segment(vec![1.0, 0.0]));
        assert!(matches!(a1k_characteristic(&seg), Err(Error::InvalidCell { .. })));
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("nope".parse::<Variant>().is_err());
    }
}
