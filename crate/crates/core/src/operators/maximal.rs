//! Dyadic maximal operators.

use crate::convex::reducing_matrix;
use crate::error::{domain, Error, Result};
use crate::grid::{Cube, DyadicField, DyadicGrid, Pyramid, Vector};
use crate::linalg::{Mat, SpdMatrix};
use crate::par;

/// For every cell, the largest of `levels[k][ancestor at k]` over `k`, and
/// the coarsest level attaining it.
pub(crate) fn chain_max(grid: &DyadicGrid, levels: &[Vec<f64>]) -> (Vec<f64>, Vec<u32>) {
    let depth = grid.depth();
    let mut best = vec![levels[0][0]];
    let mut arg = vec![0u32];
    for k in 1..=depth {
        let count = grid.cubes_at(k);
        let mut nb = Vec::with_capacity(count);
        let mut na = Vec::with_capacity(count);
        for i in 0..count {
            let cube = grid.cube(k, i);
            let parent = grid.linear(&grid.parent(&cube).expect("non-root cube"));
            let v = levels[k as usize][i];
            if v > best[parent] {
                nb.push(v);
                na.push(k);
            } else {
                nb.push(best[parent]);
                na.push(arg[parent]);
            }
        }
        best = nb;
        arg = na;
    }
    (best, arg)
}

/// [`chain_max`] over the cube averages of a pyramid.
pub fn max_over_chains(pyr: &Pyramid<f64>) -> (Vec<f64>, Vec<u32>) {
    let grid = *pyr.grid();
    let levels: Vec<Vec<f64>> = (0..=grid.depth()).map(|k| pyr.level(k).to_vec()).collect();
    chain_max(&grid, &levels)
}

/// `M^d f(x) = max_{Q ∋ x} avg_Q |f|`.
pub fn maximal_scalar(f: &DyadicField<f64>) -> DyadicField<f64> {
    let (vals, _) = max_over_chains(&f.abs().pyramid());
    DyadicField::new(*f.grid(), vals).expect("one value per cell")
}

/// `M̃_w f(x) = max_{Q ∋ x} w(Q)^{-1} ∫_Q |f| w`.
pub fn maximal_weighted_universal(f: &DyadicField<f64>, w: &DyadicField<f64>) -> Result<DyadicField<f64>> {
    f.same_grid(w)?;
    if let Some(cell) = w.values().iter().position(|v| !(*v > 0.0)) {
        return Err(Error::InvalidCell {
            cell,
            msg: "weight must be positive".into(),
        });
    }
    let fw = DyadicField::new(*f.grid(), f.values().iter().zip(w.values()).map(|(a, b)| a.abs() * b).collect())?;
    let pf = fw.pyramid();
    let pw = w.pyramid();
    let grid = *f.grid();
    let levels: Vec<Vec<f64>> = (0..=grid.depth())
        .map(|k| pf.level(k).iter().zip(pw.level(k)).map(|(a, b)| a / b).collect())
        .collect();
    let (vals, _) = chain_max(&grid, &levels);
    DyadicField::new(grid, vals)
}

fn check_vector_field(w: &DyadicField<SpdMatrix>, f: &DyadicField<Vector>) -> Result<usize> {
    f.same_grid(w)?;
    let d = w.values()[0].dim();
    if f.vector_dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: f.vector_dim(),
        });
    }
    Ok(d)
}

fn cell_power(w: &DyadicField<SpdMatrix>, t: f64) -> Result<Vec<Mat>> {
    w.values()
        .iter()
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

/// `M_W f(x) = max_{Q ∋ x} avg_{y∈Q} |W(x)^{1/r} W(y)^{-1/r} f(y)|`.
///
/// Singular cells are an error; pass the weight through
/// [`regularize_weight`](crate::weights::regularize_weight) first to clamp them.
pub fn christ_goldberg(w: &DyadicField<SpdMatrix>, f: &DyadicField<Vector>, r: f64) -> Result<DyadicField<f64>> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(domain(format!("conjugation exponent must be ≥ 1, got {r}")));
    }
    check_vector_field(w, f)?;
    let up = cell_power(w, 1.0 / r)?;
    let down = cell_power(w, -1.0 / r)?;
    let g: Vec<Vector> = down.iter().zip(f.values()).map(|(m, v)| m.mul_vec(v)).collect();
    let grid = *f.grid();
    let vals = par::map_range(grid.cell_count(), |x| {
        let mut best = 0.0f64;
        for k in 0..=grid.depth() {
            let cube = grid.cube(k, grid.ancestor(x, k));
            let cells = grid.cells_of(&cube);
            let s: f64 = cells.iter().map(|&y| up[x].mul_vec_norm(&g[y])).sum();
            best = best.max(s / cells.len() as f64);
        }
        best
    });
    DyadicField::new(grid, vals)
}

/// `M'_W f(x) = max_{Q ∋ x} avg_{y∈Q} |R_Q W(y)^{-1} f(y)|` with `R_Q` the reducing matrix of `(W, Q, p)`.
pub fn christ_goldberg_aux(w: &DyadicField<SpdMatrix>, f: &DyadicField<Vector>, p: f64) -> Result<DyadicField<f64>> {
    check_vector_field(w, f)?;
    let inv = cell_power(w, -1.0)?;
    let g: Vec<Vector> = inv.iter().zip(f.values()).map(|(m, v)| m.mul_vec(v)).collect();
    let grid = *f.grid();
    let cubes: Vec<Cube> = grid.all_cubes().collect();
    let per_cube = par::try_map_range(cubes.len(), |i| -> Result<f64> {
        let rq = reducing_matrix(w, &cubes[i], p)?;
        let cells = grid.cells_of(&cubes[i]);
        let s: f64 = cells.iter().map(|&y| rq.mat().mul_vec_norm(&g[y])).sum();
        Ok(s / cells.len() as f64)
    })?;
    let mut levels = Vec::with_capacity(grid.depth() as usize + 1);
    let mut it = per_cube.into_iter();
    for k in 0..=grid.depth() {
        levels.push(it.by_ref().take(grid.cubes_at(k)).collect::<Vec<f64>>());
    }
    let (vals, _) = chain_max(&grid, &levels);
    DyadicField::new(grid, vals)
}
