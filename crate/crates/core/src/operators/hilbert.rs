//! Truncated Hilbert transform `T_ε f(x) = ∫_{|x−y|>ε} f(y)/(x−y) dy` on one-dimensional grids.
//!
//! Fields are piecewise constant, so every cell contributes a closed-form
//! logarithm. Evaluation points are cell centers unless given explicitly.

use crate::error::{domain, Result};
use crate::grid::{DyadicField, DyadicGrid};
use crate::par;

fn check_line(grid: &DyadicGrid) -> Result<()> {
    if grid.dim() != 1 {
        return Err(domain("the Hilbert transform is defined on one-dimensional grids"));
    }
    Ok(())
}

/// `∫_a^b dy/(x−y)` for an interval not meeting `x`.
fn cell_integral(x: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    ((x - a).abs() / (x - b).abs()).ln()
}

/// `T_ε f(x)` at any real `x`, including points outside `[0,1)`.
pub fn hilbert_at(f: &DyadicField<f64>, x: f64, eps: f64) -> Result<f64> {
    let grid = f.grid();
    check_line(grid)?;
    if !(eps > 0.0) || !x.is_finite() {
        return Err(domain(format!("truncation must be positive and the point finite, got ε = {eps}, x = {x}")));
    }
    let h = grid.cell_measure();
    let mut sum = 0.0;
    for (cell, v) in f.values().iter().enumerate() {
        if *v == 0.0 {
            continue;
        }
        let a = grid.cell_corner(cell)[0];
        let b = a + h;
        let left = cell_integral(x, a, b.min(x - eps));
        let right = cell_integral(x, a.max(x + eps), b);
        sum += v * (left + right);
    }
    Ok(sum)
}

/// `T_ε f` at the center of `cell`.
pub fn hilbert_truncated(f: &DyadicField<f64>, cell: usize, eps: f64) -> Result<f64> {
    check_line(f.grid())?;
    if cell >= f.grid().cell_count() {
        return Err(domain(format!("cell {cell} is outside the grid")));
    }
    hilbert_at(f, f.grid().cell_center(cell)[0], eps)
}

/// `c_m = ln((m+½)/(m−½))`, the weight of the cells at offset `±m`.
fn offset_weights(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|m| if m == 0 { 0.0 } else { ((m as f64 + 0.5) / (m as f64 - 0.5)).ln() })
        .collect()
}

/// `T_ε f(x_i)` for `ε = (k+½)h`, `k = N, N−1, …, 0`, passed to `visit(k, value)`.
fn sweep(values: &[f64], c: &[f64], i: usize, mut visit: impl FnMut(usize, f64)) {
    let n = values.len();
    let get = |j: isize| if j >= 0 && (j as usize) < n { values[j as usize] } else { 0.0 };
    let mut t = 0.0;
    visit(n, t);
    for k in (0..n).rev() {
        let m = k + 1;
        t += (get(i as isize - m as isize) - get(i as isize + m as isize)) * c[m];
        visit(k, t);
    }
}

/// Principal value at cell centers: `T_ε` for any `ε` below half a cell.
pub fn hilbert_principal(f: &DyadicField<f64>) -> Result<DyadicField<f64>> {
    check_line(f.grid())?;
    let n = f.grid().cell_count();
    let c = offset_weights(n);
    let vals = par::map_range(n, |i| {
        let mut out = 0.0;
        sweep(f.values(), &c, i, |k, t| {
            if k == 0 {
                out = t;
            }
        });
        out
    });
    DyadicField::new(*f.grid(), vals)
}

/// `T*f(x) = sup_ε |T_ε f(x)|` at cell centers.
///
/// Between consecutive half-integer multiples of the cell width, `T_ε f(x)`
/// is affine in `ln ε`, so the supremum is attained on that finite set.
pub fn hilbert_maximal(f: &DyadicField<f64>) -> Result<DyadicField<f64>> {
    check_line(f.grid())?;
    let n = f.grid().cell_count();
    let c = offset_weights(n);
    let vals = par::map_range(n, |i| {
        let mut best = 0.0f64;
        sweep(f.values(), &c, i, |_, t| best = best.max(t.abs()));
        best
    });
    DyadicField::new(*f.grid(), vals)
}
