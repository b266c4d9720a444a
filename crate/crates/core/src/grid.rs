//! Dyadic grids over `[0,1)^n`, their cubes, and piecewise-constant fields.
//!
//! Cells are the cubes of the finest level `L`. A cell is addressed by its
//! row-major linear index: in two dimensions the cell with integer
//! coordinates `(i0, i1)` has index `i0 · 2^L + i1`. Cubes at level `k` use
//! the same convention with side `2^k`.

use std::fmt;

use crate::error::{domain, Error, Result};
use crate::linalg::{Mat, SpdMatrix};

/// Vector values in `ℝ^d`.
pub type Vector = Vec<f64>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DyadicGrid {
    dim: u32,
    depth: u32,
    origin: [f64; 2],
}

impl DyadicGrid {
    /// Standard grid on `[0,1)^dim`; `dim` must be 1 or 2.
    pub fn new(dim: u32, depth: u32) -> Result<Self> {
        Self::with_origin(dim, depth, [0.0, 0.0])
    }

    /// Translated copy of the standard grid. The cube structure is identical;
    /// only cell coordinates move.
    pub fn with_origin(dim: u32, depth: u32, origin: [f64; 2]) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(domain(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if depth * dim > 24 {
            return Err(domain(format!("depth {depth} too large for dimension {dim}")));
        }
        Ok(DyadicGrid { dim, depth, origin })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    /// Number of cubes per axis at `level`.
    #[inline]
    pub fn side(&self, level: u32) -> usize {
        1usize << level
    }

    /// Number of cubes at `level`.
    #[inline]
    pub fn cubes_at(&self, level: u32) -> usize {
        1usize << (level * self.dim)
    }

    #[inline]
    pub fn cell_count(&self) -> usize {
        self.cubes_at(self.depth)
    }

    pub fn cell_measure(&self) -> f64 {
        (self.cell_count() as f64).recip()
    }

    /// Total number of dyadic cubes across all levels.
    pub fn cube_count(&self) -> usize {
        (0..=self.depth).map(|k| self.cubes_at(k)).sum()
    }

    pub fn root(&self) -> Cube {
        Cube::new(self.dim, 0, [0, 0])
    }

    pub fn cube(&self, level: u32, linear: usize) -> Cube {
        let side = self.side(level);
        let index = if self.dim == 1 {
            [linear, 0]
        } else {
            [linear / side, linear % side]
        };
        Cube::new(self.dim, level, index)
    }

    pub fn linear(&self, cube: &Cube) -> usize {
        if self.dim == 1 {
            cube.index[0]
        } else {
            cube.index[0] * self.side(cube.level) + cube.index[1]
        }
    }

    pub fn check(&self, cube: &Cube) -> Result<()> {
        let side = self.side(cube.level.min(self.depth));
        let in_range = cube.dim == self.dim
            && cube.level <= self.depth
            && cube.index[0] < side
            && (self.dim == 2 || cube.index[1] == 0)
            && cube.index[1] < side;
        if in_range {
            Ok(())
        } else {
            Err(Error::CubeOutsideGrid {
                cube: *cube,
                depth: self.depth,
            })
        }
    }

    pub fn cell_cube(&self, cell: usize) -> Cube {
        self.cube(self.depth, cell)
    }

    /// Linear index at `level` of the cube containing `cell`.
    #[inline]
    pub fn ancestor(&self, cell: usize, level: u32) -> usize {
        let shift = self.depth - level;
        if self.dim == 1 {
            cell >> shift
        } else {
            let side = self.side(self.depth);
            let (i0, i1) = (cell / side, cell % side);
            ((i0 >> shift) << level) + (i1 >> shift)
        }
    }

    /// Whether `cell` lies in `cube`.
    pub fn contains(&self, cube: &Cube, cell: usize) -> bool {
        self.ancestor(cell, cube.level) == self.linear(cube)
    }

    /// Finest-level cells of `cube`, in increasing order.
    pub fn cells_of(&self, cube: &Cube) -> Vec<usize> {
        let shift = self.depth - cube.level;
        let span = 1usize << shift;
        if self.dim == 1 {
            let start = cube.index[0] << shift;
            (start..start + span).collect()
        } else {
            let side = self.side(self.depth);
            let r0 = cube.index[0] << shift;
            let c0 = cube.index[1] << shift;
            let mut out = Vec::with_capacity(span * span);
            for r in r0..r0 + span {
                for c in c0..c0 + span {
                    out.push(r * side + c);
                }
            }
            out
        }
    }

    /// Number of finest cells in a cube at `level`.
    pub fn cells_per_cube(&self, level: u32) -> usize {
        1usize << ((self.depth - level) * self.dim)
    }

    pub fn parent(&self, cube: &Cube) -> Option<Cube> {
        (cube.level > 0).then(|| {
            Cube::new(
                self.dim,
                cube.level - 1,
                [cube.index[0] >> 1, cube.index[1] >> 1],
            )
        })
    }

    pub fn children(&self, cube: &Cube) -> Vec<Cube> {
        if cube.level >= self.depth {
            return Vec::new();
        }
        let [a, b] = cube.index;
        let lv = cube.level + 1;
        if self.dim == 1 {
            vec![Cube::new(1, lv, [2 * a, 0]), Cube::new(1, lv, [2 * a + 1, 0])]
        } else {
            (0..4)
                .map(|k| Cube::new(2, lv, [2 * a + (k >> 1), 2 * b + (k & 1)]))
                .collect()
        }
    }

    /// All cubes, level by level from the root.
    pub fn all_cubes(&self) -> impl Iterator<Item = Cube> + '_ {
        (0..=self.depth).flat_map(move |k| (0..self.cubes_at(k)).map(move |i| self.cube(k, i)))
    }

    /// Lower corner of a cell in physical coordinates.
    pub fn cell_corner(&self, cell: usize) -> [f64; 2] {
        let side = self.side(self.depth);
        let h = 1.0 / side as f64;
        if self.dim == 1 {
            [self.origin[0] + cell as f64 * h, 0.0]
        } else {
            [
                self.origin[0] + (cell / side) as f64 * h,
                self.origin[1] + (cell % side) as f64 * h,
            ]
        }
    }

    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let h = 0.5 / self.side(self.depth) as f64;
        let [x, y] = self.cell_corner(cell);
        if self.dim == 1 {
            [x + h, 0.0]
        } else {
            [x + h, y + h]
        }
    }
}

/// A dyadic cube: level and multi-index. In one dimension `index[1] == 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cube {
    pub dim: u32,
    pub level: u32,
    pub index: [usize; 2],
}

impl Cube {
    pub fn new(dim: u32, level: u32, index: [usize; 2]) -> Self {
        Cube { dim, level, index }
    }

    /// `|Q| = 2^(−n·level)`.
    pub fn measure(&self) -> f64 {
        (-((self.dim * self.level) as f64)).exp2()
    }

    /// Physical side length.
    pub fn side_length(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn contains_cube(&self, other: &Cube) -> bool {
        other.level >= self.level
            && (other.index[0] >> (other.level - self.level)) == self.index[0]
            && (other.index[1] >> (other.level - self.level)) == self.index[1]
    }
}

impl fmt::Display for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = self.side_length();
        if self.dim == 1 {
            write!(f, "[{}, {})", self.index[0] as f64 * h, (self.index[0] + 1) as f64 * h)
        } else {
            write!(
                f,
                "[{}, {})x[{}, {})",
                self.index[0] as f64 * h,
                (self.index[0] + 1) as f64 * h,
                self.index[1] as f64 * h,
                (self.index[1] + 1) as f64 * h
            )
        }
    }
}

/// Values that can be averaged over cubes.
pub trait Accumulate: Clone + Send + Sync {
    fn zero_like(&self) -> Self;
    fn add_assign(&mut self, other: &Self);
    fn scale(&mut self, s: f64);
}

impl Accumulate for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }
    fn scale(&mut self, s: f64) {
        *self *= s;
    }
}

impl Accumulate for Vector {
    fn zero_like(&self) -> Self {
        vec![0.0; self.len()]
    }
    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += b;
        }
    }
    fn scale(&mut self, s: f64) {
        for a in self.iter_mut() {
            *a *= s;
        }
    }
}

impl Accumulate for Mat {
    fn zero_like(&self) -> Self {
        Mat::zeros(self.dim())
    }
    fn add_assign(&mut self, other: &Self) {
        Mat::add_assign(self, other);
    }
    fn scale(&mut self, s: f64) {
        self.scale_mut(s);
    }
}

/// One value per finest-level cell.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicField<V> {
    grid: DyadicGrid,
    values: Vec<V>,
}

impl<V> DyadicField<V> {
    pub fn new(grid: DyadicGrid, values: Vec<V>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::DimensionMismatch {
                expected: grid.cell_count(),
                found: values.len(),
            });
        }
        Ok(DyadicField { grid, values })
    }

    pub fn from_fn(grid: DyadicGrid, f: impl FnMut(usize) -> V) -> Self {
        DyadicField {
            grid,
            values: (0..grid.cell_count()).map(f).collect(),
        }
    }

    pub fn grid(&self) -> &DyadicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[V] {
        &self.values
    }

    pub fn into_values(self) -> Vec<V> {
        self.values
    }

    pub fn get(&self, cell: usize) -> &V {
        &self.values[cell]
    }

    pub fn map<U>(&self, f: impl FnMut(&V) -> U) -> DyadicField<U> {
        DyadicField {
            grid: self.grid,
            values: self.values.iter().map(f).collect(),
        }
    }

    pub fn par_map<U: Send>(&self, f: impl Fn(&V) -> U + Sync + Send) -> DyadicField<U>
    where
        V: Sync,
    {
        DyadicField {
            grid: self.grid,
            values: crate::par::map_slice(&self.values, f),
        }
    }

    pub fn same_grid<U>(&self, other: &DyadicField<U>) -> Result<()> {
        if self.grid.dim != other.grid.dim || self.grid.depth != other.grid.depth {
            return Err(domain("fields live on different grids"));
        }
        Ok(())
    }
}

impl<V: Accumulate> DyadicField<V> {
    /// Mean of the cell values in `cube`.
    pub fn average(&self, cube: &Cube) -> Result<V> {
        self.grid.check(cube)?;
        let cells = self.grid.cells_of(cube);
        let mut acc = self.values[cells[0]].zero_like();
        for &c in &cells {
            acc.add_assign(&self.values[c]);
        }
        acc.scale(1.0 / cells.len() as f64);
        Ok(acc)
    }

    /// Averages over every dyadic cube, level by level.
    pub fn pyramid(&self) -> Pyramid<V> {
        Pyramid::build(self)
    }
}

impl DyadicField<f64> {
    pub fn constant(grid: DyadicGrid, c: f64) -> Self {
        Self::from_fn(grid, |_| c)
    }

    /// `∫ f dx`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_measure()
    }

    pub fn abs(&self) -> Self {
        self.map(|v| v.abs())
    }

    /// Weighted `L^p` norm; a matrix weight must be 1×1 here.
    pub fn lp_norm(&self, p: f64, weight: Option<WeightRef<'_>>) -> Result<f64> {
        check_exponent(p)?;
        let g = &self.grid;
        let terms: Vec<f64> = match weight {
            None => self.values.iter().map(|v| v.abs().powf(p)).collect(),
            Some(WeightRef::Scalar(w)) => {
                self.same_grid(w)?;
                self.values
                    .iter()
                    .zip(w.values())
                    .map(|(v, wv)| v.abs().powf(p) * wv)
                    .collect()
            }
            Some(WeightRef::Matrix(w)) => {
                self.same_grid(w)?;
                let mut out = Vec::with_capacity(self.values.len());
                for (cell, (v, m)) in self.values.iter().zip(w.values()).enumerate() {
                    if m.dim() != 1 {
                        return Err(Error::DimensionMismatch {
                            expected: 1,
                            found: m.dim(),
                        });
                    }
                    let wv = positive_definite(m, cell)?.mat().get(0, 0);
                    out.push(v.abs().powf(p) * wv);
                }
                out
            }
        };
        Ok((terms.iter().sum::<f64>() * g.cell_measure()).powf(1.0 / p))
    }
}

impl DyadicField<Vector> {
    pub fn zeros(grid: DyadicGrid, d: usize) -> Self {
        Self::from_fn(grid, |_| vec![0.0; d])
    }

    pub fn vector_dim(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    /// Pointwise Euclidean length.
    pub fn magnitude(&self) -> DyadicField<f64> {
        self.map(|v| crate::linalg::norm(v))
    }

    /// `(∫ |W^{1/p} f|^p)^{1/p}` for a matrix weight, `(∫ |f|^p w)^{1/p}` for a scalar one.
    pub fn lp_norm(&self, p: f64, weight: Option<WeightRef<'_>>) -> Result<f64> {
        check_exponent(p)?;
        let terms: Vec<f64> = match weight {
            None => self.values.iter().map(|v| crate::linalg::norm(v).powf(p)).collect(),
            Some(WeightRef::Scalar(w)) => {
                self.same_grid(w)?;
                self.values
                    .iter()
                    .zip(w.values())
                    .map(|(v, wv)| crate::linalg::norm(v).powf(p) * wv)
                    .collect()
            }
            Some(WeightRef::Matrix(w)) => {
                self.same_grid(w)?;
                let mut out = Vec::with_capacity(self.values.len());
                for (cell, (v, m)) in self.values.iter().zip(w.values()).enumerate() {
                    if m.dim() != v.len() {
                        return Err(Error::DimensionMismatch {
                            expected: v.len(),
                            found: m.dim(),
                        });
                    }
                    let root = positive_definite(m, cell)?.power(1.0 / p)?;
                    out.push(root.mat().mul_vec_norm(v).powf(p));
                }
                out
            }
        };
        Ok((terms.iter().sum::<f64>() * self.grid.cell_measure()).powf(1.0 / p))
    }
}

/// Borrowed weight for weighted norms.
#[derive(Clone, Copy, Debug)]
pub enum WeightRef<'a> {
    Scalar(&'a DyadicField<f64>),
    Matrix(&'a DyadicField<SpdMatrix>),
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(domain(format!("exponent must be a finite p ≥ 1, got {p}")));
    }
    Ok(())
}

fn positive_definite(m: &SpdMatrix, cell: usize) -> Result<&SpdMatrix> {
    if m.min_eigenvalue() <= 0.0 {
        return Err(Error::Singular {
            eigenvalue: m.min_eigenvalue(),
            cell: Some(cell),
        });
    }
    Ok(m)
}

/// Cube averages for every level: `levels[k][linear index]`.
#[derive(Clone, Debug)]
pub struct Pyramid<V> {
    grid: DyadicGrid,
    levels: Vec<Vec<V>>,
}

impl<V: Accumulate> Pyramid<V> {
    pub fn build(field: &DyadicField<V>) -> Self {
        let grid = field.grid;
        let depth = grid.depth as usize;
        let mut levels: Vec<Vec<V>> = vec![Vec::new(); depth + 1];
        levels[depth] = field.values.clone();
        let fan = 1usize << grid.dim;
        for k in (0..depth).rev() {
            let below = &levels[k + 1];
            let count = grid.cubes_at(k as u32);
            let mut cur = Vec::with_capacity(count);
            for i in 0..count {
                let cube = grid.cube(k as u32, i);
                let kids = grid.children(&cube);
                let mut acc = below[grid.linear(&kids[0])].clone();
                for kid in &kids[1..] {
                    acc.add_assign(&below[grid.linear(kid)]);
                }
                acc.scale(1.0 / fan as f64);
                cur.push(acc);
            }
            levels[k] = cur;
        }
        Pyramid { grid, levels }
    }

    pub fn grid(&self) -> &DyadicGrid {
        &self.grid
    }

    pub fn level(&self, k: u32) -> &[V] {
        &self.levels[k as usize]
    }

    pub fn get(&self, cube: &Cube) -> &V {
        &self.levels[cube.level as usize][self.grid.linear(cube)]
    }

    /// Averages of the cubes containing `cell`, root first.
    pub fn chain(&self, cell: usize) -> impl Iterator<Item = &V> + '_ {
        (0..=self.grid.depth).map(move |k| &self.levels[k as usize][self.grid.ancestor(cell, k)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_partition() {
        for dim in 1..=2 {
            let g = DyadicGrid::new(dim, 3).unwrap();
            assert_eq!(g.cell_count(), 1 << (dim * 3));
            for k in 0..=3 {
                let mut seen = vec![0u32; g.cell_count()];
                for i in 0..g.cubes_at(k) {
                    for c in g.cells_of(&g.cube(k, i)) {
                        seen[c] += 1;
                    }
                }
                assert!(seen.iter().all(|&s| s == 1));
            }
        }
    }

    #[test]
    fn parent_measure_ratio() {
        let g = DyadicGrid::new(2, 3).unwrap();
        for q in g.all_cubes().filter(|q| q.level > 0) {
            let p = g.parent(&q).unwrap();
            assert_eq!(p.measure(), 4.0 * q.measure());
            assert!(p.contains_cube(&q));
            assert!(g.children(&p).contains(&q));
        }
    }

    #[test]
    fn ancestor_matches_cells_of() {
        let g = DyadicGrid::new(2, 3).unwrap();
        for q in g.all_cubes() {
            for c in g.cells_of(&q) {
                assert!(g.contains(&q, c));
            }
        }
    }

    #[test]
    fn average_examples() {
        let g1 = DyadicGrid::new(1, 1).unwrap();
        let f = DyadicField::new(g1, vec![2.0, 1.0]).unwrap();
        assert_eq!(f.average(&g1.root()).unwrap(), 1.5);

        let g3 = DyadicGrid::new(1, 3).unwrap();
        let idx = DyadicField::from_fn(g3, |c| c as f64);
        // direct summation: (0+1+2+3)/4
        let half = Cube::new(1, 1, [0, 0]);
        assert_eq!(idx.average(&half).unwrap(), (0.0 + 1.0 + 2.0 + 3.0) / 4.0);

        let c = DyadicField::constant(g3, 7.25);
        for q in g3.all_cubes() {
            assert_eq!(c.average(&q).unwrap(), 7.25);
        }
    }

    #[test]
    fn average_outside_grid_is_error() {
        let g = DyadicGrid::new(1, 2).unwrap();
        let f = DyadicField::constant(g, 1.0);
        assert!(matches!(
            f.average(&Cube::new(1, 3, [0, 0])),
            Err(Error::CubeOutsideGrid { .. })
        ));
        assert!(f.average(&Cube::new(1, 1, [2, 0])).is_err());
    }

    #[test]
    fn lp_norm_examples() {
        let g = DyadicGrid::new(1, 4).unwrap();
        assert!((DyadicField::constant(g, 1.0).lp_norm(2.0, None).unwrap() - 1.0).abs() < 1e-15);

        let g1 = DyadicGrid::new(1, 1).unwrap();
        let f = DyadicField::new(g1, vec![2.0, 0.0]).unwrap();
        let w = DyadicField::new(g1, vec![1.0, 4.0]).unwrap();
        // (|2|^2 · 1 · 1/2)^(1/2)
        let expect = (4.0f64 * 1.0 * 0.5).sqrt();
        assert!((f.lp_norm(2.0, Some(WeightRef::Scalar(&w))).unwrap() - expect).abs() < 1e-15);

        let v = DyadicField::from_fn(g, |_| vec![3.0, 4.0]);
        let id = DyadicField::from_fn(g, |_| SpdMatrix::identity(2));
        for p in [1.0, 1.5, 3.0] {
            assert!((v.lp_norm(p, Some(WeightRef::Matrix(&id))).unwrap() - 5.0).abs() < 1e-13);
        }
        assert!(f.lp_norm(0.5, None).is_err());
    }

    #[test]
    fn singular_matrix_weight_reports_cell() {
        let g = DyadicGrid::new(1, 1).unwrap();
        let v = DyadicField::from_fn(g, |_| vec![1.0, 1.0]);
        let w = DyadicField::new(g, vec![SpdMatrix::identity(2), SpdMatrix::diag(&[1.0, 0.0])]).unwrap();
        match v.lp_norm(2.0, Some(WeightRef::Matrix(&w))) {
            Err(Error::Singular { cell: Some(1), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pyramid_tower_property() {
        let g = DyadicGrid::new(2, 3).unwrap();
        let f = DyadicField::from_fn(g, |c| ((c * 37) % 11) as f64);
        let pyr = f.pyramid();
        for q in g.all_cubes() {
            assert!((pyr.get(&q) - f.average(&q).unwrap()).abs() < 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn field(depth: u32) -> impl Strategy<Value = DyadicField<f64>> {
            let g = DyadicGrid::new(1, depth).unwrap();
            proptest::collection::vec(-10.0f64..10.0, g.cell_count())
                .prop_map(move |v| DyadicField::new(g, v).unwrap())
        }

        proptest! {
            #[test]
            fn average_linear_and_monotone(f in field(4), g in field(4), lv in 0u32..=4, idx in 0usize..16) {
                let grid = *f.grid();
                let q = grid.cube(lv, idx % grid.cubes_at(lv));
                let sum = DyadicField::new(grid, f.values().iter().zip(g.values()).map(|(a, b)| a + b).collect()).unwrap();
                let lhs = sum.average(&q).unwrap();
                let rhs = f.average(&q).unwrap() + g.average(&q).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-12);
                let upper = DyadicField::new(grid, f.values().iter().map(|a| a + 0.5).collect()).unwrap();
                prop_assert!(f.average(&q).unwrap() <= upper.average(&q).unwrap());
            }

            #[test]
            fn tower(f in field(5), lv in 0u32..5, idx in 0usize..32) {
                let grid = *f.grid();
                let q = grid.cube(lv, idx % grid.cubes_at(lv));
                let kids = grid.children(&q);
                let mean: f64 = kids.iter().map(|k| f.average(k).unwrap()).sum::<f64>() / kids.len() as f64;
                prop_assert!((mean - f.average(&q).unwrap()).abs() < 1e-12);
            }

            #[test]
            fn scalar_matrix_weight_matches_scalar_weight(
                vals in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0, 0.1f64..4.0), 8),
                p in 1.0f64..4.0,
            ) {
                let grid = DyadicGrid::new(1, 3).unwrap();
                let f = DyadicField::new(grid, vals.iter().map(|(a, b, _)| vec![*a, *b]).collect()).unwrap();
                let w = DyadicField::new(grid, vals.iter().map(|(_, _, w)| *w).collect()).unwrap();
                let wm = w.map(|&x| SpdMatrix::diag(&[x, x]));
                let lhs = f.lp_norm(p, Some(WeightRef::Matrix(&wm))).unwrap();
                let rhs = f.magnitude().lp_norm(p, Some(WeightRef::Scalar(&w))).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
            }
        }
    }
}
