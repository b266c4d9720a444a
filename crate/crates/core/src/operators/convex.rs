//! Convex-body averages, sparse sums and the set-valued maximal operator.

use std::sync::Arc;

use super::maximal::chain_max;
use super::sparse::{push_down, SparseFamily};
use crate::convex::{ConvexBody, DirectionSet};
use crate::error::{domain, Error, Result};
use crate::grid::{check_exponent, Cube, DyadicField, DyadicGrid, Vector};
use crate::linalg::{dot, SpdMatrix};
use crate::par;

/// Support values of a body field on a direction set, one scalar field per direction.
#[derive(Clone, Debug)]
pub struct SupportTable {
    grid: DyadicGrid,
    dirs: Arc<DirectionSet>,
    /// `columns[j][cell] = h_{F(cell)}(u_j)`.
    columns: Vec<Vec<f64>>,
}

impl SupportTable {
    /// Table of `F` on the standard directions of its dimension.
    pub fn of(f: &DyadicField<ConvexBody>) -> Self {
        let d = f.values()[0].dim();
        Self::on(f, DirectionSet::standard(d))
    }

    pub fn on(f: &DyadicField<ConvexBody>, dirs: Arc<DirectionSet>) -> Self {
        let rows: Vec<Vec<f64>> = par::map_slice(f.values(), |b| b.support_on(&dirs));
        let columns = (0..dirs.len()).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        SupportTable {
            grid: *f.grid(),
            dirs,
            columns,
        }
    }

    fn from_columns(grid: DyadicGrid, dirs: Arc<DirectionSet>, columns: Vec<Vec<f64>>) -> Self {
        SupportTable { grid, dirs, columns }
    }

    pub fn grid(&self) -> &DyadicGrid {
        &self.grid
    }

    pub fn directions(&self) -> &Arc<DirectionSet> {
        &self.dirs
    }

    /// The scalar field `y ↦ h_{F(y)}(u_j)`.
    pub fn direction(&self, j: usize) -> DyadicField<f64> {
        DyadicField::new(self.grid, self.columns[j].clone()).expect("one value per cell")
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn value(&self, cell: usize, j: usize) -> f64 {
        self.columns[j][cell]
    }

    /// Sampled bodies on the table's directions.
    pub fn to_field(&self) -> DyadicField<ConvexBody> {
        let m = self.dirs.len();
        DyadicField::from_fn(self.grid, |c| {
            let h = (0..m).map(|j| self.columns[j][c]).collect();
            ConvexBody::sampled(self.dirs.clone(), h).expect("support values are valid")
        })
    }

    /// Applies a scalar operator to every direction column.
    pub fn map_columns(&self, op: impl Fn(&[f64]) -> Vec<f64> + Sync + Send) -> Self {
        let columns = par::map_slice(&self.columns, |c| op(c));
        Self::from_columns(self.grid, self.dirs.clone(), columns)
    }

    /// `Σ_k c_k T_k` column by column for tables on a common grid and direction set.
    pub fn combine(tables: &[&SupportTable], coef: &[f64]) -> Self {
        let first = tables[0];
        let columns = (0..first.columns.len())
            .map(|j| {
                (0..first.grid.cell_count())
                    .map(|c| tables.iter().zip(coef).map(|(t, a)| a * t.columns[j][c]).sum())
                    .collect()
            })
            .collect();
        Self::from_columns(first.grid, first.dirs.clone(), columns)
    }
}

/// Scale factors `c_y` with `f(y) = c_y·v` if every vector lies on one line.
fn common_line(vectors: &[&Vector]) -> Option<(Vector, Vec<f64>)> {
    let v = vectors.iter().copied().max_by(|a, b| dot(a, a).total_cmp(&dot(b, b)))?;
    let vv = dot(v, v);
    if vv == 0.0 {
        return Some((v.clone(), vec![0.0; vectors.len()]));
    }
    let mut coef = Vec::with_capacity(vectors.len());
    for w in vectors {
        let c = dot(w, v) / vv;
        let off: f64 = w.iter().zip(v).map(|(a, b)| (a - c * b).powi(2)).sum();
        if off > 1e-24 * vv {
            return None;
        }
        coef.push(c);
    }
    Some((v.clone(), coef))
}

/// `⟨⟨f⟩⟩_Q`, whose support function is `u ↦ avg_Q |⟨f(y), u⟩|`.
///
/// Collinear values give an exact segment; otherwise a sampled body on the
/// standard directions.
pub fn convex_average(f: &DyadicField<Vector>, q: &Cube) -> Result<ConvexBody> {
    f.grid().check(q)?;
    let cells = f.grid().cells_of(q);
    let n = cells.len() as f64;
    let vecs: Vec<&Vector> = cells.iter().map(|&c| &f.values()[c]).collect();
    if let Some((v, coef)) = common_line(&vecs) {
        let s = coef.iter().map(|c| c.abs()).sum::<f64>() / n;
        return Ok(ConvexBody::segment(v.iter().map(|x| s * x).collect()));
    }
    let d = f.vector_dim();
    ConvexBody::from_support(d, |u| vecs.iter().map(|w| dot(w, u).abs()).sum::<f64>() / n)
}

/// `Σ_{Q∈S} ⟨⟨f⟩⟩_Q χ_Q`, as a body per cell.
pub fn convex_sparse(s: &SparseFamily, f: &DyadicField<Vector>) -> Result<DyadicField<ConvexBody>> {
    if f.grid() != s.grid() {
        return Err(domain("field and sparse family live on different grids"));
    }
    let grid = *s.grid();
    let d = f.vector_dim();
    let averages = par::try_map_range(s.len(), |i| convex_average(f, &s.members()[i]))?;
    let marks = |value: &dyn Fn(&ConvexBody) -> f64| -> Vec<f64> {
        let mut levels: Vec<Vec<f64>> = (0..=grid.depth()).map(|k| vec![0.0; grid.cubes_at(k)]).collect();
        for (q, body) in s.members().iter().zip(&averages) {
            levels[q.level as usize][grid.linear(q)] += value(body);
        }
        push_down(&grid, &levels)
    };
    let segs: Option<Vec<&Vector>> = averages
        .iter()
        .map(|b| match b {
            ConvexBody::Segment(v) => Some(v),
            _ => None,
        })
        .collect();
    if let Some((axis, _)) = segs.as_deref().and_then(common_line) {
        let unit = axis.iter().map(|x| x / dot(&axis, &axis).sqrt().max(f64::MIN_POSITIVE)).collect::<Vec<_>>();
        let lengths = marks(&|b| b.support_vec(&unit));
        return DyadicField::new(grid, lengths.into_iter().map(|l| ConvexBody::segment(unit.iter().map(|x| l * x).collect())).collect());
    }
    let dirs = DirectionSet::standard(d);
    let tables: Vec<Vec<f64>> = averages.iter().map(|b| b.support_on(&dirs)).collect();
    let columns: Vec<Vec<f64>> = par::map_range(dirs.len(), |j| {
        let mut levels: Vec<Vec<f64>> = (0..=grid.depth()).map(|k| vec![0.0; grid.cubes_at(k)]).collect();
        for (q, h) in s.members().iter().zip(&tables) {
            levels[q.level as usize][grid.linear(q)] += h[j];
        }
        push_down(&grid, &levels)
    });
    Ok(SupportTable::from_columns(grid, dirs, columns).to_field())
}

/// Dyadic maximal operator applied to one support column.
pub(crate) fn maximal_column(grid: &DyadicGrid, column: &[f64]) -> Vec<f64> {
    let field = DyadicField::new(*grid, column.to_vec()).expect("one value per cell");
    let pyr = field.pyramid();
    let levels: Vec<Vec<f64>> = (0..=grid.depth()).map(|k| pyr.level(k).to_vec()).collect();
    chain_max(grid, &levels).0
}

/// `MF` on a support table: the dyadic maximal function of every direction column.
pub fn convex_maximal_table(t: &SupportTable) -> SupportTable {
    let grid = t.grid;
    t.map_columns(|c| maximal_column(&grid, c))
}

/// `MF(x)`, the closed convex hull of the Aumann averages `avg_Q F` over dyadic `Q ∋ x`.
pub fn convex_maximal(f: &DyadicField<ConvexBody>) -> DyadicField<ConvexBody> {
    convex_maximal_table(&SupportTable::of(f)).to_field()
}

/// `(∫ |W^{1/p}(x) F(x)|^p dx)^{1/p}` with `|K| = sup{|v| : v ∈ K}`.
pub fn lp_norm_bodyfield(f: &DyadicField<ConvexBody>, p: f64, w: Option<&DyadicField<SpdMatrix>>) -> Result<f64> {
    check_exponent(p)?;
    let mags: Vec<f64> = match w {
        None => f.values().iter().map(ConvexBody::magnitude).collect(),
        Some(w) => {
            f.same_grid(w)?;
            par::try_map_range(f.grid().cell_count(), |c| {
                let root = w.values()[c].power(1.0 / p).map_err(|e| locate(e, c))?;
                f.values()[c].magnitude_image(&root).map_err(|e| locate(e, c))
            })?
        }
    };
    let sum: f64 = mags.iter().map(|m| m.powf(p)).sum();
    Ok((sum * f.grid().cell_measure()).powf(1.0 / p))
}

fn locate(e: Error, cell: usize) -> Error {
    match e {
        Error::Singular { eigenvalue, .. } => Error::Singular {
            eigenvalue,
            cell: Some(cell),
        },
        other => other,
    }
}
