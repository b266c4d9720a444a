//! Sparse families of dyadic cubes and the sparse averaging operator.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Error, Result};
use crate::grid::{Cube, DyadicField, DyadicGrid};

/// Cubes with pairwise disjoint subsets `E(Q) ⊆ Q`, `|Q| ≤ 2|E(Q)|`.
///
/// Witness sets are stored as sorted lists of finest-level cells.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseFamily {
    grid: DyadicGrid,
    members: Vec<Cube>,
    witness: Vec<Vec<usize>>,
}

impl SparseFamily {
    /// Family with explicit witnesses; no sparseness check is made (see [`is_sparse`]).
    pub fn new(grid: DyadicGrid, members: Vec<Cube>, witness: Vec<Vec<usize>>) -> Result<Self> {
        if members.len() != witness.len() {
            return Err(Error::DimensionMismatch {
                expected: members.len(),
                found: witness.len(),
            });
        }
        for q in &members {
            grid.check(q)?;
        }
        Ok(SparseFamily { grid, members, witness })
    }

    /// Family whose witnesses are found by [`find_witnesses`].
    pub fn with_found_witnesses(grid: DyadicGrid, members: Vec<Cube>) -> Result<Self> {
        for q in &members {
            grid.check(q)?;
        }
        let witness = find_witnesses(&grid, &members).ok_or_else(|| domain("the cubes admit no sparse witnesses"))?;
        Ok(SparseFamily { grid, members, witness })
    }

    pub fn grid(&self) -> &DyadicGrid {
        &self.grid
    }

    pub fn members(&self) -> &[Cube] {
        &self.members
    }

    pub fn witness(&self, i: usize) -> &[usize] {
        &self.witness[i]
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// How [`sparse_generate`] picks cubes.
#[derive(Clone, Debug)]
pub enum SparseStrategy {
    /// Cubes at the lower corner, one per level.
    NestedHalves,
    /// Random cubes on levels `0, stride, 2·stride, …`, each kept only if its
    /// nearest selected ancestor still has half of its measure free.
    Random { seed: u64, stride: u32 },
    /// Root plus, recursively, the maximal subcubes whose average of `|f|`
    /// exceeds `threshold` times the parent's.
    StoppingTime { f: DyadicField<f64>, threshold: f64 },
}

pub fn sparse_generate(grid: &DyadicGrid, strategy: &SparseStrategy) -> Result<SparseFamily> {
    let family = match strategy {
        SparseStrategy::NestedHalves => nested(grid),
        SparseStrategy::Random { seed, stride } => random(grid, *seed, *stride)?,
        SparseStrategy::StoppingTime { f, threshold } => stopping_time(grid, f, *threshold)?,
    };
    debug_assert!(is_sparse(&family));
    Ok(family)
}

fn nested(grid: &DyadicGrid) -> SparseFamily {
    let members: Vec<Cube> = (0..=grid.depth()).map(|k| grid.cube(k, 0)).collect();
    let witness = members
        .iter()
        .map(|q| {
            let all = grid.cells_of(q);
            match grid.children(q).first() {
                Some(corner) => {
                    let inner: BTreeSet<usize> = grid.cells_of(corner).into_iter().collect();
                    all.into_iter().filter(|c| !inner.contains(c)).collect()
                }
                None => all,
            }
        })
        .collect();
    SparseFamily {
        grid: *grid,
        members,
        witness,
    }
}

fn random(grid: &DyadicGrid, seed: u64, stride: u32) -> Result<SparseFamily> {
    if stride == 0 {
        return Err(domain("level stride must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut members = vec![grid.root()];
    // cells already claimed below each selected cube, keyed by member index
    let mut claimed = vec![0usize];
    let owner_of = |cube: &Cube, members: &[Cube]| -> Option<usize> {
        members.iter().rposition(|m| m.level < cube.level && m.contains_cube(cube))
    };
    let mut k = stride;
    while k <= grid.depth() {
        for i in 0..grid.cubes_at(k) {
            if !rng.gen_bool(0.5) {
                continue;
            }
            let cube = grid.cube(k, i);
            let Some(owner) = owner_of(&cube, &members) else {
                continue;
            };
            let size = grid.cells_per_cube(k);
            if 2 * (claimed[owner] + size) <= grid.cells_per_cube(members[owner].level) {
                claimed[owner] += size;
                members.push(cube);
                claimed.push(0);
            }
        }
        k += stride;
    }
    SparseFamily::with_found_witnesses(*grid, members)
}

fn stopping_time(grid: &DyadicGrid, f: &DyadicField<f64>, threshold: f64) -> Result<SparseFamily> {
    if !(threshold >= 2.0) {
        return Err(domain(format!("stopping threshold must be ≥ 2, got {threshold}")));
    }
    if f.grid() != grid {
        return Err(domain("stopping-time field lives on a different grid"));
    }
    let avg = f.abs().pyramid();
    let mut members = Vec::new();
    let mut stack = vec![grid.root()];
    while let Some(top) = stack.pop() {
        members.push(top);
        let bar = threshold * avg.get(&top);
        let mut frontier = grid.children(&top);
        while let Some(c) = frontier.pop() {
            if *avg.get(&c) > bar {
                stack.push(c);
            } else {
                frontier.extend(grid.children(&c));
            }
        }
    }
    members.sort_by_key(|q| (q.level, grid.linear(q)));
    SparseFamily::with_found_witnesses(*grid, members)
}

/// Checks `E(Q) ⊆ Q`, pairwise disjointness and `2|E(Q)| ≥ |Q|` on cells.
pub fn is_sparse(s: &SparseFamily) -> bool {
    let mut used = vec![false; s.grid.cell_count()];
    for (q, e) in s.members.iter().zip(&s.witness) {
        if 2 * e.len() < s.grid.cells_per_cube(q.level) {
            return false;
        }
        for &c in e {
            if c >= used.len() || !s.grid.contains(q, c) || used[c] {
                return false;
            }
            used[c] = true;
        }
    }
    true
}

/// Disjoint witness sets for dyadic `members`, if any exist.
///
/// Dyadic cubes are nested or disjoint, so serving the deepest cubes first
/// and giving each exactly half of its cells, taken from those still free,
/// never hurts an ancestor: every free cell of a cube is equally useful to
/// all cubes containing it. The search is therefore exact.
pub fn find_witnesses(grid: &DyadicGrid, members: &[Cube]) -> Option<Vec<Vec<usize>>> {
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(members[i].level));
    let mut used = vec![false; grid.cell_count()];
    let mut out = vec![Vec::new(); members.len()];
    for i in order {
        let q = &members[i];
        let need = grid.cells_per_cube(q.level).div_ceil(2);
        let free: Vec<usize> = grid.cells_of(q).into_iter().filter(|&c| !used[c]).take(need).collect();
        if free.len() < need {
            return None;
        }
        for &c in &free {
            used[c] = true;
        }
        out[i] = free;
    }
    Some(out)
}

/// `T_S f = Σ_{Q∈S} (avg_Q f) χ_Q`.
pub fn sparse_scalar(s: &SparseFamily, f: &DyadicField<f64>) -> Result<DyadicField<f64>> {
    if f.grid() != &s.grid {
        return Err(domain("field and sparse family live on different grids"));
    }
    let grid = s.grid;
    let avg = f.pyramid();
    let mut marks: Vec<Vec<f64>> = (0..=grid.depth()).map(|k| vec![0.0; grid.cubes_at(k)]).collect();
    for q in &s.members {
        marks[q.level as usize][grid.linear(q)] += avg.get(q);
    }
    DyadicField::new(grid, push_down(&grid, &marks))
}

/// Per cell, the sum of `marks[k][ancestor at k]` over all levels, coarse to fine.
pub(crate) fn push_down(grid: &DyadicGrid, marks: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = marks[0].clone();
    for k in 1..=grid.depth() {
        acc = (0..grid.cubes_at(k))
            .map(|i| {
                let parent = grid.linear(&grid.parent(&grid.cube(k, i)).expect("non-root"));
                acc[parent] + marks[k as usize][i]
            })
            .collect();
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1(depth: u32) -> DyadicGrid {
        DyadicGrid::new(1, depth).unwrap()
    }

    /// Tries every assignment of cells to a containing member or to none.
    fn brute_force_has_witness(grid: &DyadicGrid, members: &[Cube]) -> bool {
        let n = grid.cell_count();
        let options: Vec<Vec<usize>> = (0..n)
            .map(|c| (0..members.len()).filter(|&i| grid.contains(&members[i], c)).collect())
            .collect();
        let mut choice = vec![0usize; n];
        loop {
            let mut count = vec![0usize; members.len()];
            for c in 0..n {
                if choice[c] < options[c].len() {
                    count[options[c][choice[c]]] += 1;
                }
            }
            if members.iter().zip(&count).all(|(q, k)| 2 * k >= grid.cells_per_cube(q.level)) {
                return true;
            }
            let mut c = 0;
            loop {
                if c == n {
                    return false;
                }
                choice[c] += 1;
                if choice[c] <= options[c].len() {
                    break;
                }
                choice[c] = 0;
                c += 1;
            }
        }
    }

    #[test]
    fn nested_halves() {
        let g = g1(4);
        let s = sparse_generate(&g, &SparseStrategy::NestedHalves).unwrap();
        assert!(is_sparse(&s));
        assert_eq!(s.len(), 5);
        let f = DyadicField::constant(g, 1.0);
        let t = sparse_scalar(&s, &f).unwrap();
        // x in [2^{-j-1}, 2^{-j}) lies in j+1 members
        for j in 0..4u32 {
            let cell = (16 >> (j + 1)) as usize;
            assert_eq!(t.values()[cell], (j + 1) as f64);
        }
        let g2 = DyadicGrid::new(2, 3).unwrap();
        assert!(is_sparse(&sparse_generate(&g2, &SparseStrategy::NestedHalves).unwrap()));
    }

    #[test]
    fn single_cube_and_zero() {
        let g = g1(3);
        let s = SparseFamily::new(g, vec![g.root()], vec![g.cells_of(&g.root())]).unwrap();
        assert!(is_sparse(&s));
        let t = sparse_scalar(&s, &DyadicField::constant(g, 1.0)).unwrap();
        assert!(t.values().iter().all(|v| *v == 1.0));
        let z = sparse_scalar(&s, &DyadicField::constant(g, 0.0)).unwrap();
        assert!(z.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn overlapping_witnesses_are_rejected() {
        let g = g1(2);
        let a = g.cube(1, 0);
        let s = SparseFamily::new(g, vec![g.root(), a], vec![vec![0, 1], vec![0, 1]]).unwrap();
        assert!(!is_sparse(&s));
        let outside = SparseFamily::new(g, vec![a], vec![vec![2]]).unwrap();
        assert!(!is_sparse(&outside));
    }

    #[test]
    fn full_tree_is_not_sparse() {
        let g = g1(3);
        let all: Vec<Cube> = g.all_cubes().collect();
        assert_eq!(all.len(), 15);
        assert!(find_witnesses(&g, &all).is_none());
        assert!(!brute_force_has_witness(&g, &all));
    }

    #[test]
    fn greedy_search_agrees_with_brute_force() {
        let g = g1(2);
        let all: Vec<Cube> = g.all_cubes().collect();
        for mask in 0u32..(1 << all.len()) {
            let members: Vec<Cube> = (0..all.len()).filter(|i| mask >> i & 1 == 1).map(|i| all[i]).collect();
            assert_eq!(
                find_witnesses(&g, &members).is_some(),
                brute_force_has_witness(&g, &members),
                "mask {mask:b}"
            );
        }
    }

    #[test]
    fn random_families_are_sparse() {
        for dim in 1..=2 {
            let g = DyadicGrid::new(dim, if dim == 1 { 8 } else { 4 }).unwrap();
            for seed in 0..20 {
                for stride in 1..=2 {
                    let s = sparse_generate(&g, &SparseStrategy::Random { seed, stride }).unwrap();
                    assert!(is_sparse(&s));
                    // independent check of disjointness by cell-set arithmetic
                    let mut seen = BTreeSet::new();
                    for i in 0..s.len() {
                        for &c in s.witness(i) {
                            assert!(seen.insert(c));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn stopping_time_family() {
        let g = g1(6);
        let f = DyadicField::from_fn(g, |i| if i < 3 { 50.0 } else { 1.0 });
        let s = sparse_generate(&g, &SparseStrategy::StoppingTime { f, threshold: 2.0 }).unwrap();
        assert!(is_sparse(&s));
        assert!(s.len() > 1);
        assert!(sparse_generate(
            &g,
            &SparseStrategy::StoppingTime {
                f: DyadicField::constant(g, 1.0),
                threshold: 1.5
            }
        )
        .is_err());
    }

    #[test]
    fn linear_and_positive() {
        let g = g1(5);
        let s = sparse_generate(&g, &SparseStrategy::Random { seed: 3, stride: 1 }).unwrap();
        let f = DyadicField::from_fn(g, |i| (i % 7) as f64);
        let h = DyadicField::from_fn(g, |i| ((i * 3) % 5) as f64 - 2.0);
        let sum = DyadicField::from_fn(g, |i| 2.0 * f.values()[i] + h.values()[i]);
        let tf = sparse_scalar(&s, &f).unwrap();
        let th = sparse_scalar(&s, &h).unwrap();
        let ts = sparse_scalar(&s, &sum).unwrap();
        for i in 0..g.cell_count() {
            assert!((ts.values()[i] - 2.0 * tf.values()[i] - th.values()[i]).abs() < 1e-12);
            assert!(tf.values()[i] >= 0.0);
        }
    }
}
