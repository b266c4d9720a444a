//! Inequality chains evaluated line by line on generated data.
//!
//! Each displayed line becomes a [`ChainRow`](crate::report::ChainRow). The
//! two sides of a row are computed along separate routes (for example a norm
//! from the core library against an explicit pairing summed here), so a
//! satisfied row is a check rather than an identity.

mod convex_w2;
mod extrapolation;
mod sparse_a2;

pub use convex_w2::{convex_sparse_w2_lines, verify_convex_sparse_w2_chain};
pub use extrapolation::{extrapolation_lines, verify_extrapolation_chain};
pub use sparse_a2::{sparse_a2_lines, verify_sparse_a2_chain};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use weightlab_core::gen::{lognormal, rng};
use weightlab_core::operators::opnorm::trial_seed;
use weightlab_core::operators::{sparse_generate, SparseFamily, SparseStrategy};
use weightlab_core::{Cube, DyadicField, DyadicGrid};

use crate::config::ExperimentConfig;

pub(crate) fn trial_rng(cfg: &ExperimentConfig, t: usize) -> ChaCha8Rng {
    rng(trial_seed(cfg.seed, t))
}

pub(crate) fn trial_label(t: usize) -> String {
    format!("trial-{t:03}")
}

/// Random cube on one of the two finest levels.
pub(crate) fn small_cube(grid: &DyadicGrid, r: &mut ChaCha8Rng) -> Cube {
    let level = grid.depth() - r.gen_range(0..=grid.depth().min(1));
    grid.cube(level, r.gen_range(0..grid.cubes_at(level)))
}

/// Nonnegative input number `t`: log-normal, a spike on a small cube
/// (scaled by `sigma` when given), or uniform.
pub(crate) fn scalar_input(grid: &DyadicGrid, t: usize, sigma: Option<&DyadicField<f64>>, r: &mut ChaCha8Rng) -> DyadicField<f64> {
    match t % 3 {
        0 => lognormal(grid, 1.0, r),
        1 => {
            let q = small_cube(grid, r);
            DyadicField::from_fn(*grid, |c| {
                if grid.contains(&q, c) {
                    sigma.map_or(1.0, |s| s.values()[c])
                } else {
                    0.0
                }
            })
        }
        _ => DyadicField::from_fn(*grid, |_| r.gen_range(0.0..1.0)),
    }
}

/// Sparse family number `t`, cycling through the generation strategies.
pub(crate) fn trial_family(grid: &DyadicGrid, t: usize, f: &DyadicField<f64>, r: &mut ChaCha8Rng) -> weightlab_core::Result<SparseFamily> {
    let strategy = match (t / 3) % 3 {
        0 => SparseStrategy::NestedHalves,
        1 => SparseStrategy::Random {
            seed: r.gen(),
            stride: 1 + (t % 2) as u32,
        },
        _ => SparseStrategy::StoppingTime {
            f: f.clone(),
            threshold: 2.0,
        },
    };
    sparse_generate(grid, &strategy)
}

/// `Σ_{c ∈ cells} v(c)·|cell|`.
pub(crate) fn integral_over(grid: &DyadicGrid, cells: &[usize], v: impl Fn(usize) -> f64) -> f64 {
    cells.iter().map(|&c| v(c)).sum::<f64>() * grid.cell_measure()
}
