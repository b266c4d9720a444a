//! `‖T_S F‖_{L²_𝒦(W)} ≲ [W]²_{A₂}‖F‖_{L²_𝒦(W)}` for the convex-body sparse operator.
//!
//! `F` is the segment field of a vector field `f`. The dual field `G` is a
//! segment field `g` normalized so that `∫ h_{T_S F(x)}(g(x)) dx` attains the
//! norm, and the pairing is bounded through the Christ–Goldberg maximal
//! functions of `W^{1/2}f` and `W^{−1/2}g`.

use anyhow::{ensure, Result};
use weightlab_core::convex::gaussian;
use weightlab_core::operators::opnorm::operator_norm_estimate;
use weightlab_core::operators::rubio::NORM_TRIALS;
use weightlab_core::operators::{christ_goldberg, convex_sparse, lp_norm_bodyfield, Operator, SparseFamily};
use weightlab_core::weights::{matrix_a2_tv, regularize_weight};
use weightlab_core::{ConvexBody, DyadicField, SpdMatrix, Vector, WeightRef};

use super::{integral_over, small_cube, trial_family, trial_label, trial_rng};
use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{ChainReport, ChainRow};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(|A K|, g)` with `h_K(g) = |A K|` and `|A^{-1} g| = 1`, for symmetric `A`.
fn norming_direction(k: &ConvexBody, a: &SpdMatrix, a_inv: &SpdMatrix) -> Result<(f64, Vector)> {
    let d = a.dim();
    Ok(match k {
        ConvexBody::Segment(v) => {
            let av = a.mul_vec(v);
            let len = dot(&av, &av).sqrt();
            if len == 0.0 {
                (0.0, vec![0.0; d])
            } else {
                (len, a.mul_vec(&av).into_iter().map(|x| x / len).collect())
            }
        }
        ConvexBody::Ellipsoid(b) => {
            let ba = b.mat().mul(a.mat());
            let gram = SpdMatrix::new(ba.transpose().mul(&ba))?;
            let top: Vector = (0..d).map(|i| gram.eigenvectors().get(i, d - 1)).collect();
            (gram.max_eigenvalue().sqrt(), a.mul_vec(&top))
        }
        ConvexBody::Sampled(s) => {
            let mut best = (0.0, vec![0.0; d]);
            for (u, h) in s.directions().iter().zip(s.values()) {
                let stretch = a_inv.mat().mul_vec_norm(u);
                if h / stretch > best.0 {
                    best = (h / stretch, u.iter().map(|x| x / stretch).collect());
                }
            }
            best
        }
    })
}

fn cellwise(w: &DyadicField<SpdMatrix>, t: f64) -> Result<Vec<SpdMatrix>> {
    Ok(w.values().iter().map(|m| m.power(t)).collect::<weightlab_core::Result<_>>()?)
}

/// Every line for one `(W, f, S)`; `seed` drives the Christ–Goldberg norm estimates.
pub fn convex_sparse_w2_lines(w: &DyadicField<SpdMatrix>, f: &DyadicField<Vector>, s: &SparseFamily, seed: u64) -> Result<ChainReport> {
    f.same_grid(w)?;
    ensure!(f.grid() == s.grid(), "sparse family lives on a different grid");
    let d = w.values()[0].dim();
    ensure!(f.vector_dim() == d, "vector dimension {} does not match the weight's {d}", f.vector_dim());
    let (w, clamped) = regularize_weight(w)?;
    let grid = *f.grid();
    let winv = DyadicField::new(grid, cellwise(&w, -1.0)?)?;
    let half = cellwise(&w, 0.5)?;
    let mhalf = cellwise(&w, -0.5)?;
    let all: Vec<usize> = (0..grid.cell_count()).collect();
    let mut rep = ChainReport::new("convex-sparse-w2");
    if clamped {
        rep.notes.push("weight eigenvalues were raised to the floor before taking W^{-1/2}".into());
    }

    let big_f = f.map(|v| ConvexBody::segment(v.clone()));
    let f_norm = lp_norm_bodyfield(&big_f, 2.0, Some(&w))?;
    let tsf = convex_sparse(s, f)?;
    let tsf_norm = lp_norm_bodyfield(&tsf, 2.0, Some(&w))?;

    let norming = weightlab_core::par::try_map_range(grid.cell_count(), |c| norming_direction(&tsf.values()[c], &half[c], &mhalf[c]))?;
    let g: Vec<Vector> = norming
        .iter()
        .map(|(m, dir)| {
            let scale = if tsf_norm > 0.0 { m / tsf_norm } else { 0.0 };
            dir.iter().map(|x| x * scale).collect()
        })
        .collect();
    let g = DyadicField::new(grid, g)?;
    let big_g = g.map(|v| ConvexBody::segment(v.clone()));
    let g_norm = lp_norm_bodyfield(&big_g, 2.0, Some(&winv))?;
    let pairing = integral_over(&grid, &all, |c| tsf.values()[c].support_vec(&g.values()[c]));
    rep.push(ChainRow::le("duality", tsf_norm, pairing));
    rep.push(ChainRow::le("dual-norm", g_norm, (d as f64).sqrt()));

    // P_Q = avg_{x∈Q} avg_{y∈Q} |⟨f(y), g(x)⟩|, straight from the vectors
    let (fv, gv) = (f.values(), g.values());
    let pair_q: Vec<f64> = weightlab_core::par::map_slice(s.members(), |q| {
        let cells = grid.cells_of(q);
        let n = cells.len() as f64;
        let mut sum = 0.0;
        for &x in &cells {
            for &y in &cells {
                sum += dot(&fv[y], &gv[x]).abs();
            }
        }
        sum / (n * n)
    });
    let full: f64 = s.members().iter().zip(&pair_q).map(|(q, p)| q.measure() * p).sum();
    rep.push(ChainRow::eq("minkowski-additivity", pairing, full));
    let witness: f64 = (0..s.len())
        .map(|i| pair_q[i] * s.witness(i).len() as f64 * grid.cell_measure())
        .sum();
    rep.push(ChainRow::le("sparse-witness", full, 2.0 * witness));

    let phi = DyadicField::new(grid, fv.iter().zip(&half).map(|(v, m)| m.mul_vec(v)).collect())?;
    let psi = DyadicField::new(grid, gv.iter().zip(&mhalf).map(|(v, m)| m.mul_vec(v)).collect())?;
    let m_w = christ_goldberg(&w, &phi, 2.0)?;
    let m_winv = christ_goldberg(&winv, &psi, 2.0)?;
    let product = |c: usize| m_w.values()[c] * m_winv.values()[c];
    let on_witnesses: f64 = (0..s.len()).map(|i| integral_over(&grid, s.witness(i), product)).sum();
    rep.push(ChainRow::le("weight-insertion", 2.0 * witness, 2.0 * on_witnesses));
    let everywhere = integral_over(&grid, &all, product);
    rep.push(ChainRow::le("disjoint-witnesses", 2.0 * on_witnesses, 2.0 * everywhere));
    let (mw_norm, mwinv_norm) = (m_w.lp_norm(2.0, None)?, m_winv.lp_norm(2.0, None)?);
    rep.push(ChainRow::le("cauchy-schwarz", 2.0 * everywhere, 2.0 * mw_norm * mwinv_norm));

    let (phi_norm, psi_norm) = (phi.lp_norm(2.0, None)?, psi.lp_norm(2.0, None)?);
    rep.push(ChainRow::eq("norm-identity-f", phi_norm, f_norm));
    rep.push(ChainRow::eq("norm-identity-g", psi_norm, g_norm));
    let cg = Operator::ChristGoldberg { r: 2.0 };
    let k_w = operator_norm_estimate(&cg, &grid, 2.0, Some(WeightRef::Matrix(&w)), NORM_TRIALS, seed)?.estimate;
    let k_winv = operator_norm_estimate(&cg, &grid, 2.0, Some(WeightRef::Matrix(&winv)), NORM_TRIALS, seed)?.estimate;
    rep.push(ChainRow::le("christ-goldberg-w", mw_norm, k_w * phi_norm));
    rep.push(ChainRow::le("christ-goldberg-winv", mwinv_norm, k_winv * psi_norm));
    let bound = 2.0 * k_w * k_winv;
    rep.push(ChainRow::le("christ-goldberg", 2.0 * mw_norm * mwinv_norm, bound * f_norm * g_norm));
    rep.push(ChainRow::le("dual-bound", bound * f_norm * g_norm, bound * (d as f64).sqrt() * f_norm));
    rep.push(ChainRow::le("end-bound", tsf_norm, bound * (d as f64).sqrt() * f_norm));

    let a2 = matrix_a2_tv(&w)?.value;
    let ratio = if f_norm > 0.0 { tsf_norm / f_norm } else { 0.0 };
    rep.constant("a2", a2);
    rep.constant("christ-goldberg-w", k_w);
    rep.constant("christ-goldberg-winv", k_winv);
    rep.constant("end-ratio", ratio);
    rep.constant("end-ratio-over-a2-squared", ratio / (a2 * a2));
    rep.constant("bound-constant-over-a2-squared", bound * (d as f64).sqrt() / (a2 * a2));
    rep.constant("clamped", if clamped { 1.0 } else { 0.0 });
    Ok(rep)
}

/// Vector input number `t`: Gaussian everywhere, or a fixed vector pulled back by `W^{-1/2}` on a small cube.
fn vector_input(grid: &weightlab_core::DyadicGrid, t: usize, w: &DyadicField<SpdMatrix>, r: &mut rand_chacha::ChaCha8Rng) -> Result<DyadicField<Vector>> {
    let d = w.values()[0].dim();
    if t.is_multiple_of(2) {
        return Ok(weightlab_core::gen::gaussian_vectors(grid, d, r));
    }
    let q = small_cube(grid, r);
    let v: Vector = (0..d).map(|_| gaussian(r)).collect();
    let mut out = Vec::with_capacity(grid.cell_count());
    for (c, m) in w.values().iter().enumerate() {
        out.push(if grid.contains(&q, c) { m.power(-0.5)?.mul_vec(&v) } else { vec![0.0; d] });
    }
    Ok(DyadicField::new(*grid, out)?)
}

/// The chain on `cfg.trials` matrix-weight trials at `p = 2`.
pub fn verify_convex_sparse_w2_chain(cfg: &ExperimentConfig) -> Result<ChainReport> {
    if cfg.p != 2.0 {
        return Err(ConfigError::new("p", format!("the convex sparse chain needs p = 2, got {}", cfg.p)).into());
    }
    let grid = cfg.grid()?;
    let trials = weightlab_core::par::try_map_range(cfg.trials, |t| -> Result<ChainReport> {
        let w = cfg.trial_weight(t).matrix(&grid, cfg.d)?;
        let mut r = trial_rng(cfg, t);
        let f = vector_input(&grid, t, &w, &mut r)?;
        let s = trial_family(&grid, t, &f.magnitude(), &mut r)?;
        convex_sparse_w2_lines(&w, &f, &s, weightlab_core::operators::opnorm::trial_seed(cfg.seed, t))
    })?;
    let mut rep = ChainReport::new("convex-sparse-w2");
    let mut worst = 0.0f64;
    for (t, tr) in trials.into_iter().enumerate() {
        worst = worst.max(tr.constant_value("end-ratio-over-a2-squared").unwrap_or(f64::NAN));
        rep.absorb(&trial_label(t), tr);
    }
    rep.constant("max-end-ratio-over-a2-squared", worst);
    Ok(rep)
}
