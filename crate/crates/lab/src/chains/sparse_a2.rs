//! `‖T_S f‖_{L²(w)} ≤ 8[w]_{A₂}‖f‖_{L²(w)}` through the duality argument.

use anyhow::{bail, ensure, Result};
use weightlab_core::operators::{maximal_weighted_universal, sparse_scalar, SparseFamily};
use weightlab_core::weights::scalar_ap;
use weightlab_core::{DyadicField, WeightRef};

use super::{integral_over, scalar_input, trial_family, trial_label, trial_rng};
use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{ChainReport, ChainRow};

/// Every line of the chain for one `(w, f, S)`; `f` must be nonnegative and not zero.
pub fn sparse_a2_lines(w: &DyadicField<f64>, f: &DyadicField<f64>, s: &SparseFamily) -> Result<ChainReport> {
    f.same_grid(w)?;
    ensure!(f.grid() == s.grid(), "sparse family lives on a different grid");
    if let Some(c) = f.values().iter().position(|v| !(*v >= 0.0)) {
        bail!("input must be nonnegative, cell {c} holds {}", f.values()[c]);
    }
    let grid = *f.grid();
    let wr = Some(WeightRef::Scalar(w));
    let f_norm = f.lp_norm(2.0, wr)?;
    let tf = sparse_scalar(s, f)?;
    let tf_norm = tf.lp_norm(2.0, wr)?;
    if !(f_norm > 0.0) || !(tf_norm > 0.0) {
        bail!("degenerate input: ‖f‖ = {f_norm}, ‖T_S f‖ = {tf_norm}");
    }
    let sigma = w.map(|v| 1.0 / v);
    let wv = w.values();
    let sv = sigma.values();
    let fv = f.values();
    // dual witness: ‖h‖_{L²(w)} = 1 and ∫ T_S f · h w = ‖T_S f‖_{L²(w)}
    let h = tf.map(|v| v / tf_norm);
    let hv = h.values();
    let all: Vec<usize> = (0..grid.cell_count()).collect();

    let mut rep = ChainReport::new("sparse-a2");
    let pairing = integral_over(&grid, &all, |c| tf.values()[c] * hv[c] * wv[c]);
    rep.push(ChainRow::eq("duality", tf_norm, pairing));

    let mut witness_sum = 0.0;
    let mut factored = 0.0;
    for (i, q) in s.members().iter().enumerate() {
        let cells = grid.cells_of(q);
        let size = q.measure();
        let e = s.witness(i).len() as f64 * grid.cell_measure();
        let avg_f = integral_over(&grid, &cells, |c| fv[c]) / size;
        let avg_hw = integral_over(&grid, &cells, |c| hv[c] * wv[c]) / size;
        witness_sum += avg_f * avg_hw * e;
        let w_q = integral_over(&grid, &cells, |c| wv[c]);
        let s_q = integral_over(&grid, &cells, |c| sv[c]);
        let fws = integral_over(&grid, &cells, |c| fv[c] * wv[c] * sv[c]);
        let hw = integral_over(&grid, &cells, |c| hv[c] * wv[c]);
        factored += (w_q / size) * (s_q / size) * (fws / s_q) * (hw / w_q) * e;
    }
    rep.push(ChainRow::le("sparse-witness", pairing, 2.0 * witness_sum));
    rep.push(ChainRow::eq("ap-factorization", 2.0 * witness_sum, 2.0 * factored));

    let a2 = scalar_ap(w, 2.0)?.value;
    let fw = DyadicField::new(grid, fv.iter().zip(wv).map(|(a, b)| a * b).collect())?;
    let m_sigma = maximal_weighted_universal(&fw, &sigma)?;
    let m_w = maximal_weighted_universal(&h, w)?;
    let (ms, mw) = (m_sigma.values(), m_w.values());
    let product = |c: usize| ms[c] * sv[c] * mw[c] * wv[c];
    let on_witnesses: f64 = (0..s.len()).map(|i| integral_over(&grid, s.witness(i), product)).sum();
    rep.push(ChainRow::le("a2-insertion", 2.0 * factored, 2.0 * a2 * on_witnesses));
    let everywhere = integral_over(&grid, &all, product);
    rep.push(ChainRow::le("disjoint-witnesses", 2.0 * a2 * on_witnesses, 2.0 * a2 * everywhere));

    let sr = Some(WeightRef::Scalar(&sigma));
    let ms_norm = m_sigma.lp_norm(2.0, sr)?;
    let mw_norm = m_w.lp_norm(2.0, wr)?;
    rep.push(ChainRow::le("cauchy-schwarz", 2.0 * a2 * everywhere, 2.0 * a2 * ms_norm * mw_norm));
    let fw_norm = fw.lp_norm(2.0, sr)?;
    let h_norm = h.lp_norm(2.0, wr)?;
    rep.push(ChainRow::le("universal-maximal-sigma", ms_norm, 2.0 * fw_norm));
    rep.push(ChainRow::le("universal-maximal-w", mw_norm, 2.0 * h_norm));
    rep.push(ChainRow::le("universal-maximal", 2.0 * a2 * ms_norm * mw_norm, 8.0 * a2 * fw_norm * h_norm));
    rep.push(ChainRow::eq("norm-identity", 8.0 * a2 * fw_norm * h_norm, 8.0 * a2 * f_norm));

    let k_sigma = ms_norm / fw_norm;
    let k_w = mw_norm / h_norm;
    rep.push(ChainRow::le("measured-maximal-bound", tf_norm, 2.0 * a2 * k_sigma * k_w * f_norm));
    rep.push(ChainRow::le("headline", tf_norm, 8.0 * a2 * f_norm));

    rep.constant("a2", a2);
    rep.constant("ratio", tf_norm / f_norm);
    rep.constant("ratio-over-a2", tf_norm / f_norm / a2);
    rep.constant("maximal-sigma", k_sigma);
    rep.constant("maximal-w", k_w);
    Ok(rep)
}

/// The chain on `cfg.trials` generated configurations at `p = 2`.
pub fn verify_sparse_a2_chain(cfg: &ExperimentConfig) -> Result<ChainReport> {
    if cfg.p != 2.0 {
        return Err(ConfigError::new("p", format!("the sparse A2 chain needs p = 2, got {}", cfg.p)).into());
    }
    let grid = cfg.grid()?;
    let trials = weightlab_core::par::try_map_range(cfg.trials, |t| -> Result<ChainReport> {
        let w = cfg.trial_weight(t).scalar(&grid)?;
        let mut r = trial_rng(cfg, t);
        let sigma = w.map(|v| 1.0 / v);
        let f = scalar_input(&grid, t, Some(&sigma), &mut r);
        let s = trial_family(&grid, t, &f, &mut r)?;
        sparse_a2_lines(&w, &f, &s)
    })?;
    let mut rep = ChainReport::new("sparse-a2");
    let mut worst = 0.0f64;
    for (t, tr) in trials.into_iter().enumerate() {
        worst = worst.max(tr.constant_value("ratio-over-a2").unwrap_or(f64::NAN));
        rep.absorb(&trial_label(t), tr);
    }
    rep.constant("max-ratio-over-a2", worst);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use weightlab_core::gen::power_weight;
    use weightlab_core::operators::{sparse_generate, SparseStrategy};
    use weightlab_core::DyadicGrid;

    #[test]
    fn trivial_configuration() {
        let g = DyadicGrid::new(1, 5).unwrap();
        let one = DyadicField::constant(g, 1.0);
        let s = SparseFamily::new(g, vec![g.root()], vec![g.cells_of(&g.root())]).unwrap();
        let rep = sparse_a2_lines(&one, &one, &s).unwrap();
        assert!(rep.passes(), "{:?}", rep.failures().collect::<Vec<_>>());
        assert_eq!(rep.constant_value("ratio"), Some(1.0));
        assert_eq!(rep.constant_value("a2"), Some(1.0));
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let g = DyadicGrid::new(1, 4).unwrap();
        let one = DyadicField::constant(g, 1.0);
        let s = sparse_generate(&g, &SparseStrategy::NestedHalves).unwrap();
        assert!(sparse_a2_lines(&one, &DyadicField::constant(g, 0.0), &s).is_err());
        assert!(sparse_a2_lines(&one, &DyadicField::constant(g, -1.0), &s).is_err());
        let mut cfg = ExperimentConfig::new("sparse-a2");
        cfg.p = 3.0;
        let err = verify_sparse_a2_chain(&cfg).unwrap_err();
        assert_eq!(err.downcast_ref::<ConfigError>().unwrap().field, "p");
    }

    #[test]
    fn power_weight_nested_halves() {
        let g = DyadicGrid::new(1, 8).unwrap();
        let w = power_weight(&g, 0.9);
        let s = sparse_generate(&g, &SparseStrategy::NestedHalves).unwrap();
        let a2 = scalar_ap(&w, 2.0).unwrap().value;
        let mut r = weightlab_core::gen::rng(5);
        for t in 0..50 {
            let f = weightlab_core::gen::lognormal(&g, 1.0 + (t % 3) as f64, &mut r);
            let rep = sparse_a2_lines(&w, &f, &s).unwrap();
            assert!(rep.passes());
            // the headline ratio, recomputed here from the operator alone
            let wr = Some(WeightRef::Scalar(&w));
            let ratio = sparse_scalar(&s, &f).unwrap().lp_norm(2.0, wr).unwrap() / f.lp_norm(2.0, wr).unwrap();
            assert!(ratio <= 8.0 * a2);
        }
    }
}
