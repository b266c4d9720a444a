//! Named experiments, their pass/fail verdicts and the artifacts they write.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use weightlab_core::convex::john_ellipsoid;
use weightlab_core::gen::{lognormal, random_body, random_body_field};
use weightlab_core::operators::convex::convex_maximal_table;
use weightlab_core::operators::{
    hilbert_at, lp_norm_bodyfield, maximal_scalar, rubio_iteration_convex, rubio_iteration_scalar, SupportTable, DEFAULT_TRUNCATION,
};
use weightlab_core::weights::{
    conjugate, dual_weight, matrix_a1, matrix_a2_tv, matrix_ap_roudenko, reverse_factorization_scalar, scalar_a1, scalar_ap,
};
use weightlab_core::{ConvexBody, DyadicField, SpdMatrix, WeightRef};

use crate::chains::{trial_label, trial_rng, verify_convex_sparse_w2_chain, verify_extrapolation_chain, verify_sparse_a2_chain};
use crate::config::ExperimentConfig;
use crate::report::{ChainReport, ChainRow};
use crate::sweep::{buckley_exponent, sweep_sharp_constants, SweepTable, SLOPE_ALLOWANCE};

/// Every experiment `run` understands.
pub const EXPERIMENTS: [&str; 11] = [
    "duality",
    "collapse",
    "reverse-factorization",
    "sparse-a2",
    "extrapolation",
    "convex-sparse-w2",
    "john",
    "convex-maximal",
    "iteration",
    "sweep",
    "hilbert",
];

/// Tolerance for identities between characteristics.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Relative slack for body containments.
pub const CONTAINMENT_SLACK: f64 = 1e-6;
/// Tolerance for the direction-wise maximal identities.
pub const SUPPORT_TOL: f64 = 1e-12;
/// Relative slack for `Mℛh ≤ 2a·ℛh`.
pub const ITERATION_SLACK: f64 = 1e-8;
/// Allowed distance of the Hilbert value from `ln 2`.
pub const HILBERT_TOL: f64 = 1e-3;

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub experiment: String,
    pub passed: bool,
    pub summary: Value,
    pub report: Option<ChainReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<SweepTable>,
}

impl Outcome {
    fn from_report(cfg: &ExperimentConfig, report: ChainReport, mut summary: Value) -> Self {
        let failures: Vec<&str> = report.failures().map(|r| r.line_id.as_str()).collect();
        summary["rows"] = json!(report.rows.len());
        summary["failed_rows"] = json!(failures.len());
        summary["first_failure"] = json!(failures.first());
        Outcome {
            experiment: cfg.experiment.clone(),
            passed: report.passes(),
            summary,
            report: Some(report),
            table: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("outcomes serialize") + "\n"
    }

    pub fn to_csv(&self) -> String {
        match (&self.table, &self.report) {
            (Some(t), _) => t.to_csv(),
            (None, Some(r)) => r.to_csv(),
            (None, None) => String::new(),
        }
    }

    /// One line per summary entry, preceded by the verdict.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}: {}\n", self.experiment, if self.passed { "PASS" } else { "FAIL" });
        if let Value::Object(map) = &self.summary {
            for (k, v) in map {
                s.push_str(&format!("  {k}: {v}\n"));
            }
        }
        s
    }
}

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

fn duality(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let q = conjugate(cfg.p);
    let errors = weightlab_core::par::try_map_range(cfg.trials, |t| -> Result<f64> {
        let w = cfg.trial_weight(t).scalar(&grid)?;
        let direct = scalar_ap(&w, cfg.p)?.value.powf(q - 1.0);
        let dual = scalar_ap(&dual_weight(&w, cfg.p)?, q)?.value;
        Ok(relative_error(dual, direct))
    })?;
    let mut rep = ChainReport::new("duality");
    for (t, e) in errors.iter().enumerate() {
        rep.push(ChainRow::le(format!("{}/relative-error", trial_label(t)), *e, IDENTITY_TOL));
    }
    let worst = max_of(errors.iter().copied());
    rep.constant("max-relative-error", worst);
    Ok(Outcome::from_report(cfg, rep, json!({ "p": cfg.p, "max_relative_error": worst })))
}

fn collapse(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let per_trial = weightlab_core::par::try_map_range(cfg.trials, |t| -> Result<[f64; 3]> {
        let w = cfg.trial_weight(t).scalar(&grid)?;
        let m = w.map(|v| SpdMatrix::scalar(*v));
        Ok([
            relative_error(matrix_ap_roudenko(&m, cfg.p)?.value, scalar_ap(&w, cfg.p)?.value),
            relative_error(matrix_a1(&m)?.value, scalar_a1(&w)?.value),
            relative_error(matrix_a2_tv(&m)?.value, scalar_ap(&w, 2.0)?.value.sqrt()),
        ])
    })?;
    let mut rep = ChainReport::new("collapse");
    let names = ["roudenko-vs-scalar-ap", "matrix-a1-vs-scalar-a1", "tv-vs-root-scalar-a2"];
    for (t, errs) in per_trial.iter().enumerate() {
        for (name, e) in names.iter().zip(errs) {
            rep.push(ChainRow::le(format!("{}/{name}", trial_label(t)), *e, IDENTITY_TOL));
        }
    }
    let worst = max_of(per_trial.iter().flatten().copied());
    rep.constant("max-relative-error", worst);
    Ok(Outcome::from_report(cfg, rep, json!({ "p": cfg.p, "max_relative_error": worst })))
}

fn reverse_factorization(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let one = DyadicField::constant(grid, 1.0);
    let p = cfg.p;
    let per_trial = weightlab_core::par::try_map_range(cfg.trials, |t| -> Result<ChainReport> {
        let mut r = trial_rng(cfg, t);
        let h0 = lognormal(&grid, 1.0, &mut r);
        let h1 = lognormal(&grid, 1.0, &mut r);
        let w0 = rubio_iteration_scalar(&h0, &one, p, DEFAULT_TRUNCATION, None)?.field;
        let w1 = rubio_iteration_scalar(&h1, &one, p, DEFAULT_TRUNCATION, None)?.field;
        let (a0, a1) = (scalar_a1(&w0)?.value, scalar_a1(&w1)?.value);
        let product = scalar_ap(&reverse_factorization_scalar(&w0, &w1, p)?, p)?.value;
        let mut rep = ChainReport::new("reverse-factorization");
        rep.push(ChainRow::le("a1-first-finite", a0, f64::MAX));
        rep.push(ChainRow::le("a1-second-finite", a1, f64::MAX));
        rep.push(ChainRow::le("product-ap", product, a0 * a1.powf(p - 1.0)));
        Ok(rep)
    })?;
    let mut rep = ChainReport::new("reverse-factorization");
    for (t, tr) in per_trial.into_iter().enumerate() {
        rep.absorb(&trial_label(t), tr);
    }
    let violations = rep.failures().count();
    Ok(Outcome::from_report(cfg, rep, json!({ "p": p, "violations": violations })))
}

fn john(cfg: &ExperimentConfig) -> Result<Outcome> {
    let d = cfg.d;
    let per_trial = weightlab_core::par::try_map_range(cfg.trials, |t| -> Result<[bool; 2]> {
        let k = random_body(d, &mut trial_rng(cfg, t));
        let e = ConvexBody::ellipsoid(john_ellipsoid(&k)?);
        let outer = e.scale((d as f64).sqrt())?;
        Ok([k.contains(&e, CONTAINMENT_SLACK), outer.contains(&k, CONTAINMENT_SLACK)])
    })?;
    let mut rep = ChainReport::new("john");
    for (t, [inner, outer]) in per_trial.iter().enumerate() {
        let flag = |ok: bool| if ok { 0.0 } else { 1.0 };
        rep.push(ChainRow::le(format!("{}/ellipsoid-in-body", trial_label(t)), flag(*inner), 0.0));
        rep.push(ChainRow::le(format!("{}/body-in-dilated-ellipsoid", trial_label(t)), flag(*outer), 0.0));
    }
    let failures = rep.failures().count();
    Ok(Outcome::from_report(cfg, rep, json!({ "d": d, "bodies": cfg.trials, "containment_failures": failures })))
}

/// Largest `(lhs − rhs)/max(1, |rhs|)` over paired entries.
fn excess(lhs: &[f64], rhs: &[f64]) -> f64 {
    lhs.iter()
        .zip(rhs)
        .map(|(a, b)| (a - b) / b.abs().max(1.0))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn convex_maximal_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let per_trial = weightlab_core::par::try_map_range(cfg.trials, |t| -> Result<ChainReport> {
        let mut r = trial_rng(cfg, t);
        let f = random_body_field(&grid, cfg.d, &mut r);
        let g = random_body_field(&grid, cfg.d, &mut r);
        let alpha = 0.25 + 3.0 * rand::Rng::gen_range(&mut r, 0.0..1.0);
        let sum = DyadicField::new(
            grid,
            f.values().iter().zip(g.values()).map(|(a, b)| a.minkowski_sum(b)).collect::<weightlab_core::Result<Vec<_>>>()?,
        )?;
        let scaled = DyadicField::new(grid, f.values().iter().map(|a| a.scale(alpha)).collect::<weightlab_core::Result<Vec<_>>>()?)?;
        let (tf, tg, ts, ta) = (SupportTable::of(&f), SupportTable::of(&g), SupportTable::of(&sum), SupportTable::of(&scaled));
        let (mf, mg, ms, ma) = (convex_maximal_table(&tf), convex_maximal_table(&tg), convex_maximal_table(&ts), convex_maximal_table(&ta));
        let mut reduction = 0.0f64;
        let (mut contains, mut subadditive, mut homogeneous) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
        for j in 0..tf.directions().len() {
            let scalar = maximal_scalar(&tf.direction(j));
            reduction = reduction.max(
                scalar
                    .values()
                    .iter()
                    .zip(mf.column(j))
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max),
            );
            contains = contains.max(excess(tf.column(j), mf.column(j)));
            let bound: Vec<f64> = mf.column(j).iter().zip(mg.column(j)).map(|(a, b)| a + b).collect();
            subadditive = subadditive.max(excess(ms.column(j), &bound));
            let expected: Vec<f64> = mf.column(j).iter().map(|v| alpha * v).collect();
            homogeneous = homogeneous.max(
                ma.column(j)
                    .iter()
                    .zip(&expected)
                    .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
                    .fold(0.0, f64::max),
            );
        }
        let mut rep = ChainReport::new("convex-maximal");
        rep.push(ChainRow::le("direction-wise-reduction", reduction, SUPPORT_TOL));
        rep.push(ChainRow::le("body-inside-maximal", contains, SUPPORT_TOL));
        rep.push(ChainRow::le("maximal-subadditive", subadditive, SUPPORT_TOL));
        rep.push(ChainRow::le("maximal-homogeneous", homogeneous, SUPPORT_TOL));
        Ok(rep)
    })?;
    let mut rep = ChainReport::new("convex-maximal");
    for (t, tr) in per_trial.into_iter().enumerate() {
        rep.absorb(&trial_label(t), tr);
    }
    let worst_reduction = max_of(rep.rows.iter().filter(|r| r.line_id.ends_with("reduction")).map(|r| r.lhs));
    Ok(Outcome::from_report(cfg, rep, json!({ "d": cfg.d, "max_reduction_error": worst_reduction })))
}

fn iteration(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let p = cfg.p;
    let k = DEFAULT_TRUNCATION;
    let allowance = 0.5f64.powi(k as i32);
    let per_trial = weightlab_core::par::try_map_range(cfg.trials, |t| -> Result<ChainReport> {
        let mut r = trial_rng(cfg, t);
        let mut rep = ChainReport::new("iteration");

        let w = cfg.trial_weight(t).scalar(&grid)?;
        let h = lognormal(&grid, 1.0, &mut r);
        let it = rubio_iteration_scalar(&h, &w, p, k, None)?;
        let rh = it.field.values();
        rep.push(ChainRow::le("scalar-majorant", excess(h.values(), rh), 0.0));
        let wr = Some(WeightRef::Scalar(&w));
        rep.push(ChainRow::le("scalar-norm", it.field.lp_norm(p, wr)?, 2.0 * h.lp_norm(p, wr)? + allowance));
        let m = maximal_scalar(&it.field);
        let bound: Vec<f64> = rh.iter().map(|v| 2.0 * it.a * v).collect();
        let ratio = m.values().iter().zip(&bound).map(|(a, b)| a / b).fold(0.0, f64::max);
        rep.push(ChainRow::le("scalar-a1", ratio, 1.0 + ITERATION_SLACK));
        rep.constant("scalar-a", it.a);
        rep.constant("scalar-pointwise-tail", it.pointwise_tail);

        let mw = cfg.trial_weight(t).matrix(&grid, cfg.d)?;
        let f = random_body_field(&grid, cfg.d, &mut r);
        let ic = rubio_iteration_convex(&f, &mw, p, k, None)?;
        let (tf, tr) = (SupportTable::of(&f), SupportTable::of(&ic.field));
        let mr = convex_maximal_table(&tr);
        let (mut inside, mut a1) = (f64::NEG_INFINITY, 0.0f64);
        for j in 0..tf.directions().len() {
            inside = inside.max(excess(tf.column(j), tr.column(j)));
            for (m, v) in mr.column(j).iter().zip(tr.column(j)) {
                if *m > 0.0 {
                    a1 = a1.max(m / (2.0 * ic.a * v));
                }
            }
        }
        rep.push(ChainRow::le("convex-majorant", inside, 0.0));
        let (nr, nf) = (lp_norm_bodyfield(&ic.field, p, Some(&mw))?, lp_norm_bodyfield(&f, p, Some(&mw))?);
        rep.push(ChainRow::le("convex-norm", nr, 2.0 * nf + allowance));
        rep.push(ChainRow::le("convex-a1", a1, 1.0 + ITERATION_SLACK));
        rep.constant("convex-a", ic.a);
        rep.constant("convex-pointwise-tail", ic.pointwise_tail);
        Ok(rep)
    })?;
    let mut rep = ChainReport::new("iteration");
    for (t, tr) in per_trial.into_iter().enumerate() {
        rep.absorb(&trial_label(t), tr);
    }
    let tail = max_of(rep.constants.iter().filter(|c| c.name.ends_with("pointwise-tail")).map(|c| c.value));
    rep.constant("max-pointwise-tail", tail);
    Ok(Outcome::from_report(cfg, rep, json!({ "p": p, "truncation": k, "max_pointwise_tail": tail })))
}

fn hilbert(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = weightlab_core::DyadicGrid::new(1, cfg.depth)?;
    let indicator = DyadicField::constant(grid, 1.0);
    let value = hilbert_at(&indicator, 2.0, 0.5)?;
    let target = std::f64::consts::LN_2;
    let mut rep = ChainReport::new("hilbert");
    rep.push(ChainRow::le("distance-from-ln2", (value - target).abs(), HILBERT_TOL));
    Ok(Outcome::from_report(cfg, rep, json!({ "value": value, "target": target, "error": (value - target).abs() })))
}

fn sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let table = sweep_sharp_constants(cfg)?;
    let limit = buckley_exponent(cfg.p) + SLOPE_ALLOWANCE;
    let slope = table.fit("maximal").map(|f| f.slope);
    let exceeding: Vec<f64> = table.rows.iter().filter(|r| r.flag == "exceeds-8-a2").map(|r| r.a).collect();
    let passed = slope.is_some_and(|s| s <= limit) && exceeding.is_empty();
    let fits: serde_json::Map<String, Value> = table
        .fits
        .iter()
        .map(|f| (f.operator.clone(), json!({ "slope": f.slope, "stderr": f.stderr, "points": f.points })))
        .collect();
    Ok(Outcome {
        experiment: cfg.experiment.clone(),
        passed,
        summary: json!({
            "p": cfg.p,
            "maximal_slope": slope,
            "slope_limit": limit,
            "sparse_rows_above_8a2": exceeding,
            "fits": fits,
        }),
        report: None,
        table: Some(table),
    })
}

fn chain(cfg: &ExperimentConfig, report: ChainReport, key: &str) -> Outcome {
    let logged = report.constant_value(key);
    Outcome::from_report(cfg, report, json!({ "p": cfg.p, key: logged }))
}

/// Validate `cfg` and run its experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    match cfg.experiment.as_str() {
        "duality" => duality(cfg),
        "collapse" => collapse(cfg),
        "reverse-factorization" => reverse_factorization(cfg),
        "sparse-a2" => Ok(chain(cfg, verify_sparse_a2_chain(cfg)?, "max-ratio-over-a2")),
        "extrapolation" => Ok(chain(cfg, verify_extrapolation_chain(cfg)?, "max-composite-a2-over-norm-product")),
        "convex-sparse-w2" => Ok(chain(cfg, verify_convex_sparse_w2_chain(cfg)?, "max-end-ratio-over-a2-squared")),
        "john" => john(cfg),
        "convex-maximal" => convex_maximal_experiment(cfg),
        "iteration" => iteration(cfg),
        "sweep" => sweep(cfg),
        "hilbert" => hilbert(cfg),
        other => unreachable!("validated experiment name {other}"),
    }
}

/// Paths `prefix.json`, `prefix.csv` and `prefix.txt`.
pub fn artifact_paths(prefix: &Path) -> [PathBuf; 3] {
    let with = |ext: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(format!(".{ext}"));
        PathBuf::from(s)
    };
    [with("json"), with("csv"), with("txt")]
}

/// Write the three artifacts, creating parent directories.
pub fn write_artifacts(outcome: &Outcome, prefix: &Path) -> Result<[PathBuf; 3]> {
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let paths = artifact_paths(prefix);
    let contents = [outcome.to_json(), outcome.to_csv(), outcome.to_text()];
    for (path, body) in paths.iter().zip(contents) {
        fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(name: &str) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(name);
        c.depth = 4;
        c.trials = 3;
        c
    }

    #[test]
    fn every_experiment_runs_small() {
        for name in EXPERIMENTS {
            let mut c = small(name);
            if name == "extrapolation" {
                c.p = 3.0;
            }
            let o = run_experiment(&c).unwrap_or_else(|e| panic!("{name}: {e:#}"));
            assert!(o.passed, "{name}: {}", o.to_text());
            assert!(!o.to_json().is_empty());
        }
    }

    #[test]
    fn unknown_experiment_is_a_config_error() {
        let c = ExperimentConfig::new("nope");
        let e = run_experiment(&c).unwrap_err();
        assert_eq!(e.downcast_ref::<crate::config::ConfigError>().unwrap().field, "experiment");
    }

    #[test]
    fn artifact_names() {
        let [j, c, t] = artifact_paths(Path::new("out/run.1"));
        assert_eq!(j, PathBuf::from("out/run.1.json"));
        assert_eq!(c, PathBuf::from("out/run.1.csv"));
        assert_eq!(t, PathBuf::from("out/run.1.txt"));
    }
}
