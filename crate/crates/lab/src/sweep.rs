//! Growth of measured operator norms along a family of power weights.

use anyhow::Result;
use serde::Serialize;
use weightlab_core::gen::{power_weight, random_rotation, rng, rotated_power};
use weightlab_core::operators::opnorm::{operator_norm_estimate, scalar_test_field, Operator};
use weightlab_core::operators::{hilbert_maximal, maximal_scalar, sparse_generate, SparseStrategy};
use weightlab_core::weights::{conjugate, dual_weight, matrix_a2_tv, matrix_ap_roudenko, scalar_ap};
use weightlab_core::{DyadicGrid, WeightRef};

use crate::config::ExperimentConfig;
use crate::report::{csv_writer, finish};

/// Number of exponents in a sweep.
pub const SWEEP_POINTS: usize = 10;
/// Allowance over the Buckley exponent for the maximal-operator slope.
pub const SLOPE_ALLOWANCE: f64 = 0.15;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub a: f64,
    pub characteristic: f64,
    pub operator: String,
    pub ratio: f64,
    pub running_slope: Option<f64>,
    pub flag: String,
}

/// Least-squares slope of `log ratio` against `log characteristic`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub operator: String,
    pub slope: f64,
    pub stderr: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub p: f64,
    pub rows: Vec<SweepRow>,
    pub fits: Vec<SlopeFit>,
}

impl SweepTable {
    pub fn fit(&self, operator: &str) -> Option<&SlopeFit> {
        self.fits.iter().find(|f| f.operator == operator)
    }

    pub fn flagged(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| !r.flag.is_empty())
    }

    /// Columns `a, characteristic, operator, ratio, running_slope, flag`.
    pub fn to_csv(&self) -> String {
        let mut w = csv_writer();
        for r in &self.rows {
            w.serialize(r).expect("rows serialize");
        }
        finish(w)
    }
}

/// Slope and standard error over the upper half (by characteristic order of
/// insertion) of the usable points; `None` below two distinct abscissae.
pub fn top_half_fit(points: &[(f64, f64)]) -> Option<(f64, f64, usize)> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(c, r)| c.is_finite() && r.is_finite() && *c > 0.0 && *r > 0.0)
        .map(|(c, r)| (c.ln(), r.ln()))
        .collect();
    let top = &usable[usable.len() / 2..];
    if top.len() < 2 {
        return None;
    }
    let n = top.len() as f64;
    let mx = top.iter().map(|p| p.0).sum::<f64>() / n;
    let my = top.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = top.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 1e-18) {
        return None;
    }
    let sxy: f64 = top.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let stderr = if top.len() > 2 {
        let rss: f64 = top.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some((slope, stderr, top.len()))
}

/// Exponents `a_i = n·(p−1)·i/10`, approaching the edge of the power-weight `A_p` range.
pub fn exponents(dim: u32, p: f64) -> Vec<f64> {
    (0..SWEEP_POINTS)
        .map(|i| dim as f64 * (p - 1.0) * i as f64 / SWEEP_POINTS as f64)
        .collect()
}

struct Measured {
    operator: &'static str,
    characteristic: f64,
    ratio: f64,
    flag: String,
}

fn overflow(c: f64) -> String {
    if c.is_finite() {
        String::new()
    } else {
        "characteristic-overflow".into()
    }
}

fn scalar_rows(grid: &DyadicGrid, a: f64, cfg: &ExperimentConfig) -> Result<Vec<Measured>> {
    let p = cfg.p;
    let w = power_weight(grid, a);
    let wr = Some(WeightRef::Scalar(&w));
    let ch = scalar_ap(&w, p)?.value;
    let mut out = Vec::new();
    let m = operator_norm_estimate(&Operator::Maximal, grid, p, wr, cfg.trials, cfg.seed)?.estimate;
    out.push(Measured {
        operator: "maximal",
        characteristic: ch,
        ratio: m,
        flag: overflow(ch),
    });
    let family = sparse_generate(grid, &SparseStrategy::NestedHalves)?;
    let s = operator_norm_estimate(&Operator::Sparse(&family), grid, p, wr, cfg.trials, cfg.seed)?.estimate;
    let mut flag = overflow(ch);
    if p == 2.0 && flag.is_empty() && s > 8.0 * ch {
        flag = "exceeds-8-a2".into();
    }
    out.push(Measured {
        operator: "sparse",
        characteristic: ch,
        ratio: s,
        flag,
    });
    if grid.dim() == 1 {
        let t = operator_norm_estimate(&Operator::HilbertMaximal, grid, p, wr, cfg.trials, cfg.seed)?.estimate;
        out.push(Measured {
            operator: "hilbert-maximal",
            characteristic: ch,
            ratio: t,
            flag: overflow(ch),
        });
        let sigma = dual_weight(&w, p)?;
        let mut best = 0.0f64;
        for t in 0..cfg.trials {
            let f = scalar_test_field(grid, Some(&sigma), cfg.seed, t);
            let den = maximal_scalar(&f).lp_norm(p, wr)?;
            if den > 0.0 {
                best = best.max(hilbert_maximal(&f)?.lp_norm(p, wr)? / den);
            }
        }
        out.push(Measured {
            operator: "hilbert-vs-maximal",
            characteristic: ch,
            ratio: best,
            flag: overflow(ch),
        });
    }
    if cfg.d >= 2 {
        let r = random_rotation(cfg.d, &mut rng(cfg.seed));
        let back = a / (p - 1.0);
        let e: Vec<f64> = (0..cfg.d).map(|i| if i % 2 == 0 { a } else { -back }).collect();
        let mw = rotated_power(grid, &r, &e);
        let ch = if p == 2.0 { matrix_a2_tv(&mw)?.value } else { matrix_ap_roudenko(&mw, p)?.value };
        let cg = operator_norm_estimate(&Operator::ChristGoldberg { r: p }, grid, p, Some(WeightRef::Matrix(&mw)), cfg.trials, cfg.seed)?.estimate;
        out.push(Measured {
            operator: "christ-goldberg",
            characteristic: ch,
            ratio: cg,
            flag: overflow(ch),
        });
    }
    Ok(out)
}

/// One row per exponent and operator, with a running top-half slope per operator.
pub fn sweep_sharp_constants(cfg: &ExperimentConfig) -> Result<SweepTable> {
    let grid = cfg.grid()?;
    let a_values = exponents(cfg.dim, cfg.p);
    let measured = weightlab_core::par::try_map_range(a_values.len(), |i| scalar_rows(&grid, a_values[i], cfg))?;
    let mut rows = Vec::new();
    let mut series: Vec<(&'static str, Vec<(f64, f64)>)> = Vec::new();
    for (a, group) in a_values.iter().zip(measured) {
        for m in group {
            let pos = match series.iter().position(|(op, _)| *op == m.operator) {
                Some(i) => i,
                None => {
                    series.push((m.operator, Vec::new()));
                    series.len() - 1
                }
            };
            if m.flag != "characteristic-overflow" {
                series[pos].1.push((m.characteristic, m.ratio));
            }
            rows.push(SweepRow {
                a: *a,
                characteristic: m.characteristic,
                operator: m.operator.to_string(),
                ratio: m.ratio,
                running_slope: top_half_fit(&series[pos].1).map(|f| f.0),
                flag: m.flag,
            });
        }
    }
    let fits = series
        .iter()
        .filter_map(|(op, pts)| {
            top_half_fit(pts).map(|(slope, stderr, points)| SlopeFit {
                operator: op.to_string(),
                slope,
                stderr,
                points,
            })
        })
        .collect();
    Ok(SweepTable { p: cfg.p, rows, fits })
}

/// Buckley exponent `p' − 1` of the maximal operator.
pub fn buckley_exponent(p: f64) -> f64 {
    conjugate(p) - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let pts: Vec<(f64, f64)> = (1..=8).map(|i| (i as f64, 3.0 * (i as f64).powf(1.5))).collect();
        let (s, e, n) = top_half_fit(&pts).unwrap();
        assert!((s - 1.5).abs() < 1e-12);
        assert!(e < 1e-12);
        assert_eq!(n, 4);
        assert!(top_half_fit(&[(1.0, 1.0)]).is_none());
        assert!(top_half_fit(&[(2.0, 1.0), (2.0, 3.0)]).is_none());
    }

    #[test]
    fn small_sweep_shape() {
        let mut cfg = ExperimentConfig::new("sweep");
        cfg.depth = 5;
        cfg.d = 2;
        cfg.trials = 6;
        let t = sweep_sharp_constants(&cfg).unwrap();
        assert_eq!(t.rows.len(), SWEEP_POINTS * 5);
        let first = &t.rows[0];
        assert_eq!(first.a, 0.0);
        assert!((first.characteristic - 1.0).abs() < 1e-12);
        assert!(first.running_slope.is_none());
        // unweighted maximal and sparse norms on their extremal constant field
        assert!(first.ratio >= 1.0);
        assert!(t.flagged().next().is_none());
        let csv = t.to_csv();
        assert!(csv.starts_with("a,characteristic,operator,ratio,running_slope,flag\r\n0.0,1.0,maximal,"));
        assert!(t.fit("maximal").is_some());
    }
}
