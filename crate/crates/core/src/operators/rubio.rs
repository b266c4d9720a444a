//! Truncated iteration series `ℛh = Σ_{k≤K} M^k h / (2a)^k`.

use super::convex::{convex_maximal_table, lp_norm_bodyfield, SupportTable};
use super::maximal::maximal_scalar;
use super::opnorm::{operator_norm_estimate, Operator};
use crate::convex::ConvexBody;
use crate::error::{domain, Result};
use crate::grid::{DyadicField, WeightRef};
use crate::linalg::SpdMatrix;

/// Truncation order used when none is given.
pub const DEFAULT_TRUNCATION: usize = 40;
/// Trials spent on the norm estimate when no norm is supplied.
pub const NORM_TRIALS: usize = 32;

/// Result of an iteration series.
#[derive(Clone, Debug)]
pub struct Iterated<V> {
    pub field: DyadicField<V>,
    /// Normalizing constant `a`: the larger of `measured` and every ratio
    /// `‖M^{k+1}h‖/‖M^k h‖` realized along the series.
    pub a: f64,
    /// Operator-norm estimate the series started from.
    pub measured: f64,
    /// `2^{−K}‖h‖`, the norm allowance for the dropped terms.
    pub tail: f64,
    /// `sup_x M^{K+1}h(x)/(2a)^K`, so that `Mℛh ≤ 2a·ℛh + pointwise_tail` everywhere.
    pub pointwise_tail: f64,
}

fn check_order(k: usize) -> Result<()> {
    if k < 1 {
        return Err(domain("truncation order must be at least 1"));
    }
    Ok(())
}

/// `ℛh` for scalar `h ≥ 0` on `L^p(w)`.
///
/// `norm` is a known estimate of `‖M‖_{L^p(w)}`; without one it is measured
/// with [`NORM_TRIALS`] deterministic trials.
pub fn rubio_iteration_scalar(
    h: &DyadicField<f64>,
    w: &DyadicField<f64>,
    p: f64,
    k: usize,
    norm: Option<f64>,
) -> Result<Iterated<f64>> {
    check_order(k)?;
    h.same_grid(w)?;
    if let Some(c) = h.values().iter().position(|v| !(*v >= 0.0)) {
        return Err(domain(format!("iteration input must be nonnegative, cell {c} is {}", h.values()[c])));
    }
    let wr = Some(WeightRef::Scalar(w));
    let measured = match norm {
        Some(a) => a,
        None => operator_norm_estimate(&Operator::Maximal, h.grid(), p, wr, NORM_TRIALS, 0)?.estimate,
    };
    if !(measured > 0.0) {
        return Err(domain("operator norm estimate must be positive"));
    }
    let mut iterates = vec![h.clone()];
    let mut norms = vec![h.lp_norm(p, wr)?];
    for _ in 0..=k {
        let next = maximal_scalar(iterates.last().expect("nonempty"));
        norms.push(next.lp_norm(p, wr)?);
        iterates.push(next);
    }
    let a = realized(measured, &norms[..=k]);
    let grid = *h.grid();
    let scale = 2.0 * a;
    let values = (0..grid.cell_count())
        .map(|c| {
            let mut s = 0.0;
            for m in iterates[..=k].iter().rev() {
                s = s / scale + m.values()[c];
            }
            s
        })
        .collect();
    let last = &iterates[k + 1];
    let pointwise_tail = last.values().iter().fold(0.0f64, |acc, v| acc.max(*v)) / scale.powi(k as i32);
    Ok(Iterated {
        field: DyadicField::new(grid, values)?,
        a,
        measured,
        tail: 0.5f64.powi(k as i32) * norms[0],
        pointwise_tail,
    })
}

/// `max(measured, ‖M^{j+1}h‖/‖M^j h‖ for j < K)`.
fn realized(measured: f64, norms: &[f64]) -> f64 {
    norms
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .fold(measured, f64::max)
}

/// `ℛF` for a body field on `L^p_𝒦(W)`, computed direction by direction on the
/// standard directions.
pub fn rubio_iteration_convex(
    f: &DyadicField<ConvexBody>,
    w: &DyadicField<SpdMatrix>,
    p: f64,
    k: usize,
    norm: Option<f64>,
) -> Result<Iterated<ConvexBody>> {
    check_order(k)?;
    f.same_grid(w)?;
    let measured = match norm {
        Some(a) => a,
        None => {
            let d = w.values()[0].dim();
            let op = Operator::ConvexMaximal { d };
            operator_norm_estimate(&op, f.grid(), p, Some(WeightRef::Matrix(w)), NORM_TRIALS, 0)?.estimate
        }
    };
    if !(measured > 0.0) {
        return Err(domain("operator norm estimate must be positive"));
    }
    let mut iterates = vec![SupportTable::of(f)];
    let mut norms = vec![lp_norm_bodyfield(f, p, Some(w))?];
    for _ in 0..=k {
        let next = convex_maximal_table(iterates.last().expect("nonempty"));
        norms.push(lp_norm_bodyfield(&next.to_field(), p, Some(w))?);
        iterates.push(next);
    }
    let a = realized(measured, &norms[..=k]);
    let scale = 2.0 * a;
    let coef: Vec<f64> = (0..=k).map(|j| scale.powi(-(j as i32))).collect();
    let refs: Vec<&SupportTable> = iterates[..=k].iter().collect();
    let series = SupportTable::combine(&refs, &coef);
    let last = &iterates[k + 1];
    let top = (0..last.directions().len())
        .flat_map(|j| last.column(j).iter().copied())
        .fold(0.0f64, f64::max);
    Ok(Iterated {
        field: series.to_field(),
        a,
        measured,
        tail: 0.5f64.powi(k as i32) * norms[0],
        pointwise_tail: top / scale.powi(k as i32),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DyadicGrid;

    fn g1(depth: u32) -> DyadicGrid {
        DyadicGrid::new(1, depth).unwrap()
    }

    #[test]
    fn constant_input_gives_geometric_sum() {
        let g = g1(5);
        let one = DyadicField::constant(g, 1.0);
        let r = rubio_iteration_scalar(&one, &one, 2.0, DEFAULT_TRUNCATION, None).unwrap();
        assert!(r.a >= 1.0);
        let q = 1.0 / (2.0 * r.a);
        let want: f64 = (0..=DEFAULT_TRUNCATION).map(|k| q.powi(k as i32)).sum();
        for v in r.field.values() {
            assert!((v - want).abs() < 1e-14);
        }
        let zero = DyadicField::constant(g, 0.0);
        let z = rubio_iteration_scalar(&zero, &one, 2.0, 5, None).unwrap();
        assert!(z.field.values().iter().all(|v| *v == 0.0));
        assert!(rubio_iteration_scalar(&one, &one, 2.0, 0, None).is_err());
    }

    #[test]
    fn scalar_properties() {
        let g = g1(7);
        let w = DyadicField::from_fn(g, |i| (i as f64 + 1.0).powf(0.4));
        let h = DyadicField::from_fn(g, |i| ((i * 31) % 17) as f64 + 0.1);
        let p = 3.0;
        let r = rubio_iteration_scalar(&h, &w, p, DEFAULT_TRUNCATION, None).unwrap();
        for (a, b) in h.values().iter().zip(r.field.values()) {
            assert!(a <= b);
        }
        let wr = Some(WeightRef::Scalar(&w));
        assert!(r.field.lp_norm(p, wr).unwrap() <= 2.0 * h.lp_norm(p, wr).unwrap() + r.tail);
        let m = maximal_scalar(&r.field);
        for (mr, rr) in m.values().iter().zip(r.field.values()) {
            assert!(*mr <= 2.0 * r.a * rr * (1.0 + 1e-12) + r.pointwise_tail);
        }
    }

    #[test]
    fn convex_constant_field() {
        let g = g1(4);
        let k0 = ConvexBody::ellipsoid(SpdMatrix::diag(&[1.0, 0.5]));
        let f = DyadicField::from_fn(g, |_| k0.clone());
        let w = DyadicField::from_fn(g, |_| SpdMatrix::identity(2));
        let r = rubio_iteration_convex(&f, &w, 2.0, 10, None).unwrap();
        let q = 1.0 / (2.0 * r.a);
        let s: f64 = (0..=10).map(|k| q.powi(k)).sum();
        let want = k0.scale(s).unwrap();
        for b in r.field.values() {
            assert!(b.contains(&want, 1e-13) && want.contains(b, 1e-13));
            assert!(b.contains(&k0, 0.0));
        }
    }

    #[test]
    fn one_dimensional_convex_matches_scalar() {
        let g = g1(5);
        let h = DyadicField::from_fn(g, |i| ((i * 7) % 5) as f64 + 0.5);
        let w = DyadicField::from_fn(g, |i| 1.0 + (i % 3) as f64);
        let f = h.map(|v| ConvexBody::segment(vec![*v]));
        let wm = w.map(|v| SpdMatrix::scalar(*v));
        let a = 1.7;
        let rs = rubio_iteration_scalar(&h, &w, 2.0, 12, Some(a)).unwrap();
        let rc = rubio_iteration_convex(&f, &wm, 2.0, 12, Some(rs.a)).unwrap();
        for (b, v) in rc.field.values().iter().zip(rs.field.values()) {
            assert!((b.support(&[1.0]).unwrap() - v).abs() < 1e-12 * v);
        }
    }
}
