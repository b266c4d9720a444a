use weightlab_core::gen::{cascade, lognormal, matrix_cascade, rng};
use weightlab_core::operators::rubio_iteration_scalar;
use weightlab_core::weights::{
    a1k_characteristic, conjugate, dual_weight, matrix_a1, matrix_a2_tv, matrix_ap_roudenko, reverse_factorization_scalar,
    scalar_a1, scalar_ap, tv_norm_ap_constant,
};
use weightlab_core::{ConvexBody, DirectionSet, DyadicField, DyadicGrid, NormFunction, SpdMatrix};

/// `sup_Q (avg w)(avg w^{1−p'})^{p−1}` by explicit enumeration of cells per cube.
fn brute_ap(w: &DyadicField<f64>, p: f64) -> f64 {
    let g = w.grid();
    let e = 1.0 - p / (p - 1.0);
    g.all_cubes()
        .map(|q| {
            let cells = g.cells_of(&q);
            let n = cells.len() as f64;
            let a: f64 = cells.iter().map(|&c| w.values()[c]).sum::<f64>() / n;
            let b: f64 = cells.iter().map(|&c| w.values()[c].powf(e)).sum::<f64>() / n;
            a * b.powf(p - 1.0)
        })
        .fold(0.0, f64::max)
}

#[test]
fn duality_identity_on_random_weights() {
    let g = DyadicGrid::new(1, 6).unwrap();
    let mut r = rng(17);
    for t in 0..20 {
        let w = if t % 2 == 0 { lognormal(&g, 1.0, &mut r) } else { cascade(&g, t, 0.6) };
        for p in [1.5, 2.0, 3.0] {
            let a = scalar_ap(&w, p).unwrap().value;
            assert!((a - brute_ap(&w, p)).abs() < 1e-12 * a);
            let sigma = dual_weight(&w, p).unwrap();
            let b = scalar_ap(&sigma, conjugate(p)).unwrap().value;
            let want = a.powf(conjugate(p) - 1.0);
            assert!((b - want).abs() <= 1e-10 * want, "p={p}: {b} vs {want}");
            assert!(a >= 1.0 - 1e-12);
        }
        assert!(scalar_a1(&w).unwrap().value >= 1.0);
    }
}

#[test]
fn one_dimensional_matrix_weights_collapse() {
    let g = DyadicGrid::new(1, 5).unwrap();
    for seed in 0..10 {
        let w = cascade(&g, seed, 0.5);
        let m = w.map(|v| SpdMatrix::scalar(*v));
        for p in [1.5, 3.0] {
            let a = scalar_ap(&w, p).unwrap().value;
            assert!((matrix_ap_roudenko(&m, p).unwrap().value - a).abs() < 1e-10 * a);
        }
        let a1 = scalar_a1(&w).unwrap().value;
        assert!((matrix_a1(&m).unwrap().value - a1).abs() < 1e-10 * a1);
        let a2 = scalar_ap(&w, 2.0).unwrap().value.sqrt();
        assert!((matrix_a2_tv(&m).unwrap().value - a2).abs() < 1e-10 * a2);
    }
}

#[test]
fn matrix_characteristics_are_at_least_one() {
    let g = DyadicGrid::new(2, 3).unwrap();
    for seed in 0..4 {
        let w = matrix_cascade(&g, 2, seed, 0.4);
        assert!(matrix_a2_tv(&w).unwrap().value >= 1.0 - 1e-12);
        assert!(matrix_ap_roudenko(&w, 2.5).unwrap().value >= 1.0 - 1e-12);
        assert!(matrix_a1(&w).unwrap().value >= 1.0 - 1e-12);
    }
}

#[test]
fn reverse_factorization_bound() {
    let g = DyadicGrid::new(1, 6).unwrap();
    let one = DyadicField::constant(g, 1.0);
    let mut r = rng(5);
    for p in [2.0, 3.0] {
        for _ in 0..10 {
            let h0 = lognormal(&g, 1.0, &mut r);
            let h1 = lognormal(&g, 1.0, &mut r);
            let w0 = rubio_iteration_scalar(&h0, &one, p, 40, Some(2.0)).unwrap().field;
            let w1 = rubio_iteration_scalar(&h1, &one, p, 40, Some(2.0)).unwrap().field;
            let a0 = scalar_a1(&w0).unwrap().value;
            let a1 = scalar_a1(&w1).unwrap().value;
            let w = reverse_factorization_scalar(&w0, &w1, p).unwrap();
            assert!(scalar_ap(&w, p).unwrap().value <= a0 * a1.powf(p - 1.0) * (1.0 + 1e-12));
        }
        let w0 = cascade(&g, 3, 0.3);
        let w = reverse_factorization_scalar(&w0, &one, p).unwrap();
        assert_eq!(w, w0);
        assert!(scalar_ap(&w0, p).unwrap().value <= scalar_a1(&w0).unwrap().value * (1.0 + 1e-12));
    }
}

#[test]
fn refinement_never_lowers_a_characteristic() {
    let coarse = DyadicGrid::new(1, 4).unwrap();
    let fine = DyadicGrid::new(1, 5).unwrap();
    let w = cascade(&coarse, 9, 0.7);
    let same = DyadicField::from_fn(fine, |c| w.values()[c / 2]);
    let bumped = DyadicField::from_fn(fine, |c| w.values()[c / 2] * if c % 2 == 0 { 1.5 } else { 0.5 });
    for p in [1.5, 2.0, 4.0] {
        let a = scalar_ap(&w, p).unwrap().value;
        assert!((scalar_ap(&same, p).unwrap().value - a).abs() < 1e-12 * a);
        assert!(scalar_ap(&bumped, p).unwrap().value >= a * (1.0 - 1e-12));
    }
}

#[test]
fn convex_a1_of_scaled_ball_matches_scalar_a1() {
    let g = DyadicGrid::new(1, 5).unwrap();
    let w = cascade(&g, 2, 0.5);
    for d in [2, 3] {
        let f = w.map(|v| ConvexBody::unit_ball(d).scale(*v).unwrap());
        let a = a1k_characteristic(&f).unwrap().value;
        let s = scalar_a1(&w).unwrap().value;
        assert!((a - s).abs() < 1e-12 * s, "d={d}");
    }
}

#[test]
fn convex_a1_within_dimension_factor_of_matrix_a1() {
    let g = DyadicGrid::new(1, 4).unwrap();
    for seed in 0..5 {
        let w = matrix_cascade(&g, 2, seed, 0.3);
        let f = w.map(|m| ConvexBody::ellipsoid(m.clone()));
        let a = a1k_characteristic(&f).unwrap().value;
        let m = matrix_a1(&w).unwrap().value;
        let ratio = a / m;
        assert!((0.5..=2.0).contains(&ratio), "seed {seed}: ratio {ratio}");
    }
}

#[test]
fn norm_ap_constant_blows_up_near_degenerate_weights() {
    let g = DyadicGrid::new(1, 3).unwrap();
    let dirs: Vec<Vec<f64>> = DirectionSet::standard(2).iter().step_by(9).map(|u| u.to_vec()).collect();
    let mut prev = 0.0;
    for eps in [1e-1, 1e-2, 1e-3] {
        let w = DyadicField::from_fn(g, |c| {
            let t = c as f64 * 0.4;
            let r = weightlab_core::Mat::rotation(t);
            let m = r.mul(&weightlab_core::Mat::diag(&[1.0, eps])).mul(&r.transpose());
            SpdMatrix::new(m).unwrap()
        });
        let c = tv_norm_ap_constant(&NormFunction::Matrix(w), 2.0, &dirs).unwrap().value;
        assert!(c.is_finite() && c > prev, "eps {eps}: {c}");
        prev = c;
    }
}
