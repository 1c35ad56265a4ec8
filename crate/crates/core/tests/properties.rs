use std::f64::consts::PI;

use p2attractor::elliptic::{fit_torus_map, CurveEmbedding, Lattice};
use p2attractor::lyapunov::{orbit_on_curve, transverse_exponent};
use p2attractor::projective::{fs_distance, sample_fs_uniform};
use p2attractor::rng::stream;
use p2attractor::stats::{batch_means, Accumulator};
use p2attractor::systems::duplication_map;
use p2attractor::{ProjPoint, RationalMap, C64};
use proptest::prelude::*;

fn square() -> CurveEmbedding {
    CurveEmbedding::from_periods(C64::new(2.5, 0.0), C64::new(0.0, 2.5)).unwrap()
}

/// A smooth function on the projective plane.
fn observable(p: &ProjPoint) -> f64 {
    let z = p.coords();
    z[0].norm_sqr() - 0.5 * z[2].norm_sqr() + (z[1] * z[2].conj()).re
}

#[test]
fn birkhoff_average_matches_canonical_measure() {
    let e = square();
    let f = duplication_map(&e.weierstrass);
    let fit = fit_torus_map(&f, &e, 16).unwrap();
    let orbit = orbit_on_curve(&e, &fit, C64::new(0.77, 1.93), 50_000).unwrap();
    let values: Vec<f64> = orbit.iter().map(observable).collect();
    let (time_mean, time_se) = batch_means(&values);
    let space: Accumulator = e
        .sample_mu_c(&mut stream(21, 0), 50_000)
        .iter()
        .map(|s| observable(&s.point))
        .collect();
    let diff = (time_mean - space.mean).abs();
    assert!(
        diff < 3.0 * (time_se + space.std_error()),
        "{time_mean} vs {}",
        space.mean
    );
}

#[test]
fn transverse_exponent_is_seed_stable() {
    let e = square();
    let f = duplication_map(&e.weierstrass);
    let a = transverse_exponent(&f, &e, 20_000, 1).unwrap();
    let b = transverse_exponent(&f, &e, 20_000, 2).unwrap();
    let bound = 3.0 * (a.chi2_standard_error + b.chi2_standard_error);
    assert!((a.chi2 - b.chi2).abs() < bound);
    assert_eq!(a.chi1 + a.chi2, a.integral_log_jac.mean / 2.0);
}

#[test]
fn degree_law_tightens_with_more_anchors() {
    let e = CurveEmbedding::from_periods(C64::new(2.0, 0.0), C64::new(0.4, 1.96)).unwrap();
    let f = duplication_map(&e.weierstrass);
    let coarse = fit_torus_map(&f, &e, 8).unwrap();
    let fine = fit_torus_map(&f, &e, 64).unwrap();
    assert!((coarse.abs_a_sq - 4.0).abs() < 1e-6);
    assert!((fine.abs_a_sq - 4.0).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lattice_reductions_stay_in_class(
        im in 0.5f64..3.0, re in -2.0f64..2.0, s in -20.0f64..20.0, r in -20.0f64..20.0,
    ) {
        let l = Lattice::new(C64::new(1.0, 0.0), C64::new(re, im)).unwrap();
        let t = l.point(s, r);
        let f = l.reduce_fundamental(t);
        let (fs, fr) = l.coords(f);
        prop_assert!((0.0..1.0).contains(&fs) && (0.0..1.0).contains(&fr));
        let n = l.reduce_nearest(t);
        let (ds, dr) = l.coords(t - n);
        prop_assert!((ds - ds.round()).abs() < 1e-9 && (dr - dr.round()).abs() < 1e-9);
        prop_assert!(n.norm() <= f.norm() + 1e-12);
    }

    #[test]
    fn wp_is_even_and_periodic(
        im in 0.6f64..2.0, re in -0.5f64..0.5, s in 0.05f64..0.95, r in 0.05f64..0.95,
    ) {
        let l = Lattice::new(C64::new(1.0, 0.0), C64::new(re, im)).unwrap();
        let t = l.point(s, r);
        let (p, dp) = l.wp(t).unwrap();
        let scale = p.norm().max(1.0);
        let (pm, dpm) = l.wp(-t).unwrap();
        prop_assert!((pm - p).norm() < 1e-9 * scale);
        prop_assert!((dpm + dp).norm() < 1e-9 * dp.norm().max(1.0));
        let (pw, _) = l.wp(t + l.omega1 * 3.0 - l.omega2 * 2.0).unwrap();
        prop_assert!((pw - p).norm() < 1e-9 * scale);
    }

    #[test]
    fn psi_inverts(s in 0.0f64..1.0, r in 0.0f64..1.0) {
        let e = CurveEmbedding::from_periods(C64::new(2.0, 0.0), C64::new(0.4, 1.96)).unwrap();
        let t = e.lattice.point(s, r);
        prop_assume!(e.lattice.reduce_nearest(t).norm() > 1e-3);
        let back = e.invert_psi(&e.psi(t)).unwrap();
        prop_assert!(fs_distance(&e.psi(back), &e.psi(t)) < 1e-9);
    }

    #[test]
    fn jacobian_is_unitary_invariant_for_squares(seed in 0u64..1000, theta in 0.0f64..(2.0 * PI)) {
        // diagonal phases commute with the squaring map up to squaring the phases
        let f = RationalMap::parse(["x^2", "y^2", "z^2"]).unwrap();
        let p = sample_fs_uniform(&mut stream(seed, 0));
        let phase = C64::from_polar(1.0, theta);
        let c = p.coords();
        let q = ProjPoint::new([c[0], c[1] * phase, c[2]]).unwrap();
        let (a, b) = (f.log_jacobian_fs(&p).unwrap(), f.log_jacobian_fs(&q).unwrap());
        prop_assume!(a.is_finite());
        prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    }
}
