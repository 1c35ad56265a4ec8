//! Points of the complex projective plane in canonical homogeneous
//! coordinates, the chordal Fubini–Study distance, the Fubini–Study uniform
//! measure, and the three standard affine charts.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Below this modulus a raw triple is treated as the zero vector.
pub const ZERO_FLOOR: f64 = 1e-300;

/// Relative tolerance used when picking the phase-anchor coordinate.
pub const CANON_TOL: f64 = 1e-12;

/// A point of P² stored as a unit vector whose first non-negligible
/// coordinate is real and positive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjPoint {
    coords: [C64; 3],
}

impl ProjPoint {
    pub fn new(raw: [C64; 3]) -> Result<Self> {
        normalize(raw)
    }

    /// Convenience constructor from real homogeneous coordinates.
    pub fn real(x: f64, y: f64, z: f64) -> Result<Self> {
        normalize([C64::new(x, 0.0), C64::new(y, 0.0), C64::new(z, 0.0)])
    }

    pub fn coords(&self) -> &[C64; 3] {
        &self.coords
    }

    /// Index of the coordinate of maximal modulus (ties to the lowest index).
    pub fn max_index(&self) -> usize {
        max_modulus_index(&self.coords)
    }
}

pub(crate) fn max_modulus_index(z: &[C64; 3]) -> usize {
    let mut best = 0;
    for i in 1..3 {
        if z[i].norm() > z[best].norm() {
            best = i;
        }
    }
    best
}

pub(crate) fn norm3(z: &[C64; 3]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Canonicalize a raw homogeneous triple.
pub fn normalize(raw: [C64; 3]) -> Result<ProjPoint> {
    let big = raw.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if big.is_nan() || big < ZERO_FLOOR || !big.is_finite() {
        return Err(Error::ZeroVector);
    }
    // pre-scale by the largest modulus so the 2-norm cannot overflow
    let scaled = raw.map(|c| c / big);
    let anchor = scaled
        .iter()
        .position(|c| c.norm() > CANON_TOL)
        .expect("max-modulus coordinate is 1");
    let phase = scaled[anchor].conj() / scaled[anchor].norm();
    let n = norm3(&scaled);
    let mut coords = scaled.map(|c| c * phase / n);
    coords[anchor] = C64::new(coords[anchor].norm(), 0.0);
    Ok(ProjPoint { coords })
}

/// Chordal Fubini–Study distance `sqrt(1 - |<p,q>|^2)`, in [0, 1].
///
/// Evaluated through the Lagrange identity `|p|^2|q|^2 - |<p,q>|^2 = |p ^ q|^2`
/// so that nearby points keep full relative precision.
pub fn fs_distance(p: &ProjPoint, q: &ProjPoint) -> f64 {
    raw_fs_distance(&p.coords, &q.coords)
}

pub(crate) fn raw_fs_distance(p: &[C64; 3], q: &[C64; 3]) -> f64 {
    let wedge = (p[0] * q[1] - p[1] * q[0]).norm_sqr()
        + (p[0] * q[2] - p[2] * q[0]).norm_sqr()
        + (p[1] * q[2] - p[2] * q[1]).norm_sqr();
    let np = p.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let nq = q.iter().map(|c| c.norm_sqr()).sum::<f64>();
    (wedge / (np * nq)).sqrt().min(1.0)
}

/// Draw from the normalized Fubini–Study volume by projecting a standard
/// complex Gaussian vector.
pub fn sample_fs_uniform<R: Rng + ?Sized>(rng: &mut R) -> ProjPoint {
    loop {
        let mut raw = [C64::new(0.0, 0.0); 3];
        for c in raw.iter_mut() {
            *c = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
        if let Ok(p) = normalize(raw) {
            return p;
        }
    }
}

/// Affine coordinates of a point in one of the three standard charts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartCoords {
    pub chart: usize,
    pub u: C64,
    pub v: C64,
}

impl ChartCoords {
    pub fn as_array(&self) -> [C64; 2] {
        [self.u, self.v]
    }

    /// `1 + |u|^2 + |v|^2`, the Fubini–Study density denominator.
    pub fn weight(&self) -> f64 {
        1.0 + self.u.norm_sqr() + self.v.norm_sqr()
    }
}

/// The two coordinate indices other than `chart`, in increasing order.
pub(crate) fn others(chart: usize) -> [usize; 2] {
    match chart {
        0 => [1, 2],
        1 => [0, 2],
        2 => [0, 1],
        _ => panic!("chart index {chart} out of range"),
    }
}

/// Chart of the max-modulus coordinate, so `|u|, |v| <= 1`.
pub fn to_chart(p: &ProjPoint) -> ChartCoords {
    to_chart_in(p, p.max_index()).expect("max-modulus coordinate is nonzero")
}

/// Coordinates in a prescribed chart; fails if the chart coordinate vanishes.
pub fn to_chart_in(p: &ProjPoint, chart: usize) -> Result<ChartCoords> {
    if chart > 2 {
        return Err(Error::InvalidArgument(format!("chart index {chart}")));
    }
    let c = p.coords[chart];
    if c.norm() < ZERO_FLOOR {
        return Err(Error::InvalidArgument(format!(
            "point lies on the hyperplane at infinity of chart {chart}"
        )));
    }
    let [i, j] = others(chart);
    Ok(ChartCoords {
        chart,
        u: p.coords[i] / c,
        v: p.coords[j] / c,
    })
}

/// Homogeneous representative with a 1 in the chart slot.
pub(crate) fn chart_lift(c: &ChartCoords) -> [C64; 3] {
    let mut z = [C64::new(1.0, 0.0); 3];
    let [i, j] = others(c.chart);
    z[i] = c.u;
    z[j] = c.v;
    z
}

pub fn from_chart(c: &ChartCoords) -> ProjPoint {
    normalize(chart_lift(c)).expect("chart lift has a unit coordinate")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn close(p: &ProjPoint, q: &[C64; 3]) -> bool {
        p.coords()
            .iter()
            .zip(q)
            .all(|(a, b)| (a - b).norm() < 1e-12)
    }

    #[test]
    fn normalize_examples() {
        let p = normalize([c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(close(&p, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]));
        let p = normalize([c(0.0, 0.0), c(0.0, 0.0), c(0.0, 3.0)]).unwrap();
        assert!(close(&p, &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]));
        assert!(matches!(
            normalize([c(0.0, 0.0); 3]),
            Err(Error::ZeroVector)
        ));
        assert!(matches!(
            normalize([c(1e-301, 0.0), c(0.0, 0.0), c(0.0, 0.0)]),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn normalize_survives_huge_coordinates() {
        let p = normalize([c(1e300, 0.0), c(1e300, 1e300), c(0.0, 0.0)]).unwrap();
        assert!((norm3(p.coords()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn distance_examples() {
        let e0 = ProjPoint::real(1.0, 0.0, 0.0).unwrap();
        let e1 = ProjPoint::real(0.0, 1.0, 0.0).unwrap();
        let p = ProjPoint::real(1.0, 1.0, 0.0).unwrap();
        assert!((fs_distance(&e0, &e1) - 1.0).abs() < 1e-15);
        assert_eq!(fs_distance(&p, &p), 0.0);
        assert!((fs_distance(&p, &e0) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn distance_resolves_close_points() {
        let p = ProjPoint::real(1.0, 0.3, -0.2).unwrap();
        let q = ProjPoint::real(1.0, 0.3 + 1e-11, -0.2).unwrap();
        let d = fs_distance(&p, &q);
        assert!(d > 5e-12 && d < 2e-11, "{d}");
    }

    #[test]
    fn chart_examples() {
        let p = ProjPoint::real(1.0, 2.0, 0.0).unwrap();
        let ch = to_chart(&p);
        assert_eq!(ch.chart, 1);
        assert!((ch.u - c(0.5, 0.0)).norm() < 1e-15 && ch.v.norm() < 1e-15);
        let forced = to_chart_in(&p, 1).unwrap();
        assert_eq!(forced, ch);
        let e0 = ProjPoint::real(1.0, 0.0, 0.0).unwrap();
        let ch = to_chart(&e0);
        assert_eq!(ch.chart, 0);
        assert_eq!(ch.u, c(0.0, 0.0));
        assert_eq!(ch.v, c(0.0, 0.0));
        assert!(to_chart_in(&e0, 2).is_err());
    }

    #[test]
    fn chart_ties_go_to_lowest_index() {
        let p = ProjPoint::real(1.0, 1.0, 1.0).unwrap();
        assert_eq!(to_chart(&p).chart, 0);
    }

    #[test]
    fn chart_round_trip_on_random_points() {
        let mut rng = stream(11, 0);
        let mut worst = 0.0f64;
        for _ in 0..10_000 {
            let p = sample_fs_uniform(&mut rng);
            let ch = to_chart(&p);
            assert!(ch.u.norm() <= 1.0 && ch.v.norm() <= 1.0);
            worst = worst.max(fs_distance(&p, &from_chart(&ch)));
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn uniform_sampler_symmetry() {
        let mut rng = stream(5, 0);
        let n = 60_000;
        let mut first_max = 0usize;
        let mut mean_sq = 0.0;
        for _ in 0..n {
            let p = sample_fs_uniform(&mut rng);
            if p.max_index() == 0 {
                first_max += 1;
            }
            mean_sq += p.coords()[0].norm_sqr();
        }
        let frac = first_max as f64 / n as f64;
        let sigma = (2.0 / 9.0 / n as f64).sqrt();
        assert!((frac - 1.0 / 3.0).abs() < 4.0 * sigma, "{frac}");
        // |z0|^2 is Beta(1,2): variance 1/18
        let mean_sq = mean_sq / n as f64;
        assert!((mean_sq - 1.0 / 3.0).abs() < 4.0 * (1.0 / 18.0 / n as f64).sqrt());
    }

    #[test]
    fn uniform_sampler_is_deterministic() {
        let a = sample_fs_uniform(&mut stream(99, 4));
        let b = sample_fs_uniform(&mut stream(99, 4));
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_sampler_unitary_invariance() {
        // a fixed unitary: rotation mixing coordinates 0 and 2 with a phase
        let (s, co) = (0.6f64, 0.8f64);
        let u = [
            [c(co, 0.0), c(0.0, 0.0), c(0.0, s)],
            [c(0.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)],
            [c(0.0, s), c(0.0, 0.0), c(co, 0.0)],
        ];
        let mut rng = stream(17, 0);
        let n = 40_000;
        let (mut plain, mut rotated) = ([0.0; 3], [0.0; 3]);
        for _ in 0..n {
            let p = sample_fs_uniform(&mut rng);
            let z = p.coords();
            for i in 0..3 {
                let w: C64 = (0..3).map(|j| u[i][j] * z[j]).sum();
                plain[i] += z[i].norm_sqr();
                rotated[i] += w.norm_sqr();
            }
        }
        let sigma = (1.0 / 18.0 / n as f64).sqrt();
        for i in 0..3 {
            let diff = (plain[i] - rotated[i]).abs() / n as f64;
            assert!(diff < 3.0 * 2f64.sqrt() * sigma, "coordinate {i}: {diff}");
        }
    }

    fn arb_point() -> impl Strategy<Value = [C64; 3]> {
        proptest::array::uniform6(-1.0f64..1.0).prop_filter_map("nonzero", |a| {
            let z = [c(a[0], a[1]), c(a[2], a[3]), c(a[4], a[5])];
            (norm3(&z) > 1e-3).then_some(z)
        })
    }

    proptest! {
        #[test]
        fn triangle_inequality(a in arb_point(), b in arb_point(), d in arb_point()) {
            let (p, q, r) = (normalize(a).unwrap(), normalize(b).unwrap(), normalize(d).unwrap());
            prop_assert!(fs_distance(&p, &r) <= fs_distance(&p, &q) + fs_distance(&q, &r) + 1e-12);
            prop_assert!((fs_distance(&p, &q) - fs_distance(&q, &p)).abs() < 1e-15);
        }

        #[test]
        fn distance_ignores_scaling(a in arb_point(), b in arb_point(),
                                    re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let lambda = c(re, im);
            prop_assume!(lambda.norm() > 1e-3);
            let p = normalize(a).unwrap();
            let q = normalize(b).unwrap();
            let ps = normalize(a.map(|x| x * lambda)).unwrap();
            prop_assert!((fs_distance(&p, &q) - fs_distance(&ps, &q)).abs() < 1e-12);
        }

        #[test]
        fn canonical_form_is_scale_free(a in arb_point(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let lambda = c(re, im);
            prop_assume!(lambda.norm() > 1e-3);
            let p = normalize(a).unwrap();
            let q = normalize(a.map(|x| x * lambda)).unwrap();
            for (x, y) in p.coords().iter().zip(q.coords()) {
                prop_assert!((x - y).norm() < 1e-12);
            }
            prop_assert!((norm3(p.coords()) - 1.0).abs() < 1e-14);
        }
    }
}
