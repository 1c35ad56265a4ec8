//! Curve-preserving maps built from the Weierstrass addition law.

use crate::elliptic::WeierstrassData;
use crate::poly::HomPoly;
use crate::projective::C64;
use crate::ratmap::RationalMap;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Components of the degree-4 map induced by `t ↦ 2t` on
/// `y²z = 4x³ − g2·xz² − g3·z³`.
///
/// Clearing denominators in `℘(2t) = (℘⁴ + g2℘²/2 + 2g3℘ + g2²/16) / ℘'²`
/// and the matching expression for `℘'(2t)`, then multiplying through by
/// `4℘'³`, gives three quartics with no common zero on the curve.
pub fn duplication_components(w: &WeierstrassData) -> [HomPoly; 3] {
    let (g2, g3) = (w.g2, w.g3);
    let poly = |terms: Vec<([u32; 3], C64)>| HomPoly::from_terms(4, terms).expect("quartic");
    let f0 = poly(vec![
        ([1, 3, 0], c(4.0, 0.0)),
        ([2, 1, 1], 12.0 * g2),
        ([1, 1, 2], 36.0 * g3),
        ([0, 1, 3], g2 * g2),
    ]);
    let f1 = poly(vec![
        ([0, 4, 0], c(2.0, 0.0)),
        ([1, 2, 1], -6.0 * g2),
        ([0, 2, 2], -36.0 * g3),
        ([2, 0, 2], -18.0 * g2 * g2),
        ([1, 0, 3], -54.0 * g2 * g3),
        ([0, 0, 4], g2 * g2 * g2 / 2.0 - 54.0 * g3 * g3),
    ]);
    let f2 = poly(vec![([0, 3, 1], c(16.0, 0.0))]);
    [f0, f1, f2]
}

/// The duplication map: lift `t ↦ 2t`.
pub fn duplication_map(w: &WeierstrassData) -> RationalMap {
    RationalMap::new(duplication_components(w)).expect("equal degrees")
}

/// Duplication followed by `[x : y : z] ↦ [x : −y : z]`: lift `t ↦ −2t`.
pub fn negated_duplication_map(w: &WeierstrassData) -> RationalMap {
    let [f0, f1, f2] = duplication_components(w);
    RationalMap::new([f0, f1.scale(c(-1.0, 0.0)), f2]).expect("equal degrees")
}

/// On a square lattice (`g3 = 0`), `℘(it) = −℘(t)` and `℘'(it) = i℘'(t)`,
/// so `[−x : iy : z]` after duplication lifts `t ↦ 2i·t`.
pub fn rotated_duplication_map(w: &WeierstrassData) -> Option<RationalMap> {
    if w.g3.norm() > 1e-10 * w.g2.norm().powf(1.5) {
        return None;
    }
    let [f0, f1, f2] = duplication_components(w);
    Some(
        RationalMap::new([f0.scale(c(-1.0, 0.0)), f1.scale(c(0.0, 1.0)), f2])
            .expect("equal degrees"),
    )
}
