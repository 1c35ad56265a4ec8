//! Rational self-maps `f = [F0 : F1 : F2]` of the projective plane.
//!
//! Residual thresholds (`eta`, the invariance and avoidance tolerances) are
//! measured relative to the largest coefficient modulus, so multiplying all
//! components by a common constant changes nothing.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::poly::{parse, HomPoly, Powers};
use crate::projective::{
    fs_distance, norm3, normalize, others, sample_fs_uniform, to_chart_in, ChartCoords, ProjPoint,
    C64,
};
use crate::rng::stream;

/// Default relative threshold on `|F(z)|`, `|z| = 1`, below which a point
/// counts as indeterminate.
pub const DEFAULT_ETA: f64 = 1e-12;

/// Pass threshold for [`check_curve_avoids_indeterminacy`].
pub const AVOIDANCE_THRESHOLD: f64 = 1e-6;

/// Residual below which a scan minimum counts as a common zero.
pub const SCAN_THRESHOLD: f64 = 1e-8;

/// `|det|` below which the volume Jacobian is reported as critical (`-inf`).
pub const CRITICAL_DET: f64 = 1e-300;

#[derive(Clone, Debug)]
pub struct RationalMap {
    components: [HomPoly; 3],
    partials: [[HomPoly; 3]; 3],
    degree: u32,
    coef_scale: f64,
    eta: f64,
}

/// Derivative of the chart representative of `f` between two charts.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ChartJacobian {
    pub source: ChartCoords,
    pub image: ChartCoords,
    pub matrix: [[C64; 2]; 2],
}

impl ChartJacobian {
    pub fn det(&self) -> C64 {
        self.matrix[0][0] * self.matrix[1][1] - self.matrix[0][1] * self.matrix[1][0]
    }

    /// `log` of the Fubini–Study volume Jacobian:
    /// `2 log|det| + 3 log(w(source) / w(image))` with `w = 1 + |u|^2 + |v|^2`.
    pub fn log_jac_fs(&self) -> f64 {
        let det = self.det().norm();
        if det < CRITICAL_DET {
            return f64::NEG_INFINITY;
        }
        2.0 * det.ln() + 3.0 * (self.source.weight() / self.image.weight()).ln()
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct JacobianSample {
    pub point: ProjPoint,
    pub chart_jacobian: [[C64; 2]; 2],
    /// `-inf` marks a critical point.
    pub log_jac_fs: f64,
}

impl JacobianSample {
    pub fn is_critical(&self) -> bool {
        self.log_jac_fs == f64::NEG_INFINITY
    }
}

impl RationalMap {
    pub fn new(components: [HomPoly; 3]) -> Result<Self> {
        let degs = [
            components[0].degree(),
            components[1].degree(),
            components[2].degree(),
        ];
        if degs[0] != degs[1] || degs[1] != degs[2] {
            return Err(Error::UnequalDegrees(degs));
        }
        if components.iter().all(|c| c.is_zero()) {
            return Err(Error::EmptyPolynomial);
        }
        let degree = degs[0];
        if degree < 2 {
            return Err(Error::DegreeTooLow(degree));
        }
        let partials = [0, 1, 2].map(|k| components[k].gradient());
        let coef_scale = components.iter().map(|c| c.max_coeff()).fold(0.0, f64::max);
        Ok(RationalMap {
            components,
            partials,
            degree,
            coef_scale,
            eta: DEFAULT_ETA,
        })
    }

    pub fn parse(texts: [&str; 3]) -> Result<Self> {
        RationalMap::new([parse(texts[0])?, parse(texts[1])?, parse(texts[2])?])
    }

    pub fn with_threshold(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn components(&self) -> &[HomPoly; 3] {
        &self.components
    }

    pub fn threshold(&self) -> f64 {
        self.eta
    }

    pub fn eval_raw(&self, z: &[C64; 3]) -> [C64; 3] {
        let pw = Powers::new(z, self.degree);
        [0, 1, 2].map(|k| self.components[k].eval_with(&pw))
    }

    /// `|F(z)|` for the unit representative of `p`, relative to the
    /// coefficient scale.
    pub fn residual(&self, p: &ProjPoint) -> f64 {
        norm3(&self.eval_raw(p.coords())) / self.coef_scale
    }

    pub fn eval_map(&self, p: &ProjPoint) -> Result<ProjPoint> {
        let img = self.eval_raw(p.coords());
        let residual = norm3(&img) / self.coef_scale;
        if residual < self.eta {
            return Err(Error::NearIndeterminacy { residual });
        }
        normalize(img)
    }

    /// Derivative in the max-modulus charts of `p` and `f(p)`.
    pub fn chart_jacobian(&self, p: &ProjPoint) -> Result<ChartJacobian> {
        let img = self.eval_map(p)?;
        self.chart_jacobian_between(p, p.max_index(), img.max_index())
    }

    /// Derivative of `w -> chart_dst(f(chart_src^{-1}(w)))` at `p`, by the
    /// quotient rule on the formal partials.
    pub fn chart_jacobian_between(
        &self,
        p: &ProjPoint,
        src: usize,
        dst: usize,
    ) -> Result<ChartJacobian> {
        let source = to_chart_in(p, src)?;
        let unit = self.eval_raw(p.coords());
        let residual = norm3(&unit) / self.coef_scale;
        if residual < self.eta {
            return Err(Error::NearIndeterminacy { residual });
        }
        let mut z = [C64::new(1.0, 0.0); 3];
        let [i, j] = others(src);
        z[i] = source.u;
        z[j] = source.v;
        let pw = Powers::new(&z, self.degree);
        let f = [0, 1, 2].map(|k| self.components[k].eval_with(&pw));
        let fd = f[dst];
        if fd.norm() < 1e-300 || fd.norm() < 1e-14 * norm3(&f) {
            return Err(Error::InvalidArgument(format!(
                "image lies on the hyperplane at infinity of chart {dst}"
            )));
        }
        let src_vars = others(src);
        let dst_vars = others(dst);
        let d = |k: usize, l: usize| self.partials[k][l].eval_with(&pw);
        let mut matrix = [[C64::new(0.0, 0.0); 2]; 2];
        for (a, &k) in dst_vars.iter().enumerate() {
            for (b, &l) in src_vars.iter().enumerate() {
                matrix[a][b] = (d(k, l) * fd - f[k] * d(dst, l)) / (fd * fd);
            }
        }
        let image = ChartCoords {
            chart: dst,
            u: f[dst_vars[0]] / fd,
            v: f[dst_vars[1]] / fd,
        };
        Ok(ChartJacobian {
            source,
            image,
            matrix,
        })
    }

    /// Log of the Fubini–Study volume Jacobian (nats); `-inf` at critical points.
    pub fn log_jacobian_fs(&self, p: &ProjPoint) -> Result<f64> {
        Ok(self.chart_jacobian(p)?.log_jac_fs())
    }

    /// Same quantity computed in prescribed charts.
    pub fn log_jacobian_fs_in(&self, p: &ProjPoint, src: usize, dst: usize) -> Result<f64> {
        Ok(self.chart_jacobian_between(p, src, dst)?.log_jac_fs())
    }

    pub fn jacobian_sample(&self, p: &ProjPoint) -> Result<JacobianSample> {
        let j = self.chart_jacobian(p)?;
        Ok(JacobianSample {
            point: *p,
            chart_jacobian: j.matrix,
            log_jac_fs: j.log_jac_fs(),
        })
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &RationalMap) -> Result<RationalMap> {
        let comps = [
            self.components[0].compose(&inner.components)?,
            self.components[1].compose(&inner.components)?,
            self.components[2].compose(&inner.components)?,
        ];
        Ok(RationalMap::new(comps)?.with_threshold(self.eta))
    }

    /// Gauss–Newton descent on `|F|` from `p`, re-charting as it goes.
    fn descend(&self, p: &ProjPoint) -> ProjPoint {
        let mut p = *p;
        for _ in 0..120 {
            let chart = p.max_index();
            let ch = to_chart_in(&p, chart).expect("max-modulus chart");
            let mut z = [C64::new(1.0, 0.0); 3];
            let vars = others(chart);
            z[vars[0]] = ch.u;
            z[vars[1]] = ch.v;
            let pw = Powers::new(&z, self.degree);
            let g = [0, 1, 2].map(|k| self.components[k].eval_with(&pw));
            let jac = [0, 1, 2].map(|k| vars.map(|l| self.partials[k][l].eval_with(&pw)));
            // normal equations (J^H J + mu) d = -J^H g
            let mut a = [[C64::new(0.0, 0.0); 2]; 2];
            let mut rhs = [C64::new(0.0, 0.0); 2];
            for k in 0..3 {
                for r in 0..2 {
                    rhs[r] -= jac[k][r].conj() * g[k];
                    for c in 0..2 {
                        a[r][c] += jac[k][r].conj() * jac[k][c];
                    }
                }
            }
            let mu = 1e-14 * (a[0][0].re + a[1][1].re) + 1e-300;
            a[0][0] += mu;
            a[1][1] += mu;
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            if det.norm() == 0.0 {
                break;
            }
            let mut step = [
                (a[1][1] * rhs[0] - a[0][1] * rhs[1]) / det,
                (a[0][0] * rhs[1] - a[1][0] * rhs[0]) / det,
            ];
            let len = (step[0].norm_sqr() + step[1].norm_sqr()).sqrt();
            if !len.is_finite() {
                break;
            }
            if len > 0.5 {
                step = step.map(|s| s * (0.5 / len));
            }
            z[vars[0]] += step[0];
            z[vars[1]] += step[1];
            match normalize(z) {
                Ok(q) => p = q,
                Err(_) => break,
            }
            if len < 1e-15 {
                break;
            }
        }
        p
    }
}

/// Candidate indeterminacy points: Gauss–Newton minima of `|F|` on the unit
/// sphere, seeded from `resolution^2` deterministic Fubini–Study samples and
/// clustered at radius 1e-3.
///
/// Three coprime degree-`d` components have at most `d^2` common zeros, so
/// more clusters than that means the zero set is a curve: a common factor.
pub fn indeterminacy_scan(f: &RationalMap, resolution: usize) -> Result<Vec<ProjPoint>> {
    if resolution < 16 {
        return Err(Error::InvalidArgument(format!(
            "scan resolution {resolution} is below 16"
        )));
    }
    let mut rng = stream(0x5ca9, 0);
    let bound = (f.degree * f.degree) as usize;
    let mut reps: Vec<ProjPoint> = Vec::new();
    for _ in 0..resolution * resolution {
        let seed = sample_fs_uniform(&mut rng);
        let q = f.descend(&seed);
        if f.residual(&q) >= SCAN_THRESHOLD {
            continue;
        }
        if reps.iter().all(|r| fs_distance(r, &q) > 1e-3) {
            reps.push(q);
            if reps.len() > bound {
                return Err(Error::SuspectedCommonFactor {
                    clusters: reps.len(),
                    bound,
                });
            }
        }
    }
    Ok(reps)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct InvarianceReport {
    pub max_residual: f64,
    pub mean_residual: f64,
    pub points: usize,
}

/// Input points must satisfy `|P| < 1e-8` relative to the largest coefficient.
pub const ON_CURVE_TOL: f64 = 1e-8;

/// Residual `|P(F(z))| / |F(z)|^deg P` at each curve point, with `P`
/// normalized by its largest coefficient.
pub fn verify_curve_invariance(
    f: &RationalMap,
    curve: &HomPoly,
    points: &[ProjPoint],
) -> Result<InvarianceReport> {
    if points.is_empty() {
        return Err(Error::EmptySample);
    }
    let pscale = curve.max_coeff();
    let mut max_residual = 0.0f64;
    let mut sum = 0.0;
    for (index, p) in points.iter().enumerate() {
        let on = curve.eval(p.coords()).norm() / pscale;
        if on >= ON_CURVE_TOL {
            return Err(Error::PointOffCurve {
                index,
                residual: on,
            });
        }
        let img = f.eval_map(p)?;
        let r = curve.eval(img.coords()).norm() / pscale;
        max_residual = max_residual.max(r);
        sum += r;
    }
    Ok(InvarianceReport {
        max_residual,
        mean_residual: sum / points.len() as f64,
        points: points.len(),
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AvoidanceReport {
    pub min_residual: f64,
    pub pass: bool,
}

pub fn check_curve_avoids_indeterminacy(
    f: &RationalMap,
    points: &[ProjPoint],
) -> Result<AvoidanceReport> {
    if points.is_empty() {
        return Err(Error::EmptySample);
    }
    let min_residual = points
        .iter()
        .map(|p| f.residual(p))
        .fold(f64::INFINITY, f64::min);
    Ok(AvoidanceReport {
        min_residual,
        pass: min_residual > AVOIDANCE_THRESHOLD,
    })
}

/// Random points for property checks, kept away from coordinate hyperplanes.
pub fn generic_points<R: Rng>(rng: &mut R, n: usize) -> Vec<ProjPoint> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = sample_fs_uniform(rng);
        let z = p.coords();
        if z.iter().all(|c| c.norm() > 1e-3) {
            out.push(p);
        }
    }
    out
}
