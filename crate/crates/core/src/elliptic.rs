//! Lattices, Weierstrass invariants and the `℘` function, the embedding
//! `Ψ(t) = [℘(t) : ℘'(t) : 1]` of `C/Γ` onto the cubic
//! `y²z = 4x³ − g2·xz² − g3·z³`, and the affine lift `t ↦ a·t + b` of a map
//! preserving that cubic.
//!
//! `℘` and the invariants are evaluated by Lambert series in
//! `q² = exp(2πiτ)` after Gauss reduction of the basis, so `|q²| ≤ e^{-π√3}`
//! and a dozen terms reach double precision.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::poly::HomPoly;
use crate::projective::{fs_distance, normalize, to_chart, ProjPoint, C64};
use crate::ratmap::{verify_curve_invariance, RationalMap};
use crate::rng::{stream, Stream};

/// Distance from a lattice point below which `℘` reports a pole.
pub const POLE_RADIUS: f64 = 1e-8;

/// Invariance residual above which a map is rejected by [`fit_torus_map`].
pub const INVARIANCE_TOL: f64 = 1e-8;

/// Allowed `| |a|² − d |` for a fitted lift.
pub const DEGREE_TOL: f64 = 0.05;

/// FS distance at which a `Ψ` inversion is accepted.
const INVERSION_TOL: f64 = 1e-9;

const COARSE_GRID: usize = 32;
const FINE_GRID: usize = 128;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A lattice `Γ = Z·ω1 + Z·ω2` with `Im(ω2/ω1) > 0`.
#[derive(Clone, Debug, Serialize)]
pub struct Lattice {
    pub omega1: C64,
    pub omega2: C64,
    /// Gauss-reduced basis, used for all series evaluation.
    #[serde(skip)]
    reduced: (C64, C64),
    /// `q^{2n} / (1 − q^{2n})` for the reduced basis, `n = 1..`.
    #[serde(skip)]
    lambert: Vec<C64>,
}

impl Lattice {
    pub fn new(omega1: C64, omega2: C64) -> Result<Self> {
        if omega1.norm() == 0.0 || !omega1.is_finite() || !omega2.is_finite() {
            return Err(Error::DegenerateLattice(0.0));
        }
        let tau = omega2 / omega1;
        if tau.im.abs() < 1e-6 {
            return Err(Error::DegenerateLattice(tau.im));
        }
        if tau.im < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "periods are not positively oriented: Im(omega2/omega1) = {}",
                tau.im
            )));
        }
        let reduced = gauss_reduce(omega1, omega2);
        let tau_r = reduced.1 / reduced.0;
        let q2 = (c(0.0, 2.0 * PI) * tau_r).exp();
        // cos(2nu) grows at most like |q²|^{-n/2} on the centred cell
        let decay = q2.norm().sqrt();
        let mut lambert = Vec::new();
        for n in 1..=64 {
            let qn = q2.powu(n);
            lambert.push(qn / (1.0 - qn));
            if (n as f64).powi(3) * decay.powi(n as i32) < 1e-19 {
                break;
            }
        }
        Ok(Lattice {
            omega1,
            omega2,
            reduced,
            lambert,
        })
    }

    pub fn tau(&self) -> C64 {
        self.omega2 / self.omega1
    }

    pub fn reduced_basis(&self) -> (C64, C64) {
        self.reduced
    }

    /// Real coordinates `(s, r)` with `t = s·ω1 + r·ω2`.
    pub fn coords(&self, t: C64) -> (f64, f64) {
        basis_coords(self.omega1, self.omega2, t)
    }

    pub fn point(&self, s: f64, r: f64) -> C64 {
        self.omega1 * s + self.omega2 * r
    }

    /// Representative in the half-open parallelogram `s, r ∈ [0, 1)`.
    pub fn reduce_fundamental(&self, t: C64) -> C64 {
        let (s, r) = self.coords(t);
        self.point(frac(s), frac(r))
    }

    /// Representative of smallest modulus.
    pub fn reduce_nearest(&self, t: C64) -> C64 {
        let (w1, w2) = self.reduced;
        let (s, r) = basis_coords(w1, w2, t);
        let base = t - w1 * s.round() - w2 * r.round();
        let mut best = base;
        for i in -1..=1 {
            for j in -1..=1 {
                let cand = base + w1 * i as f64 + w2 * j as f64;
                if cand.norm() < best.norm() {
                    best = cand;
                }
            }
        }
        best
    }

    /// Longer diagonal of the period parallelogram.
    pub fn diameter(&self) -> f64 {
        (self.omega1 + self.omega2)
            .norm()
            .max((self.omega1 - self.omega2).norm())
    }

    /// `(℘(t), ℘'(t))`.
    pub fn wp(&self, t: C64) -> Result<(C64, C64)> {
        let (w1, w2) = self.reduced;
        let (s, r) = basis_coords(w1, w2, t);
        let t = w1 * (s - s.round()) + w2 * (r - r.round());
        let t = self.reduce_nearest(t);
        if t.norm() < POLE_RADIUS {
            return Err(Error::NearPole);
        }
        let k = c(PI, 0.0) / w1;
        let u = k * t;
        let (su, cu) = (u.sin(), u.cos());
        let mut p = 1.0 / (su * su) - 1.0 / 3.0;
        let mut dp = -2.0 * cu / (su * su * su);
        for (i, cn) in self.lambert.iter().enumerate() {
            let n = (i + 1) as f64;
            let snu = (u * n).sin();
            p += 16.0 * n * cn * snu * snu;
            dp += 16.0 * n * n * cn * (u * (2.0 * n)).sin();
        }
        Ok((k * k * p, k * k * k * dp))
    }

    /// `g2 = 60 Σ' ω⁻⁴`, `g3 = 140 Σ' ω⁻⁶` from Eisenstein series.
    pub fn invariants(&self) -> Result<WeierstrassData> {
        let (w1, w2) = self.reduced;
        let tau = w2 / w1;
        if tau.im < 1e-6 {
            return Err(Error::DegenerateLattice(tau.im));
        }
        let x = (c(0.0, 2.0 * PI) * tau).exp();
        let (mut s3, mut s5) = (c(0.0, 0.0), c(0.0, 0.0));
        let mut xn = c(1.0, 0.0);
        for n in 1..200 {
            xn *= x;
            let l = xn / (1.0 - xn);
            let nf = n as f64;
            let t3 = l * nf.powi(3);
            let t5 = l * nf.powi(5);
            s3 += t3;
            s5 += t5;
            if t5.norm() < 1e-19 {
                break;
            }
        }
        let e4 = 1.0 + 240.0 * s3;
        let e6 = 1.0 - 504.0 * s5;
        let k = c(PI, 0.0) / w1;
        let g2 = 4.0 / 3.0 * k.powu(4) * e4;
        let g3 = 8.0 / 27.0 * k.powu(6) * e6;
        WeierstrassData::new(g2, g3)
    }
}

pub(crate) fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

fn basis_coords(w1: C64, w2: C64, t: C64) -> (f64, f64) {
    let det = w1.re * w2.im - w2.re * w1.im;
    let s = (t.re * w2.im - w2.re * t.im) / det;
    let r = (w1.re * t.im - t.re * w1.im) / det;
    (s, r)
}

/// Lagrange–Gauss reduction: `|w1| ≤ |w2|`, `|Re(w2/w1)| ≤ 1/2`, `Im(w2/w1) > 0`.
fn gauss_reduce(mut w1: C64, mut w2: C64) -> (C64, C64) {
    for _ in 0..200 {
        if w2.norm() < w1.norm() {
            std::mem::swap(&mut w1, &mut w2);
        }
        let m = (w2 / w1).re.round();
        w2 -= w1 * m;
        if w2.norm() >= w1.norm() {
            break;
        }
    }
    if (w2 / w1).im < 0.0 {
        w2 = -w2;
    }
    (w1, w2)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct WeierstrassData {
    pub g2: C64,
    pub g3: C64,
    /// `g2³ − 27 g3²`
    pub discriminant: C64,
}

impl WeierstrassData {
    pub fn new(g2: C64, g3: C64) -> Result<Self> {
        let discriminant = g2.powu(3) - 27.0 * g3 * g3;
        let scale = g2.norm().powi(3).max(g3.norm_sqr());
        if discriminant.norm() <= 1e-12 * scale || discriminant.norm() == 0.0 {
            return Err(Error::SingularCurve(discriminant.norm()));
        }
        Ok(WeierstrassData {
            g2,
            g3,
            discriminant,
        })
    }

    /// `y²z − 4x³ + g2·x·z² + g3·z³`
    pub fn defining_poly(&self) -> HomPoly {
        HomPoly::from_terms(
            3,
            [
                ([0, 2, 1], c(1.0, 0.0)),
                ([3, 0, 0], c(-4.0, 0.0)),
                ([1, 0, 2], self.g2),
                ([0, 0, 3], self.g3),
            ],
        )
        .expect("cubic terms")
    }

    /// Roots of `4x³ − g2·x − g3`, i.e. the half-period values `e1, e2, e3`.
    pub fn half_period_values(&self) -> [C64; 3] {
        let roots = crate::poly::univariate_roots(&[-self.g3, -self.g2, c(0.0, 0.0), c(4.0, 0.0)]);
        [roots[0], roots[1], roots[2]]
    }
}

pub fn invariants_from_lattice(lattice: &Lattice) -> Result<WeierstrassData> {
    lattice.invariants()
}

/// A smooth Weierstrass cubic together with its uniformization.
#[derive(Clone, Debug)]
pub struct CurveEmbedding {
    pub lattice: Lattice,
    pub weierstrass: WeierstrassData,
    pub defining_poly: HomPoly,
    coarse: Vec<(C64, ProjPoint)>,
    fine: OnceLock<Vec<(C64, ProjPoint)>>,
}

/// A point drawn from the canonical measure: `t = s·ω1 + r·ω2`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CurveSample {
    pub s: f64,
    pub r: f64,
    pub t: C64,
    pub point: ProjPoint,
}

impl CurveEmbedding {
    pub fn new(lattice: Lattice) -> Result<Self> {
        let weierstrass = lattice.invariants()?;
        let defining_poly = weierstrass.defining_poly();
        let mut e = CurveEmbedding {
            lattice,
            weierstrass,
            defining_poly,
            coarse: Vec::new(),
            fine: OnceLock::new(),
        };
        e.coarse = e.grid(COARSE_GRID);
        Ok(e)
    }

    pub fn from_periods(omega1: C64, omega2: C64) -> Result<Self> {
        CurveEmbedding::new(Lattice::new(omega1, omega2)?)
    }

    pub fn wp(&self, t: C64) -> Result<(C64, C64)> {
        self.lattice.wp(t)
    }

    /// `Ψ(t) = [℘(t) : ℘'(t) : 1]`, and `[0 : 1 : 0]` at the lattice.
    pub fn psi(&self, t: C64) -> ProjPoint {
        match self.lattice.wp(t) {
            Ok((p, dp)) => normalize([p, dp, c(1.0, 0.0)]).expect("z coordinate is 1"),
            Err(_) => flex_at_infinity(),
        }
    }

    /// Exact sampler of the pushforward of normalized Lebesgue measure.
    pub fn sample_mu_c<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<CurveSample> {
        (0..n)
            .map(|_| {
                let s: f64 = rng.random();
                let r: f64 = rng.random();
                let t = self.lattice.point(s, r);
                CurveSample {
                    s,
                    r,
                    t,
                    point: self.psi(t),
                }
            })
            .collect()
    }

    /// `|P(z)|` relative to the largest coefficient, at the unit representative.
    pub fn curve_residual(&self, p: &ProjPoint) -> f64 {
        self.defining_poly.eval(p.coords()).norm() / self.defining_poly.max_coeff()
    }

    fn grid(&self, m: usize) -> Vec<(C64, ProjPoint)> {
        let mut out = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let t = self
                    .lattice
                    .point((i as f64 + 0.5) / m as f64, (j as f64 + 0.5) / m as f64);
                out.push((t, self.psi(t)));
            }
        }
        out
    }

    /// A preimage `t` of a curve point, in the fundamental parallelogram.
    ///
    /// Newton's method on one affine coordinate of `Ψ`, seeded from the
    /// nearest grid points; the grid is refined once if every seed fails.
    pub fn invert_psi(&self, q: &ProjPoint) -> Result<C64> {
        if fs_distance(q, &flex_at_infinity()) < 1e-13 {
            return Ok(c(0.0, 0.0));
        }
        if let Some(t) = self.invert_from(q, &self.coarse) {
            return Ok(t);
        }
        let fine = self.fine.get_or_init(|| self.grid(FINE_GRID));
        self.invert_from(q, fine).ok_or_else(|| {
            Error::InversionFailure(format!("no preimage found for {:?}", q.coords()))
        })
    }

    fn invert_from(&self, q: &ProjPoint, grid: &[(C64, ProjPoint)]) -> Option<C64> {
        let mut seeds: Vec<(f64, C64)> =
            grid.iter().map(|(t, p)| (fs_distance(p, q), *t)).collect();
        seeds.sort_by(|a, b| a.0.total_cmp(&b.0));
        seeds
            .iter()
            .take(4)
            .find_map(|&(_, t0)| self.newton(q, t0))
            .map(|t| self.lattice.reduce_fundamental(t))
    }

    fn newton(&self, q: &ProjPoint, t0: C64) -> Option<C64> {
        let target = to_chart(q);
        let g2 = self.weierstrass.g2;
        let max_step = self.lattice.diameter() / 10.0;
        let mut t = t0;
        for _ in 0..60 {
            let (p, dp) = match self.lattice.wp(t) {
                Ok(v) => v,
                Err(_) => return None,
            };
            let ddp = 6.0 * p * p - g2 / 2.0;
            // chart coordinates of Ψ(t) and their t-derivatives
            let (u, v, du, dv) = match target.chart {
                2 => (p, dp, dp, ddp),
                1 => (
                    p / dp,
                    1.0 / dp,
                    (dp * dp - p * ddp) / (dp * dp),
                    -ddp / (dp * dp),
                ),
                _ => (
                    dp / p,
                    1.0 / p,
                    (ddp * p - dp * dp) / (p * p),
                    -dp / (p * p),
                ),
            };
            let mut step = if du.norm() >= dv.norm() {
                (u - target.u) / du
            } else {
                (v - target.v) / dv
            };
            if !step.is_finite() {
                return None;
            }
            if step.norm() > max_step {
                step *= max_step / step.norm();
            }
            t -= step;
            if step.norm() < 1e-15 * self.lattice.diameter() {
                break;
            }
        }
        (fs_distance(&self.psi(t), q) < INVERSION_TOL).then_some(t)
    }
}

pub fn flex_at_infinity() -> ProjPoint {
    ProjPoint::real(0.0, 1.0, 0.0).expect("nonzero")
}

/// Fitted lift `t ↦ a·t + b` of a curve-preserving map.
#[derive(Clone, Debug, Serialize)]
pub struct TorusMapFit {
    /// Mean of the local slope estimates.
    pub a: C64,
    /// Translation, in the fundamental parallelogram.
    pub b: C64,
    pub rms_residual: f64,
    pub degree: u32,
    pub abs_a_sq: f64,
    /// Integer action of `a` on the basis: `a·ω_j = Σ_i m[i][j] ω_i`.
    pub lattice_action: [[i64; 2]; 2],
    /// Largest deviation of a single slope estimate from the mean.
    pub slope_spread: f64,
    pub anchors: usize,
}

impl TorusMapFit {
    /// The multiplier implied by the integer lattice action.
    pub fn exact_multiplier(&self, lattice: &Lattice) -> C64 {
        let m = self.lattice_action;
        lattice.point(m[0][0] as f64, m[1][0] as f64) / lattice.omega1
    }

    /// One step of the lift in lattice coordinates, reduced mod 1.
    pub fn step_coords(&self, lattice: &Lattice, (s, r): (f64, f64)) -> (f64, f64) {
        let m = self.lattice_action;
        let (bs, br) = lattice.coords(self.b);
        (
            frac(m[0][0] as f64 * s + m[0][1] as f64 * r + bs),
            frac(m[1][0] as f64 * s + m[1][1] as f64 * r + br),
        )
    }
}

/// Fit the lift of `f` restricted to the curve of `embedding`.
pub fn fit_torus_map(
    f: &RationalMap,
    embedding: &CurveEmbedding,
    n_anchors: usize,
) -> Result<TorusMapFit> {
    if n_anchors < 8 {
        return Err(Error::InvalidArgument(format!(
            "{n_anchors} anchors, need at least 8"
        )));
    }
    let mut rng = stream(0xf17, 0);
    let probe: Vec<ProjPoint> = embedding
        .sample_mu_c(&mut rng, n_anchors)
        .into_iter()
        .map(|s| s.point)
        .collect();
    let report = verify_curve_invariance(f, &embedding.defining_poly, &probe)?;
    if report.max_residual > INVARIANCE_TOL {
        return Err(Error::NotInvariant {
            max_residual: report.max_residual,
        });
    }
    fit_torus_lift(embedding, f.degree(), n_anchors, |t| {
        f.eval_map(&embedding.psi(t))
    })
}

/// Fit `t ↦ a·t + b` to an arbitrary image function `t ↦ g(Ψ(t))`.
pub fn fit_torus_lift<G>(
    embedding: &CurveEmbedding,
    degree: u32,
    n_anchors: usize,
    image: G,
) -> Result<TorusMapFit>
where
    G: Fn(C64) -> Result<ProjPoint>,
{
    if n_anchors < 8 {
        return Err(Error::InvalidArgument(format!(
            "{n_anchors} anchors, need at least 8"
        )));
    }
    let lattice = &embedding.lattice;
    let eps = 1e-6 * lattice.diameter();
    let mut rng = stream(0xf17, 1);
    let mut anchors = Vec::with_capacity(n_anchors);
    let mut slopes = Vec::with_capacity(n_anchors);
    for _ in 0..n_anchors {
        let t = lattice.point(rng.random(), rng.random());
        let img = embedding.invert_psi(&image(t)?)?;
        let img_eps = embedding.invert_psi(&image(t + eps)?)?;
        slopes.push(lattice.reduce_nearest(img_eps - img) / eps);
        anchors.push((t, img));
    }
    let a = slopes.iter().sum::<C64>() / n_anchors as f64;
    let slope_spread = slopes.iter().map(|s| (s - a).norm()).fold(0.0, f64::max);
    if slope_spread > 1e-3 * a.norm().max(1.0) {
        return Err(Error::InversionFailure(format!(
            "local slopes disagree by {slope_spread:e}; the lift is not affine"
        )));
    }
    // a·Γ ⊂ Γ: read off the integer matrix
    let (m00, m10) = lattice.coords(a * lattice.omega1);
    let (m01, m11) = lattice.coords(a * lattice.omega2);
    let raw = [[m00, m01], [m10, m11]];
    let rounding = raw
        .iter()
        .flatten()
        .map(|x| (x - x.round()).abs())
        .fold(0.0, f64::max);
    if rounding > 1e-3 {
        return Err(Error::InversionFailure(format!(
            "multiplier {a} does not preserve the lattice (off by {rounding:e})"
        )));
    }
    let lattice_action = raw.map(|row| row.map(|x| x.round() as i64));
    let abs_a_sq = a.norm_sqr();
    if (abs_a_sq - degree as f64).abs() > DEGREE_TOL {
        return Err(Error::DegreeMismatch { abs_a_sq, degree });
    }
    let mut fit = TorusMapFit {
        a,
        b: c(0.0, 0.0),
        rms_residual: f64::NAN,
        degree,
        abs_a_sq,
        lattice_action,
        slope_spread,
        anchors: n_anchors,
    };
    let a_exact = fit.exact_multiplier(lattice);
    let b0 = anchors[0].1 - a_exact * anchors[0].0;
    let shift = anchors
        .iter()
        .map(|(t, img)| lattice.reduce_nearest(img - a_exact * t - b0))
        .sum::<C64>()
        / n_anchors as f64;
    fit.b = lattice.reduce_fundamental(b0 + shift);
    let mut sq = 0.0;
    for _ in 0..n_anchors {
        let t = lattice.point(rng.random(), rng.random());
        let predicted = embedding.psi(a_exact * t + fit.b);
        sq += fs_distance(&predicted, &image(t)?).powi(2);
    }
    fit.rms_residual = (sq / n_anchors as f64).sqrt();
    Ok(fit)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PairRecord {
    pub t: C64,
    pub dt: C64,
    pub max_distance: f64,
    pub step_of_max: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeparationReport {
    /// Smallest over all pairs of the largest separation reached.
    pub beta_hat: f64,
    pub worst_pair: PairRecord,
    pub pairs: usize,
    pub horizon: usize,
}

/// Largest FS separation of `Ψ(t_n)` and `Ψ(t'_n)` for `n ≤ horizon`, with
/// both orbits iterated exactly on the torus.
pub fn probe_pair(
    fit: &TorusMapFit,
    embedding: &CurveEmbedding,
    t: C64,
    dt: C64,
    horizon: usize,
) -> Result<PairRecord> {
    if dt.norm() < 1e-12 {
        return Err(Error::DegeneratePair(dt.norm()));
    }
    let lattice = &embedding.lattice;
    let mut x = lattice.coords(lattice.reduce_fundamental(t));
    let mut y = lattice.coords(lattice.reduce_fundamental(t + dt));
    let mut best = PairRecord {
        t,
        dt,
        max_distance: 0.0,
        step_of_max: 0,
    };
    for n in 0..=horizon {
        let d = fs_distance(
            &embedding.psi(lattice.point(x.0, x.1)),
            &embedding.psi(lattice.point(y.0, y.1)),
        );
        if d > best.max_distance {
            best.max_distance = d;
            best.step_of_max = n;
        }
        x = fit.step_coords(lattice, x);
        y = fit.step_coords(lattice, y);
    }
    Ok(best)
}

/// Numerical separation constant for nearby curve points: pairs with
/// `|δt| ≤ diam/100` must move at least `beta_hat` apart within `horizon` steps.
pub fn separation_probe(
    fit: &TorusMapFit,
    embedding: &CurveEmbedding,
    n_pairs: usize,
    horizon: usize,
    rng: &mut Stream,
) -> Result<SeparationReport> {
    if n_pairs == 0 {
        return Err(Error::EmptySample);
    }
    if fit.a.norm() <= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "|a| = {} is not expanding",
            fit.a.norm()
        )));
    }
    let lattice = &embedding.lattice;
    let radius = lattice.diameter() / 100.0;
    let mut worst: Option<PairRecord> = None;
    for _ in 0..n_pairs {
        let t = lattice.point(rng.random(), rng.random());
        let dt = C64::from_polar(
            radius * rng.random::<f64>().sqrt().max(1e-9),
            2.0 * PI * rng.random::<f64>(),
        );
        let rec = probe_pair(fit, embedding, t, dt, horizon)?;
        if worst.is_none_or(|w| rec.max_distance < w.max_distance) {
            worst = Some(rec);
        }
    }
    let worst_pair = worst.expect("n_pairs > 0");
    Ok(SeparationReport {
        beta_hat: worst_pair.max_distance,
        worst_pair,
        pairs: n_pairs,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::duplication_map;

    fn square() -> Lattice {
        Lattice::new(c(1.0, 0.0), c(0.0, 1.0)).unwrap()
    }

    fn hexagonal() -> Lattice {
        Lattice::new(c(1.0, 0.0), C64::from_polar(1.0, PI / 3.0)).unwrap()
    }

    fn generic() -> CurveEmbedding {
        CurveEmbedding::from_periods(c(2.0, 0.0), c(0.4, 1.96)).unwrap()
    }

    /// Truncated Eisenstein sums over |m|, |n| ≤ N with the tail replaced by
    /// the integral estimate (zero for the rotation-symmetric leading term).
    fn brute_force_g2(l: &Lattice, n: i64) -> C64 {
        let mut s = c(0.0, 0.0);
        for i in -n..=n {
            for j in -n..=n {
                if i != 0 || j != 0 {
                    s += 1.0 / l.point(i as f64, j as f64).powu(4);
                }
            }
        }
        60.0 * s
    }

    #[test]
    fn lattice_validation() {
        assert!(matches!(
            Lattice::new(c(1.0, 0.0), c(2.0, 0.0)),
            Err(Error::DegenerateLattice(_))
        ));
        assert!(matches!(
            Lattice::new(c(1.0, 0.0), c(0.0, -1.0)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(Lattice::new(c(1.0, 0.0), c(0.0, 1e-7)).is_err());
    }

    #[test]
    fn symmetric_lattice_invariants() {
        let sq = square().invariants().unwrap();
        assert!(sq.g3.norm() < 1e-10, "{}", sq.g3);
        assert!(sq.g2.im.abs() < 1e-10);
        let hex = hexagonal().invariants().unwrap();
        assert!(hex.g2.norm() < 1e-10, "{}", hex.g2);
    }

    #[test]
    fn square_g2_matches_truncated_sum() {
        let l = square();
        let g2 = l.invariants().unwrap().g2;
        // the square truncation leaves a tail of order N^-2 (≈ 3e-6 relative at N = 200)
        let brute = brute_force_g2(&l, 200);
        assert!((g2 - brute).norm() / g2.norm() < 1e-5, "{g2} vs {brute}");
        // known closed form: g2(i) = Γ(1/4)^8 / (16 π^2)
        let gamma_quarter: f64 = 3.625_609_908_221_908;
        let closed = gamma_quarter.powi(8) / (16.0 * PI * PI);
        assert!(
            (g2.re - closed).abs() / closed < 1e-12,
            "{} vs {closed}",
            g2.re
        );
    }

    #[test]
    fn generic_invariants_match_truncated_sum() {
        let e = generic();
        let brute = brute_force_g2(&e.lattice, 200);
        let g2 = e.weierstrass.g2;
        assert!((g2 - brute).norm() / g2.norm() < 1e-4);
    }

    #[test]
    fn invariants_do_not_depend_on_basis() {
        let a = Lattice::new(c(2.0, 0.0), c(0.4, 1.96))
            .unwrap()
            .invariants()
            .unwrap();
        // same lattice, different basis: (ω1, ω2) -> (ω1 + 3ω2, -ω1 - 2ω2)
        let w1 = c(2.0, 0.0) + 3.0 * c(0.4, 1.96);
        let w2 = -c(2.0, 0.0) - 2.0 * c(0.4, 1.96);
        let (w1, w2) = if (w2 / w1).im > 0.0 {
            (w1, w2)
        } else {
            (w2, w1)
        };
        let b = Lattice::new(w1, w2).unwrap().invariants().unwrap();
        assert!((a.g2 - b.g2).norm() < 1e-10 * a.g2.norm());
        assert!((a.g3 - b.g3).norm() < 1e-10 * a.g3.norm());
    }

    #[test]
    fn wp_parity_periodicity_and_ode() {
        let e = generic();
        let l = &e.lattice;
        let (g2, g3) = (e.weierstrass.g2, e.weierstrass.g3);
        let mut rng = stream(1, 0);
        for _ in 0..500 {
            let t = l.point(rng.random(), rng.random());
            let (p, dp) = l.wp(t).unwrap();
            let scale = p.norm().max(1.0);
            assert!((l.wp(-t).unwrap().0 - p).norm() < 1e-9 * scale);
            assert!((l.wp(-t).unwrap().1 + dp).norm() < 1e-9 * dp.norm().max(1.0));
            assert!((l.wp(t + l.omega1).unwrap().0 - p).norm() < 1e-9 * scale);
            assert!((l.wp(t + l.omega2).unwrap().0 - p).norm() < 1e-9 * scale);
            let ode = dp * dp - (4.0 * p * p * p - g2 * p - g3);
            assert!(ode.norm() < 1e-9 * p.norm().powi(3).max(1.0));
        }
        assert!(matches!(l.wp(c(0.0, 0.0)), Err(Error::NearPole)));
        assert!(matches!(
            l.wp(l.omega1 + c(1e-9, 0.0)),
            Err(Error::NearPole)
        ));
    }

    #[test]
    fn wp_derivative_matches_finite_difference() {
        let e = generic();
        let t = c(0.7, 0.4);
        let h = 1e-5;
        let fd = (e.wp(t + h).unwrap().0 - e.wp(t - h).unwrap().0) / (2.0 * h);
        let dp = e.wp(t).unwrap().1;
        assert!((fd - dp).norm() < 1e-7 * dp.norm());
    }

    #[test]
    fn half_periods_hit_cubic_roots() {
        for e in [generic(), CurveEmbedding::new(square()).unwrap()] {
            let roots = e.weierstrass.half_period_values();
            for h in [
                e.lattice.omega1 / 2.0,
                e.lattice.omega2 / 2.0,
                (e.lattice.omega1 + e.lattice.omega2) / 2.0,
            ] {
                let (p, dp) = e.wp(h).unwrap();
                assert!(dp.norm() < 1e-9 * p.norm().max(1.0).powf(1.5));
                let nearest = roots
                    .iter()
                    .map(|r| (r - p).norm())
                    .fold(f64::INFINITY, f64::min);
                assert!(nearest < 1e-9 * p.norm().max(1.0));
            }
        }
    }

    #[test]
    fn psi_examples() {
        let e = generic();
        assert_eq!(e.psi(c(0.0, 0.0)), flex_at_infinity());
        assert!(fs_distance(&e.psi(e.lattice.omega2), &flex_at_infinity()) < 1e-12);
        let half = e.psi(e.lattice.omega1 / 2.0);
        let (p, _) = e.wp(e.lattice.omega1 / 2.0).unwrap();
        let want = normalize([p, c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(fs_distance(&half, &want) < 1e-9);
        let mut rng = stream(2, 0);
        for s in e.sample_mu_c(&mut rng, 1000) {
            assert!(e.curve_residual(&s.point) < 1e-9);
        }
        // near the pole the image approaches the flex continuously
        assert!(fs_distance(&e.psi(c(1e-6, 1e-6)), &flex_at_infinity()) < 1e-5);
    }

    #[test]
    fn mu_c_sampler_is_uniform_and_deterministic() {
        let e = generic();
        let a = e.sample_mu_c(&mut stream(3, 0), 20_000);
        let b = e.sample_mu_c(&mut stream(3, 0), 20_000);
        assert!(a
            .iter()
            .zip(&b)
            .all(|(x, y)| x.t == y.t && x.point == y.point));
        let n = a.len() as f64;
        let ms = a.iter().map(|x| x.s).sum::<f64>() / n;
        let mr = a.iter().map(|x| x.r).sum::<f64>() / n;
        let sigma = (1.0 / 12.0 / n).sqrt();
        assert!((ms - 0.5).abs() < 3.0 * sigma);
        assert!((mr - 0.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn inversion_recovers_parameters() {
        let e = generic();
        let mut rng = stream(4, 0);
        for s in e.sample_mu_c(&mut rng, 300) {
            let t = e.invert_psi(&s.point).unwrap();
            let diff = e.lattice.reduce_nearest(t - s.t);
            assert!(diff.norm() < 1e-9, "{} vs {}", t, s.t);
        }
        // half-periods, where ℘' vanishes
        let h = e.lattice.omega1 / 2.0;
        let t = e.invert_psi(&e.psi(h)).unwrap();
        assert!(e.lattice.reduce_nearest(t - h).norm() < 1e-6);
        assert_eq!(e.invert_psi(&flex_at_infinity()).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn synthetic_doubling_fit() {
        let e = generic();
        let fit = fit_torus_lift(&e, 4, 16, |t| Ok(e.psi(2.0 * t))).unwrap();
        assert!((fit.a - c(2.0, 0.0)).norm() < 1e-7, "{}", fit.a);
        assert!(e.lattice.reduce_nearest(fit.b).norm() < 1e-9, "{}", fit.b);
        assert!(fit.rms_residual < 1e-9);
        assert_eq!(fit.lattice_action, [[2, 0], [0, 2]]);
    }

    #[test]
    fn synthetic_fit_with_translation() {
        let e = generic();
        let b = e.lattice.omega1 * 0.3 + e.lattice.omega2 * 0.1;
        let fit = fit_torus_lift(&e, 4, 16, |t| Ok(e.psi(-2.0 * t + b))).unwrap();
        assert!((fit.a + 2.0).norm() < 1e-7);
        assert!(e.lattice.reduce_nearest(fit.b - b).norm() < 1e-9);
        // wrong degree is flagged
        assert!(matches!(
            fit_torus_lift(&e, 2, 16, |t| Ok(e.psi(2.0 * t))),
            Err(Error::DegreeMismatch { .. })
        ));
    }

    #[test]
    fn duplication_fit() {
        let e = generic();
        let f = duplication_map(&e.weierstrass);
        let fit = fit_torus_map(&f, &e, 16).unwrap();
        assert!((fit.a - c(2.0, 0.0)).norm() < 1e-6, "{}", fit.a);
        assert!((fit.abs_a_sq - 4.0).abs() < DEGREE_TOL);
        assert!(fit.rms_residual < 1e-9);
    }

    #[test]
    fn fit_rejects_non_invariant_map() {
        let e = generic();
        let f = RationalMap::parse(["x^2", "y^2", "z^2"]).unwrap();
        assert!(matches!(
            fit_torus_map(&f, &e, 8),
            Err(Error::NotInvariant { .. })
        ));
        assert!(fit_torus_map(&f, &e, 4).is_err());
    }

    #[test]
    fn addition_law_for_doubling() {
        let e = generic();
        let (g2, g3) = (e.weierstrass.g2, e.weierstrass.g3);
        let mut rng = stream(5, 0);
        for s in e.sample_mu_c(&mut rng, 200) {
            let (p, dp) = e.wp(s.t).unwrap();
            let Ok((p2, _)) = e.wp(2.0 * s.t) else {
                continue;
            };
            let lambda = (12.0 * p * p - g2) / (2.0 * dp);
            let x2 = lambda * lambda / 4.0 - 2.0 * p;
            let q = (p.powu(4) + g2 / 2.0 * p * p + 2.0 * g3 * p + g2 * g2 / 16.0) / (dp * dp);
            assert!((x2 - p2).norm() < 1e-8 * p2.norm().max(1.0));
            assert!((q - p2).norm() < 1e-8 * p2.norm().max(1.0));
        }
    }

    #[test]
    fn torus_step_doubles_offsets() {
        let e = generic();
        let f = duplication_map(&e.weierstrass);
        let fit = fit_torus_map(&f, &e, 8).unwrap();
        let l = &e.lattice;
        let (mut x, mut y) = ((0.1, 0.2), (0.1 + 1e-6, 0.2));
        for n in 0..10 {
            let sep = l.reduce_nearest(l.point(y.0 - x.0, y.1 - x.1)).norm();
            let want = 2f64.powi(n) * l.omega1.norm() * 1e-6;
            assert!((sep - want).abs() < 1e-9, "{n}: {sep} vs {want}");
            x = fit.step_coords(l, x);
            y = fit.step_coords(l, y);
        }
    }

    #[test]
    fn separation_probe_is_positive() {
        let e = generic();
        let f = duplication_map(&e.weierstrass);
        let fit = fit_torus_map(&f, &e, 8).unwrap();
        let rep = separation_probe(&fit, &e, 200, 40, &mut stream(6, 0)).unwrap();
        assert!(rep.beta_hat > 0.0);
        assert!(matches!(
            probe_pair(&fit, &e, c(0.3, 0.3), c(0.0, 0.0), 10),
            Err(Error::DegeneratePair(_))
        ));
    }
}
