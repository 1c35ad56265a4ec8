//! Monte Carlo measurement of basins of attraction, and basin images.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::poly::HomPoly;
use crate::projective::{fs_distance, normalize, others, sample_fs_uniform, ProjPoint, C64};
use crate::ratmap::RationalMap;
use crate::rng::{chunks, stream};
use crate::stats::{wilson_interval, Z_99};

/// Proximity below which a starting point counts as already on the target.
pub const ON_TARGET: f64 = 1e-9;

/// Gradient norm, relative to the largest coefficient, below which
/// [`curve_proximity`] falls back to the raw residual.
const FLAT_GRADIENT: f64 = 1e-8;

pub const MAX_RESOLUTION: usize = 4096;

/// First-order distance from `p` to `{P = 0}`: `|P(z)| / ‖∇P(z)‖` on the unit
/// representative.
pub fn curve_proximity(p: &ProjPoint, curve: &HomPoly) -> f64 {
    proximity_with(curve, &curve.gradient(), p)
}

fn proximity_with(poly: &HomPoly, gradient: &[HomPoly; 3], p: &ProjPoint) -> f64 {
    let z = p.coords();
    let value = poly.eval(z).norm();
    let grad = gradient
        .iter()
        .map(|g| g.eval(z).norm_sqr())
        .sum::<f64>()
        .sqrt();
    if grad < FLAT_GRADIENT * poly.max_coeff() {
        value / poly.max_coeff()
    } else {
        value / grad
    }
}

/// What orbits are tested against.
#[derive(Clone, Debug)]
pub enum Target {
    Curve {
        poly: HomPoly,
        gradient: [HomPoly; 3],
    },
    /// A finite set, with FS distance to the nearest member as proximity.
    Points(Vec<ProjPoint>),
}

impl Target {
    pub fn curve(poly: HomPoly) -> Self {
        let gradient = poly.gradient();
        Target::Curve { poly, gradient }
    }

    pub fn points(points: Vec<ProjPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        Ok(Target::Points(points))
    }

    pub fn proximity(&self, p: &ProjPoint) -> f64 {
        match self {
            Target::Curve { poly, gradient } => proximity_with(poly, gradient, p),
            Target::Points(pts) => pts
                .iter()
                .map(|q| fs_distance(p, q))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// Finite-time surrogate for `d(fⁿ(x), C) → 0`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CaptureParams {
    pub horizon: usize,
    pub eps: f64,
    pub consecutive: usize,
}

impl Default for CaptureParams {
    fn default() -> Self {
        CaptureParams {
            horizon: 200,
            eps: 1e-4,
            consecutive: 5,
        }
    }
}

impl CaptureParams {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 10 {
            return Err(Error::InvalidArgument(format!(
                "horizon {} < 10",
                self.horizon
            )));
        }
        if self.consecutive < 3 {
            return Err(Error::InvalidArgument(format!(
                "consecutive requirement {} < 3",
                self.consecutive
            )));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "capture threshold {}",
                self.eps
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OrbitTag {
    AttractedToCurve,
    Undecided,
    NearIndeterminacyHit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OrbitClass {
    pub tag: OrbitTag,
    /// First step of the capturing run.
    pub steps_to_capture: Option<usize>,
}

/// Captured iff the proximity stays below `eps` for `consecutive` iterates
/// within `horizon` steps. Orbits starting on the target use `10·eps`, so
/// that rounding drift along the invariant set is not mistaken for escape.
pub fn classify_orbit(
    f: &RationalMap,
    p: &ProjPoint,
    target: &Target,
    params: &CaptureParams,
) -> OrbitClass {
    let mut x = *p;
    let threshold = if target.proximity(p) < ON_TARGET {
        10.0 * params.eps
    } else {
        params.eps
    };
    let mut run = 0;
    for n in 0..=params.horizon {
        if target.proximity(&x) < threshold {
            run += 1;
            if run == params.consecutive {
                return OrbitClass {
                    tag: OrbitTag::AttractedToCurve,
                    steps_to_capture: Some(n + 1 - run),
                };
            }
        } else {
            run = 0;
        }
        if n == params.horizon {
            break;
        }
        x = match f.eval_map(&x) {
            Ok(y) => y,
            Err(_) => {
                return OrbitClass {
                    tag: OrbitTag::NearIndeterminacyHit,
                    steps_to_capture: None,
                }
            }
        };
    }
    OrbitClass {
        tag: OrbitTag::Undecided,
        steps_to_capture: None,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BasinEstimate {
    pub fraction: f64,
    /// Wilson 99% interval.
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: usize,
    pub captured: usize,
    pub undecided: usize,
    pub indeterminacy_hits: usize,
    pub horizon: usize,
    pub eps: f64,
    pub consecutive: usize,
    pub note: &'static str,
}

const LOWER_BOUND_NOTE: &str =
    "undecided orbits are not counted as escaping; the fraction is a lower bound for the basin measure";

/// Fraction of FS-uniform points captured by `target`.
pub fn basin_measure(
    f: &RationalMap,
    target: &Target,
    n: usize,
    params: &CaptureParams,
    seed: u64,
) -> Result<BasinEstimate> {
    if n < 1000 {
        return Err(Error::InvalidArgument(format!(
            "{n} samples, need at least 1000"
        )));
    }
    params.validate()?;
    let counts: Vec<[usize; 3]> = chunks(n)
        .into_par_iter()
        .map(|(idx, _, len)| {
            let mut rng = stream(seed, idx);
            let mut c = [0usize; 3];
            for _ in 0..len {
                let p = sample_fs_uniform(&mut rng);
                match classify_orbit(f, &p, target, params).tag {
                    OrbitTag::AttractedToCurve => c[0] += 1,
                    OrbitTag::Undecided => c[1] += 1,
                    OrbitTag::NearIndeterminacyHit => c[2] += 1,
                }
            }
            c
        })
        .collect();
    let total = counts
        .iter()
        .fold([0; 3], |a, c| [a[0] + c[0], a[1] + c[1], a[2] + c[2]]);
    let (ci_low, ci_high) = wilson_interval(total[0] as u64, n as u64, Z_99);
    Ok(BasinEstimate {
        fraction: total[0] as f64 / n as f64,
        ci_low,
        ci_high,
        samples: n,
        captured: total[0],
        undecided: total[1],
        indeterminacy_hits: total[2],
        horizon: params.horizon,
        eps: params.eps,
        consecutive: params.consecutive,
        note: LOWER_BOUND_NOTE,
    })
}

/// A complex line in a chart: the chart coordinate `chart` is 1, the first
/// remaining coordinate ranges over the window and the second is `fixed`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Slice {
    pub chart: usize,
    pub fixed: C64,
    pub re: (f64, f64),
    pub im: (f64, f64),
    pub width: usize,
    pub height: usize,
}

impl Slice {
    pub fn validate(&self) -> Result<()> {
        if self.chart > 2 {
            return Err(Error::InvalidArgument(format!(
                "chart {} out of range",
                self.chart
            )));
        }
        if self.width == 0
            || self.height == 0
            || self.width > MAX_RESOLUTION
            || self.height > MAX_RESOLUTION
        {
            return Err(Error::InvalidArgument(format!(
                "resolution {}x{} outside 1..={MAX_RESOLUTION}",
                self.width, self.height
            )));
        }
        if !(self.re.0 < self.re.1 && self.im.0 < self.im.1) {
            return Err(Error::InvalidArgument("empty window".into()));
        }
        Ok(())
    }

    /// Pixel centre; row 0 is the top of the window.
    pub fn point(&self, col: usize, row: usize) -> ProjPoint {
        let re = self.re.0 + (col as f64 + 0.5) / self.width as f64 * (self.re.1 - self.re.0);
        let im = self.im.1 - (row as f64 + 0.5) / self.height as f64 * (self.im.1 - self.im.0);
        let [a, b] = others(self.chart);
        let mut z = [C64::new(1.0, 0.0); 3];
        z[a] = C64::new(re, im);
        z[b] = self.fixed;
        normalize(z).expect("chart coordinate is 1")
    }
}

/// `chart,fixed_re,fixed_im,re_min,re_max,im_min,im_max,width[,height]`
impl FromStr for Slice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidArgument(format!("slice '{s}': {msg}"));
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 8 && parts.len() != 9 {
            return Err(bad(
                "expected chart,fixed_re,fixed_im,re_min,re_max,im_min,im_max,width[,height]",
            ));
        }
        let num = |i: usize| {
            parts[i]
                .parse::<f64>()
                .map_err(|_| bad(&format!("field {} is not a number", i + 1)))
        };
        let int = |i: usize| {
            parts[i]
                .parse::<usize>()
                .map_err(|_| bad(&format!("field {} is not an integer", i + 1)))
        };
        let width = int(7)?;
        let slice = Slice {
            chart: int(0)?,
            fixed: C64::new(num(1)?, num(2)?),
            re: (num(3)?, num(4)?),
            im: (num(5)?, num(6)?),
            width,
            height: if parts.len() == 9 { int(8)? } else { width },
        };
        slice.validate()?;
        Ok(slice)
    }
}

#[derive(Clone, Debug)]
pub struct BasinImage {
    pub width: usize,
    pub height: usize,
    /// Row-major.
    pub classes: Vec<OrbitClass>,
}

impl BasinImage {
    fn color(&self, c: &OrbitClass, horizon: usize) -> [u8; 3] {
        match (c.tag, c.steps_to_capture) {
            (OrbitTag::AttractedToCurve, Some(k)) => {
                let shade = 255 - (200 * k.min(horizon) / horizon.max(1)) as u8;
                [0, shade, shade / 3]
            }
            (OrbitTag::AttractedToCurve, None) => [0, 255, 85],
            (OrbitTag::Undecided, _) => [16, 16, 24],
            (OrbitTag::NearIndeterminacyHit, _) => [220, 30, 30],
        }
    }

    /// Binary P6 encoding.
    pub fn to_ppm(&self, horizon: usize) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(3 * self.classes.len());
        for c in &self.classes {
            out.extend_from_slice(&self.color(c, horizon));
        }
        out
    }

    pub fn write_ppm(&self, path: &Path, horizon: usize) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&self.to_ppm(horizon))?;
        w.flush()?;
        Ok(())
    }

    pub fn count(&self, tag: OrbitTag) -> usize {
        self.classes.iter().filter(|c| c.tag == tag).count()
    }
}

pub fn render_basin_slice(
    f: &RationalMap,
    target: &Target,
    slice: &Slice,
    params: &CaptureParams,
) -> Result<BasinImage> {
    slice.validate()?;
    params.validate()?;
    let classes = (0..slice.width * slice.height)
        .into_par_iter()
        .map(|i| {
            classify_orbit(
                f,
                &slice.point(i % slice.width, i / slice.width),
                target,
                params,
            )
        })
        .collect();
    Ok(BasinImage {
        width: slice.width,
        height: slice.height,
        classes,
    })
}
