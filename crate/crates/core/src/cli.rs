//! Command-line front end: system files, subcommands and JSON reports.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::basin::{basin_measure, render_basin_slice, CaptureParams, OrbitTag, Slice, Target};
use crate::elliptic::{fit_torus_map, separation_probe, CurveEmbedding, Lattice};
use crate::error::{Error, Result};
use crate::lyapunov::{birkhoff_log_jac, cocycle_exponents, orbit_on_curve, transverse_exponent};
use crate::poly::HomPoly;
use crate::projective::{ProjPoint, C64};
use crate::ratmap::{
    check_curve_avoids_indeterminacy, verify_curve_invariance, RationalMap, ON_CURVE_TOL,
};
use crate::rng::stream;
use crate::systems::duplication_map;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFICATION: i32 = 2;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveSpec {
    WeierstrassLattice { omega1: [f64; 2], omega2: [f64; 2] },
    Polynomial { text: String },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct Defaults {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consecutive: Option<usize>,
}

/// On-disk description of a map and its invariant curve.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SystemSpec {
    pub degree: u32,
    pub map: [String; 3],
    pub curve: CurveSpec,
    #[serde(default, skip_serializing_if = "is_default")]
    pub defaults: Defaults,
}

fn is_default(d: &Defaults) -> bool {
    *d == Defaults::default()
}

impl SystemSpec {
    /// The duplication map of the lattice spanned by `omega1`, `omega2`.
    pub fn duplication(omega1: C64, omega2: C64) -> Result<Self> {
        let e = CurveEmbedding::from_periods(omega1, omega2)?;
        let f = duplication_map(&e.weierstrass);
        Ok(SystemSpec {
            degree: 4,
            map: f.components().clone().map(|c| c.to_string()),
            curve: CurveSpec::WeierstrassLattice {
                omega1: [omega1.re, omega1.im],
                omega2: [omega2.re, omega2.im],
            },
            defaults: Defaults::default(),
        })
    }
}

#[derive(Clone, Debug)]
pub enum Curve {
    Lattice(Box<CurveEmbedding>),
    Polynomial(HomPoly),
}

impl Curve {
    pub fn poly(&self) -> &HomPoly {
        match self {
            Curve::Lattice(e) => &e.defining_poly,
            Curve::Polynomial(p) => p,
        }
    }

    pub fn embedding(&self) -> Option<&CurveEmbedding> {
        match self {
            Curve::Lattice(e) => Some(e),
            Curve::Polynomial(_) => None,
        }
    }

    /// Points on the curve: exact `μ_C` samples for lattices, random line
    /// sections otherwise.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<ProjPoint> {
        let mut rng = stream(seed, u64::MAX);
        match self {
            Curve::Lattice(e) => e
                .sample_mu_c(&mut rng, n)
                .into_iter()
                .map(|s| s.point)
                .collect(),
            Curve::Polynomial(p) => p.sample_zeros(&mut rng, n),
        }
    }
}

/// A validated system.
#[derive(Clone, Debug)]
pub struct System {
    pub spec: SystemSpec,
    pub map: RationalMap,
    pub curve: Curve,
}

fn schema(pointer: &str, msg: impl Into<String>) -> Error {
    Error::Schema {
        pointer: pointer.to_string(),
        msg: msg.into(),
    }
}

fn complex_at(v: &Value, pointer: &str) -> Result<C64> {
    let arr = v
        .pointer(pointer)
        .and_then(Value::as_array)
        .filter(|a| a.len() == 2)
        .ok_or_else(|| schema(pointer, "expected [re, im]"))?;
    let num = |i: usize| {
        arr[i]
            .as_f64()
            .ok_or_else(|| schema(&format!("{pointer}/{i}"), "expected a number"))
    };
    Ok(C64::new(num(0)?, num(1)?))
}

/// Validate a JSON document field by field, so that errors carry a pointer.
pub fn parse_spec(text: &str) -> Result<System> {
    let v: Value = serde_json::from_str(text).map_err(|e| {
        schema(
            "",
            format!(
                "invalid JSON at line {}, column {}: {e}",
                e.line(),
                e.column()
            ),
        )
    })?;
    if !v.is_object() {
        return Err(schema("", "expected an object"));
    }
    let degree = v
        .pointer("/degree")
        .and_then(Value::as_u64)
        .ok_or_else(|| schema("/degree", "expected a nonnegative integer"))?;
    if degree < 2 {
        return Err(schema("/degree", format!("degree {degree} is below 2")));
    }
    let degree = u32::try_from(degree).map_err(|_| schema("/degree", "too large"))?;
    let map = v
        .pointer("/map")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 3)
        .ok_or_else(|| schema("/map", "expected three polynomial strings"))?;
    let mut components = Vec::with_capacity(3);
    for (i, m) in map.iter().enumerate() {
        let text = m
            .as_str()
            .ok_or_else(|| schema(&format!("/map/{i}"), "expected a string"))?;
        let p: HomPoly = text.parse()?;
        if p.degree() != degree {
            return Err(schema(
                &format!("/map/{i}"),
                format!(
                    "component has degree {}, declared degree is {degree}",
                    p.degree()
                ),
            ));
        }
        components.push(p);
    }
    let components: [HomPoly; 3] = components.try_into().expect("three components");
    let map = RationalMap::new(components)?;
    let kind = v
        .pointer("/curve/kind")
        .and_then(Value::as_str)
        .ok_or_else(|| {
            schema(
                "/curve/kind",
                "expected \"weierstrass_lattice\" or \"polynomial\"",
            )
        })?;
    let curve = match kind {
        "weierstrass_lattice" => {
            let w1 = complex_at(&v, "/curve/omega1")?;
            let w2 = complex_at(&v, "/curve/omega2")?;
            let lattice =
                Lattice::new(w1, w2).map_err(|e| schema("/curve/omega2", e.to_string()))?;
            let e = CurveEmbedding::new(lattice).map_err(|e| schema("/curve", e.to_string()))?;
            Curve::Lattice(Box::new(e))
        }
        "polynomial" => {
            let text = v
                .pointer("/curve/text")
                .and_then(Value::as_str)
                .ok_or_else(|| schema("/curve/text", "expected a string"))?;
            Curve::Polynomial(text.parse()?)
        }
        other => {
            return Err(schema(
                "/curve/kind",
                format!("unknown curve kind {other:?}"),
            ))
        }
    };
    let spec: SystemSpec = serde_json::from_value(v).map_err(|e| schema("", e.to_string()))?;
    if let Some(eps) = spec.defaults.eps {
        if eps.is_nan() || eps <= 0.0 {
            return Err(schema("/defaults/eps", "must be positive"));
        }
    }
    Ok(System { spec, map, curve })
}

pub fn load_spec(path: &Path) -> Result<System> {
    parse_spec(&std::fs::read_to_string(path)?)
}

#[derive(Parser, Debug)]
#[command(
    name = "p2attractor",
    version,
    about = "Invariant elliptic curves of rational maps of the projective plane"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Curve invariance and indeterminacy avoidance
    Check(RunArgs),
    /// Fit the torus lift t -> a t + b and probe separation of nearby points
    FitTorus(RunArgs),
    /// Tangential and transverse Lyapunov exponents
    Exponents(RunArgs),
    /// Monte Carlo basin measure of the curve
    Basin(RunArgs),
    /// Render a basin slice as a binary PPM image
    Render(RunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check(_) => "check",
            Command::FitTorus(_) => "fit-torus",
            Command::Exponents(_) => "exponents",
            Command::Basin(_) => "basin",
            Command::Render(_) => "render",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Check(a)
            | Command::FitTorus(a)
            | Command::Exponents(a)
            | Command::Basin(a)
            | Command::Render(a) => a,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// System description (JSON)
    pub spec: PathBuf,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub consecutive: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output image (render)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// chart,fixed_re,fixed_im,re_min,re_max,im_min,im_max,width[,height]
    #[arg(long)]
    pub slice: Option<String>,
    /// Anchors for the torus fit
    #[arg(long, default_value_t = 16)]
    pub anchors: usize,
    /// Orbit length for the cocycle and Birkhoff estimators
    #[arg(long, default_value_t = 10_000)]
    pub orbit_length: usize,
    #[arg(long)]
    pub skip_check: bool,
    /// Worker thread cap (0 = all cores)
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

/// Every parameter a run used, after defaults are applied.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub samples: usize,
    pub horizon: usize,
    pub eps: f64,
    pub consecutive: usize,
    pub seed: u64,
    pub anchors: usize,
    pub orbit_length: usize,
    pub skip_check: bool,
    pub threads: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slice: Option<Slice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub spec_path: PathBuf,
    pub status: &'static str,
    pub parameters: Resolved,
    pub seed: u64,
    pub results: Value,
    pub wall_time_seconds: f64,
    pub version: &'static str,
}

fn default_samples(cmd: &Command) -> usize {
    match cmd {
        Command::Check(_) => 1000,
        Command::FitTorus(_) => 1000,
        Command::Exponents(_) => 100_000,
        Command::Basin(_) => 10_000,
        Command::Render(_) => 0,
    }
}

fn default_horizon(cmd: &Command) -> usize {
    match cmd {
        Command::FitTorus(_) => 40,
        _ => CaptureParams::default().horizon,
    }
}

fn resolve(cmd: &Command, spec: &SystemSpec) -> Result<Resolved> {
    let a = cmd.args();
    let d = &spec.defaults;
    let seed = a.seed.or(d.seed).unwrap_or_else(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|t| t.as_nanos() as u64)
            .unwrap_or(0)
    });
    let slice = a.slice.as_deref().map(str::parse).transpose()?;
    let r = Resolved {
        samples: a
            .samples
            .or(d.samples)
            .unwrap_or_else(|| default_samples(cmd)),
        horizon: a
            .horizon
            .or(d.horizon)
            .unwrap_or_else(|| default_horizon(cmd)),
        eps: a.eps.or(d.eps).unwrap_or(CaptureParams::default().eps),
        consecutive: a
            .consecutive
            .or(d.consecutive)
            .unwrap_or(CaptureParams::default().consecutive),
        seed,
        anchors: a.anchors,
        orbit_length: a.orbit_length,
        skip_check: a.skip_check,
        threads: a.threads,
        slice,
        out: a.out.clone(),
    };
    Ok(r)
}

/// Outcome of a run that produced a report.
enum Outcome {
    Ok(Value),
    Failed(Value),
}

/// The standing hypotheses: the curve is invariant and avoids the
/// indeterminacy set.
pub fn check_system(system: &System, samples: usize, seed: u64) -> Result<(bool, Value)> {
    let points = system.curve.sample(samples.max(1), seed);
    if points.is_empty() {
        return Err(Error::EmptySample);
    }
    let invariance = verify_curve_invariance(&system.map, system.curve.poly(), &points);
    let avoidance = check_curve_avoids_indeterminacy(&system.map, &points)?;
    let (invariant, inv_json) = match invariance {
        Ok(r) => (r.max_residual <= ON_CURVE_TOL, json!(r)),
        Err(Error::NearIndeterminacy { residual }) => (
            false,
            json!({ "error": format!("curve meets the indeterminacy set (|F| = {residual:e})") }),
        ),
        Err(e) => return Err(e),
    };
    let passed = invariant && avoidance.pass;
    Ok((
        passed,
        json!({
            "passed": passed,
            "curve_points": points.len(),
            "invariance": inv_json,
            "invariance_tolerance": ON_CURVE_TOL,
            "indeterminacy_avoidance": avoidance,
        }),
    ))
}

fn lattice_only<'a>(system: &'a System, cmd: &str) -> Result<&'a CurveEmbedding> {
    system
        .curve
        .embedding()
        .ok_or_else(|| Error::InvalidArgument(format!("{cmd} needs a weierstrass_lattice curve")))
}

fn run(cmd: &Command, system: &System, p: &Resolved) -> Result<Outcome> {
    let mut results = serde_json::Map::new();
    if !p.skip_check || matches!(cmd, Command::Check(_)) {
        let n = if matches!(cmd, Command::Check(_)) {
            p.samples
        } else {
            1000
        };
        let (passed, check) = check_system(system, n, p.seed)?;
        results.insert("check".into(), check);
        if !passed {
            return Ok(Outcome::Failed(Value::Object(results)));
        }
    }
    let capture = CaptureParams {
        horizon: p.horizon,
        eps: p.eps,
        consecutive: p.consecutive,
    };
    match cmd {
        Command::Check(_) => {}
        Command::FitTorus(_) => {
            let e = lattice_only(system, "fit-torus")?;
            let fit = fit_torus_map(&system.map, e, p.anchors)?;
            let sep = separation_probe(&fit, e, p.samples, p.horizon, &mut stream(p.seed, 0))?;
            results.insert("fit".into(), json!(fit));
            results.insert("separation".into(), json!(sep));
        }
        Command::Exponents(_) => {
            let e = lattice_only(system, "exponents")?;
            let report = transverse_exponent(&system.map, e, p.samples, p.seed)?;
            let fit = fit_torus_map(&system.map, e, p.anchors)?;
            let t0 = e.lattice.point(0.1234567, 0.7654321);
            let orbit = orbit_on_curve(e, &fit, t0, p.orbit_length)?;
            let cocycle = cocycle_exponents(&system.map, &orbit, 1)?;
            let birkhoff = birkhoff_log_jac(&system.map, e, &fit, t0, p.orbit_length)?;
            results.insert("exponents".into(), json!(report));
            results.insert("cocycle".into(), json!(cocycle));
            results.insert("birkhoff_log_jac".into(), json!(birkhoff));
        }
        Command::Basin(_) => {
            let target = Target::curve(system.curve.poly().clone());
            let est = basin_measure(&system.map, &target, p.samples, &capture, p.seed)?;
            results.insert("basin".into(), json!(est));
        }
        Command::Render(_) => {
            let slice = p
                .slice
                .ok_or_else(|| Error::InvalidArgument("render needs --slice".into()))?;
            let out = p
                .out
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("render needs --out".into()))?;
            let target = Target::curve(system.curve.poly().clone());
            let img = render_basin_slice(&system.map, &target, &slice, &capture)?;
            img.write_ppm(out, capture.horizon)?;
            results.insert(
                "render".into(),
                json!({
                    "width": img.width,
                    "height": img.height,
                    "captured": img.count(OrbitTag::AttractedToCurve),
                    "undecided": img.count(OrbitTag::Undecided),
                    "indeterminacy_hits": img.count(OrbitTag::NearIndeterminacyHit),
                    "out": out,
                }),
            );
        }
    }
    Ok(Outcome::Ok(Value::Object(results)))
}

/// Errors that mean a hypothesis failed rather than bad input.
fn is_verification_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::NotInvariant { .. }
            | Error::NearIndeterminacy { .. }
            | Error::TooManyCriticalHits { .. }
            | Error::DegreeMismatch { .. }
            | Error::InversionFailure(_)
            | Error::InconsistentOrbit { .. }
            | Error::CriticalPointOnOrbit(_)
            | Error::FitResidualTooLarge(_)
    )
}

/// Run a parsed command; returns the exit code and the report, if any.
pub fn execute_cli(cli: &Cli) -> (i32, Option<RunReport>) {
    let start = Instant::now();
    let cmd = &cli.command;
    let args = cmd.args();
    let system = match load_spec(&args.spec) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", args.spec.display());
            return (EXIT_USAGE, None);
        }
    };
    let params = match resolve(cmd, &system.spec) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return (EXIT_USAGE, None);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(params.threads)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return (EXIT_USAGE, None);
        }
    };
    let outcome = pool.install(|| run(cmd, &system, &params));
    let (code, status, results) = match outcome {
        Ok(Outcome::Ok(v)) => (EXIT_OK, "ok", v),
        Ok(Outcome::Failed(v)) => (EXIT_VERIFICATION, "verification_failed", v),
        Err(e) if is_verification_failure(&e) => {
            eprintln!("verification failed: {e}");
            (
                EXIT_VERIFICATION,
                "verification_failed",
                json!({ "error": e.to_string() }),
            )
        }
        Err(e) => {
            eprintln!("error: {e}");
            return (EXIT_USAGE, None);
        }
    };
    let report = RunReport {
        command: cmd.name().to_string(),
        spec_path: args.spec.clone(),
        status,
        seed: params.seed,
        parameters: params,
        results,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION"),
    };
    (code, Some(report))
}

/// Entry point: parse `argv`, run, print the report. Returns the exit code.
pub fn execute<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
        }
    };
    let (code, report) = execute_cli(&cli);
    if let Some(r) = report {
        match serde_json::to_string_pretty(&r) {
            Ok(s) => println!("{s}"),
            Err(e) => {
                eprintln!("error: cannot serialize report: {e}");
                return EXIT_USAGE;
            }
        }
    }
    code
}
