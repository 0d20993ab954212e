//! Command runners. Each returns a JSON report and whether the identity it
//! checks held.

use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Map, Value};

use sfkit_core::flow::{
    eigenvalue_trace, sf_endpoints, sf_partition, sf_varying, verify_reduction,
    verify_reduction_varying, write_trace_csv, FlowReport, OperatorPath, PartitionControl,
};
use sfkit_core::geodesic::{
    example_frame, sf_twisted, verify_periodic_formula, ExampleParams, GeodesicFrameData,
    GeodesicSpec,
};
use sfkit_core::grassmann::{
    fredholm_pair_index, gap_distance, kato_gamma, projection_restriction_index,
    relative_dimension, Subspace,
};
use sfkit_core::instances::{
    random_path_with, random_subspace, reduction_instance_with, rng, varying_instance,
};
use sfkit_core::linalg::Tolerance;
use sfkit_core::{Error, Result};

use crate::scenario::{
    diag, span, FamilySpec, GrassmannSpec, Kind, PathSpec, RandomSpec, ReduceSpec, SampleSpec,
    Scenario, TrivializationKind, VarySpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Endpoints,
    Partition,
}

/// Where the problem comes from.
#[derive(Debug, Clone)]
pub enum Source {
    Scenario(Box<Scenario>),
    Example(String),
    Random(RandomSpec),
}

/// Everything a runner needs besides the source.
#[derive(Debug, Clone)]
pub struct Settings {
    pub tol: Tolerance,
    pub method: Method,
    pub modes: Option<usize>,
    pub trivialization: Option<TrivializationKind>,
    pub example: ExampleParams,
    pub trace: Option<std::path::PathBuf>,
    pub shift: Option<f64>,
    pub timings: bool,
}

pub struct Outcome {
    pub report: Value,
    pub holds: bool,
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

fn merge(into: &mut Map<String, Value>, value: Value) {
    if let Value::Object(m) = value {
        into.extend(m);
    }
}

fn finish(fields: Value, holds: bool) -> Outcome {
    let mut m = Map::new();
    merge(&mut m, fields);
    m.insert("holds".into(), Value::Bool(holds));
    Outcome {
        report: Value::Object(m),
        holds,
    }
}

// Built-in scenarios.

pub struct ExampleEntry {
    pub kind: Kind,
    pub name: &'static str,
    pub description: &'static str,
    pub expected: &'static str,
}

pub const EXAMPLES: &[ExampleEntry] = &[
    ExampleEntry {
        kind: Kind::Path,
        name: "linear_cross",
        description: "T_t = diag(2t - 1, 1) on [0, 1]",
        expected: "sf = 1",
    },
    ExampleEntry {
        kind: Kind::Reduce,
        name: "line_through_crossing",
        description: "T_t = diag(2t - 1, 1), V = span(e1)",
        expected: "sf_full = 1, sf_restricted = 1, lhs = rhs = 0",
    },
    ExampleEntry {
        kind: Kind::Vary,
        name: "rotating_line",
        description: "T = diag(1, 2), V_t the line at angle pi t / 2",
        expected: "sf_full = 0, sf_varying = 0, lhs = rhs = 0",
    },
    ExampleEntry {
        kind: Kind::Grassmann,
        name: "coordinate_planes",
        description: "V = span(e1, e2), W = span(e2, e3) in R^3",
        expected: "fredholm_index = 1, relative_dimension = 0, gap = 1",
    },
    ExampleEntry {
        kind: Kind::Geodesic,
        name: "flat_torus",
        description: "G = I_n, Gamma = 0, Rbar = 0 (param --n, default 2)",
        expected: "all invariants 0 except n_per = n",
    },
    ExampleEntry {
        kind: Kind::Geodesic,
        name: "sphere_equator",
        description: "G = I_2, Rbar = diag(0, -4 pi^2)",
        expected: "sf = -1, sf_dirichlet = -1, i_maslov = 2, i_conc = 0, n_per = 3, n0 = 1, dim_per_cap_0 = 1",
    },
    ExampleEntry {
        kind: Kind::Geodesic,
        name: "lorentz_product",
        description: "G = diag(1, 1, -1), Rbar = diag(0, -4 pi^2, 0)",
        expected: "sf = -1, i_maslov = 3, i_conc = 0, n_minus_g = 1, n_per = 4; residuals (2, 2)",
    },
    ExampleEntry {
        kind: Kind::Geodesic,
        name: "constant_curvature",
        description: "G = I_2, Rbar = diag(0, c) (param --curvature, default 1)",
        expected: "for c = -w^2: sf = -(1 + 2 #{k >= 1 : 2 pi k < w}), i_maslov = floor(w / pi), residuals (0, 0)",
    },
];

pub fn list_examples() -> String {
    let mut out = String::new();
    for e in EXAMPLES {
        out.push_str(&format!(
            "{:<10} {:<22} {}\n{:<33} expected: {}\n",
            e.kind.name(),
            e.name,
            e.description,
            "",
            e.expected
        ));
    }
    out
}

fn unknown_example(kind: Kind, name: &str) -> Error {
    let known: Vec<&str> = EXAMPLES.iter().filter(|e| e.kind == kind).map(|e| e.name).collect();
    Error::input(format!(
        "unknown {} example '{name}' (known: {})",
        kind.name(),
        known.join(", ")
    ))
}

fn linear_cross() -> PathSpec {
    PathSpec {
        samples: vec![
            SampleSpec { t: 0.0, a: diag(&[-1.0, 1.0]), m: None },
            SampleSpec { t: 1.0, a: diag(&[1.0, 1.0]), m: None },
        ],
    }
}

// Runners.

fn random_seed(scenario_seed: Option<u64>, seed: u64) -> u64 {
    scenario_seed.unwrap_or(seed)
}

fn require(value: Option<usize>, flag: &str) -> Result<usize> {
    value.ok_or_else(|| Error::input(format!("random instances need {flag}")))
}

fn build_path(source: &Source, seed: u64) -> Result<OperatorPath> {
    match source {
        Source::Scenario(s) if !s.random => s.payload::<PathSpec>()?.build(),
        Source::Example(name) if name == "linear_cross" => linear_cross().build(),
        Source::Example(name) => Err(unknown_example(Kind::Path, name)),
        Source::Scenario(_) | Source::Random(_) => {
            let spec = random_spec(source)?;
            let n = require(spec.dim, "--dim")?;
            if n == 0 {
                return Err(Error::input("--dim must be positive"));
            }
            random_path_with(&mut rng(seed), n)
        }
    }
}

fn random_spec(source: &Source) -> Result<RandomSpec> {
    match source {
        Source::Random(spec) => Ok(spec.clone()),
        Source::Scenario(s) => {
            if s.payload.is_null() {
                Ok(RandomSpec::default())
            } else {
                s.payload::<RandomSpec>()
            }
        }
        Source::Example(_) => Err(Error::input("not a random source")),
    }
}

fn flow_report(path: &OperatorPath, s: &Settings) -> Result<FlowReport> {
    match s.method {
        Method::Endpoints => sf_endpoints(path, &s.tol),
        Method::Partition => sf_partition(path, &PartitionControl::default(), &s.tol),
    }
}

pub fn run_path(source: &Source, seed: u64, s: &Settings) -> Result<Outcome> {
    let path = build_path(source, seed)?;
    let report = flow_report(&path, s)?;
    if let Some(file) = &s.trace {
        let trace = eigenvalue_trace(&path, 201, &s.tol)?;
        let out = std::fs::File::create(file)
            .map_err(|e| Error::input(format!("cannot write trace {}: {e}", file.display())))?;
        write_trace_csv(&trace, std::io::BufWriter::new(out))
            .map_err(|e| Error::input(format!("cannot write trace {}: {e}", file.display())))?;
    }
    let mut fields = to_value(&report);
    if let Value::Object(m) = &mut fields {
        m.insert("dim".into(), json!(path.dim()));
    }
    Ok(finish(fields, true))
}

pub fn run_reduce(source: &Source, seed: u64, s: &Settings) -> Result<Outcome> {
    let (path, v) = match source {
        Source::Scenario(sc) if !sc.random => {
            let spec = sc.payload::<ReduceSpec>()?;
            let path = spec.path.build()?;
            let v = span(path.dim(), &spec.subspace)?;
            (path, v)
        }
        Source::Example(name) if name == "line_through_crossing" => {
            let path = linear_cross().build()?;
            (path, span(2, &[vec![1.0, 0.0]])?)
        }
        Source::Example(name) => return Err(unknown_example(Kind::Reduce, name)),
        _ => {
            let spec = random_spec(source)?;
            let n = require(spec.dim, "--dim")?;
            let codim = spec.codim.unwrap_or(0);
            if n < 2 || codim >= n {
                return Err(Error::input("random reduction needs --dim >= 2 and --codim < --dim"));
            }
            let inst = reduction_instance_with(&mut rng(seed), n, codim, spec.degenerate.unwrap_or(false))?;
            (inst.path, inst.subspace)
        }
    };
    let report = verify_reduction(&path, &v, &s.tol)?;
    let mut fields = to_value(&report);
    if let Value::Object(m) = &mut fields {
        m.insert("dim".into(), json!(path.dim()));
        m.insert("codim".into(), json!(v.codim()));
    }
    Ok(finish(fields, report.holds()))
}

type Member = Box<dyn Fn(f64) -> Result<Subspace>>;

pub fn run_vary(source: &Source, seed: u64, s: &Settings) -> Result<Outcome> {
    let (path, family, member): (OperatorPath, _, Option<Member>);
    let mut triv = s.trivialization;
    match source {
        Source::Scenario(sc) if !sc.random => {
            let spec = sc.payload::<VarySpec>()?;
            path = spec.path.build()?;
            let fam = spec.family.build(path.dim(), path.domain())?;
            family = fam.path;
            member = fam.member;
            triv = triv.or(spec.trivialization);
        }
        Source::Example(name) if name == "rotating_line" => {
            path = PathSpec {
                samples: vec![
                    SampleSpec { t: 0.0, a: diag(&[1.0, 2.0]), m: None },
                    SampleSpec { t: 1.0, a: diag(&[1.0, 2.0]), m: None },
                ],
            }
            .build()?;
            let spec = FamilySpec::Rotation {
                generator: vec![vec![0.0, -std::f64::consts::FRAC_PI_2], vec![std::f64::consts::FRAC_PI_2, 0.0]],
                initial: vec![vec![1.0, 0.0]],
                samples: 17,
            };
            let fam = spec.build(2, path.domain())?;
            family = fam.path;
            member = fam.member;
        }
        Source::Example(name) => return Err(unknown_example(Kind::Vary, name)),
        _ => {
            let spec = random_spec(source)?;
            let n = require(spec.dim, "--dim")?;
            let codim = spec.codim.unwrap_or(0);
            if n < 2 || codim >= n {
                return Err(Error::input("random varying instances need --dim >= 2 and --codim < --dim"));
            }
            let inst = varying_instance(seed, n, codim, 17)?;
            path = inst.path.clone();
            family = inst.family.clone();
            member = Some(Box::new(move |t| inst.member(t)));
        }
    }
    let kind = triv.unwrap_or_default();
    let trivialization = kind.build(&family, &s.tol)?;
    let refine = member.as_deref();
    let report = verify_reduction_varying(&path, &family, &trivialization, refine, &s.tol)?;
    let varying = sf_varying(&path, &family, &trivialization, refine, &s.tol)?;
    let mut fields = to_value(&report);
    if let Value::Object(m) = &mut fields {
        m.insert("dim".into(), json!(path.dim()));
        m.insert("codim".into(), json!(path.dim() - family.dim()));
        m.insert("trivialization".into(), to_value(&kind));
        m.insert("restricted_flow".into(), to_value(&varying));
    }
    Ok(finish(fields, report.holds()))
}

fn geodesic_frame(source: &Source, s: &Settings) -> Result<(GeodesicFrameData, Option<usize>)> {
    match source {
        Source::Scenario(sc) if !sc.random => {
            let spec = sc.payload::<GeodesicSpec>()?;
            Ok((spec.build()?, spec.modes))
        }
        Source::Example(name) => {
            let frame = example_frame(name, &s.example)?;
            Ok((frame, None))
        }
        _ => Err(Error::input("geodesic problems have no random mode; use --example or -i")),
    }
}

pub fn run_geodesic(source: &Source, s: &Settings) -> Result<Outcome> {
    let (mut frame, scenario_modes) = geodesic_frame(source, s)?;
    if let Some(eps) = s.shift {
        if !eps.is_finite() {
            return Err(Error::input("--shift must be finite"));
        }
        frame = frame.with_curvature_shift(eps)?;
    }
    let modes = s.modes.or(scenario_modes).unwrap_or(16);
    if modes == 0 {
        return Err(Error::input("--modes must be positive"));
    }
    let report = verify_periodic_formula(&frame, modes, &s.tol)?;
    let mut fields = to_value(&report);
    if let Value::Object(m) = &mut fields {
        m.insert("modes".into(), json!(modes));
        if let Some(eps) = s.shift {
            m.insert("curvature_shift".into(), json!(eps));
        }
        m.insert("frame".into(), to_value(&GeodesicSpec::from_frame(&frame, None)));
        if frame.holonomy().is_some() {
            m.insert("twisted".into(), to_value(&sf_twisted(&frame, modes, &s.tol)?));
        }
    }
    Ok(finish(fields, report.holds()))
}

pub fn run_grassmann(source: &Source, seed: u64, s: &Settings) -> Result<Outcome> {
    let (v, w) = match source {
        Source::Scenario(sc) if !sc.random => {
            let spec = sc.payload::<GrassmannSpec>()?;
            (span(spec.dim, &spec.v)?, span(spec.dim, &spec.w)?)
        }
        Source::Example(name) if name == "coordinate_planes" => (
            span(3, &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]])?,
            span(3, &[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]])?,
        ),
        Source::Example(name) => return Err(unknown_example(Kind::Grassmann, name)),
        _ => {
            let spec = random_spec(source)?;
            let n = require(spec.dim, "--dim")?;
            let codim = spec.codim.unwrap_or(0).min(n);
            let mut r = rng(seed);
            (random_subspace(n, n - codim, &mut r), random_subspace(n, n - codim, &mut r))
        }
    };
    let t = &s.tol;
    let index = fredholm_pair_index(&v, &w, t)?;
    let compressed = projection_restriction_index(&v, &w, t)?;
    let reldim = relative_dimension(&v, &w, t)?;
    let via_complement = fredholm_pair_index(&v, &w.orthocomplement(t)?, t)?;
    let fields = json!({
        "ambient_dim": v.ambient_dim(),
        "dim_v": v.dim(),
        "dim_w": w.dim(),
        "intersection_dim": v.intersect(&w, t)?.dim(),
        "sum_dim": v.sum(&w, t)?.dim(),
        "fredholm_index": index,
        "projection_restriction_index": compressed,
        "relative_dimension": reldim,
        "index_with_complement": via_complement,
        "kato_gamma": kato_gamma(&v, &w, t)?,
        "gap": gap_distance(&v, &w, t)?,
    });
    Ok(finish(fields, index == compressed && reldim == via_complement))
}

pub fn run_one(kind: Kind, source: &Source, seed: u64, s: &Settings) -> Result<Outcome> {
    let start = Instant::now();
    let mut out = match kind {
        Kind::Path => run_path(source, seed, s),
        Kind::Reduce => run_reduce(source, seed, s),
        Kind::Vary => run_vary(source, seed, s),
        Kind::Geodesic => run_geodesic(source, s),
        Kind::Grassmann => run_grassmann(source, seed, s),
    }?;
    if s.timings {
        if let Value::Object(m) = &mut out.report {
            m.insert("elapsed_ms".into(), json!(start.elapsed().as_secs_f64() * 1e3));
        }
    }
    Ok(out)
}

/// Seed actually used for a run, honoring a seed fixed by the scenario.
pub fn effective_seed(source: &Source, seed: u64) -> u64 {
    match source {
        Source::Scenario(s) => random_seed(s.seed, seed),
        _ => seed,
    }
}
