//! Command-line driver: reproducible batch experiments with CSV and OFF
//! outputs.
//!
//! Four subcommands expose the library as a file-based tool:
//!
//! * `geometry-check` — evaluates the tangential-calculus identity suite
//!   (normal consistency, shape-operator algebra, product rules, integral
//!   theorems, Gauss–Bonnet) on an analytic surface and reports one CSV row
//!   per check.
//! * `verify-derivatives` — compares every analytic shape-derivative
//!   formula against the finite-difference flow oracle for a configured
//!   velocity, pointwise and for the functional derivatives.
//! * `newton` — runs the normal-perturbation Newton scheme for the area or
//!   bending energy on a triangle mesh and writes the iteration history.
//! * `flow` — transports a mesh along a velocity field and tracks the
//!   geometric measures over time.
//!
//! Every run is reproducible: configuration comes from an optional JSON
//! document (unknown keys rejected) plus command-line flags that override
//! file values, randomness is seeded, and floats are printed with fixed
//! precision so identical configurations produce byte-identical CSVs
//! regardless of thread count. Exit codes are stable: `0` when every check
//! passes (or the run converges), `1` on a numeric failure, `2` on a
//! configuration or usage error.

use std::fs;
use std::io;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::fem::{CurvatureSource, FemSpace};
use crate::field::{Polynomial, ScalarField};
use crate::flow::{ShapeDerivativeOracle, Velocity};
use crate::functionals::FunctionalKind;
use crate::mesh::{flow_mesh, TriMesh};
use crate::meshio::{read_mesh, write_off};
use crate::newton::{newton_iterate_observed, NewtonConfig, Termination};
use crate::shape_derivatives::{
    curvature_prime, gauss_curvature_prime, normal_prime, trace_power_prime,
};
use crate::surface::{AnalyticSurface, SurfaceKind};
use crate::tangential::{
    curvature_field, curvature_gradient, tangential_divergence, tangential_gradient,
};
use crate::tensor::Vector;
use crate::{Error, Result};

const EXIT_PASS: i32 = 0;
const EXIT_NUMERIC: i32 = 1;
const EXIT_CONFIG: i32 = 2;

/// Entry point for the binary: parses `std::env::args`, runs the chosen
/// command, and returns the process exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// [`run`] over an explicit argument list (testable).
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    let (kind, args) = match &cli.command {
        Command::GeometryCheck(a) => (CommandKind::GeometryCheck, a),
        Command::VerifyDerivatives(a) => (CommandKind::VerifyDerivatives, a),
        Command::Newton(a) => (CommandKind::Newton, a),
        Command::Flow(a) => (CommandKind::Flow, a),
    };
    let settings = match resolve(kind, args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let outcome = match kind {
        CommandKind::GeometryCheck => cmd_geometry_check(&settings),
        CommandKind::VerifyDerivatives => cmd_verify_derivatives(&settings),
        CommandKind::Newton => cmd_newton(&settings),
        CommandKind::Flow => cmd_flow(&settings),
    };
    match outcome {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_NUMERIC,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_NUMERIC
        }
    }
}

/// Shape-calculus experiments with reproducible file outputs.
#[derive(Debug, Parser)]
#[command(name = "shapecal", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the tangential-calculus identities on an analytic surface.
    GeometryCheck(CommonArgs),
    /// Compare analytic shape derivatives against the flow oracle.
    VerifyDerivatives(CommonArgs),
    /// Minimize the area or bending energy of a mesh by Newton steps.
    Newton(CommonArgs),
    /// Transport a mesh along a velocity and track geometric measures.
    Flow(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON configuration file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Surface descriptor: sphere(r), ellipsoid(a,b,c), torus(R,r), or for
    /// mesh commands icosphere(subdivisions[,jitter]).
    #[arg(long)]
    surface: Option<String>,
    /// Path to a triangle mesh (OFF or OBJ); overrides --surface.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Energy for the newton command: area or willmore.
    #[arg(long)]
    functional: Option<String>,
    /// Velocity descriptor: radial, dilation, translation(x,y,z),
    /// normal_inflation, random_polynomial(degree,seed[,support_radius]).
    #[arg(long)]
    velocity: Option<String>,
    /// Half-width of the oracle's central difference in the flow parameter.
    #[arg(long)]
    h: Option<f64>,
    /// Richardson-extrapolate the oracle differences (true/false).
    #[arg(long)]
    richardson: Option<bool>,
    /// Seed for every random choice in the run.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for per-step OFF mesh dumps.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
    /// Pass tolerance (verify-derivatives) or residual tolerance (newton).
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap for the newton command.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Newton step scale in (0, 1].
    #[arg(long)]
    alpha: Option<f64>,
    /// Kernel-shift coefficient for the Newton solve.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CommandKind {
    GeometryCheck,
    VerifyDerivatives,
    Newton,
    Flow,
}

impl CommandKind {
    fn name(&self) -> &'static str {
        match self {
            CommandKind::GeometryCheck => "geometry-check",
            CommandKind::VerifyDerivatives => "verify-derivatives",
            CommandKind::Newton => "newton",
            CommandKind::Flow => "flow",
        }
    }
}

/// One experiment, as recorded in a JSON file. Every field is optional;
/// command-line flags override whatever the file sets. Unknown keys are
/// rejected so a stale or misspelled config fails loudly.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Expected subcommand; rejected when it contradicts the invocation.
    pub command: Option<String>,
    pub surface: Option<String>,
    pub mesh: Option<PathBuf>,
    pub functional: Option<String>,
    pub velocity: Option<String>,
    pub h: Option<f64>,
    pub richardson: Option<bool>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub dump_dir: Option<PathBuf>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    /// Chart quadrature order per direction (default 32).
    pub quadrature: Option<usize>,
    /// Pointwise sample count for per-point comparisons (default 20).
    pub samples: Option<usize>,
    /// Flow horizon (default 0.1).
    pub t_final: Option<f64>,
    /// Number of flow output intervals (default 10).
    pub time_steps: Option<usize>,
    /// Integrator substeps per output interval (default 8).
    pub substeps: Option<usize>,
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::InvalidConfig(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str::<ExperimentConfig>(&text).map_err(|e| {
                Error::InvalidConfig(format!("config {}: {e}", path.display()))
            })?
        }
        None => ExperimentConfig::default(),
    };
    if args.surface.is_some() {
        cfg.surface = args.surface.clone();
    }
    if args.mesh.is_some() {
        cfg.mesh = args.mesh.clone();
    }
    if args.functional.is_some() {
        cfg.functional = args.functional.clone();
    }
    if args.velocity.is_some() {
        cfg.velocity = args.velocity.clone();
    }
    if args.h.is_some() {
        cfg.h = args.h;
    }
    if args.richardson.is_some() {
        cfg.richardson = args.richardson;
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    if args.dump_dir.is_some() {
        cfg.dump_dir = args.dump_dir.clone();
    }
    if args.tol.is_some() {
        cfg.tol = args.tol;
    }
    if args.max_iter.is_some() {
        cfg.max_iter = args.max_iter;
    }
    if args.alpha.is_some() {
        cfg.alpha = args.alpha;
    }
    if args.epsilon.is_some() {
        cfg.epsilon = args.epsilon;
    }
    Ok(cfg)
}

/// A surface resolved to what the command can consume.
enum SurfaceChoice {
    Analytic(AnalyticSurface),
    Mesh {
        mesh: TriMesh,
        /// Base shape for velocities that need one (normal_inflation on an
        /// icosphere inflates the unit sphere it approximates).
        base: Option<SurfaceKind>,
    },
}

/// Fully resolved run settings: config file merged with flags, descriptors
/// parsed, defaults applied.
struct Settings {
    surface_text: String,
    surface: SurfaceChoice,
    functional: FunctionalKind,
    velocity: Option<Velocity>,
    velocity_text: String,
    h: f64,
    richardson: bool,
    seed: u64,
    out: Option<PathBuf>,
    dump_dir: Option<PathBuf>,
    tol: f64,
    max_iter: usize,
    alpha: f64,
    epsilon: f64,
    quadrature: usize,
    samples: usize,
    t_final: f64,
    time_steps: usize,
    substeps: usize,
}

fn resolve(kind: CommandKind, args: &CommonArgs) -> Result<Settings> {
    let cfg = load_config(args)?;
    if let Some(cmd) = &cfg.command {
        if cmd != kind.name() {
            return Err(Error::InvalidConfig(format!(
                "config is for command `{cmd}`, invoked as `{}`",
                kind.name()
            )));
        }
    }
    let seed = cfg.seed.unwrap_or(0);
    let default_surface = match kind {
        CommandKind::GeometryCheck | CommandKind::VerifyDerivatives => "sphere(1)",
        CommandKind::Newton | CommandKind::Flow => "icosphere(3)",
    };
    let surface_text = cfg
        .surface
        .clone()
        .unwrap_or_else(|| default_surface.to_string());
    let surface = resolve_surface(&surface_text, &cfg.mesh, kind, seed)?;
    let surface_text = match (&surface, &cfg.mesh) {
        (SurfaceChoice::Mesh { .. }, Some(path)) => format!("mesh({})", path.display()),
        _ => surface_text.trim().to_string(),
    };

    let functional = parse_functional(cfg.functional.as_deref().unwrap_or("area"))?;
    if kind == CommandKind::Newton
        && !matches!(functional, FunctionalKind::Area | FunctionalKind::Willmore)
    {
        return Err(Error::InvalidConfig(format!(
            "newton supports the area and willmore energies, not `{}`",
            functional.name()
        )));
    }

    let velocity_text = match (&cfg.velocity, kind) {
        (Some(text), _) => Some(text.clone()),
        (None, CommandKind::VerifyDerivatives) => Some(format!("random_polynomial(2,{seed})")),
        (None, CommandKind::Flow) => Some("dilation".to_string()),
        (None, _) => None,
    };
    let base_kind = match &surface {
        SurfaceChoice::Analytic(s) => Some(s.kind()),
        SurfaceChoice::Mesh { base, .. } => *base,
    };
    let velocity = velocity_text
        .as_deref()
        .map(|text| resolve_velocity(text, base_kind))
        .transpose()?;

    let tol = cfg.tol.unwrap_or(match kind {
        CommandKind::VerifyDerivatives => 1e-5,
        CommandKind::Newton => 1e-6,
        _ => 0.0,
    });
    positive(cfg.h.unwrap_or(1e-3), "h")?;
    positive(cfg.alpha.unwrap_or(1.0), "alpha")?;
    Ok(Settings {
        surface_text,
        surface,
        functional,
        velocity,
        velocity_text: velocity_text.unwrap_or_default(),
        h: cfg.h.unwrap_or(1e-3),
        richardson: cfg.richardson.unwrap_or(true),
        seed,
        out: cfg.out,
        dump_dir: cfg.dump_dir,
        tol,
        max_iter: cfg.max_iter.unwrap_or(20),
        alpha: cfg.alpha.unwrap_or(1.0),
        epsilon: cfg.epsilon.unwrap_or(1e-8),
        quadrature: cfg.quadrature.unwrap_or(32),
        samples: cfg.samples.unwrap_or(20),
        t_final: cfg.t_final.unwrap_or(0.1),
        time_steps: cfg.time_steps.unwrap_or(10).max(1),
        substeps: cfg.substeps.unwrap_or(8).max(1),
    })
}

fn positive(x: f64, what: &str) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{what} must be positive, got {x}")))
    }
}

/// Splits `name(a,b,c)` into the family name and its numeric arguments.
fn parse_descriptor(text: &str) -> Result<(String, Vec<f64>)> {
    let t = text.trim();
    let Some(open) = t.find('(') else {
        return Ok((t.to_string(), Vec::new()));
    };
    if !t.ends_with(')') {
        return Err(Error::InvalidConfig(format!(
            "malformed descriptor `{t}`: missing closing parenthesis"
        )));
    }
    let name = t[..open].trim().to_string();
    let inner = &t[open + 1..t.len() - 1];
    if inner.trim().is_empty() {
        return Ok((name, Vec::new()));
    }
    let args = inner
        .split(',')
        .map(|a| {
            a.trim().parse::<f64>().map_err(|_| {
                Error::InvalidConfig(format!("bad numeric argument `{}` in `{t}`", a.trim()))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((name, args))
}

fn arity(t: &str, args: &[f64], expected: &[usize]) -> Result<()> {
    if expected.contains(&args.len()) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "`{t}` takes {} argument(s), got {}",
            expected
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(" or "),
            args.len()
        )))
    }
}

fn small_index(x: f64, what: &str, max: u64) -> Result<u64> {
    if x.fract() == 0.0 && x >= 0.0 && x <= max as f64 {
        Ok(x as u64)
    } else {
        Err(Error::InvalidConfig(format!(
            "{what} must be an integer in 0..={max}, got {x}"
        )))
    }
}

fn resolve_surface(
    text: &str,
    mesh_path: &Option<PathBuf>,
    kind: CommandKind,
    seed: u64,
) -> Result<SurfaceChoice> {
    let needs_mesh = matches!(kind, CommandKind::Newton | CommandKind::Flow);
    if let Some(path) = mesh_path {
        if !needs_mesh {
            return Err(Error::InvalidConfig(format!(
                "{} requires an analytic surface (sphere, ellipsoid, torus), not a mesh file",
                kind.name()
            )));
        }
        let mesh = read_mesh(path)?;
        mesh.validate()?;
        return Ok(SurfaceChoice::Mesh { mesh, base: None });
    }
    let (name, args) = parse_descriptor(text)?;
    let analytic = |surface: AnalyticSurface| -> Result<SurfaceChoice> {
        if needs_mesh {
            return Err(Error::InvalidConfig(format!(
                "{} operates on triangle meshes; use icosphere(subdivisions[,jitter]) or --mesh",
                kind.name()
            )));
        }
        Ok(SurfaceChoice::Analytic(surface))
    };
    match name.as_str() {
        "sphere" => {
            arity(text, &args, &[1])?;
            positive(args[0], "sphere radius")?;
            analytic(AnalyticSurface::sphere(args[0]))
        }
        "ellipsoid" => {
            arity(text, &args, &[3])?;
            for a in &args {
                positive(*a, "ellipsoid semi-axis")?;
            }
            analytic(AnalyticSurface::ellipsoid([args[0], args[1], args[2]]))
        }
        "torus" => {
            arity(text, &args, &[2])?;
            positive(args[0], "torus major radius")?;
            positive(args[1], "torus minor radius")?;
            if args[1] >= args[0] {
                return Err(Error::InvalidConfig(format!(
                    "torus needs minor < major, got ({}, {})",
                    args[0], args[1]
                )));
            }
            analytic(AnalyticSurface::torus(args[0], args[1]))
        }
        "icosphere" => {
            arity(text, &args, &[1, 2])?;
            if !needs_mesh {
                return Err(Error::InvalidConfig(format!(
                    "{} requires an analytic surface (sphere, ellipsoid, torus)",
                    kind.name()
                )));
            }
            let sub = small_index(args[0], "icosphere subdivisions", 8)? as usize;
            let mut mesh = TriMesh::icosphere(sub);
            if let Some(&amp) = args.get(1) {
                if !(0.0..0.5).contains(&amp) {
                    return Err(Error::InvalidConfig(format!(
                        "icosphere jitter must lie in [0, 0.5), got {amp}"
                    )));
                }
                if amp > 0.0 {
                    mesh = mesh.radial_jitter(amp, seed);
                }
            }
            Ok(SurfaceChoice::Mesh {
                mesh,
                base: Some(SurfaceKind::Sphere {
                    center: [0.0; 3],
                    radius: 1.0,
                }),
            })
        }
        other => Err(Error::InvalidConfig(format!(
            "unknown surface family `{other}` (expected sphere, ellipsoid, torus, or icosphere)"
        ))),
    }
}

fn resolve_velocity(text: &str, base: Option<SurfaceKind>) -> Result<Velocity> {
    let (name, args) = parse_descriptor(text)?;
    match name.as_str() {
        "radial" => {
            arity(text, &args, &[0])?;
            Ok(Velocity::radial_unit())
        }
        "dilation" => {
            arity(text, &args, &[0])?;
            Ok(Velocity::dilation())
        }
        "translation" => {
            arity(text, &args, &[3])?;
            Ok(Velocity::translation(Vector::new([args[0], args[1], args[2]])))
        }
        "normal_inflation" => {
            arity(text, &args, &[0])?;
            let base = base.ok_or_else(|| {
                Error::InvalidConfig(
                    "normal_inflation needs a base shape; mesh files have none".to_string(),
                )
            })?;
            Velocity::normal_inflation(base)
        }
        "random_polynomial" => {
            arity(text, &args, &[2, 3])?;
            let degree = small_index(args[0], "polynomial degree", 6)? as u8;
            let seed = small_index(args[1], "velocity seed", u64::MAX - 1)?;
            let velocity = Velocity::random_polynomial(degree, 1.0, seed);
            match args.get(2) {
                Some(&radius) => {
                    positive(radius, "support radius")?;
                    Ok(velocity.with_support(radius))
                }
                None => Ok(velocity),
            }
        }
        other => Err(Error::InvalidConfig(format!(
            "unknown velocity family `{other}` (expected radial, dilation, translation, \
             normal_inflation, or random_polynomial)"
        ))),
    }
}

fn parse_functional(text: &str) -> Result<FunctionalKind> {
    let (name, args) = parse_descriptor(text)?;
    match name.as_str() {
        "area" => {
            arity(text, &args, &[0])?;
            Ok(FunctionalKind::Area)
        }
        "willmore" => {
            arity(text, &args, &[0])?;
            Ok(FunctionalKind::Willmore)
        }
        "spontaneous" => {
            arity(text, &args, &[1])?;
            Ok(FunctionalKind::SpontaneousCurvature { kappa0: args[0] })
        }
        "total_gauss" => {
            arity(text, &args, &[0])?;
            Ok(FunctionalKind::TotalGauss)
        }
        other => Err(Error::InvalidConfig(format!(
            "unknown functional `{other}` (expected area, willmore, spontaneous, total_gauss)"
        ))),
    }
}

/// 17-significant-digit float cell, identical on every platform and thread
/// count that produces the same value.
fn cell(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_writer(out: &Option<PathBuf>) -> Result<csv::Writer<Box<dyn io::Write>>> {
    let sink: Box<dyn io::Write> = match out {
        Some(path) => Box::new(fs::File::create(path).map_err(|e| {
            Error::InvalidConfig(format!("cannot create {}: {e}", path.display()))
        })?),
        None => Box::new(io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

fn finish(mut writer: csv::Writer<Box<dyn io::Write>>) -> Result<()> {
    writer
        .flush()
        .map_err(|e| Error::InvalidConfig(format!("cannot write output: {e}")))
}

fn write_row(
    writer: &mut csv::Writer<Box<dyn io::Write>>,
    row: &[String],
) -> Result<()> {
    writer
        .write_record(row)
        .map_err(|e| Error::InvalidConfig(format!("cannot write output: {e}")))
}

fn analytic_surface(settings: &Settings) -> &AnalyticSurface {
    match &settings.surface {
        SurfaceChoice::Analytic(s) => s,
        SurfaceChoice::Mesh { .. } => unreachable!("resolve() enforces the surface class"),
    }
}

fn cmd_geometry_check(settings: &Settings) -> Result<bool> {
    let surface = analytic_surface(settings);
    let ls = surface.level_set();
    let q = settings.quadrature;
    let nodes = surface.quadrature(q)?;
    let stride = (nodes.len() / settings.samples.max(1)).max(1);
    let sampled: Vec<usize> = (0..nodes.len()).step_by(stride).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let f = ScalarField::polynomial(Polynomial::random(2, 1.0, &mut rng));
    let g = ScalarField::polynomial(Polynomial::random(2, 1.0, &mut rng));
    let w = match &settings.velocity {
        Some(v) => v.clone(),
        None => Velocity::random_polynomial(2, 1.0, settings.seed.wrapping_add(1)),
    };

    let mut rows: Vec<(&'static str, f64, f64)> = Vec::new();

    // Two independent normal constructions (chart cross product and level-set
    // gradient) agree and are unit length.
    let mut err = 0.0f64;
    for &i in &sampled {
        let node = &nodes[i];
        let n = ls.normal_at(&node.point)?;
        err = err.max((n.norm() - 1.0).abs());
        err = err.max((n - node.normal).norm());
    }
    rows.push(("unit_normal", err, 1e-10));

    let mut err = 0.0f64;
    let mut sym = 0.0f64;
    for &i in &sampled {
        let node = &nodes[i];
        let s = ls.shape_operator_at(&node.point)?;
        let n = ls.normal_at(&node.point)?;
        err = err.max(s.apply(&n).norm());
        let mut skew = 0.0;
        for r in 0..3 {
            for c in 0..3 {
                skew += (s[(r, c)] - s[(c, r)]).powi(2);
            }
        }
        sym = sym.max(skew.sqrt());
    }
    rows.push(("shape_operator_annihilates_normal", err, 1e-10));
    rows.push(("shape_operator_symmetry", sym, 1e-10));

    // grad_Γ(fg) = f grad_Γ g + g grad_Γ f.
    let fg = f.product(&g);
    let mut err = 0.0f64;
    for &i in &sampled {
        let x = &nodes[i].point;
        let lhs = tangential_gradient(ls, &fg, x)?;
        let rhs = tangential_gradient(ls, &g, x)? * f.value(x)
            + tangential_gradient(ls, &f, x)? * g.value(x);
        err = err.max((lhs - rhs).norm());
    }
    rows.push(("gradient_product_rule", err, 1e-9));

    // div_Γ(f W) = f div_Γ W + grad_Γ f · W.
    let fw = w.field.scaled_by(&f);
    let mut err = 0.0f64;
    for &i in &sampled {
        let x = &nodes[i].point;
        let lhs = tangential_divergence(ls, &fw, x)?;
        let rhs = f.value(x) * tangential_divergence(ls, &w.field, x)?
            + tangential_gradient(ls, &f, x)?.dot(&w.field.value(x));
        err = err.max((lhs - rhs).abs());
    }
    rows.push(("divergence_product_rule", err, 1e-9));

    // ∮ div_Γ W = ∮ κ W·n on a closed surface.
    let lhs = surface.integrate(q, |node| {
        tangential_divergence(ls, &w.field, &node.point).unwrap_or(f64::NAN)
    })?;
    let rhs = surface.integrate(q, |node| {
        node.invariants.total_mean_curvature() * w.field.value(&node.point).dot(&node.normal)
    })?;
    let scale = lhs.abs().max(rhs.abs()).max(1.0);
    rows.push(("divergence_theorem", (lhs - rhs).abs() / scale, 1e-8));

    // The tangential part of W integrates to zero divergence.
    let tangential = Velocity::tangentialized(ls, &w);
    let total = surface.integrate(q, |node| {
        tangential_divergence(ls, &tangential.field, &node.point).unwrap_or(f64::NAN)
    })?;
    rows.push(("tangential_divergence_integral", total.abs(), 1e-8));

    // grad_Γ κ = P lap_Γ n, both sides from exact level-set jets.
    let kappa = curvature_field(ls);
    let mut err = 0.0f64;
    for &i in &sampled {
        let x = &nodes[i].point;
        let lhs = tangential_gradient(ls, &kappa, x)?;
        let rhs = curvature_gradient(ls, x)?;
        err = err.max((lhs - rhs).norm());
    }
    rows.push(("curvature_gradient_identity", err, 1e-8));

    // Total Gauss curvature sees only the topology.
    let total = surface.integrate(q, |node| node.invariants.gauss_curvature(3))?;
    let (expected, tol) = match surface.kind() {
        SurfaceKind::Torus { .. } => (0.0, 1e-8),
        SurfaceKind::Ellipsoid { .. } => (4.0 * std::f64::consts::PI, 1e-7),
        _ => (4.0 * std::f64::consts::PI, 1e-8),
    };
    rows.push(("gauss_bonnet", (total - expected).abs(), tol));

    let mut writer = csv_writer(&settings.out)?;
    write_row(
        &mut writer,
        &["check_name", "max_error", "tolerance", "pass"].map(String::from),
    )?;
    let mut all_pass = true;
    for (name, err, tol) in &rows {
        let pass = err.is_finite() && err <= tol;
        all_pass &= pass;
        write_row(
            &mut writer,
            &[name.to_string(), cell(*err), cell(*tol), pass.to_string()],
        )?;
    }
    finish(writer)?;
    Ok(all_pass)
}

fn cmd_verify_derivatives(settings: &Settings) -> Result<bool> {
    let surface = analytic_surface(settings);
    let ls = surface.level_set();
    let velocity = settings
        .velocity
        .as_ref()
        .expect("verify-derivatives always resolves a velocity");
    let mut oracle = ShapeDerivativeOracle::new(surface, velocity);
    oracle.cfg.step = settings.h;
    oracle.cfg.richardson = settings.richardson;
    let vn = velocity.normal_speed(ls);
    let points = surface.sample_points(settings.samples, settings.seed);
    let tol = settings.tol;

    struct Row {
        quantity: &'static str,
        analytic: f64,
        oracle: f64,
        abs_err: f64,
    }
    let mut rows: Vec<Row> = Vec::new();

    // Pointwise quantities: keep the sample with the worst disagreement.
    let worst = |quantity: &'static str,
                 pairs: Vec<(f64, f64)>|
     -> Row {
        let mut best = Row {
            quantity,
            analytic: f64::NAN,
            oracle: f64::NAN,
            abs_err: 0.0,
        };
        for (a, o) in pairs {
            let err = (a - o).abs();
            if !err.is_finite() || err >= best.abs_err {
                best.analytic = a;
                best.oracle = o;
                best.abs_err = err;
            }
        }
        best
    };

    let mut kappa_pairs = Vec::new();
    let mut gauss_pairs = Vec::new();
    let mut trace_pairs = Vec::new();
    let mut normal_pairs = Vec::new();
    for sp in &points {
        let x = &sp.point;
        kappa_pairs.push((curvature_prime(ls, &vn, x)?, oracle.curvature_prime(sp)?));
        gauss_pairs.push((
            gauss_curvature_prime(ls, &vn, x)?,
            oracle.gauss_curvature_prime(sp)?,
        ));
        trace_pairs.push((
            trace_power_prime(ls, &vn, 2, x)?,
            oracle.trace_power_prime(2, sp)?,
        ));
        let a = normal_prime(ls, &vn, x)?;
        let o = oracle.normal_prime(sp)?;
        // Recorded as norms; the error is the full vector difference.
        let err = (a - o).norm();
        normal_pairs.push((a.norm(), o.norm(), err));
    }
    rows.push(worst("kappa_prime", kappa_pairs));
    rows.push(worst("gauss_curvature_prime", gauss_pairs));
    rows.push(worst("trace_power_2_prime", trace_pairs));
    {
        let mut best = Row {
            quantity: "normal_prime",
            analytic: f64::NAN,
            oracle: f64::NAN,
            abs_err: 0.0,
        };
        for (a, o, err) in normal_pairs {
            if !err.is_finite() || err >= best.abs_err {
                best.analytic = a;
                best.oracle = o;
                best.abs_err = err;
            }
        }
        rows.push(best);
    }

    let kinds = [
        FunctionalKind::Area,
        FunctionalKind::Willmore,
        FunctionalKind::TotalGauss,
    ];
    let names = ["area_derivative", "willmore_derivative", "total_gauss_derivative"];
    let oracle_values = oracle.functional_derivatives(&kinds, settings.quadrature)?;
    for ((kind, name), o) in kinds.iter().zip(names).zip(oracle_values) {
        let a = kind.derivative_for_normal_speed(surface, &vn, settings.quadrature)?;
        rows.push(Row {
            quantity: name,
            analytic: a,
            oracle: o,
            abs_err: (a - o).abs(),
        });
    }

    let mut writer = csv_writer(&settings.out)?;
    write_row(
        &mut writer,
        &[
            "quantity", "surface", "velocity", "analytic", "oracle", "abs_err", "rel_err",
            "pass",
        ]
        .map(String::from),
    )?;
    let mut all_pass = true;
    for row in &rows {
        let scale = row.analytic.abs().max(row.oracle.abs()).max(1.0);
        let rel = row.abs_err / scale;
        let pass = rel.is_finite() && rel <= tol;
        all_pass &= pass;
        write_row(
            &mut writer,
            &[
                row.quantity.to_string(),
                settings.surface_text.clone(),
                settings.velocity_text.clone(),
                cell(row.analytic),
                cell(row.oracle),
                cell(row.abs_err),
                cell(rel),
                pass.to_string(),
            ],
        )?;
    }
    finish(writer)?;
    Ok(all_pass)
}

fn cmd_newton(settings: &Settings) -> Result<bool> {
    let mesh = match &settings.surface {
        SurfaceChoice::Mesh { mesh, .. } => mesh.clone(),
        SurfaceChoice::Analytic(_) => unreachable!("resolve() enforces the surface class"),
    };
    let config = NewtonConfig {
        functional: settings.functional,
        max_iterations: settings.max_iter,
        residual_tolerance: settings.tol,
        step_scale: settings.alpha,
        kernel_shift: settings.epsilon,
        ..NewtonConfig::default()
    };
    if let Some(dir) = &settings.dump_dir {
        fs::create_dir_all(dir).map_err(|e| {
            Error::InvalidConfig(format!("cannot create {}: {e}", dir.display()))
        })?;
    }
    let mut dump_error: Option<Error> = None;
    let mut observer = |k: usize, m: &TriMesh| {
        if dump_error.is_some() {
            return;
        }
        if let Some(dir) = &settings.dump_dir {
            let path = dir.join(format!("iterate_{k:04}.off"));
            if let Err(e) = write_off(m, &path) {
                dump_error = Some(e);
            }
        }
    };
    let (_, report) =
        newton_iterate_observed(mesh, &CurvatureSource::Recovered, &config, &mut observer)?;
    if let Some(e) = dump_error {
        return Err(e);
    }

    let mut writer = csv_writer(&settings.out)?;
    write_row(
        &mut writer,
        &["iter", "J", "residual", "u_inf", "u_l2", "cg_iters", "alpha_used"].map(String::from),
    )?;
    for row in &report.rows {
        write_row(
            &mut writer,
            &[
                row.iteration.to_string(),
                cell(row.value),
                cell(row.residual),
                cell(row.update_inf),
                cell(row.update_l2),
                row.cg_iterations.to_string(),
                cell(row.step_scale),
            ],
        )?;
    }
    finish(writer)?;
    eprintln!(
        "newton: {} after {} step(s), J = {:.6e}, residual = {:.6e}",
        report.termination,
        report.rows.len(),
        report.final_value,
        report.final_residual
    );
    Ok(report.termination == Termination::Converged)
}

fn cmd_flow(settings: &Settings) -> Result<bool> {
    let mesh = match &settings.surface {
        SurfaceChoice::Mesh { mesh, .. } => mesh.clone(),
        SurfaceChoice::Analytic(_) => unreachable!("resolve() enforces the surface class"),
    };
    let velocity = settings
        .velocity
        .as_ref()
        .expect("flow always resolves a velocity");
    if let Some(dir) = &settings.dump_dir {
        fs::create_dir_all(dir).map_err(|e| {
            Error::InvalidConfig(format!("cannot create {}: {e}", dir.display()))
        })?;
    }
    let dt = settings.t_final / settings.time_steps as f64;

    let mut writer = csv_writer(&settings.out)?;
    write_row(
        &mut writer,
        &["t", "area", "willmore", "total_gauss", "volume"].map(String::from),
    )?;
    let mut current = mesh;
    let mut flipped_total = 0usize;
    for k in 0..=settings.time_steps {
        let t = dt * k as f64;
        let space = FemSpace::build(current.clone(), &CurvatureSource::Recovered)?;
        write_row(
            &mut writer,
            &[
                cell(t),
                cell(space.area()),
                cell(space.functional_value(&FunctionalKind::Willmore)),
                cell(space.functional_value(&FunctionalKind::TotalGauss)),
                cell(space.volume()),
            ],
        )?;
        if let Some(dir) = &settings.dump_dir {
            write_off(&current, dir.join(format!("flow_{k:04}.off")))?;
        }
        if k < settings.time_steps {
            let flowed = flow_mesh(&current, &velocity.field, dt, settings.substeps)?;
            flipped_total += flowed.flipped_triangles;
            current = flowed.mesh;
        }
    }
    finish(writer)?;
    if flipped_total > 0 {
        eprintln!("flow: {flipped_total} triangle(s) inverted during transport");
    }
    Ok(flipped_total == 0)
}
