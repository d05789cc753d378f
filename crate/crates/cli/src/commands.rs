use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use shadowlab_core::experiments::{closed_orbit_section, noisy_saddle_pseudo, Outcome};
use shadowlab_core::fields::{build_xstar, classify, closed_orbit_field, FieldDescriptor, XStarParams};
use shadowlab_core::integrator::{sample_times, IntegratorConfig};
use shadowlab_core::manifold::{Chart, ManifoldPoint};
use shadowlab_core::poincare::{self, Direction, TransverseSection};
use shadowlab_core::pseudo::{case_b1_pseudo, lemma1_orbit_pseudo, lemma1_rest_pseudo, verify_pseudo, PseudoFile, Pseudotrajectory};
use shadowlab_core::shadow::{match_with_mode, Mode, ShadowOptions};

use crate::experiment::{parse_set, run_named, ExperimentConfig};
use crate::report::{checks_csv, csv_text, envelope, exit_code, to_value, write_json, write_text, CliError, CliResult};
use crate::ExperimentIo;

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Inline JSON (starting with '{') or a path to a JSON file.
fn field_descriptor(arg: &str) -> CliResult<FieldDescriptor> {
    let text = if arg.trim_start().starts_with('{') { arg.to_string() } else { read(Path::new(arg))? };
    serde_json::from_str(&text).map_err(|e| config_err(format!("field descriptor: {e}")))
}

fn point(desc: &FieldDescriptor, chart: Option<&str>, coords: &[f64]) -> CliResult<ManifoldPoint> {
    let space = desc.build()?.space;
    let chart = match chart {
        Some(c) => Chart::parse(c)?,
        None => space.default_chart(),
    };
    Ok(ManifoldPoint::new(space, chart, coords.to_vec())?)
}

fn integrator(tol: Option<f64>) -> CliResult<IntegratorConfig> {
    let cfg = tol.map_or_else(IntegratorConfig::default, IntegratorConfig::with_tol);
    cfg.validate()?;
    Ok(cfg)
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Field descriptor: inline JSON such as {"kind":"x2"} or a file.
    #[arg(long)]
    field: String,
    /// Start point coordinates, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    x: Vec<f64>,
    /// Chart of the start point (default chart of the space otherwise).
    #[arg(long)]
    chart: Option<String>,
    /// Final time (negative integrates backward).
    #[arg(long, allow_hyphen_values = true)]
    t: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long)]
    tol: Option<f64>,
    /// CSV output path (stdout by default).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn simulate(a: SimulateArgs) -> CliResult<u8> {
    if a.dt.is_nan() || a.dt <= 0.0 || !a.t.is_finite() {
        return Err(CliError::Config("need dt > 0 and a finite t".into()));
    }
    let desc = field_descriptor(&a.field)?;
    let field = desc.build()?;
    let x = point(&desc, a.chart.as_deref(), &a.x)?;
    let n = (a.t.abs() / a.dt + 1e-9).floor() as usize;
    let times: Vec<f64> = (0..=n).map(|k| a.t.signum() * k as f64 * a.dt).collect();
    let pts = sample_times(&field, &x, &times, &integrator(a.tol)?)?;
    let dim = x.dim();
    let emb = x.embed().len();
    let mut header = vec!["t".to_string(), "chart".to_string()];
    header.extend((0..dim).map(|i| format!("c{i}")));
    header.extend((0..emb).map(|i| format!("e{i}")));
    let rows: Vec<Vec<String>> = times
        .iter()
        .zip(&pts)
        .map(|(t, p)| {
            let mut r = vec![fmt(*t), p.chart.name()];
            r.extend(p.coords.iter().map(|c| fmt(*c)));
            r.extend(p.embed().iter().map(|c| fmt(*c)));
            r
        })
        .collect();
    write_text(a.out.as_deref(), &csv_text(&header, &rows)?)?;
    Ok(0)
}

#[derive(Args, Debug)]
pub struct PseudoGenArgs {
    #[command(subcommand)]
    kind: GenKind,
    /// Pseudotrajectory file to write (stdout by default).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum GenKind {
    /// Unit-step staircase across the rest line of diag(0, −1).
    RestDrift {
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 1000.0)]
        m: f64,
    },
    /// Outward drift in the neutral block of a closed orbit.
    OrbitDrift {
        #[arg(long, default_value_t = 0.1)]
        omega: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0")]
        v0: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
    /// One exponentially small jump near a linear saddle.
    CaseB1 {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,1,2")]
        diagonal: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.5,0,0")]
        r: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 7.0)]
        big_t: f64,
    },
    /// Unit segments along the saddle connection of diag(−1, 1) with random offsets.
    SaddleNoise {
        #[arg(long, default_value_t = 1e-3)]
        d: f64,
        #[arg(long, default_value_t = 1.0 / 12.0)]
        noise: f64,
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
        #[arg(long, default_value_t = 17)]
        seed: u64,
    },
    /// A single exact orbit.
    Orbit {
        #[arg(long)]
        field: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x: Vec<f64>,
        #[arg(long)]
        chart: Option<String>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,10")]
        window: Vec<f64>,
    },
}

fn window(w: &[f64]) -> CliResult<(f64, f64)> {
    match w {
        [a, b] if a < b => Ok((*a, *b)),
        _ => Err(CliError::Config(format!("window needs two increasing values, got {w:?}"))),
    }
}

fn diagonal(d: &[f64]) -> Vec<Vec<f64>> {
    (0..d.len()).map(|i| (0..d.len()).map(|j| if i == j { d[i] } else { 0.0 }).collect()).collect()
}

fn generate(kind: GenKind) -> CliResult<(FieldDescriptor, Pseudotrajectory)> {
    Ok(match kind {
        GenKind::RestDrift { eps, m } => (FieldDescriptor::RestLine, lemma1_rest_pseudo(eps, m)?.1),
        GenKind::OrbitDrift { omega, v0, n } => {
            let f = closed_orbit_field(omega);
            let sec = closed_orbit_section(&f)?;
            (FieldDescriptor::ClosedOrbit { omega }, lemma1_orbit_pseudo(&f, &sec, &v0, n, &IntegratorConfig::with_tol(1e-11))?.pseudo)
        }
        GenKind::CaseB1 { diagonal: d, r, a, lambda, big_t } => {
            if r.len() != d.len() {
                return Err(CliError::Config(format!("r has {} entries, the diagonal {}", r.len(), d.len())));
            }
            let desc = FieldDescriptor::Linear { matrix: diagonal(&d) };
            let f = desc.build()?;
            (desc, case_b1_pseudo(&f, &ManifoldPoint::euclidean(r)?, a, lambda, big_t)?)
        }
        GenKind::SaddleNoise { d, noise, horizon, seed } => {
            (FieldDescriptor::Linear { matrix: diagonal(&[-1.0, 1.0]) }, noisy_saddle_pseudo(d, noise, horizon, seed)?)
        }
        GenKind::Orbit { field, x, chart, window: w } => {
            let desc = field_descriptor(&field)?;
            let f = desc.build()?;
            let x = point(&desc, chart.as_deref(), &x)?;
            (desc, Pseudotrajectory::from_orbit(&f, x, window(&w)?)?)
        }
    })
}

pub fn pseudo_gen(a: PseudoGenArgs) -> CliResult<u8> {
    let (desc, g) = generate(a.kind)?;
    write_json(a.out.as_deref(), &g.to_file(&desc))?;
    Ok(0)
}

fn load_pseudo(path: &Path) -> CliResult<(String, shadowlab_core::field::VectorFieldDef, Pseudotrajectory)> {
    let text = read(path)?;
    let file: PseudoFile = serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let (f, g) = file.load()?;
    Ok((hex::encode(Sha256::digest(text.as_bytes())), f, g))
}

#[derive(Args, Debug)]
pub struct PseudoCheckArgs {
    /// Pseudotrajectory file.
    file: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    tau_step: f64,
    #[arg(long, default_value_t = 0.05)]
    t_step: f64,
    /// Fail (exit 2) when the sup defect exceeds this.
    #[arg(long)]
    bound: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn pseudo_check(a: PseudoCheckArgs) -> CliResult<u8> {
    let (hash, f, g) = load_pseudo(&a.file)?;
    let r = verify_pseudo(&f, &g, a.tau_step, a.t_step, &integrator(a.tol)?)?;
    let outcome = match a.bound {
        Some(b) if r.sup_defect > b => Outcome::Violation,
        _ => Outcome::Passed,
    };
    let config = json!({ "pseudo_sha256": hash, "tau_step": a.tau_step, "t_step": a.t_step, "bound": a.bound, "tol": a.tol });
    write_json(a.out.as_deref(), &envelope("pseudo check", &config, outcome, &to_value(&r)))?;
    Ok(exit_code(outcome))
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    Standard,
    Oriented,
    Orbital,
}

#[derive(Args, Debug)]
pub struct ShadowCheckArgs {
    /// Pseudotrajectory file.
    file: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Oriented)]
    mode: ModeArg,
    #[arg(long)]
    eps: f64,
    /// Replaces the window stored in the file.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    window: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.1)]
    tau_step: f64,
    #[arg(long, default_value_t = 0.05)]
    t_step: f64,
    /// Seed evaluation budget.
    #[arg(long, default_value_t = 10_000)]
    budget: usize,
    /// Seeds per coordinate.
    #[arg(long, default_value_t = 20)]
    seed_grid: usize,
    #[arg(long)]
    seed_radius: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    seed_time: Option<f64>,
    #[arg(long, default_value_t = 300)]
    nm_evals: usize,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV of the reparametrization breakpoints (s, h).
    #[arg(long)]
    csv: Option<PathBuf>,
}

pub fn shadow_check(a: ShadowCheckArgs) -> CliResult<u8> {
    let (hash, f, mut g) = load_pseudo(&a.file)?;
    if let Some(w) = &a.window {
        g.window = window(w)?;
    }
    let mode = match a.mode {
        ModeArg::Standard => Mode::Standard,
        ModeArg::Oriented => Mode::Oriented,
        ModeArg::Orbital => Mode::Orbital,
    };
    let opts = ShadowOptions {
        tau_step: a.tau_step,
        t_step: a.t_step,
        seed_grid: a.seed_grid,
        seed_radius: a.seed_radius,
        budget: a.budget,
        nm_evals: a.nm_evals,
        seed_time: a.seed_time,
        ..ShadowOptions::default()
    };
    let r = match_with_mode(mode, &f, &g, a.eps, &opts, &integrator(a.tol)?)?;
    // a miss is only relative to the search budget
    let outcome = if r.found { Outcome::Passed } else { Outcome::BudgetExhausted };
    let config = json!({
        "pseudo_sha256": hash,
        "mode": to_value(&mode),
        "eps": a.eps,
        "window": [g.window.0, g.window.1],
        "options": to_value(&opts),
        "tol": a.tol,
    });
    write_json(a.out.as_deref(), &envelope("shadow check", &config, outcome, &to_value(&r)))?;
    if let (Some(path), Some(h)) = (&a.csv, &r.reparametrization) {
        let rows: Vec<Vec<String>> = h.breakpoints().iter().map(|(s, t)| vec![fmt(*s), fmt(*t)]).collect();
        write_text(Some(path), &csv_text(&["s".into(), "h".into()], &rows)?)?;
    }
    Ok(exit_code(outcome))
}

#[derive(Args, Debug)]
pub struct XStarBuildArgs {
    /// JSON file with field parameters; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn xstar_build(a: XStarBuildArgs) -> CliResult<u8> {
    let params: XStarParams = match &a.config {
        Some(p) => serde_json::from_str(&read(p)?).map_err(config_err)?,
        None => XStarParams::default(),
    };
    let sys = build_xstar(params.clone())?;
    let desc = FieldDescriptor::Xstar { params };
    let mut rest = Map::new();
    for (name, x) in [("p_star", &sys.p_star), ("q_star", &sys.q_star), ("s_star", &sys.s_star), ("u_star", &sys.u_star)] {
        rest.insert(name.into(), to_value(&classify(&sys.field, x, 1e-6)?));
    }
    let report = json!({ "field": to_value(&desc), "blend_radii": to_value(&desc.blend_radii()), "rest_points": rest });
    let config = to_value(&desc);
    write_json(a.out.as_deref(), &envelope("xstar build", &config, Outcome::Passed, &report))?;
    Ok(0)
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum DirectionArg {
    Forward,
    Backward,
}

#[derive(Args, Debug)]
pub struct PoincareMapArgs {
    #[arg(long)]
    field: String,
    /// Chart of the base point and the normal.
    #[arg(long)]
    chart: Option<String>,
    /// Base point of the section.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    base: Vec<f64>,
    /// Normal of the section in chart coordinates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    normal: Vec<f64>,
    /// Radius of the section disk.
    #[arg(long, default_value_t = 0.5)]
    radius: f64,
    /// Section coordinates of the start point.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    u: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    returns: usize,
    #[arg(long, value_enum, default_value_t = DirectionArg::Forward)]
    direction: DirectionArg,
    /// Longest flow time allowed for one return.
    #[arg(long, default_value_t = 100.0)]
    cap: f64,
    #[arg(long)]
    tol: Option<f64>,
    /// CSV output path (stdout by default).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn poincare_map(a: PoincareMapArgs) -> CliResult<u8> {
    let desc = field_descriptor(&a.field)?;
    let field = desc.build()?;
    let base = point(&desc, a.chart.as_deref(), &a.base)?;
    let sec = TransverseSection::new(&field, base, &a.normal, a.radius)?;
    let cfg = integrator(a.tol)?;
    let direction = match a.direction {
        DirectionArg::Forward => Direction::Forward,
        DirectionArg::Backward => Direction::Backward,
    };
    let mut u = a.u.clone();
    let mut t = 0.0;
    let mut rows = vec![];
    let row = |k: usize, t: f64, u: &[f64]| std::iter::once(k.to_string()).chain(std::iter::once(fmt(t))).chain(u.iter().map(|x| fmt(*x))).collect::<Vec<String>>();
    rows.push(row(0, 0.0, &u));
    for k in 1..=a.returns {
        let hit = poincare::poincare_map(&field, &sec, &sec, &u, direction, a.cap, &cfg)?;
        t += hit.t;
        u = hit.u;
        rows.push(row(k, t, &u));
    }
    let mut header = vec!["k".to_string(), "t".to_string()];
    header.extend((0..u.len()).map(|i| format!("u{i}")));
    write_text(a.out.as_deref(), &csv_text(&header, &rows)?)?;
    Ok(0)
}

pub fn experiment(name: Option<String>, io: ExperimentIo) -> CliResult<u8> {
    let file = io.config.as_deref().map(|p| read(p).and_then(|s| ExperimentConfig::from_json(&s))).transpose()?;
    let name = match (name, &file) {
        (Some(n), Some(f)) if n != f.experiment => {
            return Err(CliError::Config(format!("experiment {n} does not match {} in the config file", f.experiment)));
        }
        (Some(n), _) => n,
        (None, Some(f)) => f.experiment.clone(),
        (None, None) => return Err(CliError::Config("no experiment named and no --config given".into())),
    };
    let mut params = file.as_ref().map(|f| f.params.clone()).unwrap_or_default();
    for s in &io.set {
        let (k, v) = parse_set(s)?;
        params.insert(k, v);
    }
    let out = io.out.or_else(|| file.as_ref().and_then(|f| f.output.clone()));
    let csv = io.csv.or_else(|| file.as_ref().and_then(|f| f.csv.clone()));
    if io.print_config {
        let done = run_named(&name, &params, true)?;
        let Value::Object(params) = done.config else { unreachable!("configs are JSON objects") };
        let resolved = ExperimentConfig { experiment: name, params, output: out, csv };
        write_text(None, &resolved.to_json())?;
        return Ok(0);
    }
    let done = run_named(&name, &params, false)?;
    let config = json!({ "experiment": name, "params": done.config });
    write_json(out.as_deref(), &envelope(&format!("experiment {name}"), &config, done.outcome, &done.report))?;
    if let Some(path) = csv {
        write_text(Some(&path), &checks_csv(&done.checks)?)?;
    }
    for c in done.checks.iter().filter(|c| !c.passed) {
        eprintln!("check failed: {} = {:e} (bound {:e})", c.name, c.value, c.bound);
    }
    Ok(exit_code(done.outcome))
}
