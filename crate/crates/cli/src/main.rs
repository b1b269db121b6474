#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use invsub::compare::{self, CompareConfig, StudyConfig, StudyReport};
use invsub::conditions::{self, ConditionReport};
use invsub::config::{compile_expr, load_descriptor};
use invsub::contour::{self, ContourKind};
use invsub::mc::{self, SimulationConfig};
use invsub::saddle::{self, RegimeBands};
use invsub::series::{self, CoefficientSource, SeriesEngine};
use invsub::{BernsteinDescriptor, ContourSpec, DensityQuery, Error, MethodResult, Target};

use output::{jnum, jopt, Cell, Format, Json, Report, Table};

#[derive(Parser)]
#[command(name = "invsub", version, about = "Densities of subordinators and their inverse processes")]
struct Cli {
    /// Process descriptor (JSON).
    #[arg(long, global = true)]
    descriptor: Option<PathBuf>,
    /// Write data to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Monte Carlo seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Contour inversion of the Laplace transform.
    Invert(InvertArgs),
    /// Convolution-power series in x.
    Series(SeriesArgs),
    /// Degree-n Taylor polynomial in x and its remainder over a band.
    Poly(PolyArgs),
    /// Saddle-point leading term.
    Saddle(SaddleArgs),
    /// Leading term along t = t(x), against contour inversion.
    SaddleProbe(ProbeArgs),
    /// Numerical probes of the growth conditions on Φ.
    Conditions(ConditionsArgs),
    /// Monte Carlo density of L(t) at fixed t.
    Mc(McArgs),
    /// Cross-method comparison over a grid, from a JSON config.
    Compare(ConfigArgs),
    /// Asymptotic study along a schedule, from a JSON config.
    Study(ConfigArgs),
}

#[derive(Args)]
struct PointArgs {
    /// f, f_k, f_c, g or G.
    #[arg(long, default_value = "f")]
    target: String,
    /// A value, a comma list, or lo:hi:n[:log].
    #[arg(long, default_value = "1")]
    x: String,
    /// A value, a comma list, or lo:hi:n[:log].
    #[arg(long, default_value = "1")]
    t: String,
    #[arg(long, default_value_t = 0)]
    k: u32,
    #[arg(long, default_value_t = 0)]
    l: u32,
    /// CSV of x,t[,k,l] rows; replaces --x, --t, --k and --l.
    #[arg(long)]
    batch: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ContourChoice {
    Bromwich,
    Keyhole,
    Halfplane,
}

#[derive(Args)]
struct InvertArgs {
    #[command(flatten)]
    point: PointArgs,
    #[arg(long, value_enum, default_value_t = ContourChoice::Bromwich)]
    method: ContourChoice,
    #[arg(long, default_value_t = 1e-11)]
    tol: f64,
    /// Bromwich abscissa; defaults to the saddle point.
    #[arg(long)]
    abscissa: Option<f64>,
    /// Keyhole opening angle θ.
    #[arg(long)]
    theta: Option<f64>,
    /// Keyhole arc radius.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceChoice {
    Auto,
    Keyhole,
    Halfplane,
    Stable,
    Tempered,
}

#[derive(Args)]
struct SeriesArgs {
    #[command(flatten)]
    point: PointArgs,
    #[arg(long, default_value_t = 400)]
    nmax: u32,
    #[arg(long, default_value_t = 1e-15)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = SourceChoice::Auto)]
    source: SourceChoice,
}

#[derive(Args)]
struct PolyArgs {
    #[arg(long)]
    n: u32,
    #[arg(long, default_value_t = 0)]
    k: u32,
    #[arg(long, default_value_t = 0)]
    l: u32,
    /// t1:t2
    #[arg(long, default_value = "1:2")]
    t_band: String,
    /// x1:x2
    #[arg(long, default_value = "1e-4:1e-2")]
    x_band: String,
    #[arg(long, value_enum, default_value_t = SourceChoice::Auto)]
    source: SourceChoice,
}

#[derive(Args)]
struct SaddleArgs {
    #[command(flatten)]
    point: PointArgs,
    /// Width of the edge bands as a fraction of Φ'(0+) − b.
    #[arg(long, default_value_t = 0.05)]
    band_delta: f64,
}

/// `auto` is Bromwich through the saddle point, which keeps its accuracy
/// relative to exponentially small values.
#[derive(Clone, Copy, ValueEnum)]
enum ReferenceChoice {
    Auto,
    None,
    Bromwich,
    Keyhole,
    Halfplane,
}

#[derive(Args)]
struct ProbeArgs {
    /// Expression in x giving t.
    #[arg(long)]
    schedule: String,
    /// lo:hi:n (log spaced unless :lin is appended) or a comma list.
    #[arg(long, default_value = "1e2:1e6:16")]
    grid: String,
    #[arg(long, default_value = "f")]
    target: String,
    #[arg(long, default_value_t = 0)]
    k: u32,
    #[arg(long, default_value_t = 0)]
    l: u32,
    #[arg(long, value_enum, default_value_t = ReferenceChoice::Auto)]
    reference: ReferenceChoice,
    #[arg(long, default_value_t = 0.05)]
    band_delta: f64,
}

#[derive(Args)]
struct ConditionsArgs {
    /// Comma list of a1, a2, a2prime, a2star, dr, sandwich, addcondi.
    #[arg(long, default_value = "a1,a2,dr")]
    check: String,
    /// lo:hi:n (log spaced unless :lin is appended) or a comma list.
    /// Defaults to 10:1e7:24, or 1e-7:0.1:24 for a2prime.
    #[arg(long)]
    grid: Option<String>,
    /// Expression in x giving t, for addcondi.
    #[arg(long)]
    schedule: Option<String>,
    /// Relative slack of the Φ'' sandwich.
    #[arg(long, default_value_t = 1e-8)]
    sandwich_tol: f64,
}

#[derive(Args)]
struct McArgs {
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// lo:hi:n[:log] or a comma list.
    #[arg(long, default_value = "0.01:3:64")]
    grid: String,
    /// Number of paths; scientific notation is accepted.
    #[arg(long, default_value = "1e5")]
    paths: String,
    /// f, f_c or f_k.
    #[arg(long, default_value = "f")]
    target: String,
    #[arg(long)]
    small_jump_cut: Option<f64>,
    #[arg(long)]
    batches: Option<usize>,
    #[arg(long)]
    ci_level: Option<f64>,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config document.
    #[arg(long)]
    config: PathBuf,
}

/// Exit 2 for bad input, 1 for a failed computation.
enum Failure {
    Usage(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Usage(e.to_string()),
            other => Failure::Compute(other.to_string()),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// A report plus whether every row succeeded (or agreed).
type Outcome = Result<(Report, bool), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match &cli.command {
        Command::Invert(a) => run_invert(&cli, a),
        Command::Series(a) => run_series(&cli, a),
        Command::Poly(a) => run_poly(&cli, a),
        Command::Saddle(a) => run_saddle(&cli, a),
        Command::SaddleProbe(a) => run_probe(&cli, a),
        Command::Conditions(a) => run_conditions(&cli, a),
        Command::Mc(a) => run_mc(&cli, a),
        Command::Compare(a) => run_compare(&cli, a),
        Command::Study(a) => run_study(&cli, a),
    };
    match outcome {
        Ok((report, ok)) => {
            if let Err(e) = report.emit(cli.format, cli.out.as_deref()) {
                eprintln!("error: writing output: {e}");
                return ExitCode::from(1);
            }
            if ok { ExitCode::SUCCESS } else { ExitCode::from(1) }
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn descriptor(cli: &Cli) -> Result<BernsteinDescriptor, Failure> {
    let path = cli
        .descriptor
        .as_deref()
        .ok_or_else(|| usage("--descriptor is required for this subcommand"))?;
    Ok(load_descriptor(path)?)
}

fn optional_descriptor(cli: &Cli) -> Result<Option<BernsteinDescriptor>, Failure> {
    cli.descriptor.as_deref().map(load_descriptor).transpose().map_err(Failure::from)
}

fn target(s: &str) -> Result<Target, Failure> {
    Ok(s.parse::<Target>()?)
}

/// A value, a comma list, or a lo:hi:n grid; `log_default` picks the
/// spacing when none is given.
fn parse_values(s: &str, flag: &str, log_default: bool) -> Result<Vec<f64>, Failure> {
    if s.contains(':') {
        let spec = if log_default && s.split(':').count() == 3 { format!("{s}:log") } else { s.to_string() };
        return compare::parse_grid_spec(&spec).map_err(|m| usage(format!("{flag}: {m}")));
    }
    let values = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| usage(format!("{flag}: '{p}' is not a number"))))
        .collect::<Result<Vec<f64>, Failure>>()?;
    if values.is_empty() {
        return Err(usage(format!("{flag}: no values")));
    }
    Ok(values)
}

fn parse_band(s: &str, flag: &str) -> Result<(f64, f64), Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| p.trim().parse::<f64>().map_err(|_| usage(format!("{flag}: '{p}' is not a number")));
    match parts.as_slice() {
        [a, b] => Ok((num(a)?, num(b)?)),
        _ => Err(usage(format!("{flag}: expected lo:hi, got '{s}'"))),
    }
}

#[derive(Clone, Copy)]
struct Point {
    x: f64,
    t: f64,
    k: u32,
    l: u32,
}

fn read_batch(path: &Path) -> Result<Vec<Point>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("--batch {}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let nums: Option<Vec<f64>> = cells.iter().map(|c| c.parse::<f64>().ok()).collect();
        let nums = match nums {
            Some(n) => n,
            None if points.is_empty() && i == 0 => continue,
            None => return Err(usage(format!("--batch line {}: expected numbers, got '{line}'", i + 1))),
        };
        let order = |v: Option<&f64>| -> Result<u32, Failure> {
            match v {
                None => Ok(0),
                Some(&v) if v >= 0.0 && v.fract() == 0.0 => Ok(v as u32),
                Some(v) => Err(usage(format!("--batch line {}: order {v} is not a non-negative integer", i + 1))),
            }
        };
        if !(2..=4).contains(&nums.len()) {
            return Err(usage(format!("--batch line {}: expected x,t[,k,l]", i + 1)));
        }
        points.push(Point {
            x: nums[0],
            t: nums[1],
            k: order(nums.get(2))?,
            l: order(nums.get(3))?,
        });
    }
    Ok(points)
}

/// Grid points in t-major order, or the batch file's rows.
fn points(a: &PointArgs) -> Result<Vec<Point>, Failure> {
    if let Some(path) = &a.batch {
        return read_batch(path);
    }
    let xs = parse_values(&a.x, "--x", false)?;
    let ts = parse_values(&a.t, "--t", false)?;
    Ok(ts
        .iter()
        .flat_map(|&t| xs.iter().map(move |&x| Point { x, t, k: a.k, l: a.l }))
        .collect())
}

const POINT_HEADER: &[&str] = &["x", "t", "k", "l", "target", "method", "value", "error_scale", "mantissa", "log_scale", "error"];

/// Shared by invert and series: one row and one JSON line per point.
fn point_report(target: Target, method: &str, pts: &[Point], results: Vec<Result<MethodResult, Error>>) -> (Report, bool) {
    let mut table = Table::new(POINT_HEADER);
    let mut lines = Vec::with_capacity(pts.len());
    let mut ok = true;
    for (p, r) in pts.iter().zip(results) {
        let base = json!({"x": jnum(p.x), "t": jnum(p.t), "k": p.k, "l": p.l, "target": target.as_str(), "method": method});
        let mut obj = base.as_object().cloned().unwrap_or_default();
        match r {
            Ok(r) => {
                table.push(vec![
                    p.x.into(),
                    p.t.into(),
                    p.k.into(),
                    p.l.into(),
                    target.as_str().into(),
                    method.into(),
                    r.value.into(),
                    r.error_scale.into(),
                    r.mantissa.into(),
                    r.log_scale.into(),
                    Cell::Empty,
                ]);
                obj.insert("value".into(), jnum(r.value));
                obj.insert("error_scale".into(), jnum(r.error_scale));
                obj.insert("mantissa".into(), jnum(r.mantissa));
                obj.insert("log_scale".into(), jnum(r.log_scale));
                obj.insert("diagnostics".into(), serde_json::to_value(&r.diagnostics).unwrap_or(Value::Null));
            }
            Err(e) => {
                ok = false;
                eprintln!("x={} t={}: {e}", p.x, p.t);
                table.push(vec![
                    p.x.into(),
                    p.t.into(),
                    p.k.into(),
                    p.l.into(),
                    target.as_str().into(),
                    method.into(),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    e.kind().into(),
                ]);
                obj.insert("error".into(), json!({"kind": e.kind(), "message": e.to_string()}));
            }
        }
        lines.push(Value::Object(obj));
    }
    (
        Report {
            tables: vec![table],
            json: Json::Lines(lines),
        },
        ok,
    )
}

fn run_invert(cli: &Cli, a: &InvertArgs) -> Outcome {
    let phi = descriptor(cli)?;
    let tgt = target(&a.point.target)?;
    let pts = points(&a.point)?;
    if !(a.tol > 0.0) {
        return Err(usage("--tol must be positive"));
    }
    let base = match a.method {
        ContourChoice::Bromwich => ContourSpec::bromwich().with_kind(ContourKind::Bromwich { abscissa: a.abscissa }),
        ContourChoice::Keyhole => ContourSpec::keyhole().with_kind(ContourKind::Keyhole {
            theta: a.theta.unwrap_or(std::f64::consts::FRAC_PI_2),
            eps: a.eps,
        }),
        ContourChoice::Halfplane => ContourSpec::halfplane().with_kind(ContourKind::HalfplaneKeyhole { eps: a.eps }),
    };
    let spec = base.with_tol(a.tol);
    let results: Vec<_> = pts
        .par_iter()
        .map(|p| contour::invert(&phi, &DensityQuery::new(tgt, p.x, p.t).with_orders(p.k, p.l), &spec))
        .collect();
    Ok(point_report(tgt, spec.method().as_str(), &pts, results))
}

fn engine(phi: &BernsteinDescriptor, source: SourceChoice) -> Result<SeriesEngine, Failure> {
    let source = match source {
        SourceChoice::Auto => return Ok(SeriesEngine::new(phi)?),
        SourceChoice::Keyhole => CoefficientSource::KeyholeNumeric,
        SourceChoice::Halfplane => CoefficientSource::HalfplaneNumeric,
        SourceChoice::Stable => CoefficientSource::StableClosedForm,
        SourceChoice::Tempered => CoefficientSource::TemperedClosedForm,
    };
    Ok(SeriesEngine::with_source(phi, source)?)
}

fn run_series(cli: &Cli, a: &SeriesArgs) -> Outcome {
    let phi = descriptor(cli)?;
    let tgt = target(&a.point.target)?;
    let pts = points(&a.point)?;
    let engine = engine(&phi, a.source)?;
    let results: Vec<_> = pts
        .par_iter()
        .map(|p| engine.series_g(&DensityQuery::new(tgt, p.x, p.t).with_orders(p.k, p.l), a.nmax, a.tol))
        .collect();
    Ok(point_report(tgt, "series", &pts, results))
}

fn run_poly(cli: &Cli, a: &PolyArgs) -> Outcome {
    let phi = descriptor(cli)?;
    let engine = engine(&phi, a.source)?;
    let t_band = parse_band(&a.t_band, "--t-band")?;
    let x_band = parse_band(&a.x_band, "--x-band")?;
    let rep = series::polynomial_approx(&engine, a.n, a.k, a.l, t_band, x_band)?;
    eprintln!(
        "poly: fitted remainder exponent {:.4} (bound predicts {})",
        rep.fitted_exponent,
        a.n + 1
    );
    let mut probes = Table::new(&["x", "t", "remainder"]);
    for p in &rep.probes {
        probes.push(vec![p.x.into(), p.t.into(), p.remainder.into()]);
    }
    let mut summary = Table::new(&["n", "k", "l", "fitted_exponent", "constant"]);
    summary.push(vec![rep.n.into(), rep.k.into(), rep.l.into(), rep.fitted_exponent.into(), rep.constant.into()]);
    let json = serde_json::to_value(&rep).map_err(|e| Failure::Compute(e.to_string()))?;
    Ok((
        Report {
            tables: vec![probes, summary],
            json: Json::Document(json),
        },
        true,
    ))
}

fn run_saddle(cli: &Cli, a: &SaddleArgs) -> Outcome {
    let phi = descriptor(cli)?;
    let tgt = target(&a.point.target)?;
    let pts = points(&a.point)?;
    let bands = RegimeBands { delta: a.band_delta };
    let results: Vec<_> = pts
        .par_iter()
        .map(|p| saddle::asymptotic_g_with(&phi, &DensityQuery::new(tgt, p.x, p.t).with_orders(p.k, p.l), bands))
        .collect();
    let mut table = Table::new(&[
        "x", "t", "k", "l", "target", "c", "regime", "leading", "mantissa", "log_scale", "error_scale", "error",
    ]);
    let mut lines = Vec::new();
    let mut ok = true;
    for (p, r) in pts.iter().zip(results) {
        let head: Vec<Cell> = vec![p.x.into(), p.t.into(), p.k.into(), p.l.into(), tgt.as_str().into()];
        let mut obj = json!({"x": jnum(p.x), "t": jnum(p.t), "k": p.k, "l": p.l, "target": tgt.as_str()})
            .as_object()
            .cloned()
            .unwrap_or_default();
        match r {
            Ok(s) => {
                let mut row = head;
                row.extend([
                    s.c.into(),
                    s.regime.as_str().into(),
                    s.leading.into(),
                    s.mantissa.into(),
                    s.log_scale.into(),
                    s.error_scale.into(),
                    Cell::Empty,
                ]);
                table.push(row);
                obj.insert("c".into(), jnum(s.c));
                obj.insert("leading".into(), jnum(s.leading));
                obj.insert("mantissa".into(), jnum(s.mantissa));
                obj.insert("log_scale".into(), jnum(s.log_scale));
                obj.insert("error_scale".into(), jnum(s.error_scale));
                obj.insert("regime".into(), s.regime.as_str().into());
            }
            Err(e) => {
                ok = false;
                eprintln!("x={} t={}: {e}", p.x, p.t);
                let mut row = head;
                row.extend(std::iter::repeat_n(Cell::Empty, 6));
                row.push(e.kind().into());
                table.push(row);
                obj.insert("error".into(), json!({"kind": e.kind(), "message": e.to_string()}));
            }
        }
        lines.push(Value::Object(obj));
    }
    Ok((
        Report {
            tables: vec![table],
            json: Json::Lines(lines),
        },
        ok,
    ))
}

fn study_report(rep: &StudyReport) -> Result<Report, Failure> {
    let mut rows = Table::new(&["x", "t", "a_star", "regime", "leading", "error_scale", "reference", "ratio", "error"]);
    for r in &rep.probe.rows {
        rows.push(vec![
            r.x.into(),
            r.t.into(),
            r.a_star.into(),
            r.regime.as_str().into(),
            r.leading.into(),
            r.error_scale.into(),
            Cell::opt(r.reference),
            Cell::opt(r.ratio),
            r.error.clone().into(),
        ]);
    }
    let mut summary = Table::new(&["fitted_rate", "predicted_rate", "ratio_of_fits", "fitted_exponent"]);
    summary.push(vec![
        Cell::opt(rep.fitted_rate),
        Cell::opt(rep.predicted_rate),
        Cell::opt(rep.ratio_of_fits),
        Cell::opt(rep.probe.fitted_exponent),
    ]);
    eprintln!(
        "study: fitted rate {}, predicted rate {}, ratio of fits {}",
        show(rep.fitted_rate),
        show(rep.predicted_rate),
        show(rep.ratio_of_fits)
    );
    let mut json = serde_json::to_value(rep).map_err(|e| Failure::Compute(e.to_string()))?;
    if let Some(obj) = json.as_object_mut() {
        obj.insert("fitted_rate".into(), jopt(rep.fitted_rate));
        obj.insert("predicted_rate".into(), jopt(rep.predicted_rate));
        obj.insert("ratio_of_fits".into(), jopt(rep.ratio_of_fits));
    }
    Ok(Report {
        tables: vec![rows, summary],
        json: Json::Document(json),
    })
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

fn run_probe(cli: &Cli, a: &ProbeArgs) -> Outcome {
    let phi = descriptor(cli)?;
    compile_expr(&a.schedule, "x", "--schedule")?;
    let reference = match a.reference {
        ReferenceChoice::None => None,
        ReferenceChoice::Auto | ReferenceChoice::Bromwich => Some(ContourSpec::bromwich()),
        ReferenceChoice::Keyhole => Some(ContourSpec::keyhole()),
        ReferenceChoice::Halfplane => Some(ContourSpec::halfplane()),
    };
    let cfg = StudyConfig {
        target: target(&a.target)?,
        schedule: a.schedule.clone(),
        x: parse_values(&a.grid, "--grid", true)?,
        k: a.k,
        l: a.l,
        reference,
        bands: RegimeBands { delta: a.band_delta },
        descriptor: phi,
    };
    let rep = compare::run_asymptotic_study(&cfg)?;
    let ok = rep.probe.rows.iter().all(|r| r.error.is_none());
    Ok((study_report(&rep)?, ok))
}

fn run_study(cli: &Cli, a: &ConfigArgs) -> Outcome {
    let text = read_config(&a.config)?;
    let cfg = StudyConfig::from_json_with(&text, optional_descriptor(cli)?)?;
    let rep = compare::run_asymptotic_study(&cfg)?;
    let ok = rep.probe.rows.iter().all(|r| r.error.is_none());
    Ok((study_report(&rep)?, ok))
}

fn read_config(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("--config {}: {e}", path.display())))
}

fn run_conditions(cli: &Cli, a: &ConditionsArgs) -> Outcome {
    let phi = descriptor(cli)?;
    let grid_or = |default: fn() -> Vec<f64>| -> Result<Vec<f64>, Failure> {
        match &a.grid {
            Some(g) => parse_values(g, "--grid", true),
            None => Ok(default()),
        }
    };
    let mut reports: Vec<ConditionReport> = Vec::new();
    for name in a.check.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match name {
            "a1" => reports.push(conditions::check_a1(&phi, &grid_or(conditions::default_grid)?)?),
            "a2" => reports.push(conditions::check_a2(&phi, &grid_or(conditions::default_grid)?, false)?),
            "a2prime" => reports.push(conditions::check_a2(&phi, &grid_or(conditions::default_grid_at_zero)?, true)?),
            "a2star" => reports.push(conditions::check_a2star_and_dr(&phi, &grid_or(conditions::default_grid)?)?.0),
            "dr" => reports.push(conditions::check_a2star_and_dr(&phi, &grid_or(conditions::default_grid)?)?.1),
            "sandwich" => {
                reports.push(conditions::check_phi2_sandwich(&phi, &grid_or(conditions::default_grid)?, a.sandwich_tol)?)
            }
            "addcondi" => {
                let src = a.schedule.as_deref().ok_or_else(|| usage("addcondi needs --schedule"))?;
                let schedule = compile_expr(src, "x", "--schedule")?;
                reports.push(conditions::check_add_condi(&phi, &|x| schedule(x), &grid_or(conditions::default_grid)?)?);
            }
            other => return Err(usage(format!("--check: unknown condition '{other}'"))),
        }
    }
    let mut ratios = Table::new(&["condition", "x", "ratio"]);
    let mut verdicts = Table::new(&["condition", "verdict", "estimate", "trend"]);
    for r in &reports {
        for (x, v) in r.probe_grid.iter().zip(&r.ratio_values) {
            ratios.push(vec![r.condition_id.as_str().into(), (*x).into(), (*v).into()]);
        }
        verdicts.push(vec![
            r.condition_id.as_str().into(),
            r.verdict.as_str().into(),
            r.estimate.into(),
            Cell::opt(r.trend),
        ]);
        eprintln!("{}: {}", r.condition_id.as_str(), r.verdict.as_str());
    }
    let json = Value::Array(
        reports
            .iter()
            .map(|r| {
                json!({
                    "condition_id": r.condition_id.as_str(),
                    "verdict": r.verdict.as_str(),
                    "estimate": jnum(r.estimate),
                    "trend": jopt(r.trend),
                    "probe_grid": r.probe_grid.iter().copied().map(jnum).collect::<Vec<_>>(),
                    "ratio_values": r.ratio_values.iter().copied().map(jnum).collect::<Vec<_>>(),
                    "extra": r.extra.iter().map(|(k, v)| (k.clone(), v.iter().copied().map(jnum).collect::<Value>())).collect::<serde_json::Map<_, _>>(),
                })
            })
            .collect(),
    );
    Ok((
        Report {
            tables: vec![ratios, verdicts],
            json: Json::Document(json),
        },
        true,
    ))
}

fn parse_count(s: &str, flag: &str) -> Result<u64, Failure> {
    match s.trim().parse::<f64>() {
        Ok(v) if v >= 1.0 && v.fract() == 0.0 && v <= u64::MAX as f64 => Ok(v as u64),
        _ => Err(usage(format!("{flag}: '{s}' is not a positive integer"))),
    }
}

fn run_mc(cli: &Cli, a: &McArgs) -> Outcome {
    let phi = descriptor(cli)?;
    let tgt = target(&a.target)?;
    if !matches!(tgt, Target::F | Target::Creeping | Target::Killed) {
        return Err(usage("--target: Monte Carlo estimates f, f_c or f_k"));
    }
    let grid = parse_values(&a.grid, "--grid", false)?;
    let mut cfg = SimulationConfig::default().with_paths(parse_count(&a.paths, "--paths")?);
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(v) = a.small_jump_cut {
        cfg.small_jump_cut = v;
    }
    if let Some(v) = a.batches {
        cfg.batches = v;
    }
    if let Some(v) = a.ci_level {
        cfg.ci_level = v;
    }
    let est = mc::estimate_inverse_density(&phi, a.t, &grid, &cfg)?;
    let comp = est
        .component(tgt)
        .ok_or_else(|| usage("--target: Monte Carlo estimates f, f_c or f_k"))?;
    eprintln!(
        "mc: {} paths, {} sampler, creep fraction {:.6}, killed fraction {:.6}",
        est.n_paths,
        if est.exact_sampler { "exact" } else { "compound Poisson" },
        est.creep_fraction,
        est.killed_fraction
    );
    let mut table = Table::new(&["x", "estimate", "ci_lo", "ci_hi", "creep_fraction"]);
    for (i, &x) in grid.iter().enumerate() {
        table.push(vec![
            x.into(),
            comp.estimate[i].into(),
            comp.ci_lo[i].into(),
            comp.ci_hi[i].into(),
            est.creep_fraction.into(),
        ]);
    }
    let nums = |v: &[f64]| v.iter().copied().map(jnum).collect::<Vec<_>>();
    let json = json!({
        "t": jnum(est.t),
        "target": tgt.as_str(),
        "n_paths": est.n_paths,
        "seed": cfg.rng_seed,
        "exact_sampler": est.exact_sampler,
        "creep_fraction": jnum(est.creep_fraction),
        "killed_fraction": jnum(est.killed_fraction),
        "bandwidth": jnum(comp.bandwidth),
        "x": nums(&grid),
        "estimate": nums(&comp.estimate),
        "ci_lo": nums(&comp.ci_lo),
        "ci_hi": nums(&comp.ci_hi),
    });
    Ok((
        Report {
            tables: vec![table],
            json: Json::Document(json),
        },
        true,
    ))
}

fn run_compare(cli: &Cli, a: &ConfigArgs) -> Outcome {
    let text = read_config(&a.config)?;
    let mut cfg = CompareConfig::from_json_with(&text, optional_descriptor(cli)?)?;
    if let Some(seed) = cli.seed {
        cfg.mc.rng_seed = seed;
    }
    let rows = compare::run_compare(&cfg)?;
    let mut table = Table::new(&["x", "t", "k", "l", "target", "method", "value", "error_scale", "agree", "error"]);
    let mut json_rows = Vec::with_capacity(rows.len());
    for r in &rows {
        for m in &cfg.methods {
            let mut row: Vec<Cell> = vec![r.x.into(), r.t.into(), r.k.into(), r.l.into(), r.target.as_str().into(), m.as_str().into()];
            match (r.values.get(m), r.errors.get(m)) {
                (Some(v), _) => row.extend([v.value.into(), v.error_scale.into(), r.agree.into(), Cell::Empty]),
                (None, err) => row.extend([Cell::Empty, Cell::Empty, r.agree.into(), err.cloned().into()]),
            }
            table.push(row);
        }
        json_rows.push(json!({
            "x": jnum(r.x),
            "t": jnum(r.t),
            "k": r.k,
            "l": r.l,
            "target": r.target.as_str(),
            "values": r.values.iter().map(|(m, v)| (m.as_str().to_string(), json!({"value": jnum(v.value), "error_scale": jnum(v.error_scale)}))).collect::<serde_json::Map<_, _>>(),
            "errors": r.errors.iter().map(|(m, e)| (m.as_str().to_string(), Value::from(e.clone()))).collect::<serde_json::Map<_, _>>(),
            "deltas": r.deltas.iter().map(|d| json!({"a": d.a.as_str(), "b": d.b.as_str(), "delta": jnum(d.delta), "allowed": jnum(d.allowed)})).collect::<Vec<_>>(),
            "agree": r.agree,
        }));
    }
    let agreeing = rows.iter().filter(|r| r.agree).count();
    eprintln!("compare: {agreeing}/{} rows agree", rows.len());
    for r in rows.iter().filter(|r| !r.agree) {
        for d in &r.deltas {
            if d.delta > d.allowed {
                eprintln!("  x={} t={}: {} vs {} differ by {:e} (allowed {:e})", r.x, r.t, d.a, d.b, d.delta, d.allowed);
            }
        }
    }
    let all = agreeing == rows.len();
    Ok((
        Report {
            tables: vec![table],
            json: Json::Document(json!({"rows": json_rows, "all_agree": all})),
        },
        all,
    ))
}
