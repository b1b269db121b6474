//! Cross-method comparison grids and asymptotic schedule studies.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::bernstein::BernsteinDescriptor;
use crate::config::{check_schema_version, compile_expr, parse_descriptor, Fields};
use crate::contour::{self, ContourSpec};
use crate::error::{Error, Result};
use crate::mc::{self, SimulationConfig};
use crate::query::{DensityQuery, Method, MethodResult, Target};
use crate::saddle::{self, ls_slope, ProbeReport, RegimeBands};
use crate::series::{lin_grid, log_grid, SeriesEngine};

/// A grid given either as an explicit list or as {lo, hi, n, spacing}.
pub fn parse_grid(value: &Value, key: &str) -> Result<Vec<f64>> {
    let grid = match value {
        Value::Array(items) => items
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_f64()
                    .ok_or_else(|| Error::config(format!("{key}[{i}]"), format!("expected a number, got {v}")))
            })
            .collect::<Result<Vec<_>>>()?,
        Value::Object(_) => {
            let f = Fields::new(value, key)?;
            f.only(&["lo", "hi", "n", "spacing"])?;
            let lo = f.f64_req("lo")?;
            let hi = f.f64_req("hi")?;
            let n = f.u64_opt("n")?.ok_or_else(|| Error::config(f.key("n"), "missing required integer"))? as usize;
            match f.str_opt("spacing")?.unwrap_or("lin") {
                "lin" => lin_grid(lo, hi, n),
                "log" => {
                    if !(lo > 0.0) {
                        return Err(Error::config(f.key("lo"), "log spacing needs lo > 0"));
                    }
                    log_grid(lo, hi, n)
                }
                other => return Err(Error::config(f.key("spacing"), format!("unknown spacing '{other}'"))),
            }
        }
        Value::String(s) => parse_grid_spec(s).map_err(|m| Error::config(key, m))?,
        other => return Err(Error::config(key, format!("expected a grid, got {other}"))),
    };
    if grid.is_empty() {
        return Err(Error::config(key, "grid is empty"));
    }
    Ok(grid)
}

/// "lo:hi:n" (linear) or "lo:hi:n:log".
pub fn parse_grid_spec(s: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if !(parts.len() == 3 || parts.len() == 4) {
        return Err(format!("grid '{s}' must look like lo:hi:n or lo:hi:n:log"));
    }
    let num = |p: &str| p.trim().parse::<f64>().map_err(|_| format!("'{p}' is not a number in grid '{s}'"));
    let (lo, hi, n) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    if !(n >= 1.0 && n.fract() == 0.0) {
        return Err(format!("grid '{s}' needs a positive integer count"));
    }
    let n = n as usize;
    if !(hi >= lo) || (n > 1 && hi == lo) {
        return Err(format!("grid '{s}' needs lo < hi"));
    }
    match parts.get(3).copied() {
        None | Some("lin") => Ok(lin_grid(lo, hi, n)),
        Some("log") if lo > 0.0 => Ok(log_grid(lo, hi, n)),
        Some("log") => Err(format!("log grid '{s}' needs lo > 0")),
        Some(other) => Err(format!("unknown spacing '{other}' in grid '{s}'")),
    }
}

/// Closed forms for Φ(z) = √z: f, g and G at k = l = 0.
pub fn closed_form(phi: &BernsteinDescriptor, query: &DensityQuery) -> Result<MethodResult> {
    if phi.pure_stable_alpha() != Some(0.5) || query.k != 0 || query.l != 0 {
        return Err(Error::capability("closed forms exist only for stable(1/2) at k = l = 0"));
    }
    query.check_domain(phi)?;
    let (x, t) = (query.x, query.t);
    let e = (-x * x / (4.0 * t)).exp();
    let value = match query.target {
        Target::F => e / (PI * t).sqrt(),
        Target::SubordinatorDensity => x * t.powf(-1.5) * e / (2.0 * PI.sqrt()),
        Target::Distribution => statrs::function::erf::erfc(x / (2.0 * t.sqrt())),
        Target::Killed | Target::Creeping => 0.0,
    };
    Ok(MethodResult::new(value, value.abs() * 1e-15, Method::ClosedForm))
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodValue {
    pub value: f64,
    pub error_scale: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairDelta {
    pub a: Method,
    pub b: Method,
    pub delta: f64,
    pub allowed: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub x: f64,
    pub t: f64,
    pub k: u32,
    pub l: u32,
    pub target: Target,
    pub values: BTreeMap<Method, MethodValue>,
    pub errors: BTreeMap<Method, String>,
    pub deltas: Vec<PairDelta>,
    /// Every pairwise delta is within the combined error scales.
    pub agree: bool,
}

#[derive(Debug, Clone)]
pub struct CompareConfig {
    pub descriptor: BernsteinDescriptor,
    pub target: Target,
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub k: u32,
    pub l: u32,
    pub methods: Vec<Method>,
    /// Relative slack added to every pairwise comparison.
    pub rel_tol: f64,
    pub contour_tol: f64,
    pub series_terms: u32,
    pub series_tol: f64,
    pub mc: SimulationConfig,
}

const ALL_METHODS: [Method; 5] = [Method::Series, Method::Bromwich, Method::Keyhole, Method::Saddle, Method::MonteCarlo];

impl CompareConfig {
    pub fn new(descriptor: BernsteinDescriptor, target: Target, x: Vec<f64>, t: Vec<f64>) -> Self {
        let points = x.len() * t.len();
        Self {
            descriptor,
            target,
            x,
            t,
            k: 0,
            l: 0,
            methods: ALL_METHODS.to_vec(),
            rel_tol: 1e-8,
            contour_tol: 1e-11,
            series_terms: 400,
            series_tol: 1e-15,
            mc: SimulationConfig {
                ci_level: bonferroni(points),
                ..SimulationConfig::default()
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_with(text, None)
    }

    /// As `from_json`; `descriptor`, when given, replaces the document's.
    pub fn from_json_with(text: &str, descriptor: Option<BernsteinDescriptor>) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::config("<root>", format!("invalid JSON: {e}")))?;
        let f = Fields::new(&v, "")?;
        check_schema_version(&f)?;
        f.only(&[
            "schema_version",
            "descriptor",
            "target",
            "x",
            "t",
            "k",
            "l",
            "methods",
            "tolerance",
            "series",
            "mc",
        ])?;
        let descriptor = descriptor_or(&f, descriptor)?;
        let target = match f.str_opt("target")? {
            Some(s) => s.parse().map_err(|_| Error::config("target", format!("unknown target '{s}'")))?,
            None => Target::F,
        };
        let grid = |key: &str| -> Result<Vec<f64>> {
            parse_grid(f.get(key).ok_or_else(|| Error::config(key, "missing required grid"))?, key)
        };
        let mut cfg = Self::new(descriptor, target, grid("x")?, grid("t")?);
        cfg.k = f.u64_opt("k")?.unwrap_or(0) as u32;
        cfg.l = f.u64_opt("l")?.unwrap_or(0) as u32;
        match f.get("methods") {
            None | Some(Value::Null) => {}
            Some(Value::String(s)) if s == "all" => {}
            Some(Value::Array(items)) => {
                cfg.methods = items
                    .iter()
                    .enumerate()
                    .map(|(i, m)| {
                        let key = format!("methods[{i}]");
                        m.as_str()
                            .ok_or_else(|| Error::config(&key, "expected a method name"))?
                            .parse::<Method>()
                            .map_err(|_| Error::config(&key, format!("unknown method {m}")))
                    })
                    .collect::<Result<_>>()?;
            }
            Some(other) => return Err(Error::config("methods", format!("expected \"all\" or a list, got {other}"))),
        }
        if let Some(tv) = f.get("tolerance") {
            let tf = Fields::new(tv, "tolerance")?;
            tf.only(&["rel", "contour"])?;
            cfg.rel_tol = tf.f64_or("rel", cfg.rel_tol)?;
            cfg.contour_tol = tf.f64_or("contour", cfg.contour_tol)?;
        }
        if let Some(sv) = f.get("series") {
            let sf = Fields::new(sv, "series")?;
            sf.only(&["n_max", "tol"])?;
            cfg.series_terms = sf.u64_opt("n_max")?.map_or(cfg.series_terms, |n| n as u32);
            cfg.series_tol = sf.f64_or("tol", cfg.series_tol)?;
        }
        if let Some(mv) = f.get("mc") {
            let mf = Fields::new(mv, "mc")?;
            mf.only(&["paths", "seed", "small_jump_cut", "batches", "ci_level"])?;
            cfg.mc.ci_level = mf.f64_or("ci_level", cfg.mc.ci_level)?;
            cfg.mc.n_paths = mf.u64_opt("paths")?.unwrap_or(cfg.mc.n_paths);
            cfg.mc.rng_seed = mf.u64_opt("seed")?.unwrap_or(cfg.mc.rng_seed);
            cfg.mc.small_jump_cut = mf.f64_or("small_jump_cut", cfg.mc.small_jump_cut)?;
            cfg.mc.batches = mf.u64_opt("batches")?.map_or(cfg.mc.batches, |b| b as usize);
        }
        Ok(cfg)
    }
}

fn descriptor_or(f: &Fields<'_>, given: Option<BernsteinDescriptor>) -> Result<BernsteinDescriptor> {
    match (f.get("descriptor"), given) {
        (_, Some(d)) => Ok(d),
        (Some(v), None) => parse_descriptor(v, "descriptor"),
        (None, None) => Err(Error::config("descriptor", "missing required descriptor")),
    }
}

/// Confidence level that keeps the family-wise 5% level over n rows.
pub fn bonferroni(n: usize) -> f64 {
    1.0 - 0.05 / n.max(1) as f64
}

/// Evaluates one analytic method at one query.
pub fn evaluate_method(
    phi: &BernsteinDescriptor,
    method: Method,
    query: &DensityQuery,
    contour_tol: f64,
    series: Option<&SeriesEngine>,
    series_terms: u32,
    series_tol: f64,
) -> Result<MethodResult> {
    match method {
        Method::Bromwich => contour::invert(phi, query, &ContourSpec::bromwich().with_tol(contour_tol)),
        Method::Keyhole => {
            let spec = if phi.has_halfplane_extension() { ContourSpec::halfplane() } else { ContourSpec::keyhole() };
            contour::invert(phi, query, &spec.with_tol(contour_tol))
        }
        Method::Series => match series {
            Some(engine) => engine.series_f(query, series_terms, series_tol),
            None => SeriesEngine::new(phi)?.series_f(query, series_terms, series_tol),
        },
        Method::Saddle => Ok(saddle::asymptotic_g(phi, query)?.to_result()),
        Method::ClosedForm => closed_form(phi, query),
        Method::MonteCarlo => Err(Error::capability("Monte Carlo runs per t over the whole x grid")),
    }
}

fn agreement(values: &BTreeMap<Method, MethodValue>, rel_tol: f64) -> (Vec<PairDelta>, bool) {
    let items: Vec<(&Method, &MethodValue)> = values.iter().collect();
    let mut deltas = Vec::new();
    let mut agree = true;
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            let (a, va) = items[i];
            let (b, vb) = items[j];
            let delta = (va.value - vb.value).abs();
            let allowed = va.error_scale + vb.error_scale + rel_tol * va.value.abs().max(vb.value.abs());
            agree &= delta <= allowed;
            deltas.push(PairDelta {
                a: *a,
                b: *b,
                delta,
                allowed,
            });
        }
    }
    (deltas, agree)
}

/// One row per (t, x) point, in t-major order.
pub fn run_compare(cfg: &CompareConfig) -> Result<Vec<ComparisonRow>> {
    let phi = &cfg.descriptor;
    let wants_mc = cfg.methods.contains(&Method::MonteCarlo);
    let mc_ok = cfg.k == 0 && cfg.l == 0 && matches!(cfg.target, Target::F | Target::Killed | Target::Creeping);
    let engine = if cfg.methods.contains(&Method::Series) { Some(SeriesEngine::new(phi)) } else { None };
    let mut rows = Vec::with_capacity(cfg.x.len() * cfg.t.len());
    for &t in &cfg.t {
        let mc_est = if wants_mc && mc_ok {
            Some(mc::estimate_inverse_density(phi, t, &cfg.x, &cfg.mc))
        } else {
            None
        };
        let block: Vec<ComparisonRow> = cfg
            .x
            .par_iter()
            .enumerate()
            .map(|(i, &x)| {
                let query = DensityQuery::new(cfg.target, x, t).with_orders(cfg.k, cfg.l);
                let mut values = BTreeMap::new();
                let mut errors = BTreeMap::new();
                for &m in &cfg.methods {
                    let r = match m {
                        Method::MonteCarlo => match &mc_est {
                            None => Err(Error::capability("Monte Carlo estimates only f, f_k, f_c at k = l = 0")),
                            Some(Err(e)) => Err(e.clone()),
                            Some(Ok(est)) => query.check_domain(phi).map(|_| {
                                let c = est.component(cfg.target).expect("target checked above");
                                MethodResult::new(c.estimate[i], c.half_width(i), Method::MonteCarlo)
                            }),
                        },
                        Method::Series => match &engine {
                            Some(Err(e)) => Err(e.clone()),
                            Some(Ok(en)) => {
                                evaluate_method(phi, m, &query, cfg.contour_tol, Some(en), cfg.series_terms, cfg.series_tol)
                            }
                            None => unreachable!(),
                        },
                        _ => evaluate_method(phi, m, &query, cfg.contour_tol, None, cfg.series_terms, cfg.series_tol),
                    };
                    match r {
                        Ok(r) => {
                            values.insert(
                                m,
                                MethodValue {
                                    value: r.value,
                                    error_scale: r.error_scale,
                                },
                            );
                        }
                        Err(e) => {
                            errors.insert(m, format!("{}: {}", m.as_str(), e.kind()));
                        }
                    }
                }
                let (deltas, agree) = agreement(&values, cfg.rel_tol);
                ComparisonRow {
                    x,
                    t,
                    k: cfg.k,
                    l: cfg.l,
                    target: cfg.target,
                    values,
                    errors,
                    deltas,
                    agree,
                }
            })
            .collect();
        rows.extend(block);
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub descriptor: BernsteinDescriptor,
    pub target: Target,
    /// Expression for t in terms of x.
    pub schedule: String,
    pub x: Vec<f64>,
    pub k: u32,
    pub l: u32,
    /// Inversion used as reference; None for leading terms only.
    pub reference: Option<ContourSpec>,
    pub bands: RegimeBands,
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_with(text, None)
    }

    /// As `from_json`; `descriptor`, when given, replaces the document's.
    pub fn from_json_with(text: &str, descriptor: Option<BernsteinDescriptor>) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::config("<root>", format!("invalid JSON: {e}")))?;
        let f = Fields::new(&v, "")?;
        check_schema_version(&f)?;
        f.only(&["schema_version", "descriptor", "target", "schedule", "x", "k", "l", "reference", "band_delta"])?;
        let descriptor = descriptor_or(&f, descriptor)?;
        let target = match f.str_opt("target")? {
            Some(s) => s.parse().map_err(|_| Error::config("target", format!("unknown target '{s}'")))?,
            None => Target::F,
        };
        let schedule = f.str_req("schedule")?.to_string();
        compile_expr(&schedule, "x", "schedule")?;
        let x = parse_grid(f.get("x").ok_or_else(|| Error::config("x", "missing required grid"))?, "x")?;
        let reference = match f.str_opt("reference")?.unwrap_or("auto") {
            "none" => None,
            "keyhole" => Some(ContourSpec::keyhole()),
            "halfplane" => Some(ContourSpec::halfplane()),
            "auto" | "bromwich" => Some(ContourSpec::bromwich()),
            other => return Err(Error::config("reference", format!("unknown reference '{other}'"))),
        };
        let mut bands = RegimeBands::default();
        bands.delta = f.f64_or("band_delta", bands.delta)?;
        Ok(Self {
            descriptor,
            target,
            schedule,
            x,
            k: f.u64_opt("k")?.unwrap_or(0) as u32,
            l: f.u64_opt("l")?.unwrap_or(0) as u32,
            reference,
            bands,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub probe: ProbeReport,
    /// Slope of ln|ratio − 1| against ln x.
    pub fitted_rate: Option<f64>,
    /// Slope of ln(error scale) against ln x.
    pub predicted_rate: Option<f64>,
    /// fitted_rate / predicted_rate.
    pub ratio_of_fits: Option<f64>,
}

pub fn run_asymptotic_study(cfg: &StudyConfig) -> Result<StudyReport> {
    let schedule = compile_expr(&cfg.schedule, "x", "schedule")?;
    let probe = saddle::regime_schedule_probe_with(
        &cfg.descriptor,
        cfg.target,
        &|x| schedule(x),
        &cfg.x,
        cfg.k,
        cfg.l,
        cfg.reference.as_ref(),
        cfg.bands,
    )?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = probe
        .rows
        .iter()
        .filter_map(|r| {
            let dev = (r.ratio? - 1.0).abs();
            (dev > 0.0).then(|| (r.x.ln(), dev.ln()))
        })
        .unzip();
    let fitted_rate = ls_slope(&xs, &ys);
    let (sx, sy): (Vec<f64>, Vec<f64>) = probe.rows.iter().map(|r| (r.x.ln(), r.error_scale.ln())).unzip();
    let predicted_rate = ls_slope(&sx, &sy);
    let ratio_of_fits = match (fitted_rate, predicted_rate) {
        (Some(a), Some(b)) if b != 0.0 => Some(a / b),
        _ => None,
    };
    Ok(StudyReport {
        probe,
        fitted_rate,
        predicted_rate,
        ratio_of_fits,
    })
}
