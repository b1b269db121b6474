//! JSON descriptor documents.
//!
//! ```json
//! {"schema_version": 1, "kind": "stable", "alpha": 0.5, "drift": 0.2, "kill": 0.1}
//! ```
//!
//! Kinds: `stable` (alpha), `tempered_stable` (alpha, lambda), `gamma`,
//! `point_jump` (rate, size), `drift` (drift and/or kill only),
//! `levy_density` (family, parameters, support_upper, rel_tol) and `combine`
//! (op = `sum` with `operands`, or `power_composition` with `alpha` and
//! `operand`). Every kind also accepts `drift`, `kill`, `label`, and the
//! declarations `sector_half_angle`, `sector_closed`, `complete`.
//!
//! Density families: `power` (alpha, scale) for scale·y^{−1−α};
//! `tempered_power` (alpha, lambda, scale) for scale·y^{−1−α}e^{−λy};
//! `exponential` (rate, scale) for scale·e^{−rate·y}; `log_inverse` for
//! y^{−1}ln(1/y) on (0, 1); `expr` (expr) for an arbitrary expression in y.

use std::path::Path;
use std::sync::Arc;

use serde_json::{Map, Value};

use crate::bernstein::{BernsteinDescriptor, DensityFn, Sector};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u64 = 1;

const COMMON_KEYS: &[&str] = &["kind", "drift", "kill", "label", "sector_half_angle", "sector_closed", "complete"];

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

/// Typed access to one JSON object, with errors naming the key path.
pub struct Fields<'a> {
    map: &'a Map<String, Value>,
    path: String,
}

impl<'a> Fields<'a> {
    pub fn new(value: &'a Value, path: &str) -> Result<Self> {
        match value.as_object() {
            Some(map) => Ok(Self { map, path: path.to_string() }),
            None => Err(Error::config(
                if path.is_empty() { "<root>" } else { path },
                "expected a JSON object",
            )),
        }
    }

    pub fn key(&self, key: &str) -> String {
        join(&self.path, key)
    }

    pub fn get(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key)
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| Error::config(self.key(key), format!("expected a finite number, got {v}"))),
        }
    }

    pub fn f64_req(&self, key: &str) -> Result<f64> {
        self.f64_opt(key)?.ok_or_else(|| Error::config(self.key(key), "missing required number"))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn u64_opt(&self, key: &str) -> Result<Option<u64>> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => {
                if let Some(n) = v.as_u64() {
                    return Ok(Some(n));
                }
                // Accept 1e6-style floats when they are whole.
                match v.as_f64() {
                    Some(x) if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 => Ok(Some(x as u64)),
                    _ => Err(Error::config(self.key(key), format!("expected a nonnegative integer, got {v}"))),
                }
            }
        }
    }

    pub fn str_opt(&self, key: &str) -> Result<Option<&'a str>> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(Error::config(self.key(key), format!("expected a string, got {v}"))),
        }
    }

    pub fn str_req(&self, key: &str) -> Result<&'a str> {
        self.str_opt(key)?.ok_or_else(|| Error::config(self.key(key), "missing required string"))
    }

    pub fn bool_opt(&self, key: &str) -> Result<Option<bool>> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Bool(b)) => Ok(Some(*b)),
            Some(v) => Err(Error::config(self.key(key), format!("expected a boolean, got {v}"))),
        }
    }

    pub fn array_opt(&self, key: &str) -> Result<Option<&'a Vec<Value>>> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Array(a)) => Ok(Some(a)),
            Some(v) => Err(Error::config(self.key(key), format!("expected an array, got {v}"))),
        }
    }

    /// Fails on keys outside `allowed`.
    pub fn only(&self, allowed: &[&str]) -> Result<()> {
        for k in self.map.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::config(self.key(k), "unknown key"));
            }
        }
        Ok(())
    }
}

/// Checks the `schema_version` field of a top-level document.
pub fn check_schema_version(fields: &Fields<'_>) -> Result<()> {
    match fields.u64_opt("schema_version")? {
        Some(SCHEMA_VERSION) => Ok(()),
        Some(v) => Err(Error::config(
            fields.key("schema_version"),
            format!("unsupported schema version {v} (expected {SCHEMA_VERSION})"),
        )),
        None => Err(Error::config(fields.key("schema_version"), "missing required number")),
    }
}

/// A compiled real expression in one variable; evaluates to NaN on error.
pub fn compile_expr(src: &str, var: &str, key: &str) -> Result<Arc<dyn Fn(f64) -> f64 + Send + Sync>> {
    thread_local! {
        static BUILTINS: meval::Context<'static> = meval::Context::new();
    }
    let expr: meval::Expr = src
        .parse()
        .map_err(|e| Error::config(key, format!("cannot parse expression '{src}': {e}")))?;
    let probe = BUILTINS.with(|ctx| expr.eval_with_context(((var, 1.0), ctx)));
    if let Err(e) = probe {
        return Err(Error::config(key, format!("expression '{src}' must use only '{var}' and builtins: {e}")));
    }
    let var = var.to_string();
    Ok(Arc::new(move |v: f64| {
        BUILTINS.with(|ctx| expr.eval_with_context(((var.as_str(), v), ctx)).unwrap_or(f64::NAN))
    }))
}

/// Parses a top-level descriptor document (with `schema_version`).
pub fn descriptor_from_json(text: &str) -> Result<BernsteinDescriptor> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::config("<root>", format!("invalid JSON: {e}")))?;
    let fields = Fields::new(&value, "")?;
    check_schema_version(&fields)?;
    parse_descriptor_with(&value, "", &["schema_version"])
}

pub fn load_descriptor(path: &Path) -> Result<BernsteinDescriptor> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
    descriptor_from_json(&text)
}

/// Parses a descriptor object located at `path` inside a larger document.
/// A `schema_version` there is optional but checked when present.
pub fn parse_descriptor(value: &Value, path: &str) -> Result<BernsteinDescriptor> {
    let f = Fields::new(value, path)?;
    if f.get("schema_version").is_some() {
        check_schema_version(&f)?;
    }
    parse_descriptor_with(value, path, &["schema_version"])
}

fn parse_descriptor_with(value: &Value, path: &str, extra_keys: &[&str]) -> Result<BernsteinDescriptor> {
    let f = Fields::new(value, path)?;
    let kind = f.str_req("kind")?;
    let own: &[&str] = match kind {
        "stable" => &["alpha"],
        "tempered_stable" => &["alpha", "lambda"],
        "gamma" | "drift" => &[],
        "point_jump" => &["rate", "size"],
        "levy_density" => &[
            "family",
            "alpha",
            "lambda",
            "rate",
            "scale",
            "expr",
            "support_upper",
            "rel_tol",
        ],
        "combine" => &["op", "operands", "operand", "alpha"],
        other => {
            return Err(Error::config(
                f.key("kind"),
                format!(
                    "unknown kind '{other}' (expected stable, tempered_stable, gamma, point_jump, drift, levy_density, combine)"
                ),
            ))
        }
    };
    let allowed: Vec<&str> = COMMON_KEYS.iter().chain(own).chain(extra_keys).copied().collect();
    f.only(&allowed)?;
    let at = |key: &str, r: Result<BernsteinDescriptor>| r.map_err(|e| rekey(e, &f.key(key)));

    let mut d = match kind {
        "stable" => at("alpha", BernsteinDescriptor::stable(f.f64_req("alpha")?))?,
        "tempered_stable" => {
            let alpha = f.f64_req("alpha")?;
            let lambda = f.f64_req("lambda")?;
            at("alpha", BernsteinDescriptor::tempered_stable(alpha, lambda))?
        }
        "gamma" => BernsteinDescriptor::gamma(),
        "point_jump" => at("rate", BernsteinDescriptor::point_jump(f.f64_req("rate")?, f.f64_req("size")?))?,
        "drift" => BernsteinDescriptor::drift_only(0.0, 0.0)?,
        "levy_density" => parse_density(&f)?,
        "combine" => parse_combine(&f)?,
        _ => unreachable!(),
    };
    if let Some(b) = f.f64_opt("drift")? {
        d = at("drift", d.add_drift(b))?;
    }
    if let Some(q) = f.f64_opt("kill")? {
        d = at("kill", d.add_kill(q))?;
    }
    if let Some(angle) = f.f64_opt("sector_half_angle")? {
        if !(angle > 0.0 && angle <= std::f64::consts::PI) {
            return Err(Error::config(f.key("sector_half_angle"), "must lie in (0, π]"));
        }
        let closed = f.bool_opt("sector_closed")?.unwrap_or(false);
        d = d.with_sector(Some(if closed { Sector::closed(angle) } else { Sector::open(angle) }));
    } else if f.get("sector_closed").is_some() {
        return Err(Error::config(f.key("sector_closed"), "needs sector_half_angle"));
    }
    if let Some(c) = f.bool_opt("complete")? {
        d = d.with_complete(c);
    }
    if let Some(label) = f.str_opt("label")? {
        d.label = label.to_string();
    }
    Ok(d)
}

/// Attaches a key path to parameter errors raised by constructors.
fn rekey(e: Error, key: &str) -> Error {
    match e {
        Error::Domain(m) => Error::config(key, m),
        other => other,
    }
}

fn parse_density(f: &Fields<'_>) -> Result<BernsteinDescriptor> {
    let family = f.str_req("family")?;
    let scale = f.f64_or("scale", 1.0)?;
    if !(scale > 0.0) {
        return Err(Error::config(f.key("scale"), "must be positive"));
    }
    let mut support = f.f64_opt("support_upper")?;
    if let Some(u) = support {
        if !(u > 0.0) {
            return Err(Error::config(f.key("support_upper"), "must be positive"));
        }
    }
    let rel_tol = f.f64_or("rel_tol", 1e-10)?;
    if !(rel_tol > 0.0 && rel_tol < 1e-2) {
        return Err(Error::config(f.key("rel_tol"), "must lie in (0, 1e-2)"));
    }
    let alpha_in = |lo: f64, hi: f64| -> Result<f64> {
        let a = f.f64_req("alpha")?;
        if !(a > lo && a < hi) {
            return Err(Error::config(f.key("alpha"), format!("must lie in ({lo}, {hi}), got {a}")));
        }
        Ok(a)
    };
    let positive = |key: &str| -> Result<f64> {
        let v = f.f64_req(key)?;
        if !(v > 0.0) {
            return Err(Error::config(f.key(key), format!("must be positive, got {v}")));
        }
        Ok(v)
    };
    let (density, label): (DensityFn, String) = match family {
        "power" => {
            let a = alpha_in(-1.0, 1.0)?;
            (Arc::new(move |y: f64| scale * y.powf(-1.0 - a)), format!("power({a})"))
        }
        "tempered_power" => {
            let a = alpha_in(-1.0, 1.0)?;
            let l = positive("lambda")?;
            (
                Arc::new(move |y: f64| scale * y.powf(-1.0 - a) * (-l * y).exp()),
                format!("tempered_power({a}, {l})"),
            )
        }
        "exponential" => {
            let r = f.f64_opt("rate")?.unwrap_or(1.0);
            if !(r > 0.0) {
                return Err(Error::config(f.key("rate"), "must be positive"));
            }
            (Arc::new(move |y: f64| scale * (-r * y).exp()), format!("exponential({r})"))
        }
        "log_inverse" => {
            support = Some(support.map_or(1.0, |u| u.min(1.0)));
            (
                Arc::new(move |y: f64| if y < 1.0 { scale * (1.0 / y).ln() / y } else { 0.0 }),
                "log_inverse".to_string(),
            )
        }
        "expr" => {
            let src = f.str_req("expr")?;
            let e = compile_expr(src, "y", &f.key("expr"))?;
            (Arc::new(move |y: f64| scale * e(y)), format!("expr({src})"))
        }
        other => {
            return Err(Error::config(
                f.key("family"),
                format!("unknown family '{other}' (expected power, tempered_power, exponential, log_inverse, expr)"),
            ))
        }
    };
    let density: DensityFn = match support {
        Some(u) => Arc::new(move |y: f64| if y < u { density(y) } else { 0.0 }),
        None => density,
    };
    BernsteinDescriptor::from_levy_density(density, 0.0, 0.0, support, rel_tol, label)
        .map_err(|e| rekey(e, &f.key("family")))
}

fn parse_combine(f: &Fields<'_>) -> Result<BernsteinDescriptor> {
    match f.str_req("op")? {
        "sum" => {
            let ops = f
                .array_opt("operands")?
                .ok_or_else(|| Error::config(f.key("operands"), "missing required array"))?;
            if ops.is_empty() {
                return Err(Error::config(f.key("operands"), "needs at least one operand"));
            }
            let parts = ops
                .iter()
                .enumerate()
                .map(|(i, v)| parse_descriptor(v, &format!("{}[{i}]", f.key("operands"))))
                .collect::<Result<Vec<_>>>()?;
            BernsteinDescriptor::sum(parts).map_err(|e| rekey(e, &f.key("operands")))
        }
        "power_composition" => {
            let alpha = f.f64_req("alpha")?;
            let inner = f
                .get("operand")
                .ok_or_else(|| Error::config(f.key("operand"), "missing required descriptor"))?;
            let inner = parse_descriptor(inner, &f.key("operand"))?;
            BernsteinDescriptor::power_composition(alpha, inner).map_err(|e| rekey(e, &f.key("alpha")))
        }
        other => Err(Error::config(
            f.key("op"),
            format!("unknown op '{other}' (expected sum, power_composition)"),
        )),
    }
}
