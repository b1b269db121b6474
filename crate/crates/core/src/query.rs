//! Density queries and method results shared by all evaluation engines.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use serde_json::Value;

use crate::bernstein::BernsteinDescriptor;
use crate::error::{Error, Result};

/// Which density (or distribution function) is requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Target {
    /// Jump part of the density of L(t).
    #[serde(rename = "f")]
    F,
    /// Killed part, q·G.
    #[serde(rename = "f_k")]
    Killed,
    /// Creeping part, b·g.
    #[serde(rename = "f_c")]
    Creeping,
    /// Density of σ(x) in t.
    #[serde(rename = "g")]
    SubordinatorDensity,
    /// Distribution function t ↦ P(σ(x) ≤ t).
    #[serde(rename = "G")]
    Distribution,
}

impl Target {
    pub fn as_str(&self) -> &'static str {
        match self {
            Target::F => "f",
            Target::Killed => "f_k",
            Target::Creeping => "f_c",
            Target::SubordinatorDensity => "g",
            Target::Distribution => "G",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f" => Ok(Target::F),
            "f_k" | "fk" => Ok(Target::Killed),
            "f_c" | "fc" => Ok(Target::Creeping),
            "g" => Ok(Target::SubordinatorDensity),
            "G" => Ok(Target::Distribution),
            other => Err(Error::config("target", format!("unknown target '{other}' (expected f, f_k, f_c, g, G)"))),
        }
    }
}

/// ∂_x^k ∂_t^l of `target` at (x, t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityQuery {
    pub target: Target,
    pub x: f64,
    pub t: f64,
    pub k: u32,
    pub l: u32,
}

impl DensityQuery {
    pub fn new(target: Target, x: f64, t: f64) -> Self {
        Self { target, x, t, k: 0, l: 0 }
    }

    pub fn with_orders(mut self, k: u32, l: u32) -> Self {
        self.k = k;
        self.l = l;
        self
    }

    /// Checks t > 0 and 0 < x < t/b.
    pub fn check_domain(&self, phi: &BernsteinDescriptor) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::domain(format!("t must be positive, got {}", self.t)));
        }
        if !(self.x > 0.0 && self.x.is_finite()) {
            return Err(Error::domain(format!("x must be positive, got {}", self.x)));
        }
        if phi.drift > 0.0 && self.x >= self.t / phi.drift {
            return Err(Error::domain(format!(
                "(x, t) = ({}, {}) lies outside the region x < t/b = {}",
                self.x,
                self.t,
                self.t / phi.drift
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bromwich,
    Keyhole,
    Series,
    Saddle,
    MonteCarlo,
    ClosedForm,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Bromwich => "bromwich",
            Method::Keyhole => "keyhole",
            Method::Series => "series",
            Method::Saddle => "saddle",
            Method::MonteCarlo => "monte_carlo",
            Method::ClosedForm => "closed_form",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bromwich" => Ok(Method::Bromwich),
            "keyhole" => Ok(Method::Keyhole),
            "series" => Ok(Method::Series),
            "saddle" => Ok(Method::Saddle),
            "mc" | "monte_carlo" => Ok(Method::MonteCarlo),
            "closed_form" => Ok(Method::ClosedForm),
            other => Err(Error::config("method", format!("unknown method '{other}'"))),
        }
    }
}

/// A value with its error scale. Very small values are carried as
/// `mantissa · e^{log_scale}`; `value` is that product and may underflow.
#[derive(Debug, Clone, Serialize)]
pub struct MethodResult {
    pub value: f64,
    pub error_scale: f64,
    pub mantissa: f64,
    pub mantissa_error: f64,
    pub log_scale: f64,
    pub method: Method,
    pub diagnostics: BTreeMap<String, Value>,
}

impl MethodResult {
    pub fn new(value: f64, error_scale: f64, method: Method) -> Self {
        Self::scaled(value, error_scale, 0.0, method)
    }

    pub fn scaled(mantissa: f64, mantissa_error: f64, log_scale: f64, method: Method) -> Self {
        let factor = log_scale.exp();
        Self {
            value: mantissa * factor,
            error_scale: mantissa_error * factor,
            mantissa,
            mantissa_error,
            log_scale,
            method,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn with_diag(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.diagnostics.insert(key.to_string(), value.into());
        self
    }

    pub fn diag(&mut self, key: &str, value: impl Into<Value>) {
        self.diagnostics.insert(key.to_string(), value.into());
    }

    /// Multiplies by a constant.
    pub fn times(mut self, c: f64) -> Self {
        self.value *= c;
        self.error_scale *= c.abs();
        self.mantissa *= c;
        self.mantissa_error *= c.abs();
        self
    }

    /// self / other, computed on mantissas so it survives underflow.
    pub fn ratio_to(&self, other: &MethodResult) -> f64 {
        self.mantissa / other.mantissa * (self.log_scale - other.log_scale).exp()
    }

    /// Relative error scale.
    pub fn relative_error(&self) -> f64 {
        if self.mantissa == 0.0 {
            f64::INFINITY
        } else {
            (self.mantissa_error / self.mantissa).abs()
        }
    }

    pub fn ln_abs(&self) -> f64 {
        self.mantissa.abs().ln() + self.log_scale
    }
}
