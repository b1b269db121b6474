//! Leading-order saddle-point approximations for large x.
//!
//! The saddle c solves Φ'(c) = t/x and minimises a ↦ at − xΦ(a). The
//! leading term of ∂_x^k ∂_t^l f is
//!
//! (−1)^k e^{ct − xΦ(c)} Φ†(c) Φ(c)^k c^{l−1} / √(2π(−Φ''(c)) x),
//!
//! and G, g, f_k, f_c follow by dropping Φ†(c), shifting l, and scaling by
//! q or b.

use std::f64::consts::PI;

use serde::Serialize;

use crate::bernstein::BernsteinDescriptor;
use crate::contour::{self, ContourSpec};
use crate::error::{Error, Result};
use crate::query::{DensityQuery, Method, MethodResult, Target};

const BRACKET_STEPS: usize = 200;

/// Unique c > 0 with Φ'(c) = t/x, relative tolerance 1e-12.
pub fn solve_saddle(phi: &BernsteinDescriptor, t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0 && x > 0.0) {
        return Err(Error::domain(format!("saddle needs t, x > 0, got t={t}, x={x}")));
    }
    let s = t / x;
    if s <= phi.drift {
        return Err(Error::domain(format!("t/x = {s} must exceed the drift b = {}", phi.drift)));
    }
    let p0 = phi.phi_prime_at_zero()?;
    if s >= p0 {
        return Err(Error::domain(format!("t/x = {s} must lie below Φ'(0+) = {p0}")));
    }
    let d = |c: f64| phi.deriv_real(1, c).map(|v| v - s);
    // Φ' is decreasing: d > 0 left of the root, d < 0 right of it.
    let (mut lo, mut hi) = (1e-12f64, 1e12f64);
    let mut steps = 0;
    while d(lo)? <= 0.0 {
        lo *= 0.5;
        steps += 1;
        if steps > BRACKET_STEPS || lo == 0.0 {
            return Err(Error::Convergence {
                message: format!("saddle bracket: Φ'(a) stays below t/x = {s} as a → 0"),
                partial: lo,
            });
        }
    }
    while d(hi)? >= 0.0 {
        hi *= 2.0;
        steps += 1;
        if steps > BRACKET_STEPS || !hi.is_finite() {
            return Err(Error::Convergence {
                message: format!("saddle bracket: Φ'(a) stays above t/x = {s} as a → ∞"),
                partial: hi,
            });
        }
    }
    // Bisection on log c, then secant polish.
    let (mut llo, mut lhi) = (lo.ln(), hi.ln());
    for _ in 0..200 {
        if lhi - llo < 1e-13 {
            break;
        }
        let mid = 0.5 * (llo + lhi);
        if d(mid.exp())? > 0.0 {
            llo = mid;
        } else {
            lhi = mid;
        }
    }
    let (a, b) = (llo.exp(), lhi.exp());
    let (fa, fb) = (d(a)?, d(b)?);
    let c = if fa != fb { a - fa * (b - a) / (fb - fa) } else { 0.5 * (a + b) };
    Ok(if c >= a && c <= b { c } else { 0.5 * (a + b) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// t/x close to the drift b.
    DriftEdge,
    Interior,
    /// t/x close to Φ'(0+).
    MeanEdge,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::DriftEdge => "drift_edge",
            Regime::Interior => "interior",
            Regime::MeanEdge => "mean_edge",
        }
    }
}

/// Where the pointwise regime lines are drawn.
#[derive(Debug, Clone, Copy)]
pub struct RegimeBands {
    /// Band width as a fraction of Φ'(0+) − b; with Φ'(0+) = ∞ the reference
    /// width is Φ'(1) − b and the upper line sits at b + width/delta.
    pub delta: f64,
}

impl Default for RegimeBands {
    fn default() -> Self {
        Self { delta: 0.05 }
    }
}

pub fn classify(phi: &BernsteinDescriptor, t: f64, x: f64, bands: RegimeBands) -> Result<Regime> {
    let s = t / x;
    let b = phi.drift;
    let p0 = phi.phi_prime_at_zero()?;
    let (lower, upper) = if p0.is_finite() {
        let w = bands.delta * (p0 - b);
        (b + w, p0 - w)
    } else {
        let width = phi.deriv_real(1, 1.0)? - b;
        (b + bands.delta * width, b + width / bands.delta)
    };
    Ok(if s < lower {
        Regime::DriftEdge
    } else if s > upper {
        Regime::MeanEdge
    } else {
        Regime::Interior
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SaddleSolution {
    pub c: f64,
    pub regime: Regime,
    /// Leading term; may underflow, see `mantissa` and `log_scale`.
    pub leading: f64,
    pub mantissa: f64,
    pub log_scale: f64,
    /// Relative error scale of the leading term.
    pub error_scale: f64,
}

impl SaddleSolution {
    pub fn to_result(&self) -> MethodResult {
        MethodResult::scaled(self.mantissa, self.error_scale * self.mantissa.abs(), self.log_scale, Method::Saddle)
            .with_diag("c", self.c)
            .with_diag("regime", self.regime.as_str())
            .with_diag("relative_error_scale", self.error_scale)
    }
}

fn ln_floor_e(v: f64) -> f64 {
    v.max(std::f64::consts::E).ln()
}

/// Rate √(ln x / x) in the interior, √(ln D)/D with D = c√(−Φ''(c)x) at
/// the edges.
pub fn error_scale(regime: Regime, x: f64, c: f64, minus_phi2: f64) -> f64 {
    match regime {
        Regime::Interior => (ln_floor_e(x) / x).sqrt(),
        _ => {
            let d = c * (minus_phi2 * x).sqrt();
            ln_floor_e(d).sqrt() / d
        }
    }
}

/// Leading term for the jump density f and its derivatives.
pub fn asymptotic_density(phi: &BernsteinDescriptor, query: &DensityQuery) -> Result<SaddleSolution> {
    asymptotic_density_with(phi, query, RegimeBands::default())
}

pub fn asymptotic_density_with(
    phi: &BernsteinDescriptor,
    query: &DensityQuery,
    bands: RegimeBands,
) -> Result<SaddleSolution> {
    if query.target != Target::F {
        return asymptotic_g_with(phi, query, bands);
    }
    leading(phi, query.x, query.t, query.k, query.l, true, bands)
}

fn leading(
    phi: &BernsteinDescriptor,
    x: f64,
    t: f64,
    k: u32,
    l: u32,
    with_dagger: bool,
    bands: RegimeBands,
) -> Result<SaddleSolution> {
    let c = solve_saddle(phi, t, x)?;
    let full = phi.phi_real(c)?;
    let dagger = full - phi.kill_rate - phi.drift * c;
    let minus_phi2 = -phi.deriv_real(2, c)?;
    if !(minus_phi2 > 0.0) {
        return Err(Error::Internal(format!("−Φ''({c}) = {minus_phi2} is not positive")));
    }
    if !with_dagger && dagger == 0.0 {
        return Err(Error::capability("Φ†(c) = 0: the exponent has no jump part"));
    }
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut mantissa =
        sign * full.powi(k as i32) * c.powi(l as i32 - 1) / (2.0 * PI * minus_phi2 * x).sqrt();
    if with_dagger {
        mantissa *= dagger;
    }
    let log_scale = c * t - x * full;
    let regime = classify(phi, t, x, bands)?;
    Ok(SaddleSolution {
        c,
        regime,
        leading: mantissa * log_scale.exp(),
        mantissa,
        log_scale,
        error_scale: error_scale(regime, x, c, minus_phi2),
    })
}

/// Leading terms for G, g, f_k and f_c.
pub fn asymptotic_g(phi: &BernsteinDescriptor, query: &DensityQuery) -> Result<SaddleSolution> {
    asymptotic_g_with(phi, query, RegimeBands::default())
}

pub fn asymptotic_g_with(phi: &BernsteinDescriptor, query: &DensityQuery, bands: RegimeBands) -> Result<SaddleSolution> {
    let (x, t, k, l) = (query.x, query.t, query.k, query.l);
    let scale = |mut s: SaddleSolution, c: f64| {
        s.mantissa *= c;
        s.leading *= c;
        s
    };
    match query.target {
        Target::F => leading(phi, x, t, k, l, true, bands),
        Target::Distribution => leading(phi, x, t, k, l, false, bands),
        Target::SubordinatorDensity => leading(phi, x, t, k, l + 1, false, bands),
        Target::Killed => Ok(scale(leading(phi, x, t, k, l, false, bands)?, phi.kill_rate)),
        Target::Creeping => Ok(scale(leading(phi, x, t, k, l + 1, false, bands)?, phi.drift)),
    }
}

/// One row of a schedule probe.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeRow {
    pub x: f64,
    pub t: f64,
    pub a_star: f64,
    pub regime: Regime,
    pub leading: f64,
    pub error_scale: f64,
    pub reference: Option<f64>,
    /// leading / reference, computed on mantissas.
    pub ratio: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
    /// Least-squares slope of ln|ratio − 1| against ln(error_scale).
    pub fitted_exponent: Option<f64>,
}

/// Least-squares slope of ys against xs.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Evaluates the leading term along t = t(x) and compares it with contour
/// inversion (when `reference` is given).
pub fn regime_schedule_probe(
    phi: &BernsteinDescriptor,
    target: Target,
    schedule: &dyn Fn(f64) -> f64,
    x_grid: &[f64],
    k: u32,
    l: u32,
    reference: Option<&ContourSpec>,
) -> Result<ProbeReport> {
    regime_schedule_probe_with(phi, target, schedule, x_grid, k, l, reference, RegimeBands::default())
}

#[allow(clippy::too_many_arguments)]
pub fn regime_schedule_probe_with(
    phi: &BernsteinDescriptor,
    target: Target,
    schedule: &dyn Fn(f64) -> f64,
    x_grid: &[f64],
    k: u32,
    l: u32,
    reference: Option<&ContourSpec>,
    bands: RegimeBands,
) -> Result<ProbeReport> {
    let mut rows = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let t = schedule(x);
        let query = DensityQuery::new(target, x, t).with_orders(k, l);
        let sol = asymptotic_g_with(phi, &query, bands)?;
        let mut row = ProbeRow {
            x,
            t,
            a_star: sol.c,
            regime: sol.regime,
            leading: sol.leading,
            error_scale: sol.error_scale,
            reference: None,
            ratio: None,
            error: None,
        };
        if let Some(spec) = reference {
            match contour::invert(phi, &query, spec) {
                Ok(r) => {
                    row.reference = Some(r.value);
                    row.ratio = Some(sol.mantissa / r.mantissa * (sol.log_scale - r.log_scale).exp());
                }
                Err(e) => row.error = Some(e.to_string()),
            }
        }
        rows.push(row);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| {
            let dev = (r.ratio? - 1.0).abs();
            (dev > 0.0).then(|| (r.error_scale.ln(), dev.ln()))
        })
        .unzip();
    Ok(ProbeReport {
        fitted_exponent: ls_slope(&xs, &ys),
        rows,
    })
}
