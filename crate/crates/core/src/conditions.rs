//! Numerical probes of the regularity conditions on Φ.
//!
//! All conditions are asymptotic; a finite grid can only support or cast
//! doubt on them. Verdicts look at the upper half of the grid (the lower
//! half for conditions at zero): the extreme ratio there, and the log-log
//! trend.

use std::collections::BTreeMap;
use std::f64::consts::E;

use rayon::prelude::*;
use serde::Serialize;

use crate::bernstein::BernsteinDescriptor;
use crate::error::{Error, Result};
use crate::saddle::{ls_slope, solve_saddle};
use crate::series::log_grid;

/// Slopes above this are read as growth.
const GROWTH_SLOPE: f64 = 0.05;
/// Slopes within ±this are read as flat.
const FLAT_SLOPE: f64 = 0.01;
/// Relative margin that separates a ratio from its threshold.
const MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ConditionId {
    A1,
    A2,
    A2prime,
    A2star,
    DR,
    /// e^{−1}Δ(x) ≤ −Φ''(x) ≤ Δ(x) + e^{−1}x^{−2}μ̄(1/x).
    Phi2Sandwich,
    /// Side conditions on a* along a schedule approaching Φ'(0+).
    AddCondi,
}

impl ConditionId {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConditionId::A1 => "A1",
            ConditionId::A2 => "A2",
            ConditionId::A2prime => "A2prime",
            ConditionId::A2star => "A2star",
            ConditionId::DR => "DR",
            ConditionId::Phi2Sandwich => "phi2_sandwich",
            ConditionId::AddCondi => "add_condi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Supported,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Supported => "supported",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub condition_id: ConditionId,
    pub probe_grid: Vec<f64>,
    pub ratio_values: Vec<f64>,
    pub verdict: Verdict,
    /// Empirical liminf/limsup; +∞ when the ratio is diverging.
    pub estimate: f64,
    /// Least-squares slope of ln(ratio) against ln(x) over the judged half.
    pub trend: Option<f64>,
    /// Further named series aligned with `probe_grid`.
    pub extra: BTreeMap<String, Vec<f64>>,
}

/// 24 log-spaced points in [10, 10⁷].
pub fn default_grid() -> Vec<f64> {
    log_grid(10.0, 1e7, 24)
}

/// 24 log-spaced points in [10⁻⁷, 10⁻¹], used for conditions at zero.
pub fn default_grid_at_zero() -> Vec<f64> {
    log_grid(1e-7, 0.1, 24)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 4 {
        return Err(Error::domain(format!("a condition grid needs at least 4 points, got {}", grid.len())));
    }
    if grid.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::domain("grid points must be positive and finite"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("grid must be strictly increasing"));
    }
    Ok(())
}

fn evaluate<F>(grid: &[f64], f: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    grid.par_iter().map(|&x| f(x)).collect()
}

/// The half of the grid that is closest to the limit point.
fn judged_half(grid: &[f64], at_zero: bool) -> std::ops::Range<usize> {
    let n = grid.len();
    if at_zero {
        0..n.div_ceil(2)
    } else {
        n / 2..n
    }
}

/// Trend of the ratio as the limit point is approached: positive means
/// growing towards the limit.
struct Trend {
    slope: Option<f64>,
    towards_limit_up: bool,
    towards_limit_down: bool,
}

fn trend(grid: &[f64], ratios: &[f64], at_zero: bool) -> Trend {
    let r = judged_half(grid, at_zero);
    let mut xs: Vec<f64> = grid[r.clone()].iter().map(|x| x.ln()).collect();
    let mut ys: Vec<f64> = ratios[r].to_vec();
    if at_zero {
        // Orient so that the limit is approached left to right.
        xs = xs.iter().rev().map(|x| -x).collect();
        ys.reverse();
    }
    let positive = ys.iter().all(|&y| y > 0.0);
    let slope = if positive {
        let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
        ls_slope(&xs, &ly)
    } else {
        None
    };
    Trend {
        slope,
        towards_limit_up: ys.windows(2).all(|w| w[1] > w[0]),
        towards_limit_down: ys.windows(2).all(|w| w[1] < w[0]),
    }
}

/// Verdict for liminf ratio > 0 (or > `threshold`).
fn judge_liminf(grid: &[f64], ratios: &[f64], threshold: f64, at_zero: bool) -> (Verdict, f64, Option<f64>) {
    let r = judged_half(grid, at_zero);
    let min = ratios[r].iter().copied().fold(f64::INFINITY, f64::min);
    let tr = trend(grid, ratios, at_zero);
    let Some(slope) = tr.slope else {
        let verdict = if min <= threshold { Verdict::Violated } else { Verdict::Inconclusive };
        return (verdict, min, None);
    };
    let above = min > threshold * (1.0 + MARGIN) && min > 0.0;
    if tr.towards_limit_up && slope > GROWTH_SLOPE {
        return (Verdict::Supported, f64::INFINITY, Some(slope));
    }
    let verdict = if above && slope > -FLAT_SLOPE {
        Verdict::Supported
    } else if tr.towards_limit_down && slope < -GROWTH_SLOPE {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    };
    (verdict, min, Some(slope))
}

/// Verdict for limsup ratio < ∞.
fn judge_limsup(grid: &[f64], ratios: &[f64], at_zero: bool) -> (Verdict, f64, Option<f64>) {
    let r = judged_half(grid, at_zero);
    let max = ratios[r].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tr = trend(grid, ratios, at_zero);
    let Some(slope) = tr.slope else {
        return (Verdict::Inconclusive, max, None);
    };
    if tr.towards_limit_up && slope > GROWTH_SLOPE {
        return (Verdict::Violated, f64::INFINITY, Some(slope));
    }
    let verdict = if max.is_finite() && slope < FLAT_SLOPE { Verdict::Supported } else { Verdict::Inconclusive };
    (verdict, max, Some(slope))
}

fn report(
    id: ConditionId,
    grid: &[f64],
    ratios: Vec<f64>,
    (verdict, estimate, trend): (Verdict, f64, Option<f64>),
) -> ConditionReport {
    ConditionReport {
        condition_id: id,
        probe_grid: grid.to_vec(),
        ratio_values: ratios,
        verdict,
        estimate,
        trend,
        extra: BTreeMap::new(),
    }
}

/// Δ(x) = ∫₀^{1/x} y² μ(dy).
pub fn delta(phi: &BernsteinDescriptor, x: f64) -> Result<f64> {
    phi.levy().delta(x)
}

/// x²Δ(x)/ln x; liminf must be positive.
pub fn check_a1(phi: &BernsteinDescriptor, grid: &[f64]) -> Result<ConditionReport> {
    check_grid(grid)?;
    if grid[0] < 1.0 {
        return Err(Error::domain("the A1 grid must start at x ≥ 1"));
    }
    let ratios = evaluate(grid, |x| Ok(x * x * delta(phi, x)? / x.ln()))?;
    let judged = judge_liminf(grid, &ratios, 0.0, false);
    Ok(report(ConditionId::A1, grid, ratios, judged))
}

/// xΦ'''(x)/(−Φ''(x)); limsup must be finite, as x → ∞ or x → 0.
pub fn check_a2(phi: &BernsteinDescriptor, grid: &[f64], at_zero: bool) -> Result<ConditionReport> {
    check_grid(grid)?;
    let ratios = evaluate(grid, |x| {
        let d2 = phi.deriv_real(2, x)?;
        let d3 = phi.deriv_real(3, x)?;
        if d2 == 0.0 {
            return Err(Error::Accuracy {
                message: format!("Φ''({x}) vanished; the A2 ratio is undefined"),
                achieved: 0.0,
            });
        }
        Ok(x * d3 / -d2)
    })?;
    let judged = judge_limsup(grid, &ratios, at_zero);
    let id = if at_zero { ConditionId::A2prime } else { ConditionId::A2 };
    Ok(report(id, grid, ratios, judged))
}

/// Φ''(2x)/Φ''(x) and x²Δ(x)/μ̄(1/x); both liminfs must be positive.
pub fn check_a2star_and_dr(phi: &BernsteinDescriptor, grid: &[f64]) -> Result<(ConditionReport, ConditionReport)> {
    check_grid(grid)?;
    let star = evaluate(grid, |x| Ok(phi.deriv_real(2, 2.0 * x)? / phi.deriv_real(2, x)?))?;
    let levy = phi.levy();
    let dr = evaluate(grid, |x| {
        let tail = levy.tail(1.0 / x)?;
        if tail == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(x * x * delta(phi, x)? / tail)
    })?;
    let judged_star = judge_liminf(grid, &star, 0.0, false);
    let judged_dr = judge_liminf(grid, &dr, 0.0, false);
    Ok((
        report(ConditionId::A2star, grid, star, judged_star),
        report(ConditionId::DR, grid, dr, judged_dr),
    ))
}

/// sup_{v ≥ 1} v²e^{−v}.
pub const UPPER_TAIL_CONST: f64 = 4.0 / (E * E);

/// Checks e^{−1}Δ(x) ≤ −Φ''(x) ≤ Δ(x) + 4e^{−2}x^{−2}μ̄(1/x) at every grid
/// point. The constant is sup_{v ≥ 1} v²e^{−v}; with e^{−1} in its place
/// the upper bound fails for a unit point mass at y = 2/x. The ratio is the
/// position of −Φ''(x) inside the band (0 at the lower bound, 1 at the
/// upper); `tol` is the relative slack allowed.
pub fn check_phi2_sandwich(phi: &BernsteinDescriptor, grid: &[f64], tol: f64) -> Result<ConditionReport> {
    check_grid(grid)?;
    let levy = phi.levy();
    let rows: Vec<(f64, f64, f64)> = grid
        .par_iter()
        .map(|&x| {
            let d = delta(phi, x)?;
            let m2 = -phi.deriv_real(2, x)?;
            let upper = d + UPPER_TAIL_CONST * levy.tail(1.0 / x)? / (x * x);
            Ok((d / E, m2, upper))
        })
        .collect::<Result<_>>()?;
    let mut ratios = Vec::with_capacity(rows.len());
    let mut violated = false;
    let mut worst = f64::INFINITY;
    for &(lower, mid, upper) in &rows {
        let slack = tol * upper.abs().max(f64::MIN_POSITIVE);
        if mid < lower - slack || mid > upper + slack {
            violated = true;
        }
        let width = upper - lower;
        ratios.push(if width > 0.0 { (mid - lower) / width } else { 0.5 });
        worst = worst.min((mid - lower).min(upper - mid) / upper.abs().max(f64::MIN_POSITIVE));
    }
    let mut rep = report(
        ConditionId::Phi2Sandwich,
        grid,
        ratios,
        (if violated { Verdict::Violated } else { Verdict::Supported }, worst, None),
    );
    rep.extra.insert("lower".into(), rows.iter().map(|r| r.0).collect());
    rep.extra.insert("minus_phi2".into(), rows.iter().map(|r| r.1).collect());
    rep.extra.insert("upper".into(), rows.iter().map(|r| r.2).collect());
    Ok(rep)
}

/// Probes, along t = t(x), the three limits
/// −xΦ''(a*)a*² → ∞, limsup −ln(a*)/x < ∞, e^{−δx}xΦ''(a*)a*² → 0
/// (δ ∈ {0.1, 1}), with a* = (Φ')⁻¹(t/x).
pub fn check_add_condi(
    phi: &BernsteinDescriptor,
    t_of_x: &(dyn Fn(f64) -> f64 + Sync),
    grid: &[f64],
) -> Result<ConditionReport> {
    check_grid(grid)?;
    let p0 = phi.phi_prime_at_zero()?;
    let rows: Vec<(f64, f64, f64)> = grid
        .par_iter()
        .map(|&x| {
            let t = t_of_x(x);
            let s = t / x;
            if !(s > phi.drift && s < p0) {
                return Err(Error::domain(format!(
                    "schedule leaves the admissible band at x = {x}: t/x = {s} not in ({}, {p0})",
                    phi.drift
                )));
            }
            let a = solve_saddle(phi, t, x)?;
            let main = -x * phi.deriv_real(2, a)? * a * a;
            Ok((a, main, -a.ln() / x))
        })
        .collect::<Result<_>>()?;
    let main: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let log_ratio: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let decayed = |d: f64| -> Vec<f64> { grid.iter().zip(&main).map(|(x, m)| (-d * x).exp() * m).collect() };
    let (d01, d1) = (decayed(0.1), decayed(1.0));

    let half = judged_half(grid, false);
    let tr = trend(grid, &main, false);
    let log_tr = trend(grid, &log_ratio, false);
    let log_bounded = !(log_tr.towards_limit_up && log_tr.slope.is_some_and(|s| s > GROWTH_SLOPE));
    let decays = |v: &[f64]| v[grid.len() - 1] == 0.0 || v[grid.len() - 1] < v[half.start];
    let (verdict, estimate) = if tr.towards_limit_down && tr.slope.is_some_and(|s| s < -GROWTH_SLOPE) {
        (Verdict::Violated, main[grid.len() - 1])
    } else if tr.towards_limit_up && log_bounded && decays(&d01) && decays(&d1) {
        (Verdict::Supported, f64::INFINITY)
    } else if !log_bounded {
        (Verdict::Violated, main[grid.len() - 1])
    } else {
        (Verdict::Inconclusive, main[grid.len() - 1])
    };
    let mut rep = report(ConditionId::AddCondi, grid, main, (verdict, estimate, tr.slope));
    rep.extra.insert("a_star".into(), rows.iter().map(|r| r.0).collect());
    rep.extra.insert("neg_ln_a_over_x".into(), log_ratio);
    rep.extra.insert("decayed_0.1".into(), d01);
    rep.extra.insert("decayed_1".into(), d1);
    Ok(rep)
}
