//! Laplace exponents of potentially killed subordinators.
//!
//! A [`BernsteinDescriptor`] stores the triple (kill rate `q`, drift `b`,
//! Lévy measure) and evaluates
//!
//! Φ(z) = q + b z + ∫₀^∞ (1 − e^{−zy}) μ(dy)
//!
//! together with Φ', Φ'', Φ''' on the closed right half-plane and, where a
//! sector extension is declared, on that sector. All complex powers and
//! logarithms use the principal branch, arg ∈ (−π, π].

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad::{self, MarchOptions, Tolerance};
use crate::special;

pub type C64 = Complex64;

/// Closed-sector or open-sector extension |arg z| ≤ half_angle (or <).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sector {
    pub half_angle: f64,
    pub closed: bool,
}

impl Sector {
    pub fn closed(half_angle: f64) -> Self {
        Self {
            half_angle,
            closed: true,
        }
    }

    pub fn open(half_angle: f64) -> Self {
        Self {
            half_angle,
            closed: false,
        }
    }

    pub fn contains_angle(&self, angle: f64) -> bool {
        let a = angle.abs();
        if self.closed {
            a <= self.half_angle
        } else {
            a < self.half_angle
        }
    }

    /// Whether the keyhole with opening `theta` fits: rays at ±(π − θ/2).
    pub fn admits_keyhole(&self, theta: f64) -> bool {
        self.contains_angle(PI - 0.5 * theta)
    }

    fn min(self, other: Sector) -> Sector {
        match self.half_angle.total_cmp(&other.half_angle) {
            std::cmp::Ordering::Less => self,
            std::cmp::Ordering::Greater => other,
            std::cmp::Ordering::Equal => Sector {
                half_angle: self.half_angle,
                closed: self.closed && other.closed,
            },
        }
    }
}

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A Lévy measure given only through a density, evaluated by quadrature.
#[derive(Clone)]
pub struct NumericLevy {
    density: DensityFn,
    support_upper: Option<f64>,
    rel_tol: f64,
    label: String,
}

impl fmt::Debug for NumericLevy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NumericLevy")
            .field("label", &self.label)
            .field("support_upper", &self.support_upper)
            .field("rel_tol", &self.rel_tol)
            .finish()
    }
}

/// 1 − e^{−w} without cancellation for small |w|.
pub fn one_minus_exp_neg(w: C64) -> C64 {
    if w.norm() < 0.5 {
        let mut term = w;
        let mut sum = w;
        for k in 2..40 {
            term = term * (-w) / k as f64;
            sum += term;
            if term.norm() < 1e-17 * sum.norm() {
                break;
            }
        }
        sum
    } else {
        C64::new(1.0, 0.0) - (-w).exp()
    }
}

// Largest substitution variable used near y = 0; y·e^{−s} underflows past it.
const S_MAX: f64 = 700.0;

impl NumericLevy {
    pub fn new(density: DensityFn, support_upper: Option<f64>, rel_tol: f64, label: impl Into<String>) -> Self {
        Self {
            density,
            support_upper,
            rel_tol,
            label: label.into(),
        }
    }

    pub fn density(&self, y: f64) -> f64 {
        match self.support_upper {
            Some(u) if y >= u => 0.0,
            _ if y <= 0.0 => 0.0,
            _ => (self.density)(y),
        }
    }

    pub fn support_upper(&self) -> Option<f64> {
        self.support_upper
    }

    fn march_opts(&self) -> MarchOptions {
        MarchOptions {
            tol: Tolerance::new(0.0, self.rel_tol),
            trunc_tol: self.rel_tol * 1e-4,
            max_panels: 2_000,
            min_panels: 2,
            quiet_panels: 3,
            max_intervals_per_panel: 400,
        }
    }

    /// ∫₀^{y1} g(y) dy through y = y1 e^{−s}, which flattens power
    /// singularities at the origin.
    fn integrate_near_zero<T, G>(&self, g: &G, y1: f64) -> Result<(T, f64)>
    where
        T: quad::QuadValue,
        G: Fn(f64) -> T,
    {
        let opts = MarchOptions {
            max_panels: S_MAX as usize,
            ..self.march_opts()
        };
        let m = quad::march(
            |s: f64| {
                let y = y1 * (-s).exp();
                g(y) * y
            },
            0.0,
            |_, _| 1.0,
            opts,
        );
        if m.panels >= opts.max_panels {
            return Err(Error::Integrability(format!(
                "{}: integrand not integrable at y = 0 (partial {:e})",
                self.label,
                m.value.norm()
            )));
        }
        if !m.converged {
            return Err(Error::Accuracy {
                message: format!("{}: quadrature near y = 0", self.label),
                achieved: m.error,
            });
        }
        Ok((m.value, m.error))
    }

    /// ∫_{y0}^{U} g(y) dy with U the support bound or ∞.
    fn integrate_away<T, G>(&self, g: &G, y0: f64) -> Result<(T, f64)>
    where
        T: quad::QuadValue,
        G: Fn(f64) -> T,
    {
        let tol = Tolerance::new(0.0, self.rel_tol);
        match self.support_upper {
            Some(u) => {
                if y0 >= u {
                    return Ok((T::zero(), 0.0));
                }
                let mut total = T::zero();
                let mut err = 0.0;
                let mut lo = y0;
                while lo < u {
                    let hi = (lo * 4.0).min(u);
                    let q = quad::adaptive(g, lo, hi, tol, 2_000);
                    if !q.converged {
                        return Err(Error::Accuracy {
                            message: format!("{}: quadrature on [{lo:e}, {hi:e}]", self.label),
                            achieved: q.error,
                        });
                    }
                    total = total + q.value;
                    err += q.error;
                    lo = hi;
                }
                Ok((total, err))
            }
            None => {
                let opts = MarchOptions {
                    max_panels: 1_000,
                    ..self.march_opts()
                };
                let m = quad::march(g, y0, |_, s| s.max(y0), opts);
                if m.panels >= opts.max_panels || !m.radius.is_finite() {
                    return Err(Error::Integrability(format!(
                        "{}: integrand not integrable at y = ∞",
                        self.label
                    )));
                }
                // A pessimistic estimate within a decade of the target is
                // accepted, as for the contour integrals.
                if !m.converged && m.error > 10.0 * self.rel_tol * m.value.norm().max(m.magnitude) {
                    return Err(Error::Accuracy {
                        message: format!("{}: quadrature towards y = ∞", self.label),
                        achieved: m.error,
                    });
                }
                Ok((m.value, m.error))
            }
        }
    }

    /// ∫_{y0}^∞ e^{−zy} h(y) dy for Re z > 0, with panels no wider than one
    /// period of e^{−i Im(z) y}. Returns the value, its error estimate and
    /// the |integrand| mass.
    fn integrate_oscillatory<H: Fn(f64) -> f64>(&self, h: &H, z: C64, y0: f64) -> Result<(C64, f64, f64)> {
        let period = if z.im != 0.0 { 2.0 * PI / z.im.abs() } else { f64::INFINITY };
        let opts = MarchOptions {
            max_panels: 20_000,
            ..self.march_opts()
        };
        let m = quad::march(|y: f64| (-z * y).exp() * h(y), y0, |_, s| s.max(y0).min(period), opts);
        if m.panels >= opts.max_panels {
            return Err(Error::Accuracy {
                message: format!("{}: oscillatory quadrature towards y = ∞ did not settle", self.label),
                achieved: m.error,
            });
        }
        Ok((m.value, m.error, m.magnitude))
    }

    /// Accuracy is judged against the |integrand| mass: for large |Im z|
    /// the transform is far smaller than that mass and no quadrature in
    /// double precision resolves it to a relative tolerance.
    fn check_total(&self, value: C64, error: f64, mass: f64) -> Result<C64> {
        if error > self.rel_tol * value.norm().max(mass) {
            return Err(Error::Accuracy {
                message: format!("{}: quadrature of the transform", self.label),
                achieved: error,
            });
        }
        Ok(value)
    }

    /// ∫₀^U g(y) dy split at `split`.
    fn integrate_full<T, G>(&self, g: &G, split: f64) -> Result<T>
    where
        T: quad::QuadValue,
        G: Fn(f64) -> T,
    {
        let split = match self.support_upper {
            Some(u) => split.min(u),
            None => split,
        };
        let (near, _) = self.integrate_near_zero(g, split)?;
        let (far, _) = self.integrate_away(g, split)?;
        Ok(near + far)
    }

    /// n = 0: ∫(1 − e^{−zy}) m(y) dy; n ≥ 1: (−1)^{n−1} ∫ y^n e^{−zy} m(y) dy.
    pub fn transform(&self, n: u8, z: C64) -> Result<C64> {
        if z.re < 0.0 {
            return Err(Error::domain(format!(
                "{}: numerical exponent needs Re z ≥ 0, got {z}",
                self.label
            )));
        }
        let split = if z.norm() > 0.0 { 1.0 / z.norm() } else { 1.0 };
        // Far from the origin e^{−zy} oscillates; split it off from the
        // slowly decaying non-oscillating part.
        if self.support_upper.is_none() && z.re > 0.0 && z.im != 0.0 {
            if n == 0 {
                let g = |y: f64| one_minus_exp_neg(z * y) * self.density(y);
                let (near, e1) = self.integrate_near_zero(&g, split)?;
                let (tail, e2) = self.integrate_away(&|y: f64| self.density(y), split)?;
                let (osc, e3, mass) = self.integrate_oscillatory(&|y: f64| self.density(y), z, split)?;
                return self.check_total(near + tail - osc, e1 + e2 + e3, near.norm() + tail.abs() + mass);
            }
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            let h = |y: f64| y.powi(n as i32) * self.density(y);
            let g = |y: f64| (-z * y).exp() * h(y);
            let (near, e1) = self.integrate_near_zero(&g, split)?;
            let (far, e2, mass) = self.integrate_oscillatory(&h, z, split)?;
            return Ok(self.check_total(near + far, e1 + e2, near.norm() + mass)? * sign);
        }
        if n == 0 {
            if z == C64::new(0.0, 0.0) {
                return Ok(C64::new(0.0, 0.0));
            }
            let g = |y: f64| one_minus_exp_neg(z * y) * self.density(y);
            self.integrate_full(&g, split)
        } else {
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            let g = |y: f64| (-z * y).exp() * (y.powi(n as i32) * self.density(y));
            Ok(self.integrate_full(&g, split)? * sign)
        }
    }

    pub fn tail(&self, t: f64) -> Result<f64> {
        let g = |y: f64| self.density(y);
        if t <= 0.0 {
            return self.integrate_full(&g, 1.0).or_else(|e| match e {
                Error::Integrability(_) => Ok(f64::INFINITY),
                other => Err(other),
            });
        }
        Ok(self.integrate_away(&g, t)?.0)
    }

    /// ∫₀^{min(1/x, U)} y² m(y) dy.
    pub fn delta(&self, x: f64) -> Result<f64> {
        let upper = match self.support_upper {
            Some(u) => (1.0 / x).min(u),
            None => 1.0 / x,
        };
        let g = |y: f64| y * y * self.density(y);
        Ok(self.integrate_near_zero(&g, upper)?.0)
    }

    /// ∫₀^ε y m(y) dy.
    pub fn mean_below(&self, eps: f64) -> Result<f64> {
        let upper = match self.support_upper {
            Some(u) => eps.min(u),
            None => eps,
        };
        let g = |y: f64| y * self.density(y);
        Ok(self.integrate_near_zero(&g, upper)?.0)
    }

    /// ∫ y^n m(y) dy, +∞ when divergent.
    fn moment(&self, n: i32) -> Result<f64> {
        let g = |y: f64| y.powi(n) * self.density(y);
        match self.integrate_full(&g, 1.0) {
            Ok(v) => Ok(v),
            Err(Error::Integrability(_)) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }
}

/// The jump part Φ†(z) = Φ(z) − q − b z.
#[derive(Debug, Clone)]
pub enum JumpPart {
    /// No jumps: pure drift and/or killing.
    Zero,
    /// z^α.
    Stable { alpha: f64 },
    /// (λ + z)^α − λ^α.
    TemperedStable { alpha: f64, lambda: f64 },
    /// log(1 + z), Lévy density e^{−y}/y.
    Gamma,
    /// rate · (1 − e^{−size·z}), a single jump size.
    PointJump { rate: f64, size: f64 },
    Density(Arc<NumericLevy>),
    /// Φ_inner(z^α) − q_inner.
    PowerComposition { alpha: f64, inner: Arc<BernsteinDescriptor> },
    Sum(Vec<JumpPart>),
}

fn falling(alpha: f64, n: u8) -> f64 {
    (0..n).fold(1.0, |acc, i| acc * (alpha - i as f64))
}

impl JumpPart {
    /// n-th derivative of the jump part (n = 0 is the value).
    fn eval(&self, n: u8, z: C64) -> Result<C64> {
        let one = C64::new(1.0, 0.0);
        Ok(match self {
            JumpPart::Zero => C64::new(0.0, 0.0),
            JumpPart::Stable { alpha } => {
                if n == 0 {
                    z.powf(*alpha)
                } else {
                    z.powf(*alpha - n as f64) * falling(*alpha, n)
                }
            }
            JumpPart::TemperedStable { alpha, lambda } => {
                let w = z + *lambda;
                if n == 0 {
                    w.powf(*alpha) - lambda.powf(*alpha)
                } else {
                    w.powf(*alpha - n as f64) * falling(*alpha, n)
                }
            }
            JumpPart::Gamma => {
                let w = one + z;
                match n {
                    0 => w.ln(),
                    _ => {
                        let fact = (1..n).map(|k| k as f64).product::<f64>();
                        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                        w.powi(-(n as i32)) * (sign * fact)
                    }
                }
            }
            JumpPart::PointJump { rate, size } => {
                if n == 0 {
                    one_minus_exp_neg(z * *size) * *rate
                } else {
                    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                    (-z * *size).exp() * (sign * rate * size.powi(n as i32))
                }
            }
            JumpPart::Density(levy) => levy.transform(n, z)?,
            JumpPart::PowerComposition { alpha, inner } => {
                let a = *alpha;
                let u = z.powf(a);
                if n == 0 {
                    return Ok(inner.phi(u)? - inner.kill_rate);
                }
                let d1 = z.powf(a - 1.0) * a;
                let p1 = inner.deriv(1, u)?;
                match n {
                    1 => p1 * d1,
                    2 => {
                        let d2 = z.powf(a - 2.0) * (a * (a - 1.0));
                        inner.deriv(2, u)? * d1 * d1 + p1 * d2
                    }
                    3 => {
                        let d2 = z.powf(a - 2.0) * (a * (a - 1.0));
                        let d3 = z.powf(a - 3.0) * falling(a, 3);
                        inner.deriv(3, u)? * d1 * d1 * d1 + inner.deriv(2, u)? * d1 * d2 * 3.0 + p1 * d3
                    }
                    _ => return Err(Error::domain("derivatives above order 3 are not provided")),
                }
            }
            JumpPart::Sum(parts) => {
                let mut acc = C64::new(0.0, 0.0);
                for p in parts {
                    acc += p.eval(n, z)?;
                }
                acc
            }
        })
    }

    pub(crate) fn tail(&self, t: f64) -> Result<f64> {
        match self {
            JumpPart::Zero => Ok(0.0),
            JumpPart::Stable { alpha } => Ok(t.powf(-alpha) / special::gamma(1.0 - alpha)),
            JumpPart::TemperedStable { alpha, lambda } => {
                let c = alpha / special::gamma(1.0 - alpha);
                Ok(c * lambda.powf(*alpha) * special::upper_incomplete_gamma(-alpha, lambda * t)?)
            }
            JumpPart::Gamma => special::exp_integral_e1(t),
            JumpPart::PointJump { rate, size } => Ok(if t < *size { *rate } else { 0.0 }),
            JumpPart::Density(levy) => levy.tail(t),
            JumpPart::PowerComposition { .. } => Err(Error::capability(
                "Lévy tail of a power composition has no direct evaluator; use the contour route",
            )),
            JumpPart::Sum(parts) => parts.iter().map(|p| p.tail(t)).sum(),
        }
    }

    fn density(&self, y: f64) -> Option<f64> {
        if y <= 0.0 {
            return Some(0.0);
        }
        match self {
            JumpPart::Zero => Some(0.0),
            JumpPart::Stable { alpha } => Some(alpha * y.powf(-1.0 - alpha) / special::gamma(1.0 - alpha)),
            JumpPart::TemperedStable { alpha, lambda } => {
                Some(alpha * y.powf(-1.0 - alpha) * (-lambda * y).exp() / special::gamma(1.0 - alpha))
            }
            JumpPart::Gamma => Some((-y).exp() / y),
            JumpPart::PointJump { .. } => None,
            JumpPart::Density(levy) => Some(levy.density(y)),
            JumpPart::PowerComposition { .. } => None,
            JumpPart::Sum(parts) => parts.iter().map(|p| p.density(y)).sum(),
        }
    }

    fn delta(&self, x: f64) -> Result<f64> {
        match self {
            JumpPart::Zero => Ok(0.0),
            JumpPart::Stable { alpha } => {
                Ok(alpha * x.powf(alpha - 2.0) / ((2.0 - alpha) * special::gamma(1.0 - alpha)))
            }
            JumpPart::TemperedStable { alpha, lambda } => {
                let c = alpha / special::gamma(1.0 - alpha);
                Ok(c * lambda.powf(alpha - 2.0) * special::lower_incomplete_gamma(2.0 - alpha, lambda / x)?)
            }
            JumpPart::Gamma => special::lower_incomplete_gamma(2.0, 1.0 / x),
            JumpPart::PointJump { rate, size } => Ok(if *size <= 1.0 / x { rate * size * size } else { 0.0 }),
            JumpPart::Density(levy) => levy.delta(x),
            JumpPart::PowerComposition { .. } => Err(Error::capability(
                "truncated moment of a power composition has no direct evaluator; use the contour route",
            )),
            JumpPart::Sum(parts) => parts.iter().map(|p| p.delta(x)).sum(),
        }
    }

    pub(crate) fn mean_below(&self, eps: f64) -> Result<f64> {
        match self {
            JumpPart::Zero => Ok(0.0),
            JumpPart::Stable { alpha } => {
                Ok(alpha * eps.powf(1.0 - alpha) / ((1.0 - alpha) * special::gamma(1.0 - alpha)))
            }
            JumpPart::TemperedStable { alpha, lambda } => {
                let c = alpha / special::gamma(1.0 - alpha);
                Ok(c * lambda.powf(alpha - 1.0) * special::lower_incomplete_gamma(1.0 - alpha, lambda * eps)?)
            }
            JumpPart::Gamma => Ok(-(-eps).exp_m1()),
            JumpPart::PointJump { rate, size } => Ok(if *size <= eps { rate * size } else { 0.0 }),
            JumpPart::Density(levy) => levy.mean_below(eps),
            JumpPart::PowerComposition { .. } => Err(Error::capability("no small-jump moment for a power composition")),
            JumpPart::Sum(parts) => parts.iter().map(|p| p.mean_below(eps)).sum(),
        }
    }

    pub(crate) fn support_upper(&self) -> Option<f64> {
        match self {
            JumpPart::Zero => Some(0.0),
            JumpPart::PointJump { size, .. } => Some(*size),
            JumpPart::Density(levy) => levy.support_upper(),
            JumpPart::Sum(parts) => parts
                .iter()
                .map(|p| p.support_upper())
                .try_fold(0.0f64, |acc, u| u.map(|u| acc.max(u))),
            _ => None,
        }
    }

    /// (Φ†)'(0+) = ∫ y μ(dy), possibly +∞.
    fn first_moment(&self) -> Result<f64> {
        match self {
            JumpPart::Zero => Ok(0.0),
            JumpPart::Stable { .. } => Ok(f64::INFINITY),
            JumpPart::TemperedStable { alpha, lambda } => Ok(alpha * lambda.powf(alpha - 1.0)),
            JumpPart::Gamma => Ok(1.0),
            JumpPart::PointJump { rate, size } => Ok(rate * size),
            JumpPart::Density(levy) => levy.moment(1),
            JumpPart::PowerComposition { alpha, inner } => {
                if *alpha == 1.0 {
                    inner.phi_prime_at_zero().map(|v| v - inner.drift)
                } else if inner.phi_prime_at_zero()? > 0.0 {
                    Ok(f64::INFINITY)
                } else {
                    Ok(0.0)
                }
            }
            JumpPart::Sum(parts) => parts.iter().map(|p| p.first_moment()).sum(),
        }
    }

    /// Φ''(0+) = −∫ y² μ(dy), possibly −∞.
    fn second_at_zero(&self) -> Result<f64> {
        match self {
            JumpPart::Zero => Ok(0.0),
            JumpPart::Stable { .. } => Ok(f64::NEG_INFINITY),
            JumpPart::TemperedStable { alpha, lambda } => Ok(alpha * (alpha - 1.0) * lambda.powf(alpha - 2.0)),
            JumpPart::Gamma => Ok(-1.0),
            JumpPart::PointJump { rate, size } => Ok(-rate * size * size),
            JumpPart::Density(levy) => levy.moment(2).map(|m| -m),
            JumpPart::PowerComposition { alpha, inner } => {
                if *alpha == 1.0 {
                    inner.phi_second_at_zero()
                } else {
                    Ok(f64::NEG_INFINITY)
                }
            }
            JumpPart::Sum(parts) => parts.iter().map(|p| p.second_at_zero()).sum(),
        }
    }

    fn total_mass(&self) -> f64 {
        match self {
            JumpPart::Zero => 0.0,
            JumpPart::PointJump { rate, .. } => *rate,
            JumpPart::Density(levy) => levy.tail(0.0).unwrap_or(f64::INFINITY),
            JumpPart::Sum(parts) => parts.iter().map(|p| p.total_mass()).sum(),
            _ => f64::INFINITY,
        }
    }
}

/// A potentially killed subordinator described by its Laplace exponent.
#[derive(Debug, Clone)]
pub struct BernsteinDescriptor {
    pub kill_rate: f64,
    pub drift: f64,
    pub jump: JumpPart,
    /// Declared holomorphic extension beyond the right half-plane.
    pub sector: Option<Sector>,
    /// Declared complete Bernstein function.
    pub complete: bool,
    pub label: String,
}

fn check_unit_interval(name: &str, alpha: f64, allow_one: bool) -> Result<()> {
    let ok = alpha > 0.0 && (alpha < 1.0 || (allow_one && alpha == 1.0));
    if ok {
        Ok(())
    } else {
        let range = if allow_one { "(0, 1]" } else { "(0, 1)" };
        Err(Error::domain(format!("{name} must lie in {range}, got {alpha}")))
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be a finite nonnegative number, got {v}")))
    }
}

impl BernsteinDescriptor {
    /// Φ(z) = z^α.
    pub fn stable(alpha: f64) -> Result<Self> {
        check_unit_interval("alpha", alpha, false)?;
        Ok(Self {
            kill_rate: 0.0,
            drift: 0.0,
            jump: JumpPart::Stable { alpha },
            sector: Some(Sector::closed(PI)),
            complete: true,
            label: format!("stable({alpha})"),
        })
    }

    /// Φ(z) = (λ + z)^α − λ^α.
    pub fn tempered_stable(alpha: f64, lambda: f64) -> Result<Self> {
        check_unit_interval("alpha", alpha, false)?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self {
            kill_rate: 0.0,
            drift: 0.0,
            jump: JumpPart::TemperedStable { alpha, lambda },
            sector: Some(Sector::closed(PI)),
            complete: true,
            label: format!("tempered_stable({alpha}, {lambda})"),
        })
    }

    /// Φ(z) = log(1 + z). Holomorphic off (−∞, −1], so every sector of
    /// half-angle below π is admissible but π itself is not.
    pub fn gamma() -> Self {
        Self {
            kill_rate: 0.0,
            drift: 0.0,
            jump: JumpPart::Gamma,
            sector: Some(Sector::open(PI)),
            complete: true,
            label: "gamma".into(),
        }
    }

    /// Φ(z) = rate · (1 − e^{−size·z}): compound Poisson with a single jump size.
    pub fn point_jump(rate: f64, size: f64) -> Result<Self> {
        if !(rate > 0.0 && size > 0.0) {
            return Err(Error::domain(format!("point_jump needs rate, size > 0, got {rate}, {size}")));
        }
        Ok(Self {
            kill_rate: 0.0,
            drift: 0.0,
            jump: JumpPart::PointJump { rate, size },
            sector: None,
            complete: false,
            label: format!("point_jump({rate}, {size})"),
        })
    }

    /// Pure drift and killing, no jumps.
    pub fn drift_only(drift: f64, kill: f64) -> Result<Self> {
        check_nonneg("drift", drift)?;
        check_nonneg("kill", kill)?;
        Ok(Self {
            kill_rate: kill,
            drift,
            jump: JumpPart::Zero,
            sector: Some(Sector::closed(PI)),
            complete: true,
            label: format!("drift({drift}, {kill})"),
        })
    }

    /// Exponent built from a Lévy density by quadrature of the integral
    /// representation, relative tolerance `rel_tol`.
    pub fn from_levy_density(
        density: DensityFn,
        drift: f64,
        kill: f64,
        support_upper: Option<f64>,
        rel_tol: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        check_nonneg("drift", drift)?;
        check_nonneg("kill", kill)?;
        if let Some(u) = support_upper {
            if !(u > 0.0) {
                return Err(Error::domain(format!("support_upper must be positive, got {u}")));
            }
        }
        let label = label.into();
        let levy = NumericLevy::new(density, support_upper, rel_tol, label.clone());
        // Integrability of min(y, 1) against the measure.
        let near = |y: f64| y * levy.density(y);
        levy.integrate_near_zero(&near, support_upper.map_or(1.0, |u| u.min(1.0)))?;
        if support_upper.is_none_or(|u| u > 1.0) {
            levy.integrate_away(&|y: f64| levy.density(y), 1.0)?;
        }
        Ok(Self {
            kill_rate: kill,
            drift,
            jump: JumpPart::Density(Arc::new(levy)),
            sector: None,
            complete: false,
            label,
        })
    }

    /// Adds to the drift.
    pub fn add_drift(mut self, b: f64) -> Result<Self> {
        check_nonneg("drift", b)?;
        self.drift += b;
        self.label = format!("{} + drift({b})", self.label);
        Ok(self)
    }

    /// Adds to the killing rate.
    pub fn add_kill(mut self, q: f64) -> Result<Self> {
        check_nonneg("kill", q)?;
        self.kill_rate += q;
        self.label = format!("{} + kill({q})", self.label);
        Ok(self)
    }

    /// Φ_1 + Φ_2 + ...
    pub fn sum(parts: Vec<BernsteinDescriptor>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::domain("sum needs at least one operand"));
        }
        let kill_rate = parts.iter().map(|p| p.kill_rate).sum();
        let drift = parts.iter().map(|p| p.drift).sum();
        let sector = parts
            .iter()
            .map(|p| p.sector)
            .try_fold(Sector::closed(PI), |acc, s| s.map(|s| acc.min(s)));
        let complete = parts.iter().all(|p| p.complete);
        let label = parts.iter().map(|p| p.label.as_str()).collect::<Vec<_>>().join(" + ");
        Ok(Self {
            kill_rate,
            drift,
            jump: JumpPart::Sum(parts.into_iter().map(|p| p.jump).collect()),
            sector,
            complete,
            label,
        })
    }

    /// z ↦ Φ(z^α). A sector of half-angle ω for Φ becomes one of ω/α
    /// (capped at π); without a declared sector Φ lives on the closed
    /// right half-plane, ω = π/2.
    pub fn power_composition(alpha: f64, inner: BernsteinDescriptor) -> Result<Self> {
        check_unit_interval("alpha", alpha, true)?;
        if alpha == 1.0 {
            return Ok(inner);
        }
        let inner_sector = inner.sector.unwrap_or(Sector::closed(FRAC_PI_2));
        let stretched = inner_sector.half_angle / alpha;
        let sector = if stretched > PI {
            Sector::closed(PI)
        } else {
            Sector {
                half_angle: stretched,
                closed: inner_sector.closed,
            }
        };
        let sector = (sector.half_angle > FRAC_PI_2).then_some(sector);
        Ok(Self {
            kill_rate: inner.kill_rate,
            drift: 0.0,
            complete: inner.complete,
            label: format!("({})∘z^{alpha}", inner.label),
            sector,
            jump: JumpPart::PowerComposition {
                alpha,
                inner: Arc::new(inner),
            },
        })
    }

    pub fn with_sector(mut self, sector: Option<Sector>) -> Self {
        self.sector = sector;
        self
    }

    pub fn with_complete(mut self, complete: bool) -> Self {
        self.complete = complete;
        self
    }

    /// Continuous extension to the closed upper half-plane, i.e. a sector
    /// that is closed at angle π.
    pub fn has_halfplane_extension(&self) -> bool {
        matches!(self.sector, Some(s) if s.closed && s.half_angle >= PI)
    }

    /// `Some(alpha)` when Φ(z) = z^α exactly (no drift, no killing).
    pub fn pure_stable_alpha(&self) -> Option<f64> {
        match self.jump {
            JumpPart::Stable { alpha } if self.kill_rate == 0.0 && self.drift == 0.0 => Some(alpha),
            _ => None,
        }
    }

    pub fn check_domain(&self, z: C64) -> Result<()> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::domain(format!("non-finite argument {z}")));
        }
        if z.re >= 0.0 {
            return Ok(());
        }
        match self.sector {
            Some(s) if s.contains_angle(z.arg()) => Ok(()),
            Some(s) => Err(Error::domain(format!(
                "{}: z = {z} lies outside the declared sector |arg z| {} {}",
                self.label,
                if s.closed { "≤" } else { "<" },
                s.half_angle
            ))),
            None => Err(Error::domain(format!(
                "{}: z = {z} has Re z < 0 and no sector extension is declared",
                self.label
            ))),
        }
    }

    /// Φ(z).
    pub fn phi(&self, z: C64) -> Result<C64> {
        self.check_domain(z)?;
        Ok(self.jump.eval(0, z)? + self.kill_rate + z * self.drift)
    }

    /// Φ†(z) = Φ(z) − q − b z.
    pub fn phi_dagger(&self, z: C64) -> Result<C64> {
        self.check_domain(z)?;
        self.jump.eval(0, z)
    }

    /// Φ^{(n)}(z) for n ∈ {0, 1, 2, 3}.
    pub fn deriv(&self, n: u8, z: C64) -> Result<C64> {
        if n == 0 {
            return self.phi(z);
        }
        if n > 3 {
            return Err(Error::domain("derivatives above order 3 are not provided"));
        }
        self.check_domain(z)?;
        if z.norm() == 0.0 {
            return Err(Error::domain("derivatives are evaluated at z ≠ 0; use the limits at 0+"));
        }
        let jump = self.jump.eval(n, z)?;
        Ok(if n == 1 { jump + self.drift } else { jump })
    }

    pub fn phi_real(&self, x: f64) -> Result<f64> {
        Ok(self.phi(C64::new(x, 0.0))?.re)
    }

    pub fn deriv_real(&self, n: u8, x: f64) -> Result<f64> {
        Ok(self.deriv(n, C64::new(x, 0.0))?.re)
    }

    /// Φ'(0+), possibly +∞.
    pub fn phi_prime_at_zero(&self) -> Result<f64> {
        Ok(self.drift + self.jump.first_moment()?)
    }

    /// Φ''(0+), possibly −∞.
    pub fn phi_second_at_zero(&self) -> Result<f64> {
        self.jump.second_at_zero()
    }

    pub fn levy(&self) -> LevyMeasure<'_> {
        LevyMeasure { jump: &self.jump }
    }
}

/// Read-only view of the Lévy measure of a descriptor.
#[derive(Debug, Clone, Copy)]
pub struct LevyMeasure<'a> {
    jump: &'a JumpPart,
}

impl LevyMeasure<'_> {
    /// μ̄(t) = μ((t, ∞)).
    pub fn tail(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::domain(format!("tail needs t > 0, got {t}")));
        }
        self.jump.tail(t)
    }

    /// Density of the measure when it has one.
    pub fn density(&self, y: f64) -> Option<f64> {
        self.jump.density(y)
    }

    /// Δ(x) = ∫₀^{1/x} y² μ(dy).
    pub fn delta(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::domain(format!("Δ needs x > 0, got {x}")));
        }
        self.jump.delta(x)
    }

    /// ∫₀^ε y μ(dy), the mean contribution of jumps below ε.
    pub fn mean_below(&self, eps: f64) -> Result<f64> {
        self.jump.mean_below(eps)
    }

    pub fn support_upper(&self) -> Option<f64> {
        self.jump.support_upper()
    }

    /// μ̄(0+) in [0, ∞].
    pub fn total_mass(&self) -> f64 {
        self.jump.total_mass()
    }

    pub fn jump_part(&self) -> &JumpPart {
        self.jump
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn stable_values() {
        let d = BernsteinDescriptor::stable(0.5).unwrap();
        assert_relative_eq!(d.phi_real(4.0).unwrap(), 2.0, max_relative = 1e-15);
        assert_relative_eq!(d.levy().tail(1.0).unwrap(), 1.0 / PI.sqrt(), max_relative = 1e-14);
        let v = d.phi(c(0.0, 1.0)).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v - c(h, h)).norm() < 1e-15);
        assert_eq!(d.phi(c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        assert!(BernsteinDescriptor::stable(1.0).is_err());
        assert!(BernsteinDescriptor::stable(0.0).is_err());
    }

    #[test]
    fn stable_real_part_dominates() {
        let d = BernsteinDescriptor::stable(0.7).unwrap();
        assert!(d.phi(c(1.0, 1.0)).unwrap().re >= d.phi_real(1.0).unwrap());
    }

    #[test]
    fn tempered_values_and_branch() {
        let d = BernsteinDescriptor::tempered_stable(0.5, 1.0).unwrap();
        assert_relative_eq!(d.phi_real(3.0).unwrap(), 1.0, max_relative = 1e-15);
        assert_eq!(d.phi_real(0.0).unwrap(), 0.0);
        // Upper edge of the cut at −ρ, ρ > λ: (λ − ρ)^{1/2} = i (ρ − λ)^{1/2}.
        let rho = 3.0;
        let v = d.phi(c(-rho, 0.0)).unwrap();
        assert_relative_eq!(v.im, (rho - 1.0).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(v.re, -1.0, max_relative = 1e-14);
    }

    #[test]
    fn tempered_derivative_matches_finite_difference() {
        let d = BernsteinDescriptor::tempered_stable(0.6, 2.0).unwrap();
        let h = 1e-5;
        let fd = (d.phi_real(1.0 + h).unwrap() - d.phi_real(1.0 - h).unwrap()) / (2.0 * h);
        assert_relative_eq!(d.deriv_real(1, 1.0).unwrap(), fd, max_relative = 1e-8);
    }

    #[test]
    fn gamma_values() {
        let d = BernsteinDescriptor::gamma();
        assert_relative_eq!(d.phi_real(std::f64::consts::E - 1.0).unwrap(), 1.0, max_relative = 1e-15);
        assert_eq!(d.phi_prime_at_zero().unwrap(), 1.0);
        assert_relative_eq!(-d.deriv_real(2, 1.0).unwrap(), 0.25, max_relative = 1e-15);
        assert!(d.sector.unwrap().half_angle == PI && !d.sector.unwrap().closed);
        assert!(!d.has_halfplane_extension());
        assert!(d.phi(c(-2.0, 0.0)).is_err());
    }

    #[test]
    fn levy_density_exponential() {
        let d = BernsteinDescriptor::from_levy_density(Arc::new(|y: f64| (-y).exp()), 0.0, 0.0, None, 1e-11, "exp")
            .unwrap();
        assert_relative_eq!(d.phi_real(1.0).unwrap(), 0.5, max_relative = 1e-9);
        // Φ(z) = z/(1+z) in closed form
        let z = c(0.3, 2.0);
        let exact = z / (z + 1.0);
        assert!((d.phi(z).unwrap() - exact).norm() < 1e-9 * exact.norm());
        assert!(d.phi(c(-0.1, 0.0)).is_err());
        assert_relative_eq!(d.phi_prime_at_zero().unwrap(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn levy_density_kill_at_zero() {
        let d = BernsteinDescriptor::from_levy_density(
            Arc::new(|y: f64| y.powf(-1.5)),
            0.0,
            0.7,
            Some(0.5),
            1e-10,
            "power",
        )
        .unwrap();
        assert_eq!(d.phi_real(0.0).unwrap(), 0.7);
    }

    #[test]
    fn nonintegrable_density_is_rejected() {
        let r = BernsteinDescriptor::from_levy_density(Arc::new(|y: f64| y.powf(-2.5)), 0.0, 0.0, Some(1.0), 1e-8, "bad");
        assert!(matches!(r, Err(Error::Integrability(_))), "{r:?}");
    }

    #[test]
    fn log_density_second_derivative_rate() {
        // −Φ''(x) ≍ x^{−2} ln x
        let d = BernsteinDescriptor::from_levy_density(
            Arc::new(|y: f64| (1.0 / y).ln() / y),
            0.0,
            0.0,
            Some(1.0),
            1e-10,
            "loginv",
        )
        .unwrap();
        let ratios: Vec<f64> = [1e2, 1e3, 1e4]
            .iter()
            .map(|&x: &f64| -d.deriv_real(2, x).unwrap() / (x.powi(-2) * x.ln()))
            .collect();
        let drift = (ratios[2] / ratios[1] - 1.0).abs();
        assert!(drift < 0.1, "{ratios:?}");
    }

    #[test]
    fn combinators() {
        let s = BernsteinDescriptor::stable(0.5).unwrap().add_drift(1.0).unwrap();
        assert_relative_eq!(s.phi_real(4.0).unwrap(), 6.0, max_relative = 1e-15);
        assert_relative_eq!(s.phi_dagger(c(4.0, 0.0)).unwrap().re, 2.0, max_relative = 1e-15);

        let g = BernsteinDescriptor::gamma();
        let same = BernsteinDescriptor::power_composition(1.0, g.clone()).unwrap();
        for x in [0.5, 1.0, 2.0] {
            assert_eq!(same.phi_real(x).unwrap(), g.phi_real(x).unwrap());
        }

        let p = BernsteinDescriptor::power_composition(0.5, BernsteinDescriptor::point_jump(1.0, 1.0).unwrap()).unwrap();
        assert_relative_eq!(p.phi_real(1.0).unwrap(), 1.0 - (-1.0f64).exp(), max_relative = 1e-15);
        assert!(p.has_halfplane_extension());
    }

    #[test]
    fn composed_derivatives_follow_chain_rule() {
        let p = BernsteinDescriptor::power_composition(0.6, BernsteinDescriptor::gamma()).unwrap();
        let x = 1.3;
        let h = 1e-4;
        for n in 1..=3u8 {
            let fd = (p.deriv_real(n - 1, x + h).unwrap() - p.deriv_real(n - 1, x - h).unwrap()) / (2.0 * h);
            assert_relative_eq!(p.deriv_real(n, x).unwrap(), fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn sum_sector_is_the_narrowest() {
        let s = BernsteinDescriptor::sum(vec![
            BernsteinDescriptor::stable(0.5).unwrap(),
            BernsteinDescriptor::gamma(),
        ])
        .unwrap();
        assert!(!s.sector.unwrap().closed);
        let with_cp = BernsteinDescriptor::sum(vec![s, BernsteinDescriptor::point_jump(1.0, 1.0).unwrap()]).unwrap();
        assert!(with_cp.sector.is_none());
    }
}
