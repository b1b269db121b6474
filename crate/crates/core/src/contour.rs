//! Numerical Laplace inversion on Bromwich lines and keyhole contours.
//!
//! Every quantity handled here is the inverse Laplace transform (in t) of
//! a transform F(z):
//!
//! | quantity            | F(z)                                    |
//! |---------------------|-----------------------------------------|
//! | ∂_x^k ∂_t^l f       | (−Φ)^k Φ† z^{l−1} e^{−xΦ}                |
//! | ∂_x^k ∂_t^l G       | (−Φ)^k z^{l−1} e^{−xΦ}                   |
//! | ∂_x^k ∂_t^l g       | (−Φ)^k z^{l} e^{−xΦ}                     |
//! | d^r/dt^r μ̄^{*n}     | (Φ†)^n z^{r−n}                           |
//!
//! and f_k = q·G, f_c = b·g. Conjugate symmetry of F halves every contour.

use std::cell::RefCell;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::bernstein::{BernsteinDescriptor, C64};
use crate::error::{Error, Result};
use crate::quad::{self, MarchOptions, Tolerance};
use crate::query::{DensityQuery, Method, MethodResult, Target};
use crate::saddle;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContourKind {
    /// Vertical line Re z = a; `None` picks the saddle point when it exists.
    Bromwich { abscissa: Option<f64> },
    /// Rays at ±(π − θ/2) joined by an arc of radius ε; `None` gives
    /// ε = min(0.1, 1/(10t)).
    Keyhole { theta: f64, eps: Option<f64> },
    /// Both edges of the negative real axis, using the continuous extension
    /// of Φ to the closed upper half-plane.
    HalfplaneKeyhole { eps: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSpec {
    pub kind: ContourKind,
    /// A panel is negligible once its |integrand| mass falls below this
    /// fraction of the accumulated mass.
    pub trunc_tol: f64,
    pub quad_tol: f64,
    pub max_panels: usize,
}

impl ContourSpec {
    pub fn bromwich() -> Self {
        Self {
            kind: ContourKind::Bromwich { abscissa: None },
            trunc_tol: 1e-13,
            quad_tol: 1e-11,
            max_panels: 400_000,
        }
    }

    pub fn keyhole() -> Self {
        Self {
            kind: ContourKind::Keyhole {
                theta: FRAC_PI_2,
                eps: None,
            },
            ..Self::bromwich()
        }
    }

    pub fn halfplane() -> Self {
        Self {
            kind: ContourKind::HalfplaneKeyhole { eps: None },
            ..Self::bromwich()
        }
    }

    pub fn with_kind(mut self, kind: ContourKind) -> Self {
        self.kind = kind;
        self
    }

    /// Sets the quadrature tolerance; the truncation threshold follows at
    /// 1e-2 of it.
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.quad_tol = tol;
        self.trunc_tol = tol * 1e-2;
        self
    }

    pub fn method(&self) -> Method {
        match self.kind {
            ContourKind::Bromwich { .. } => Method::Bromwich,
            _ => Method::Keyhole,
        }
    }
}

impl Default for ContourSpec {
    fn default() -> Self {
        Self::bromwich()
    }
}

/// F(z) = pref(z) · e^{expo(z)}.
#[derive(Debug, Clone, Copy)]
enum Kernel {
    Density { dagger: bool, k: u32, zpow: i32, x: f64 },
    ConvTail { n: u32, r: u32 },
}

impl Kernel {
    fn eval(&self, phi: &BernsteinDescriptor, z: C64) -> Result<(C64, C64)> {
        let dagger = phi.phi_dagger(z)?;
        match *self {
            Kernel::Density { dagger: with_dagger, k, zpow, x } => {
                let full = dagger + phi.kill_rate + z * phi.drift;
                let mut pref = (-full).powi(k as i32) * z.powi(zpow);
                if with_dagger {
                    pref *= dagger;
                }
                Ok((pref, -full * x))
            }
            Kernel::ConvTail { n, r } => Ok((dagger.powi(n as i32) * z.powi(r as i32 - n as i32), C64::new(0.0, 0.0))),
        }
    }
}

fn density_kernel(query: &DensityQuery) -> (Kernel, Target) {
    let (dagger, zshift, base) = match query.target {
        Target::F => (true, -1, Target::F),
        Target::Distribution | Target::Killed => (false, -1, Target::Distribution),
        Target::SubordinatorDensity | Target::Creeping => (false, 0, Target::SubordinatorDensity),
    };
    (
        Kernel::Density {
            dagger,
            k: query.k,
            zpow: query.l as i32 + zshift,
            x: query.x,
        },
        base,
    )
}

/// Holds the first error raised inside a quadrature callback.
struct Guard {
    first: RefCell<Option<Error>>,
}

impl Guard {
    fn new() -> Self {
        Self { first: RefCell::new(None) }
    }

    fn take<T: Default>(&self, r: Result<T>) -> T {
        match r {
            Ok(v) => v,
            Err(e) => {
                let mut slot = self.first.borrow_mut();
                if slot.is_none() {
                    *slot = Some(e);
                }
                T::default()
            }
        }
    }

    fn check(&self) -> Result<()> {
        match self.first.borrow_mut().take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

struct Integral {
    value: f64,
    error: f64,
    panels: usize,
    radius: f64,
}

// Fixed-width panels tried before switching to extrapolation.
const DIRECT_PANELS: usize = 4_000;

fn march_opts(spec: &ContourSpec) -> MarchOptions {
    MarchOptions {
        tol: Tolerance::new(0.0, spec.quad_tol),
        trunc_tol: spec.trunc_tol,
        max_panels: spec.max_panels,
        min_panels: 4,
        quiet_panels: 3,
        max_intervals_per_panel: 200,
    }
}

/// Phase rates of e^{tz − xΦ(z)} on Re z = a: a bound over the whole line
/// and the limit as Im z → ∞. With τ = t − bx the exponent is
/// τz − qx − xΦ†(z) and |Φ†'(a+ib)| ≤ Φ†'(a), so the rate never exceeds
/// τ + xΦ†'(a) (2τ at the saddle point) and tends to τ. Off the saddle
/// point the bound is raised to 2τ, since the integrand there cancels
/// heavily and needs the finer panels.
struct PhaseRates {
    bound: f64,
    far: f64,
}

/// (1/π) ∫₀^∞ Re[F(a+ib) e^{t(a+ib) − shift}] db.
fn bromwich_integral(
    phi: &BernsteinDescriptor,
    kernel: Kernel,
    t: f64,
    a: f64,
    shift: f64,
    rates: PhaseRates,
    spec: &ContourSpec,
) -> Result<Integral> {
    let guard = Guard::new();
    let f = |b: f64| {
        let z = C64::new(a, b);
        let (pref, expo) = guard.take(kernel.eval(phi, z));
        if pref == C64::default() {
            return 0.0;
        }
        (pref * (expo + z * t - shift).exp()).re
    };
    let width = PI / rates.bound;
    let mut opts = march_opts(spec);
    opts.max_panels = opts.max_panels.min(DIRECT_PANELS);
    let m = quad::march(&f, 0.0, |_, _| width, opts);
    guard.check()?;
    if m.panels < opts.max_panels {
        let error = m.error + spec.trunc_tol * m.magnitude;
        // As on the keyhole rays, a pessimistic estimate within a decade of
        // the target is returned with its error scale.
        if !m.converged && error > spec.quad_tol * m.value.abs() * 10.0 {
            return Err(Error::Accuracy {
                message: "Bromwich panel quadrature".into(),
                achieved: error / PI,
            });
        }
        return Ok(Integral {
            value: m.value / PI,
            error: error / PI,
            panels: m.panels,
            radius: m.radius,
        });
    }
    // Slowly decaying tail: half periods of e^{ibτ} alternate in sign, so
    // their partial sums are extrapolated.
    let half = PI / rates.far;
    let panel_tol = Tolerance::new(spec.quad_tol * 1e-2 * m.magnitude, spec.quad_tol);
    let mut quad_err = 0.0;
    let start = m.radius;
    let head = m.value;
    let budget = spec.max_panels.saturating_sub(m.panels) / 2;
    let acc = quad::accelerated_sum(
        |i| {
            let lo = start + i as f64 * half;
            let q = quad::adaptive(&f, lo, lo + half, panel_tol, 200);
            quad_err += q.error;
            if i == 0 {
                head + q.value
            } else {
                q.value
            }
        },
        budget,
        Tolerance::new(spec.trunc_tol * m.magnitude, spec.quad_tol),
    );
    guard.check()?;
    if !acc.converged {
        return Err(Error::Convergence {
            message: format!(
                "Bromwich integrand still contributing at b = {:.6e} after {} panels",
                start + acc.terms as f64 * half,
                m.panels + acc.terms
            ),
            partial: acc.value / PI,
        });
    }
    Ok(Integral {
        value: acc.value / PI,
        error: (m.error + quad_err + acc.error) / PI,
        panels: m.panels + acc.terms,
        radius: start + acc.terms as f64 * half,
    })
}

struct KeyholeParts {
    ray: Integral,
    arc: f64,
    arc_error: f64,
}

/// (1/π) ∫_ε^∞ Im[F(ρe^{iω}) e^{tρe^{iω}} e^{iω}] dρ
///   + (1/π) ∫₀^ω Re[F(εe^{iξ}) e^{tεe^{iξ}} εe^{iξ}] dξ.
fn keyhole_integral(
    phi: &BernsteinDescriptor,
    kernel: Kernel,
    t: f64,
    omega: f64,
    eps: f64,
    spec: &ContourSpec,
) -> Result<KeyholeParts> {
    let on_axis = omega >= PI;
    let dir = if on_axis { C64::new(-1.0, 0.0) } else { C64::from_polar(1.0, omega) };
    let guard = Guard::new();
    let ray = |rho: f64| {
        // Upper edge of the negative axis carries a +0 imaginary part.
        let z = if on_axis { C64::new(-rho, 0.0) } else { dir * rho };
        let (pref, expo) = guard.take(kernel.eval(phi, z));
        if pref == C64::default() {
            return C64::default();
        }
        pref * (expo + z * t).exp() * dir
    };
    let decay = t * -omega.cos();
    let mut w_max = 2.0 / decay;
    if !on_axis {
        w_max = w_max.min(FRAC_PI_2 / (t * omega.sin()));
    }
    let m = quad::march(ray, eps, |_, s| s.max(eps).min(w_max), march_opts(spec));
    if m.panels >= spec.max_panels {
        guard.check()?;
        return Err(Error::Convergence {
            message: format!("keyhole ray still contributing at ρ = {:.6e}", m.radius),
            partial: m.value.im / PI,
        });
    }
    let arc = |xi: f64| {
        let z = C64::from_polar(eps, xi);
        let (pref, expo) = guard.take(kernel.eval(phi, z));
        pref * (expo + z * t).exp() * z
    };
    let a = quad::adaptive(arc, 0.0, omega, Tolerance::new(0.0, spec.quad_tol), 2_000);
    guard.check()?;
    let ray_err = m.error + spec.trunc_tol * m.magnitude;
    let scale = (m.magnitude + a.magnitude).max(f64::MIN_POSITIVE);
    if !m.converged && ray_err > spec.quad_tol * scale * 10.0 {
        return Err(Error::Accuracy {
            message: "keyhole ray quadrature".into(),
            achieved: ray_err / PI,
        });
    }
    Ok(KeyholeParts {
        ray: Integral {
            value: m.value.im / PI,
            error: ray_err / PI,
            panels: m.panels,
            radius: m.radius,
        },
        arc: a.value.re / PI,
        arc_error: a.error / PI,
    })
}

fn default_eps(t: f64) -> f64 {
    0.1f64.min(1.0 / (10.0 * t))
}

/// Zero result for components that vanish identically.
fn vanishing(method: Method, reason: &str) -> MethodResult {
    MethodResult::new(0.0, 0.0, method).with_diag("shortcut", reason)
}

fn component_factor(phi: &BernsteinDescriptor, target: Target) -> Option<f64> {
    match target {
        Target::Killed => Some(phi.kill_rate),
        Target::Creeping => Some(phi.drift),
        _ => None,
    }
}

/// Bromwich abscissa: the saddle point of at − xΦ(a) when t/x lies in
/// (b, Φ'(0+)), else 1.
pub fn default_abscissa(phi: &BernsteinDescriptor, x: f64, t: f64) -> f64 {
    saddle::solve_saddle(phi, t, x).unwrap_or(1.0)
}

pub fn invert(phi: &BernsteinDescriptor, query: &DensityQuery, spec: &ContourSpec) -> Result<MethodResult> {
    match spec.kind {
        ContourKind::Bromwich { .. } => invert_bromwich(phi, query, spec),
        _ => invert_keyhole(phi, query, spec),
    }
}

pub fn invert_bromwich(phi: &BernsteinDescriptor, query: &DensityQuery, spec: &ContourSpec) -> Result<MethodResult> {
    query.check_domain(phi)?;
    let factor = component_factor(phi, query.target);
    match (query.target, factor) {
        (Target::Killed, Some(0.0)) => return Ok(vanishing(Method::Bromwich, "zero kill rate")),
        (Target::Creeping, Some(0.0)) => return Ok(vanishing(Method::Bromwich, "zero drift")),
        _ => {}
    }
    let a = match spec.kind {
        ContourKind::Bromwich { abscissa: Some(a) } => {
            if !(a > 0.0) {
                return Err(Error::domain(format!("Bromwich abscissa must be positive, got {a}")));
            }
            a
        }
        _ => default_abscissa(phi, query.x, query.t),
    };
    let (kernel, _) = density_kernel(query);
    // Scale out e^{at − xΦ(a)} so that deep tails stay representable.
    let shift = a * query.t - query.x * phi.phi_real(a)?;
    let (x, t) = (query.x, query.t);
    let tau = t - phi.drift * x;
    let rates = PhaseRates {
        bound: (tau + x * (phi.deriv_real(1, a)? - phi.drift)).max(2.0 * tau),
        far: tau,
    };
    let r = bromwich_integral(phi, kernel, query.t, a, shift, rates, spec)?;
    let res = MethodResult::scaled(r.value, r.error, shift, Method::Bromwich)
        .with_diag("abscissa", a)
        .with_diag("panels", r.panels)
        .with_diag("truncation_radius", r.radius);
    Ok(match factor {
        Some(c) => res.times(c),
        None => res,
    })
}

fn keyhole_geometry(phi: &BernsteinDescriptor, spec: &ContourSpec, t: f64) -> Result<(f64, f64)> {
    match spec.kind {
        ContourKind::Keyhole { theta, eps } => {
            if !(theta > 0.0 && theta < PI) {
                return Err(Error::domain(format!("keyhole opening θ must lie in (0, π), got {theta}")));
            }
            let omega = PI - 0.5 * theta;
            match phi.sector {
                Some(s) if s.contains_angle(omega) => {}
                _ => {
                    return Err(Error::domain(format!(
                        "{}: keyhole with θ = {theta} needs a sector of half-angle ≥ {omega}",
                        phi.label
                    )))
                }
            }
            Ok((omega, eps.unwrap_or_else(|| default_eps(t))))
        }
        ContourKind::HalfplaneKeyhole { eps } => {
            if !phi.has_halfplane_extension() {
                return Err(Error::capability(format!(
                    "{}: no continuous extension to the closed upper half-plane",
                    phi.label
                )));
            }
            Ok((PI, eps.unwrap_or_else(|| default_eps(t))))
        }
        ContourKind::Bromwich { .. } => Err(Error::domain("keyhole inversion needs a keyhole contour spec")),
    }
}

pub fn invert_keyhole(phi: &BernsteinDescriptor, query: &DensityQuery, spec: &ContourSpec) -> Result<MethodResult> {
    query.check_domain(phi)?;
    let (omega, eps) = keyhole_geometry(phi, spec, query.t)?;
    let factor = component_factor(phi, query.target);
    match (query.target, factor) {
        (Target::Killed, Some(0.0)) => return Ok(vanishing(Method::Keyhole, "zero kill rate")),
        (Target::Creeping, Some(0.0)) => return Ok(vanishing(Method::Keyhole, "zero drift")),
        _ => {}
    }
    let (kernel, _) = density_kernel(query);
    let parts = keyhole_integral(phi, kernel, query.t, omega, eps, spec)?;
    let res = MethodResult::new(
        parts.ray.value + parts.arc,
        parts.ray.error + parts.arc_error,
        Method::Keyhole,
    )
    .with_diag("theta", 2.0 * (PI - omega))
    .with_diag("eps", eps)
    .with_diag("ray_panels", parts.ray.panels)
    .with_diag("truncation_radius", parts.ray.radius)
    .with_diag("arc_value", parts.arc);
    Ok(match factor {
        Some(c) => res.times(c),
        None => res,
    })
}

/// d^r/dt^r μ̄^{*n}(t) on the keyhole or half-plane contour named by `spec`.
pub fn conv_tail_derivative(
    phi: &BernsteinDescriptor,
    n: u32,
    r: u32,
    t: f64,
    spec: &ContourSpec,
) -> Result<MethodResult> {
    if n == 0 {
        return Err(Error::domain("convolution power n must be positive"));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("t must be positive, got {t}")));
    }
    let (omega, eps) = keyhole_geometry(phi, spec, t)?;
    let parts = keyhole_integral(phi, Kernel::ConvTail { n, r }, t, omega, eps, spec)?;
    Ok(MethodResult::new(
        parts.ray.value + parts.arc,
        parts.ray.error + parts.arc_error,
        Method::Keyhole,
    )
    .with_diag("n", n)
    .with_diag("r", r)
    .with_diag("theta", 2.0 * (PI - omega))
    .with_diag("eps", eps)
    .with_diag("ray_panels", parts.ray.panels)
    .with_diag("arc_value", parts.arc))
}

/// d^r/dt^r μ̄^{*n}(t) with the contour collapsed onto the negative axis.
pub fn conv_tail_halfplane(
    phi: &BernsteinDescriptor,
    n: u32,
    r: u32,
    t: f64,
    eps: Option<f64>,
    spec: &ContourSpec,
) -> Result<MethodResult> {
    conv_tail_derivative(phi, n, r, t, &spec.with_kind(ContourKind::HalfplaneKeyhole { eps }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma;
    use approx::assert_relative_eq;

    fn inv_half_stable(x: f64, t: f64) -> f64 {
        (-x * x / (4.0 * t)).exp() / (PI * t).sqrt()
    }

    #[test]
    fn bromwich_half_stable() {
        let phi = BernsteinDescriptor::stable(0.5).unwrap();
        let q = DensityQuery::new(Target::F, 1.0, 1.0);
        let r = invert_bromwich(&phi, &q, &ContourSpec::bromwich()).unwrap();
        assert_relative_eq!(r.value, inv_half_stable(1.0, 1.0), max_relative = 1e-9);
        let g = invert_bromwich(&phi, &DensityQuery::new(Target::SubordinatorDensity, 1.0, 1.0), &ContourSpec::bromwich())
            .unwrap();
        assert_relative_eq!(g.value, (-0.25f64).exp() / (2.0 * PI.sqrt()), max_relative = 1e-9);
    }

    #[test]
    fn creeping_part_vanishes_without_drift() {
        let phi = BernsteinDescriptor::gamma();
        let q = DensityQuery::new(Target::Creeping, 1.0, 1.0);
        let r = invert_bromwich(&phi, &q, &ContourSpec::bromwich()).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.diagnostics.contains_key("shortcut"));
    }

    #[test]
    fn keyhole_matches_closed_form() {
        let phi = BernsteinDescriptor::stable(0.5).unwrap();
        let spec = ContourSpec::keyhole().with_kind(ContourKind::Keyhole {
            theta: FRAC_PI_2,
            eps: Some(0.1),
        });
        let r = invert_keyhole(&phi, &DensityQuery::new(Target::F, 1.0, 1.0), &spec).unwrap();
        assert_relative_eq!(r.value, inv_half_stable(1.0, 1.0), max_relative = 1e-7);
    }

    #[test]
    fn keyhole_agrees_with_bromwich() {
        for (phi, x, t) in [
            (BernsteinDescriptor::tempered_stable(0.5, 1.0).unwrap(), 1.0, 2.0),
            (BernsteinDescriptor::gamma(), 1.0, 1.0),
        ] {
            let q = DensityQuery::new(Target::F, x, t);
            let b = invert_bromwich(&phi, &q, &ContourSpec::bromwich()).unwrap();
            let k = invert_keyhole(&phi, &q, &ContourSpec::keyhole()).unwrap();
            assert!(
                (b.value - k.value).abs() <= (b.error_scale + k.error_scale).max(1e-10 * b.value.abs()),
                "{}: {} vs {}",
                phi.label,
                b.value,
                k.value
            );
        }
    }

    #[test]
    fn keyhole_rejects_missing_sector() {
        let phi = BernsteinDescriptor::point_jump(1.0, 1.0).unwrap();
        let r = invert_keyhole(&phi, &DensityQuery::new(Target::F, 1.0, 1.0), &ContourSpec::keyhole());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn conv_tail_stable() {
        let phi = BernsteinDescriptor::stable(0.5).unwrap();
        let r = conv_tail_derivative(&phi, 1, 0, 1.0, &ContourSpec::keyhole()).unwrap();
        assert_relative_eq!(r.value, 1.0 / PI.sqrt(), max_relative = 1e-9);
        // μ̄^{*2}(t) = t^{1−2α}/Γ(2−2α) differentiated once at t = 1
        let phi = BernsteinDescriptor::stable(0.3).unwrap();
        let r = conv_tail_derivative(&phi, 2, 1, 1.0, &ContourSpec::keyhole()).unwrap();
        assert_relative_eq!(r.value, 0.4 / gamma(1.4), max_relative = 1e-9);
    }

    #[test]
    fn halfplane_matches_keyhole_on_tempered() {
        let phi = BernsteinDescriptor::tempered_stable(0.5, 1.0).unwrap();
        let h = conv_tail_halfplane(&phi, 1, 0, 1.0, None, &ContourSpec::bromwich()).unwrap();
        let k = conv_tail_derivative(&phi, 1, 0, 1.0, &ContourSpec::keyhole()).unwrap();
        assert_relative_eq!(h.value, k.value, max_relative = 1e-8);
        let exact = phi.levy().tail(1.0).unwrap();
        assert_relative_eq!(h.value, exact, max_relative = 1e-8);
    }

    #[test]
    fn halfplane_needs_extension() {
        let phi = BernsteinDescriptor::gamma();
        let r = conv_tail_halfplane(&phi, 1, 0, 1.0, None, &ContourSpec::bromwich());
        assert!(matches!(r, Err(Error::Capability(_))));
    }

    #[test]
    fn outside_region_is_domain_error() {
        let phi = BernsteinDescriptor::stable(0.5).unwrap().add_drift(1.0).unwrap();
        let r = invert_bromwich(&phi, &DensityQuery::new(Target::F, 2.0, 1.0), &ContourSpec::bromwich());
        assert!(matches!(r, Err(Error::Domain(_))));
    }
}
