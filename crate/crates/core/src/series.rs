//! Power series in x with coefficients built from derivatives of
//! convolution powers of the Lévy tail.
//!
//! With D(n, r) = d^r/dt^r μ̄^{*n}(t):
//!
//! ∂_x^k ∂_t^l f = Σ_j x^j/j! I_{j,k,l},
//! I_{j,k,l} = (−1)^{k+j} Σ_{k1+k2+k3=k+j} (k+j)!/(k1! k2! k3!) q^{k1} b^{k2} D(k3+1, l+k2+k3),
//!
//! ∂_x^k ∂_t^l G = 1{l=0} (−q)^k e^{−qx} + Σ_j x^j/j! 𝕴_{j,k,l},
//! 𝕴_{j,k,l} = (−1)^{k+j} Σ_{k1+k2+k3=k+j−1} (k+j)!/(k1! k2! (k3+1)!) q^{k1} b^{k2} D(k3+1, l+k2+k3),
//!
//! and g = ∂_t G.

use std::collections::HashMap;
use std::f64::consts::PI;

use parking_lot::RwLock;
use serde::Serialize;

use crate::bernstein::BernsteinDescriptor;
use crate::contour::{self, ContourKind, ContourSpec};
use crate::error::{Error, Result};
use crate::query::{DensityQuery, Method, MethodResult, Target};
use crate::special::{self, ln_gamma, recip_gamma};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientFamily {
    /// Coefficients of the f series.
    I,
    /// Coefficients of the G and g series.
    FrakI,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientSource {
    KeyholeNumeric,
    HalfplaneNumeric,
    StableClosedForm,
    TemperedClosedForm,
}

impl CoefficientSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            CoefficientSource::KeyholeNumeric => "keyhole_numeric",
            CoefficientSource::HalfplaneNumeric => "halfplane_numeric",
            CoefficientSource::StableClosedForm => "stable_closed_form",
            CoefficientSource::TemperedClosedForm => "tempered_closed_form",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesCoefficients {
    pub family: CoefficientFamily,
    pub k: u32,
    pub l: u32,
    pub t: f64,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub source: CoefficientSource,
}

/// d^r/dt^r μ̄^{*n}(t) for Φ(z) = z^α: t^{n(1−α)−1−r} / Γ(n(1−α) − r).
pub fn stable_conv_tail(alpha: f64, n: u32, r: u32, t: f64) -> f64 {
    let s = n as f64 * (1.0 - alpha) - r as f64;
    t.powf(s - 1.0) * recip_gamma(s)
}

/// Size of the stable coefficient without its sin factor, used to measure
/// relative error when the coefficient itself vanishes.
pub fn stable_conv_tail_scale(alpha: f64, n: u32, r: u32, t: f64) -> f64 {
    let s = n as f64 * (1.0 - alpha) - r as f64;
    if s > 0.0 {
        return stable_conv_tail(alpha, n, r, t).abs();
    }
    // 1/Γ(s) = sin(πs) Γ(1−s)/π for s ≤ 0
    t.powf(s - 1.0) * (ln_gamma(1.0 - s)).exp() / PI
}

fn multinomial3(total: u32, k1: u32, k2: u32, k3_weight: u32) -> f64 {
    // total! / (k1! k2! k3_weight!)
    (ln_gamma(total as f64 + 1.0)
        - ln_gamma(k1 as f64 + 1.0)
        - ln_gamma(k2 as f64 + 1.0)
        - ln_gamma(k3_weight as f64 + 1.0))
    .exp()
    .round()
}

/// D(n, r) at t (by bit pattern) with its error estimate.
type ConvTailCache = HashMap<(u32, u32, u64), (f64, f64)>;

/// Coefficient engine for one descriptor; caches D(n, r) at each t.
#[derive(Debug)]
pub struct SeriesEngine {
    phi: BernsteinDescriptor,
    source: CoefficientSource,
    spec: ContourSpec,
    cache: RwLock<ConvTailCache>,
}

impl SeriesEngine {
    /// Picks the stable closed form for Φ(z) = z^α, the half-plane contour
    /// when Φ extends continuously to the closed upper half-plane, and the
    /// θ = π/2 keyhole otherwise.
    pub fn new(phi: &BernsteinDescriptor) -> Result<Self> {
        let source = if phi.pure_stable_alpha().is_some() {
            CoefficientSource::StableClosedForm
        } else if phi.has_halfplane_extension() {
            CoefficientSource::HalfplaneNumeric
        } else {
            CoefficientSource::KeyholeNumeric
        };
        Self::with_source(phi, source)
    }

    pub fn with_source(phi: &BernsteinDescriptor, source: CoefficientSource) -> Result<Self> {
        let spec = match source {
            CoefficientSource::StableClosedForm => {
                if phi.pure_stable_alpha().is_none() {
                    return Err(Error::capability(format!("{}: stable closed form needs Φ(z) = z^α", phi.label)));
                }
                ContourSpec::keyhole()
            }
            CoefficientSource::HalfplaneNumeric => {
                if !phi.has_halfplane_extension() {
                    return Err(Error::capability(format!(
                        "{}: no continuous extension to the closed upper half-plane",
                        phi.label
                    )));
                }
                ContourSpec::halfplane()
            }
            CoefficientSource::KeyholeNumeric => {
                let spec = ContourSpec::keyhole();
                let ContourKind::Keyhole { theta, .. } = spec.kind else { unreachable!() };
                match phi.sector {
                    Some(s) if s.admits_keyhole(theta) => spec,
                    _ => {
                        return Err(Error::capability(format!(
                            "{}: series coefficients need a sector extension past the imaginary axis",
                            phi.label
                        )))
                    }
                }
            }
            CoefficientSource::TemperedClosedForm => {
                return Err(Error::capability(
                    "the tempered closed form is a whole-series formula; see tempered_stable_series_f",
                ))
            }
        };
        Ok(Self {
            phi: phi.clone(),
            source,
            spec: spec.with_tol(1e-12),
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn with_contour(mut self, spec: ContourSpec) -> Self {
        self.spec = spec;
        self
    }

    pub fn source(&self) -> CoefficientSource {
        self.source
    }

    pub fn descriptor(&self) -> &BernsteinDescriptor {
        &self.phi
    }

    /// D(n, r) = d^r/dt^r μ̄^{*n}(t) and its error estimate.
    pub fn conv_tail(&self, n: u32, r: u32, t: f64) -> Result<(f64, f64)> {
        let key = (n, r, t.to_bits());
        if let Some(v) = self.cache.read().get(&key) {
            return Ok(*v);
        }
        let v = match self.source {
            CoefficientSource::StableClosedForm => {
                let alpha = self.phi.pure_stable_alpha().expect("checked at construction");
                let v = stable_conv_tail(alpha, n, r, t);
                (v, 4.0 * f64::EPSILON * v.abs())
            }
            _ => {
                let res = contour::conv_tail_derivative(&self.phi, n, r, t, &self.spec)?;
                (res.value, res.error_scale)
            }
        };
        self.cache.write().insert(key, v);
        Ok(v)
    }

    fn coefficient(&self, family: CoefficientFamily, j: u32, k: u32, l: u32, t: f64) -> Result<(f64, f64)> {
        let q = self.phi.kill_rate;
        let b = self.phi.drift;
        let m = k + j;
        let total = match family {
            CoefficientFamily::I => m,
            CoefficientFamily::FrakI => {
                if m == 0 {
                    return Ok((0.0, 0.0));
                }
                m - 1
            }
        };
        let mut value = 0.0;
        let mut error = 0.0;
        for k1 in 0..=total {
            if q == 0.0 && k1 > 0 {
                break;
            }
            for k2 in 0..=(total - k1) {
                if b == 0.0 && k2 > 0 {
                    break;
                }
                let k3 = total - k1 - k2;
                let weight = match family {
                    CoefficientFamily::I => multinomial3(m, k1, k2, k3),
                    CoefficientFamily::FrakI => multinomial3(m, k1, k2, k3 + 1),
                };
                let pre = weight * q.powi(k1 as i32) * b.powi(k2 as i32);
                let (d, e) = self.conv_tail(k3 + 1, l + k2 + k3, t).map_err(|err| match err {
                    Error::Accuracy { message, achieved } => Error::Accuracy {
                        message: format!("{message} at (k1, k2, k3) = ({k1}, {k2}, {k3})"),
                        achieved,
                    },
                    Error::Convergence { message, partial } => Error::Convergence {
                        message: format!("{message} at (k1, k2, k3) = ({k1}, {k2}, {k3})"),
                        partial,
                    },
                    other => other,
                })?;
                value += pre * d;
                error += pre.abs() * e;
            }
        }
        let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
        Ok((sign * value, error))
    }

    /// I_{j,k,l}(t).
    pub fn coefficient_i(&self, j: u32, k: u32, l: u32, t: f64) -> Result<f64> {
        Ok(self.coefficient(CoefficientFamily::I, j, k, l, t)?.0)
    }

    /// 𝕴_{j,k,l}(t).
    pub fn coefficient_frak_i(&self, j: u32, k: u32, l: u32, t: f64) -> Result<f64> {
        Ok(self.coefficient(CoefficientFamily::FrakI, j, k, l, t)?.0)
    }

    pub fn coefficients(
        &self,
        family: CoefficientFamily,
        k: u32,
        l: u32,
        t: f64,
        n_max: u32,
    ) -> Result<SeriesCoefficients> {
        let mut values = Vec::with_capacity(n_max as usize + 1);
        let mut errors = Vec::with_capacity(n_max as usize + 1);
        for j in 0..=n_max {
            let (v, e) = self.coefficient(family, j, k, l, t)?;
            values.push(v);
            errors.push(e);
        }
        Ok(SeriesCoefficients {
            family,
            k,
            l,
            t,
            values,
            errors,
            source: self.source,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn sum(
        &self,
        family: CoefficientFamily,
        x: f64,
        t: f64,
        k: u32,
        l: u32,
        constant: f64,
        n_max: u32,
        tol: f64,
    ) -> Result<MethodResult> {
        let ln_x = x.ln();
        let mut sum = constant;
        let mut abs_sum = constant.abs();
        let mut coef_err = 0.0;
        let mut small = 0;
        let mut last_term = f64::INFINITY;
        for j in 0..=n_max {
            let (c, e) = self.coefficient(family, j, k, l, t)?;
            let w = (j as f64 * ln_x - ln_gamma(j as f64 + 1.0)).exp();
            let term = c * w;
            sum += term;
            abs_sum += term.abs();
            coef_err += e * w;
            if term.abs() <= tol * sum.abs() {
                small += 1;
            } else {
                small = 0;
            }
            if small >= 3 && j >= 3 {
                // First omitted term as the truncation estimate.
                let (c_next, _) = self.coefficient(family, j + 1, k, l, t)?;
                let w_next = ((j + 1) as f64 * ln_x - ln_gamma(j as f64 + 2.0)).exp();
                let omitted = (c_next * w_next).abs();
                let error = omitted + coef_err + f64::EPSILON * abs_sum;
                return Ok(MethodResult::new(sum, error, Method::Series)
                    .with_diag("terms", j + 1)
                    .with_diag("first_omitted", omitted)
                    .with_diag("source", self.source.as_str()));
            }
            last_term = term.abs();
        }
        Err(Error::Truncation {
            terms: n_max as usize + 1,
            partial: sum,
            last_term,
        })
    }

    /// ∂_x^k ∂_t^l f(x, t).
    pub fn series_f(&self, query: &DensityQuery, n_max: u32, tol: f64) -> Result<MethodResult> {
        query.check_domain(&self.phi)?;
        match query.target {
            Target::F => self.sum(CoefficientFamily::I, query.x, query.t, query.k, query.l, 0.0, n_max, tol),
            _ => self.series_g(query, n_max, tol),
        }
    }

    /// G, g, f_k = q·G and f_c = b·g, with derivatives.
    pub fn series_g(&self, query: &DensityQuery, n_max: u32, tol: f64) -> Result<MethodResult> {
        query.check_domain(&self.phi)?;
        let (l, factor) = match query.target {
            Target::F => return self.series_f(query, n_max, tol),
            Target::Distribution => (query.l, 1.0),
            Target::SubordinatorDensity => (query.l + 1, 1.0),
            Target::Killed => (query.l, self.phi.kill_rate),
            Target::Creeping => (query.l + 1, self.phi.drift),
        };
        if factor == 0.0 {
            return Ok(MethodResult::new(0.0, 0.0, Method::Series).with_diag("shortcut", "vanishing component"));
        }
        let q = self.phi.kill_rate;
        let constant = if l == 0 {
            (-q).powi(query.k as i32) * (-q * query.x).exp()
        } else {
            0.0
        };
        Ok(self
            .sum(CoefficientFamily::FrakI, query.x, query.t, query.k, l, constant, n_max, tol)?
            .times(factor))
    }
}

/// Remainder of the degree-n Taylor polynomial at one probe.
#[derive(Debug, Clone, Serialize)]
pub struct RemainderProbe {
    pub x: f64,
    pub t: f64,
    pub remainder: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PolynomialReport {
    pub n: u32,
    pub k: u32,
    pub l: u32,
    pub t_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    /// I_{j,k,l}(t) for j = 0..=n, one row per t.
    pub coefficients: Vec<Vec<f64>>,
    pub probes: Vec<RemainderProbe>,
    /// sup over t of the remainder at each x.
    pub sup_remainder: Vec<f64>,
    /// Log-log slope of sup_remainder against x; the bound predicts n + 1.
    pub fitted_exponent: f64,
    /// Estimated constant C in sup R ≤ C x^{n+1}/(n+1)!.
    pub constant: f64,
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

pub fn lin_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Taylor polynomial P_{n,k,l} and its remainder over a band of (x, t).
/// The remainder is summed directly as the series tail beyond degree n.
pub fn polynomial_approx(
    engine: &SeriesEngine,
    n: u32,
    k: u32,
    l: u32,
    t_band: (f64, f64),
    x_band: (f64, f64),
) -> Result<PolynomialReport> {
    const N_T: usize = 9;
    const N_X: usize = 9;
    const N_MAX: u32 = 120;
    let t_grid = lin_grid(t_band.0, t_band.1, N_T);
    let x_grid = log_grid(x_band.0, x_band.1, N_X);
    let phi = engine.descriptor();
    if phi.drift > 0.0 && x_band.1 >= t_band.0 / phi.drift {
        return Err(Error::domain(format!(
            "x band must stay below t1/b = {}",
            t_band.0 / phi.drift
        )));
    }
    let mut coefficients = Vec::with_capacity(N_T);
    for &t in &t_grid {
        let row = (0..=n)
            .map(|j| engine.coefficient_i(j, k, l, t))
            .collect::<Result<Vec<f64>>>()?;
        coefficients.push(row);
    }
    let mut probes = Vec::with_capacity(N_T * N_X);
    let mut sup_remainder = vec![0.0f64; N_X];
    for &t in &t_grid {
        for (ix, &x) in x_grid.iter().enumerate() {
            let ln_x = x.ln();
            let mut tail = 0.0;
            let mut small = 0;
            for j in (n + 1)..=N_MAX {
                let c = engine.coefficient_i(j, k, l, t)?;
                let term = c * (j as f64 * ln_x - ln_gamma(j as f64 + 1.0)).exp();
                tail += term;
                small = if term.abs() <= 1e-16 * tail.abs() { small + 1 } else { 0 };
                if small >= 3 {
                    break;
                }
            }
            let remainder = tail.abs();
            sup_remainder[ix] = sup_remainder[ix].max(remainder);
            probes.push(RemainderProbe { x, t, remainder });
        }
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = x_grid
        .iter()
        .zip(&sup_remainder)
        .filter(|(_, r)| **r > 0.0)
        .map(|(x, r)| (x.ln(), r.ln()))
        .unzip();
    let fitted_exponent = crate::saddle::ls_slope(&xs, &ys).unwrap_or(f64::NAN);
    let fact = special::gamma(n as f64 + 2.0);
    let constant = x_grid
        .iter()
        .zip(&sup_remainder)
        .map(|(x, r)| r * fact / x.powi(n as i32 + 1))
        .fold(0.0, f64::max);
    Ok(PolynomialReport {
        n,
        k,
        l,
        t_grid,
        x_grid,
        coefficients,
        probes,
        sup_remainder,
        fitted_exponent,
        constant,
    })
}

/// f(x, t) for Φ(z) = (λ + z)^α − λ^α by the incomplete-gamma series.
pub fn tempered_stable_series_f(alpha: f64, lambda: f64, x: f64, t: f64, n_max: u32, tol: f64) -> Result<MethodResult> {
    if !(alpha > 0.0 && alpha < 1.0 && lambda > 0.0) {
        return Err(Error::domain(format!("need α ∈ (0, 1), λ > 0, got {alpha}, {lambda}")));
    }
    if !(x > 0.0 && t > 0.0) {
        return Err(Error::domain(format!("need x, t > 0, got {x}, {t}")));
    }
    let y = lambda * t;
    // b_j = λ^{αj} Γ(1+αj) Γ(−αj, λt) sin(jαπ), b_0 = 0
    let bracket = |j: u32| -> Result<f64> {
        if j == 0 {
            return Ok(0.0);
        }
        let s = alpha * j as f64;
        let sin = (s * PI).sin();
        if sin == 0.0 {
            return Ok(0.0);
        }
        Ok(lambda.powf(s) * special::gamma(1.0 + s) * special::upper_incomplete_gamma(-s, y)? * sin)
    };
    let ln_x = x.ln();
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    let mut small = 0;
    let mut prev = bracket(0)?;
    let mut last = f64::INFINITY;
    for j in 0..=n_max {
        let next = bracket(j + 1)?;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * (j as f64 * ln_x - ln_gamma(j as f64 + 1.0)).exp() * (next - prev);
        prev = next;
        sum += term;
        abs_sum += term.abs();
        small = if term.abs() <= tol * sum.abs() { small + 1 } else { 0 };
        last = term.abs();
        if small >= 3 && j >= 3 {
            let pre = (lambda.powf(alpha) * x).exp() / PI;
            return Ok(MethodResult::new(pre * sum, pre * (last + 1e-15 * abs_sum), Method::Series)
                .with_diag("terms", j + 1)
                .with_diag("source", CoefficientSource::TemperedClosedForm.as_str()));
        }
    }
    Err(Error::Truncation {
        terms: n_max as usize + 1,
        partial: sum,
        last_term: last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn inv_half_stable(x: f64, t: f64) -> f64 {
        (-x * x / (4.0 * t)).exp() / (PI * t).sqrt()
    }

    #[test]
    fn stable_closed_form_matches_reflection_formula() {
        for alpha in [0.3, 0.7] {
            for j in 0..8u32 {
                let s = alpha * (j + 1) as f64;
                let paper_form = (s * PI).sin() * special::gamma(s + 1.0) / (PI * s);
                assert_relative_eq!(
                    stable_conv_tail(alpha, j + 1, j, 1.0),
                    paper_form,
                    max_relative = 1e-12,
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn integer_degeneracy_is_exact_zero() {
        let e = SeriesEngine::new(&BernsteinDescriptor::stable(0.5).unwrap()).unwrap();
        assert_eq!(e.coefficient_i(1, 0, 0, 1.7).unwrap(), 0.0);
        assert_eq!(e.coefficient_i(3, 0, 0, 0.4).unwrap(), 0.0);
        // g coefficients 𝕴_{j,0,1} vanish for even j
        assert_eq!(e.coefficient_frak_i(2, 0, 1, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn half_stable_f_and_g() {
        let e = SeriesEngine::new(&BernsteinDescriptor::stable(0.5).unwrap()).unwrap();
        let f = e.series_f(&DensityQuery::new(Target::F, 1.0, 1.0), 80, 1e-15).unwrap();
        assert_relative_eq!(f.value, inv_half_stable(1.0, 1.0), max_relative = 1e-12);
        assert!(f.diagnostics["terms"].as_u64().unwrap() <= 40);
        let g = e
            .series_g(&DensityQuery::new(Target::SubordinatorDensity, 1.0, 1.0), 80, 1e-15)
            .unwrap();
        assert_relative_eq!(g.value, (-0.25f64).exp() / (2.0 * PI.sqrt()), max_relative = 1e-12);
    }

    #[test]
    fn g_series_reproduces_classical_stable_coefficients() {
        let alpha = 0.3;
        let e = SeriesEngine::new(&BernsteinDescriptor::stable(alpha).unwrap()).unwrap();
        let t: f64 = 1.3;
        for j in 1..8u32 {
            let ja = j as f64 * alpha;
            let classical = if j % 2 == 1 { 1.0 } else { -1.0 } * t.powf(-ja - 1.0) * (PI * ja).sin()
                * special::gamma(1.0 + ja)
                / PI;
            assert_relative_eq!(e.coefficient_frak_i(j, 0, 1, t).unwrap(), classical, max_relative = 1e-12);
        }
    }

    #[test]
    fn distribution_at_origin() {
        let e = SeriesEngine::new(&BernsteinDescriptor::stable(0.5).unwrap()).unwrap();
        let g = e.series_g(&DensityQuery::new(Target::Distribution, 1e-300, 1.0), 80, 1e-15).unwrap();
        assert_relative_eq!(g.value, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn numeric_coefficients_match_closed_form() {
        let phi = BernsteinDescriptor::stable(0.7).unwrap();
        let num = SeriesEngine::with_source(&phi, CoefficientSource::KeyholeNumeric).unwrap();
        let exact = SeriesEngine::new(&phi).unwrap();
        for j in 0..5 {
            assert_relative_eq!(
                num.coefficient_i(j, 0, 0, 1.0).unwrap(),
                exact.coefficient_i(j, 0, 0, 1.0).unwrap(),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn tempered_series_agrees_with_contour() {
        let phi = BernsteinDescriptor::tempered_stable(0.5, 1.0).unwrap();
        let s = tempered_stable_series_f(0.5, 1.0, 1.0, 2.0, 200, 1e-15).unwrap();
        let b = contour::invert_bromwich(&phi, &DensityQuery::new(Target::F, 1.0, 2.0), &ContourSpec::bromwich()).unwrap();
        assert_relative_eq!(s.value, b.value, max_relative = 1e-6);
        let h = SeriesEngine::new(&phi).unwrap();
        assert_eq!(h.source(), CoefficientSource::HalfplaneNumeric);
        let v = h.series_f(&DensityQuery::new(Target::F, 1.0, 2.0), 80, 1e-13).unwrap();
        assert_relative_eq!(v.value, b.value, max_relative = 1e-8);
    }

    #[test]
    fn tempered_first_coefficient_tends_to_stable() {
        // λ^α Γ(1+α) Γ(−α, λt) sin(απ)/π → Γ(1+α) t^{−α} sin(απ)/(απ) as λ → 0
        let (alpha, t): (f64, f64) = (0.5, 1.0);
        let stable = special::gamma(1.0 + alpha) * (alpha * PI).sin() / (alpha * PI) * t.powf(-alpha);
        let lam: f64 = 1e-10;
        let tempered = lam.powf(alpha)
            * special::gamma(1.0 + alpha)
            * special::upper_incomplete_gamma(-alpha, lam * t).unwrap()
            * (alpha * PI).sin()
            / PI;
        assert_relative_eq!(tempered, stable, max_relative = 1e-4);
    }

    #[test]
    fn killed_and_drifted_series_match_contour() {
        let phi = BernsteinDescriptor::stable(0.6).unwrap().add_drift(0.3).unwrap().add_kill(0.4).unwrap();
        let e = SeriesEngine::new(&phi).unwrap();
        assert_eq!(e.source(), CoefficientSource::HalfplaneNumeric);
        for target in [Target::F, Target::Distribution, Target::SubordinatorDensity, Target::Killed, Target::Creeping] {
            let q = DensityQuery::new(target, 0.8, 1.5);
            let s = e.series_f(&q, 80, 1e-13).unwrap();
            let b = contour::invert_bromwich(&phi, &q, &ContourSpec::bromwich()).unwrap();
            assert_relative_eq!(s.value, b.value, max_relative = 1e-7);
        }
    }
}
