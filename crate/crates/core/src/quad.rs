//! Adaptive Gauss–Kronrod quadrature for real and complex integrands, a
//! panel marcher for improper integrals and a periodic trapezoid rule.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

/// Values a quadrature can accumulate.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn norm(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn norm(&self) -> f64 {
        Complex64::norm(*self)
    }
}

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One application of the 15-point rule.
#[derive(Debug, Clone, Copy)]
pub struct Panel<T> {
    pub a: f64,
    pub b: f64,
    pub value: T,
    pub error: f64,
    /// Kronrod estimate of the integral of |f| over the panel.
    pub magnitude: f64,
}

pub fn gk15<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> Panel<T> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut magnitude = fc.norm() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        let pair = f1 + f2;
        kronrod = kronrod + pair * WGK[j];
        magnitude += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let error = (kronrod - gauss).norm() * half.abs();
    Panel {
        a,
        b,
        value,
        error,
        magnitude: magnitude * half.abs(),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    pub fn relative(rel: f64) -> Self {
        Self { abs: 0.0, rel }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Quad<T> {
    pub value: T,
    pub error: f64,
    pub magnitude: f64,
    pub evals: usize,
    pub intervals: usize,
    pub converged: bool,
}

struct Pending<T>(Panel<T>);

impl<T> PartialEq for Pending<T> {
    fn eq(&self, other: &Self) -> bool {
        self.0.error == other.0.error
    }
}
impl<T> Eq for Pending<T> {}
impl<T> PartialOrd for Pending<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Pending<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.error.total_cmp(&other.0.error)
    }
}

/// Globally adaptive bisection: the interval with the largest error is split
/// until the summed error meets `tol` or `max_intervals` is reached.
pub fn adaptive<T: QuadValue, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
    max_intervals: usize,
) -> Quad<T> {
    let first = gk15(&mut f, a, b);
    let mut value = first.value;
    let mut error = first.error;
    let mut magnitude = first.magnitude;
    let mut evals = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Pending(first));
    let mut converged = error <= tol.target(value.norm());
    while !converged && heap.len() < max_intervals {
        let Pending(worst) = heap.pop().expect("heap is never empty here");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(Pending(worst));
            break;
        }
        let left = gk15(&mut f, worst.a, mid);
        let right = gk15(&mut f, mid, worst.b);
        evals += 30;
        value = value - worst.value + left.value + right.value;
        error += left.error + right.error - worst.error;
        magnitude += left.magnitude + right.magnitude - worst.magnitude;
        heap.push(Pending(left));
        heap.push(Pending(right));
        // Resum occasionally so cancellation in the running error cannot stall.
        if heap.len() % 64 == 0 {
            error = heap.iter().map(|p| p.0.error).sum();
        }
        converged = error <= tol.target(value.norm());
    }
    if !converged {
        // Recompute exactly before reporting.
        let mut v = T::zero();
        let mut e = 0.0;
        for p in heap.iter() {
            v = v + p.0.value;
            e += p.0.error;
        }
        value = v;
        error = e;
        converged = error <= tol.target(value.norm());
    }
    Quad {
        value,
        error,
        magnitude,
        evals,
        intervals: heap.len(),
        converged,
    }
}

/// Controls for [`march`].
#[derive(Debug, Clone, Copy)]
pub struct MarchOptions {
    pub tol: Tolerance,
    /// A panel counts as negligible when its |f|-mass is below
    /// `trunc_tol` times the accumulated |f|-mass.
    pub trunc_tol: f64,
    pub max_panels: usize,
    pub min_panels: usize,
    /// Number of consecutive negligible panels that ends the march.
    pub quiet_panels: usize,
    pub max_intervals_per_panel: usize,
}

impl Default for MarchOptions {
    fn default() -> Self {
        Self {
            tol: Tolerance::new(0.0, 1e-12),
            trunc_tol: 1e-14,
            max_panels: 200_000,
            min_panels: 4,
            quiet_panels: 3,
            max_intervals_per_panel: 200,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct March<T> {
    pub value: T,
    pub error: f64,
    pub magnitude: f64,
    pub panels: usize,
    pub radius: f64,
    pub converged: bool,
}

/// Integrates `f` over `[start, ∞)` panel by panel; `width(k, s)` gives the
/// width of panel `k` starting at `s`. Stops after `quiet_panels`
/// consecutive negligible panels.
pub fn march<T, F, W>(mut f: F, start: f64, mut width: W, opts: MarchOptions) -> March<T>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
    W: FnMut(usize, f64) -> f64,
{
    let mut value = T::zero();
    let mut error = 0.0;
    let mut magnitude = 0.0f64;
    let mut s = start;
    let mut quiet = 0;
    let mut k = 0;
    while k < opts.max_panels {
        let w = width(k, s);
        let end = s + w;
        // Per-panel accuracy relative to the running |f|-mass keeps
        // tiny tail panels from demanding pointless refinement.
        let scale = magnitude.max(value.norm());
        let panel_tol = Tolerance::new(opts.tol.abs.max(opts.tol.rel * scale * 1e-2), opts.tol.rel);
        let q = adaptive(&mut f, s, end, panel_tol, opts.max_intervals_per_panel);
        value = value + q.value;
        error += q.error;
        magnitude += q.magnitude;
        k += 1;
        s = end;
        // Leading panels where the integrand vanishes identically are not
        // evidence of decay.
        if magnitude > 0.0 && q.magnitude <= opts.trunc_tol * magnitude {
            quiet += 1;
        } else {
            quiet = 0;
        }
        if k >= opts.min_panels && quiet >= opts.quiet_panels {
            let converged = error <= opts.tol.target(value.norm()).max(opts.tol.rel * magnitude * 1e-2);
            return March {
                value,
                error,
                magnitude,
                panels: k,
                radius: s,
                converged,
            };
        }
    }
    March {
        value,
        error,
        magnitude,
        panels: k,
        radius: s,
        converged: false,
    }
}

/// Extrapolated limit of a sequence of partial sums by Wynn's epsilon
/// algorithm; returns the last even-column entry.
pub fn wynn_epsilon(sums: &[f64]) -> f64 {
    let n = sums.len();
    if n < 3 {
        return *sums.last().unwrap_or(&0.0);
    }
    // prev = column k−1, cur = column k
    let mut prev = vec![0.0; n + 1];
    let mut cur: Vec<f64> = sums.to_vec();
    let mut best = sums[n - 1];
    let mut k = 0;
    while cur.len() >= 2 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let diff = cur[i + 1] - cur[i];
            if diff == 0.0 {
                return cur[i + 1];
            }
            next.push(prev[i + 1] + 1.0 / diff);
        }
        prev = cur;
        cur = next;
        k += 1;
        if k % 2 == 0 {
            if let Some(&v) = cur.last() {
                if v.is_finite() {
                    best = v;
                }
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
pub struct Accelerated {
    pub value: f64,
    pub error: f64,
    pub terms: usize,
    pub converged: bool,
}

/// Sums `term(0) + term(1) + ...` with Wynn acceleration, stopping when two
/// successive extrapolations agree to `tol.target`.
pub fn accelerated_sum<F: FnMut(usize) -> f64>(mut term: F, max_terms: usize, tol: Tolerance) -> Accelerated {
    const WINDOW: usize = 40;
    let mut sums = Vec::new();
    let mut acc = 0.0;
    let mut last = f64::NAN;
    let mut agree = 0;
    for i in 0..max_terms {
        acc += term(i);
        sums.push(acc);
        if sums.len() < 6 {
            continue;
        }
        let lo = sums.len().saturating_sub(WINDOW);
        let est = wynn_epsilon(&sums[lo..]);
        let change = (est - last).abs();
        last = est;
        if change <= tol.target(est.abs()) {
            agree += 1;
            if agree >= 2 {
                return Accelerated {
                    value: est,
                    error: change,
                    terms: i + 1,
                    converged: true,
                };
            }
        } else {
            agree = 0;
        }
    }
    Accelerated {
        value: last,
        error: f64::INFINITY,
        terms: max_terms,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_rule_is_exact_for_low_degree_polynomials() {
        // K15 integrates degree 22 exactly; G7 only to degree 13.
        let p = |x: f64| x.powi(22) - 3.0 * x.powi(7) + 1.0;
        let panel = gk15(&mut { p }, -1.0, 1.0);
        let exact = 2.0 / 23.0 + 2.0;
        assert!((panel.value - exact).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let q = adaptive(|x: f64| x.powf(-0.5), 0.0, 1.0, Tolerance::relative(1e-10), 500);
        assert!(q.converged);
        assert!((q.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn adaptive_complex_oscillatory() {
        let q = adaptive(
            |x: f64| Complex64::new(0.0, 40.0 * x).exp(),
            0.0,
            1.0,
            Tolerance::relative(1e-12),
            500,
        );
        let exact = (Complex64::new(0.0, 40.0).exp() - 1.0) / Complex64::new(0.0, 40.0);
        assert!((q.value - exact).norm() < 1e-12);
    }

    #[test]
    fn march_integrates_exponential_tail() {
        let m = march(
            |x: f64| (-x).exp() * x.cos(),
            0.0,
            |_, _| 1.0,
            MarchOptions::default(),
        );
        assert!(m.converged);
        assert!((m.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn wynn_sums_alternating_harmonic() {
        let a = accelerated_sum(
            |i| if i % 2 == 0 { 1.0 } else { -1.0 } / (i as f64 + 1.0),
            200,
            Tolerance::relative(1e-13),
        );
        assert!(a.converged);
        assert!((a.value - std::f64::consts::LN_2).abs() < 1e-12);
    }
}
