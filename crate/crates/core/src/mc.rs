//! Monte Carlo ground truth for σ(x) and for the density of L(t).
//!
//! Pure stable exponents are sampled exactly (L(t) has the law of
//! (t/S)^α with S = σ(1)). Everything else is simulated as a compound
//! Poisson process of jumps larger than `small_jump_cut`, plus the drift
//! and the mean of the removed small jumps, with L(t) solved exactly on
//! each linear segment between jumps.

use std::f64::consts::PI;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::bernstein::{BernsteinDescriptor, JumpPart};
use crate::error::{Error, Result};
use crate::query::Target;
use crate::special;

/// Paths per independent random stream.
const CHUNK: u64 = 1 << 14;
/// Points in the tabulated inverse Lévy tail.
const TAIL_TABLE: usize = 512;
/// Mass of the Lévy tail ignored beyond the table.
const TAIL_CUTOFF: f64 = 1e-14;
/// Kernel support in bandwidths.
const KERNEL_REACH: f64 = 8.0;
/// Rejection sampling of tempered stable laws gives up above this x·λ^α.
const MAX_TEMPERING: f64 = 20.0;

#[derive(Debug, Clone, Serialize)]
pub struct SimulationConfig {
    pub n_paths: u64,
    /// Jumps below this are replaced by their mean.
    pub small_jump_cut: f64,
    pub rng_seed: u64,
    /// Clock resolution for passage-time bracketing. The inter-jump solver
    /// is exact, so this only bounds the reported resolution.
    pub step_clock: f64,
    pub batches: usize,
    /// Multiplier on Silverman's bandwidth.
    pub bandwidth_scale: f64,
    /// Two-sided confidence level of the batch-means band.
    pub ci_level: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            small_jump_cut: 1e-4,
            rng_seed: 42,
            step_clock: 1e-3,
            batches: 20,
            bandwidth_scale: 0.8,
            ci_level: 0.95,
        }
    }
}

impl SimulationConfig {
    pub fn with_paths(mut self, n: u64) -> Self {
        self.n_paths = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths < self.batches as u64 || self.batches < 2 {
            return Err(Error::domain(format!(
                "need at least 2 batches and one path per batch (paths {}, batches {})",
                self.n_paths, self.batches
            )));
        }
        if !(self.small_jump_cut > 0.0 && self.step_clock > 0.0 && self.bandwidth_scale > 0.0) {
            return Err(Error::domain("small_jump_cut, step_clock and bandwidth_scale must be positive"));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::domain(format!("ci_level must lie in (0, 1), got {}", self.ci_level)));
        }
        Ok(())
    }
}

/// Inverse of a tabulated Lévy tail on [ε, y_max], interpolated as a local
/// power law.
#[derive(Debug, Clone)]
struct InverseTail {
    ys: Vec<f64>,
    tails: Vec<f64>,
}

impl InverseTail {
    fn build(tail: &dyn Fn(f64) -> Result<f64>, eps: f64, support: Option<f64>) -> Result<Option<Self>> {
        let top = tail(eps)?;
        if top <= 0.0 {
            return Ok(None);
        }
        let y_max = match support {
            Some(u) if u > eps => u,
            Some(_) => return Ok(None),
            None => {
                let mut y = eps.max(1.0);
                let mut steps = 0;
                while tail(y)? > TAIL_CUTOFF * top {
                    y *= 2.0;
                    steps += 1;
                    if steps > 200 {
                        return Err(Error::capability("Lévy tail does not decay; cannot tabulate jump sizes"));
                    }
                }
                y
            }
        };
        let ratio = (y_max / eps).ln();
        let ys: Vec<f64> = (0..TAIL_TABLE)
            .map(|i| eps * (ratio * i as f64 / (TAIL_TABLE - 1) as f64).exp())
            .collect();
        let mut tails = ys.iter().map(|&y| tail(y)).collect::<Result<Vec<_>>>()?;
        tails[0] = top;
        // Enforce monotonicity against quadrature noise.
        for i in 1..tails.len() {
            tails[i] = tails[i].min(tails[i - 1]).max(0.0);
        }
        Ok(Some(Self { ys, tails }))
    }

    fn rate(&self) -> f64 {
        self.tails[0]
    }

    /// Jump size with P(Y > y) = tail(y)/tail(ε).
    fn sample(&self, u: f64) -> f64 {
        let target = u * self.tails[0];
        // tails is nonincreasing; find the last index with tails[i] ≥ target.
        let i = self.tails.partition_point(|&v| v >= target).saturating_sub(1);
        if i + 1 >= self.ys.len() {
            return self.ys[self.ys.len() - 1];
        }
        let (y0, y1, t0, t1) = (self.ys[i], self.ys[i + 1], self.tails[i], self.tails[i + 1]);
        if t1 > 0.0 && t0 > t1 {
            let w = (t0 / target).ln() / (t0 / t1).ln();
            y0 * (y1 / y0).powf(w)
        } else if t0 > t1 {
            y0 + (y1 - y0) * (t0 - target) / (t0 - t1)
        } else {
            y0
        }
    }
}

/// Exact marginal law of one additive component, when one is known.
#[derive(Debug, Clone, Copy)]
enum Exact {
    Stable { alpha: f64 },
    TemperedStable { alpha: f64, lambda: f64 },
    Gamma,
    PointJump { rate: f64, size: f64 },
}

#[derive(Debug, Clone)]
struct Part {
    exact: Option<Exact>,
    skeleton: Option<Skeleton>,
}

/// Compound Poisson approximation of one component.
#[derive(Debug, Clone)]
struct Skeleton {
    rate: f64,
    compensation: f64,
    jumps: JumpLaw,
}

#[derive(Debug, Clone)]
enum JumpLaw {
    /// Pareto tail ε·U^{−1/α}.
    Pareto { eps: f64, alpha: f64 },
    Fixed(f64),
    Table(InverseTail),
}

impl Skeleton {
    /// Compound Poisson increment over a clock interval of length x.
    fn increment<R: Rng>(&self, x: f64, rng: &mut R) -> f64 {
        let n = if self.rate > 0.0 {
            Poisson::new(self.rate * x).map(|p| p.sample(rng)).unwrap_or(0.0) as u64
        } else {
            0
        };
        self.compensation * x + (0..n).map(|_| self.jumps.sample(rng)).sum::<f64>()
    }
}

impl JumpLaw {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        match self {
            JumpLaw::Pareto { eps, alpha } => eps * u.powf(-1.0 / alpha),
            JumpLaw::Fixed(y) => *y,
            JumpLaw::Table(t) => t.sample(u),
        }
    }
}

fn flatten(part: &JumpPart, out: &mut Vec<JumpPart>) {
    match part {
        JumpPart::Zero => {}
        JumpPart::Sum(parts) => parts.iter().for_each(|p| flatten(p, out)),
        other => out.push(other.clone()),
    }
}

fn skeleton_of(part: &JumpPart, eps: f64) -> Result<Option<Skeleton>> {
    Ok(match part {
        JumpPart::Stable { alpha } => Some(Skeleton {
            rate: eps.powf(-alpha) / special::gamma(1.0 - alpha),
            compensation: part.mean_below(eps)?,
            jumps: JumpLaw::Pareto { eps, alpha: *alpha },
        }),
        JumpPart::PointJump { rate, size } => (*rate > 0.0).then_some(Skeleton {
            rate: *rate,
            compensation: 0.0,
            jumps: JumpLaw::Fixed(*size),
        }),
        JumpPart::PowerComposition { .. } => {
            return Err(Error::capability(
                "no sampler for a power composition: its Lévy measure has no evaluator",
            ))
        }
        _ => {
            let tail = |t: f64| part.tail(t);
            let compensation = part.mean_below(eps)?;
            match InverseTail::build(&tail, eps, part.support_upper())? {
                Some(table) => Some(Skeleton {
                    rate: table.rate(),
                    compensation,
                    jumps: JumpLaw::Table(table),
                }),
                None => (compensation > 0.0).then_some(Skeleton {
                    rate: 0.0,
                    compensation,
                    jumps: JumpLaw::Fixed(0.0),
                }),
            }
        }
    })
}

/// σ(1) for Φ(z) = z^α: Kanter's representation, or 1/(2N²) at α = 1/2.
fn sample_stable_unit<R: Rng>(alpha: f64, rng: &mut R) -> f64 {
    if alpha == 0.5 {
        let n: f64 = rng.sample(StandardNormal);
        return 1.0 / (2.0 * n * n);
    }
    let u: f64 = PI * rng.sample::<f64, _>(Open01);
    let e: f64 = rng.sample(Exp1);
    let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
    let b = ((1.0 - alpha) * u).sin() / e;
    a * b.powf((1.0 - alpha) / alpha)
}

/// A descriptor prepared for sampling.
pub struct Simulator {
    kill: f64,
    drift: f64,
    parts: Vec<Part>,
    skeletons: Vec<Skeleton>,
    exact_stable: Option<f64>,
    total_rate: f64,
    velocity: f64,
}

impl Simulator {
    pub fn new(phi: &BernsteinDescriptor, config: &SimulationConfig) -> Result<Self> {
        config.validate()?;
        let mut flat = Vec::new();
        flatten(&phi.jump, &mut flat);
        let eps = config.small_jump_cut;
        let parts = flat
            .iter()
            .map(|p| {
                let exact = match *p {
                    JumpPart::Stable { alpha } => Some(Exact::Stable { alpha }),
                    JumpPart::TemperedStable { alpha, lambda } => Some(Exact::TemperedStable { alpha, lambda }),
                    JumpPart::Gamma => Some(Exact::Gamma),
                    JumpPart::PointJump { rate, size } => Some(Exact::PointJump { rate, size }),
                    _ => None,
                };
                Ok(Part {
                    exact,
                    skeleton: skeleton_of(p, eps)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let skeletons: Vec<Skeleton> = parts.iter().filter_map(|p| p.skeleton.clone()).collect();
        let exact_stable = match (flat.as_slice(), phi.drift) {
            ([JumpPart::Stable { alpha }], 0.0) => Some(*alpha),
            _ => None,
        };
        let total_rate = skeletons.iter().map(|s| s.rate).sum();
        let velocity = phi.drift + skeletons.iter().map(|s| s.compensation).sum::<f64>();
        Ok(Self {
            kill: phi.kill_rate,
            drift: phi.drift,
            parts,
            skeletons,
            exact_stable,
            total_rate,
            velocity,
        })
    }

    /// One draw of σ(x); +∞ when killed before x.
    pub fn sample_sigma<R: Rng>(&self, x: f64, rng: &mut R) -> f64 {
        if self.kill > 0.0 {
            let e: f64 = rng.sample(Exp1);
            if e / self.kill < x {
                return f64::INFINITY;
            }
        }
        let mut s = self.drift * x;
        for part in &self.parts {
            s += match part.exact {
                Some(Exact::Stable { alpha }) => x.powf(1.0 / alpha) * sample_stable_unit(alpha, rng),
                Some(Exact::TemperedStable { alpha, lambda }) if x * lambda.powf(alpha) <= MAX_TEMPERING => loop {
                    let v = x.powf(1.0 / alpha) * sample_stable_unit(alpha, rng);
                    let u: f64 = rng.random();
                    if u < (-lambda * v).exp() {
                        break v;
                    }
                },
                Some(Exact::Gamma) => Gamma::new(x, 1.0).map(|g| g.sample(rng)).unwrap_or(0.0),
                Some(Exact::PointJump { rate, size }) => {
                    Poisson::new(rate * x).map(|p| p.sample(rng)).unwrap_or(0.0) * size
                }
                _ => part.skeleton.as_ref().map_or(0.0, |sk| sk.increment(x, rng)),
            };
        }
        s
    }

    /// One draw of (L(t), event).
    pub fn sample_passage<R: Rng>(&self, t: f64, rng: &mut R) -> (f64, Event) {
        let killed_at = if self.kill > 0.0 {
            rng.sample::<f64, _>(Exp1) / self.kill
        } else {
            f64::INFINITY
        };
        if let Some(alpha) = self.exact_stable {
            let l = (t / sample_stable_unit(alpha, rng)).powf(alpha);
            return if killed_at < l { (killed_at, Event::Killed) } else { (l, Event::Jump) };
        }
        let (mut x, mut s) = (0.0f64, 0.0f64);
        loop {
            let gap = if self.total_rate > 0.0 {
                rng.sample::<f64, _>(Exp1) / self.total_rate
            } else {
                f64::INFINITY
            };
            let cross = if self.velocity > 0.0 { x + (t - s) / self.velocity } else { f64::INFINITY };
            let next = x + gap;
            if killed_at <= cross.min(next) {
                return (killed_at, Event::Killed);
            }
            if cross <= next {
                // Only the true drift creeps; crossings driven by the
                // small-jump compensation count as jumps.
                let creep = self.drift > 0.0 && rng.random::<f64>() * self.velocity < self.drift;
                return (cross, if creep { Event::Creep } else { Event::Jump });
            }
            s += self.velocity * gap + self.jump(rng);
            x = next;
            if s >= t {
                return (x, Event::Jump);
            }
        }
    }

    fn jump<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.skeletons.len() == 1 {
            return self.skeletons[0].jumps.sample(rng);
        }
        let mut u = rng.random::<f64>() * self.total_rate;
        for sk in &self.skeletons {
            if u < sk.rate {
                return sk.jumps.sample(rng);
            }
            u -= sk.rate;
        }
        self.skeletons.last().map_or(0.0, |s| s.jumps.sample(rng))
    }

    /// ∫₀^ε y μ(dy), the drift added for removed small jumps.
    pub fn compensation(&self) -> f64 {
        self.velocity - self.drift
    }

    pub fn is_exact(&self) -> bool {
        self.exact_stable.is_some() || self.total_rate == 0.0
    }
}

/// How σ passed level t.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    Jump,
    Creep,
    Killed,
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Runs `draw` n times over fixed chunks of independent streams; the
/// result is independent of the thread count.
fn simulate<T: Send, F>(n: u64, seed: u64, draw: F) -> Vec<T>
where
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len).map(|_| draw(&mut rng)).collect::<Vec<T>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// n_paths independent draws of σ(x).
pub fn sample_sigma(phi: &BernsteinDescriptor, x: f64, config: &SimulationConfig) -> Result<Vec<f64>> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("σ(x) needs x > 0, got {x}")));
    }
    let sim = Simulator::new(phi, config)?;
    Ok(simulate(config.n_paths, config.rng_seed, |rng| sim.sample_sigma(x, rng)))
}

/// Kernel estimate with confidence band for one event type.
#[derive(Debug, Clone, Serialize)]
pub struct ComponentEstimate {
    pub estimate: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    pub bandwidth: f64,
    pub count: u64,
}

impl ComponentEstimate {
    pub fn half_width(&self, i: usize) -> f64 {
        0.5 * (self.ci_hi[i] - self.ci_lo[i])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InverseDensityEstimate {
    pub t: f64,
    pub x_grid: Vec<f64>,
    /// Density of L(t) on {σ jumps across t}: f.
    pub jump: ComponentEstimate,
    /// On {σ creeps across t}: f_c.
    pub creeping: ComponentEstimate,
    /// On {killed before passing t}: f_k.
    pub killed: ComponentEstimate,
    pub creep_fraction: f64,
    pub killed_fraction: f64,
    pub n_paths: u64,
    pub exact_sampler: bool,
}

impl InverseDensityEstimate {
    pub fn component(&self, target: Target) -> Option<&ComponentEstimate> {
        match target {
            Target::F => Some(&self.jump),
            Target::Creeping => Some(&self.creeping),
            Target::Killed => Some(&self.killed),
            _ => None,
        }
    }
}

/// Silverman's rule, 0.9·min(sd, IQR/1.34)·n^{−1/5}.
fn silverman(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n < 2 {
        return f64::NAN;
    }
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let var = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let q = |p: f64| sorted[((n - 1) as f64 * p).round() as usize];
    let iqr = (q(0.75) - q(0.25)) / 1.34;
    let spread = if iqr > 0.0 { var.sqrt().min(iqr) } else { var.sqrt() };
    0.9 * spread * (n as f64).powf(-0.2)
}

/// Gaussian kernel estimate with reflection at 0, normalised by `total`.
fn kde(sorted: &[f64], grid: &[f64], h: f64, total: f64) -> Vec<f64> {
    let norm = 1.0 / (total * h * (2.0 * PI).sqrt());
    let reach = KERNEL_REACH * h;
    grid.iter()
        .map(|&x| {
            let lo = sorted.partition_point(|&v| v < x - reach);
            let hi = sorted.partition_point(|&v| v <= x + reach);
            let mut acc: f64 = sorted[lo..hi].iter().map(|&v| (-0.5 * ((x - v) / h).powi(2)).exp()).sum();
            let mirror = sorted.partition_point(|&v| v <= reach - x);
            acc += sorted[..mirror].iter().map(|&v| (-0.5 * ((x + v) / h).powi(2)).exp()).sum::<f64>();
            acc * norm
        })
        .collect()
}

fn component_estimate(
    samples: &[(f64, Event)],
    event: Event,
    grid: &[f64],
    config: &SimulationConfig,
) -> ComponentEstimate {
    let (batches, scale) = (config.batches, config.bandwidth_scale);
    let n = samples.len();
    let mut all: Vec<f64> = samples.iter().filter(|s| s.1 == event).map(|s| s.0).collect();
    all.sort_by(f64::total_cmp);
    let count = all.len() as u64;
    let zeros = || vec![0.0; grid.len()];
    let h = scale * silverman(&all);
    if !(h > 0.0) {
        return ComponentEstimate {
            estimate: zeros(),
            ci_lo: zeros(),
            ci_hi: zeros(),
            bandwidth: 0.0,
            count,
        };
    }
    let per_batch: Vec<Vec<f64>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let (lo, hi) = (b * n / batches, (b + 1) * n / batches);
            let mut xs: Vec<f64> = samples[lo..hi].iter().filter(|s| s.1 == event).map(|s| s.0).collect();
            xs.sort_by(f64::total_cmp);
            kde(&xs, grid, h, (hi - lo) as f64)
        })
        .collect();
    let nb = batches as f64;
    let quantile = StudentsT::new(0.0, 1.0, nb - 1.0)
        .map(|d| d.inverse_cdf(0.5 + 0.5 * config.ci_level))
        .unwrap_or(f64::NAN);
    let mut est = zeros();
    let mut lo = zeros();
    let mut hi = zeros();
    for i in 0..grid.len() {
        let mean = per_batch.iter().map(|v| v[i]).sum::<f64>() / nb;
        let var = per_batch.iter().map(|v| (v[i] - mean).powi(2)).sum::<f64>() / (nb - 1.0);
        let half = quantile * (var / nb).sqrt();
        est[i] = mean;
        lo[i] = mean - half;
        hi[i] = mean + half;
    }
    ComponentEstimate {
        estimate: est,
        ci_lo: lo,
        ci_hi: hi,
        bandwidth: h,
        count,
    }
}

/// Kernel estimates of f, f_c and f_k at time t with batch-means bands.
pub fn estimate_inverse_density(
    phi: &BernsteinDescriptor,
    t: f64,
    x_grid: &[f64],
    config: &SimulationConfig,
) -> Result<InverseDensityEstimate> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("t must be positive, got {t}")));
    }
    let sim = Simulator::new(phi, config)?;
    let samples = simulate(config.n_paths, config.rng_seed, |rng| sim.sample_passage(t, rng));
    let n = samples.len() as f64;
    let frac = |e: Event| samples.iter().filter(|s| s.1 == e).count() as f64 / n;
    let est = |e: Event| component_estimate(&samples, e, x_grid, config);
    Ok(InverseDensityEstimate {
        t,
        x_grid: x_grid.to_vec(),
        jump: est(Event::Jump),
        creeping: est(Event::Creep),
        killed: est(Event::Killed),
        creep_fraction: frac(Event::Creep),
        killed_fraction: frac(Event::Killed),
        n_paths: config.n_paths,
        exact_sampler: sim.is_exact(),
    })
}
