use invsub::contour;
use invsub::mc::{estimate_inverse_density, sample_sigma, SimulationConfig};
use invsub::quad::{self, Tolerance};
use invsub::{BernsteinDescriptor, ContourSpec, DensityQuery, Target};

#[test]
fn gamma_increments_have_gamma_moments() {
    let cfg = SimulationConfig::default().with_paths(200_000);
    let x = 3.0;
    let s = sample_sigma(&BernsteinDescriptor::gamma(), x, &cfg).unwrap();
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // Gamma(3, 1): mean 3, variance 3, standard error of the mean ≈ 0.004.
    assert!((mean - x).abs() < 0.02, "mean {mean}");
    assert!((var - x).abs() < 0.1, "variance {var}");
}

#[test]
fn creep_fraction_matches_the_integrated_creeping_density() {
    let phi = BernsteinDescriptor::stable(0.5).unwrap().add_drift(0.5).unwrap();
    let t = 1.0;
    let cfg = SimulationConfig::default().with_paths(200_000);
    let est = estimate_inverse_density(&phi, t, &[0.5, 1.0], &cfg).unwrap();
    let spec = ContourSpec::bromwich();
    let creeping = |x: f64| {
        contour::invert(&phi, &DensityQuery::new(Target::Creeping, x, t), &spec)
            .unwrap()
            .value
    };
    let p = quad::adaptive(creeping, 0.0, t / phi.drift * (1.0 - 1e-9), Tolerance::relative(1e-9), 400).value;
    let se = (p * (1.0 - p) / cfg.n_paths as f64).sqrt();
    assert!((est.creep_fraction - p).abs() < 5.0 * se, "{} vs {p}", est.creep_fraction);
}

#[test]
fn estimates_do_not_depend_on_the_thread_count() {
    let phi = BernsteinDescriptor::tempered_stable(0.5, 1.0).unwrap();
    let cfg = SimulationConfig::default().with_paths(40_000).with_seed(9);
    let grid = [0.2, 0.6, 1.0];
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_inverse_density(&phi, 1.0, &grid, &cfg).unwrap())
    };
    let (one, four) = (run(1), run(4));
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&one.jump.estimate), bits(&four.jump.estimate));
    assert_eq!(bits(&one.jump.ci_hi), bits(&four.jump.ci_hi));
}

#[test]
fn different_seeds_give_different_samples() {
    let phi = BernsteinDescriptor::stable(0.5).unwrap();
    let a = sample_sigma(&phi, 1.0, &SimulationConfig::default().with_paths(100).with_seed(1)).unwrap();
    let b = sample_sigma(&phi, 1.0, &SimulationConfig::default().with_paths(100).with_seed(2)).unwrap();
    assert_ne!(a, b);
}
