use invsub::saddle::{asymptotic_density, asymptotic_g, classify, solve_saddle, Regime, RegimeBands};
use invsub::special::ln_gamma;
use invsub::{BernsteinDescriptor, DensityQuery, Error, Target};

#[test]
fn half_stable_leading_term_is_exact() {
    let phi = BernsteinDescriptor::stable(0.5).unwrap();
    for (x, t) in [(1.0, 1.0), (50.0, 10.0), (1e3, 1e3), (1e4, 2e3)] {
        let sol = asymptotic_density(&phi, &DensityQuery::new(Target::F, x, t)).unwrap();
        let got = sol.mantissa.ln() + sol.log_scale;
        let want = -x * x / (4.0 * t) - 0.5 * (std::f64::consts::PI * t).ln();
        assert!((got - want).abs() < 1e-10 * want.abs().max(1.0), "({x}, {t}): {got} vs {want}");
    }
}

#[test]
fn gamma_leading_term_is_stirling() {
    // The leading term for σ(x) ~ Gamma(x, 1) at t = x/2 replaces Γ(x) by
    // Stirling's formula, so x(ratio − 1) → 1/12.
    let phi = BernsteinDescriptor::gamma();
    for x in [100.0, 1000.0] {
        let t = x / 2.0;
        let sol = asymptotic_g(&phi, &DensityQuery::new(Target::SubordinatorDensity, x, t)).unwrap();
        let exact = (x - 1.0) * t.ln() - t - ln_gamma(x);
        let ratio = (sol.mantissa.ln() + sol.log_scale - exact).exp();
        assert!((x * (ratio - 1.0) - 1.0 / 12.0).abs() < 1e-3, "x = {x}: {ratio}");
    }
}

#[test]
fn saddle_solves_the_first_order_condition() {
    let cases = [
        BernsteinDescriptor::tempered_stable(0.3, 2.0).unwrap(),
        BernsteinDescriptor::gamma().add_drift(0.5).unwrap(),
        BernsteinDescriptor::sum(vec![BernsteinDescriptor::stable(0.7).unwrap(), BernsteinDescriptor::gamma()]).unwrap(),
    ];
    for phi in &cases {
        let p0 = phi.phi_prime_at_zero().unwrap();
        let b = phi.drift;
        let slopes: Vec<f64> = if p0.is_finite() {
            [0.2, 0.5, 0.8].iter().map(|w| b + w * (p0 - b)).collect()
        } else {
            vec![b + 0.5, b + 2.0, b + 20.0]
        };
        for (x, s) in [1.0, 10.0, 100.0].into_iter().zip(slopes) {
            let t = s * x;
            let c = solve_saddle(phi, t, x).unwrap();
            let d = phi.deriv_real(1, c).unwrap();
            assert!(((d - t / x) / (t / x)).abs() < 1e-10, "{}: Φ'({c}) = {d}, t/x = {}", phi.label, t / x);
        }
    }
}

#[test]
fn regimes_follow_t_over_x() {
    let bands = RegimeBands::default();
    let gamma = BernsteinDescriptor::gamma();
    assert_eq!(classify(&gamma, 0.5, 1.0, bands).unwrap(), Regime::Interior);
    assert_eq!(classify(&gamma, 0.99, 1.0, bands).unwrap(), Regime::MeanEdge);
    assert_eq!(classify(&gamma, 0.01, 1.0, bands).unwrap(), Regime::DriftEdge);
    let drifted = BernsteinDescriptor::stable(0.5).unwrap().add_drift(1.0).unwrap();
    assert_eq!(classify(&drifted, 1.001, 1.0, bands).unwrap(), Regime::DriftEdge);
}

#[test]
fn saddle_needs_t_over_x_inside_the_range_of_phi_prime() {
    let gamma = BernsteinDescriptor::gamma();
    assert!(matches!(solve_saddle(&gamma, 2.0, 1.0), Err(Error::Domain(_))));
}
