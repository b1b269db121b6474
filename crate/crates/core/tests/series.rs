use invsub::series::{polynomial_approx, tempered_stable_series_f, CoefficientSource, SeriesEngine};
use invsub::special::gamma;
use invsub::{BernsteinDescriptor, DensityQuery, Target};

fn rel_err(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn gamma_g_series_matches_the_gamma_law() {
    let phi = BernsteinDescriptor::gamma();
    let engine = SeriesEngine::new(&phi).unwrap();
    assert_eq!(engine.source(), CoefficientSource::KeyholeNumeric);
    for (x, t) in [(0.5, 1.0), (1.0, 2.0), (2.5, 1.5)] {
        let got = engine.series_g(&DensityQuery::new(Target::SubordinatorDensity, x, t), 200, 1e-15).unwrap();
        let want = t.powf(x - 1.0) * (-t).exp() / gamma(x);
        assert!(rel_err(got.value, want) < 1e-8, "({x}, {t}): {} vs {want}", got.value);
    }
}

#[test]
fn tempered_closed_form_matches_numeric_coefficients() {
    let phi = BernsteinDescriptor::tempered_stable(0.5, 1.0).unwrap();
    let numeric = SeriesEngine::new(&phi).unwrap();
    assert_eq!(numeric.source(), CoefficientSource::HalfplaneNumeric);
    for (x, t) in [(0.5, 0.5), (1.0, 2.0), (2.0, 1.0)] {
        let closed = tempered_stable_series_f(0.5, 1.0, x, t, 400, 1e-15).unwrap();
        let got = numeric.series_f(&DensityQuery::new(Target::F, x, t), 400, 1e-15).unwrap();
        assert!(rel_err(got.value, closed.value) < 1e-8, "({x}, {t}): {} vs {}", got.value, closed.value);
    }
}

#[test]
fn remainder_exponents_on_gamma() {
    // No coefficient of the gamma series vanishes, so the remainder of the
    // degree-n polynomial decays like x^{n+1}.
    let engine = SeriesEngine::new(&BernsteinDescriptor::gamma()).unwrap();
    for n in 0..=2 {
        let rep = polynomial_approx(&engine, n, 0, 0, (1.0, 2.0), (1e-4, 1e-2)).unwrap();
        assert!((rep.fitted_exponent - (n as f64 + 1.0)).abs() < 0.2, "n = {n}: {}", rep.fitted_exponent);
        assert!(rep.constant.is_finite() && rep.constant > 0.0);
    }
}

#[test]
fn polynomial_band_must_avoid_the_drift_edge() {
    let phi = BernsteinDescriptor::stable(0.5).unwrap().add_drift(1.0).unwrap();
    let engine = SeriesEngine::new(&phi).unwrap();
    assert!(polynomial_approx(&engine, 1, 0, 0, (1.0, 2.0), (0.1, 1.5)).is_err());
}
