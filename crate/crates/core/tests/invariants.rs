mod common;

use proptest::prelude::*;

use common::{builtins, invariant_failures};

fn probe(a: f64, b: f64, numeric: bool) -> Result<(), TestCaseError> {
    for d in builtins() {
        if (d.rel_slack > 1e-9) != numeric {
            continue;
        }
        let fails = invariant_failures(&d.phi, a, b, d.rel_slack);
        prop_assert!(fails.is_empty(), "{} at a = {a}, b = {b}: {fails:?}", d.name);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn closed_form_descriptors(ln_a in (0.01f64).ln()..(1e3f64).ln(), b in -100.0f64..100.0) {
        probe(ln_a.exp(), b, false)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn numeric_descriptors(ln_a in (0.1f64).ln()..(100f64).ln(), b in -50.0f64..50.0) {
        probe(ln_a.exp(), b, true)?;
    }
}
