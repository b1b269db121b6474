#![allow(dead_code)]

use std::f64::consts::{E, PI};

use invsub::conditions::UPPER_TAIL_CONST;
use invsub::config::descriptor_from_json;
use invsub::{BernsteinDescriptor, C64};

/// A built-in descriptor and the slack its invariants are checked with.
pub struct Builtin {
    pub name: &'static str,
    pub phi: BernsteinDescriptor,
    /// Relative slack; closed forms use an absolute 1e-10 on top.
    pub rel_slack: f64,
}

fn json(text: &str) -> BernsteinDescriptor {
    descriptor_from_json(text).unwrap()
}

const CLOSED: f64 = 1e-12;
const NUMERIC: f64 = 1e-7;

pub fn builtins() -> Vec<Builtin> {
    let b = |name, phi, rel_slack| Builtin { name, phi, rel_slack };
    vec![
        b("stable(0.3)", BernsteinDescriptor::stable(0.3).unwrap(), CLOSED),
        b("stable(0.5)", BernsteinDescriptor::stable(0.5).unwrap(), CLOSED),
        b("stable(0.7)", BernsteinDescriptor::stable(0.7).unwrap(), CLOSED),
        b("tempered_stable(0.5, 1)", BernsteinDescriptor::tempered_stable(0.5, 1.0).unwrap(), CLOSED),
        b("tempered_stable(0.3, 2)", BernsteinDescriptor::tempered_stable(0.3, 2.0).unwrap(), CLOSED),
        b("gamma", BernsteinDescriptor::gamma(), CLOSED),
        b("point_jump(2, 0.5)", BernsteinDescriptor::point_jump(2.0, 0.5).unwrap(), CLOSED),
        b("drift(1.5) kill(0.2)", BernsteinDescriptor::drift_only(1.5, 0.2).unwrap(), CLOSED),
        b(
            "stable(0.5) drift(0.5) kill(0.3)",
            BernsteinDescriptor::stable(0.5).unwrap().add_drift(0.5).unwrap().add_kill(0.3).unwrap(),
            CLOSED,
        ),
        b(
            "sum(gamma, tempered_stable(0.7, 0.5))",
            BernsteinDescriptor::sum(vec![
                BernsteinDescriptor::gamma(),
                BernsteinDescriptor::tempered_stable(0.7, 0.5).unwrap(),
            ])
            .unwrap(),
            CLOSED,
        ),
        b(
            "power_composition(0.5, gamma)",
            BernsteinDescriptor::power_composition(0.5, BernsteinDescriptor::gamma()).unwrap(),
            CLOSED,
        ),
        b(
            "density power(0.4)",
            json(r#"{"schema_version": 1, "kind": "levy_density", "family": "power", "alpha": 0.4}"#),
            NUMERIC,
        ),
        b(
            "density tempered_power(0.6, 1)",
            json(r#"{"schema_version": 1, "kind": "levy_density", "family": "tempered_power", "alpha": 0.6, "lambda": 1}"#),
            NUMERIC,
        ),
        b(
            "density exponential(2)",
            json(r#"{"schema_version": 1, "kind": "levy_density", "family": "exponential", "rate": 2}"#),
            NUMERIC,
        ),
        b(
            "density log_inverse",
            json(r#"{"schema_version": 1, "kind": "levy_density", "family": "log_inverse"}"#),
            NUMERIC,
        ),
    ]
}

pub const INVARIANTS: [&str; 8] = [
    "re_phi_dominates",
    "alternating_signs",
    "x_phi1_below_phi",
    "x2_phi2_below_2phi",
    "derivative_modulus",
    "ratio_bound",
    "im_re_increments",
    "phi2_sandwich",
];

/// Checks the eight invariants at a > 0 and z = a(1 + ib). Returns the
/// names of those that fail beyond `rel_slack` (plus 1e-10 absolute).
pub fn invariant_failures(phi: &BernsteinDescriptor, a: f64, b: f64, rel_slack: f64) -> Vec<String> {
    let mut fails = Vec::new();
    let le = |lhs: f64, rhs: f64, scale: f64| lhs <= rhs + 1e-10 + rel_slack * scale.abs();
    let z = C64::new(a, a * b);
    let eval = || -> invsub::Result<Vec<(&'static str, bool)>> {
        let pa = phi.phi_real(a)?;
        let pz = phi.phi(z)?;
        let d = [phi.deriv_real(1, a)?, phi.deriv_real(2, a)?, phi.deriv_real(3, a)?];
        let dz = [phi.deriv(1, z)?, phi.deriv(2, z)?, phi.deriv(3, z)?];
        let mut out = Vec::with_capacity(8);
        out.push(("re_phi_dominates", le(pa, pz.re, pz.norm())));
        let signs_ok = d
            .iter()
            .enumerate()
            .all(|(i, v)| le(0.0, if i % 2 == 0 { *v } else { -*v }, *v));
        out.push(("alternating_signs", signs_ok));
        out.push(("x_phi1_below_phi", le(a * d[0], pa, pa)));
        out.push(("x2_phi2_below_2phi", le(-a * a * d[1], 2.0 * pa, pa)));
        let mod_ok = dz.iter().zip(&d).all(|(w, v)| le(w.norm(), v.abs(), v.abs()));
        out.push(("derivative_modulus", mod_ok));
        if pa > 0.0 {
            let bound = 3.0 * b.abs().powi(2).max(1.0);
            out.push(("ratio_bound", le(pz.norm() / pa, bound, bound)));
            let im_ok = le(pz.im.abs() / pa, b.abs(), b.abs().max(1.0));
            let re_ok = le((pz.re - pa) / pa, b * b, (b * b).max(1.0));
            out.push(("im_re_increments", im_ok && re_ok));
        } else {
            out.push(("ratio_bound", pz.norm() <= 1e-10));
            out.push(("im_re_increments", pz.norm() <= 1e-10));
        }
        let levy = phi.levy();
        let m2 = -d[1];
        match levy.delta(a) {
            Ok(delta) => {
                let upper = delta + UPPER_TAIL_CONST * levy.tail(1.0 / a)? / (a * a);
                out.push(("phi2_sandwich", le(delta / E, m2, upper) && le(m2, upper, upper)));
            }
            // Power compositions carry no Lévy measure evaluator.
            Err(invsub::Error::Capability(_)) => {}
            Err(e) => return Err(e),
        }
        Ok(out)
    };
    match eval() {
        Ok(v) => {
            for (name, ok) in v {
                if !ok {
                    fails.push(name.to_string());
                }
            }
        }
        Err(e) => fails.push(format!("error: {e}")),
    }
    fails
}

/// e^{−x²/(4t)}/√(πt), the density of L(t) for Φ(z) = √z.
pub fn stable_half_f(x: f64, t: f64) -> f64 {
    (-x * x / (4.0 * t)).exp() / (PI * t).sqrt()
}

/// x t^{−3/2} e^{−x²/(4t)}/(2√π), the density of σ(x) for Φ(z) = √z.
pub fn stable_half_g(x: f64, t: f64) -> f64 {
    x * t.powf(-1.5) * (-x * x / (4.0 * t)).exp() / (2.0 * PI.sqrt())
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}
