mod common;

use common::Oracle;
use fdcf_core::QuantizerParams;
use std::f64::consts::PI;

#[test]
fn legendre_rule_is_exact_for_polynomials() {
    let o = Oracle::new();
    let v = o.integrate(|x| x.powi(15) + 3.0 * x.powi(4), 0.0, 1.0, 1);
    assert!((v - (1.0 / 16.0 + 3.0 / 5.0)).abs() < 1e-14);
}

#[test]
fn gains_match_numerical_oracle() {
    let o = Oracle::new();
    for nu in 1..=8 {
        let q = QuantizerParams::new(nu).unwrap();
        let d = o.optimal_delta(nu);
        let (a, b) = o.gains(nu, d);
        assert!(
            (q.a_tilde - a).abs() < 5e-5,
            "ν={nu}: ã {} vs oracle {a}",
            q.a_tilde
        );
        assert!(
            (q.distortion() - (b - a * a)).abs() < 5e-5,
            "ν={nu}: distortion {} vs oracle {}",
            q.distortion(),
            b - a * a
        );
        // Same Δ, same gains: the closed form and the quadrature agree to erfc precision.
        let (ca, cb) = fdcf_core::quantizer::bussgang_gains(nu, q.delta_opt);
        let (oa, ob) = o.gains(nu, q.delta_opt);
        assert!(
            (ca - oa).abs() < 1e-9 && (cb - ob).abs() < 1e-9,
            "ν={nu}: {} {}",
            ca - oa,
            cb - ob
        );
    }
}

#[test]
fn reference_values() {
    let q1 = QuantizerParams::new(1).unwrap();
    assert!((q1.a_tilde - 2.0 / PI).abs() < 1e-6);
    assert!((q1.distortion() - 0.2313).abs() < 1e-4);
    assert!((q1.delta_opt - 1.596).abs() < 1e-3);
    let q2 = QuantizerParams::new(2).unwrap();
    assert!((q2.a_tilde - 0.8812).abs() < 1e-4);
    assert!((q2.distortion() - 0.1047).abs() < 1e-4);
}
