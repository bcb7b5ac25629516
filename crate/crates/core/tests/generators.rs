mod common;

use common::rel;
use haxc::generators::MAX_DERIVATIVE_ORDER;
use haxc::{Error, GeneratorSpec};
use proptest::prelude::*;

fn families() -> Vec<GeneratorSpec> {
    vec![
        GeneratorSpec::clayton(4.0 / 3.0).unwrap(),
        GeneratorSpec::clayton(0.3).unwrap(),
        GeneratorSpec::gumbel(0.5).unwrap(),
        GeneratorSpec::gumbel(0.85).unwrap(),
        GeneratorSpec::gumbel(1.0).unwrap(),
        GeneratorSpec::IndependenceExp,
    ]
}

#[test]
fn psi_values() {
    assert_eq!(GeneratorSpec::clayton(4.0 / 3.0).unwrap().psi(0.0).unwrap(), 1.0);
    assert!(rel(GeneratorSpec::gumbel(0.5).unwrap().psi(4.0).unwrap(), (-2f64).exp()) < 1e-15);
    assert!(rel(GeneratorSpec::IndependenceExp.psi(1.0).unwrap(), (-1f64).exp()) < 1e-15);
    assert!(matches!(GeneratorSpec::gumbel(0.5).unwrap().psi(-1.0), Err(Error::Domain(_))));
}

#[test]
fn psi_inverse_values() {
    for g in families() {
        assert_eq!(g.psi_inv(1.0).unwrap(), 0.0);
        assert!(matches!(g.psi_inv(0.0), Err(Error::Domain(_))));
        assert!(matches!(g.psi_inv(1.5), Err(Error::Domain(_))));
    }
    assert!(rel(GeneratorSpec::gumbel(0.5).unwrap().psi_inv((-2f64).exp()).unwrap(), 4.0) < 1e-14);
    assert!(rel(GeneratorSpec::clayton(2.0).unwrap().psi_inv(0.25).unwrap(), 15.0) < 1e-14);
}

#[test]
fn log_neg_dpsi_inv_values() {
    let c = GeneratorSpec::clayton(1.0).unwrap();
    assert!((c.log_neg_dpsi_inv(0.5).unwrap() - 4f64.ln()).abs() < 1e-14);
    assert!((GeneratorSpec::IndependenceExp.log_neg_dpsi_inv(0.5).unwrap() - 2f64.ln()).abs() < 1e-14);
    let g = GeneratorSpec::gumbel(1.0).unwrap();
    assert!((g.log_neg_dpsi_inv((-1f64).exp()).unwrap() - 1.0).abs() < 1e-14);
    assert!(c.log_neg_dpsi_inv(1.0).is_err());
    assert!(c.log_neg_dpsi_inv(0.0).is_err());
}

#[test]
fn log_abs_psi_deriv_values() {
    let c = GeneratorSpec::clayton(1.0).unwrap();
    assert!((c.log_abs_psi_deriv(2, 1.0).unwrap() - (2.0f64 / 8.0).ln()).abs() < 1e-14);
    assert_eq!(GeneratorSpec::IndependenceExp.log_abs_psi_deriv(5, 0.7).unwrap(), -0.7);
    let g = GeneratorSpec::gumbel(0.5).unwrap();
    assert!((g.log_abs_psi_deriv(1, 1.0).unwrap() - (0.5 * (-1f64).exp()).ln()).abs() < 1e-14);
    assert!(g.log_abs_psi_deriv(MAX_DERIVATIVE_ORDER + 1, 1.0).is_err());
    assert!(g.log_abs_psi_deriv(1, 0.0).is_err());
}

#[test]
fn clayton_derivatives_match_closed_form() {
    let theta = 0.7;
    let c = GeneratorSpec::clayton(theta).unwrap();
    for k in 1..=10 {
        for &t in &[0.1, 1.0, 25.0] {
            let expect = (0..k).map(|j| (1.0 / theta + j as f64).ln()).sum::<f64>() - (1.0 / theta + k as f64) * (1.0f64 + t).ln();
            assert!((c.log_abs_psi_deriv(k, t).unwrap() - expect).abs() < 1e-12 * expect.abs().max(1.0));
        }
    }
}

/// |ψ^{(k)}| by a central difference of |ψ^{(k-1)}|, sign-aware:
/// `|ψ^{(k)}| = -d/dt |ψ^{(k-1)}|` because signs alternate.
#[test]
fn derivatives_match_finite_differences() {
    for g in families() {
        for k in 1..=10 {
            for &t in &[0.3, 1.0, 3.0] {
                let prev = |s: f64| if k == 1 { g.psi(s).unwrap() } else { g.log_abs_psi_deriv(k - 1, s).unwrap().exp() };
                let d = |h: f64| -(prev(t + h) - prev(t - h)) / (2.0 * h);
                let h = 1e-3 * t;
                let fd = (4.0 * d(h / 2.0) - d(h)) / 3.0;
                let exact = g.log_abs_psi_deriv(k, t).unwrap().exp();
                assert!(fd > 0.0, "{g:?} k={k} t={t}: sign");
                assert!(rel(fd, exact) < 1e-4, "{g:?} k={k} t={t}: {fd} vs {exact}");
            }
        }
    }
}

#[test]
fn tau_calibration() {
    let c = GeneratorSpec::clayton_from_tau(0.4).unwrap();
    assert!(rel(c.kendall_tau(), 0.4) < 1e-14);
    assert!(matches!(c, GeneratorSpec::Clayton { theta } if rel(theta, 4.0 / 3.0) < 1e-15));
    let g = GeneratorSpec::gumbel_from_tau(0.5).unwrap();
    assert_eq!(g, GeneratorSpec::Gumbel { alpha: 0.5 });
}

#[test]
fn invalid_parameters() {
    assert!(GeneratorSpec::clayton(0.0).is_err());
    assert!(GeneratorSpec::clayton(-1.0).is_err());
    assert!(GeneratorSpec::gumbel(0.0).is_err());
    assert!(GeneratorSpec::gumbel(1.2).is_err());
}

proptest! {
    #[test]
    fn psi_inverse_round_trip(u in 1e-6f64..1.0, which in 0usize..6) {
        let g = families()[which];
        let back = g.psi(g.psi_inv(u).unwrap()).unwrap();
        prop_assert!(rel(back, u) <= 1e-12);
    }

    #[test]
    fn psi_is_decreasing(a in 0.0f64..50.0, b in 0.0f64..50.0, which in 0usize..6) {
        let g = families()[which];
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(g.psi(lo).unwrap() >= g.psi(hi).unwrap());
    }
}
