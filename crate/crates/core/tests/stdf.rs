mod common;

use common::{gumbel_l, mixed_fd, rel, three_level_alpha_tree, two_level_alpha_tree};
use haxc::dnorm::{mc_stdf_parallel, DNormGeneratorSpec, HierGaussian};
use haxc::numeric::{norm_cdf, t_cdf};
use haxc::rng::stream_rng;
use haxc::stdf::{eval_stdf, log_abs_partial_stdf, partial_stdf, HuslerReiss, StdfSpec};
use haxc::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn hr3() -> StdfSpec {
    let cov = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, 0.2, 0.4, 0.8, 0.3, 0.2, 0.3, 1.2]);
    StdfSpec::HuslerReiss(HuslerReiss::from_covariance(&cov).unwrap())
}

fn et_corr3() -> Vec<Vec<f64>> {
    vec![vec![1.0, 0.6, 0.3], vec![0.6, 1.0, 0.5], vec![0.3, 0.5, 1.0]]
}

/// Every smooth variant, with a label.
fn smooth_variants() -> Vec<(&'static str, StdfSpec)> {
    vec![
        ("sum", StdfSpec::sum(3).unwrap()),
        ("gumbel", StdfSpec::gumbel(3, 0.4).unwrap()),
        ("gumbel-indep", StdfSpec::gumbel(3, 1.0).unwrap()),
        ("negative-logistic", StdfSpec::negative_logistic(3, 2.0).unwrap()),
        ("nested-gumbel-2", StdfSpec::nested_gumbel(two_level_alpha_tree(0.8, &[(2, 0.5), (2, 0.3)])).unwrap()),
        ("nested-gumbel-3", StdfSpec::nested_gumbel(three_level_alpha_tree(0.8, 0.5, 0.6, 0.3)).unwrap()),
        ("husler-reiss-2", StdfSpec::husler_reiss(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()),
        ("husler-reiss-3", hr3()),
        ("extremal-t-2", StdfSpec::extremal_t(1.0, &[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap()),
        ("extremal-t-3", StdfSpec::extremal_t(3.5, &et_corr3()).unwrap()),
    ]
}

fn all_variants() -> Vec<(&'static str, StdfSpec)> {
    let mut v = smooth_variants();
    v.push(("max", StdfSpec::max(3).unwrap()));
    v
}

fn random_point<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(0.2..3.0)).collect()
}

#[test]
fn closed_form_examples() {
    let g = StdfSpec::gumbel(3, 0.5).unwrap();
    assert!(rel(eval_stdf(&g, &[1.0, 2.0, 3.0]).unwrap(), 14f64.sqrt()) < 1e-15);
    let ng = StdfSpec::nested_gumbel(two_level_alpha_tree(0.8, &[(2, 0.5), (2, 0.3)])).unwrap();
    let expect = (2f64.powf(0.5 / 0.8) + 2f64.powf(0.3 / 0.8)).powf(0.8);
    assert!(rel(eval_stdf(&ng, &[1.0; 4]).unwrap(), expect) < 1e-14);
    let hr = StdfSpec::husler_reiss(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    assert!(rel(eval_stdf(&hr, &[1.0, 1.0]).unwrap(), 2.0 * norm_cdf(2f64.sqrt() / 2.0)) < 1e-12);
    assert!(rel(eval_stdf(&StdfSpec::sum(3).unwrap(), &[1.0, 2.0, 3.0]).unwrap(), 6.0) < 1e-15);
    assert_eq!(eval_stdf(&StdfSpec::max(3).unwrap(), &[1.0, 2.0, 3.0]).unwrap(), 3.0);
}

/// Bivariate Hüsler–Reiss and extremal t in their textbook forms.
#[test]
fn bivariate_textbook_forms() {
    let gamma = 0.7;
    let hr = StdfSpec::husler_reiss(&[vec![0.0, gamma], vec![gamma, 0.0]]).unwrap();
    let lam = (2.0 * gamma).sqrt();
    for &(a, b) in &[(1.0f64, 1.0f64), (0.3, 2.0), (5.0, 0.1)] {
        let expect = a * norm_cdf(lam / 2.0 + (a / b).ln() / lam) + b * norm_cdf(lam / 2.0 + (b / a).ln() / lam);
        assert!(rel(eval_stdf(&hr, &[a, b]).unwrap(), expect) < 1e-12);
    }
    let (nu, r) = (3.5, 0.4);
    let et = StdfSpec::extremal_t(nu, &[vec![1.0, r], vec![r, 1.0]]).unwrap();
    let c = ((nu + 1.0) / (1.0 - r * r)).sqrt();
    for &(a, b) in &[(1.0f64, 1.0f64), (0.3, 2.0), (5.0, 0.1)] {
        let expect = a * t_cdf(c * ((a / b).powf(1.0 / nu) - r), nu + 1.0) + b * t_cdf(c * ((b / a).powf(1.0 / nu) - r), nu + 1.0);
        assert!(rel(eval_stdf(&et, &[a, b]).unwrap(), expect) < 1e-10);
    }
}

#[test]
fn partial_examples() {
    let sum = StdfSpec::sum(3).unwrap();
    assert_eq!(partial_stdf(&sum, &[1], &[0.3, 2.0, 1.0]).unwrap(), 1.0);
    assert_eq!(partial_stdf(&sum, &[0, 1], &[0.3, 2.0, 1.0]).unwrap(), 0.0);
    assert_eq!(log_abs_partial_stdf(&sum, &[2], &[0.3, 2.0, 1.0]).unwrap(), 0.0);
    let g = StdfSpec::gumbel(2, 0.5).unwrap();
    assert!(rel(partial_stdf(&g, &[0], &[1.0, 1.0]).unwrap(), 0.5f64.sqrt()) < 1e-14);
    let v = partial_stdf(&g, &[0, 1], &[1.0, 1.0]).unwrap();
    assert!(rel(v, -0.5 * 0.5 * 4.0 * 2f64.powf(-1.5)) < 1e-14);
    assert!((log_abs_partial_stdf(&g, &[0, 1], &[1.0, 1.0]).unwrap() - v.abs().ln()).abs() < 1e-14);
    let g1 = StdfSpec::gumbel(2, 1.0).unwrap();
    assert_eq!(log_abs_partial_stdf(&g1, &[0, 1], &[0.4, 1.7]).unwrap(), f64::NEG_INFINITY);
}

#[test]
fn partial_errors() {
    let g = StdfSpec::gumbel(2, 0.5).unwrap();
    assert!(matches!(partial_stdf(&g, &[], &[1.0, 1.0]), Err(Error::Domain(_))));
    assert!(matches!(partial_stdf(&g, &[0, 0], &[1.0, 1.0]), Err(Error::Domain(_))));
    assert!(matches!(partial_stdf(&g, &[2], &[1.0, 1.0]), Err(Error::Index { .. })));
    assert!(matches!(partial_stdf(&g, &[0], &[0.0, 1.0]), Err(Error::Domain(_))));
    let m = StdfSpec::max(2).unwrap();
    assert!(matches!(partial_stdf(&m, &[0], &[1.0, 1.0]), Err(Error::Capability(_))));
    assert!(matches!(eval_stdf(&g, &[1.0, 1.0, 1.0]), Err(Error::Domain(_))));
}

#[test]
fn partials_match_finite_differences() {
    let mut rng = stream_rng(21, 0);
    for (name, spec) in smooth_variants() {
        let d = spec.dimension();
        let f = |y: &[f64]| eval_stdf(&spec, y).unwrap();
        for _ in 0..4 {
            let x = random_point(d, &mut rng);
            for mask in 1u32..(1 << d) {
                let block: Vec<usize> = (0..d).filter(|&j| mask >> j & 1 == 1).collect();
                if block.len() > 3 {
                    continue;
                }
                let exact = partial_stdf(&spec, &block, &x).unwrap();
                // Higher orders amplify rounding of ℓ; widen the step with the order.
                let h = [1e-4, 1e-4, 3e-3][block.len() - 1];
                let fd = mixed_fd(&f, &x, &block, h);
                let scale = exact.abs().max(1e-3);
                assert!((fd - exact).abs() / scale < 1e-3, "{name} B={block:?} x={x:?}: fd {fd} vs {exact}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sign_law(seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 0);
        for (name, spec) in smooth_variants() {
            let d = spec.dimension();
            let x = random_point(d, &mut rng);
            for mask in 1u32..(1 << d) {
                let block: Vec<usize> = (0..d).filter(|&j| mask >> j & 1 == 1).collect();
                let v = partial_stdf(&spec, &block, &x).unwrap();
                let expected = if block.len() % 2 == 1 { 1.0 } else { -1.0 };
                prop_assert!(v == 0.0 || v.signum() == expected, "{} {:?}: {}", name, block, v);
            }
        }
    }

    #[test]
    fn homogeneity(seed in any::<u64>(), c in 0.05f64..20.0) {
        let mut rng = stream_rng(seed, 1);
        for (name, spec) in all_variants() {
            let x = random_point(spec.dimension(), &mut rng);
            let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
            let a = eval_stdf(&spec, &cx).unwrap();
            let b = c * eval_stdf(&spec, &x).unwrap();
            prop_assert!(rel(a, b) < 1e-12, "{}: {} vs {}", name, a, b);
        }
    }

    #[test]
    fn bounds_and_unit_vectors(seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 2);
        for (name, spec) in all_variants() {
            let d = spec.dimension();
            let x = random_point(d, &mut rng);
            let l = eval_stdf(&spec, &x).unwrap();
            let mx = x.iter().copied().fold(0.0, f64::max);
            let sm: f64 = x.iter().sum();
            prop_assert!(l >= mx * (1.0 - 1e-12) && l <= sm * (1.0 + 1e-12), "{}: {} not in [{}, {}]", name, l, mx, sm);
            for j in 0..d {
                let mut e = vec![0.0; d];
                e[j] = 1.0;
                prop_assert!((eval_stdf(&spec, &e).unwrap() - 1.0).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn zero_coordinates_are_dropped() {
    let ng = StdfSpec::nested_gumbel(two_level_alpha_tree(0.8, &[(2, 0.5), (2, 0.3)])).unwrap();
    let v = eval_stdf(&ng, &[1.0, 2.0, 0.0, 0.0]).unwrap();
    assert!(rel(v, gumbel_l(0.5, &[1.0, 2.0])) < 1e-14);
    let v = eval_stdf(&ng, &[1.0, 0.0, 3.0, 0.0]).unwrap();
    assert!(rel(v, gumbel_l(0.8, &[1.0, 3.0])) < 1e-14);
    assert_eq!(eval_stdf(&ng, &[0.0; 4]).unwrap(), 0.0);
}

/// Closed forms against the Monte Carlo stdf of the matching generator.
#[test]
fn closed_forms_match_generators() {
    let hier = HierGaussian::from_rows(
        &[vec![0.6, 0.2], vec![0.2, 0.5]],
        &[vec![vec![0.4, 0.1], vec![0.1, 0.3]], vec![vec![0.5]]],
    )
    .unwrap();
    let cases: Vec<(DNormGeneratorSpec, Vec<f64>)> = vec![
        (DNormGeneratorSpec::gumbel_frechet(3, 0.6).unwrap(), vec![1.0, 2.0, 3.0]),
        (DNormGeneratorSpec::negative_logistic_weibull(3, 2.0).unwrap(), vec![1.0, 2.0, 3.0]),
        (DNormGeneratorSpec::nested_gumbel_tree(three_level_alpha_tree(0.8, 0.5, 0.6, 0.3)).unwrap(), vec![1.0, 0.5, 2.0, 1.0, 1.5]),
        (DNormGeneratorSpec::brown_resnick(&[vec![1.0, 0.3], vec![0.3, 1.0]]).unwrap(), vec![1.0, 2.0]),
        (DNormGeneratorSpec::brown_resnick(&[vec![1.0, 0.4, 0.2], vec![0.4, 0.8, 0.3], vec![0.2, 0.3, 1.2]]).unwrap(), vec![1.0, 2.0, 3.0]),
        (DNormGeneratorSpec::extremal_t(3.5, &[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap(), vec![1.0, 2.0]),
        (DNormGeneratorSpec::extremal_t(2.0, &et_corr3()).unwrap(), vec![1.0, 2.0, 3.0]),
        (DNormGeneratorSpec::hier_husler_reiss(hier.clone()), vec![1.0, 1.5, 0.7]),
        (DNormGeneratorSpec::hier_extremal_t(1.5, hier).unwrap(), vec![1.0, 1.5, 0.7]),
    ];
    for (k, (gen, x)) in cases.iter().enumerate() {
        let spec = gen.stdf().unwrap();
        let exact = eval_stdf(&spec, x).unwrap();
        let mc = mc_stdf_parallel(gen, x, 1_000_000, 100 + k as u64).unwrap();
        assert!(
            (mc.estimate - exact).abs() < 4.0 * mc.std_error,
            "{}: mc {} ± {} vs {}",
            gen.name(),
            mc.estimate,
            mc.std_error,
            exact
        );
    }
}

#[test]
fn pair_margins() {
    let ng = StdfSpec::nested_gumbel(two_level_alpha_tree(0.8, &[(2, 0.5), (2, 0.3)])).unwrap();
    let x = [0.7, 1.9];
    for &(i, j, a) in &[(0, 1, 0.5), (2, 3, 0.3), (1, 2, 0.8)] {
        let p = ng.pair(i, j).unwrap();
        assert!(rel(eval_stdf(&p, &x).unwrap(), gumbel_l(a, &x)) < 1e-14);
        let mut full = [0.0; 4];
        full[i] = x[0];
        full[j] = x[1];
        assert!(rel(eval_stdf(&ng, &full).unwrap(), eval_stdf(&p, &x).unwrap()) < 1e-14);
    }
    let hr = hr3();
    let p = hr.pair(0, 2).unwrap();
    let full = eval_stdf(&hr, &[0.7, 0.0, 1.9]).unwrap();
    assert!(rel(eval_stdf(&p, &x).unwrap(), full) < 1e-12);
}

#[test]
fn invalid_specs() {
    assert!(StdfSpec::gumbel(2, 0.0).is_err());
    assert!(StdfSpec::gumbel(0, 0.5).is_err());
    assert!(StdfSpec::negative_logistic(2, -1.0).is_err());
    assert!(StdfSpec::husler_reiss(&[vec![0.0, -1.0], vec![-1.0, 0.0]]).is_err());
    assert!(StdfSpec::extremal_t(2.0, &[vec![1.0, 1.5], vec![1.5, 1.0]]).is_err());
    assert!(StdfSpec::nested_gumbel(two_level_alpha_tree(0.5, &[(2, 0.8)])).is_err());
}

/// The anchored covariance inverts `from_covariance` when the first
/// coordinate is the anchor, and reproduces the semivariogram otherwise.
#[test]
fn anchored_covariance_round_trip() {
    let gamma = vec![vec![0.0, 0.5, 0.8], vec![0.5, 0.0, 0.6], vec![0.8, 0.6, 0.0]];
    let StdfSpec::HuslerReiss(hr) = StdfSpec::husler_reiss(&gamma).unwrap() else { unreachable!() };
    let sigma = hr.anchored_covariance();
    let back = HuslerReiss::from_covariance(&sigma).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert!((back.semivariogram()[(i, j)] - gamma[i][j]).abs() < 1e-14);
        }
    }
    let a = StdfSpec::HuslerReiss(back);
    let b = StdfSpec::husler_reiss(&gamma).unwrap();
    for x in [[1.0, 1.0, 1.0], [0.3, 2.0, 1.1]] {
        assert!(rel(eval_stdf(&a, &x).unwrap(), eval_stdf(&b, &x).unwrap()) < 1e-12);
    }
}
