mod common;

use common::{gumbel_l, rel, three_level_alpha_tree, two_level_alpha_tree};
use haxc::dnorm::{
    mc_stdf, mc_stdf_copula_derivative, mc_stdf_parallel, sample_nested_gumbel_w, sample_w, truncated_normal_moment,
    DNormGeneratorSpec, GeneralCopulaMargins, HierGaussian, Margin,
};
use haxc::numeric::gamma;
use haxc::rng::stream_rng;
use haxc::stdf::eval_stdf;
use haxc::validation::{ks_critical_1pct, ks_uniform};
use haxc::Error;
use rand::Rng;

fn hier() -> HierGaussian {
    HierGaussian::from_rows(
        &[vec![0.6, 0.2], vec![0.2, 0.5]],
        &[vec![vec![0.4, 0.1], vec![0.1, 0.3]], vec![vec![0.5, 0.2], vec![0.2, 0.4]]],
    )
    .unwrap()
}

fn corr3() -> Vec<Vec<f64>> {
    vec![vec![1.0, 0.6, 0.3], vec![0.6, 1.0, 0.5], vec![0.3, 0.5, 1.0]]
}

fn all_generators() -> Vec<DNormGeneratorSpec> {
    vec![
        DNormGeneratorSpec::comonotone(3).unwrap(),
        DNormGeneratorSpec::independence_permutation(4).unwrap(),
        DNormGeneratorSpec::gumbel_frechet(2, 0.5).unwrap(),
        DNormGeneratorSpec::gumbel_frechet(3, 0.3).unwrap(),
        DNormGeneratorSpec::negative_logistic_weibull(3, 2.0).unwrap(),
        DNormGeneratorSpec::schlather(&corr3()).unwrap(),
        DNormGeneratorSpec::extremal_t(3.5, &corr3()).unwrap(),
        DNormGeneratorSpec::brown_resnick(&[vec![1.0, 0.3], vec![0.3, 2.0]]).unwrap(),
        DNormGeneratorSpec::GeneralCopulaMargins(GeneralCopulaMargins::independence(vec![Margin::exponential(), Margin::uniform()]).unwrap()),
        DNormGeneratorSpec::nested_gumbel_tree(two_level_alpha_tree(0.8, &[(2, 0.5), (2, 0.3)])).unwrap(),
        DNormGeneratorSpec::nested_gumbel_tree(three_level_alpha_tree(0.8, 0.5, 0.6, 0.3)).unwrap(),
        DNormGeneratorSpec::hier_husler_reiss(hier()),
        DNormGeneratorSpec::hier_extremal_t(2.5, hier()).unwrap(),
    ]
}

#[test]
fn comonotone_and_permutation_draws() {
    let mut rng = stream_rng(31, 0);
    let co = DNormGeneratorSpec::comonotone(3).unwrap();
    assert!((0..100).all(|_| sample_w(&co, &mut rng) == vec![1.0; 3]));
    let perm = DNormGeneratorSpec::independence_permutation(4).unwrap();
    let mut hits = [0usize; 4];
    let n = 40_000;
    for _ in 0..n {
        let w = sample_w(&perm, &mut rng);
        assert_eq!(w.iter().filter(|&&v| v == 4.0).count(), 1);
        assert_eq!(w.iter().filter(|&&v| v == 0.0).count(), 3);
        hits[w.iter().position(|&v| v == 4.0).unwrap()] += 1;
    }
    let se = (0.25 * 0.75 / n as f64).sqrt();
    for h in hits {
        assert!((h as f64 / n as f64 - 0.25).abs() < 4.0 * se);
    }
}

/// Shape α of the Fréchet margin `W_j ~ Fréchet(1/α)/Γ(1-α)` for generators
/// whose coordinates have infinite variance (α ≥ 1/2). Along a nested Gumbel
/// path `E[W^q]` telescopes to `Γ(1-qα_0)/Γ(1-α_0)^q`, so every leaf has the
/// root's Fréchet margin.
fn heavy_tail_alpha(gen: &DNormGeneratorSpec) -> Option<f64> {
    match gen {
        DNormGeneratorSpec::GumbelFrechet { alpha, .. } if *alpha >= 0.5 => Some(*alpha),
        DNormGeneratorSpec::NestedGumbelTree(n) => Some(n.alpha(n.tree().root())),
        _ => None,
    }
}

/// E[W_j] = 1 for every variant and coordinate. Finite-variance variants:
/// sample mean within 4 Monte Carlo SE. Infinite-variance variants: the
/// sample SE is not a valid yardstick, so the exact mean-one Fréchet margin
/// is checked by a KS test instead.
#[test]
fn mean_one() {
    let n = 1_000_000;
    for (k, gen) in all_generators().iter().enumerate() {
        let d = gen.dimension();
        let mut rng = stream_rng(32, k as u64);
        let draws: Vec<Vec<f64>> = (0..n).map(|_| sample_w(gen, &mut rng)).collect();
        assert!(draws.iter().flatten().all(|&w| w >= 0.0));
        for j in 0..d {
            let col: Vec<f64> = draws.iter().map(|w| w[j]).collect();
            if let Some(a) = heavy_tail_alpha(gen) {
                let g = gamma(1.0 - a);
                let u: Vec<f64> = col.iter().map(|&w| (-(w * g).powf(-1.0 / a)).exp()).collect();
                let ks = ks_uniform(&u).unwrap();
                assert!(ks < ks_critical_1pct(n), "{} coordinate {j}: KS {ks}", gen.name());
            } else {
                let m = col.iter().sum::<f64>() / n as f64;
                let se = (col.iter().map(|w| (w - m).powi(2)).sum::<f64>() / (n as f64 - 1.0) / n as f64).sqrt();
                let tol = (4.0 * se).max(1e-15);
                assert!((m - 1.0).abs() <= tol, "{} coordinate {j}: mean {m} ± {se}", gen.name());
            }
        }
    }
}

#[test]
fn mc_stdf_examples() {
    let mut rng = stream_rng(33, 0);
    let x = [1.0, 2.0, 3.0];
    let co = mc_stdf(&DNormGeneratorSpec::comonotone(3).unwrap(), &x, 1000, &mut rng).unwrap();
    assert_eq!(co.estimate, 3.0);
    assert_eq!(co.std_error, 0.0);
    let perm = mc_stdf_parallel(&DNormGeneratorSpec::independence_permutation(3).unwrap(), &x, 1_000_000, 34).unwrap();
    assert!((perm.estimate - 6.0).abs() < 3.0 * perm.std_error);
    let gf = mc_stdf_parallel(&DNormGeneratorSpec::gumbel_frechet(3, 0.5).unwrap(), &x, 1_000_000, 35).unwrap();
    assert!((gf.estimate - 14f64.sqrt()).abs() < 3.0 * gf.std_error);
}

#[test]
fn nested_gumbel_generator() {
    // One sector with the root's α is plain GumbelFrechet.
    let flat = two_level_alpha_tree(0.6, &[(3, 0.6)]);
    let mut a = stream_rng(36, 0);
    let mut b = stream_rng(36, 0);
    let gf = DNormGeneratorSpec::gumbel_frechet(3, 0.6).unwrap();
    let ng = sample_nested_gumbel_w(&flat, &mut a).unwrap();
    let w = sample_w(&gf, &mut b);
    for j in 0..3 {
        assert!(rel(ng[j], w[j]) < 1e-12, "{ng:?} vs {w:?}");
    }
    let tree = two_level_alpha_tree(0.8, &[(2, 0.5), (2, 0.3)]);
    let gen = DNormGeneratorSpec::nested_gumbel_tree(tree).unwrap();
    let mc = mc_stdf_parallel(&gen, &[1.0; 4], 1_000_000, 37).unwrap();
    let exact = gumbel_l(0.8, &[gumbel_l(0.5, &[1.0, 1.0]), gumbel_l(0.3, &[1.0, 1.0])]);
    assert!((mc.estimate - exact).abs() < 3.0 * mc.std_error);
    let bad = two_level_alpha_tree(0.5, &[(2, 0.8)]);
    assert!(sample_nested_gumbel_w(&bad, &mut a).is_err());
}

#[test]
fn estimates_respect_stdf_bounds() {
    let x = [0.5, 1.5, 2.0];
    for (k, gen) in all_generators().iter().enumerate() {
        let d = gen.dimension();
        let x = &x.iter().cycle().take(d).copied().collect::<Vec<_>>();
        let mc = mc_stdf_parallel(gen, x, 200_000, 38 + k as u64).unwrap();
        let mx = x.iter().copied().fold(0.0, f64::max);
        let sm: f64 = x.iter().sum();
        let slack = 3.0 * mc.std_error;
        assert!(mc.estimate >= mx - slack && mc.estimate <= sm + slack, "{}: {mc:?}", gen.name());
    }
}

/// Independent estimates at c·x and x agree up to the factor c.
#[test]
fn homogeneity_by_monte_carlo() {
    let x = [0.5, 1.5, 2.0];
    for (k, gen) in all_generators().iter().enumerate() {
        let d = gen.dimension();
        let x: Vec<f64> = x.iter().cycle().take(d).copied().collect();
        let base = mc_stdf_parallel(gen, &x, 400_000, 60 + k as u64).unwrap();
        for c in [0.5, 2.0] {
            let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
            let scaled = mc_stdf_parallel(gen, &cx, 400_000, 80 + k as u64).unwrap();
            let se = (scaled.std_error.powi(2) + (c * base.std_error).powi(2)).sqrt();
            assert!((scaled.estimate - c * base.estimate).abs() <= 3.0 * se.max(1e-15), "{} c={c}", gen.name());
        }
    }
}

/// The direct and copula-derivative estimators of the general generator
/// agree; for Exp(1) × Uniform(0,2) at x = (1,1) both target
/// E max(W_1, W_2) = ∫_0^2 (1 - (1 - e^{-z}) z/2) dz + ∫_2^∞ e^{-z} dz = 3/2 - e^{-2}/2.
#[test]
fn general_copula_estimators_agree() {
    let gen = DNormGeneratorSpec::GeneralCopulaMargins(
        GeneralCopulaMargins::independence(vec![Margin::exponential(), Margin::uniform()]).unwrap(),
    );
    let x = [1.0, 1.0];
    let mut rng = stream_rng(39, 0);
    let direct = mc_stdf(&gen, &x, 1_000_000, &mut rng).unwrap();
    let deriv = mc_stdf_copula_derivative(&gen, &x, 1_000_000, &mut rng).unwrap();
    let se = (direct.std_error.powi(2) + deriv.std_error.powi(2)).sqrt();
    assert!((direct.estimate - deriv.estimate).abs() < 3.0 * se);
    let e2 = (-2f64).exp();
    let exact = 2.0 - (1.0 + 3.0 * e2) / 2.0 + e2;
    assert!((deriv.estimate - exact).abs() < 4.0 * deriv.std_error);
    for x in [[0.7, 1.8], [2.0, 0.4]] {
        let direct = mc_stdf(&gen, &x, 500_000, &mut rng).unwrap();
        let deriv = mc_stdf_copula_derivative(&gen, &x, 500_000, &mut rng).unwrap();
        let se = (direct.std_error.powi(2) + deriv.std_error.powi(2)).sqrt();
        assert!((direct.estimate - deriv.estimate).abs() < 3.0 * se);
    }
    let gf = DNormGeneratorSpec::gumbel_frechet(2, 0.5).unwrap();
    assert!(matches!(mc_stdf_copula_derivative(&gf, &x, 10, &mut rng), Err(Error::Capability(_))));
}

#[test]
fn truncated_normal_moment_values() {
    // c_ν = E[max(0, N)^ν]; c_1 = 1/√(2π), c_2 = 1/2.
    assert!(rel(truncated_normal_moment(1.0), 1.0 / (2.0 * std::f64::consts::PI).sqrt()) < 1e-14);
    assert!(rel(truncated_normal_moment(2.0), 0.5) < 1e-14);
    let nu = 3.5;
    let mut rng = stream_rng(40, 0);
    let n = 1_000_000;
    let draws: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            z.max(0.0).powf(nu)
        })
        .collect();
    let m = draws.iter().sum::<f64>() / n as f64;
    let sd = (draws.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
    assert!((m - truncated_normal_moment(nu)).abs() < 4.0 * sd / (n as f64).sqrt());
    let _ = gamma(1.5);
}

#[test]
fn generator_validation() {
    assert!(DNormGeneratorSpec::gumbel_frechet(2, 1.0).is_err());
    assert!(DNormGeneratorSpec::schlather(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
    assert!(DNormGeneratorSpec::brown_resnick(&[vec![1.0, 0.0], vec![0.5, 1.0]]).is_err());
    assert!(DNormGeneratorSpec::extremal_t(-1.0, &corr3()).is_err());
    assert_eq!(DNormGeneratorSpec::comonotone(3).unwrap().sup_bound(), Some(1.0));
    assert_eq!(DNormGeneratorSpec::independence_permutation(4).unwrap().sup_bound(), Some(4.0));
    assert_eq!(DNormGeneratorSpec::gumbel_frechet(2, 0.5).unwrap().sup_bound(), None);
}

#[test]
fn stdf_correspondence_of_bounded_generators() {
    let x = [1.0, 2.0, 3.0];
    let co = DNormGeneratorSpec::comonotone(3).unwrap().stdf().unwrap();
    assert_eq!(eval_stdf(&co, &x).unwrap(), 3.0);
    let perm = DNormGeneratorSpec::independence_permutation(3).unwrap().stdf().unwrap();
    assert_eq!(eval_stdf(&perm, &x).unwrap(), 6.0);
    let sch = DNormGeneratorSpec::schlather(&corr3()).unwrap().stdf().unwrap();
    let et1 = DNormGeneratorSpec::extremal_t(1.0, &corr3()).unwrap().stdf().unwrap();
    assert!(rel(eval_stdf(&sch, &x).unwrap(), eval_stdf(&et1, &x).unwrap()) < 1e-12);
}
