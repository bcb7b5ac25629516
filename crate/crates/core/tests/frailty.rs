mod common;

use haxc::frailty::{sample_frailty_tree, sample_gamma_frailty, sample_positive_stable, FrailtyTree};
use haxc::hierarchy::{params, HierarchyTree};
use haxc::rng::stream_rng;
use haxc::GeneratorSpec;

/// Mean and standard error of `exp(-t V)` over the draws.
fn laplace(draws: &[f64], t: f64) -> (f64, f64) {
    let n = draws.len() as f64;
    let vals: Vec<f64> = draws.iter().map(|v| (-t * v).exp()).collect();
    let m = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn positive_stable_laplace_transform() {
    let mut rng = stream_rng(1, 0);
    assert!((0..100).all(|_| sample_positive_stable(1.0, &mut rng).unwrap() == 1.0));
    let v: Vec<f64> = (0..1_000_000).map(|_| sample_positive_stable(0.5, &mut rng).unwrap()).collect();
    assert!(common::rel(laplace(&v, 1.0).0, (-1f64).exp()) < 5e-3);
    let v: Vec<f64> = (0..1_000_000).map(|_| sample_positive_stable(0.7, &mut rng).unwrap()).collect();
    assert!(common::rel(laplace(&v, 2.0).0, (-(2f64.powf(0.7))).exp()) < 5e-3);
    assert!(sample_positive_stable(0.0, &mut rng).is_err());
    assert!(sample_positive_stable(1.5, &mut rng).is_err());
}

#[test]
fn gamma_frailty_moments() {
    let mut rng = stream_rng(2, 0);
    let v: Vec<f64> = (0..1_000_000).map(|_| sample_gamma_frailty(4.0 / 3.0, &mut rng).unwrap()).collect();
    assert!(common::rel(v.iter().sum::<f64>() / v.len() as f64, 0.75) < 1e-2);
    let v: Vec<f64> = (0..1_000_000).map(|_| sample_gamma_frailty(1.0, &mut rng).unwrap()).collect();
    assert!(common::rel(laplace(&v, 1.0).0, 0.5) < 5e-3);
    let v: Vec<f64> = (0..1_000_000).map(|_| sample_gamma_frailty(2.0, &mut rng).unwrap()).collect();
    assert!(common::rel(laplace(&v, 1.0).0, 0.5f64.sqrt()) < 5e-3);
    assert!(sample_gamma_frailty(0.0, &mut rng).is_err());
}

fn check_tree_laplace(tree: &FrailtyTree, seed: u64, n: usize) {
    let mut rng = stream_rng(seed, 0);
    let draws: Vec<Vec<f64>> = (0..n).map(|_| sample_frailty_tree(tree, &mut rng)).collect();
    for j in 0..tree.dimension() {
        let col: Vec<f64> = draws.iter().map(|r| r[j]).collect();
        let g = tree.leaf_generator(j);
        for &t in &[0.5, 1.0, 2.0] {
            let (m, se) = laplace(&col, t);
            let target = g.psi(t).unwrap();
            assert!((m - target).abs() < 3.0 * se, "leaf {j} t={t}: {m} vs {target} (se {se})");
        }
    }
}

#[test]
fn nested_gumbel_chain_laplace_identity() {
    let tree = FrailtyTree::two_level(
        GeneratorSpec::gumbel(0.8).unwrap(),
        &[(2, GeneratorSpec::gumbel(0.5).unwrap()), (2, GeneratorSpec::gumbel(0.3).unwrap())],
    )
    .unwrap();
    check_tree_laplace(&tree, 3, 100_000);
}

#[test]
fn nested_clayton_chain_laplace_identity() {
    let tree = FrailtyTree::two_level(
        GeneratorSpec::clayton(0.5).unwrap(),
        &[(2, GeneratorSpec::clayton(4.0 / 3.0).unwrap()), (3, GeneratorSpec::clayton(3.0).unwrap())],
    )
    .unwrap();
    check_tree_laplace(&tree, 4, 100_000);
}

#[test]
fn three_level_chain_laplace_identity() {
    let tree = FrailtyTree::new(common::three_level_alpha_tree(0.9, 0.6, 0.7, 0.4)).unwrap();
    check_tree_laplace(&tree, 5, 100_000);
}

#[test]
fn flat_tree_matches_single_frailty() {
    let g = GeneratorSpec::clayton(4.0 / 3.0).unwrap();
    let tree = FrailtyTree::single(g, 3).unwrap();
    let mut a = stream_rng(6, 0);
    let mut b = stream_rng(6, 0);
    for _ in 0..1000 {
        let v = sample_frailty_tree(&tree, &mut a);
        let w = sample_gamma_frailty(4.0 / 3.0, &mut b).unwrap();
        assert!(v.iter().all(|&x| x == w));
    }
}

#[test]
fn sector_mates_share_frailty() {
    let tree = FrailtyTree::two_level(
        GeneratorSpec::clayton(0.5).unwrap(),
        &[(2, GeneratorSpec::clayton(1.0).unwrap()), (3, GeneratorSpec::clayton(2.0).unwrap())],
    )
    .unwrap();
    let mut rng = stream_rng(7, 0);
    for _ in 0..100 {
        let v = sample_frailty_tree(&tree, &mut rng);
        assert_eq!(v[0], v[1]);
        assert!(v[2] == v[3] && v[3] == v[4]);
        assert_ne!(v[1], v[2]);
    }
}

#[test]
fn nesting_violations_are_rejected() {
    let bad_gumbel = FrailtyTree::two_level(GeneratorSpec::gumbel(0.5).unwrap(), &[(2, GeneratorSpec::gumbel(0.8).unwrap())]);
    assert!(bad_gumbel.is_err());
    let bad_clayton = FrailtyTree::two_level(GeneratorSpec::clayton(2.0).unwrap(), &[(2, GeneratorSpec::clayton(1.0).unwrap())]);
    assert!(bad_clayton.is_err());
    let mixed = FrailtyTree::two_level(GeneratorSpec::clayton(0.5).unwrap(), &[(2, GeneratorSpec::gumbel(0.5).unwrap())]);
    assert!(matches!(mixed, Err(haxc::Error::Capability(_))));
    let from_params = HierarchyTree::two_level(&[2], params(&[("alpha", 0.4)]), &[params(&[("alpha", 0.6)])]).unwrap();
    assert!(FrailtyTree::new(from_params).is_err());
}
