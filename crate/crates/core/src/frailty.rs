//! Frailty samplers: single frailties with Laplace–Stieltjes transform ψ and
//! hierarchical frailty trees built level by level.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01};

use crate::error::{Error, Result};
use crate::generators::GeneratorSpec;
use crate::hierarchy::HierarchyTree;

/// Draw from PS(α), the positive stable law with Laplace transform
/// `exp(-t^α)`. α = 1 is the point mass at 1.
pub fn sample_positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!(
            "positive stable index must lie in (0,1], got {alpha}"
        )));
    }
    Ok(positive_stable(alpha, rng))
}

/// Kanter's representation of the Chambers–Mallows–Stuck sampler at total
/// skewness; the log form stays finite for small α.
pub(crate) fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha == 1.0 {
        return 1.0;
    }
    let u01: f64 = Open01.sample(rng);
    let u = std::f64::consts::PI * u01;
    let e: f64 = Exp1.sample(rng);
    let beta = 1.0 - alpha;
    let log_s = (alpha * (alpha * u).sin().ln() + beta * (beta * u).sin().ln() - u.sin().ln())
        / alpha
        - beta / alpha * e.ln();
    log_s.exp()
}

/// Draw from Gamma(1/θ, 1), the frailty of the Clayton generator.
pub fn sample_gamma_frailty<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> Result<f64> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::domain(format!("gamma frailty needs theta > 0, got {theta}")));
    }
    Ok(gamma_frailty(theta, rng))
}

fn gamma_frailty<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> f64 {
    Gamma::new(1.0 / theta, 1.0)
        .expect("shape and scale are positive")
        .sample(rng)
}

/// Frailty V with `E[exp(-tV)] = ψ(t)`. The independence generator has the
/// degenerate frailty 1 and consumes no randomness.
pub fn sample_frailty<R: Rng + ?Sized>(g: &GeneratorSpec, rng: &mut R) -> f64 {
    match *g {
        GeneratorSpec::Clayton { theta } => gamma_frailty(theta, rng),
        GeneratorSpec::Gumbel { alpha } => positive_stable(alpha, rng),
        GeneratorSpec::IndependenceExp => 1.0,
    }
}

/// Exponentially tilted stable variate with Laplace transform
/// `exp(-v((1+t)^a - 1))`, v > 0, a ∈ (0,1].
///
/// A single rejection step proposes `v^{1/a} PS(a)` and accepts with
/// probability `exp(-proposal)`, which has acceptance rate `exp(-v)`. For
/// v > 1 the law is split into `ceil(v)` iid pieces of parameter `v/m` (it is
/// infinitely divisible in v), keeping every acceptance rate above `1/e`.
pub fn sample_tilted_stable<R: Rng + ?Sized>(v: f64, a: f64, rng: &mut R) -> Result<f64> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::domain(format!("tilted stable needs finite v > 0, got {v}")));
    }
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::domain(format!("tilted stable needs a in (0,1], got {a}")));
    }
    Ok(tilted_stable(v, a, rng))
}

fn tilted_stable<R: Rng + ?Sized>(v: f64, a: f64, rng: &mut R) -> f64 {
    if a == 1.0 {
        return v;
    }
    let m = v.ceil().max(1.0);
    let piece = v / m;
    let scale = piece.powf(1.0 / a);
    let mut total = 0.0;
    for _ in 0..m as u64 {
        loop {
            let s = scale * positive_stable(a, rng);
            let accept: f64 = Open01.sample(rng);
            if accept <= (-s).exp() {
                total += s;
                break;
            }
        }
    }
    total
}

/// Draw a child frailty given its parent's value. The child law has Laplace
/// transform `exp(-v_parent ψ_parent^{-1}(ψ_child(t)))`.
fn sample_child<R: Rng + ?Sized>(
    parent: &GeneratorSpec,
    child: &GeneratorSpec,
    v_parent: f64,
    rng: &mut R,
) -> f64 {
    match (*parent, *child) {
        (GeneratorSpec::Gumbel { alpha: ap }, GeneratorSpec::Gumbel { alpha: ac }) => {
            let a = ac / ap;
            v_parent.powf(1.0 / a) * positive_stable(a, rng)
        }
        (GeneratorSpec::Clayton { theta: tp }, GeneratorSpec::Clayton { theta: tc }) => {
            tilted_stable(v_parent, tp / tc, rng)
        }
        (GeneratorSpec::IndependenceExp, GeneratorSpec::IndependenceExp) => v_parent,
        _ => unreachable!("family chains are checked at construction"),
    }
}

/// A hierarchy whose internal nodes carry generators and whose leaves are
/// copula coordinates. Along every root-to-leaf path the family is constant
/// and the nesting condition holds: Gumbel α and Clayton 1/θ are
/// non-increasing from parent to child.
#[derive(Debug, Clone)]
pub struct FrailtyTree {
    tree: HierarchyTree,
    /// Generator per node; `None` exactly at leaves.
    generators: Vec<Option<GeneratorSpec>>,
    /// Internal nodes in breadth-first order, parents before children.
    order: Vec<usize>,
    /// Parent node of each coordinate.
    leaf_parent: Vec<usize>,
}

impl FrailtyTree {
    /// Reads generators from the `alpha`/`theta` parameters of internal
    /// nodes and checks the nesting condition.
    pub fn new(tree: HierarchyTree) -> Result<Self> {
        let mut generators = vec![None; tree.len()];
        for i in tree.internal_nodes() {
            let g = GeneratorSpec::from_params(&tree.node(i).params).map_err(|e| match e {
                Error::Config(m) => Error::config(format!("frailty node '{}': {m}", tree.node(i).id)),
                Error::Domain(m) => Error::domain(format!("frailty node '{}': {m}", tree.node(i).id)),
                other => other,
            })?;
            generators[i] = Some(g);
        }
        Self::with_generators(tree, generators)
    }

    /// A single frailty shared by all `d` coordinates.
    pub fn single(generator: GeneratorSpec, d: usize) -> Result<Self> {
        generator.validate()?;
        let tree = HierarchyTree::flat(d, Default::default())?;
        let mut generators = vec![None; tree.len()];
        generators[tree.root()] = Some(generator);
        Self::with_generators(tree, generators)
    }

    /// Root generator plus one generator per sector; sectors occupy
    /// consecutive coordinates with the given sizes.
    pub fn two_level(root: GeneratorSpec, sectors: &[(usize, GeneratorSpec)]) -> Result<Self> {
        let sizes: Vec<usize> = sectors.iter().map(|s| s.0).collect();
        let tree = HierarchyTree::two_level(&sizes, Default::default(), &vec![Default::default(); sizes.len()])?;
        let mut generators = vec![None; tree.len()];
        generators[tree.root()] = Some(root);
        for (&child, (_, g)) in tree.children(tree.root()).iter().zip(sectors) {
            generators[child] = Some(*g);
        }
        Self::with_generators(tree, generators)
    }

    fn with_generators(tree: HierarchyTree, generators: Vec<Option<GeneratorSpec>>) -> Result<Self> {
        let order = tree.internal_nodes();
        for &i in &order {
            let g = generators[i].expect("internal node has a generator");
            g.validate()?;
            let Some(p) = tree.parent(i) else { continue };
            let pg = generators[p].expect("parent is internal");
            check_nesting(&pg, &g, &tree.node(p).id, &tree.node(i).id)?;
        }
        let leaf_parent = (0..tree.dimension())
            .map(|j| {
                let leaf = tree.leaf_node(j).expect("coordinate in range");
                tree.parent(leaf).expect("a leaf is never the root")
            })
            .collect();
        Ok(FrailtyTree { tree, generators, order, leaf_parent })
    }

    pub fn tree(&self) -> &HierarchyTree {
        &self.tree
    }

    pub fn dimension(&self) -> usize {
        self.tree.dimension()
    }

    pub fn root_generator(&self) -> GeneratorSpec {
        self.generators[self.tree.root()].expect("root is internal")
    }

    /// Generator of an internal node; `None` for leaves.
    pub fn node_generator(&self, node: usize) -> Option<GeneratorSpec> {
        self.generators[node]
    }

    /// Generator governing coordinate `j`, that of its parent node.
    pub fn leaf_generator(&self, j: usize) -> GeneratorSpec {
        self.generators[self.leaf_parent[j]].expect("leaf parent is internal")
    }

    /// Parent node of coordinate `j`.
    pub fn leaf_parent(&self, j: usize) -> usize {
        self.leaf_parent[j]
    }

    /// True when the tree has only the root as internal node.
    pub fn is_single(&self) -> bool {
        self.order.len() == 1
    }

    /// Frailty value of every node; leaves hold their parent's value.
    pub fn sample_nodes<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut v = vec![0.0; self.tree.len()];
        for &i in &self.order {
            let g = self.generators[i].as_ref().expect("internal");
            v[i] = match self.tree.parent(i) {
                None => sample_frailty(g, rng),
                Some(p) => {
                    let pg = self.generators[p].as_ref().expect("internal");
                    sample_child(pg, g, v[p], rng)
                }
            };
        }
        for (j, &p) in self.leaf_parent.iter().enumerate() {
            let leaf = self.tree.leaf_node(j).expect("coordinate in range");
            v[leaf] = v[p];
        }
        v
    }

    /// Writes the frailty of each coordinate into `out` (length d).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dimension());
        let v = self.sample_nodes(rng);
        for (o, &p) in out.iter_mut().zip(&self.leaf_parent) {
            *o = v[p];
        }
    }
}

fn check_nesting(parent: &GeneratorSpec, child: &GeneratorSpec, pid: &str, cid: &str) -> Result<()> {
    match (*parent, *child) {
        (GeneratorSpec::Gumbel { alpha: ap }, GeneratorSpec::Gumbel { alpha: ac }) => {
            if ac > ap {
                return Err(Error::domain(format!(
                    "nesting condition fails: alpha of '{cid}' ({ac}) exceeds alpha of parent '{pid}' ({ap})"
                )));
            }
        }
        (GeneratorSpec::Clayton { theta: tp }, GeneratorSpec::Clayton { theta: tc }) => {
            if tc < tp {
                return Err(Error::domain(format!(
                    "nesting condition fails: theta of '{cid}' ({tc}) is below theta of parent '{pid}' ({tp})"
                )));
            }
        }
        (GeneratorSpec::IndependenceExp, GeneratorSpec::IndependenceExp) => {}
        (p, c) => {
            return Err(Error::capability(format!(
                "mixed generator families along a path ('{pid}' is {}, '{cid}' is {}) are not supported",
                p.name(),
                c.name()
            )))
        }
    }
    Ok(())
}

/// Frailty of each coordinate for one draw of the tree.
pub fn sample_frailty_tree<R: Rng + ?Sized>(tree: &FrailtyTree, rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; tree.dimension()];
    tree.sample_into(rng, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{params, NodeRecord};
    use crate::rng::stream_rng;

    /// Mean and standard error of `exp(-t X)` over the draws.
    fn ls_estimate(xs: &[f64], t: f64) -> (f64, f64) {
        let n = xs.len() as f64;
        let v: Vec<f64> = xs.iter().map(|x| (-t * x).exp()).collect();
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    }

    #[test]
    fn positive_stable_unit_index_is_one() {
        let mut rng = stream_rng(1, 0);
        for _ in 0..10 {
            assert_eq!(sample_positive_stable(1.0, &mut rng).unwrap(), 1.0);
        }
        assert!(sample_positive_stable(0.0, &mut rng).is_err());
        assert!(sample_positive_stable(1.2, &mut rng).is_err());
    }

    #[test]
    fn positive_stable_laplace_transform() {
        for (alpha, t, seed) in [(0.5, 1.0, 11), (0.7, 2.0, 12)] {
            let mut rng = stream_rng(seed, 0);
            let xs: Vec<f64> = (0..1_000_000)
                .map(|_| sample_positive_stable(alpha, &mut rng).unwrap())
                .collect();
            let (m, _) = ls_estimate(&xs, t);
            let target = (-f64::powf(t, alpha)).exp();
            assert!((m / target - 1.0).abs() < 0.005, "alpha={alpha}: {m} vs {target}");
        }
    }

    #[test]
    fn gamma_frailty_moments() {
        let mut rng = stream_rng(3, 0);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| sample_gamma_frailty(4.0 / 3.0, &mut rng).unwrap())
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean / 0.75 - 1.0).abs() < 0.01);
        for (theta, target) in [(1.0, 0.5), (2.0, 2f64.powf(-0.5))] {
            let xs: Vec<f64> = (0..1_000_000)
                .map(|_| sample_gamma_frailty(theta, &mut rng).unwrap())
                .collect();
            let (m, _) = ls_estimate(&xs, 1.0);
            assert!((m / target - 1.0).abs() < 0.005);
        }
        assert!(sample_gamma_frailty(0.0, &mut rng).is_err());
    }

    #[test]
    fn tilted_stable_laplace_transform() {
        for (v, a) in [(0.3, 0.375), (2.5, 0.5), (7.2, 0.8)] {
            let mut rng = stream_rng(5, 0);
            let xs: Vec<f64> = (0..200_000)
                .map(|_| sample_tilted_stable(v, a, &mut rng).unwrap())
                .collect();
            for t in [0.5, 1.0, 2.0] {
                let (m, se) = ls_estimate(&xs, t);
                let target = (-v * ((1.0 + t).powf(a) - 1.0)).exp();
                assert!((m - target).abs() < 4.0 * se, "v={v} a={a} t={t}");
            }
        }
    }

    fn two_level_gumbel() -> FrailtyTree {
        FrailtyTree::two_level(
            GeneratorSpec::Gumbel { alpha: 0.8 },
            &[(2, GeneratorSpec::Gumbel { alpha: 0.5 }), (3, GeneratorSpec::Gumbel { alpha: 0.3 })],
        )
        .unwrap()
    }

    fn two_level_clayton() -> FrailtyTree {
        FrailtyTree::two_level(
            GeneratorSpec::Clayton { theta: 0.5 },
            &[(2, GeneratorSpec::Clayton { theta: 4.0 / 3.0 }), (3, GeneratorSpec::Clayton { theta: 3.0 })],
        )
        .unwrap()
    }

    #[test]
    fn nested_gumbel_child_laplace_transform() {
        let tree = two_level_gumbel();
        let mut rng = stream_rng(21, 0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| sample_frailty_tree(&tree, &mut rng)[0]).collect();
        let (m, _) = ls_estimate(&xs, 1.0);
        assert!((m / (-1.0f64).exp() - 1.0).abs() < 0.005);
    }

    #[test]
    fn nested_clayton_child_laplace_transform() {
        let tree = two_level_clayton();
        let mut rng = stream_rng(22, 0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| sample_frailty_tree(&tree, &mut rng)[0]).collect();
        let (m, _) = ls_estimate(&xs, 1.0);
        let target = 2f64.powf(-0.75);
        assert!((m / target - 1.0).abs() < 0.005);
    }

    #[test]
    fn leaves_match_their_generator_laws() {
        for (tree, seed) in [(two_level_gumbel(), 31), (two_level_clayton(), 32)] {
            let mut rng = stream_rng(seed, 0);
            let draws: Vec<Vec<f64>> = (0..100_000).map(|_| sample_frailty_tree(&tree, &mut rng)).collect();
            for j in 0..tree.dimension() {
                let col: Vec<f64> = draws.iter().map(|r| r[j]).collect();
                let g = tree.leaf_generator(j);
                for t in [0.5, 1.0, 2.0] {
                    let (m, se) = ls_estimate(&col, t);
                    let target = g.psi(t).unwrap();
                    assert!((m - target).abs() < 3.0 * se, "{g:?} j={j} t={t}: {m} vs {target}");
                }
            }
        }
    }

    #[test]
    fn siblings_share_frailty() {
        let tree = two_level_clayton();
        let mut rng = stream_rng(4, 0);
        for _ in 0..100 {
            let v = sample_frailty_tree(&tree, &mut rng);
            assert_eq!(v[0], v[1]);
            assert_eq!(v[2], v[3]);
            assert_eq!(v[3], v[4]);
            assert_ne!(v[1], v[2]);
        }
    }

    #[test]
    fn flat_tree_matches_single_frailty() {
        let tree = FrailtyTree::single(GeneratorSpec::Clayton { theta: 2.0 }, 3).unwrap();
        let mut a = stream_rng(9, 0);
        let mut b = stream_rng(9, 0);
        for _ in 0..50 {
            let v = sample_frailty_tree(&tree, &mut a);
            let w = sample_gamma_frailty(2.0, &mut b).unwrap();
            assert_eq!(v, vec![w; 3]);
        }
    }

    #[test]
    fn ordering_violations_are_rejected() {
        let err = FrailtyTree::two_level(
            GeneratorSpec::Gumbel { alpha: 0.5 },
            &[(2, GeneratorSpec::Gumbel { alpha: 0.8 })],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        let err = FrailtyTree::two_level(
            GeneratorSpec::Clayton { theta: 2.0 },
            &[(2, GeneratorSpec::Clayton { theta: 1.0 })],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        let err = FrailtyTree::two_level(
            GeneratorSpec::Clayton { theta: 1.0 },
            &[(2, GeneratorSpec::Gumbel { alpha: 0.5 })],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Capability(_)));
    }

    #[test]
    fn reads_generators_from_node_parameters() {
        let nodes = vec![
            NodeRecord::new("root", None, params(&[("alpha", 0.8)])),
            NodeRecord::new("s", Some("root"), params(&[("alpha", 0.5)])),
            NodeRecord::new("a", Some("s"), Default::default()),
            NodeRecord::new("b", Some("s"), Default::default()),
            NodeRecord::new("c", Some("root"), Default::default()),
        ];
        let order = ["a", "b", "c"].map(String::from).to_vec();
        let tree = FrailtyTree::new(HierarchyTree::new(nodes, order).unwrap()).unwrap();
        assert_eq!(tree.leaf_generator(0), GeneratorSpec::Gumbel { alpha: 0.5 });
        assert_eq!(tree.leaf_generator(2), GeneratorSpec::Gumbel { alpha: 0.8 });
    }
}
