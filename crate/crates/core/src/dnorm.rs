//! d-norm generators: non-negative random vectors `W` with `E[W_j] = 1`.
//!
//! Each generator defines the stable tail dependence function
//! `ℓ(x) = E[max_j x_j W_j]`, which [`mc_stdf`] estimates by Monte Carlo.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1, Open01, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frailty::positive_stable;
use crate::hierarchy::HierarchyTree;
use crate::linalg::{check_psd, cholesky_psd, matrix_from_rows};
use crate::numeric::{gamma, ln_gamma};
use crate::rng::stream_rng;
use crate::stdf::{ExtremalT, HuslerReiss, NestedGumbel, StdfSpec};

/// Draws per independent stream in [`mc_stdf_parallel`].
const CHUNK: usize = 1 << 14;

/// Gaussian vector `N(0, Σ)` with a cached Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl Gaussian {
    pub fn new(cov: DMatrix<f64>, what: &str) -> Result<Self> {
        let chol = cholesky_psd(&cov, what)?;
        Ok(Gaussian { cov, chol })
    }

    /// Correlation matrix: PSD with a unit diagonal.
    pub fn correlation(corr: DMatrix<f64>, what: &str) -> Result<Self> {
        for i in 0..corr.nrows() {
            if (corr[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::domain(format!("{what} must have a unit diagonal")));
            }
        }
        Self::new(corr, what)
    }

    pub fn dimension(&self) -> usize {
        self.cov.nrows()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let n = self.dimension();
        let z: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        let e = &self.chol * z;
        out.copy_from_slice(e.as_slice());
    }
}

/// Two-level Gaussian hierarchy: sector effects `N(0, Σ_0)` plus independent
/// within-sector effects `N(0, Σ_s)`. Coordinate `(s, j)` carries
/// `ε_{sj} = W*_s + W*_{sj}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HierGaussian {
    root: Gaussian,
    sectors: Vec<Gaussian>,
}

impl HierGaussian {
    pub fn new(root_cov: DMatrix<f64>, sector_covs: Vec<DMatrix<f64>>) -> Result<Self> {
        if root_cov.nrows() != sector_covs.len() {
            return Err(Error::domain(format!(
                "root covariance has dimension {} but {} sector covariances were given",
                root_cov.nrows(),
                sector_covs.len()
            )));
        }
        if sector_covs.iter().any(|c| c.nrows() == 0) {
            return Err(Error::domain("every sector needs at least one coordinate"));
        }
        let root = Gaussian::new(root_cov, "root covariance")?;
        let sectors = sector_covs
            .into_iter()
            .enumerate()
            .map(|(s, c)| Gaussian::new(c, &format!("covariance of sector {s}")))
            .collect::<Result<_>>()?;
        Ok(HierGaussian { root, sectors })
    }

    pub fn from_rows(root: &[Vec<f64>], sectors: &[Vec<Vec<f64>>]) -> Result<Self> {
        let root = matrix_from_rows(root, "root covariance")?;
        let sectors = sectors
            .iter()
            .map(|s| matrix_from_rows(s, "sector covariance"))
            .collect::<Result<_>>()?;
        Self::new(root, sectors)
    }

    pub fn sector_sizes(&self) -> Vec<usize> {
        self.sectors.iter().map(Gaussian::dimension).collect()
    }

    pub fn dimension(&self) -> usize {
        self.sectors.iter().map(Gaussian::dimension).sum()
    }

    /// Covariance of `ε`: `Σ_{0,ss} + Σ_{s,jk}` within sector s, `Σ_{0,st}` across.
    pub fn covariance(&self) -> DMatrix<f64> {
        let sector_of: Vec<(usize, usize)> = self
            .sectors
            .iter()
            .enumerate()
            .flat_map(|(s, g)| (0..g.dimension()).map(move |j| (s, j)))
            .collect();
        let d = sector_of.len();
        DMatrix::from_fn(d, d, |a, b| {
            let (s, j) = sector_of[a];
            let (t, k) = sector_of[b];
            let base = self.root.cov[(s, t)];
            if s == t {
                base + self.sectors[s].cov[(j, k)]
            } else {
                base
            }
        })
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let mut root = vec![0.0; self.sectors.len()];
        self.root.sample_into(rng, &mut root);
        let mut offset = 0;
        for (s, g) in self.sectors.iter().enumerate() {
            let block = &mut out[offset..offset + g.dimension()];
            g.sample_into(rng, block);
            block.iter_mut().for_each(|v| *v += root[s]);
            offset += g.dimension();
        }
    }
}

/// A marginal law on `[0, ∞)` given by its quantile function and cdf.
#[derive(Clone)]
pub struct Margin {
    name: String,
    quantile: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    cdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Margin {
    /// A custom margin; it must have mean one for `W` to be a d-norm generator.
    pub fn new(
        name: impl Into<String>,
        quantile: impl Fn(f64) -> f64 + Send + Sync + 'static,
        cdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Margin { name: name.into(), quantile: Arc::new(quantile), cdf: Arc::new(cdf) }
    }

    /// Exp(1).
    pub fn exponential() -> Self {
        Margin::new("exponential", |u: f64| -(-u).ln_1p(), |z: f64| -(-z.max(0.0)).exp_m1())
    }

    /// Uniform on [0, 2].
    pub fn uniform() -> Self {
        Margin::new("uniform", |u: f64| 2.0 * u, |z: f64| (z / 2.0).clamp(0.0, 1.0))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn quantile(&self, u: f64) -> f64 {
        (self.quantile)(u)
    }

    pub fn cdf(&self, z: f64) -> f64 {
        (self.cdf)(z)
    }
}

impl fmt::Debug for Margin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Margin({})", self.name)
    }
}

impl PartialEq for Margin {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && Arc::ptr_eq(&self.quantile, &other.quantile)
            && Arc::ptr_eq(&self.cdf, &other.cdf)
    }
}

type CopulaSampler = Arc<dyn Fn(&mut dyn RngCore) -> Vec<f64> + Send + Sync>;

/// `W_j = F_j^{-1}(U_j)` with `U` drawn from a copula.
#[derive(Clone)]
pub struct GeneralCopulaMargins {
    /// `None` is the independence copula.
    copula: Option<CopulaSampler>,
    margins: Vec<Margin>,
}

impl GeneralCopulaMargins {
    pub fn independence(margins: Vec<Margin>) -> Result<Self> {
        if margins.is_empty() {
            return Err(Error::domain("at least one margin is required"));
        }
        Ok(GeneralCopulaMargins { copula: None, margins })
    }

    /// `copula` must return one point of `[0,1]^d` per call, `d = margins.len()`.
    pub fn new(
        copula: impl Fn(&mut dyn RngCore) -> Vec<f64> + Send + Sync + 'static,
        margins: Vec<Margin>,
    ) -> Result<Self> {
        if margins.is_empty() {
            return Err(Error::domain("at least one margin is required"));
        }
        Ok(GeneralCopulaMargins { copula: Some(Arc::new(copula)), margins })
    }

    pub fn margins(&self) -> &[Margin] {
        &self.margins
    }

    pub fn is_independence(&self) -> bool {
        self.copula.is_none()
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.copula {
            None => {
                for (o, m) in out.iter_mut().zip(&self.margins) {
                    let u: f64 = Open01.sample(rng);
                    *o = m.quantile(u);
                }
            }
            Some(sampler) => {
                let mut r = rng;
                let u = sampler(&mut r);
                for ((o, m), &u) in out.iter_mut().zip(&self.margins).zip(&u) {
                    *o = m.quantile(u);
                }
            }
        }
    }
}

impl fmt::Debug for GeneralCopulaMargins {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralCopulaMargins")
            .field("copula", &if self.copula.is_some() { "custom" } else { "independence" })
            .field("margins", &self.margins)
            .finish()
    }
}

impl PartialEq for GeneralCopulaMargins {
    fn eq(&self, other: &Self) -> bool {
        let same_copula = match (&self.copula, &other.copula) {
            (None, None) => true,
            (Some(a), Some(b)) => Arc::ptr_eq(a, b),
            _ => false,
        };
        same_copula && self.margins == other.margins
    }
}

/// A d-norm generator.
#[derive(Debug, Clone, PartialEq)]
pub enum DNormGeneratorSpec {
    /// `W = (1, …, 1)`.
    Comonotone { dimension: usize },
    /// A uniformly random permutation of `(d, 0, …, 0)`.
    IndependencePermutation { dimension: usize },
    /// `W_j = E_j^{-α} / Γ(1-α)`: iid Fréchet(1/α), scaled to mean one.
    GumbelFrechet { dimension: usize, alpha: f64 },
    /// `W_j = E_j^{1/θ} / Γ(1+1/θ)`: iid Weibull(θ), scaled to mean one.
    NegativeLogisticWeibull { dimension: usize, theta: f64 },
    /// `W_j = √(2π) max(0, ε_j)`, `ε ~ N(0, P)`.
    Schlather(Gaussian),
    /// `W_j = max(0, ε_j)^ν / c_ν`, `ε ~ N(0, P)`.
    ExtremalT { nu: f64, gaussian: Gaussian },
    /// `W_j = exp(ε_j - Σ_jj/2)`, `ε ~ N(0, Σ)`.
    BrownResnick(Gaussian),
    GeneralCopulaMargins(GeneralCopulaMargins),
    /// Products of positive stable node variables along each root-to-leaf path.
    NestedGumbelTree(NestedGumbel),
    /// Brown–Resnick generator over a two-level Gaussian hierarchy.
    HierHuslerReiss(HierGaussian),
    /// Extremal-t generator over a two-level Gaussian hierarchy, with each
    /// `ε_{sj}` standardized to unit variance.
    HierExtremalT { nu: f64, hierarchy: HierGaussian },
}

/// `c_ν = 2^{ν/2-1} Γ((ν+1)/2) / √π = E[max(0, ε)^ν]` for standard normal ε.
pub fn truncated_normal_moment(nu: f64) -> f64 {
    ((nu / 2.0 - 1.0) * std::f64::consts::LN_2 + ln_gamma((nu + 1.0) / 2.0)
        - 0.5 * std::f64::consts::PI.ln())
    .exp()
}

impl DNormGeneratorSpec {
    pub fn comonotone(dimension: usize) -> Result<Self> {
        let s = DNormGeneratorSpec::Comonotone { dimension };
        s.validate()?;
        Ok(s)
    }

    pub fn independence_permutation(dimension: usize) -> Result<Self> {
        let s = DNormGeneratorSpec::IndependencePermutation { dimension };
        s.validate()?;
        Ok(s)
    }

    pub fn gumbel_frechet(dimension: usize, alpha: f64) -> Result<Self> {
        let s = DNormGeneratorSpec::GumbelFrechet { dimension, alpha };
        s.validate()?;
        Ok(s)
    }

    pub fn negative_logistic_weibull(dimension: usize, theta: f64) -> Result<Self> {
        let s = DNormGeneratorSpec::NegativeLogisticWeibull { dimension, theta };
        s.validate()?;
        Ok(s)
    }

    pub fn schlather(corr: &[Vec<f64>]) -> Result<Self> {
        let m = matrix_from_rows(corr, "Schlather correlation")?;
        Ok(DNormGeneratorSpec::Schlather(Gaussian::correlation(m, "Schlather correlation")?))
    }

    pub fn extremal_t(nu: f64, corr: &[Vec<f64>]) -> Result<Self> {
        check_nu(nu)?;
        let m = matrix_from_rows(corr, "extremal-t correlation")?;
        Ok(DNormGeneratorSpec::ExtremalT { nu, gaussian: Gaussian::correlation(m, "extremal-t correlation")? })
    }

    pub fn brown_resnick(cov: &[Vec<f64>]) -> Result<Self> {
        let m = matrix_from_rows(cov, "Brown–Resnick covariance")?;
        Ok(DNormGeneratorSpec::BrownResnick(Gaussian::new(m, "Brown–Resnick covariance")?))
    }

    /// The tree needs `alpha` at every internal node, non-increasing towards
    /// the leaves, with root α < 1.
    pub fn nested_gumbel_tree(tree: HierarchyTree) -> Result<Self> {
        let n = NestedGumbel::new(tree)?;
        check_nested_root(&n)?;
        Ok(DNormGeneratorSpec::NestedGumbelTree(n))
    }

    pub fn hier_husler_reiss(hierarchy: HierGaussian) -> Self {
        DNormGeneratorSpec::HierHuslerReiss(hierarchy)
    }

    pub fn hier_extremal_t(nu: f64, hierarchy: HierGaussian) -> Result<Self> {
        check_nu(nu)?;
        Ok(DNormGeneratorSpec::HierExtremalT { nu, hierarchy })
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimension();
        if d == 0 {
            return Err(Error::domain("generator dimension must be at least 1"));
        }
        match self {
            DNormGeneratorSpec::GumbelFrechet { alpha, .. } if !(*alpha > 0.0 && *alpha < 1.0) => {
                Err(Error::domain(format!("Gumbel–Fréchet generator needs alpha in (0,1), got {alpha}")))
            }
            DNormGeneratorSpec::NegativeLogisticWeibull { theta, .. }
                if !(*theta > 0.0 && theta.is_finite()) =>
            {
                Err(Error::domain(format!("Weibull generator needs theta > 0, got {theta}")))
            }
            DNormGeneratorSpec::ExtremalT { nu, .. } | DNormGeneratorSpec::HierExtremalT { nu, .. } => check_nu(*nu),
            DNormGeneratorSpec::NestedGumbelTree(n) => check_nested_root(n),
            _ => Ok(()),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            DNormGeneratorSpec::Comonotone { dimension }
            | DNormGeneratorSpec::IndependencePermutation { dimension }
            | DNormGeneratorSpec::GumbelFrechet { dimension, .. }
            | DNormGeneratorSpec::NegativeLogisticWeibull { dimension, .. } => *dimension,
            DNormGeneratorSpec::Schlather(g)
            | DNormGeneratorSpec::BrownResnick(g)
            | DNormGeneratorSpec::ExtremalT { gaussian: g, .. } => g.dimension(),
            DNormGeneratorSpec::GeneralCopulaMargins(g) => g.margins.len(),
            DNormGeneratorSpec::NestedGumbelTree(n) => n.tree().dimension(),
            DNormGeneratorSpec::HierHuslerReiss(h) | DNormGeneratorSpec::HierExtremalT { hierarchy: h, .. } => {
                h.dimension()
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DNormGeneratorSpec::Comonotone { .. } => "comonotone",
            DNormGeneratorSpec::IndependencePermutation { .. } => "independence_permutation",
            DNormGeneratorSpec::GumbelFrechet { .. } => "gumbel_frechet",
            DNormGeneratorSpec::NegativeLogisticWeibull { .. } => "negative_logistic_weibull",
            DNormGeneratorSpec::Schlather(_) => "schlather",
            DNormGeneratorSpec::ExtremalT { .. } => "extremal_t",
            DNormGeneratorSpec::BrownResnick(_) => "brown_resnick",
            DNormGeneratorSpec::GeneralCopulaMargins(_) => "general_copula_margins",
            DNormGeneratorSpec::NestedGumbelTree(_) => "nested_gumbel_tree",
            DNormGeneratorSpec::HierHuslerReiss(_) => "hier_husler_reiss",
            DNormGeneratorSpec::HierExtremalT { .. } => "hier_extremal_t",
        }
    }

    /// `b` with `P(W_j ≤ b) = 1` for all j, when one exists.
    pub fn sup_bound(&self) -> Option<f64> {
        match self {
            DNormGeneratorSpec::Comonotone { .. } => Some(1.0),
            DNormGeneratorSpec::IndependencePermutation { dimension } => Some(*dimension as f64),
            _ => None,
        }
    }

    /// The stable tail dependence function generated by `W`, when a closed
    /// form is available.
    pub fn stdf(&self) -> Result<StdfSpec> {
        let d = self.dimension();
        match self {
            DNormGeneratorSpec::Comonotone { .. } => StdfSpec::max(d),
            DNormGeneratorSpec::IndependencePermutation { .. } => StdfSpec::sum(d),
            DNormGeneratorSpec::GumbelFrechet { alpha, .. } => StdfSpec::gumbel(d, *alpha),
            DNormGeneratorSpec::NegativeLogisticWeibull { theta, .. } => StdfSpec::negative_logistic(d, *theta),
            DNormGeneratorSpec::Schlather(g) => Ok(StdfSpec::ExtremalT(ExtremalT::new(1.0, g.cov.clone())?)),
            DNormGeneratorSpec::ExtremalT { nu, gaussian } => {
                Ok(StdfSpec::ExtremalT(ExtremalT::new(*nu, gaussian.cov.clone())?))
            }
            DNormGeneratorSpec::BrownResnick(g) => Ok(StdfSpec::HuslerReiss(HuslerReiss::from_covariance(&g.cov)?)),
            DNormGeneratorSpec::NestedGumbelTree(n) => Ok(StdfSpec::NestedGumbel(n.clone())),
            DNormGeneratorSpec::HierHuslerReiss(h) => {
                Ok(StdfSpec::HuslerReiss(HuslerReiss::from_covariance(&h.covariance())?))
            }
            DNormGeneratorSpec::HierExtremalT { nu, hierarchy } => {
                let cov = hierarchy.covariance();
                let sd: Vec<f64> = (0..cov.nrows()).map(|i| cov[(i, i)].sqrt()).collect();
                if sd.iter().any(|&s| s == 0.0) {
                    return Err(Error::domain("hierarchical extremal-t needs positive variances"));
                }
                let corr = DMatrix::from_fn(cov.nrows(), cov.nrows(), |i, j| {
                    if i == j {
                        1.0
                    } else {
                        cov[(i, j)] / (sd[i] * sd[j])
                    }
                });
                check_psd(&corr, "hierarchical extremal-t correlation")?;
                Ok(StdfSpec::ExtremalT(ExtremalT::new(*nu, corr)?))
            }
            DNormGeneratorSpec::GeneralCopulaMargins(_) => Err(Error::capability(
                "no closed-form stdf for a general copula generator; use mc_stdf",
            )),
        }
    }

    /// One draw of `W` written into `out` (length d).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = self.dimension();
        debug_assert_eq!(out.len(), d);
        match self {
            DNormGeneratorSpec::Comonotone { .. } => out.fill(1.0),
            DNormGeneratorSpec::IndependencePermutation { .. } => {
                out.fill(0.0);
                out[rng.random_range(0..d)] = d as f64;
            }
            DNormGeneratorSpec::GumbelFrechet { alpha, .. } => {
                let c = gamma(1.0 - alpha);
                for o in out.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    *o = e.powf(-alpha) / c;
                }
            }
            DNormGeneratorSpec::NegativeLogisticWeibull { theta, .. } => {
                let c = gamma(1.0 + 1.0 / theta);
                for o in out.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    *o = e.powf(1.0 / theta) / c;
                }
            }
            DNormGeneratorSpec::Schlather(g) => {
                g.sample_into(rng, out);
                let c = (2.0 * std::f64::consts::PI).sqrt();
                out.iter_mut().for_each(|v| *v = c * v.max(0.0));
            }
            DNormGeneratorSpec::ExtremalT { nu, gaussian } => {
                gaussian.sample_into(rng, out);
                let c = truncated_normal_moment(*nu);
                out.iter_mut().for_each(|v| *v = v.max(0.0).powf(*nu) / c);
            }
            DNormGeneratorSpec::BrownResnick(g) => {
                g.sample_into(rng, out);
                for (j, v) in out.iter_mut().enumerate() {
                    *v = (*v - g.cov[(j, j)] / 2.0).exp();
                }
            }
            DNormGeneratorSpec::GeneralCopulaMargins(g) => g.sample_into(rng, out),
            DNormGeneratorSpec::NestedGumbelTree(n) => nested_gumbel_into(n, rng, out),
            DNormGeneratorSpec::HierHuslerReiss(h) => {
                h.sample_into(rng, out);
                let mut j = 0;
                for (s, g) in h.sectors.iter().enumerate() {
                    for k in 0..g.dimension() {
                        let var = h.root.cov[(s, s)] + g.cov[(k, k)];
                        out[j] = (out[j] - var / 2.0).exp();
                        j += 1;
                    }
                }
            }
            DNormGeneratorSpec::HierExtremalT { nu, hierarchy: h } => {
                h.sample_into(rng, out);
                let c = truncated_normal_moment(*nu);
                let mut j = 0;
                for (s, g) in h.sectors.iter().enumerate() {
                    for k in 0..g.dimension() {
                        let sd = (h.root.cov[(s, s)] + g.cov[(k, k)]).sqrt();
                        out[j] = (out[j] / sd).max(0.0).powf(*nu) / c;
                        j += 1;
                    }
                }
            }
        }
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::domain(format!("degrees of freedom must be positive, got {nu}")));
    }
    Ok(())
}

fn check_nested_root(n: &NestedGumbel) -> Result<()> {
    let a0 = n.alpha(n.tree().root());
    if a0 >= 1.0 {
        return Err(Error::domain(format!(
            "nested Gumbel generator needs root alpha < 1, got {a0}"
        )));
    }
    Ok(())
}

/// Leaf j gets `∏_k (W*_k)^{α_k} · F_j / Γ(1-α_root)` over the internal
/// non-root nodes k on its path, with `W*_k ~ PS(α_k / α_parent(k))` and
/// `F_j` Fréchet with shape `1/α` of its parent.
fn nested_gumbel_into<R: Rng + ?Sized>(n: &NestedGumbel, rng: &mut R, out: &mut [f64]) {
    let tree = n.tree();
    let root = tree.root();
    let norm = gamma(1.0 - n.alpha(root));
    let mut factor = vec![1.0; tree.len()];
    for node in tree.internal_nodes() {
        let a = n.alpha(node);
        for &c in tree.children(node) {
            match tree.coordinate_of(c) {
                Some(j) => {
                    let e: f64 = Exp1.sample(rng);
                    out[j] = factor[node] * e.powf(-a) / norm;
                }
                None => {
                    let ac = n.alpha(c);
                    factor[c] = factor[node] * positive_stable(ac / a, rng).powf(ac);
                }
            }
        }
    }
}

/// One draw of `W`.
pub fn sample_w<R: Rng + ?Sized>(spec: &DNormGeneratorSpec, rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; spec.dimension()];
    spec.sample_into(rng, &mut out);
    out
}

/// One draw of the nested Gumbel generator on `tree`.
pub fn sample_nested_gumbel_w<R: Rng + ?Sized>(tree: &HierarchyTree, rng: &mut R) -> Result<Vec<f64>> {
    let spec = DNormGeneratorSpec::nested_gumbel_tree(tree.clone())?;
    Ok(sample_w(&spec, rng))
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Running sums of a scalar sample.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn merge(self, o: Moments) -> Moments {
        Moments { n: self.n + o.n, sum: self.sum + o.sum, sum_sq: self.sum_sq + o.sum_sq }
    }

    fn estimate(self) -> McEstimate {
        let n = self.n as f64;
        let mean = self.sum / n;
        let std_error = if self.n > 1 {
            ((self.sum_sq - n * mean * mean).max(0.0) / (n - 1.0) / n).sqrt()
        } else {
            f64::INFINITY
        };
        McEstimate { estimate: mean, std_error }
    }
}

fn check_stdf_point(spec: &DNormGeneratorSpec, x: &[f64], n: usize) -> Result<()> {
    spec.validate()?;
    if x.len() != spec.dimension() {
        return Err(Error::domain(format!(
            "point of dimension {} for a generator of dimension {}",
            x.len(),
            spec.dimension()
        )));
    }
    if x.iter().any(|v| !(*v >= 0.0) || v.is_infinite()) {
        return Err(Error::domain("stdf arguments must be finite and non-negative"));
    }
    if n == 0 {
        return Err(Error::domain("Monte Carlo sample size must be at least 1"));
    }
    Ok(())
}

fn accumulate<R: Rng + ?Sized>(spec: &DNormGeneratorSpec, x: &[f64], n: usize, rng: &mut R) -> Moments {
    let mut w = vec![0.0; x.len()];
    let mut m = Moments::default();
    for _ in 0..n {
        spec.sample_into(rng, &mut w);
        m.push(x.iter().zip(&w).map(|(a, b)| a * b).fold(0.0, f64::max));
    }
    m
}

/// Sample mean and standard error of `max_j x_j W_j` over `n` draws.
pub fn mc_stdf<R: Rng + ?Sized>(spec: &DNormGeneratorSpec, x: &[f64], n: usize, rng: &mut R) -> Result<McEstimate> {
    check_stdf_point(spec, x, n)?;
    Ok(accumulate(spec, x, n, rng).estimate())
}

/// [`mc_stdf`] over independent streams of `seed`, one per block of draws.
/// The result does not depend on the number of worker threads.
pub fn mc_stdf_parallel(spec: &DNormGeneratorSpec, x: &[f64], n: usize, seed: u64) -> Result<McEstimate> {
    check_stdf_point(spec, x, n)?;
    let chunks = n.div_ceil(CHUNK);
    let total = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(n - c * CHUNK);
            accumulate(spec, x, len, &mut stream_rng(seed, c as u64))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Moments::default(), Moments::merge);
    Ok(total.estimate())
}

/// Estimator through partial derivatives of the copula of `W`:
/// `ℓ(x) = Σ_j x_j E[Z_j D_jC(F_1(Z_j x_j/x_1), …)]` with independent
/// `Z_j ~ F_j`. Only the bivariate independence copula is supported, where
/// `D_1 C(u) = u_2` and `D_2 C(u) = u_1`.
pub fn mc_stdf_copula_derivative<R: Rng + ?Sized>(
    spec: &DNormGeneratorSpec,
    x: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    check_stdf_point(spec, x, n)?;
    let g = match spec {
        DNormGeneratorSpec::GeneralCopulaMargins(g) if g.is_independence() && g.margins.len() == 2 => g,
        _ => {
            return Err(Error::capability(
                "the copula-derivative estimator supports only the bivariate independence copula",
            ))
        }
    };
    if x.iter().any(|&v| v == 0.0) {
        return Err(Error::domain("the copula-derivative estimator needs x > 0"));
    }
    let (f1, f2) = (&g.margins[0], &g.margins[1]);
    let mut m = Moments::default();
    for _ in 0..n {
        let u1: f64 = Open01.sample(rng);
        let u2: f64 = Open01.sample(rng);
        let z1 = f1.quantile(u1);
        let z2 = f2.quantile(u2);
        m.push(x[0] * z1 * f2.cdf(z1 * x[0] / x[1]) + x[1] * z2 * f1.cdf(z2 * x[1] / x[0]));
    }
    Ok(m.estimate())
}
