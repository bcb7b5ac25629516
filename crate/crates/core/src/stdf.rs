//! Stable tail dependence functions ℓ and their block partial derivatives.
//!
//! Every ℓ is homogeneous of order one, so `D_B ℓ(c x) = c^{1-|B|} D_B ℓ(x)`.
//! Derivatives are evaluated at `x / max(x)` and rescaled, which keeps the
//! arguments of powers and distribution functions in a benign range.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hierarchy::HierarchyTree;
use crate::linalg::{check_psd, matrix_from_rows};
use crate::mvcdf::{mvn_cdf, mvt_cdf, MAX_DIMENSION};
use crate::numeric::{falling_factorial, log_sum_exp};

/// Largest dimension for the alternating subset sum of the negative logistic.
const NEGATIVE_LOGISTIC_MAX_DIMENSION: usize = 20;

/// A stable tail dependence function of dimension d.
#[derive(Debug, Clone, PartialEq)]
pub enum StdfSpec {
    /// `max_j x_j` (comonotone).
    Max { dimension: usize },
    /// `Σ_j x_j` (independence).
    Sum { dimension: usize },
    /// `(Σ_j x_j^{1/α})^α`, α ∈ (0, 1].
    Gumbel { dimension: usize, alpha: f64 },
    /// Gumbel functions composed along a tree.
    NestedGumbel(NestedGumbel),
    /// `Σ_{∅≠J} (-1)^{|J|+1} (Σ_{j∈J} x_j^{-θ})^{-1/θ}`, θ > 0.
    NegativeLogistic { dimension: usize, theta: f64 },
    HuslerReiss(HuslerReiss),
    ExtremalT(ExtremalT),
}

/// Nested Gumbel stdf: each internal node `n` with parameter `α_n` maps its
/// children's values `y_c` to `(Σ_c y_c^{1/α_n})^{α_n}`; leaves are the
/// coordinates. Along every path α is non-increasing from root to leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedGumbel {
    tree: HierarchyTree,
    /// α per node; NaN at leaves.
    alpha: Vec<f64>,
}

/// Hüsler–Reiss stdf parameterized by the semivariogram matrix
/// `γ_ij = Var(ε_i - ε_j) / 2` of the underlying Gaussian vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HuslerReiss {
    gamma: DMatrix<f64>,
}

/// Extremal-t stdf with `nu > 0` degrees of freedom and correlation `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalT {
    nu: f64,
    corr: DMatrix<f64>,
}

impl NestedGumbel {
    /// Reads `alpha` from every internal node.
    pub fn new(tree: HierarchyTree) -> Result<Self> {
        let mut alpha = vec![f64::NAN; tree.len()];
        for i in tree.internal_nodes() {
            let a = tree.param_f64(i, "alpha").ok_or_else(|| {
                Error::config(format!("nested Gumbel node '{}' lacks 'alpha'", tree.node(i).id))
            })?;
            alpha[i] = a;
        }
        Self::with_alpha(tree, alpha)
    }

    /// Two-level function: root α and one α per sector of consecutive
    /// coordinates.
    pub fn two_level(root_alpha: f64, sectors: &[(usize, f64)]) -> Result<Self> {
        use crate::hierarchy::params;
        let sizes: Vec<usize> = sectors.iter().map(|s| s.0).collect();
        let sector_params: Vec<_> = sectors.iter().map(|s| params(&[("alpha", s.1)])).collect();
        let tree = HierarchyTree::two_level(&sizes, params(&[("alpha", root_alpha)]), &sector_params)?;
        Self::new(tree)
    }

    fn with_alpha(tree: HierarchyTree, alpha: Vec<f64>) -> Result<Self> {
        for i in tree.internal_nodes() {
            let a = alpha[i];
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::domain(format!(
                    "nested Gumbel node '{}' needs alpha in (0,1], got {a}",
                    tree.node(i).id
                )));
            }
            if let Some(p) = tree.parent(i) {
                if a > alpha[p] {
                    return Err(Error::domain(format!(
                        "nested Gumbel ordering fails: alpha of '{}' ({a}) exceeds alpha of parent '{}' ({})",
                        tree.node(i).id,
                        tree.node(p).id,
                        alpha[p]
                    )));
                }
            }
        }
        Ok(NestedGumbel { tree, alpha })
    }

    pub fn tree(&self) -> &HierarchyTree {
        &self.tree
    }

    /// α of an internal node.
    pub fn alpha(&self, node: usize) -> f64 {
        self.alpha[node]
    }

    /// α governing the bivariate margin `(i, j)`: that of their lowest
    /// common ancestor.
    pub fn pair_alpha(&self, i: usize, j: usize) -> Result<f64> {
        Ok(self.alpha[self.tree.lowest_common_ancestor(i, j)?])
    }

    fn value(&self, node: usize, x: &[f64]) -> f64 {
        if let Some(j) = self.tree.coordinate_of(node) {
            return x[j];
        }
        let a = self.alpha[node];
        let ys: Vec<f64> = self.tree.children(node).iter().map(|&c| self.value(c, x)).collect();
        gumbel_value(&ys, a)
    }

    /// Value, first derivatives w.r.t. `x_i`, `x_j` and the mixed second
    /// derivative of the subtree function at `node` (i ≠ j).
    fn second_order(&self, node: usize, x: &[f64], i: usize, j: usize) -> (f64, f64, f64, f64) {
        if let Some(k) = self.tree.coordinate_of(node) {
            return (x[k], (k == i) as u8 as f64, (k == j) as u8 as f64, 0.0);
        }
        let a = self.alpha[node];
        let parts: Vec<(f64, f64, f64, f64)> = self
            .tree
            .children(node)
            .iter()
            .map(|&c| self.second_order(c, x, i, j))
            .collect();
        let ys: Vec<f64> = parts.iter().map(|p| p.0).collect();
        let l = gumbel_value(&ys, a);
        if l == 0.0 {
            return (0.0, 0.0, 0.0, 0.0);
        }
        // With L = (Σ y_c^{1/a})^a:
        //   ∂L/∂y_c = (y_c/L)^{1/a-1}
        //   ∂²L/∂y_c∂y_e = (1-1/a) (y_c y_e)^{1/a-1} L^{1-2/a}         (c ≠ e)
        //   ∂²L/∂y_c²    = (1-1/a) y_c^{2/a-2} L^{1-2/a} + (1/a-1) y_c^{1/a-2} L^{1-1/a}
        let p = 1.0 / a - 1.0;
        let g: Vec<f64> = ys.iter().map(|&y| if y > 0.0 { (y / l).powf(p) } else { 0.0 }).collect();
        let (mut di, mut dj, mut dij) = (0.0, 0.0, 0.0);
        for (c, part) in parts.iter().enumerate() {
            di += g[c] * part.1;
            dj += g[c] * part.2;
            dij += g[c] * part.3;
        }
        if p != 0.0 {
            for (c, pc) in parts.iter().enumerate() {
                if pc.1 == 0.0 {
                    continue;
                }
                for (e, pe) in parts.iter().enumerate() {
                    if pe.2 == 0.0 {
                        continue;
                    }
                    let mut h = -p * g[c] * g[e] / l;
                    if c == e {
                        h += p * g[c] / ys[c];
                    }
                    dij += h * pc.1 * pe.2;
                }
            }
        }
        (l, di, dj, dij)
    }

    /// `∂ℓ/∂x_j`: product of `(L_child / L_parent)^{1/α_parent - 1}` along
    /// the path to leaf j.
    fn gradient(&self, x: &[f64], j: usize) -> f64 {
        let path = self.tree.path_to_leaf(j).expect("coordinate in range");
        let vals: Vec<f64> = path.iter().map(|&n| self.value(n, x)).collect();
        let mut g = 1.0;
        for k in 0..path.len() - 1 {
            let p = 1.0 / self.alpha[path[k]] - 1.0;
            if p != 0.0 {
                g *= (vals[k + 1] / vals[k]).powf(p);
            }
        }
        g
    }

    fn hessian(&self, x: &[f64], i: usize, j: usize) -> f64 {
        self.second_order(self.tree.root(), x, i, j).3
    }
}

impl HuslerReiss {
    /// From a semivariogram matrix: symmetric, zero diagonal, non-negative,
    /// and conditionally negative definite (checked through `Σ_1`).
    pub fn new(gamma: DMatrix<f64>) -> Result<Self> {
        let d = gamma.nrows();
        if d != gamma.ncols() || d == 0 {
            return Err(Error::domain("Hüsler–Reiss semivariogram must be a non-empty square matrix"));
        }
        for i in 0..d {
            if gamma[(i, i)].abs() > 1e-12 {
                return Err(Error::domain("Hüsler–Reiss semivariogram must have a zero diagonal"));
            }
            for j in 0..d {
                if gamma[(i, j)] < 0.0 || (gamma[(i, j)] - gamma[(j, i)]).abs() > 1e-12 {
                    return Err(Error::domain("Hüsler–Reiss semivariogram must be symmetric and non-negative"));
                }
            }
        }
        let hr = HuslerReiss { gamma };
        if d > 1 {
            let all: Vec<usize> = (0..d).collect();
            let (_, sigma) = hr.conditional(&all, 0, &vec![1.0; d]);
            check_psd(&sigma, "Hüsler–Reiss conditional covariance")?;
        }
        Ok(hr)
    }

    /// From the covariance `Σ` of the Gaussian vector: `γ_ij = (Σ_ii + Σ_jj - 2Σ_ij)/2`.
    pub fn from_covariance(sigma: &DMatrix<f64>) -> Result<Self> {
        check_psd(sigma, "Brown–Resnick covariance")?;
        let d = sigma.nrows();
        let gamma = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                0.0
            } else {
                ((sigma[(i, i)] + sigma[(j, j)] - 2.0 * sigma[(i, j)]) / 2.0).max(0.0)
            }
        });
        Self::new(gamma)
    }

    /// A covariance generating this semivariogram, with coordinate 0 pinned
    /// at zero: `Σ_ij = γ_i0 + γ_j0 - γ_ij`. Inverse of [`Self::from_covariance`].
    pub fn anchored_covariance(&self) -> DMatrix<f64> {
        let g = &self.gamma;
        DMatrix::from_fn(g.nrows(), g.nrows(), |i, j| g[(i, 0)] + g[(j, 0)] - g[(i, j)])
    }

    pub fn semivariogram(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    /// Limits `η` and covariance `Σ_j` of the j-th term over `active \ {j}`:
    /// `η_i = γ_ij - ln(x_i/x_j)`, `Σ_{ik} = γ_ij + γ_kj - γ_ik`.
    fn conditional(&self, active: &[usize], j: usize, x: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let others: Vec<usize> = active.iter().copied().filter(|&i| i != j).collect();
        let g = &self.gamma;
        let eta = others.iter().map(|&i| g[(i, j)] - (x[i] / x[j]).ln()).collect();
        let m = others.len();
        let sigma = DMatrix::from_fn(m, m, |a, b| {
            let (i, k) = (others[a], others[b]);
            g[(i, j)] + g[(k, j)] - g[(i, k)]
        });
        (eta, sigma)
    }

    fn term(&self, active: &[usize], j: usize, x: &[f64]) -> Result<f64> {
        let (eta, sigma) = self.conditional(active, j, x);
        if eta.is_empty() {
            return Ok(1.0);
        }
        mvn_cdf(&eta, &vec![0.0; eta.len()], &sigma)
    }
}

impl ExtremalT {
    pub fn new(nu: f64, corr: DMatrix<f64>) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::domain(format!("extremal-t nu must be positive, got {nu}")));
        }
        check_psd(&corr, "extremal-t correlation")?;
        for i in 0..corr.nrows() {
            if (corr[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::domain("extremal-t correlation matrix needs a unit diagonal"));
            }
        }
        Ok(ExtremalT { nu, corr })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        &self.corr
    }

    /// The j-th term: a `(m-1)`-variate t with `ν+1` degrees of freedom,
    /// location `P_{-j,j}` and dispersion `(P_{-j,-j} - P_{-j,j} P_{j,-j})/(ν+1)`
    /// at `(x_i/x_j)^{-1/ν}`.
    fn term(&self, active: &[usize], j: usize, x: &[f64]) -> Result<f64> {
        let others: Vec<usize> = active.iter().copied().filter(|&i| i != j).collect();
        if others.is_empty() {
            return Ok(1.0);
        }
        let p = &self.corr;
        let m = others.len();
        let loc: Vec<f64> = others.iter().map(|&i| p[(i, j)]).collect();
        let disp = DMatrix::from_fn(m, m, |a, b| {
            let (i, k) = (others[a], others[b]);
            (p[(i, k)] - p[(i, j)] * p[(j, k)]) / (self.nu + 1.0)
        });
        let upper: Vec<f64> = others.iter().map(|&i| (x[i] / x[j]).powf(-1.0 / self.nu)).collect();
        mvt_cdf(&upper, &loc, &disp, self.nu + 1.0)
    }
}

fn gumbel_value(y: &[f64], alpha: f64) -> f64 {
    let m = y.iter().copied().fold(0.0, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    if alpha == 1.0 {
        return y.iter().sum();
    }
    m * y.iter().map(|&v| (v / m).powf(1.0 / alpha)).sum::<f64>().powf(alpha)
}

impl StdfSpec {
    pub fn max(dimension: usize) -> Result<Self> {
        check_dimension(dimension)?;
        Ok(StdfSpec::Max { dimension })
    }

    pub fn sum(dimension: usize) -> Result<Self> {
        check_dimension(dimension)?;
        Ok(StdfSpec::Sum { dimension })
    }

    pub fn gumbel(dimension: usize, alpha: f64) -> Result<Self> {
        let s = StdfSpec::Gumbel { dimension, alpha };
        s.validate()?;
        Ok(s)
    }

    pub fn negative_logistic(dimension: usize, theta: f64) -> Result<Self> {
        let s = StdfSpec::NegativeLogistic { dimension, theta };
        s.validate()?;
        Ok(s)
    }

    pub fn nested_gumbel(tree: HierarchyTree) -> Result<Self> {
        Ok(StdfSpec::NestedGumbel(NestedGumbel::new(tree)?))
    }

    pub fn husler_reiss(gamma: &[Vec<f64>]) -> Result<Self> {
        Ok(StdfSpec::HuslerReiss(HuslerReiss::new(matrix_from_rows(gamma, "semivariogram")?)?))
    }

    pub fn extremal_t(nu: f64, corr: &[Vec<f64>]) -> Result<Self> {
        Ok(StdfSpec::ExtremalT(ExtremalT::new(nu, matrix_from_rows(corr, "correlation")?)?))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StdfSpec::Max { dimension } | StdfSpec::Sum { dimension } => check_dimension(*dimension),
            StdfSpec::Gumbel { dimension, alpha } => {
                check_dimension(*dimension)?;
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(Error::domain(format!("Gumbel stdf needs alpha in (0,1], got {alpha}")));
                }
                Ok(())
            }
            StdfSpec::NegativeLogistic { dimension, theta } => {
                check_dimension(*dimension)?;
                if *dimension > NEGATIVE_LOGISTIC_MAX_DIMENSION {
                    return Err(Error::capability(format!(
                        "negative logistic stdf is supported up to dimension {NEGATIVE_LOGISTIC_MAX_DIMENSION}"
                    )));
                }
                if !(*theta > 0.0 && theta.is_finite()) {
                    return Err(Error::domain(format!("negative logistic needs theta > 0, got {theta}")));
                }
                Ok(())
            }
            StdfSpec::NestedGumbel(_) => Ok(()),
            StdfSpec::HuslerReiss(_) | StdfSpec::ExtremalT(_) => {
                if self.dimension() > MAX_DIMENSION + 1 {
                    return Err(Error::capability(format!(
                        "Hüsler–Reiss and extremal-t stdfs are supported up to dimension {}",
                        MAX_DIMENSION + 1
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            StdfSpec::Max { dimension }
            | StdfSpec::Sum { dimension }
            | StdfSpec::Gumbel { dimension, .. }
            | StdfSpec::NegativeLogistic { dimension, .. } => *dimension,
            StdfSpec::NestedGumbel(n) => n.tree.dimension(),
            StdfSpec::HuslerReiss(h) => h.gamma.nrows(),
            StdfSpec::ExtremalT(e) => e.corr.nrows(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StdfSpec::Max { .. } => "max",
            StdfSpec::Sum { .. } => "sum",
            StdfSpec::Gumbel { .. } => "gumbel",
            StdfSpec::NestedGumbel(_) => "nested_gumbel",
            StdfSpec::NegativeLogistic { .. } => "negative_logistic",
            StdfSpec::HuslerReiss(_) => "husler_reiss",
            StdfSpec::ExtremalT(_) => "extremal_t",
        }
    }

    /// True when all block derivatives are closed-form.
    pub fn has_analytic_partials(&self) -> bool {
        matches!(
            self,
            StdfSpec::Sum { .. } | StdfSpec::Gumbel { .. } | StdfSpec::NegativeLogistic { .. }
        )
    }

    /// True for variants whose mixed derivatives come from finite differences
    /// of distribution-function routines; densities built on them are accurate
    /// to roughly 1e-2 relative.
    pub fn uses_numerical_partials(&self) -> bool {
        matches!(self, StdfSpec::HuslerReiss(_) | StdfSpec::ExtremalT(_))
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::domain(format!(
                "stdf of dimension {} evaluated at a point of dimension {}",
                self.dimension(),
                x.len()
            )));
        }
        if x.iter().any(|v| !(*v >= 0.0) || v.is_infinite()) {
            return Err(Error::domain("stdf arguments must be finite and non-negative"));
        }
        Ok(())
    }

    /// ℓ(x) for finite x ≥ 0. Zero coordinates are dropped.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let active: Vec<usize> = (0..x.len()).filter(|&j| x[j] > 0.0).collect();
        if active.is_empty() {
            return Ok(0.0);
        }
        if active.len() == 1 {
            return Ok(x[active[0]]);
        }
        let xa: Vec<f64> = active.iter().map(|&j| x[j]).collect();
        Ok(match self {
            StdfSpec::Max { .. } => xa.iter().copied().fold(0.0, f64::max),
            StdfSpec::Sum { .. } => xa.iter().sum(),
            StdfSpec::Gumbel { alpha, .. } => gumbel_value(&xa, *alpha),
            StdfSpec::NestedGumbel(n) => n.value(n.tree.root(), x),
            StdfSpec::NegativeLogistic { theta, .. } => negative_logistic_value(&xa, *theta),
            StdfSpec::HuslerReiss(h) => {
                let mut s = 0.0;
                for &j in &active {
                    s += x[j] * h.term(&active, j, x)?;
                }
                s
            }
            StdfSpec::ExtremalT(e) => {
                let mut s = 0.0;
                for &j in &active {
                    s += x[j] * e.term(&active, j, x)?;
                }
                s
            }
        })
    }

    fn check_block(&self, b: &[usize], x: &[f64]) -> Result<Vec<usize>> {
        if x.len() != self.dimension() {
            return Err(Error::domain(format!(
                "stdf of dimension {} differentiated at a point of dimension {}",
                self.dimension(),
                x.len()
            )));
        }
        if b.is_empty() {
            return Err(Error::domain("derivative block must be non-empty"));
        }
        let mut block = b.to_vec();
        block.sort_unstable();
        block.dedup();
        if block.len() != b.len() {
            return Err(Error::domain("derivative block has repeated coordinates"));
        }
        if let Some(&j) = block.iter().find(|&&j| j >= self.dimension()) {
            return Err(Error::Index { index: j, dimension: self.dimension() });
        }
        if x.iter().any(|v| !(*v > 0.0) || v.is_infinite()) {
            return Err(Error::domain("partial derivatives need finite, strictly positive arguments"));
        }
        Ok(block)
    }

    /// Mixed partial derivative `D_B ℓ(x)` over the coordinates in `b`
    /// (zero-based, distinct). Its sign is `(-1)^{|B|-1}` or it is zero.
    pub fn partial(&self, b: &[usize], x: &[f64]) -> Result<f64> {
        let block = self.check_block(b, x)?;
        let m = block.len();
        let scale = x.iter().copied().fold(0.0, f64::max);
        let xs: Vec<f64> = x.iter().map(|v| v / scale).collect();
        let v = self.partial_scaled(&block, &xs)?;
        Ok(v * scale.powi(1 - m as i32))
    }

    /// `log |D_B ℓ(x)|`; `-inf` when the derivative vanishes.
    pub fn log_abs_partial(&self, b: &[usize], x: &[f64]) -> Result<f64> {
        Ok(self.signed_log_partial(b, x)?.1)
    }

    /// `(sign, log |D_B ℓ(x)|)` with sign in {-1, 0, 1}; computed without
    /// leaving log space where the variant allows it.
    pub fn signed_log_partial(&self, b: &[usize], x: &[f64]) -> Result<(f64, f64)> {
        let block = self.check_block(b, x)?;
        let m = block.len();
        if let StdfSpec::Gumbel { alpha, .. } = self {
            let la = gumbel_log_abs_partial(*alpha, &block, x);
            let sign = if la == f64::NEG_INFINITY { 0.0 } else if m % 2 == 1 { 1.0 } else { -1.0 };
            return Ok((sign, la));
        }
        let scale = x.iter().copied().fold(0.0, f64::max);
        let xs: Vec<f64> = x.iter().map(|v| v / scale).collect();
        let v = self.partial_scaled(&block, &xs)?;
        let sign = if v == 0.0 { 0.0 } else { v.signum() };
        Ok((sign, v.abs().ln() + (1.0 - m as f64) * scale.ln()))
    }

    fn partial_scaled(&self, block: &[usize], x: &[f64]) -> Result<f64> {
        let m = block.len();
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        Ok(match self {
            StdfSpec::Max { .. } => {
                return Err(Error::capability("the max stdf is not differentiable"));
            }
            StdfSpec::Sum { .. } => (m == 1) as u8 as f64,
            StdfSpec::Gumbel { alpha, .. } => sign * gumbel_log_abs_partial(*alpha, block, x).exp(),
            StdfSpec::NegativeLogistic { theta, .. } => negative_logistic_partial(*theta, block, x),
            StdfSpec::NestedGumbel(n) => match m {
                1 => n.gradient(x, block[0]),
                2 => n.hessian(x, block[0], block[1]),
                _ => {
                    let rest = &block[2..];
                    let f = |y: &[f64]| Ok(n.hessian(y, block[0], block[1]));
                    enforce_sign(mixed_difference(&f, x, rest, 1e-16)?, sign)
                }
            },
            StdfSpec::HuslerReiss(h) => {
                let active: Vec<usize> = (0..x.len()).collect();
                let j = block[0];
                let f = |y: &[f64]| h.term(&active, j, y);
                if m == 1 {
                    f(x)?
                } else {
                    enforce_sign(mixed_difference(&f, x, &block[1..], 1e-10)?, sign)
                }
            }
            StdfSpec::ExtremalT(e) => {
                let active: Vec<usize> = (0..x.len()).collect();
                let j = block[0];
                let f = |y: &[f64]| e.term(&active, j, y);
                if m == 1 {
                    f(x)?
                } else {
                    enforce_sign(mixed_difference(&f, x, &block[1..], 1e-10)?, sign)
                }
            }
        })
    }

    /// Bivariate margin `(i, j)` of ℓ as a two-dimensional stdf.
    pub fn pair(&self, i: usize, j: usize) -> Result<StdfSpec> {
        let d = self.dimension();
        for k in [i, j] {
            if k >= d {
                return Err(Error::Index { index: k, dimension: d });
            }
        }
        if i == j {
            return Err(Error::domain("a bivariate margin needs two distinct coordinates"));
        }
        Ok(match self {
            StdfSpec::Max { .. } => StdfSpec::Max { dimension: 2 },
            StdfSpec::Sum { .. } => StdfSpec::Sum { dimension: 2 },
            StdfSpec::Gumbel { alpha, .. } => StdfSpec::Gumbel { dimension: 2, alpha: *alpha },
            StdfSpec::NestedGumbel(n) => StdfSpec::Gumbel { dimension: 2, alpha: n.pair_alpha(i, j)? },
            StdfSpec::NegativeLogistic { theta, .. } => StdfSpec::NegativeLogistic { dimension: 2, theta: *theta },
            StdfSpec::HuslerReiss(h) => {
                let g = h.gamma[(i, j)];
                StdfSpec::HuslerReiss(HuslerReiss::new(DMatrix::from_row_slice(2, 2, &[0.0, g, g, 0.0]))?)
            }
            StdfSpec::ExtremalT(e) => {
                let r = e.corr[(i, j)];
                StdfSpec::ExtremalT(ExtremalT::new(e.nu, DMatrix::from_row_slice(2, 2, &[1.0, r, r, 1.0]))?)
            }
        })
    }
}

fn check_dimension(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::domain("stdf dimension must be at least 1"));
    }
    Ok(())
}

/// `log|D_B ℓ|` for the Gumbel stdf:
/// `D_B ℓ = (α)_{|B|} S^{α-|B|} α^{-|B|} ∏_{j∈B} x_j^{1/α-1}` with
/// `S = Σ_j x_j^{1/α}`. The falling factorial vanishes for α = 1, |B| ≥ 2.
fn gumbel_log_abs_partial(alpha: f64, block: &[usize], x: &[f64]) -> f64 {
    let m = block.len();
    let ff = falling_factorial(alpha, m);
    if ff == 0.0 {
        return f64::NEG_INFINITY;
    }
    let logs: Vec<f64> = x.iter().map(|v| v.ln() / alpha).collect();
    let log_s = log_sum_exp(&logs);
    let sum_log_b: f64 = block.iter().map(|&j| x[j].ln()).sum();
    ff.abs().ln() + (alpha - m as f64) * log_s - m as f64 * alpha.ln() + (1.0 / alpha - 1.0) * sum_log_b
}

fn negative_logistic_value(x: &[f64], theta: f64) -> f64 {
    let d = x.len();
    let p: Vec<f64> = x.iter().map(|v| v.powf(-theta)).collect();
    let mut total = 0.0;
    for mask in 1u32..(1 << d) {
        let t: f64 = (0..d).filter(|&j| mask >> j & 1 == 1).map(|j| p[j]).sum();
        let sign = if mask.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
        total += sign * t.powf(-1.0 / theta);
    }
    total
}

/// `D_B` of the negative logistic: only subsets `J ⊇ B` contribute, each
/// `(-1)^{|J|+1} (-1/θ)_{|B|} T_J^{-1/θ-|B|} ∏_{b∈B} (-θ x_b^{-θ-1})`.
fn negative_logistic_partial(theta: f64, block: &[usize], x: &[f64]) -> f64 {
    let d = x.len();
    let m = block.len();
    let bmask: u32 = block.iter().map(|&j| 1u32 << j).sum();
    let p: Vec<f64> = x.iter().map(|v| v.powf(-theta)).collect();
    let prod: f64 = block.iter().map(|&j| -theta * x[j].powf(-theta - 1.0)).product();
    let coef = falling_factorial(-1.0 / theta, m) * prod;
    let mut total = 0.0;
    for mask in 1u32..(1 << d) {
        if mask & bmask != bmask {
            continue;
        }
        let t: f64 = (0..d).filter(|&j| mask >> j & 1 == 1).map(|j| p[j]).sum();
        let sign = if mask.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
        total += sign * t.powf(-1.0 / theta - m as f64);
    }
    coef * total
}

/// Mixed central difference of `f` over the coordinates `dirs` with one
/// Richardson step. `noise` is the absolute accuracy of `f`; the step is
/// chosen to balance it against the O(h⁴) truncation error.
fn mixed_difference<F>(f: &F, x: &[f64], dirs: &[usize], noise: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let m = dirs.len() as i32;
    let rel = noise.max(1e-16).powf(1.0 / (m as f64 + 4.0));
    let central = |hfac: f64| -> Result<f64> {
        let mut total = 0.0;
        let mut y = x.to_vec();
        for signs in 0u32..(1 << m) {
            let mut sgn = 1.0;
            for (k, &j) in dirs.iter().enumerate() {
                let s = if signs >> k & 1 == 1 { 1.0 } else { -1.0 };
                sgn *= s;
                y[j] = x[j] * (1.0 + s * rel * hfac);
            }
            total += sgn * f(&y)?;
        }
        let denom: f64 = dirs.iter().map(|&j| 2.0 * x[j] * rel * hfac).product();
        Ok(total / denom)
    };
    let coarse = central(1.0)?;
    let fine = central(0.5)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Finite-difference results with the wrong sign are rounding noise around
/// a vanishing derivative; they are reported as zero.
fn enforce_sign(v: f64, sign: f64) -> f64 {
    if v * sign < 0.0 {
        0.0
    } else {
        v
    }
}

/// Free-function form of [`StdfSpec::eval`].
pub fn eval_stdf(spec: &StdfSpec, x: &[f64]) -> Result<f64> {
    spec.eval(x)
}

/// Free-function form of [`StdfSpec::partial`].
pub fn partial_stdf(spec: &StdfSpec, b: &[usize], x: &[f64]) -> Result<f64> {
    spec.partial(b, x)
}

/// Free-function form of [`StdfSpec::log_abs_partial`].
pub fn log_abs_partial_stdf(spec: &StdfSpec, b: &[usize], x: &[f64]) -> Result<f64> {
    spec.log_abs_partial(b, x)
}
