//! Extreme-value copulas: the exact frailty path for (nested) Gumbel models
//! and the spectral construction `Z_j = max_i P_i W_ij` over a Poisson process
//! `{P_i}` with intensity `x^{-2} dx` for generator-defined models.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::dnorm::DNormGeneratorSpec;
use crate::error::{Error, Result};
use crate::frailty::{positive_stable, FrailtyTree};
use crate::generators::GeneratorSpec;
use crate::rng::{par_rows, StreamRng};
use crate::stdf::{NestedGumbel, StdfSpec};

/// Default number of Poisson points for generators without a bound.
pub const DEFAULT_TRUNCATION: usize = 1000;

/// How the supremum over Poisson points is cut off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// The first `N` points; approximate.
    Fixed(usize),
    /// Stop once `P_{i+1} b < min_j Z_j`, which no later point can change;
    /// exact. `None` takes the generator's own bound.
    ExactStopping(Option<f64>),
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Fixed(DEFAULT_TRUNCATION)
    }
}

/// An extreme-value copula model that can be sampled.
#[derive(Debug, Clone)]
pub enum EvcModel {
    /// Independence copula.
    Independence { dimension: usize },
    /// Gumbel copula via `U_j = exp(-(E_j/V)^α)`, `V ~ PS(α)`.
    Gumbel { dimension: usize, alpha: f64 },
    /// Nested Gumbel copula via hierarchical positive stable frailties.
    NestedGumbel { stdf: NestedGumbel, frailties: FrailtyTree },
    /// Spectral construction from a d-norm generator.
    Spectral { generator: DNormGeneratorSpec, truncation: Truncation },
    /// Independent blocks on consecutive coordinates; the copula is the
    /// product of the block copulas.
    Product(Vec<EvcModel>),
}

impl EvcModel {
    pub fn independence(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::domain("copula dimension must be at least 1"));
        }
        Ok(EvcModel::Independence { dimension })
    }

    pub fn product(blocks: Vec<EvcModel>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::domain("a product copula needs at least one block"));
        }
        Ok(EvcModel::Product(blocks))
    }

    pub fn gumbel(dimension: usize, alpha: f64) -> Result<Self> {
        StdfSpec::gumbel(dimension, alpha)?;
        Ok(EvcModel::Gumbel { dimension, alpha })
    }

    pub fn nested_gumbel(stdf: NestedGumbel) -> Result<Self> {
        let frailties = FrailtyTree::new(stdf.tree().clone())?;
        Ok(EvcModel::NestedGumbel { stdf, frailties })
    }

    /// Spectral model; resolves and checks the stopping bound.
    pub fn spectral(generator: DNormGeneratorSpec, truncation: Truncation) -> Result<Self> {
        generator.validate()?;
        let truncation = match truncation {
            Truncation::Fixed(0) => return Err(Error::config("truncation N must be at least 1")),
            Truncation::Fixed(n) => Truncation::Fixed(n),
            Truncation::ExactStopping(declared) => {
                let known = generator.sup_bound();
                let b = match (declared, known) {
                    (_, None) => {
                        return Err(Error::config(format!(
                            "exact stopping needs a bounded generator; '{}' is unbounded",
                            generator.name()
                        )))
                    }
                    (None, Some(k)) => k,
                    (Some(b), Some(k)) if b >= k && b.is_finite() => b,
                    (Some(b), Some(k)) => {
                        return Err(Error::config(format!(
                            "declared bound {b} is below the sup-norm bound {k} of '{}'",
                            generator.name()
                        )))
                    }
                };
                Truncation::ExactStopping(Some(b))
            }
        };
        Ok(EvcModel::Spectral { generator, truncation })
    }

    pub fn dimension(&self) -> usize {
        match self {
            EvcModel::Independence { dimension } | EvcModel::Gumbel { dimension, .. } => *dimension,
            EvcModel::Product(blocks) => blocks.iter().map(EvcModel::dimension).sum(),
            EvcModel::NestedGumbel { stdf, .. } => stdf.tree().dimension(),
            EvcModel::Spectral { generator, .. } => generator.dimension(),
        }
    }

    /// Stable tail dependence function of the model, when closed-form.
    pub fn stdf(&self) -> Result<StdfSpec> {
        match self {
            EvcModel::Independence { dimension } => StdfSpec::sum(*dimension),
            EvcModel::Product(_) => Err(Error::capability(
                "the stdf of a block product is the sum of the block stdfs; evaluate blocks separately",
            )),
            EvcModel::Gumbel { dimension, alpha } => StdfSpec::gumbel(*dimension, *alpha),
            EvcModel::NestedGumbel { stdf, .. } => Ok(StdfSpec::NestedGumbel(stdf.clone())),
            EvcModel::Spectral { generator, .. } => generator.stdf(),
        }
    }

    /// True for the independence copula and products of independence blocks.
    pub fn is_independence(&self) -> bool {
        match self {
            EvcModel::Independence { .. } => true,
            EvcModel::Gumbel { alpha, .. } => *alpha == 1.0,
            EvcModel::Product(blocks) => blocks.iter().all(EvcModel::is_independence),
            _ => false,
        }
    }

    /// One draw of `E = -ln Y` for `Y` from the copula; each `E_j ~ Exp(1)`.
    pub fn sample_exponent_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            EvcModel::Independence { .. } => {
                for o in out.iter_mut() {
                    *o = Exp1.sample(rng);
                }
            }
            EvcModel::Gumbel { alpha, .. } => {
                let v = positive_stable(*alpha, rng);
                for o in out.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    *o = (e / v).powf(*alpha);
                }
            }
            EvcModel::NestedGumbel { frailties, .. } => {
                frailties.sample_into(rng, out);
                for (j, o) in out.iter_mut().enumerate() {
                    let e: f64 = Exp1.sample(rng);
                    let GeneratorSpec::Gumbel { alpha } = frailties.leaf_generator(j) else {
                        unreachable!("nested Gumbel frailties are Gumbel")
                    };
                    *o = (e / *o).powf(alpha);
                }
            }
            EvcModel::Spectral { generator, truncation } => {
                spectral_into(generator, *truncation, rng, out);
                out.iter_mut().for_each(|z| *z = 1.0 / *z);
            }
            EvcModel::Product(blocks) => {
                let mut offset = 0;
                for b in blocks {
                    let d = b.dimension();
                    b.sample_exponent_into(rng, &mut out[offset..offset + d]);
                    offset += d;
                }
            }
        }
    }

    /// One copula draw into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        self.sample_exponent_into(rng, out);
        out.iter_mut().for_each(|e| *e = (-*e).exp());
    }
}

fn spectral_into<R: Rng + ?Sized>(generator: &DNormGeneratorSpec, truncation: Truncation, rng: &mut R, z: &mut [f64]) {
    let mut w = vec![0.0; z.len()];
    z.fill(0.0);
    let mut arrival: f64 = Exp1.sample(rng);
    let mut i = 1usize;
    loop {
        let p = 1.0 / arrival;
        generator.sample_into(rng, &mut w);
        for (zj, wj) in z.iter_mut().zip(&w) {
            *zj = zj.max(p * wj);
        }
        let e: f64 = Exp1.sample(rng);
        arrival += e;
        match truncation {
            Truncation::Fixed(n) if i >= n => break,
            Truncation::Fixed(_) => {}
            Truncation::ExactStopping(b) => {
                let b = b.expect("bound resolved at construction");
                let min_z = z.iter().copied().fold(f64::INFINITY, f64::min);
                if b / arrival < min_z {
                    break;
                }
            }
        }
        i += 1;
    }
}

/// One draw of the max-stable vector `Z` with unit Fréchet margins.
pub fn sample_maxstable<R: Rng + ?Sized>(model: &EvcModel, rng: &mut R) -> Result<Vec<f64>> {
    let EvcModel::Spectral { generator, truncation } = model else {
        return Err(Error::capability("sample_maxstable needs a spectral model"));
    };
    let mut z = vec![0.0; generator.dimension()];
    spectral_into(generator, *truncation, rng, &mut z);
    Ok(z)
}

/// `n` rows from the copula, drawn sequentially from `rng`.
pub fn sample_evc<R: Rng + ?Sized>(model: &EvcModel, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let mut row = vec![0.0; model.dimension()];
            model.sample_into(rng, &mut row);
            row
        })
        .collect()
}

/// `n` rows from the copula, row `i` drawn from its own stream of `seed`.
pub fn sample_evc_seeded(model: &EvcModel, n: usize, seed: u64) -> Vec<Vec<f64>> {
    par_rows(n, model.dimension(), seed, |rng: &mut StreamRng, row| model.sample_into(rng, row))
}

/// `C(u) = exp(-ℓ(-ln u_1, …, -ln u_d))` for `u ∈ (0,1]^d`.
pub fn evc_cdf(spec: &StdfSpec, u: &[f64]) -> Result<f64> {
    if u.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
        return Err(Error::domain("copula arguments must lie in (0,1]"));
    }
    let x: Vec<f64> = u.iter().map(|&v| -v.ln()).collect();
    Ok((-spec.eval(&x)?).exp())
}
