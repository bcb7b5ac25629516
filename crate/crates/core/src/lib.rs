//! Hierarchical Archimax copulas.
//!
//! Building blocks, bottom up:
//!
//! - [`generators`]: Archimedean generators ψ, inverses and log-scale derivatives.
//! - [`frailty`]: positive stable, gamma and nested frailty samplers.
//! - [`hierarchy`]: rooted trees shared by frailty trees, nested generators and nested stdfs.
//! - [`dnorm`]: d-norm generators W and the Monte Carlo stdf estimator.
//! - [`stdf`]: closed-form stable tail dependence functions and their partial derivatives.
//! - [`mvcdf`]: small-dimensional normal and Student t distribution functions.
//! - [`evc`]: extreme-value copula samplers.
//! - [`archimax`]: Archimax, hierarchical and nested Archimax samplers and CDFs.
//! - [`density`]: exact Archimax densities on the log scale.
//! - [`validation`]: Kendall's tau, KS and empirical-CDF checks.

pub mod archimax;
pub mod density;
pub mod dnorm;
pub mod error;
pub mod evc;
pub mod frailty;
pub mod generators;
pub mod hierarchy;
pub mod linalg;
pub mod mvcdf;
pub mod numeric;
pub mod rng;
pub mod stdf;
pub mod validation;

pub use error::{Error, Result};
pub use generators::GeneratorSpec;
pub use hierarchy::HierarchyTree;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/generators.md")]
mod book_generators {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/stdf.md")]
mod book_stdf {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/evc.md")]
mod book_evc {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/archimax.md")]
mod book_archimax {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/density.md")]
mod book_density {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/validation.md")]
mod book_validation {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
