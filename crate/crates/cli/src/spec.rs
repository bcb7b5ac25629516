//! Model spec files: a JSON document with optional `generator`,
//! `frailty_tree`, `evc`, `stdf`, `dimension` and `seed` blocks.
//!
//! The `evc` block drives sampling and the `stdf` block drives evaluation;
//! each is derived from the other when missing and derivable.

use std::path::Path;

use haxc::archimax::CopulaModel;
use haxc::dnorm::{DNormGeneratorSpec, HierGaussian};
use haxc::evc::{EvcModel, Truncation};
use haxc::frailty::FrailtyTree;
use haxc::hierarchy::{HierarchyTree, NodeRecord, Params};
use haxc::stdf::{NestedGumbel, StdfSpec};
use haxc::GeneratorSpec;
use serde::Deserialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpecFile {
    /// Free text for readers of the file.
    #[serde(default)]
    #[allow(dead_code)]
    pub description: Option<String>,
    #[serde(default)]
    pub dimension: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub generator: Option<GeneratorBlock>,
    #[serde(default)]
    pub frailty_tree: Option<HierarchyTree>,
    #[serde(default)]
    pub evc: Option<EvcBlock>,
    #[serde(default)]
    pub stdf: Option<StdfBlock>,
    /// Checks to run instead of the level defaults.
    #[serde(default)]
    pub checks: Option<Vec<CheckName>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Margins,
    Tau,
    Blocks,
    Cdf,
    Pairs,
    Density,
}

impl CheckName {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Margins => "margins",
            CheckName::Tau => "tau",
            CheckName::Blocks => "blocks",
            CheckName::Cdf => "cdf",
            CheckName::Pairs => "pairs",
            CheckName::Density => "density",
        }
    }
}

/// `family` is `clayton`, `gumbel` or `indep_exp`; Clayton takes `theta`,
/// Gumbel takes `alpha`, and either may give Kendall's `tau` instead.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorBlock {
    pub family: String,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationBlock {
    Fixed(usize),
    Exact,
}

impl TruncationBlock {
    fn resolve(t: Option<TruncationBlock>) -> Truncation {
        match t {
            None => Truncation::default(),
            Some(TruncationBlock::Fixed(n)) => Truncation::Fixed(n),
            Some(TruncationBlock::Exact) => Truncation::ExactStopping(None),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvcBlock {
    Independence {
        #[serde(default)]
        dimension: Option<usize>,
    },
    Comonotone {
        #[serde(default)]
        dimension: Option<usize>,
    },
    Gumbel {
        #[serde(default)]
        dimension: Option<usize>,
        #[serde(default)]
        alpha: Option<f64>,
        #[serde(default)]
        tau: Option<f64>,
    },
    NestedGumbel {
        tree: HierarchyTree,
    },
    NegativeLogistic {
        #[serde(default)]
        dimension: Option<usize>,
        theta: f64,
        #[serde(default)]
        truncation: Option<TruncationBlock>,
    },
    Schlather {
        correlation: Vec<Vec<f64>>,
        #[serde(default)]
        truncation: Option<TruncationBlock>,
    },
    ExtremalT {
        nu: f64,
        correlation: Vec<Vec<f64>>,
        #[serde(default)]
        truncation: Option<TruncationBlock>,
    },
    BrownResnick {
        covariance: Vec<Vec<f64>>,
        #[serde(default)]
        truncation: Option<TruncationBlock>,
    },
    HierHuslerReiss {
        root: Vec<Vec<f64>>,
        sectors: Vec<Vec<Vec<f64>>>,
        #[serde(default)]
        truncation: Option<TruncationBlock>,
    },
    HierExtremalT {
        nu: f64,
        root: Vec<Vec<f64>>,
        sectors: Vec<Vec<Vec<f64>>>,
        #[serde(default)]
        truncation: Option<TruncationBlock>,
    },
    /// Independent blocks on consecutive coordinates.
    Product {
        blocks: Vec<EvcBlock>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum StdfBlock {
    Sum {
        #[serde(default)]
        dimension: Option<usize>,
    },
    Max {
        #[serde(default)]
        dimension: Option<usize>,
    },
    Gumbel {
        #[serde(default)]
        dimension: Option<usize>,
        #[serde(default)]
        alpha: Option<f64>,
        #[serde(default)]
        tau: Option<f64>,
    },
    NestedGumbel {
        tree: HierarchyTree,
    },
    NegativeLogistic {
        #[serde(default)]
        dimension: Option<usize>,
        theta: f64,
    },
    HuslerReiss {
        semivariogram: Vec<Vec<f64>>,
    },
    ExtremalT {
        nu: f64,
        correlation: Vec<Vec<f64>>,
    },
}

/// Reads and parses a spec file, reporting line, column and field path on
/// failure.
pub fn load(path: &Path) -> CliResult<ModelSpecFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
    parse(&text, path)
}

pub fn parse(text: &str, path: &Path) -> CliResult<ModelSpecFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        // serde_json appends " at line L column C"; the location is reported separately
        let message = inner.to_string();
        let message = match message.rfind(" at line ") {
            Some(i) => message[..i].to_owned(),
            None => message,
        };
        CliError::Parse {
            path: path.to_owned(),
            line: inner.line(),
            column: inner.column(),
            field,
            message,
        }
    })
}

fn block_err(block: &str) -> impl Fn(haxc::Error) -> CliError + '_ {
    move |e| CliError::block(block, e)
}

fn config(block: &str, msg: impl Into<String>) -> CliError {
    CliError::block(block, haxc::Error::Config(msg.into()))
}

fn clayton_theta_from_tau(tau: f64) -> f64 {
    2.0 * tau / (1.0 - tau)
}

impl GeneratorBlock {
    pub fn build(&self) -> CliResult<GeneratorSpec> {
        let b = "generator";
        match (self.family.as_str(), self.theta, self.alpha, self.tau) {
            ("clayton", Some(theta), None, None) => GeneratorSpec::clayton(theta),
            ("clayton", None, None, Some(tau)) => GeneratorSpec::clayton_from_tau(tau),
            ("gumbel", None, Some(alpha), None) => GeneratorSpec::gumbel(alpha),
            ("gumbel", None, None, Some(tau)) => GeneratorSpec::gumbel_from_tau(tau),
            ("indep_exp", None, None, None) => Ok(GeneratorSpec::IndependenceExp),
            ("clayton" | "gumbel" | "indep_exp", ..) => {
                return Err(config(
                    b,
                    format!(
                        "family '{}' takes exactly one of {}",
                        self.family,
                        match self.family.as_str() {
                            "clayton" => "'theta' or 'tau'",
                            "gumbel" => "'alpha' or 'tau'",
                            _ => "no parameters",
                        }
                    ),
                ))
            }
            (other, ..) => return Err(config(b, format!("unknown family '{other}' (clayton, gumbel, indep_exp)"))),
        }
        .map_err(block_err(b))
    }
}

/// Replaces `tau` node parameters by the generator parameter they imply:
/// `alpha = 1 - tau` for Gumbel nodes, `theta = 2 tau / (1 - tau)` for
/// Clayton nodes. `default_family` applies when a node names none.
fn resolve_tree_taus(tree: &HierarchyTree, default_family: Option<&str>, block: &str) -> CliResult<HierarchyTree> {
    let mut nodes: Vec<NodeRecord> = tree.nodes().to_vec();
    for node in &mut nodes {
        let Some(tau) = node.params.get("tau").and_then(Value::as_f64) else { continue };
        if !(0.0..1.0).contains(&tau) {
            return Err(config(block, format!("node '{}': tau must lie in [0,1), got {tau}", node.id)));
        }
        let family = node
            .params
            .get("family")
            .and_then(Value::as_str)
            .or(default_family)
            .ok_or_else(|| config(block, format!("node '{}' gives tau without a family", node.id)))?
            .to_owned();
        let mut params: Params = node.params.clone();
        params.remove("tau");
        let (key, value) = match family.as_str() {
            "gumbel" => ("alpha", 1.0 - tau),
            "clayton" if tau > 0.0 => ("theta", clayton_theta_from_tau(tau)),
            _ => return Err(config(block, format!("node '{}': tau is not available for family '{family}'", node.id))),
        };
        if params.insert(key.to_owned(), Value::from(value)).is_some() {
            return Err(config(block, format!("node '{}' gives both tau and {key}", node.id)));
        }
        node.params = params;
    }
    HierarchyTree::new(nodes, tree.leaf_order().to_vec()).map_err(block_err(block))
}

fn gumbel_alpha(alpha: Option<f64>, tau: Option<f64>, block: &str) -> CliResult<f64> {
    match (alpha, tau) {
        (Some(a), None) => Ok(a),
        (None, Some(t)) => Ok(1.0 - t),
        _ => Err(config(block, "gumbel takes exactly one of 'alpha' or 'tau'")),
    }
}

fn dim_or(d: Option<usize>, fallback: Option<usize>, block: &str) -> CliResult<usize> {
    d.or(fallback)
        .ok_or_else(|| config(block, "dimension is missing; give it in the block or at the top level"))
}

impl EvcBlock {
    pub fn build(&self, dimension: Option<usize>) -> CliResult<EvcModel> {
        let b = "evc";
        let e = block_err(b);
        let spectral = |g: haxc::Result<DNormGeneratorSpec>, t: Option<TruncationBlock>| -> CliResult<EvcModel> {
            EvcModel::spectral(g.map_err(block_err(b))?, TruncationBlock::resolve(t)).map_err(block_err(b))
        };
        match self {
            EvcBlock::Independence { dimension: d } => EvcModel::independence(dim_or(*d, dimension, b)?).map_err(e),
            EvcBlock::Comonotone { dimension: d } => spectral(
                DNormGeneratorSpec::comonotone(dim_or(*d, dimension, b)?),
                Some(TruncationBlock::Exact),
            ),
            EvcBlock::Gumbel { dimension: d, alpha, tau } => {
                EvcModel::gumbel(dim_or(*d, dimension, b)?, gumbel_alpha(*alpha, *tau, b)?).map_err(e)
            }
            EvcBlock::NestedGumbel { tree } => {
                let tree = resolve_tree_taus(tree, Some("gumbel"), b)?;
                EvcModel::nested_gumbel(NestedGumbel::new(tree).map_err(&e)?).map_err(e)
            }
            EvcBlock::NegativeLogistic { dimension: d, theta, truncation } => spectral(
                DNormGeneratorSpec::negative_logistic_weibull(dim_or(*d, dimension, b)?, *theta),
                *truncation,
            ),
            EvcBlock::Schlather { correlation, truncation } => {
                spectral(DNormGeneratorSpec::schlather(correlation), *truncation)
            }
            EvcBlock::ExtremalT { nu, correlation, truncation } => {
                spectral(DNormGeneratorSpec::extremal_t(*nu, correlation), *truncation)
            }
            EvcBlock::BrownResnick { covariance, truncation } => {
                spectral(DNormGeneratorSpec::brown_resnick(covariance), *truncation)
            }
            EvcBlock::HierHuslerReiss { root, sectors, truncation } => spectral(
                HierGaussian::from_rows(root, sectors).map(DNormGeneratorSpec::hier_husler_reiss),
                *truncation,
            ),
            EvcBlock::HierExtremalT { nu, root, sectors, truncation } => spectral(
                HierGaussian::from_rows(root, sectors).and_then(|h| DNormGeneratorSpec::hier_extremal_t(*nu, h)),
                *truncation,
            ),
            EvcBlock::Product { blocks } => {
                let blocks = blocks.iter().map(|blk| blk.build(None)).collect::<CliResult<Vec<_>>>()?;
                EvcModel::product(blocks).map_err(e)
            }
        }
    }
}

impl StdfBlock {
    pub fn build(&self, dimension: Option<usize>) -> CliResult<StdfSpec> {
        let b = "stdf";
        let e = block_err(b);
        match self {
            StdfBlock::Sum { dimension: d } => StdfSpec::sum(dim_or(*d, dimension, b)?),
            StdfBlock::Max { dimension: d } => StdfSpec::max(dim_or(*d, dimension, b)?),
            StdfBlock::Gumbel { dimension: d, alpha, tau } => {
                StdfSpec::gumbel(dim_or(*d, dimension, b)?, gumbel_alpha(*alpha, *tau, b)?)
            }
            StdfBlock::NestedGumbel { tree } => StdfSpec::nested_gumbel(resolve_tree_taus(tree, Some("gumbel"), b)?),
            StdfBlock::NegativeLogistic { dimension: d, theta } => {
                StdfSpec::negative_logistic(dim_or(*d, dimension, b)?, *theta)
            }
            StdfBlock::HuslerReiss { semivariogram } => StdfSpec::husler_reiss(semivariogram),
            StdfBlock::ExtremalT { nu, correlation } => StdfSpec::extremal_t(*nu, correlation),
        }
        .map_err(e)
    }
}

/// An EVC sampler with the given stdf, where one is known.
fn evc_from_stdf(stdf: &StdfSpec) -> CliResult<EvcModel> {
    let b = "stdf";
    let e = block_err(b);
    let d = stdf.dimension();
    match stdf {
        StdfSpec::Sum { .. } => EvcModel::independence(d),
        StdfSpec::Max { .. } => EvcModel::spectral(DNormGeneratorSpec::comonotone(d).map_err(&e)?, Truncation::ExactStopping(None)),
        StdfSpec::Gumbel { alpha, .. } => EvcModel::gumbel(d, *alpha),
        StdfSpec::NestedGumbel(n) => EvcModel::nested_gumbel(n.clone()),
        StdfSpec::NegativeLogistic { theta, .. } => EvcModel::spectral(
            DNormGeneratorSpec::negative_logistic_weibull(d, *theta).map_err(&e)?,
            Truncation::default(),
        ),
        StdfSpec::HuslerReiss(hr) => {
            let cov = hr.anchored_covariance();
            let rows: Vec<Vec<f64>> = cov.row_iter().map(|r| r.iter().copied().collect()).collect();
            EvcModel::spectral(DNormGeneratorSpec::brown_resnick(&rows).map_err(&e)?, Truncation::default())
        }
        StdfSpec::ExtremalT(et) => {
            let corr = et.correlation();
            let rows: Vec<Vec<f64>> = corr.row_iter().map(|r| r.iter().copied().collect()).collect();
            EvcModel::spectral(DNormGeneratorSpec::extremal_t(et.nu(), &rows).map_err(&e)?, Truncation::default())
        }
    }
    .map_err(e)
}

/// A spec with every block built and dimensions reconciled.
#[derive(Debug, Clone)]
pub struct ResolvedSpec {
    pub dimension: usize,
    pub seed: Option<u64>,
    pub generator: Option<GeneratorSpec>,
    pub frailties: Option<FrailtyTree>,
    pub evc: Option<EvcModel>,
    /// Built from the `stdf` block, or derived from `evc`.
    pub stdf: Option<StdfSpec>,
    pub checks: Option<Vec<CheckName>>,
}

impl ModelSpecFile {
    pub fn resolve(&self) -> CliResult<ResolvedSpec> {
        if self.generator.is_some() && self.frailty_tree.is_some() {
            return Err(CliError::Spec(
                "blocks 'generator' and 'frailty_tree' are exclusive: give a single generator or a tree".into(),
            ));
        }
        let generator = self.generator.as_ref().map(GeneratorBlock::build).transpose()?;
        let frailties = self
            .frailty_tree
            .as_ref()
            .map(|t| {
                let t = resolve_tree_taus(t, None, "frailty_tree")?;
                FrailtyTree::new(t).map_err(block_err("frailty_tree"))
            })
            .transpose()?;
        let hint = self.dimension.or(frailties.as_ref().map(FrailtyTree::dimension));
        let evc = self.evc.as_ref().map(|b| b.build(hint)).transpose()?;
        let hint = hint.or(evc.as_ref().map(EvcModel::dimension));
        let stdf = self.stdf.as_ref().map(|b| b.build(hint)).transpose()?;

        let mut dims: Vec<(&str, usize)> = Vec::new();
        if let Some(d) = self.dimension {
            dims.push(("dimension", d));
        }
        if let Some(f) = &frailties {
            dims.push(("frailty_tree", f.dimension()));
        }
        if let Some(e) = &evc {
            dims.push(("evc", e.dimension()));
        }
        if let Some(s) = &stdf {
            dims.push(("stdf", s.dimension()));
        }
        let Some(&(first, d)) = dims.first() else {
            return Err(CliError::Spec(
                "no dimension: give 'dimension' or one of the blocks 'frailty_tree', 'evc', 'stdf'".into(),
            ));
        };
        if let Some(&(other, d2)) = dims.iter().find(|(_, x)| *x != d) {
            return Err(CliError::Spec(format!(
                "dimension mismatch: block '{first}' has dimension {d} but block '{other}' has dimension {d2}"
            )));
        }
        let stdf = match (stdf, &evc) {
            (Some(s), _) => Some(s),
            (None, Some(e)) => e.stdf().ok(),
            (None, None) => None,
        };
        Ok(ResolvedSpec {
            dimension: d,
            seed: self.seed,
            generator,
            frailties,
            evc,
            stdf,
            checks: self.checks.clone(),
        })
    }
}

impl ResolvedSpec {
    /// The EVC to sample from: the `evc` block, else derived from `stdf`,
    /// else independence.
    fn sampling_evc(&self) -> CliResult<EvcModel> {
        match (&self.evc, &self.stdf) {
            (Some(e), _) => Ok(e.clone()),
            (None, Some(s)) => evc_from_stdf(s),
            (None, None) => EvcModel::independence(self.dimension).map_err(block_err("dimension")),
        }
    }

    /// The copula described by the spec.
    pub fn model(&self) -> CliResult<CopulaModel> {
        let evc = self.sampling_evc()?;
        let b = if self.evc.is_some() { "evc" } else { "stdf" };
        if let Some(f) = &self.frailties {
            let model = if matches!(evc, EvcModel::Product(_)) {
                CopulaModel::nested_frailties(f.clone(), evc)
            } else {
                CopulaModel::hierarchical(f.clone(), evc)
            };
            return model.map_err(block_err("frailty_tree"));
        }
        match self.generator {
            None => {
                if self.evc.is_none() && self.stdf.is_none() {
                    return Err(CliError::Spec(
                        "no dependence given: add a 'generator', 'frailty_tree', 'evc' or 'stdf' block".into(),
                    ));
                }
                CopulaModel::extreme_value(evc).map_err(block_err(b))
            }
            Some(psi) => {
                if evc.is_independence() && !matches!(evc, EvcModel::Product(_)) {
                    CopulaModel::archimedean(psi, self.dimension).map_err(block_err("generator"))
                } else if matches!(evc, EvcModel::NestedGumbel { .. }) {
                    CopulaModel::nested_evc(psi, evc).map_err(block_err(b))
                } else {
                    CopulaModel::archimax(psi, evc).map_err(block_err(b))
                }
            }
        }
    }

    /// Generator and stdf for density evaluation; hierarchical frailties
    /// are rejected.
    pub fn density_parts(&self) -> CliResult<(GeneratorSpec, StdfSpec)> {
        if self.frailties.is_some() {
            return Err(CliError::block(
                "frailty_tree",
                haxc::Error::Capability(
                    "densities of copulas with hierarchical frailties (HAXC/NAXC) are out of scope; \
                     only single-frailty Archimax copulas have a density here"
                        .into(),
                ),
            ));
        }
        let psi = self.generator.unwrap_or(GeneratorSpec::IndependenceExp);
        let stdf = match &self.stdf {
            Some(s) => s.clone(),
            None if self.evc.is_none() => StdfSpec::sum(self.dimension).map_err(block_err("dimension"))?,
            None => {
                return Err(CliError::block(
                    "evc",
                    haxc::Error::Capability("the EVC has no closed-form stdf; add an 'stdf' block".into()),
                ))
            }
        };
        Ok((psi, stdf))
    }

    /// The stdf to evaluate.
    pub fn eval_stdf(&self) -> CliResult<StdfSpec> {
        match (&self.stdf, &self.evc) {
            (Some(s), _) => Ok(s.clone()),
            (None, Some(_)) => Err(CliError::block(
                "evc",
                haxc::Error::Capability("the EVC has no closed-form stdf; add an 'stdf' block".into()),
            )),
            (None, None) => Err(CliError::Spec("no 'stdf' or 'evc' block to evaluate".into())),
        }
    }

    /// The d-norm generator behind the EVC, for Monte Carlo stdf estimates.
    pub fn dnorm_generator(&self) -> CliResult<DNormGeneratorSpec> {
        let evc = self.sampling_evc()?;
        let e = block_err("evc");
        match evc {
            EvcModel::Spectral { generator, .. } => Ok(generator),
            EvcModel::Independence { dimension } => DNormGeneratorSpec::independence_permutation(dimension).map_err(e),
            EvcModel::Gumbel { dimension, alpha } if alpha < 1.0 => {
                DNormGeneratorSpec::gumbel_frechet(dimension, alpha).map_err(e)
            }
            EvcModel::Gumbel { dimension, .. } => DNormGeneratorSpec::independence_permutation(dimension).map_err(e),
            EvcModel::NestedGumbel { stdf, .. } => {
                DNormGeneratorSpec::nested_gumbel_tree(stdf.tree().clone()).map_err(e)
            }
            EvcModel::Product(_) => Err(e(haxc::Error::Capability(
                "Monte Carlo stdf estimates are not available for block products".into(),
            ))),
        }
    }
}
