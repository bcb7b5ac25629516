//! The `check` subcommand: samples a model and compares the sample with
//! what the model implies.
//!
//! Thresholds: margins use the 1% KS critical value `1.63/√n`; Kendall's tau
//! targets allow ±0.03; distribution functions allow 4 binomial standard
//! errors per point; densities match a mixed finite difference of the CDF
//! within 1e-4 (d = 2), 1e-3 (d = 3) or 1e-2 with numerical stdf partials.

use haxc::archimax::{cdf_axc, CopulaKind, CopulaModel};
use haxc::dnorm::DNormGeneratorSpec;
use haxc::evc::EvcModel;
use haxc::hierarchy::HierarchyTree;
use haxc::stdf::StdfSpec;
use haxc::validation::{empirical_cdf, ks_critical_1pct, ks_uniform, tau_matrix, SampleMatrix};
use haxc::GeneratorSpec;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::spec::{CheckName, ResolvedSpec};

pub const TAU_TOLERANCE: f64 = 0.03;
pub const CDF_SE_MULTIPLE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Quick,
    Full,
}

impl Level {
    pub fn default_n(self) -> usize {
        match self {
            Level::Quick => 10_000,
            Level::Full => 100_000,
        }
    }

    fn default_checks(self) -> &'static [CheckName] {
        match self {
            Level::Quick => &[CheckName::Margins, CheckName::Tau],
            Level::Full => &[
                CheckName::Margins,
                CheckName::Tau,
                CheckName::Blocks,
                CheckName::Cdf,
                CheckName::Pairs,
                CheckName::Density,
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: CheckName,
    pub status: Status,
    /// Worst observed value; compared with `threshold`.
    pub statistic: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub level: Level,
    pub model: String,
    pub dimension: usize,
    pub n: usize,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckRecord>,
}

impl Report {
    pub fn text(&self) -> String {
        let mut s = format!(
            "check level={} model={} d={} n={} seed={}\n",
            match self.level {
                Level::Quick => "quick",
                Level::Full => "full",
            },
            self.model,
            self.dimension,
            self.n,
            self.seed
        );
        for c in &self.checks {
            let status = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skipped => "SKIP",
            };
            let nums = match (c.statistic, c.threshold) {
                (Some(v), Some(t)) => format!(" statistic={v:.6} threshold={t:.6}"),
                _ => String::new(),
            };
            s.push_str(&format!("{status} {}{nums}: {}\n", c.name.as_str(), c.detail));
        }
        s
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| c.status == Status::Fail).count()
    }
}

fn kind_name(model: &CopulaModel) -> &'static str {
    match model.kind() {
        CopulaKind::Haxc if model.evc().is_independence() => "nac",
        CopulaKind::Ac => "ac",
        CopulaKind::Evc => "evc",
        CopulaKind::Axc => "axc",
        CopulaKind::Haxc => "haxc",
        CopulaKind::Naxc => "naxc",
    }
}

fn record(name: CheckName, pass: bool, statistic: f64, threshold: f64, detail: String) -> CheckRecord {
    CheckRecord {
        name,
        status: if pass { Status::Pass } else { Status::Fail },
        statistic: Some(statistic),
        threshold: Some(threshold),
        detail,
    }
}

fn skipped(name: CheckName, why: impl Into<String>) -> CheckRecord {
    CheckRecord { name, status: Status::Skipped, statistic: None, threshold: None, detail: why.into() }
}

pub fn run(spec: &ResolvedSpec, level: Level, n: usize, seed: u64) -> CliResult<Report> {
    if n < 10 {
        return Err(CliError::Input("check needs --n of at least 10".into()));
    }
    let explicit = spec.checks.is_some();
    let checks: Vec<CheckName> = spec.checks.clone().unwrap_or_else(|| level.default_checks().to_vec());
    if explicit && checks.contains(&CheckName::Density) {
        // surface capability errors before any sampling
        spec.density_parts()?;
    }
    let model = spec.model()?;
    let rows = model.sample_seeded(n, seed);
    let sample = SampleMatrix::new(&rows).map_err(|e| CliError::Runtime(format!("sampler output: {e}")))?;
    let columns: Vec<Vec<f64>> = (0..spec.dimension).map(|j| sample.column(j)).collect();
    let needs_tau = checks.iter().any(|c| matches!(c, CheckName::Tau | CheckName::Blocks));
    let tau = if needs_tau && spec.dimension >= 2 {
        Some(tau_matrix(&sample).map_err(|e| CliError::Runtime(format!("Kendall's tau: {e}")))?)
    } else {
        None
    };
    let ctx = Context { spec, model: &model, sample: &sample, columns: &columns, tau: tau.as_ref(), n };
    let mut out = Vec::with_capacity(checks.len());
    for &c in &checks {
        let rec = match c {
            CheckName::Margins => ctx.margins()?,
            CheckName::Tau => ctx.tau_targets(),
            CheckName::Blocks => ctx.blocks(),
            CheckName::Cdf => ctx.cdf()?,
            CheckName::Pairs => ctx.pairs()?,
            CheckName::Density => ctx.density(explicit)?,
        };
        out.push(rec);
    }
    let passed = out.iter().all(|r| r.status != Status::Fail);
    Ok(Report {
        level,
        model: kind_name(&model).into(),
        dimension: spec.dimension,
        n,
        seed,
        passed,
        checks: out,
    })
}

struct Context<'a> {
    spec: &'a ResolvedSpec,
    model: &'a CopulaModel,
    sample: &'a SampleMatrix,
    columns: &'a [Vec<f64>],
    tau: Option<&'a nalgebra::DMatrix<f64>>,
    n: usize,
}

/// Generator at the lowest common ancestor of coordinates `i` and `j`.
fn lca_generator(model: &CopulaModel, i: usize, j: usize) -> Option<GeneratorSpec> {
    let f = model.frailties();
    let t = f.tree();
    let a = t.lowest_common_ancestor(i, j).ok()?;
    f.node_generator(a)
}

/// Label of the root child above each coordinate.
fn sector_labels(tree: &HierarchyTree) -> Vec<usize> {
    (0..tree.dimension())
        .map(|j| {
            let path = tree.path_to_leaf(j).expect("coordinate in range");
            path.get(1).copied().unwrap_or(path[0])
        })
        .collect()
}

fn sizes_to_labels(sizes: &[usize]) -> Vec<usize> {
    sizes.iter().enumerate().flat_map(|(s, &k)| std::iter::repeat_n(s, k)).collect()
}

impl Context<'_> {
    fn margins(&self) -> CliResult<CheckRecord> {
        let crit = ks_critical_1pct(self.n);
        let mut worst = (0.0, 0);
        for (j, col) in self.columns.iter().enumerate() {
            let ks = ks_uniform(col).map_err(|e| CliError::Runtime(format!("KS on column {}: {e}", j + 1)))?;
            if ks > worst.0 {
                worst = (ks, j);
            }
        }
        Ok(record(
            CheckName::Margins,
            worst.0 < crit,
            worst.0,
            crit,
            format!("largest KS distance from uniform on column u{}", worst.1 + 1),
        ))
    }

    /// Kendall's tau implied by the model for pair (i, j), where known.
    fn tau_target(&self, i: usize, j: usize) -> Option<f64> {
        let m = self.model;
        let pair_alpha = |s: &StdfSpec| -> Option<f64> {
            match s {
                StdfSpec::Sum { .. } => Some(1.0),
                StdfSpec::Gumbel { alpha, .. } => Some(*alpha),
                StdfSpec::NestedGumbel(ng) => ng.pair_alpha(i, j).ok(),
                _ => None,
            }
        };
        match m.kind() {
            CopulaKind::Ac => m.generator().map(|g| g.kendall_tau()),
            CopulaKind::Evc | CopulaKind::Axc | CopulaKind::Naxc if m.generator().is_some() => {
                let s = m.stdf()?;
                if let StdfSpec::Max { .. } = s {
                    return Some(1.0);
                }
                let a = pair_alpha(s)?;
                // Gumbel ψ over a Gumbel ℓ is again Gumbel, with α multiplied
                match m.generator()? {
                    GeneratorSpec::IndependenceExp => Some(1.0 - a),
                    GeneratorSpec::Gumbel { alpha } => Some(1.0 - alpha * a),
                    g @ GeneratorSpec::Clayton { .. } if a == 1.0 => Some(g.kendall_tau()),
                    GeneratorSpec::Clayton { .. } => None,
                }
            }
            _ if m.evc().is_independence() && !m.frailties().is_single() => {
                lca_generator(m, i, j).map(|g| g.kendall_tau())
            }
            _ => None,
        }
    }

    fn tau_targets(&self) -> CheckRecord {
        let Some(tau) = self.tau else {
            return skipped(CheckName::Tau, "needs at least two coordinates");
        };
        let d = self.spec.dimension;
        let mut worst: Option<(f64, usize, usize, f64)> = None;
        let mut count = 0;
        for i in 0..d {
            for j in i + 1..d {
                let Some(target) = self.tau_target(i, j) else { continue };
                count += 1;
                let dev = (tau[(i, j)] - target).abs();
                if worst.is_none_or(|w| dev > w.0) {
                    worst = Some((dev, i, j, target));
                }
            }
        }
        match worst {
            None => skipped(CheckName::Tau, "no closed-form Kendall's tau for this model"),
            Some((dev, i, j, target)) => record(
                CheckName::Tau,
                dev < TAU_TOLERANCE,
                dev,
                TAU_TOLERANCE,
                format!(
                    "{count} pairs; largest |tau - target| at (u{}, u{}): {:.4} vs {target:.4}",
                    i + 1,
                    j + 1,
                    tau[(i, j)]
                ),
            ),
        }
    }

    /// Sector labelings of every hierarchy present in the model.
    fn hierarchies(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let f = self.model.frailties();
        if !f.is_single() {
            out.push(sector_labels(f.tree()));
        }
        match self.model.evc() {
            EvcModel::NestedGumbel { stdf, .. } => out.push(sector_labels(stdf.tree())),
            EvcModel::Spectral { generator, .. } => match generator {
                DNormGeneratorSpec::HierHuslerReiss(h) | DNormGeneratorSpec::HierExtremalT { hierarchy: h, .. } => {
                    out.push(sizes_to_labels(&h.sector_sizes()))
                }
                DNormGeneratorSpec::NestedGumbelTree(ng) => out.push(sector_labels(ng.tree())),
                _ => {}
            },
            EvcModel::Product(blocks) => {
                let sizes: Vec<usize> = blocks.iter().map(EvcModel::dimension).collect();
                out.push(sizes_to_labels(&sizes));
            }
            _ => {}
        }
        out
    }

    /// Pairs grouped together by every hierarchy must be more concordant on
    /// average than pairs separated by every hierarchy.
    fn blocks(&self) -> CheckRecord {
        let Some(tau) = self.tau else {
            return skipped(CheckName::Blocks, "needs at least two coordinates");
        };
        let labels = self.hierarchies();
        if labels.is_empty() {
            return skipped(CheckName::Blocks, "the model has no sector structure");
        }
        let d = self.spec.dimension;
        let (mut within, mut between) = (Vec::new(), Vec::new());
        for i in 0..d {
            for j in i + 1..d {
                if labels.iter().all(|l| l[i] == l[j]) {
                    within.push(tau[(i, j)]);
                } else if labels.iter().all(|l| l[i] != l[j]) {
                    between.push(tau[(i, j)]);
                }
            }
        }
        if within.is_empty() || between.is_empty() {
            return skipped(CheckName::Blocks, "no pairs are grouped, or none separated, by all hierarchies");
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (w, b) = (mean(&within), mean(&between));
        record(
            CheckName::Blocks,
            w - b > 0.0,
            w - b,
            0.0,
            format!(
                "mean tau within sectors {w:.4} ({} pairs) minus between sectors {b:.4} ({} pairs)",
                within.len(),
                between.len()
            ),
        )
    }

    fn cdf_points(&self) -> Vec<Vec<f64>> {
        let d = self.spec.dimension;
        let mut pts: Vec<Vec<f64>> = [0.3, 0.5, 0.7].iter().map(|&v| vec![v; d]).collect();
        pts.push((0..d).map(|j| if j % 2 == 0 { 0.3 } else { 0.7 }).collect());
        pts.push((0..d).map(|j| if j % 2 == 0 { 0.8 } else { 0.4 }).collect());
        pts
    }

    fn cdf(&self) -> CliResult<CheckRecord> {
        let mut worst = (0.0, String::new());
        for u in self.cdf_points() {
            let exact = match self.model.cdf(&u) {
                Ok(c) => c,
                Err(haxc::Error::Capability(m)) => return Ok(skipped(CheckName::Cdf, m)),
                Err(e) => return Err(CliError::block("evc", e)),
            };
            let (p, _) = empirical_cdf(self.sample, &u).map_err(|e| CliError::Runtime(e.to_string()))?;
            let se = (exact * (1.0 - exact) / self.n as f64).sqrt().max(f64::MIN_POSITIVE);
            let z = (p - exact).abs() / se;
            if z >= worst.0 {
                worst = (z, format!("worst at {u:?}: empirical {p:.5} vs {exact:.5}"));
            }
        }
        Ok(record(CheckName::Cdf, worst.0 < CDF_SE_MULTIPLE, worst.0, CDF_SE_MULTIPLE, format!("|error| / SE over 5 points; {}", worst.1)))
    }

    /// Closed-form bivariate margin of pair (i, j), where known.
    fn pair_cdf(&self, i: usize, j: usize, ui: f64, uj: f64) -> Option<haxc::Result<f64>> {
        let m = self.model;
        if m.kind() == CopulaKind::Naxc {
            return Some(m.pairwise_margin_cdf(i, j, ui, uj));
        }
        let f = m.frailties();
        let pair = || m.stdf().map(|s| s.pair(i, j));
        if f.is_single() {
            let psi = m.generator()?;
            return Some(pair()?.and_then(|p| cdf_axc(&psi, &p, &[ui, uj])));
        }
        if m.evc().is_independence() {
            let g = lca_generator(m, i, j)?;
            return Some(StdfSpec::sum(2).and_then(|s| cdf_axc(&g, &s, &[ui, uj])));
        }
        // within one frailty sector the pair is Archimax with that sector's generator
        if f.leaf_parent(i) == f.leaf_parent(j) {
            let psi = f.leaf_generator(i);
            return Some(pair()?.and_then(|p| cdf_axc(&psi, &p, &[ui, uj])));
        }
        None
    }

    fn pairs(&self) -> CliResult<CheckRecord> {
        let d = self.spec.dimension;
        if d < 2 {
            return Ok(skipped(CheckName::Pairs, "needs at least two coordinates"));
        }
        let points = [(0.3, 0.3), (0.5, 0.5), (0.3, 0.7)];
        let mut worst = (0.0, String::new());
        let mut count = 0;
        for i in 0..d {
            for j in i + 1..d {
                for &(ui, uj) in &points {
                    let Some(exact) = self.pair_cdf(i, j, ui, uj) else { continue };
                    let exact = exact.map_err(|e| CliError::block("evc", e))?;
                    let hits = self.columns[i].iter().zip(&self.columns[j]).filter(|(a, b)| **a <= ui && **b <= uj).count();
                    let p = hits as f64 / self.n as f64;
                    let se = (exact * (1.0 - exact) / self.n as f64).sqrt().max(f64::MIN_POSITIVE);
                    let z = (p - exact).abs() / se;
                    count += 1;
                    if z >= worst.0 {
                        worst = (z, format!("worst (u{}, u{}) at ({ui}, {uj}): empirical {p:.5} vs {exact:.5}", i + 1, j + 1));
                    }
                }
            }
        }
        if count == 0 {
            return Ok(skipped(CheckName::Pairs, "no closed-form bivariate margins for this model"));
        }
        Ok(record(
            CheckName::Pairs,
            worst.0 < CDF_SE_MULTIPLE,
            worst.0,
            CDF_SE_MULTIPLE,
            format!("|error| / SE over {count} pair points; {}", worst.1),
        ))
    }

    fn density(&self, explicit: bool) -> CliResult<CheckRecord> {
        let (psi, stdf) = match self.spec.density_parts() {
            Ok(parts) => parts,
            Err(e) if explicit => return Err(e),
            Err(e) => return Ok(skipped(CheckName::Density, e.to_string())),
        };
        let d = self.spec.dimension;
        if d > 3 && stdf.uses_numerical_partials() && !explicit {
            // order-d difference quotients of an integral-valued stdf: minutes per point
            return Ok(skipped(
                CheckName::Density,
                "finite-difference stdf partials are only checked for d <= 3; list 'density' in the spec's checks to force it",
            ));
        }
        let u: Vec<f64> = (0..d).map(|j| 0.4 + 0.2 * j as f64 / d as f64).collect();
        let log_c = match haxc::density::axc_log_density(&psi, &stdf, &u) {
            Ok(l) => l,
            Err(e @ haxc::Error::Capability(_)) if !explicit => return Ok(skipped(CheckName::Density, e.to_string())),
            Err(e) => return Err(CliError::block("stdf", e)),
        };
        if d > 3 {
            return Ok(record(
                CheckName::Density,
                log_c.is_finite(),
                log_c,
                f64::INFINITY,
                format!("log-density at {u:?} is finite (difference check needs d <= 3)"),
            ));
        }
        let (h, tol) = match (d, stdf.uses_numerical_partials()) {
            (_, true) => (1e-3, 1e-2),
            (1 | 2, false) => (1e-4, 1e-4),
            _ => (1e-3, 1e-3),
        };
        let cdf = |v: &[f64]| cdf_axc(&psi, &stdf, v);
        let fd = mixed_difference(&cdf, &u, h).map_err(|e| CliError::block("stdf", e))?;
        let c = log_c.exp();
        let rel = (c - fd).abs() / fd.abs();
        Ok(record(
            CheckName::Density,
            rel < tol,
            rel,
            tol,
            format!("density {c:.8} vs mixed difference of the CDF {fd:.8} at {u:?}"),
        ))
    }
}

/// Central mixed difference over all coordinates with one Richardson step.
fn mixed_difference<F>(f: &F, x: &[f64], h: f64) -> haxc::Result<f64>
where
    F: Fn(&[f64]) -> haxc::Result<f64>,
{
    let d = x.len();
    let raw = |h: f64| -> haxc::Result<f64> {
        let mut total = 0.0;
        for signs in 0u32..(1 << d) {
            let mut y = x.to_vec();
            let mut s = 1.0;
            for (b, v) in y.iter_mut().enumerate() {
                if signs >> b & 1 == 1 {
                    *v += h;
                } else {
                    *v -= h;
                    s = -s;
                }
            }
            total += s * f(&y)?;
        }
        Ok(total / (2.0 * h).powi(d as i32))
    };
    Ok((4.0 * raw(h / 2.0)? - raw(h)?) / 3.0)
}
