//! Archimax copulas `C(u) = ψ(ℓ(ψ⁻¹(u)))` and their hierarchical and nested
//! extensions, sampled through `U_j = ψ_j(E_j / V_j)` where `E = -ln Y` for
//! `Y` from an extreme-value copula and `V_j` is the frailty of coordinate j.

use rand::Rng;

use crate::error::{Error, Result};
use crate::evc::EvcModel;
use crate::frailty::FrailtyTree;
use crate::generators::GeneratorSpec;
use crate::rng::{par_rows, StreamRng};
use crate::stdf::StdfSpec;

/// Which construction a [`CopulaModel`] follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CopulaKind {
    /// Archimedean: single frailty, independence EVC.
    Ac,
    /// Extreme-value: no frailty.
    Evc,
    /// Archimax: single frailty, any EVC.
    Axc,
    /// Hierarchical frailties combined with any EVC.
    Haxc,
    /// Nested Archimax: nested EVC with a single frailty, or nested
    /// frailties with independent per-sector EVCs.
    Naxc,
}

/// Per-sector data of a nested-frailty NAXC.
#[derive(Debug, Clone)]
struct NestedSectors {
    root: GeneratorSpec,
    generators: Vec<GeneratorSpec>,
    stdfs: Vec<Option<StdfSpec>>,
    /// First coordinate of each sector; sectors are contiguous.
    offsets: Vec<usize>,
}

impl NestedSectors {
    fn sector_of(&self, j: usize) -> (usize, usize) {
        let s = self.offsets.partition_point(|&o| o <= j) - 1;
        (s, j - self.offsets[s])
    }
}

/// A sampled and (where possible) evaluated copula model.
#[derive(Debug, Clone)]
pub struct CopulaModel {
    kind: CopulaKind,
    frailties: FrailtyTree,
    evc: EvcModel,
    stdf: Option<StdfSpec>,
    sectors: Option<NestedSectors>,
}

impl CopulaModel {
    pub fn archimedean(psi: GeneratorSpec, dimension: usize) -> Result<Self> {
        let evc = EvcModel::independence(dimension)?;
        let mut m = Self::archimax(psi, evc)?;
        m.kind = CopulaKind::Ac;
        Ok(m)
    }

    pub fn extreme_value(evc: EvcModel) -> Result<Self> {
        let mut m = Self::archimax(GeneratorSpec::IndependenceExp, evc)?;
        m.kind = CopulaKind::Evc;
        Ok(m)
    }

    pub fn archimax(psi: GeneratorSpec, evc: EvcModel) -> Result<Self> {
        let frailties = FrailtyTree::single(psi, evc.dimension())?;
        let stdf = evc.stdf().ok();
        Ok(CopulaModel { kind: CopulaKind::Axc, frailties, evc, stdf, sectors: None })
    }

    /// Frailty hierarchy and EVC are independent; their sector structures
    /// need not agree.
    pub fn hierarchical(frailties: FrailtyTree, evc: EvcModel) -> Result<Self> {
        check_dimensions(&frailties, &evc)?;
        let stdf = evc.stdf().ok();
        Ok(CopulaModel { kind: CopulaKind::Haxc, frailties, evc, stdf, sectors: None })
    }

    /// Single frailty over an EVC whose stdf is nested.
    pub fn nested_evc(psi: GeneratorSpec, evc: EvcModel) -> Result<Self> {
        let stdf = evc.stdf()?;
        if !matches!(stdf, StdfSpec::NestedGumbel(_)) {
            return Err(Error::capability(format!(
                "a nested Archimax copula needs a nested EVC; '{}' is not nested",
                stdf.name()
            )));
        }
        let mut m = Self::archimax(psi, evc)?;
        m.kind = CopulaKind::Naxc;
        Ok(m)
    }

    /// Two-level nested frailties with EVC `evc` across all coordinates.
    ///
    /// The nested form `C_0(C_1(u_1), …, C_S(u_S))` is only established when
    /// the EVC is a product of per-sector EVCs; any other EVC is rejected
    /// because the required factorization of conditional expectations is
    /// unverified for it.
    pub fn nested_frailties(frailties: FrailtyTree, evc: EvcModel) -> Result<Self> {
        let sizes = frailties.tree().validate_two_level()?;
        check_dimensions(&frailties, &evc)?;
        let blocks = match evc {
            EvcModel::Product(blocks) => blocks,
            EvcModel::Independence { .. } => sizes
                .iter()
                .map(|&d| EvcModel::independence(d))
                .collect::<Result<_>>()?,
            other => {
                return Err(Error::capability(format!(
                    "nested frailties need independent per-sector EVCs; a dependent cross-sector \
                     EVC ({}-dimensional) does not satisfy the known sufficient condition \
                     for the nested form",
                    other.dimension()
                )))
            }
        };
        let block_sizes: Vec<usize> = blocks.iter().map(EvcModel::dimension).collect();
        if block_sizes != sizes {
            return Err(Error::structure(format!(
                "sector EVC dimensions {block_sizes:?} do not match frailty sectors {sizes:?}"
            )));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut generators = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for &size in &sizes {
            offsets.push(start);
            generators.push(frailties.leaf_generator(start));
            start += size;
        }
        let sectors = NestedSectors {
            root: frailties.root_generator(),
            generators,
            stdfs: blocks.iter().map(|b| b.stdf().ok()).collect(),
            offsets,
        };
        Ok(CopulaModel {
            kind: CopulaKind::Naxc,
            frailties,
            evc: EvcModel::Product(blocks),
            stdf: None,
            sectors: Some(sectors),
        })
    }

    pub fn kind(&self) -> CopulaKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.evc.dimension()
    }

    pub fn frailties(&self) -> &FrailtyTree {
        &self.frailties
    }

    pub fn evc(&self) -> &EvcModel {
        &self.evc
    }

    /// Stable tail dependence function of the EVC, when closed-form.
    pub fn stdf(&self) -> Option<&StdfSpec> {
        self.stdf.as_ref()
    }

    /// Generator of a single-frailty model.
    pub fn generator(&self) -> Option<GeneratorSpec> {
        self.frailties.is_single().then(|| self.frailties.root_generator())
    }

    /// One draw: `E` from the EVC first, then the frailties.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        self.evc.sample_exponent_into(rng, out);
        let v = self.frailties.sample_nodes(rng);
        for (j, o) in out.iter_mut().enumerate() {
            let g = self.frailties.leaf_generator(j);
            *o = g.psi_unchecked(*o / v[self.frailties.leaf_parent(j)]);
        }
    }

    /// `n` rows drawn sequentially from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let mut row = vec![0.0; self.dimension()];
                self.sample_into(rng, &mut row);
                row
            })
            .collect()
    }

    /// `n` rows, row `i` from its own stream of `seed`, computed in parallel.
    pub fn sample_seeded(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        par_rows(n, self.dimension(), seed, |rng: &mut StreamRng, row| self.sample_into(rng, row))
    }

    /// `C(u)` where a closed form is known.
    pub fn cdf(&self, u: &[f64]) -> Result<f64> {
        check_unit_point(u, self.dimension())?;
        if let Some(sec) = &self.sectors {
            let mut inner = 0.0;
            for (s, &g) in sec.generators.iter().enumerate() {
                let end = sec.offsets.get(s + 1).copied().unwrap_or(u.len());
                let stdf = sec.stdfs[s].as_ref().ok_or_else(|| {
                    Error::capability(format!("sector {s} has no closed-form stdf"))
                })?;
                let cs = cdf_axc(&g, stdf, &u[sec.offsets[s]..end])?;
                inner += sec.root.psi_inv(cs)?;
            }
            return sec.root.psi(inner);
        }
        if self.frailties.is_single() {
            let stdf = self.stdf.as_ref().ok_or_else(|| {
                Error::capability("the EVC of this model has no closed-form stdf")
            })?;
            return cdf_axc(&self.frailties.root_generator(), stdf, u);
        }
        if self.evc.is_independence() {
            return Ok(nested_archimedean_cdf(&self.frailties, u, self.frailties.tree().root()));
        }
        Err(Error::capability(
            "no closed-form distribution function for hierarchical frailties over a dependent EVC",
        ))
    }

    /// `log c(u)` for single-frailty models (AC, EVC, AXC and the nested-EVC
    /// NAXC, which is an AXC with a nested stdf). Hierarchical frailties have
    /// no known density.
    pub fn log_density(&self, u: &[f64]) -> Result<f64> {
        let psi = self.generator().ok_or_else(|| {
            Error::capability(format!(
                "no density is available for {:?} models with hierarchical frailties; \
                 densities cover single-frailty Archimax copulas only",
                self.kind
            ))
        })?;
        let stdf = self
            .stdf
            .as_ref()
            .ok_or_else(|| Error::capability("the EVC of this model has no closed-form stdf"))?;
        crate::density::axc_log_density(&psi, stdf, u)
    }

    /// Bivariate margin `C_{ij}(u_i, u_j)` of a nested Archimax copula.
    pub fn pairwise_margin_cdf(&self, i: usize, j: usize, ui: f64, uj: f64) -> Result<f64> {
        if self.kind != CopulaKind::Naxc {
            return Err(Error::capability("pairwise margins are provided for nested Archimax copulas"));
        }
        check_unit_point(&[ui, uj], 2)?;
        let d = self.dimension();
        for k in [i, j] {
            if k >= d {
                return Err(Error::Index { index: k, dimension: d });
            }
        }
        match &self.sectors {
            None => {
                let stdf = self.stdf.as_ref().expect("nested EVC has a stdf");
                cdf_axc(&self.frailties.root_generator(), &stdf.pair(i, j)?, &[ui, uj])
            }
            Some(sec) => {
                let (si, li) = sec.sector_of(i);
                let (sj, lj) = sec.sector_of(j);
                if si == sj {
                    let stdf = sec.stdfs[si].as_ref().ok_or_else(|| {
                        Error::capability(format!("sector {si} has no closed-form stdf"))
                    })?;
                    cdf_axc(&sec.generators[si], &stdf.pair(li, lj)?, &[ui, uj])
                } else {
                    sec.root.psi(sec.root.psi_inv(ui)? + sec.root.psi_inv(uj)?)
                }
            }
        }
    }
}

fn check_dimensions(frailties: &FrailtyTree, evc: &EvcModel) -> Result<()> {
    if frailties.dimension() != evc.dimension() {
        return Err(Error::structure(format!(
            "frailty tree has {} leaves but the EVC has dimension {}",
            frailties.dimension(),
            evc.dimension()
        )));
    }
    Ok(())
}

fn check_unit_point(u: &[f64], d: usize) -> Result<()> {
    if u.len() != d {
        return Err(Error::domain(format!("point of dimension {} for a copula of dimension {d}", u.len())));
    }
    if u.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
        return Err(Error::domain("copula arguments must lie in (0,1]"));
    }
    Ok(())
}

/// `ψ_n(Σ_c ψ_n⁻¹(C_c))` recursively, with `C_c = u_c` at leaves.
fn nested_archimedean_cdf(f: &FrailtyTree, u: &[f64], node: usize) -> f64 {
    let tree = f.tree();
    if let Some(j) = tree.coordinate_of(node) {
        return u[j];
    }
    let g = f.node_generator(node).expect("internal node");
    let t: f64 = tree
        .children(node)
        .iter()
        .map(|&c| g.psi_inv_unchecked(nested_archimedean_cdf(f, u, c)))
        .sum();
    g.psi_unchecked(t)
}

/// `C(u) = ψ(ℓ(ψ⁻¹(u_1), …, ψ⁻¹(u_d)))` for `u ∈ (0,1]^d`.
pub fn cdf_axc(psi: &GeneratorSpec, stdf: &StdfSpec, u: &[f64]) -> Result<f64> {
    check_unit_point(u, stdf.dimension())?;
    let x = u.iter().map(|&v| psi.psi_inv(v)).collect::<Result<Vec<_>>>()?;
    psi.psi(stdf.eval(&x)?)
}

/// `n` rows of `U_j = ψ(E_j / V)` with `E = -ln Y`, `Y` from `evc`.
pub fn sample_axc<R: Rng + ?Sized>(psi: GeneratorSpec, evc: &EvcModel, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    Ok(CopulaModel::archimax(psi, evc.clone())?.sample(n, rng))
}

/// `n` rows of `U_j = ψ_{s(j)}(E_j / V_{s(j)})` with frailties from the tree.
pub fn sample_haxc<R: Rng + ?Sized>(
    frailties: &FrailtyTree,
    evc: &EvcModel,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    Ok(CopulaModel::hierarchical(frailties.clone(), evc.clone())?.sample(n, rng))
}

/// `n` rows from the nested-frailty NAXC with independent sector EVCs.
pub fn sample_naxc_nested_frailties<R: Rng + ?Sized>(
    frailties: &FrailtyTree,
    sector_evcs: Vec<EvcModel>,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let evc = EvcModel::product(sector_evcs)?;
    Ok(CopulaModel::nested_frailties(frailties.clone(), evc)?.sample(n, rng))
}

/// Bivariate margin of a nested Archimax copula.
pub fn pairwise_margin_cdf(model: &CopulaModel, i: usize, j: usize, ui: f64, uj: f64) -> Result<f64> {
    model.pairwise_margin_cdf(i, j, ui, uj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evc::Truncation;
    use crate::dnorm::DNormGeneratorSpec;
    use crate::rng::stream_rng;
    use crate::stdf::NestedGumbel;

    fn clayton(theta: f64) -> GeneratorSpec {
        GeneratorSpec::clayton(theta).unwrap()
    }

    #[test]
    fn cdf_examples() {
        let c = cdf_axc(&clayton(1.0), &StdfSpec::gumbel(2, 0.5).unwrap(), &[0.5, 0.5]).unwrap();
        assert!((c - 1.0 / (1.0 + 2f64.sqrt())).abs() < 1e-15);
        let sum = StdfSpec::sum(3).unwrap();
        let g = clayton(2.0);
        let u = [0.3, 0.6, 0.9];
        let expect = g.psi(u.iter().map(|&v| g.psi_inv(v).unwrap()).sum()).unwrap();
        assert!((cdf_axc(&g, &sum, &u).unwrap() - expect).abs() < 1e-15);
        assert!((cdf_axc(&g, &sum, &[1.0; 3]).unwrap() - 1.0).abs() < 1e-15);
        assert!((cdf_axc(&g, &sum, &[1.0, 0.37, 1.0]).unwrap() - 0.37).abs() < 1e-14);
        assert!(cdf_axc(&g, &sum, &[0.0, 0.5, 0.5]).is_err());
    }

    #[test]
    fn reduction_lattice_is_exact() {
        let evc = EvcModel::gumbel(3, 0.5).unwrap();
        // Archimax with the exponential generator is the EVC itself.
        let axc = CopulaModel::archimax(GeneratorSpec::IndependenceExp, evc.clone()).unwrap();
        let a = axc.sample(50, &mut stream_rng(1, 0));
        let mut r = stream_rng(1, 0);
        let b: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                let mut y = vec![0.0; 3];
                evc.sample_into(&mut r, &mut y);
                y
            })
            .collect();
        assert_eq!(a, b);
        // A root-only frailty tree is the plain Archimax copula.
        let psi = clayton(4.0 / 3.0);
        let haxc = CopulaModel::hierarchical(FrailtyTree::single(psi, 3).unwrap(), evc.clone()).unwrap();
        let plain = CopulaModel::archimax(psi, evc).unwrap();
        assert_eq!(haxc.sample(50, &mut stream_rng(2, 0)), plain.sample(50, &mut stream_rng(2, 0)));
        // Archimax over independence is Archimedean.
        let ac = CopulaModel::archimedean(psi, 3).unwrap();
        let axc = CopulaModel::archimax(psi, EvcModel::independence(3).unwrap()).unwrap();
        assert_eq!(ac.sample(50, &mut stream_rng(3, 0)), axc.sample(50, &mut stream_rng(3, 0)));
    }

    #[test]
    fn nested_frailty_cdf_is_composition() {
        let f = FrailtyTree::two_level(clayton(0.5), &[(2, clayton(4.0 / 3.0)), (2, clayton(3.0))]).unwrap();
        let blocks = vec![EvcModel::gumbel(2, 0.5).unwrap(), EvcModel::gumbel(2, 0.5).unwrap()];
        let m = CopulaModel::nested_frailties(f, EvcModel::product(blocks).unwrap()).unwrap();
        let u = [0.5, 0.6, 0.7, 0.8];
        let g = StdfSpec::gumbel(2, 0.5).unwrap();
        let c1 = cdf_axc(&clayton(4.0 / 3.0), &g, &u[..2]).unwrap();
        let c2 = cdf_axc(&clayton(3.0), &g, &u[2..]).unwrap();
        let r = clayton(0.5);
        let expect = r.psi(r.psi_inv(c1).unwrap() + r.psi_inv(c2).unwrap()).unwrap();
        assert!((m.cdf(&u).unwrap() - expect).abs() < 1e-15);
        // Margins: same sector is the sector Archimax, cross sector is Archimedean.
        let p01 = m.pairwise_margin_cdf(0, 1, 0.4, 0.7).unwrap();
        assert!((p01 - cdf_axc(&clayton(4.0 / 3.0), &g, &[0.4, 0.7]).unwrap()).abs() < 1e-15);
        let p13 = m.pairwise_margin_cdf(1, 3, 0.4, 0.7).unwrap();
        assert!((p13 - cdf_axc(&r, &StdfSpec::sum(2).unwrap(), &[0.4, 0.7]).unwrap()).abs() < 1e-15);
        assert!((m.pairwise_margin_cdf(0, 2, 0.4, 1.0).unwrap() - 0.4).abs() < 1e-15);
        assert!((m.cdf(&[0.4, 1.0, 1.0, 1.0]).unwrap() - 0.4).abs() < 1e-14);
    }

    #[test]
    fn nested_evc_pairwise_margins() {
        let stdf = NestedGumbel::two_level(0.8, &[(2, 0.5), (3, 0.3)]).unwrap();
        let m = CopulaModel::nested_evc(clayton(1.0), EvcModel::nested_gumbel(stdf).unwrap()).unwrap();
        let within = m.pairwise_margin_cdf(2, 4, 0.3, 0.6).unwrap();
        assert!((within - cdf_axc(&clayton(1.0), &StdfSpec::gumbel(2, 0.3).unwrap(), &[0.3, 0.6]).unwrap()).abs() < 1e-15);
        let across = m.pairwise_margin_cdf(0, 4, 0.3, 0.6).unwrap();
        assert!((across - cdf_axc(&clayton(1.0), &StdfSpec::gumbel(2, 0.8).unwrap(), &[0.3, 0.6]).unwrap()).abs() < 1e-15);
        let mut u = [1.0; 5];
        u[1] = 0.3;
        u[3] = 0.6;
        assert!((m.cdf(&u).unwrap() - across).abs() < 1e-14);
        assert!((m.pairwise_margin_cdf(0, 1, 1.0, 0.25).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejections() {
        let f = FrailtyTree::two_level(clayton(0.5), &[(2, clayton(1.0)), (2, clayton(2.0))]).unwrap();
        let dependent = EvcModel::gumbel(4, 0.5).unwrap();
        assert!(matches!(CopulaModel::nested_frailties(f.clone(), dependent), Err(Error::Capability(_))));
        let wrong = EvcModel::product(vec![EvcModel::gumbel(3, 0.5).unwrap(), EvcModel::independence(1).unwrap()]).unwrap();
        assert!(matches!(CopulaModel::nested_frailties(f.clone(), wrong), Err(Error::Structure(_))));
        assert!(matches!(
            CopulaModel::hierarchical(f.clone(), EvcModel::gumbel(3, 0.5).unwrap()),
            Err(Error::Structure(_))
        ));
        let haxc = CopulaModel::hierarchical(f, EvcModel::gumbel(4, 0.5).unwrap()).unwrap();
        assert!(matches!(haxc.cdf(&[0.5; 4]), Err(Error::Capability(_))));
        assert!(matches!(haxc.pairwise_margin_cdf(0, 1, 0.5, 0.5), Err(Error::Capability(_))));
        assert!(matches!(
            CopulaModel::nested_evc(clayton(1.0), EvcModel::gumbel(3, 0.5).unwrap()),
            Err(Error::Capability(_))
        ));
        let br = DNormGeneratorSpec::brown_resnick(&[vec![1.0, 0.2], vec![0.2, 1.0]]).unwrap();
        let spectral = EvcModel::spectral(br, Truncation::Fixed(10)).unwrap();
        assert!(CopulaModel::archimax(clayton(1.0), spectral).unwrap().stdf().is_some());
    }

    #[test]
    fn nested_archimedean_cdf_matches_nesting() {
        let f = FrailtyTree::two_level(clayton(0.5), &[(2, clayton(4.0 / 3.0)), (1, clayton(3.0))]).unwrap();
        let m = CopulaModel::hierarchical(f, EvcModel::independence(3).unwrap()).unwrap();
        let u = [0.3, 0.5, 0.8];
        let inner = cdf_axc(&clayton(4.0 / 3.0), &StdfSpec::sum(2).unwrap(), &u[..2]).unwrap();
        let r = clayton(0.5);
        let expect = r.psi(r.psi_inv(inner).unwrap() + r.psi_inv(0.8).unwrap()).unwrap();
        assert!((m.cdf(&u).unwrap() - expect).abs() < 1e-15);
    }
}
