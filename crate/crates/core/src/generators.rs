//! Archimedean generators ψ with inverses and signed derivatives.
//!
//! All derivative evaluation happens on the log scale:
//! `log_abs_psi_deriv(k, t)` returns `log((-1)^k ψ^(k)(t))`, which is finite
//! for every supported family and order because completely monotone
//! generators have derivatives of alternating sign.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::Params;
use crate::numeric::log_sum_exp;

/// Highest derivative order supported by [`GeneratorSpec::log_abs_psi_deriv`].
pub const MAX_DERIVATIVE_ORDER: usize = 12;

/// A completely monotone Archimedean generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GeneratorSpec {
    /// `ψ(t) = (1 + t)^(-1/θ)`, θ > 0.
    Clayton { theta: f64 },
    /// `ψ(t) = exp(-t^α)`, α ∈ (0, 1].
    Gumbel { alpha: f64 },
    /// `ψ(t) = exp(-t)`.
    #[serde(rename = "indep_exp")]
    IndependenceExp,
}

impl GeneratorSpec {
    pub fn clayton(theta: f64) -> Result<Self> {
        let g = GeneratorSpec::Clayton { theta };
        g.validate()?;
        Ok(g)
    }

    pub fn gumbel(alpha: f64) -> Result<Self> {
        let g = GeneratorSpec::Gumbel { alpha };
        g.validate()?;
        Ok(g)
    }

    /// Clayton generator with the given Kendall's tau in (0, 1).
    pub fn clayton_from_tau(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::domain(format!("Clayton needs tau in (0,1), got {tau}")));
        }
        Self::clayton(2.0 * tau / (1.0 - tau))
    }

    /// Gumbel generator with the given Kendall's tau in [0, 1).
    pub fn gumbel_from_tau(tau: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&tau) {
            return Err(Error::domain(format!("Gumbel needs tau in [0,1), got {tau}")));
        }
        Self::gumbel(1.0 - tau)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GeneratorSpec::Clayton { theta } if !(theta > 0.0 && theta.is_finite()) => {
                Err(Error::domain(format!("Clayton theta must be positive, got {theta}")))
            }
            GeneratorSpec::Gumbel { alpha } if !(alpha > 0.0 && alpha <= 1.0) => {
                Err(Error::domain(format!("Gumbel alpha must lie in (0,1], got {alpha}")))
            }
            _ => Ok(()),
        }
    }

    /// Reads a generator from tree node parameters: `theta` selects Clayton,
    /// `alpha` selects Gumbel. An explicit `family` entry must agree.
    pub fn from_params(p: &Params) -> Result<Self> {
        let family = p.get("family").and_then(|v| v.as_str());
        let theta = p.get("theta").and_then(|v| v.as_f64());
        let alpha = p.get("alpha").and_then(|v| v.as_f64());
        let g = match (family, theta, alpha) {
            (None | Some("clayton"), Some(theta), None) => GeneratorSpec::Clayton { theta },
            (None | Some("gumbel"), None, Some(alpha)) => GeneratorSpec::Gumbel { alpha },
            (Some("indep_exp"), None, None) => GeneratorSpec::IndependenceExp,
            _ => {
                return Err(Error::config(format!(
                    "cannot read a generator from node parameters {p:?}"
                )))
            }
        };
        g.validate()?;
        Ok(g)
    }

    /// Kendall's tau of the bivariate Archimedean copula generated by ψ.
    pub fn kendall_tau(&self) -> f64 {
        match *self {
            GeneratorSpec::Clayton { theta } => theta / (theta + 2.0),
            GeneratorSpec::Gumbel { alpha } => 1.0 - alpha,
            GeneratorSpec::IndependenceExp => 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GeneratorSpec::Clayton { .. } => "clayton",
            GeneratorSpec::Gumbel { .. } => "gumbel",
            GeneratorSpec::IndependenceExp => "indep_exp",
        }
    }

    pub fn psi(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!("psi needs t >= 0, got {t}")));
        }
        Ok(self.psi_unchecked(t))
    }

    #[inline]
    pub(crate) fn psi_unchecked(&self, t: f64) -> f64 {
        match *self {
            GeneratorSpec::Clayton { theta } => (-t.ln_1p() / theta).exp(),
            GeneratorSpec::Gumbel { alpha } => (-t.powf(alpha)).exp(),
            GeneratorSpec::IndependenceExp => (-t).exp(),
        }
    }

    pub fn psi_inv(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::domain(format!("psi_inv needs u in (0,1], got {u}")));
        }
        Ok(self.psi_inv_unchecked(u))
    }

    #[inline]
    pub(crate) fn psi_inv_unchecked(&self, u: f64) -> f64 {
        // -ln u computed via ln_1p keeps precision for u near 1
        let neg_log_u = -(u - 1.0).ln_1p();
        match *self {
            GeneratorSpec::Clayton { theta } => (theta * neg_log_u).exp_m1(),
            GeneratorSpec::Gumbel { alpha } => neg_log_u.powf(1.0 / alpha),
            GeneratorSpec::IndependenceExp => neg_log_u,
        }
    }

    /// `log((-ψ^{-1})'(u))` for u in (0, 1).
    pub fn log_neg_dpsi_inv(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain(format!(
                "log_neg_dpsi_inv needs u in (0,1), got {u}"
            )));
        }
        let log_u = u.ln();
        Ok(match *self {
            GeneratorSpec::Clayton { theta } => theta.ln() - (theta + 1.0) * log_u,
            GeneratorSpec::Gumbel { alpha } => {
                let neg_log_u = -(u - 1.0).ln_1p();
                -alpha.ln() + (1.0 / alpha - 1.0) * neg_log_u.ln() - log_u
            }
            GeneratorSpec::IndependenceExp => -log_u,
        })
    }

    /// `log((-1)^k ψ^(k)(t))` for `1 <= k <= MAX_DERIVATIVE_ORDER`, t > 0.
    pub fn log_abs_psi_deriv(&self, k: usize, t: f64) -> Result<f64> {
        if k == 0 {
            return Err(Error::domain("derivative order must be at least 1; use psi for k = 0"));
        }
        if k > MAX_DERIVATIVE_ORDER {
            return Err(Error::capability(format!(
                "derivative order {k} exceeds the supported maximum {MAX_DERIVATIVE_ORDER}"
            )));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("derivative needs finite t > 0, got {t}")));
        }
        Ok(match *self {
            GeneratorSpec::Clayton { theta } => {
                let inv = 1.0 / theta;
                let log_rising: f64 = (0..k).map(|j| (inv + j as f64).ln()).sum();
                log_rising - (inv + k as f64) * t.ln_1p()
            }
            GeneratorSpec::Gumbel { alpha } => gumbel_log_abs_deriv(alpha, k, t),
            GeneratorSpec::IndependenceExp => -t,
        })
    }
}

/// Log coefficients `log a_{k,j}`, j = 1..=k, of
/// `(-1)^k ψ^(k)(t) = ψ(t) t^{-k} Σ_j a_{k,j} t^{α j}` for `ψ(t) = exp(-t^α)`.
///
/// Differentiating once more gives
/// `a_{k+1,j} = α a_{k,j-1} + (k - α j) a_{k,j}` with `a_{1,1} = α`. Since
/// `α j <= k` every term is non-negative, so the recursion runs on the log
/// scale without cancellation. Zero coefficients (α = 1) are `-inf`.
pub(crate) fn gumbel_log_coefficients(alpha: f64, k: usize) -> Vec<f64> {
    let mut a = vec![alpha.ln()];
    for order in 1..k {
        let mut next = vec![f64::NEG_INFINITY; order + 1];
        for j in 1..=order + 1 {
            let shifted = if j >= 2 { alpha.ln() + a[j - 2] } else { f64::NEG_INFINITY };
            let stay = if j <= order {
                let w = order as f64 - alpha * j as f64;
                if w > 0.0 {
                    w.ln() + a[j - 1]
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                f64::NEG_INFINITY
            };
            next[j - 1] = crate::numeric::log_add_exp(shifted, stay);
        }
        a = next;
    }
    a
}

fn gumbel_log_abs_deriv(alpha: f64, k: usize, t: f64) -> f64 {
    let log_t = t.ln();
    let terms: Vec<f64> = gumbel_log_coefficients(alpha, k)
        .iter()
        .enumerate()
        .map(|(i, &la)| la + alpha * (i + 1) as f64 * log_t)
        .collect();
    -t.powf(alpha) - k as f64 * log_t + log_sum_exp(&terms)
}
