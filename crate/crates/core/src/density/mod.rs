//! Archimax densities by Faà di Bruno's formula over set partitions:
//!
//! `c(u) = ∏_j (-ψ⁻¹)'(u_j) · Σ_k |ψ^{(k)}(ℓ(x))| Σ_{|π|=k} ∏_{B∈π} |D_B ℓ(x)|`,
//! `x = ψ⁻¹(u)`. Every factor has a known sign, so the sum is carried out on
//! absolute values in log space.

mod partitions;

pub use partitions::{
    bell_number, enumerate_partitions, partitions_with_blocks, stirling2_row, Partition, SetPartitionIter,
    MAX_PARTITION_DIMENSION,
};

use partitions::{for_each_partition, mask_to_indices};

use crate::error::{Error, Result};
use crate::generators::GeneratorSpec;
use crate::numeric::{log_sum_exp, falling_factorial};
use crate::stdf::StdfSpec;

/// Log-scale building blocks of the density at one point.
///
/// For `k = 1..=d` (stored at index `k-1`):
/// - `a_max[k]`: largest `a_π = Σ_{B∈π} log|D_B ℓ(x)|` over partitions with k blocks;
/// - `log_partition_sum[k]`: `log Σ_{|π|=k} exp(a_π)`;
/// - `b[k]`: `log|ψ^{(k)}(ℓ(x))| + log_partition_sum[k]`.
///
/// `b_max = max_k b[k]`. Absent terms are `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDensityTerms {
    pub log_jacobian: f64,
    pub a_max: Vec<f64>,
    pub log_partition_sum: Vec<f64>,
    pub b: Vec<f64>,
    pub b_max: f64,
}

impl LogDensityTerms {
    /// `log c(u) = log_jacobian + b_max + log Σ_k exp(b_k - b_max)`.
    pub fn log_density(&self) -> f64 {
        if self.b_max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let tail: f64 = self.b.iter().map(|&b| (b - self.b_max).exp()).sum();
        self.log_jacobian + self.b_max + tail.ln()
    }
}

fn check_point(psi: &GeneratorSpec, stdf: &StdfSpec, u: &[f64]) -> Result<Vec<f64>> {
    let d = stdf.dimension();
    if u.len() != d {
        return Err(Error::domain(format!("point of dimension {} for a copula of dimension {d}", u.len())));
    }
    if d > MAX_PARTITION_DIMENSION {
        return Err(Error::capability(format!(
            "densities are limited to d <= {MAX_PARTITION_DIMENSION}"
        )));
    }
    if let StdfSpec::Max { .. } = stdf {
        return Err(Error::capability("the comonotone stdf is not differentiable; the copula has no density"));
    }
    if let Some(j) = u.iter().position(|&v| !(v > 0.0 && v < 1.0)) {
        return Err(Error::domain(format!("density needs u in (0,1)^d; coordinate {j} is {}", u[j])));
    }
    psi.validate()?;
    u.iter().map(|&v| psi.psi_inv(v)).collect()
}

fn log_jacobian(psi: &GeneratorSpec, u: &[f64]) -> Result<f64> {
    u.iter().map(|&v| psi.log_neg_dpsi_inv(v)).sum()
}

/// `log|D_B ℓ(x)|` for every non-empty block mask, with the sign law
/// `sign(D_B ℓ) = (-1)^{|B|-1}` asserted.
fn block_log_partials(stdf: &StdfSpec, x: &[f64]) -> Result<Vec<f64>> {
    let d = x.len();
    let mut table = vec![f64::NEG_INFINITY; 1 << d];
    for mask in 1u32..(1 << d) {
        let block = mask_to_indices(mask);
        let (sign, la) = stdf.signed_log_partial(&block, x)?;
        let expected = if block.len() % 2 == 1 { 1.0 } else { -1.0 };
        if sign != 0.0 && sign != expected {
            return Err(Error::Numerical(format!(
                "partial derivative over {block:?} has sign {sign}, expected {expected}"
            )));
        }
        if sign != 0.0 && la.is_nan() {
            return Err(Error::Numerical(format!("partial derivative over {block:?} is not a number")));
        }
        table[mask as usize] = if sign == 0.0 { f64::NEG_INFINITY } else { la };
    }
    Ok(table)
}

/// All log-scale terms of the density at `u ∈ (0,1)^d`.
///
/// Partitions are streamed twice per point: once for the per-k maxima of
/// `a_π`, once for the scaled sums.
pub fn log_density_terms(psi: &GeneratorSpec, stdf: &StdfSpec, u: &[f64]) -> Result<LogDensityTerms> {
    let x = check_point(psi, stdf, u)?;
    let d = x.len();
    let table = block_log_partials(stdf, &x)?;
    let a_of = |masks: &[u32]| masks.iter().map(|&m| table[m as usize]).sum::<f64>();

    let mut a_max = vec![f64::NEG_INFINITY; d];
    for_each_partition(d, |masks| {
        let k = masks.len() - 1;
        a_max[k] = a_max[k].max(a_of(masks));
    })?;
    let mut scaled = vec![0.0; d];
    for_each_partition(d, |masks| {
        let k = masks.len() - 1;
        if a_max[k] > f64::NEG_INFINITY {
            scaled[k] += (a_of(masks) - a_max[k]).exp();
        }
    })?;
    let log_partition_sum: Vec<f64> = (0..d)
        .map(|k| if a_max[k] == f64::NEG_INFINITY { f64::NEG_INFINITY } else { a_max[k] + scaled[k].ln() })
        .collect();

    let t = stdf.eval(&x)?;
    let mut b = vec![f64::NEG_INFINITY; d];
    for k in 0..d {
        if log_partition_sum[k] > f64::NEG_INFINITY {
            b[k] = psi.log_abs_psi_deriv(k + 1, t)? + log_partition_sum[k];
        }
    }
    let b_max = b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(LogDensityTerms { log_jacobian: log_jacobian(psi, u)?, a_max, log_partition_sum, b, b_max })
}

fn finite_or_error(v: f64, u: &[f64]) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical(format!("log-density at {u:?} is not finite ({v})")))
    }
}

/// `log c(u)` of the Archimax copula with generator `psi` and stdf `stdf`.
///
/// Densities built on finite-difference derivatives (Hüsler–Reiss,
/// extremal t) are accurate to about 1e-2 relative.
pub fn axc_log_density(psi: &GeneratorSpec, stdf: &StdfSpec, u: &[f64]) -> Result<f64> {
    finite_or_error(log_density_terms(psi, stdf, u)?.log_density(), u)
}

/// `c(u) = exp(log c(u))`; underflows to 0 in deep tails.
pub fn axc_density(psi: &GeneratorSpec, stdf: &StdfSpec, u: &[f64]) -> Result<f64> {
    Ok(axc_log_density(psi, stdf, u)?.exp())
}

/// Direct evaluation of the density formula with every factor in ordinary
/// floating point; a reference for the log-space path that can underflow,
/// overflow or return NaN far in the tails.
pub fn axc_density_direct(psi: &GeneratorSpec, stdf: &StdfSpec, u: &[f64]) -> Result<f64> {
    let x = check_point(psi, stdf, u)?;
    let d = x.len();
    let mut partials = vec![0.0; 1 << d];
    for mask in 1u32..(1 << d) {
        partials[mask as usize] = stdf.partial(&mask_to_indices(mask), &x)?;
    }
    let mut by_k = vec![0.0; d];
    for_each_partition(d, |masks| {
        by_k[masks.len() - 1] += masks.iter().map(|&m| partials[m as usize]).product::<f64>();
    })?;
    let t = stdf.eval(&x)?;
    let mut sum = 0.0;
    for (k, &s) in by_k.iter().enumerate() {
        let sign = if (k + 1) % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * psi.log_abs_psi_deriv(k + 1, t)?.exp() * s;
    }
    let jac: f64 = u.iter().map(|&v| -psi.log_neg_dpsi_inv(v).map(f64::exp).unwrap_or(f64::NAN)).product();
    Ok(jac * sum)
}

/// `log |Σ_{|π|=k} ∏_{B∈π} (α)_{|B|}|` for k = 1..=d (index k-1).
///
/// With `g(n, k)` the signed sum over partitions of n elements, adding an
/// element either opens a singleton block (factor α) or joins a block of
/// size m, turning `(α)_m` into `(α)_{m+1} = (α)_m (α - m)`:
/// `|g(n+1, k)| = α |g(n, k-1)| + (n - α k) |g(n, k)|`, all terms non-negative.
pub fn gumbel_partition_log_coefficients(alpha: f64, d: usize) -> Vec<f64> {
    let mut row = vec![f64::NEG_INFINITY; d + 1];
    row[1] = alpha.ln();
    for n in 1..d {
        let mut next = vec![f64::NEG_INFINITY; d + 1];
        for k in 1..=n + 1 {
            let open = if k >= 2 { alpha.ln() + row[k - 1] } else { f64::NEG_INFINITY };
            let coef = n as f64 - alpha * k as f64;
            let join = if k <= n && coef > 0.0 { coef.ln() + row[k] } else { f64::NEG_INFINITY };
            next[k] = crate::numeric::log_add_exp(open, join);
        }
        row = next;
    }
    row[1..].to_vec()
}

/// `log c(u)` for a Gumbel stdf through the closed-form partition coefficients:
///
/// `c(u) = α^{-d} ∏_j (-ψ⁻¹)'(u_j) x_j^{1/α-1} Σ_k |ψ^{(k)}(S^α)| S^{αk-d} |g(d,k)|`,
/// `S = Σ_j x_j^{1/α}`.
pub fn gumbel_stdf_log_density_fastpath(psi: &GeneratorSpec, alpha: f64, u: &[f64]) -> Result<f64> {
    let d = u.len();
    let stdf = StdfSpec::gumbel(d.max(1), alpha)?;
    let x = check_point(psi, &stdf, u)?;
    let logs: Vec<f64> = x.iter().map(|v| v.ln() / alpha).collect();
    let log_s = log_sum_exp(&logs);
    let t = (alpha * log_s).exp();
    let coeffs = gumbel_partition_log_coefficients(alpha, d);
    let mut terms = Vec::with_capacity(d);
    for (i, &lc) in coeffs.iter().enumerate() {
        if lc == f64::NEG_INFINITY {
            continue;
        }
        let k = i + 1;
        terms.push(psi.log_abs_psi_deriv(k, t)? + (alpha * k as f64 - d as f64) * log_s + lc);
    }
    let prefactor = -(d as f64) * alpha.ln() + (1.0 / alpha - 1.0) * x.iter().map(|v| v.ln()).sum::<f64>();
    finite_or_error(log_jacobian(psi, u)? + prefactor + log_sum_exp(&terms), u)
}

/// Density through [`gumbel_stdf_log_density_fastpath`].
pub fn gumbel_stdf_density_fastpath(psi: &GeneratorSpec, alpha: f64, u: &[f64]) -> Result<f64> {
    Ok(gumbel_stdf_log_density_fastpath(psi, alpha, u)?.exp())
}

/// Signed coefficients `Σ_{|π|=k} ∏_{B∈π} (α)_{|B|}` by explicit enumeration;
/// reference for [`gumbel_partition_log_coefficients`].
pub fn gumbel_partition_coefficients_enumerated(alpha: f64, d: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; d];
    for_each_partition(d, |masks| {
        out[masks.len() - 1] += masks.iter().map(|m| falling_factorial(alpha, m.count_ones() as usize)).product::<f64>();
    })?;
    Ok(out)
}
