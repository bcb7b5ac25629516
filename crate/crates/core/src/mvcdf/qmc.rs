//! Randomized quasi-Monte Carlo over the separation-of-variables transform
//! for normal and Student t orthant probabilities in dimensions 4 to 6.

use nalgebra::DMatrix;
use rand::Rng;

use crate::numeric::{norm_cdf, norm_quantile, t_cdf, t_quantile};
use crate::rng::stream_rng;

/// Fixed seed of the random shifts; results are deterministic.
const SHIFT_SEED: u64 = 0x6d76_6364_6671_6d63;
const SHIFTS: usize = 12;
const START_POINTS: usize = 1 << 10;
const MAX_POINTS: usize = 1 << 18;
const PRIMES: [f64; 8] = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0];

/// `P(X ≤ z)` for `X = C Y` with `C` lower triangular and `Y` standard
/// normal (`nu = None`) or spherical Student t. `z` is already standardized;
/// the estimate aims at an absolute error below `tol`.
pub(crate) fn sov_probability(z: &[f64], chol: &DMatrix<f64>, nu: Option<f64>, tol: f64) -> f64 {
    let m = z.len();
    let dims = m - 1;
    let alphas: Vec<f64> = PRIMES[..dims].iter().map(|p| p.sqrt().fract()).collect();
    let mut rng = stream_rng(SHIFT_SEED, m as u64);
    let shifts: Vec<Vec<f64>> = (0..SHIFTS)
        .map(|_| (0..dims).map(|_| rng.random::<f64>()).collect())
        .collect();

    let mut n = START_POINTS;
    loop {
        let estimates: Vec<f64> = shifts
            .iter()
            .map(|shift| {
                let mut w = vec![0.0; dims];
                let mut y = vec![0.0; m];
                let mut sum = 0.0;
                for i in 1..=n {
                    for k in 0..dims {
                        let x = (i as f64 * alphas[k] + shift[k]).fract();
                        // Tent transform periodizes the integrand.
                        w[k] = 1.0 - (2.0 * x - 1.0).abs();
                    }
                    sum += integrand(z, chol, nu, &w, &mut y);
                }
                sum / n as f64
            })
            .collect();
        let mean = estimates.iter().sum::<f64>() / SHIFTS as f64;
        let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (SHIFTS * (SHIFTS - 1)) as f64;
        if 3.0 * var.sqrt() <= 0.25 * tol || n >= MAX_POINTS {
            return mean.clamp(0.0, 1.0);
        }
        n *= 2;
    }
}

fn integrand(z: &[f64], c: &DMatrix<f64>, nu: Option<f64>, w: &[f64], y: &mut [f64]) -> f64 {
    let m = z.len();
    let mut prob = 1.0;
    let mut sum_sq = 0.0;
    for i in 0..m {
        let mut shift = 0.0;
        for j in 0..i {
            shift += c[(i, j)] * y[j];
        }
        let resid = z[i] - shift;
        let cii = c[(i, i)];
        // Conditional law of Y_i given the previous coordinates.
        let (cdf, scale, dof) = match nu {
            None => (None, 1.0, 0.0),
            Some(nu) => {
                let dof = nu + i as f64;
                (Some(dof), ((nu + sum_sq) / dof).sqrt(), dof)
            }
        };
        let e = if cii > 0.0 {
            let arg = resid / (cii * scale);
            match cdf {
                None => norm_cdf(arg),
                Some(dof) => t_cdf(arg, dof),
            }
        } else if resid >= 0.0 {
            1.0
        } else {
            0.0
        };
        prob *= e;
        if prob == 0.0 || i == m - 1 {
            break;
        }
        let (p, lim) = if cii > 0.0 { (w[i] * e, e) } else { (w[i], 1.0) };
        let p = p.clamp(1e-300, lim.min(1.0 - 1e-16));
        let q = match nu {
            None => norm_quantile(p),
            Some(_) => t_quantile(p, dof),
        };
        y[i] = q * scale;
        sum_sq += y[i] * y[i];
    }
    prob
}
