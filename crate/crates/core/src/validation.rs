//! Statistical checks on copula samples.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// n × d sample with entries in [0, 1], stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    /// Invariants: n ≥ 2, d ≥ 1, equal row lengths, entries in [0, 1].
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::domain(format!("a sample needs at least 2 rows, got {n}")));
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::domain("a sample needs at least one column"));
        }
        let mut data = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::domain(format!("row {i} has {} columns, expected {d}", row.len())));
            }
            if let Some(j) = row.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::domain(format!("entry ({i}, {j}) = {} is outside [0, 1]", row[j])));
            }
            data.extend_from_slice(row);
        }
        Ok(SampleMatrix { n, d, data })
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.iter().skip(j).step_by(self.d).copied().collect()
    }
}

fn tie_pairs_in_sorted(v: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for i in 1..v.len() {
        if v[i] == v[i - 1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Merge sort of `v` counting inversions (pairs out of order, ties excluded).
fn sort_counting_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_counting_swaps(&mut v[..mid], &mut buf[..mid]);
    swaps += sort_counting_swaps(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's tau-b in O(n log n) (Knight's algorithm).
///
/// Fails on fewer than 2 pairs, unequal lengths, NaN, or a constant column.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::domain(format!("columns of length {n} and {}", y.len())));
    }
    if n < 2 {
        return Err(Error::domain("Kendall's tau needs at least 2 pairs"));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::domain("Kendall's tau is undefined with NaN entries"));
    }
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let tied_x = tie_pairs_in_sorted(&xs);
    let mut tied_xy = 0u64;
    let mut run = 1u64;
    for i in 1..n {
        if pairs[i] == pairs[i - 1] {
            run += 1;
        } else {
            tied_xy += run * (run - 1) / 2;
            run = 1;
        }
    }
    tied_xy += run * (run - 1) / 2;

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = sort_counting_swaps(&mut ys, &mut buf);
    let tied_y = tie_pairs_in_sorted(&ys);

    let total = (n as u64) * (n as u64 - 1) / 2;
    if tied_x == total || tied_y == total {
        return Err(Error::domain("Kendall's tau is undefined for a constant column"));
    }
    // concordant - discordant
    let s = total as f64 - tied_x as f64 - tied_y as f64 + tied_xy as f64 - 2.0 * swaps as f64;
    let denom = ((total - tied_x) as f64 * (total - tied_y) as f64).sqrt();
    Ok((s / denom).clamp(-1.0, 1.0))
}

/// O(n²) tau-b by direct pair counting; a reference for [`kendall_tau`].
pub fn kendall_tau_naive(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::domain("Kendall's tau needs two columns of equal length >= 2"));
    }
    let (mut s, mut untied_x, mut untied_y) = (0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = (x[i] - x[j]).partial_cmp(&0.0).map_or(0, |o| o as i64);
            let dy = (y[i] - y[j]).partial_cmp(&0.0).map_or(0, |o| o as i64);
            s += dx * dy;
            untied_x += dx.abs();
            untied_y += dy.abs();
        }
    }
    if untied_x == 0 || untied_y == 0 {
        return Err(Error::domain("Kendall's tau is undefined for a constant column"));
    }
    Ok(s as f64 / ((untied_x as f64) * (untied_y as f64)).sqrt())
}

/// `sup_u |F̂(u) - u|` for a column in [0, 1]; needs n ≥ 10.
pub fn ks_uniform(column: &[f64]) -> Result<f64> {
    let n = column.len();
    if n < 10 {
        return Err(Error::domain(format!("KS statistic needs n >= 10, got {n}")));
    }
    if let Some(v) = column.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::domain(format!("value {v} is outside [0, 1]")));
    }
    let mut v = column.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let nf = n as f64;
    Ok(v.iter()
        .enumerate()
        .map(|(i, &u)| ((i + 1) as f64 / nf - u).max(u - i as f64 / nf))
        .fold(0.0, f64::max))
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Fraction of rows `≤ u` componentwise, with its binomial standard error.
pub fn empirical_cdf(sample: &SampleMatrix, u: &[f64]) -> Result<(f64, f64)> {
    if u.len() != sample.ncols() {
        return Err(Error::domain(format!("point of dimension {} for a {}-column sample", u.len(), sample.ncols())));
    }
    let hits = (0..sample.nrows())
        .filter(|&i| sample.row(i).iter().zip(u).all(|(a, b)| a <= b))
        .count();
    let n = sample.nrows() as f64;
    let p = hits as f64 / n;
    Ok((p, (p * (1.0 - p) / n).sqrt()))
}

/// Symmetric matrix of pairwise tau-b with unit diagonal.
pub fn tau_matrix(sample: &SampleMatrix) -> Result<DMatrix<f64>> {
    let d = sample.ncols();
    let columns: Vec<Vec<f64>> = (0..d).map(|j| sample.column(j)).collect();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
    let taus: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| kendall_tau(&columns[i], &columns[j]))
        .collect::<Result<_>>()?;
    let mut m = DMatrix::identity(d, d);
    for (&(i, j), &t) in pairs.iter().zip(&taus) {
        m[(i, j)] = t;
        m[(j, i)] = t;
    }
    Ok(m)
}
