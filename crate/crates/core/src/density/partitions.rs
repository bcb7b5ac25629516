//! Set partitions of `{0, …, d-1}` enumerated as restricted-growth strings.
//!
//! A restricted-growth string `a` has `a[0] = 0` and
//! `a[i] <= 1 + max(a[0..i])`; element `i` belongs to block `a[i]`. Blocks
//! are therefore numbered by their smallest element.

use crate::error::{Error, Result};

/// Largest dimension for dense partition sums; Bell(12) = 4 213 597.
pub const MAX_PARTITION_DIMENSION: usize = 12;

/// One partition, blocks stored as bitmasks ordered by smallest element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    masks: Vec<u32>,
}

impl Partition {
    /// Number of blocks `|π|`.
    pub fn k(&self) -> usize {
        self.masks.len()
    }

    pub fn masks(&self) -> &[u32] {
        &self.masks
    }

    /// Blocks as sorted index lists.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        self.masks.iter().map(|&m| mask_to_indices(m)).collect()
    }
}

pub(crate) fn mask_to_indices(mask: u32) -> Vec<usize> {
    (0..32).filter(|&j| mask >> j & 1 == 1).collect()
}

/// Streaming restricted-growth-string state; O(d) memory.
#[derive(Debug, Clone)]
struct Rgs {
    a: Vec<u8>,
    /// `prefix_max[i] = max(a[0..=i])`.
    prefix_max: Vec<u8>,
}

impl Rgs {
    fn new(d: usize) -> Self {
        Rgs { a: vec![0; d], prefix_max: vec![0; d] }
    }

    /// Advances to the next string; false after the last one.
    fn advance(&mut self) -> bool {
        let d = self.a.len();
        for i in (1..d).rev() {
            if self.a[i] <= self.prefix_max[i - 1] {
                self.a[i] += 1;
                self.prefix_max[i] = self.prefix_max[i - 1].max(self.a[i]);
                for j in i + 1..d {
                    self.a[j] = 0;
                    self.prefix_max[j] = self.prefix_max[i];
                }
                return true;
            }
        }
        false
    }

    /// Block masks of the current string into `masks`; returns k.
    fn fill_masks(&self, masks: &mut [u32; MAX_PARTITION_DIMENSION]) -> usize {
        let k = self.a.last().map_or(0, |_| self.prefix_max[self.a.len() - 1] as usize + 1);
        masks[..k].fill(0);
        for (j, &b) in self.a.iter().enumerate() {
            masks[b as usize] |= 1 << j;
        }
        k
    }
}

/// Iterator over all Bell(d) partitions of `{0, …, d-1}`.
#[derive(Debug, Clone)]
pub struct SetPartitionIter {
    rgs: Rgs,
    done: bool,
}

impl Iterator for SetPartitionIter {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        let mut buf = [0u32; MAX_PARTITION_DIMENSION];
        let k = self.rgs.fill_masks(&mut buf);
        self.done = !self.rgs.advance();
        Some(Partition { masks: buf[..k].to_vec() })
    }
}

fn check_dimension(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::domain("partitions need d >= 1"));
    }
    if d > MAX_PARTITION_DIMENSION {
        return Err(Error::capability(format!(
            "partition sums are limited to d <= {MAX_PARTITION_DIMENSION} (Bell(13) = 27 644 437 is too large for dense evaluation)"
        )));
    }
    Ok(())
}

/// All partitions of `{0, …, d-1}`.
pub fn enumerate_partitions(d: usize) -> Result<SetPartitionIter> {
    check_dimension(d)?;
    Ok(SetPartitionIter { rgs: Rgs::new(d), done: false })
}

/// The partitions with exactly `k` blocks.
pub fn partitions_with_blocks(d: usize, k: usize) -> Result<impl Iterator<Item = Partition>> {
    Ok(enumerate_partitions(d)?.filter(move |p| p.k() == k))
}

/// Calls `f(masks)` for every partition without allocating.
pub(crate) fn for_each_partition<F: FnMut(&[u32])>(d: usize, mut f: F) -> Result<()> {
    check_dimension(d)?;
    let mut rgs = Rgs::new(d);
    let mut buf = [0u32; MAX_PARTITION_DIMENSION];
    loop {
        let k = rgs.fill_masks(&mut buf);
        f(&buf[..k]);
        if !rgs.advance() {
            return Ok(());
        }
    }
}

/// Stirling numbers of the second kind `S(d, k)`, k = 0..=d.
pub fn stirling2_row(d: usize) -> Vec<u64> {
    let mut row = vec![1u64];
    for n in 0..d {
        let mut next = vec![0u64; n + 2];
        for k in 1..=n + 1 {
            let same = if k <= n { k as u64 * row[k] } else { 0 };
            next[k] = same + row[k - 1];
        }
        row = next;
    }
    row
}

/// Bell number `B(d)`.
pub fn bell_number(d: usize) -> u64 {
    stirling2_row(d).iter().sum()
}
