//! Lexicographic k-subset ranking via the combinatorial number system.
//!
//! Binomials are exact `u128` values from a Pascal table; every C(n, k)
//! with n <= 128 fits.

use crate::error::{Error, Result};
use crate::graph::LeaderSet;

/// Largest ground set whose binomials are guaranteed to fit in `u128`.
pub const MAX_GROUND_SET: usize = 128;

#[derive(Debug, Clone)]
pub struct BinomialTable {
    rows: Vec<Vec<u128>>,
}

impl BinomialTable {
    pub fn new(max_n: usize) -> Result<Self> {
        if max_n > MAX_GROUND_SET {
            return Err(Error::param(format!(
                "ground set of {max_n} exceeds the supported maximum {MAX_GROUND_SET}"
            )));
        }
        let mut rows: Vec<Vec<u128>> = Vec::with_capacity(max_n + 1);
        for n in 0..=max_n {
            let mut row = vec![1u128; n + 1];
            for k in 1..n {
                row[k] = rows[n - 1][k - 1] + rows[n - 1][k];
            }
            rows.push(row);
        }
        Ok(BinomialTable { rows })
    }

    /// C(n, k); zero when k > n.
    pub fn get(&self, n: usize, k: usize) -> u128 {
        if k > n {
            0
        } else {
            self.rows[n][k]
        }
    }
}

pub fn binomial(n: usize, k: usize) -> Result<u128> {
    Ok(BinomialTable::new(n)?.get(n, k))
}

/// Unranks many k-subsets of `{0..n-1}` against one table.
#[derive(Debug, Clone)]
pub struct CombinationIndexer {
    table: BinomialTable,
    n: usize,
    k: usize,
}

impl CombinationIndexer {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::param(format!("subset size {k} must lie in [1, {n}]")));
        }
        Ok(CombinationIndexer {
            table: BinomialTable::new(n)?,
            n,
            k,
        })
    }

    pub fn total(&self) -> u128 {
        self.table.get(self.n, self.k)
    }

    /// The `index`-th subset (1-based) in lexicographic order.
    pub fn unrank(&self, index: u128) -> Result<Vec<usize>> {
        let total = self.total();
        if index == 0 || index > total {
            return Err(Error::RankOutOfRange { index, total });
        }
        let mut remaining = index - 1;
        let mut subset = Vec::with_capacity(self.k);
        let mut next = 0;
        for pos in 0..self.k {
            loop {
                // Subsets that put `next` at position `pos`.
                let block = self.table.get(self.n - 1 - next, self.k - 1 - pos);
                if remaining < block {
                    break;
                }
                remaining -= block;
                next += 1;
            }
            subset.push(next);
            next += 1;
        }
        Ok(subset)
    }

    /// Inverse of [`unrank`](Self::unrank) for a sorted subset.
    pub fn rank(&self, subset: &[usize]) -> Result<u128> {
        if subset.len() != self.k
            || subset.windows(2).any(|w| w[0] >= w[1])
            || subset.last().is_some_and(|&x| x >= self.n)
        {
            return Err(Error::param("subset must be sorted, distinct and in range"));
        }
        let mut rank = 0u128;
        let mut start = 0;
        for (pos, &x) in subset.iter().enumerate() {
            for skipped in start..x {
                rank += self.table.get(self.n - 1 - skipped, self.k - 1 - pos);
            }
            start = x + 1;
        }
        Ok(rank + 1)
    }
}

pub fn unrank_combination(index: u128, n: usize, k: usize) -> Result<LeaderSet> {
    let subset = CombinationIndexer::new(n, k)?.unrank(index)?;
    LeaderSet::new(subset, n)
}
