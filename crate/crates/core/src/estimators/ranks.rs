use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::models::Sample;

/// Largest sample size for which bivariate joint exceedance counts are
/// tabulated in full (an `(n + 1)^2` table of `u16`).
const JOINT_TABLE_MAX_N: usize = 2048;

/// Column-wise ranks of a sample: rank 1 is the smallest value of a column,
/// ties are broken by ascending row index.
///
/// The matrix is immutable once built and may be shared across threads.
#[derive(Debug, Clone)]
pub struct RankMatrix {
    n: usize,
    d: usize,
    /// Row-major ranks in `1..=n`.
    ranks: Vec<u32>,
    joint: OnceLock<Option<JointTable>>,
}

/// `counts[a * (n + 1) + b]` is the number of rows whose first coordinate is
/// among the `a` largest and whose second is among the `b` largest.
#[derive(Debug, Clone)]
struct JointTable {
    side: usize,
    counts: Vec<u16>,
}

pub fn ranks(sample: &Sample) -> Result<RankMatrix> {
    RankMatrix::from_rows(sample.values(), sample.d())
}

impl RankMatrix {
    pub fn from_rows(values: &[f64], d: usize) -> Result<Self> {
        if d == 0 || values.is_empty() || values.len() % d != 0 {
            return Err(Error::arg("rank input must be a nonempty n x d matrix"));
        }
        let n = values.len() / d;
        if n > u32::MAX as usize {
            return Err(Error::arg("sample too large for rank storage"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data {
                row: pos / d + 1,
                column: pos % d + 1,
                message: format!("non-finite value {}", values[pos]),
            });
        }
        let mut ranks = vec![0u32; n * d];
        let mut order: Vec<usize> = (0..n).collect();
        for j in 0..d {
            order.sort_by(|&a, &b| values[a * d + j].total_cmp(&values[b * d + j]).then(a.cmp(&b)));
            for (r, &i) in order.iter().enumerate() {
                ranks[i * d + j] = r as u32 + 1;
            }
        }
        Ok(Self {
            n,
            d,
            ranks,
            joint: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rank(&self, i: usize, j: usize) -> u32 {
        self.ranks[i * self.d + j]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = u32> + '_ {
        self.ranks.iter().skip(j).step_by(self.d).copied()
    }

    /// Number of rows having, in at least one coordinate `j`, a value among
    /// the `m[j]` largest of its column. Requires `m[j] <= n`.
    pub(crate) fn count_any_exceedance(&self, m: &[usize]) -> usize {
        debug_assert_eq!(m.len(), self.d);
        if self.d == 2 {
            if let Some(table) = self.joint_table() {
                let (a, b) = (m[0], m[1]);
                return a + b - table.counts[a * table.side + b] as usize;
            }
        }
        let n = self.n as u32;
        // rank >= n - m + 1  <=>  rank + m > n
        self.ranks
            .chunks_exact(self.d)
            .filter(|row| row.iter().zip(m).any(|(&r, &mj)| r as usize + mj > n as usize))
            .count()
    }

    fn joint_table(&self) -> Option<&JointTable> {
        self.joint
            .get_or_init(|| {
                if self.d != 2 || self.n > JOINT_TABLE_MAX_N {
                    return None;
                }
                let side = self.n + 1;
                let mut counts = vec![0u16; side * side];
                for row in self.ranks.chunks_exact(2) {
                    // Position from the top: 1 for the column maximum.
                    let a = self.n + 1 - row[0] as usize;
                    let b = self.n + 1 - row[1] as usize;
                    counts[a * side + b] += 1;
                }
                for a in 0..side {
                    for b in 1..side {
                        counts[a * side + b] += counts[a * side + b - 1];
                    }
                }
                for a in 1..side {
                    for b in 0..side {
                        counts[a * side + b] += counts[(a - 1) * side + b];
                    }
                }
                Some(JointTable { side, counts })
            })
            .as_ref()
    }
}
