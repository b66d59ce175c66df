//! Exact rank computations for small integer matrices.

use num_bigint::BigInt;
use num_traits::Zero;

/// Rank over GF(2) of a row set, each row given as a sparse list of column
/// indices with odd coefficient.
pub fn gf2_rank(rows: &[Vec<usize>], cols: usize) -> usize {
    let mut basis = Gf2Basis::new(cols);
    rows.iter()
        .filter(|r| basis.insert(Gf2Row::from_support(cols, r)))
        .count()
}

/// Dense bit-packed row over GF(2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gf2Row {
    words: Vec<u64>,
}

impl Gf2Row {
    pub fn zeros(cols: usize) -> Self {
        Self {
            words: vec![0; cols.div_ceil(64)],
        }
    }

    pub fn from_support(cols: usize, support: &[usize]) -> Self {
        let mut r = Self::zeros(cols);
        for &c in support {
            r.words[c / 64] ^= 1 << (c % 64);
        }
        r
    }

    fn leading(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    fn bit(&self, c: usize) -> bool {
        self.words[c / 64] >> (c % 64) & 1 == 1
    }

    fn xor_assign(&mut self, other: &Self) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }
}

/// Incremental echelon basis over GF(2); used for greedy independence tests.
#[derive(Debug, Clone)]
pub struct Gf2Basis {
    // pivot column -> reduced row
    pivots: Vec<(usize, Gf2Row)>,
    cols: usize,
}

impl Gf2Basis {
    pub fn new(cols: usize) -> Self {
        Self {
            pivots: Vec::new(),
            cols,
        }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Reduces `row` against the basis.
    pub fn reduce(&self, mut row: Gf2Row) -> Gf2Row {
        for (p, r) in &self.pivots {
            if row.bit(*p) {
                row.xor_assign(r);
            }
        }
        row
    }

    /// Inserts `row` if it is independent; returns whether it was.
    pub fn insert(&mut self, row: Gf2Row) -> bool {
        debug_assert_eq!(row.words.len(), self.cols.div_ceil(64));
        let row = self.reduce(row);
        match row.leading() {
            None => false,
            Some(p) => {
                // keep rows fully reduced on their pivots so `reduce` is one pass
                for (_, r) in self.pivots.iter_mut() {
                    if r.bit(p) {
                        r.xor_assign(&row);
                    }
                }
                self.pivots.push((p, row));
                true
            }
        }
    }

    pub fn contains(&self, row: Gf2Row) -> bool {
        self.reduce(row).leading().is_none()
    }
}

/// Rank over the rationals of an integer matrix, computed with fraction-free
/// (Bareiss) elimination in arbitrary precision.
pub fn rational_rank(rows: &[Vec<i64>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let cols = rows[0].len();
    let mut a: Vec<Vec<BigInt>> = rows
        .iter()
        .map(|r| {
            assert_eq!(r.len(), cols, "ragged matrix");
            r.iter().map(|&v| BigInt::from(v)).collect()
        })
        .collect();
    let nrows = a.len();
    let mut rank = 0;
    let mut prev = BigInt::from(1);
    for col in 0..cols {
        if rank == nrows {
            break;
        }
        let Some(piv) = (rank..nrows).find(|&i| !a[i][col].is_zero()) else {
            continue;
        };
        a.swap(rank, piv);
        for i in rank + 1..nrows {
            for j in col + 1..cols {
                let v = (&a[rank][col] * &a[i][j] - &a[i][col] * &a[rank][j]) / &prev;
                a[i][j] = v;
            }
            a[i][col] = BigInt::zero();
        }
        prev = a[rank][col].clone();
        rank += 1;
    }
    rank
}
