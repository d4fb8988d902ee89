//! Arithmetic modulo the Mersenne prime 2^61 - 1 and an incremental
//! row-echelon basis used for exact rank tests.

use rand::Rng;

pub const P: u64 = (1 << 61) - 1;

#[inline]
pub fn add(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= P {
        s - P
    } else {
        s
    }
}

#[inline]
pub fn sub(a: u64, b: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + P - b
    }
}

#[inline]
pub fn mul(a: u64, b: u64) -> u64 {
    let t = a as u128 * b as u128;
    let s = ((t as u64) & P) + (t >> 61) as u64;
    let s = (s & P) + (s >> 61);
    if s >= P {
        s - P
    } else {
        s
    }
}

pub fn pow(mut base: u64, mut exp: u64) -> u64 {
    let mut acc = 1;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul(acc, base);
        }
        base = mul(base, base);
        exp >>= 1;
    }
    acc
}

pub fn inv(a: u64) -> u64 {
    debug_assert!(a != 0);
    pow(a, P - 2)
}

/// Uniform nonzero element.
pub fn random_nonzero<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    rng.gen_range(1..P)
}

/// Rows kept in echelon form: each stored row is scaled to 1 at its pivot and
/// is zero at the pivots of all rows inserted before it. Rows are only ever
/// appended, so `truncate` restores any earlier state.
#[derive(Debug, Clone)]
pub struct RankTracker {
    dim: usize,
    /// `rank × dim`, row-major
    rows: Vec<u64>,
    pivots: Vec<usize>,
    scratch: Vec<u64>,
}

impl RankTracker {
    pub fn new(dim: usize) -> Self {
        RankTracker { dim, rows: Vec::new(), pivots: Vec::new(), scratch: vec![0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn is_full(&self) -> bool {
        self.pivots.len() == self.dim
    }

    /// Drops rows back to the given rank.
    pub fn truncate(&mut self, rank: usize) {
        self.pivots.truncate(rank);
        self.rows.truncate(rank * self.dim);
    }

    /// Adds a row given as `(index, value)` pairs; returns whether the rank grew.
    pub fn insert_sparse(&mut self, entries: &[(usize, u64)]) -> bool {
        let mut v = std::mem::take(&mut self.scratch);
        v.iter_mut().for_each(|x| *x = 0);
        for &(i, x) in entries {
            v[i] = add(v[i], x);
        }
        let grew = self.reduce_and_push(&mut v);
        self.scratch = v;
        grew
    }

    pub fn insert(&mut self, mut v: Vec<u64>) -> bool {
        debug_assert_eq!(v.len(), self.dim);
        self.reduce_and_push(&mut v)
    }

    fn reduce_and_push(&mut self, v: &mut [u64]) -> bool {
        if self.is_full() {
            return false;
        }
        for (row, &p) in self.rows.chunks_exact(self.dim).zip(&self.pivots) {
            let f = v[p];
            if f != 0 {
                for (x, &r) in v.iter_mut().zip(row).skip(p) {
                    if r != 0 {
                        *x = sub(*x, mul(f, r));
                    }
                }
            }
        }
        let Some(p) = v.iter().position(|&x| x != 0) else {
            return false;
        };
        let s = inv(v[p]);
        self.rows.extend(v.iter().map(|&x| mul(x, s)));
        self.pivots.push(p);
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn basic_arithmetic() {
        assert_eq!(mul(P - 1, P - 1), 1);
        assert_eq!(add(P - 1, 1), 0);
        assert_eq!(sub(0, 1), P - 1);
        assert_eq!(mul(inv(12345), 12345), 1);
        assert_eq!(pow(3, 0), 1);
        assert_eq!(pow(2, 61), 1);
    }

    #[test]
    fn rank_of_dependent_rows() {
        let mut t = RankTracker::new(3);
        assert!(t.insert_sparse(&[(0, 1), (1, 2)]));
        assert!(t.insert_sparse(&[(1, 1), (2, 1)]));
        // row0 + 2*row1 - ... : (1, 4, 2) = row0 + 2 row1
        assert!(!t.insert(vec![1, 4, 2]));
        assert_eq!(t.rank(), 2);
        assert!(t.insert(vec![0, 0, 5]));
        assert!(t.is_full());
        assert!(!t.insert(vec![1, 1, 1]));
    }

    /// Rank by plain Gaussian elimination on a copy of all rows.
    fn rank_direct(rows: &[Vec<u64>], dim: usize) -> usize {
        let mut m = rows.to_vec();
        let mut r = 0;
        for c in 0..dim {
            let Some(piv) = (r..m.len()).find(|&i| m[i][c] != 0) else { continue };
            m.swap(r, piv);
            let s = inv(m[r][c]);
            let pr: Vec<u64> = m[r].iter().map(|&x| mul(x, s)).collect();
            for i in 0..m.len() {
                if i != r && m[i][c] != 0 {
                    let f = m[i][c];
                    for k in 0..dim {
                        m[i][k] = sub(m[i][k], mul(f, pr[k]));
                    }
                }
            }
            m[r] = pr;
            r += 1;
        }
        r
    }

    proptest! {
        #[test]
        fn incremental_rank_matches_elimination(seed in any::<u64>(), dim in 1usize..8, nrows in 0usize..10) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            // small entries so that dependencies actually occur
            let rows: Vec<Vec<u64>> = (0..nrows).map(|_| (0..dim).map(|_| rng.gen_range(0..3)).collect()).collect();
            let mut t = RankTracker::new(dim);
            for r in &rows {
                t.insert(r.clone());
            }
            prop_assert_eq!(t.rank(), rank_direct(&rows, dim));
        }
    }
}
