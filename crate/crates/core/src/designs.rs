//! Parallel classes, collections of them, incidence matrices and the cyclic
//! placement of symbols onto workers.

use serde::{Deserialize, Serialize};

use crate::error::{divisibility, param, Result};

/// A partition of `{0, .., num_points-1}` into equal-size blocks.
///
/// Each block is stored sorted. Block order is kept as given, since the
/// cyclic placement reads blocks in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelClass {
    num_points: usize,
    blocks: Vec<Vec<usize>>,
}

impl ParallelClass {
    pub fn new(num_points: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(param("a parallel class needs at least one block"));
        }
        let size = blocks[0].len();
        if size == 0 {
            return Err(param("empty block"));
        }
        let mut seen = vec![false; num_points];
        for b in &mut blocks {
            if b.len() != size {
                return Err(param("blocks of a parallel class must have equal size"));
            }
            b.sort_unstable();
            for &p in b.iter() {
                if p >= num_points {
                    return Err(param(format!("point {p} outside 0..{num_points}")));
                }
                if seen[p] {
                    return Err(param(format!("point {p} appears in two blocks")));
                }
                seen[p] = true;
            }
        }
        if let Some(p) = seen.iter().position(|s| !s) {
            return Err(param(format!("point {p} is not covered")));
        }
        Ok(ParallelClass { num_points, blocks })
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn block_size(&self) -> usize {
        self.blocks[0].len()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &[usize] {
        &self.blocks[i]
    }

    /// Same blocks ordered by their smallest point.
    pub fn canonical(&self) -> ParallelClass {
        let mut blocks = self.blocks.clone();
        blocks.sort_by_key(|b| b[0]);
        ParallelClass { num_points: self.num_points, blocks }
    }
}

/// An ordered list of parallel classes on a common point set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DesignSetJson", into = "DesignSetJson")]
pub struct DesignSet {
    points: usize,
    classes: Vec<ParallelClass>,
}

#[derive(Serialize, Deserialize)]
struct DesignSetJson {
    points: usize,
    classes: Vec<Vec<Vec<usize>>>,
}

impl TryFrom<DesignSetJson> for DesignSet {
    type Error = crate::error::Error;

    fn try_from(j: DesignSetJson) -> Result<Self> {
        let classes = j
            .classes
            .into_iter()
            .map(|c| ParallelClass::new(j.points, c))
            .collect::<Result<Vec<_>>>()?;
        DesignSet::new(classes)
    }
}

impl From<DesignSet> for DesignSetJson {
    fn from(d: DesignSet) -> Self {
        DesignSetJson {
            points: d.points,
            classes: d.classes.into_iter().map(|c| c.blocks).collect(),
        }
    }
}

impl DesignSet {
    pub fn new(classes: Vec<ParallelClass>) -> Result<Self> {
        let first = classes.first().ok_or_else(|| param("a design set needs a class"))?;
        let (points, size) = (first.num_points, first.block_size());
        if classes.iter().any(|c| c.num_points != points || c.block_size() != size) {
            return Err(param("classes differ in point count or block size"));
        }
        Ok(DesignSet { points, classes })
    }

    pub fn num_points(&self) -> usize {
        self.points
    }

    pub fn block_size(&self) -> usize {
        self.classes[0].block_size()
    }

    pub fn classes(&self) -> &[ParallelClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Subset of the classes, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<DesignSet> {
        let classes = indices
            .iter()
            .map(|&i| {
                self.classes
                    .get(i)
                    .cloned()
                    .ok_or_else(|| param(format!("class {i} of {}", self.classes.len())))
            })
            .collect::<Result<Vec<_>>>()?;
        DesignSet::new(classes)
    }

    /// Whether all classes hold the same blocks.
    pub fn is_single_class(&self) -> bool {
        let c0 = self.classes[0].canonical();
        self.classes.iter().all(|c| c.canonical() == c0)
    }

    /// Largest intersection between blocks of two different classes
    /// (0 for a single class).
    pub fn max_cross_intersection(&self) -> usize {
        let mut best = 0;
        for (i, ci) in self.classes.iter().enumerate() {
            for cj in &self.classes[i + 1..] {
                for a in &ci.blocks {
                    for b in &cj.blocks {
                        best = best.max(a.iter().filter(|p| b.contains(p)).count());
                    }
                }
            }
        }
        best
    }

    /// Every block of every class, class by class.
    pub fn all_blocks(&self) -> Vec<Vec<usize>> {
        self.classes.iter().flat_map(|c| c.blocks.iter().cloned()).collect()
    }

    pub fn incidence(&self) -> Vec<Vec<u8>> {
        incidence_matrix(self.points, &self.all_blocks())
    }
}

/// Symbols placed on workers so that worker `j` holds `j, j+1, .., j+ell-1 (mod delta)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CyclicLayout {
    pub num_symbols: usize,
    pub num_workers: usize,
    pub per_worker: usize,
    pub assignment: Vec<Vec<usize>>,
}

pub fn cyclic_assignment(delta: usize, n: usize, ell: usize) -> Result<CyclicLayout> {
    if delta == 0 {
        return Err(param("need at least one symbol"));
    }
    if ell > delta {
        return Err(param(format!("{ell} symbols per worker exceeds {delta}")));
    }
    let assignment = (0..n).map(|j| (0..ell).map(|t| (j + t) % delta).collect()).collect();
    Ok(CyclicLayout { num_symbols: delta, num_workers: n, per_worker: ell, assignment })
}

/// Largest number of symbols that can be processed from the cyclic layout
/// with `delta` workers and `ell` symbols each while one fixed symbol is
/// processed exactly `c` times.
pub fn alpha_c(delta: u64, ell: u64, c: u64) -> Result<u64> {
    if ell > delta {
        return Err(param(format!("ell = {ell} exceeds delta = {delta}")));
    }
    if c > ell {
        return Err(param(format!("c = {c} exceeds ell = {ell}")));
    }
    let extra: u64 = (0..c).map(|i| ell - i).sum();
    Ok(delta * ell - ell * (ell + 1) / 2 + extra)
}

/// `count` copies of `{0..beta-1}, {beta..2beta-1}, ...`.
pub fn trivial_classes(delta: usize, beta: usize, count: usize) -> Result<DesignSet> {
    if beta == 0 || !delta.is_multiple_of(beta) {
        return Err(divisibility(format!("block size {beta} does not divide {delta}")));
    }
    let blocks: Vec<Vec<usize>> = (0..delta / beta).map(|i| (i * beta..(i + 1) * beta).collect()).collect();
    let class = ParallelClass::new(delta, blocks)?;
    DesignSet::new(vec![class; count])
}

/// Two classes of pairs on an even point set: block `i` is `{2i, 2i+1}` in
/// the first and `{2i, 2i+5} (mod delta)` in the second.
pub fn shifted_pair_classes(delta: usize) -> Result<DesignSet> {
    if !delta.is_multiple_of(2) || delta < 8 {
        return Err(param(format!("shifted pairs need an even point count >= 8, got {delta}")));
    }
    let p0 = (0..delta / 2).map(|i| vec![2 * i, 2 * i + 1]).collect();
    let p1 = (0..delta / 2).map(|i| vec![2 * i, (2 * i + 5) % delta]).collect();
    DesignSet::new(vec![ParallelClass::new(delta, p0)?, ParallelClass::new(delta, p1)?])
}

/// The consecutive class followed by a class orthogonal to it: with
/// `delta = beta·m` and `m >= beta`, block `j` of the second class takes
/// offset `k` from consecutive block `j + k (mod m)`, for `k < beta`. Any
/// two blocks from different classes share at most one point.
pub fn transversal_classes(delta: usize, beta: usize) -> Result<DesignSet> {
    if beta == 0 || !delta.is_multiple_of(beta) {
        return Err(divisibility(format!("block size {beta} does not divide {delta}")));
    }
    let m = delta / beta;
    if m < beta {
        return Err(param(format!("transversal class needs delta/beta >= beta, got {m} < {beta}")));
    }
    let first = trivial_classes(delta, beta, 1)?.classes()[0].clone();
    let blocks = (0..m).map(|j| (0..beta).map(|k| ((j + k) % m) * beta + k).collect()).collect();
    DesignSet::new(vec![first, ParallelClass::new(delta, blocks)?])
}

const KIRKMAN: [[[usize; 3]; 5]; 7] = [
    [[0, 1, 2], [3, 7, 11], [4, 9, 14], [5, 10, 12], [6, 8, 13]],
    [[0, 3, 4], [1, 7, 9], [2, 12, 13], [5, 8, 14], [6, 10, 11]],
    [[0, 5, 6], [1, 8, 10], [2, 11, 14], [3, 9, 13], [4, 7, 12]],
    [[0, 7, 8], [1, 11, 13], [2, 4, 5], [3, 10, 14], [6, 9, 12]],
    [[0, 9, 10], [1, 12, 14], [2, 3, 6], [4, 8, 11], [5, 7, 13]],
    [[0, 11, 12], [1, 3, 5], [2, 8, 9], [4, 10, 13], [6, 7, 14]],
    [[0, 13, 14], [1, 4, 6], [2, 7, 10], [3, 8, 12], [5, 9, 11]],
];

/// A resolution of the Kirkman triple system on 15 points into 7 classes.
pub fn kirkman_classes() -> DesignSet {
    let classes = KIRKMAN
        .iter()
        .map(|c| ParallelClass::new(15, c.iter().map(|b| b.to_vec()).collect()).expect("valid class"))
        .collect();
    DesignSet::new(classes).expect("valid design")
}

/// Points-by-blocks 0/1 matrix.
pub fn incidence_matrix(points: usize, blocks: &[Vec<usize>]) -> Vec<Vec<u8>> {
    let mut m = vec![vec![0u8; blocks.len()]; points];
    for (j, b) in blocks.iter().enumerate() {
        for &p in b {
            m[p][j] = 1;
        }
    }
    m
}

/// Class on `Δ_A·Δ_B` points whose block `(i, j)` (row-major) is
/// `{p·Δ_B + q : p in a_i, q in b_j}`.
pub fn product_class(a: &ParallelClass, b: &ParallelClass) -> ParallelClass {
    let db = b.num_points;
    let mut blocks = Vec::with_capacity(a.num_blocks() * b.num_blocks());
    for ba in &a.blocks {
        for bb in &b.blocks {
            let mut blk: Vec<usize> = ba.iter().flat_map(|&p| bb.iter().map(move |&q| p * db + q)).collect();
            blk.sort_unstable();
            blocks.push(blk);
        }
    }
    ParallelClass { num_points: a.num_points * db, blocks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive maximum of processed symbols over all prefix states of the
    /// cyclic layout, with symbol 0 processed exactly `c` times.
    fn alpha_brute(delta: usize, ell: usize, c: usize) -> Option<usize> {
        let lay = cyclic_assignment(delta, delta, ell).unwrap();
        let mut w = vec![0usize; delta];
        let mut best = None;
        loop {
            let hits: usize = (0..delta).map(|j| lay.assignment[j][..w[j]].iter().filter(|&&s| s == 0).count()).sum();
            if hits == c {
                let tot: usize = w.iter().sum();
                best = Some(best.map_or(tot, |b: usize| b.max(tot)));
            }
            let mut k = 0;
            while k < delta && w[k] == ell {
                w[k] = 0;
                k += 1;
            }
            if k == delta {
                return best;
            }
            w[k] += 1;
        }
    }

    /// Same quantity by a per-worker knapsack: each worker picks a prefix,
    /// contributing its length and whether it covers symbol 0.
    fn alpha_dp(delta: usize, ell: usize, c: usize) -> Option<usize> {
        let lay = cyclic_assignment(delta, delta, ell).unwrap();
        let mut dp: Vec<Option<usize>> = vec![None; c + 1];
        dp[0] = Some(0);
        for j in 0..delta {
            let mut next = vec![None; c + 1];
            for (h, v) in dp.iter().enumerate() {
                let Some(v) = v else { continue };
                for wj in 0..=ell {
                    let hit = lay.assignment[j][..wj].contains(&0) as usize;
                    if h + hit <= c {
                        let cand = v + wj;
                        next[h + hit] = Some(next[h + hit].map_or(cand, |x: usize| x.max(cand)));
                    }
                }
            }
            dp = next;
        }
        dp[c]
    }

    #[test]
    fn cyclic_examples() {
        let l = cyclic_assignment(5, 5, 3).unwrap();
        assert_eq!(l.assignment[0], vec![0, 1, 2]);
        assert_eq!(l.assignment[3], vec![3, 4, 0]);
        let l = cyclic_assignment(4, 4, 1).unwrap();
        for j in 0..4 {
            assert_eq!(l.assignment[j], vec![j]);
        }
        let l = cyclic_assignment(6, 6, 4).unwrap();
        for s in 0..6 {
            let mut pos: Vec<usize> = Vec::new();
            for w in &l.assignment {
                pos.extend(w.iter().enumerate().filter(|(_, &x)| x == s).map(|(p, _)| p));
            }
            pos.sort();
            assert_eq!(pos, vec![0, 1, 2, 3]);
        }
        assert!(cyclic_assignment(3, 3, 4).is_err());
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_c(5, 3, 0).unwrap(), 9);
        assert_eq!(alpha_brute(5, 3, 0), Some(9));
        assert_eq!(alpha_c(7, 4, 4).unwrap(), 28);
        assert_eq!(alpha_c(12, 3, 1).unwrap(), 33);
        assert_eq!(alpha_dp(12, 3, 1), Some(33));
        assert!(alpha_c(5, 3, 4).is_err());
    }

    #[test]
    fn alpha_matches_search() {
        for delta in 1..=8 {
            for ell in 1..=delta {
                for c in 0..=ell {
                    let closed = alpha_c(delta as u64, ell as u64, c as u64).unwrap() as usize;
                    assert_eq!(Some(closed), alpha_dp(delta, ell, c), "{delta} {ell} {c}");
                    if delta <= 6 {
                        assert_eq!(Some(closed), alpha_brute(delta, ell, c), "{delta} {ell} {c}");
                    }
                }
            }
        }
    }

    #[test]
    fn trivial_examples() {
        let d = trivial_classes(12, 3, 1).unwrap();
        assert_eq!(d.classes()[0].blocks(), &[vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8], vec![9, 10, 11]]);
        let d = trivial_classes(4, 1, 1).unwrap();
        assert_eq!(d.incidence(), incidence_matrix(4, &[vec![0], vec![1], vec![2], vec![3]]));
        for (i, row) in d.incidence().iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, (i == j) as u8);
            }
        }
        let d = trivial_classes(6, 2, 3).unwrap();
        assert_eq!(d.len(), 3);
        assert!(d.is_single_class());
        assert!(trivial_classes(10, 3, 1).is_err());
    }

    #[test]
    fn transversal_pair_is_orthogonal() {
        for (delta, beta) in [(12, 3), (15, 3), (8, 2), (20, 4), (9, 3)] {
            let d = transversal_classes(delta, beta).unwrap();
            assert_eq!(d.len(), 2);
            assert_eq!(d.max_cross_intersection(), 1);
        }
        let d = transversal_classes(12, 3).unwrap();
        assert_eq!(d.classes()[1].block(0), &[0, 4, 8]);
        assert!(transversal_classes(8, 4).is_err());
    }

    #[test]
    fn shifted_pairs() {
        let d = shifted_pair_classes(8).unwrap();
        assert_eq!(d.classes()[0].blocks(), &[vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]]);
        assert_eq!(d.classes()[1].blocks(), &[vec![0, 5], vec![2, 7], vec![1, 4], vec![3, 6]]);
        assert_eq!(d.max_cross_intersection(), 1);
        assert!(shifted_pair_classes(10).is_ok());
        assert!(shifted_pair_classes(9).is_err());
        assert!(shifted_pair_classes(6).is_err());
        for delta in (8..=20).step_by(2) {
            assert!(shifted_pair_classes(delta).unwrap().max_cross_intersection() <= 1);
        }
    }

    #[test]
    fn kirkman_properties() {
        let d = kirkman_classes();
        assert_eq!(d.len(), 7);
        assert!(d.classes().iter().all(|c| c.num_blocks() == 5));
        let mut pairs = vec![vec![0; 15]; 15];
        for b in d.all_blocks() {
            for &x in &b {
                for &y in &b {
                    if x < y {
                        pairs[x][y] += 1;
                    }
                }
            }
        }
        for x in 0..15 {
            for y in x + 1..15 {
                assert_eq!(pairs[x][y], 1);
            }
        }
        assert_eq!(d.max_cross_intersection(), 1);
        let inc = d.incidence();
        assert_eq!((inc.len(), inc[0].len()), (15, 35));
        for j in 0..35 {
            assert_eq!(inc.iter().map(|r| r[j] as usize).sum::<usize>(), 3);
        }
    }

    #[test]
    fn incidence_of_pair_design() {
        let blocks = vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]];
        let expect = vec![
            vec![1, 1, 1, 0, 0, 0],
            vec![1, 0, 0, 1, 1, 0],
            vec![0, 1, 0, 1, 0, 1],
            vec![0, 0, 1, 0, 1, 1],
        ];
        assert_eq!(incidence_matrix(4, &blocks), expect);
    }

    #[test]
    fn product_of_pairs() {
        let p = trivial_classes(6, 2, 1).unwrap().classes()[0].clone();
        let pc = product_class(&p, &p);
        assert_eq!(pc.num_blocks(), 9);
        assert_eq!(pc.block_size(), 4);
        assert_eq!(pc.block(0), &[0, 1, 6, 7]);
        assert!(ParallelClass::new(36, pc.blocks().to_vec()).is_ok());

        let s3 = trivial_classes(3, 1, 1).unwrap().classes()[0].clone();
        let s4 = trivial_classes(4, 1, 1).unwrap().classes()[0].clone();
        let ps = product_class(&s3, &s4);
        assert!(ps.blocks().iter().enumerate().all(|(i, b)| b == &vec![i]));
    }

    #[test]
    fn product_incidence_is_columnwise_kronecker() {
        let a = shifted_pair_classes(8).unwrap().classes()[1].clone();
        let b = trivial_classes(6, 3, 1).unwrap().classes()[0].clone();
        let pc = product_class(&a, &b);
        let na = incidence_matrix(8, a.blocks());
        let nb = incidence_matrix(6, b.blocks());
        let np = incidence_matrix(48, pc.blocks());
        for i in 0..a.num_blocks() {
            for j in 0..b.num_blocks() {
                for p in 0..8 {
                    for q in 0..6 {
                        assert_eq!(np[p * 6 + q][i * b.num_blocks() + j], na[p][i] * nb[q][j]);
                    }
                }
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let d = shifted_pair_classes(8).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.starts_with("{\"points\":8,\"classes\":[[[0,1]"));
        let back: DesignSet = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        let bad = r#"{"points":4,"classes":[[[0,1],[1,2]]]}"#;
        assert!(serde_json::from_str::<DesignSet>(bad).is_err());
    }

    proptest! {
        #[test]
        fn random_partitions_validate(delta_blocks in 1usize..8, beta in 1usize..5, seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let delta = delta_blocks * beta;
            let mut pts: Vec<usize> = (0..delta).collect();
            pts.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let blocks: Vec<Vec<usize>> = pts.chunks(beta).map(|c| c.to_vec()).collect();
            let class = ParallelClass::new(delta, blocks).unwrap();
            let inc = incidence_matrix(delta, class.blocks());
            prop_assert!(inc.iter().all(|r| r.iter().map(|&x| x as usize).sum::<usize>() == 1));
            let pc = product_class(&class, &class);
            prop_assert!(ParallelClass::new(delta * delta, pc.blocks().to_vec()).is_ok());
        }
    }
}
