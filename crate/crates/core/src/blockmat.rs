//! Sparse matrices, block-column partitioning and encoding of block-columns
//! by scalar linear combinations.
//!
//! Storage is a coordinate list sorted by `(col, row)`, so every block-column
//! is a contiguous run of entries.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, shape, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    /// `(row, col, value)` sorted by `(col, row)`, no duplicates, no explicit zeros.
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    /// Builds a matrix from unsorted triplets. Explicit zeros are dropped;
    /// repeated coordinates are rejected rather than summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut entries: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        for &(r, c, _) in &entries {
            if r >= rows || c >= cols {
                return Err(shape(format!("entry ({r}, {c}) outside {rows}x{cols}")));
            }
        }
        entries.sort_by_key(|a| (a.1, a.0));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(param(format!("duplicate entry at ({}, {})", w[0].0, w[0].1)));
        }
        entries.retain(|e| e.2 != 0.0);
        Ok(SparseMatrix { rows, cols, entries })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseMatrix { rows, cols, entries: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix { rows: n, cols: n, entries: (0..n).map(|i| (i, i, 1.0)).collect() }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut entries = Vec::new();
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                let v = m[(r, c)];
                if v != 0.0 {
                    entries.push((r, c, v));
                }
            }
        }
        SparseMatrix { rows: m.nrows(), cols: m.ncols(), entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn density(&self) -> f64 {
        self.nnz() as f64 / (self.rows as f64 * self.cols as f64)
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v;
        }
        m
    }

    /// Entries of columns `start..end`, re-indexed to start at column 0.
    pub fn column_range(&self, start: usize, end: usize) -> SparseMatrix {
        let lo = self.entries.partition_point(|e| e.1 < start);
        let hi = self.entries.partition_point(|e| e.1 < end);
        SparseMatrix {
            rows: self.rows,
            cols: end - start,
            entries: self.entries[lo..hi].iter().map(|&(r, c, v)| (r, c - start, v)).collect(),
        }
    }

    pub fn block(&self, partition: &BlockPartition, index: usize) -> Result<SparseMatrix> {
        partition.check(self)?;
        if index >= partition.num_blocks {
            return Err(shape(format!("block {index} of {}", partition.num_blocks)));
        }
        let w = partition.block_width();
        Ok(self.column_range(index * w, (index + 1) * w))
    }

    /// Horizontal concatenation; all blocks must share a row count.
    pub fn hstack(blocks: &[SparseMatrix]) -> Result<SparseMatrix> {
        let rows = blocks.first().map_or(0, |b| b.rows);
        let mut entries = Vec::new();
        let mut offset = 0;
        for b in blocks {
            if b.rows != rows {
                return Err(shape("hstack with differing row counts"));
            }
            entries.extend(b.entries.iter().map(|&(r, c, v)| (r, c + offset, v)));
            offset += b.cols;
        }
        Ok(SparseMatrix { rows, cols: offset, entries })
    }

    /// Number of stored entries in each row.
    pub fn row_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.rows];
        for &(r, _, _) in &self.entries {
            counts[r] += 1;
        }
        counts
    }

    /// Row-major view: for each row the `(col, value)` pairs.
    fn by_row(&self) -> Vec<Vec<(usize, f64)>> {
        let mut out = vec![Vec::new(); self.rows];
        for &(r, c, v) in &self.entries {
            out[r].push((c, v));
        }
        out
    }

    /// Reads the coordinate text format: a header `rows cols nnz` followed by
    /// `row col value` lines, 0-based, `#` starts a comment.
    pub fn read_triplets<R: BufRead>(reader: R) -> Result<SparseMatrix> {
        let mut header: Option<(usize, usize, usize)> = None;
        let mut entries = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            let bad = |msg: &str| Error::Parse { line: idx + 1, msg: msg.to_string() };
            if fields.len() != 3 {
                return Err(bad("expected three fields"));
            }
            match header {
                None => {
                    let p = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header"));
                    header = Some((p(fields[0])?, p(fields[1])?, p(fields[2])?));
                }
                Some(_) => {
                    let r = fields[0].parse::<usize>().map_err(|_| bad("bad row index"))?;
                    let c = fields[1].parse::<usize>().map_err(|_| bad("bad column index"))?;
                    let v = fields[2].parse::<f64>().map_err(|_| bad("bad value"))?;
                    entries.push((r, c, v));
                }
            }
        }
        let (rows, cols, nnz) = header.ok_or(Error::Parse { line: 0, msg: "missing header".into() })?;
        if entries.len() != nnz {
            return Err(Error::Parse {
                line: 0,
                msg: format!("header announces {nnz} entries, found {}", entries.len()),
            });
        }
        SparseMatrix::from_triplets(rows, cols, entries)
    }

    pub fn write_triplets<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.rows, self.cols, self.nnz())?;
        for &(r, c, v) in &self.entries {
            writeln!(w, "{r} {c} {v:e}")?;
        }
        Ok(())
    }
}

/// Equal-width split of the columns of a matrix into `num_blocks` block-columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    total_cols: usize,
    num_blocks: usize,
}

impl BlockPartition {
    pub fn new(total_cols: usize, num_blocks: usize) -> Result<Self> {
        if num_blocks == 0 || !total_cols.is_multiple_of(num_blocks) {
            return Err(crate::error::divisibility(format!(
                "{num_blocks} blocks do not divide {total_cols} columns"
            )));
        }
        Ok(BlockPartition { total_cols, num_blocks })
    }

    pub fn total_cols(&self) -> usize {
        self.total_cols
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn block_width(&self) -> usize {
        self.total_cols / self.num_blocks
    }

    fn check(&self, m: &SparseMatrix) -> Result<()> {
        if m.cols != self.total_cols {
            return Err(shape(format!(
                "partition of {} columns applied to a matrix with {}",
                self.total_cols, m.cols
            )));
        }
        Ok(())
    }
}

/// Dense storage of the scalars that combine block-columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    values: Vec<f64>,
}

impl CoefficientVector {
    pub fn new(values: Vec<f64>) -> Self {
        CoefficientVector { values }
    }

    pub fn unit(len: usize, index: usize) -> Self {
        let mut values = vec![0.0; len];
        values[index] = 1.0;
        CoefficientVector { values }
    }

    /// Vector of length `len` that is zero outside `support`.
    pub fn from_support(len: usize, support: &[usize], values: &[f64]) -> Result<Self> {
        if support.len() != values.len() {
            return Err(shape("support and value lists differ in length"));
        }
        let mut v = vec![0.0; len];
        for (&i, &x) in support.iter().zip(values) {
            if i >= len {
                return Err(shape(format!("support index {i} outside length {len}")));
            }
            v[i] = x;
        }
        Ok(CoefficientVector { values: v })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> Vec<usize> {
        self.values.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect()
    }
}

/// Random matrix where each entry is present independently with probability
/// `density`, with values uniform on [-1, 1].
pub fn generate_sparse(rows: usize, cols: usize, density: f64, seed: u64) -> Result<SparseMatrix> {
    if rows == 0 || cols == 0 {
        return Err(param("matrix dimensions must be positive"));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(param(format!("density {density} not in (0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = rows as u64 * cols as u64;
    let mut entries = Vec::with_capacity((total as f64 * density * 1.05) as usize);
    let value = |rng: &mut ChaCha8Rng| loop {
        let v: f64 = rng.gen_range(-1.0..=1.0);
        if v != 0.0 {
            return v;
        }
    };
    if density >= 1.0 {
        for idx in 0..total {
            entries.push(((idx % rows as u64) as usize, (idx / rows as u64) as usize, value(&mut rng)));
        }
    } else {
        // Geometric gaps between present entries, column-major.
        let log_q = (1.0 - density).ln();
        let mut idx: u64 = 0;
        loop {
            let u: f64 = 1.0 - rng.gen::<f64>();
            let gap = (u.ln() / log_q).floor();
            if gap >= (total - idx) as f64 {
                break;
            }
            idx += gap as u64;
            entries.push(((idx % rows as u64) as usize, (idx / rows as u64) as usize, value(&mut rng)));
            idx += 1;
            if idx >= total {
                break;
            }
        }
    }
    Ok(SparseMatrix { rows, cols, entries })
}

/// `sum_i coeffs[i] * M_i` over the block-columns `M_i` of `matrix`.
pub fn encode_block(
    matrix: &SparseMatrix,
    partition: &BlockPartition,
    coeffs: &CoefficientVector,
) -> Result<SparseMatrix> {
    partition.check(matrix)?;
    if coeffs.len() != partition.num_blocks {
        return Err(shape(format!(
            "{} coefficients for {} blocks",
            coeffs.len(),
            partition.num_blocks
        )));
    }
    let w = partition.block_width();
    let mut acc: Vec<(usize, usize, f64)> = Vec::new();
    for (i, &a) in coeffs.values().iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        let lo = matrix.entries.partition_point(|e| e.1 < i * w);
        let hi = matrix.entries.partition_point(|e| e.1 < (i + 1) * w);
        acc.extend(matrix.entries[lo..hi].iter().map(|&(r, c, v)| (r, c - i * w, a * v)));
    }
    acc.sort_by_key(|x| (x.1, x.0));
    let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(acc.len());
    for (r, c, v) in acc {
        match entries.last_mut() {
            Some(last) if last.0 == r && last.1 == c => last.2 += v,
            _ => entries.push((r, c, v)),
        }
    }
    entries.retain(|e| e.2 != 0.0);
    Ok(SparseMatrix { rows: matrix.rows, cols: w, entries })
}

/// `M^T x`.
pub fn spmv_t(matrix: &SparseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != matrix.rows {
        return Err(shape(format!("vector of length {} against {} rows", x.len(), matrix.rows)));
    }
    let mut y = vec![0.0; matrix.cols];
    for &(r, c, v) in &matrix.entries {
        y[c] += v * x[r];
    }
    Ok(y)
}

/// `A^T B`, computed column of `A` by column with a sparse accumulator.
pub fn spmm_t(a: &SparseMatrix, b: &SparseMatrix) -> Result<SparseMatrix> {
    if a.rows != b.rows {
        return Err(shape(format!("A has {} rows, B has {}", a.rows, b.rows)));
    }
    let b_rows = b.by_row();
    let mut acc = vec![0.0; b.cols];
    let mut touched = vec![false; b.cols];
    let mut pattern: Vec<usize> = Vec::new();
    let mut entries = Vec::new();
    let mut start = 0;
    while start < a.entries.len() {
        let i = a.entries[start].1;
        let end = start + a.entries[start..].iter().take_while(|e| e.1 == i).count();
        for &(k, _, av) in &a.entries[start..end] {
            for &(j, bv) in &b_rows[k] {
                if !touched[j] {
                    touched[j] = true;
                    pattern.push(j);
                }
                acc[j] += av * bv;
            }
        }
        for &j in &pattern {
            if acc[j] != 0.0 {
                entries.push((i, j, acc[j]));
            }
            acc[j] = 0.0;
            touched[j] = false;
        }
        pattern.clear();
        start = end;
    }
    SparseMatrix::from_triplets(a.cols, b.cols, entries)
}

/// Multiply-add count of `A^T B` with row-wise outer products:
/// `sum_k nnz(row k of A) * nnz(row k of B)`.
pub fn spgemm_flops(a: &SparseMatrix, b: &SparseMatrix) -> Result<u64> {
    if a.rows != b.rows {
        return Err(shape(format!("A has {} rows, B has {}", a.rows, b.rows)));
    }
    let ra = a.row_counts();
    let rb = b.row_counts();
    Ok(ra.iter().zip(&rb).map(|(&x, &y)| x as u64 * y as u64).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_t_mul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(a.ncols(), b.ncols());
        for i in 0..a.ncols() {
            for j in 0..b.ncols() {
                let mut s = 0.0;
                for k in 0..a.nrows() {
                    s += a[(k, i)] * b[(k, j)];
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    #[test]
    fn full_density_is_full() {
        let m = generate_sparse(10, 10, 1.0, 3).unwrap();
        assert_eq!(m.nnz(), 100);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_sparse(100, 100, 0.05, 42).unwrap();
        let b = generate_sparse(100, 100, 0.05, 42).unwrap();
        assert_eq!(a.entries(), b.entries());
        let c = generate_sparse(100, 100, 0.05, 43).unwrap();
        assert_ne!(a.entries(), c.entries());
    }

    #[test]
    fn large_matrix_density() {
        let m = generate_sparse(10_000, 10_000, 0.03, 5).unwrap();
        let d = m.density();
        assert!((0.027..=0.033).contains(&d), "{d}");
    }

    #[test]
    fn encoded_density_follows_support_size() {
        let sigma = 0.03;
        for beta in [2usize, 3] {
            let mut total = 0.0;
            for seed in 0..20 {
                let m = generate_sparse(2000, 500 * beta, sigma, 100 + seed).unwrap();
                let p = BlockPartition::new(500 * beta, beta).unwrap();
                let c = CoefficientVector::new((0..beta).map(|i| 0.5 + i as f64).collect());
                total += encode_block(&m, &p, &c).unwrap().density();
            }
            let mean = total / 20.0;
            let expect = 1.0 - (1.0f64 - sigma).powi(beta as i32);
            assert!(((mean - expect) / expect).abs() < 0.1, "{beta}: {mean} vs {expect}");
        }
    }

    proptest::proptest! {
        #[test]
        fn encoding_is_linear(seed in 0u64..1000, c1 in proptest::collection::vec(-2.0f64..2.0, 4),
                              c2 in proptest::collection::vec(-2.0f64..2.0, 4)) {
            let m = generate_sparse(25, 16, 0.3, seed).unwrap();
            let p = BlockPartition::new(16, 4).unwrap();
            let sum: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| a + b).collect();
            let lhs = encode_block(&m, &p, &CoefficientVector::new(sum)).unwrap().to_dense();
            let r1 = encode_block(&m, &p, &CoefficientVector::new(c1)).unwrap().to_dense();
            let r2 = encode_block(&m, &p, &CoefficientVector::new(c2)).unwrap().to_dense();
            proptest::prop_assert!((lhs - r1 - r2).abs().max() < 1e-12);
        }
    }

    #[test]
    fn bad_density_rejected() {
        assert!(matches!(generate_sparse(5, 5, 0.0, 1), Err(Error::Parameter(_))));
        assert!(matches!(generate_sparse(5, 5, 1.5, 1), Err(Error::Parameter(_))));
        assert!(generate_sparse(0, 5, 0.5, 1).is_err());
    }

    #[test]
    fn duplicates_rejected() {
        let r = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0)]);
        assert!(matches!(r, Err(Error::Parameter(_))));
        let r = SparseMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]);
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn unit_coefficients_copy_a_block() {
        let m = generate_sparse(20, 12, 0.3, 7).unwrap();
        let p = BlockPartition::new(12, 4).unwrap();
        for j in 0..4 {
            let enc = encode_block(&m, &p, &CoefficientVector::unit(4, j)).unwrap();
            assert_eq!(enc, m.block(&p, j).unwrap());
        }
    }

    #[test]
    fn disjoint_blocks_union_nnz() {
        // rows 0..3 are used by block 0, rows 3..6 by block 1, rows 6..9 by block 2
        let mut t = Vec::new();
        for b in 0..3 {
            for r in 0..3 {
                t.push((3 * b + r, 2 * b + (r % 2), 1.0 + r as f64));
            }
        }
        let m = SparseMatrix::from_triplets(9, 8, t).unwrap();
        let p = BlockPartition::new(8, 4).unwrap();
        let c = CoefficientVector::from_support(4, &[0, 1, 2], &[0.5, -2.0, 1.5]).unwrap();
        let enc = encode_block(&m, &p, &c).unwrap();
        let expect: usize = (0..3).map(|j| m.block(&p, j).unwrap().nnz()).sum();
        assert_eq!(enc.nnz(), expect);
    }

    #[test]
    fn length_mismatch_is_shape_error() {
        let m = generate_sparse(4, 4, 0.5, 1).unwrap();
        let p = BlockPartition::new(4, 2).unwrap();
        assert!(matches!(
            encode_block(&m, &p, &CoefficientVector::unit(3, 0)),
            Err(Error::Shape(_))
        ));
        assert!(matches!(BlockPartition::new(10, 3), Err(Error::Divisibility(_))));
    }

    #[test]
    fn hstack_of_blocks_is_identity_round_trip() {
        let m = generate_sparse(30, 24, 0.2, 9).unwrap();
        let p = BlockPartition::new(24, 6).unwrap();
        let blocks: Vec<_> = (0..6).map(|j| m.block(&p, j).unwrap()).collect();
        assert_eq!(SparseMatrix::hstack(&blocks).unwrap(), m);
    }

    #[test]
    fn spmv_small_cases() {
        let id = SparseMatrix::identity(3);
        assert_eq!(spmv_t(&id, &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let z = SparseMatrix::zeros(4, 2);
        assert_eq!(spmv_t(&z, &[1.0; 4]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(spmv_t(&id, &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn spmv_matches_dense() {
        let m = generate_sparse(50, 40, 0.2, 11).unwrap();
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let y = spmv_t(&m, &x).unwrap();
        let d = m.to_dense();
        for c in 0..40 {
            let s: f64 = (0..50).map(|r| d[(r, c)] * x[r]).sum();
            assert!((s - y[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn spmm_small_cases() {
        let b = generate_sparse(5, 3, 0.5, 2).unwrap();
        assert_eq!(spmm_t(&SparseMatrix::identity(5), &b).unwrap(), b);
        assert_eq!(spmm_t(&SparseMatrix::zeros(5, 4), &b).unwrap().nnz(), 0);
        assert!(spmm_t(&SparseMatrix::zeros(4, 4), &b).is_err());
    }

    #[test]
    fn spmm_matches_dense() {
        let a = generate_sparse(40, 30, 0.15, 5).unwrap();
        let b = generate_sparse(40, 20, 0.15, 6).unwrap();
        let c = spmm_t(&a, &b).unwrap().to_dense();
        let d = dense_t_mul(&a.to_dense(), &b.to_dense());
        assert!((c - d).abs().max() < 1e-12);
    }

    #[test]
    fn flop_counts() {
        let a = generate_sparse(6, 4, 1.0, 1).unwrap();
        let b = generate_sparse(6, 5, 1.0, 2).unwrap();
        assert_eq!(spgemm_flops(&a, &b).unwrap(), 6 * 4 * 5);
        assert_eq!(spgemm_flops(&SparseMatrix::zeros(6, 4), &b).unwrap(), 0);

        let a = generate_sparse(30, 20, 0.1, 3).unwrap();
        let b = generate_sparse(30, 10, 0.1, 4).unwrap();
        let (da, db) = (a.to_dense(), b.to_dense());
        let mut direct = 0u64;
        for k in 0..30 {
            let na = (0..20).filter(|&i| da[(k, i)] != 0.0).count() as u64;
            let nb = (0..10).filter(|&j| db[(k, j)] != 0.0).count() as u64;
            direct += na * nb;
        }
        assert_eq!(spgemm_flops(&a, &b).unwrap(), direct);
    }

    #[test]
    fn triplet_text_round_trip() {
        let m = generate_sparse(7, 5, 0.4, 21).unwrap();
        let mut buf = Vec::new();
        m.write_triplets(&mut buf).unwrap();
        let text = format!("# a comment\n{}", String::from_utf8(buf).unwrap());
        let back = SparseMatrix::read_triplets(text.as_bytes()).unwrap();
        assert_eq!(back.nnz(), m.nnz());
        assert!((back.to_dense() - m.to_dense()).abs().max() < 1e-15);
    }

    #[test]
    fn triplet_text_rejects_duplicates_and_bad_counts() {
        let dup = "2 2 2\n0 0 1.0\n0 0 2.0\n";
        assert!(SparseMatrix::read_triplets(dup.as_bytes()).is_err());
        let short = "2 2 3\n0 0 1.0\n";
        assert!(matches!(
            SparseMatrix::read_triplets(short.as_bytes()),
            Err(Error::Parse { .. })
        ));
    }
}
