//! Linear systems implied by a plan and a completion state: exact
//! decodability tests, least-squares decoding and condition numbers.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blockmat::{encode_block, spmm_t, spmv_t, BlockPartition, SparseMatrix};
use crate::error::{shape, Error, Result};
use crate::field::{self, RankTracker};
use crate::matching::IncrementalMatcher;
use crate::schemes::{EncodingPlan, Generator, PlanKind};

/// Seeds of the two independent prime-field draws.
pub const FIELD_SEEDS: [u64; 2] = [0x9e37_79b9_7f4a_7c15, 0xc2b2_ae3d_27d4_eb4f];

/// Relative SVD threshold for numerical rank.
pub const RANK_RTOL: f64 = 1e-12;

/// Decoding gives up above this condition number.
pub const DECODE_KAPPA_LIMIT: f64 = 1e13;

/// Number of completed tasks per worker.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComputationState {
    pub w: Vec<usize>,
}

impl ComputationState {
    pub fn new(w: Vec<usize>) -> Self {
        ComputationState { w }
    }

    pub fn zeros(n: usize) -> Self {
        ComputationState { w: vec![0; n] }
    }

    pub fn full(plan: &EncodingPlan) -> Self {
        ComputationState { w: vec![plan.ell; plan.n] }
    }

    /// Survivors finished, everyone else idle.
    pub fn survivors(plan: &EncodingPlan, survivors: &[usize]) -> Self {
        let mut w = vec![0; plan.n];
        for &i in survivors {
            w[i] = plan.ell;
        }
        ComputationState { w }
    }

    pub fn total(&self) -> usize {
        self.w.iter().sum()
    }

    pub fn check(&self, plan: &EncodingPlan) -> Result<()> {
        if self.w.len() != plan.n {
            return Err(shape(format!("state for {} workers, plan has {}", self.w.len(), plan.n)));
        }
        if let Some(i) = self.w.iter().position(|&x| x > plan.ell) {
            return Err(shape(format!("worker {i} completed {} > {} tasks", self.w[i], plan.ell)));
        }
        Ok(())
    }

    /// Componentwise `self >= other`.
    pub fn dominates(&self, other: &ComputationState) -> bool {
        self.w.iter().zip(&other.w).all(|(a, b)| a >= b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    #[default]
    PrimeField,
    Numeric,
}

/// Processed equations over the `Δ = Δ_A·Δ_B` unknowns, worker-major.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: DMatrix<f64>,
    /// `(i, j)` for the unknown `A_i^T B_j` (j = 0 for matrix-vector).
    pub labels: Vec<(usize, usize)>,
    /// `(worker, task)` that produced each row.
    pub origin: Vec<(usize, usize)>,
}

impl LinearSystem {
    pub fn num_rows(&self) -> usize {
        self.matrix.nrows()
    }
}

pub fn assemble(plan: &EncodingPlan, state: &ComputationState) -> Result<LinearSystem> {
    state.check(plan)?;
    let delta = plan.delta();
    let origin: Vec<(usize, usize)> =
        state.w.iter().enumerate().flat_map(|(i, &wi)| (0..wi).map(move |t| (i, t))).collect();
    let mut matrix = DMatrix::zeros(origin.len(), delta);
    for (r, &(i, t)) in origin.iter().enumerate() {
        for (u, v) in plan.task_row(i, t) {
            matrix[(r, u)] += v;
        }
    }
    let labels = (0..delta).map(|u| (u / plan.delta_b, u % plan.delta_b)).collect();
    Ok(LinearSystem { matrix, labels, origin })
}

/// Field-valued rows for every task, with each encoding's free symbols drawn
/// at random. Encodings sharing an evaluation point share the drawn point.
#[derive(Debug, Clone)]
pub struct FieldRows {
    delta: usize,
    rows: Vec<Vec<Vec<(usize, u64)>>>,
}

impl FieldRows {
    pub fn draw(plan: &EncodingPlan, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ plan.seed.rotate_left(17));
        let mut rows = Vec::with_capacity(plan.n);
        for w in &plan.workers {
            let mut points: HashMap<u64, u64> = HashMap::new();
            let mut draw = |e: &crate::schemes::Encoding, rng: &mut ChaCha8Rng| -> Vec<(usize, u64)> {
                match e.generator() {
                    Generator::Unit => e.support().into_iter().map(|i| (i, 1)).collect(),
                    Generator::Random => {
                        e.support().into_iter().map(|i| (i, field::random_nonzero(rng))).collect()
                    }
                    Generator::Powers { point, exponents } => {
                        let z = *points.entry(point.to_bits()).or_insert_with(|| field::random_nonzero(rng));
                        exponents.iter().enumerate().map(|(i, &k)| (i, field::pow(z, k))).collect()
                    }
                }
            };
            let a: Vec<_> = w.a.iter().map(|e| draw(e, &mut rng)).collect();
            let b: Vec<_> = w.b.iter().map(|e| draw(e, &mut rng)).collect();
            let worker_rows = w
                .tasks
                .iter()
                .map(|t| match t.b {
                    None => a[t.a].clone(),
                    Some(j) => {
                        let mut row = Vec::with_capacity(a[t.a].len() * b[j].len());
                        for &(ia, xa) in &a[t.a] {
                            for &(ib, xb) in &b[j] {
                                row.push((ia * plan.delta_b + ib, field::mul(xa, xb)));
                            }
                        }
                        row
                    }
                })
                .collect();
            rows.push(worker_rows);
        }
        FieldRows { delta: plan.delta(), rows }
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn row(&self, worker: usize, task: usize) -> &[(usize, u64)] {
        &self.rows[worker][task]
    }

    pub fn rank(&self, state: &ComputationState) -> usize {
        let mut t = RankTracker::new(self.delta);
        for (i, &wi) in state.w.iter().enumerate() {
            for task in 0..wi {
                t.insert_sparse(self.row(i, task));
                if t.is_full() {
                    return t.rank();
                }
            }
        }
        t.rank()
    }
}

/// Exact rank of the processed equations for generic coefficients: a random
/// draw over the prime field, repeated on a second draw when the first falls
/// short. A draw can only lose rank, never gain it.
pub fn generic_rank(plan: &EncodingPlan, state: &ComputationState) -> Result<usize> {
    state.check(plan)?;
    let mut best = 0;
    for seed in FIELD_SEEDS {
        best = best.max(FieldRows::draw(plan, seed).rank(state));
        if best == plan.delta() {
            break;
        }
    }
    Ok(best)
}

/// Singular values of `m`, through a Householder QR first. nalgebra's SVD of
/// a tall matrix can stop early on nearly repeated singular values; the
/// square triangular factor does not show the problem.
fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    let r = if m.nrows() >= m.ncols() { m.clone().qr().r() } else { m.transpose().qr().r() };
    r.svd(false, false).singular_values
}

/// Numerical rank with threshold `max(rows, cols)·σ_max·1e-12`.
pub fn numeric_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = singular_values(m);
    let smax = sv.max();
    let tol = m.nrows().max(m.ncols()) as f64 * smax * RANK_RTOL;
    sv.iter().filter(|&&s| s > tol).count()
}

pub fn is_decodable(plan: &EncodingPlan, state: &ComputationState, mode: DecodeMode) -> Result<bool> {
    match mode {
        DecodeMode::PrimeField => Ok(generic_rank(plan, state)? == plan.delta()),
        DecodeMode::Numeric => {
            let sys = assemble(plan, state)?;
            Ok(numeric_rank(&sys.matrix) == plan.delta())
        }
    }
}

/// Whether the plan's rows have independent free coefficients, so that
/// generic decodability reduces to a perfect matching.
pub fn supports_matching_test(plan: &EncodingPlan) -> bool {
    plan.kind == PlanKind::Matvec
        && plan
            .workers
            .iter()
            .all(|w| w.a.iter().all(|e| matches!(e.generator(), Generator::Unit | Generator::Random)))
}

/// Decodability through Hall's condition: a matching of processed equations
/// that covers every unknown.
pub fn hall_decodable_matvec(plan: &EncodingPlan, state: &ComputationState) -> Result<bool> {
    if !supports_matching_test(plan) {
        return Err(Error::UnsupportedPlan(format!(
            "{}: matching test needs a matrix-vector plan with independent random rows",
            plan.scheme_id
        )));
    }
    state.check(plan)?;
    let mut m = IncrementalMatcher::new(plan.delta());
    for (i, &wi) in state.w.iter().enumerate() {
        for t in 0..wi {
            m.add(plan.task_unknowns(i, t));
        }
    }
    Ok(m.is_perfect())
}

/// `σ_max/σ_min` of a system matrix; infinite when it has fewer rows than
/// columns or is numerically rank deficient.
pub fn matrix_condition(m: &DMatrix<f64>) -> f64 {
    if m.nrows() < m.ncols() || m.ncols() == 0 {
        return f64::INFINITY;
    }
    let sv = singular_values(m);
    let smax = sv.max();
    let smin = sv.min();
    let tol = m.nrows().max(m.ncols()) as f64 * smax * RANK_RTOL;
    if smin <= tol {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Condition number of the system formed by the survivors' complete task lists.
pub fn condition_number(plan: &EncodingPlan, survivors: &[usize]) -> Result<f64> {
    let sys = assemble(plan, &ComputationState::survivors(plan, survivors))?;
    Ok(matrix_condition(&sys.matrix))
}

/// Right-hand operand of the distributed product.
#[derive(Debug, Clone)]
pub enum Operand {
    Vector(Vec<f64>),
    Matrix(SparseMatrix),
}

/// Inputs of an end-to-end run, with the block partitions the plan implies.
#[derive(Debug, Clone)]
pub struct Problem {
    pub a: SparseMatrix,
    pub rhs: Operand,
    pub part_a: BlockPartition,
    pub part_b: Option<BlockPartition>,
}

impl Problem {
    pub fn new(plan: &EncodingPlan, a: SparseMatrix, rhs: Operand) -> Result<Self> {
        let part_a = BlockPartition::new(a.cols(), plan.delta_a)?;
        let part_b = match (&rhs, plan.kind) {
            (Operand::Vector(x), PlanKind::Matvec) => {
                if x.len() != a.rows() {
                    return Err(shape("vector length differs from the row count of A"));
                }
                None
            }
            (Operand::Matrix(b), PlanKind::Matmat) => {
                if b.rows() != a.rows() {
                    return Err(shape("A and B differ in row count"));
                }
                Some(BlockPartition::new(b.cols(), plan.delta_b)?)
            }
            _ => return Err(shape("operand does not match the plan kind")),
        };
        Ok(Problem { a, rhs, part_a, part_b })
    }

    /// Exact `A^T x` or `A^T B` as a dense matrix (a column for vectors).
    pub fn direct_product(&self) -> Result<DMatrix<f64>> {
        match &self.rhs {
            Operand::Vector(x) => Ok(DMatrix::from_column_slice(self.a.cols(), 1, &spmv_t(&self.a, x)?)),
            Operand::Matrix(b) => Ok(spmm_t(&self.a, b)?.to_dense()),
        }
    }

    /// Encoded A and B blocks a worker stores.
    pub fn encode_worker(&self, plan: &EncodingPlan, worker: usize) -> Result<(Vec<SparseMatrix>, Vec<SparseMatrix>)> {
        let w = &plan.workers[worker];
        let a = w.a.iter().map(|e| encode_block(&self.a, &self.part_a, e.coeffs())).collect::<Result<Vec<_>>>()?;
        let b = match (&self.rhs, &self.part_b) {
            (Operand::Matrix(bm), Some(pb)) => {
                w.b.iter().map(|e| encode_block(bm, pb, e.coeffs())).collect::<Result<Vec<_>>>()?
            }
            _ => Vec::new(),
        };
        Ok((a, b))
    }

    /// Results of the first `count` tasks of a worker.
    pub fn worker_products(&self, plan: &EncodingPlan, worker: usize, count: usize) -> Result<Vec<DMatrix<f64>>> {
        let (ea, eb) = self.encode_worker(plan, worker)?;
        plan.workers[worker].tasks[..count]
            .iter()
            .map(|t| match (&self.rhs, t.b) {
                (Operand::Vector(x), None) => {
                    let y = spmv_t(&ea[t.a], x)?;
                    Ok(DMatrix::from_column_slice(y.len(), 1, &y))
                }
                (Operand::Matrix(_), Some(j)) => Ok(spmm_t(&ea[t.a], &eb[j])?.to_dense()),
                _ => Err(shape("task does not match the operand")),
            })
            .collect()
    }

    /// Task results for every processed task of a state, worker-major.
    pub fn products(&self, plan: &EncodingPlan, state: &ComputationState) -> Result<Vec<DMatrix<f64>>> {
        let mut out = Vec::with_capacity(state.total());
        for (i, &wi) in state.w.iter().enumerate() {
            if wi > 0 {
                out.extend(self.worker_products(plan, i, wi)?);
            }
        }
        Ok(out)
    }
}

/// Recovered unknown blocks with diagnostics.
#[derive(Debug, Clone)]
pub struct Decoded {
    /// Block `A_i^T B_j` at index `i·Δ_B + j`.
    pub blocks: Vec<DMatrix<f64>>,
    pub kappa: f64,
    pub residual: f64,
}

impl Decoded {
    /// Places the blocks into the full product.
    pub fn assemble_product(&self, delta_a: usize, delta_b: usize) -> DMatrix<f64> {
        let (r, c) = self.blocks[0].shape();
        let mut out = DMatrix::zeros(r * delta_a, c * delta_b);
        for i in 0..delta_a {
            for j in 0..delta_b {
                out.view_mut((i * r, j * c), (r, c)).copy_from(&self.blocks[i * delta_b + j]);
            }
        }
        out
    }
}

/// Least-squares solve of the assembled system for every entry of the
/// unknown blocks.
pub fn decode(plan: &EncodingPlan, state: &ComputationState, products: &[DMatrix<f64>]) -> Result<Decoded> {
    let sys = assemble(plan, state)?;
    if products.len() != sys.num_rows() {
        return Err(shape(format!("{} products for {} processed tasks", products.len(), sys.num_rows())));
    }
    let (r, c) = products.first().map(|p| p.shape()).ok_or_else(|| shape("no products"))?;
    if products.iter().any(|p| p.shape() != (r, c)) {
        return Err(shape("task results differ in shape"));
    }
    let kappa = matrix_condition(&sys.matrix);
    let mut rhs = DMatrix::zeros(sys.num_rows(), r * c);
    for (k, p) in products.iter().enumerate() {
        rhs.row_mut(k).copy_from(&DVector::from_column_slice(p.as_slice()).transpose());
    }
    if !kappa.is_finite() || kappa > DECODE_KAPPA_LIMIT {
        return Err(Error::DecodeFailure { kappa, residual: f64::NAN });
    }
    // full column rank here, so least squares is R x = Qᵀ b
    let qr = sys.matrix.clone().qr();
    let x = qr
        .r()
        .solve_upper_triangular(&(qr.q().transpose() * &rhs))
        .ok_or(Error::DecodeFailure { kappa, residual: f64::NAN })?;
    let rnorm = rhs.norm();
    let residual = if rnorm == 0.0 { 0.0 } else { (&sys.matrix * &x - &rhs).norm() / rnorm };
    if residual > 1e-6 {
        return Err(Error::DecodeFailure { kappa, residual });
    }
    let blocks = (0..plan.delta()).map(|u| DMatrix::from_iterator(r, c, x.row(u).iter().copied())).collect();
    Ok(Decoded { blocks, kappa, residual })
}
