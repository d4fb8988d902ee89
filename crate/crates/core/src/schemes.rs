//! Encoding plans: which coded block-columns each worker holds and in which
//! order it multiplies them.
//!
//! A worker stores a short list of encodings of `A` (and of `B` for
//! matrix-matrix plans). Its tasks are pairs of stored encodings, processed
//! top to bottom; for matrix-matrix plans the order is a-major.

use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blockmat::CoefficientVector;
use crate::designs::{kirkman_classes, shifted_pair_classes, transversal_classes, trivial_classes, DesignSet};
use crate::error::{divisibility, param, shape, Error, Result};
use crate::fraction::Fraction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanKind {
    Matvec,
    Matmat,
}

/// How the coefficients of an encoding arose. Exact rank tests redraw the
/// free symbols according to this description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// A single block-column with coefficient 1.
    Unit,
    /// Independent random values on the support.
    Random,
    /// `point^exponents[k]` at index `k`.
    Powers { point: f64, exponents: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EncodingJson", into = "EncodingJson")]
pub struct Encoding {
    coeffs: CoefficientVector,
    generator: Generator,
}

#[derive(Serialize, Deserialize)]
struct EncodingJson {
    len: usize,
    support: Vec<usize>,
    values: Vec<f64>,
    generator: Generator,
}

impl TryFrom<EncodingJson> for Encoding {
    type Error = Error;
    fn try_from(j: EncodingJson) -> Result<Self> {
        let coeffs = CoefficientVector::from_support(j.len, &j.support, &j.values)?;
        if coeffs.support().len() != j.support.len() {
            return Err(param("explicit zero in an encoding support"));
        }
        Ok(Encoding { coeffs, generator: j.generator })
    }
}

impl From<Encoding> for EncodingJson {
    fn from(e: Encoding) -> Self {
        let support = e.coeffs.support();
        let values = support.iter().map(|&i| e.coeffs.values()[i]).collect();
        EncodingJson { len: e.coeffs.len(), support, values, generator: e.generator }
    }
}

impl Encoding {
    pub fn unit(len: usize, index: usize) -> Self {
        Encoding { coeffs: CoefficientVector::unit(len, index), generator: Generator::Unit }
    }

    pub fn random<R: Rng>(len: usize, support: &[usize], rng: &mut R) -> Self {
        let values: Vec<f64> = support.iter().map(|_| random_coefficient(rng)).collect();
        let coeffs = CoefficientVector::from_support(len, support, &values).expect("support in range");
        Encoding { coeffs, generator: Generator::Random }
    }

    /// Explicit values treated as generic (random) for exact rank tests.
    pub fn with_values(values: Vec<f64>) -> Self {
        let coeffs = CoefficientVector::new(values);
        let generator = if coeffs.support().len() == 1 && coeffs.values()[coeffs.support()[0]] == 1.0 {
            Generator::Unit
        } else {
            Generator::Random
        };
        Encoding { coeffs, generator }
    }

    pub fn powers(point: f64, exponents: Vec<u64>) -> Self {
        let values = exponents.iter().map(|&e| point.powi(e as i32)).collect();
        Encoding { coeffs: CoefficientVector::new(values), generator: Generator::Powers { point, exponents } }
    }

    pub fn coeffs(&self) -> &CoefficientVector {
        &self.coeffs
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn support(&self) -> Vec<usize> {
        self.coeffs.support()
    }

    /// Indices that carry a free symbol, i.e. the support for a generic draw.
    pub fn generic_support(&self) -> Vec<usize> {
        match &self.generator {
            Generator::Powers { exponents, .. } => (0..exponents.len()).collect(),
            _ => self.support(),
        }
    }
}

/// Uniform on [-1, 1] with `|x| < 1e-3` rejected.
pub fn random_coefficient<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let x: f64 = rng.gen_range(-1.0..=1.0);
        if x.abs() >= 1e-3 {
            return x;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    /// Index into the worker's A encodings.
    pub a: usize,
    /// Index into the worker's B encodings (matrix-matrix only).
    pub b: Option<usize>,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerPlan {
    pub a: Vec<Encoding>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub b: Vec<Encoding>,
    pub tasks: Vec<Task>,
}

impl WorkerPlan {
    /// One task per A encoding, in order.
    pub fn matvec(a: Vec<Encoding>) -> Self {
        let tasks = (0..a.len()).map(|t| Task { a: t, b: None, position: t }).collect();
        WorkerPlan { a, b: Vec::new(), tasks }
    }

    /// Every (A, B) pair, a-major.
    pub fn matmat(a: Vec<Encoding>, b: Vec<Encoding>) -> Self {
        let mut tasks = Vec::with_capacity(a.len() * b.len());
        for i in 0..a.len() {
            for j in 0..b.len() {
                tasks.push(Task { a: i, b: Some(j), position: tasks.len() });
            }
        }
        WorkerPlan { a, b, tasks }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingPlan {
    pub scheme_id: String,
    pub kind: PlanKind,
    pub n: usize,
    pub delta_a: usize,
    pub delta_b: usize,
    pub ell: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<SchemeSpec>,
    pub workers: Vec<WorkerPlan>,
}

impl EncodingPlan {
    /// Assembles and validates a plan from worker lists.
    pub fn from_workers(
        scheme_id: impl Into<String>,
        kind: PlanKind,
        delta_a: usize,
        delta_b: usize,
        workers: Vec<WorkerPlan>,
        seed: u64,
    ) -> Result<Self> {
        let ell = workers.first().map_or(0, |w| w.tasks.len());
        let plan = EncodingPlan {
            scheme_id: scheme_id.into(),
            kind,
            n: workers.len(),
            delta_a,
            delta_b,
            ell,
            seed,
            spec: None,
            workers,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.workers.len() != self.n {
            return Err(shape(format!("{} worker lists for n = {}", self.workers.len(), self.n)));
        }
        if self.kind == PlanKind::Matvec && self.delta_b != 1 {
            return Err(shape("matrix-vector plans have a single B block"));
        }
        let mut touched = vec![false; self.delta()];
        for (i, w) in self.workers.iter().enumerate() {
            if w.tasks.len() != self.ell {
                return Err(shape(format!("worker {i} has {} tasks, expected {}", w.tasks.len(), self.ell)));
            }
            if w.a.iter().any(|e| e.len() != self.delta_a) || w.b.iter().any(|e| e.len() != self.delta_b) {
                return Err(shape(format!("worker {i} has an encoding of the wrong length")));
            }
            for (t, task) in w.tasks.iter().enumerate() {
                let ok = task.position == t
                    && task.a < w.a.len()
                    && match (self.kind, task.b) {
                        (PlanKind::Matvec, None) => true,
                        (PlanKind::Matmat, Some(b)) => b < w.b.len(),
                        _ => false,
                    };
                if !ok {
                    return Err(shape(format!("worker {i} task {t} is malformed")));
                }
                for u in self.task_unknowns(i, t) {
                    touched[u] = true;
                }
            }
        }
        if let Some(u) = touched.iter().position(|x| !x) {
            return Err(param(format!("unknown {u} is not touched by any task")));
        }
        Ok(())
    }

    pub fn delta(&self) -> usize {
        self.delta_a * self.delta_b
    }

    pub fn total_tasks(&self) -> usize {
        self.n * self.ell
    }

    pub fn task(&self, worker: usize, t: usize) -> &Task {
        &self.workers[worker].tasks[t]
    }

    pub fn a_encoding(&self, worker: usize, t: usize) -> &Encoding {
        let w = &self.workers[worker];
        &w.a[w.tasks[t].a]
    }

    pub fn b_encoding(&self, worker: usize, t: usize) -> Option<&Encoding> {
        let w = &self.workers[worker];
        w.tasks[t].b.map(|j| &w.b[j])
    }

    /// Unknown `(i, j)` (the product of A block `i` with B block `j`) has index `i·Δ_B + j`.
    pub fn unknown_index(&self, i: usize, j: usize) -> usize {
        i * self.delta_b + j
    }

    /// Real coefficients of a task over the unknowns, as sparse pairs.
    pub fn task_row(&self, worker: usize, t: usize) -> Vec<(usize, f64)> {
        let a = self.a_encoding(worker, t).coeffs();
        match self.b_encoding(worker, t) {
            None => a.support().into_iter().map(|i| (i, a.values()[i])).collect(),
            Some(b) => {
                let b = b.coeffs();
                let bs = b.support();
                let mut row = Vec::new();
                for i in a.support() {
                    for &j in &bs {
                        row.push((self.unknown_index(i, j), a.values()[i] * b.values()[j]));
                    }
                }
                row
            }
        }
    }

    /// Unknowns a task can involve for generic coefficients.
    pub fn task_unknowns(&self, worker: usize, t: usize) -> Vec<usize> {
        let a = self.a_encoding(worker, t).generic_support();
        match self.b_encoding(worker, t) {
            None => a,
            Some(b) => {
                let bs = b.generic_support();
                a.iter().flat_map(|&i| bs.iter().map(move |&j| i * self.delta_b + j)).collect()
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let plan: EncodingPlan = serde_json::from_str(s)?;
        plan.validate()?;
        Ok(plan)
    }
}

/// Which parallel classes a β-level construction uses, one per worker group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClassChoice {
    /// The consecutive-block class in every group.
    #[default]
    Trivial,
    /// The two shifted pair classes (two groups).
    ShiftedPair,
    /// The consecutive class and one orthogonal to it (two groups).
    Transversal,
    /// Selected classes of the 15-point Kirkman resolution.
    Kirkman { indices: Vec<usize> },
    Custom { design: DesignSet },
}

impl ClassChoice {
    pub fn resolve(&self, delta: usize, beta: usize, groups: usize) -> Result<DesignSet> {
        let d = match self {
            ClassChoice::Trivial => trivial_classes(delta, beta, groups)?,
            ClassChoice::ShiftedPair => shifted_pair_classes(delta)?,
            ClassChoice::Transversal => transversal_classes(delta, beta)?,
            ClassChoice::Kirkman { indices } => kirkman_classes().select(indices)?,
            ClassChoice::Custom { design } => design.clone(),
        };
        if d.num_points() != delta || d.block_size() != beta {
            return Err(param(format!(
                "classes on {} points with blocks of {} do not fit delta = {delta}, beta = {beta}",
                d.num_points(),
                d.block_size()
            )));
        }
        if d.len() != groups {
            return Err(param(format!("{} classes supplied for {groups} worker groups", d.len())));
        }
        Ok(d)
    }

    pub fn label(&self) -> String {
        match self {
            ClassChoice::Trivial => "single".into(),
            ClassChoice::ShiftedPair => "shifted".into(),
            ClassChoice::Transversal => "transversal".into(),
            ClassChoice::Kirkman { indices } => {
                format!("kirkman[{}]", indices.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","))
            }
            ClassChoice::Custom { .. } => "custom".into(),
        }
    }
}

/// Parameters of every supported construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum SchemeSpec {
    BetaMatvec {
        n: usize,
        gamma: Fraction,
        beta: usize,
        #[serde(default)]
        classes: ClassChoice,
    },
    BetaMatmat {
        n: usize,
        gamma_a: Fraction,
        gamma_b: Fraction,
        beta_a: usize,
        beta_b: usize,
        #[serde(default)]
        classes_a: ClassChoice,
        #[serde(default)]
        classes_b: ClassChoice,
    },
    CodedBottomMatvec {
        n: usize,
        gamma_u: Fraction,
        gamma_c: Fraction,
    },
    CodedBottomMatmat {
        n: usize,
        gamma_au: Fraction,
        gamma_ac: Fraction,
        gamma_b: Fraction,
    },
    ScsMatvec {
        n: usize,
        k_a: usize,
    },
    ScsMatmat {
        n: usize,
        k_a: usize,
        k_b: usize,
    },
    Polynomial {
        n: usize,
        k_a: usize,
        #[serde(default = "one")]
        k_b: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        points: Option<Vec<f64>>,
    },
    DenseRandom {
        n: usize,
        k_a: usize,
        #[serde(default = "one")]
        k_b: usize,
    },
}

fn one() -> usize {
    1
}

impl SchemeSpec {
    pub fn n(&self) -> usize {
        match self {
            SchemeSpec::BetaMatvec { n, .. }
            | SchemeSpec::BetaMatmat { n, .. }
            | SchemeSpec::CodedBottomMatvec { n, .. }
            | SchemeSpec::CodedBottomMatmat { n, .. }
            | SchemeSpec::ScsMatvec { n, .. }
            | SchemeSpec::ScsMatmat { n, .. }
            | SchemeSpec::Polynomial { n, .. }
            | SchemeSpec::DenseRandom { n, .. } => *n,
        }
    }

    /// Short human-readable label including the parameters.
    pub fn id(&self) -> String {
        match self {
            SchemeSpec::BetaMatvec { n, gamma, beta, classes } => {
                format!("beta_matvec(n={n},gamma={gamma},beta={beta},{})", classes.label())
            }
            SchemeSpec::BetaMatmat { n, gamma_a, gamma_b, beta_a, beta_b, classes_a, .. } => format!(
                "beta_matmat(n={n},gamma_a={gamma_a},gamma_b={gamma_b},beta_a={beta_a},beta_b={beta_b},{})",
                classes_a.label()
            ),
            SchemeSpec::CodedBottomMatvec { n, gamma_u, gamma_c } => {
                format!("coded_bottom_matvec(n={n},gamma_u={gamma_u},gamma_c={gamma_c})")
            }
            SchemeSpec::CodedBottomMatmat { n, gamma_au, gamma_ac, gamma_b } => {
                format!("coded_bottom_matmat(n={n},gamma_au={gamma_au},gamma_ac={gamma_ac},gamma_b={gamma_b})")
            }
            SchemeSpec::ScsMatvec { n, k_a } => format!("scs_matvec(n={n},k_a={k_a})"),
            SchemeSpec::ScsMatmat { n, k_a, k_b } => format!("scs_matmat(n={n},k_a={k_a},k_b={k_b})"),
            SchemeSpec::Polynomial { n, k_a, k_b, .. } => format!("polynomial(n={n},k_a={k_a},k_b={k_b})"),
            SchemeSpec::DenseRandom { n, k_a, k_b } => format!("dense_random(n={n},k_a={k_a},k_b={k_b})"),
        }
    }

    pub fn build(&self, seed: u64) -> Result<EncodingPlan> {
        let mut plan = match self {
            SchemeSpec::BetaMatvec { n, gamma, beta, classes } => {
                let groups = beta_groups(*n, gamma.denom() as usize)?;
                let d = classes.resolve(*beta * gamma.denom() as usize, *beta, groups)?;
                build_beta_matvec(*n, *gamma, *beta, &d, seed)?
            }
            SchemeSpec::BetaMatmat { n, gamma_a, gamma_b, beta_a, beta_b, classes_a, classes_b } => {
                let (a2, b2) = (gamma_a.denom() as usize, gamma_b.denom() as usize);
                let groups = beta_groups(*n, a2 * b2)?;
                let da = classes_a.resolve(beta_a * a2, *beta_a, groups)?;
                let db = classes_b.resolve(beta_b * b2, *beta_b, groups)?;
                build_beta_matmat(*n, *gamma_a, *gamma_b, *beta_a, *beta_b, &da, &db, seed)?
            }
            SchemeSpec::CodedBottomMatvec { n, gamma_u, gamma_c } => {
                build_coded_bottom_matvec(*n, *gamma_u, *gamma_c, seed)?
            }
            SchemeSpec::CodedBottomMatmat { n, gamma_au, gamma_ac, gamma_b } => {
                build_coded_bottom_matmat(*n, *gamma_au, *gamma_ac, *gamma_b, seed)?
            }
            SchemeSpec::ScsMatvec { n, k_a } => build_scs_matvec(*n, *k_a, seed)?,
            SchemeSpec::ScsMatmat { n, k_a, k_b } => build_scs_matmat(*n, *k_a, *k_b, seed)?,
            SchemeSpec::Polynomial { n, k_a, k_b, points } => {
                let pts = match points {
                    Some(p) => p.clone(),
                    None => equispaced_points(*n),
                };
                build_polynomial_baseline(*n, *k_a, *k_b, &pts)?
            }
            SchemeSpec::DenseRandom { n, k_a, k_b } => build_dense_random_baseline(*n, *k_a, *k_b, seed)?,
        };
        plan.scheme_id = self.id();
        plan.spec = Some(self.clone());
        Ok(plan)
    }
}

fn beta_groups(n: usize, group_size: usize) -> Result<usize> {
    if n == 0 || !n.is_multiple_of(group_size) {
        return Err(divisibility(format!("n = {n} is not a multiple of the group size {group_size}")));
    }
    Ok(n / group_size)
}

fn check_gamma(gamma: Fraction, beta: usize) -> Result<()> {
    if gamma.is_zero() || gamma.numer() as usize * beta > gamma.denom() as usize {
        return Err(param(format!("storage fraction {gamma} must be in (0, 1/{beta}]")));
    }
    Ok(())
}

fn check_design(d: &DesignSet, delta: usize, beta: usize, groups: usize) -> Result<()> {
    if d.num_points() != delta || d.block_size() != beta || d.len() != groups {
        return Err(param(format!(
            "need {groups} classes on {delta} points with blocks of {beta}, got {} on {} with blocks of {}",
            d.len(),
            d.num_points(),
            d.block_size()
        )));
    }
    Ok(())
}

fn block_encoding<R: Rng>(len: usize, block: &[usize], rng: &mut R) -> Encoding {
    if block.len() == 1 {
        Encoding::unit(len, block[0])
    } else {
        Encoding::random(len, block, rng)
    }
}

fn plan(
    id: String,
    kind: PlanKind,
    delta_a: usize,
    delta_b: usize,
    workers: Vec<WorkerPlan>,
    seed: u64,
) -> Result<EncodingPlan> {
    EncodingPlan::from_workers(id, kind, delta_a, delta_b, workers, seed)
}

/// β-level plan for `A^T x`: `Δ = β·a2` block-columns, worker groups of `a2`
/// workers, each group placing the blocks of its class cyclically.
pub fn build_beta_matvec(n: usize, gamma: Fraction, beta: usize, designs: &DesignSet, seed: u64) -> Result<EncodingPlan> {
    check_gamma(gamma, beta)?;
    let (a1, a2) = (gamma.numer() as usize, gamma.denom() as usize);
    let groups = beta_groups(n, a2)?;
    let delta = beta * a2;
    let ell = beta * a1;
    check_design(designs, delta, beta, groups)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut workers = Vec::with_capacity(n);
    for class in designs.classes() {
        for j in 0..a2 {
            let encs = (0..ell).map(|t| block_encoding(delta, class.block((j + t) % a2), &mut rng)).collect();
            workers.push(WorkerPlan::matvec(encs));
        }
    }
    plan(format!("beta_matvec(n={n},gamma={gamma},beta={beta})"), PlanKind::Matvec, delta, 1, workers, seed)
}

/// β-level plan for `A^T B`. Groups of `a2·b2` workers; within a group,
/// worker `j` starts at A block `j mod a2` and B block `⌊j/a2⌋`.
#[allow(clippy::too_many_arguments)]
pub fn build_beta_matmat(
    n: usize,
    gamma_a: Fraction,
    gamma_b: Fraction,
    beta_a: usize,
    beta_b: usize,
    designs_a: &DesignSet,
    designs_b: &DesignSet,
    seed: u64,
) -> Result<EncodingPlan> {
    check_gamma(gamma_a, beta_a)?;
    check_gamma(gamma_b, beta_b)?;
    let (a1, a2) = (gamma_a.numer() as usize, gamma_a.denom() as usize);
    let (b1, b2) = (gamma_b.numer() as usize, gamma_b.denom() as usize);
    let groups = beta_groups(n, a2 * b2)?;
    let (delta_a, delta_b) = (beta_a * a2, beta_b * b2);
    let (ell_a, ell_b) = (beta_a * a1, beta_b * b1);
    check_design(designs_a, delta_a, beta_a, groups)?;
    check_design(designs_b, delta_b, beta_b, groups)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut workers = Vec::with_capacity(n);
    for (ca, cb) in designs_a.classes().iter().zip(designs_b.classes()) {
        for j in 0..a2 * b2 {
            let k = j / a2;
            let a = (0..ell_a).map(|t| block_encoding(delta_a, ca.block((j + t) % a2), &mut rng)).collect();
            let b = (0..ell_b).map(|t| block_encoding(delta_b, cb.block((k + t) % b2), &mut rng)).collect();
            workers.push(WorkerPlan::matmat(a, b));
        }
    }
    plan(
        format!("beta_matmat(n={n},gamma_a={gamma_a},gamma_b={gamma_b},beta_a={beta_a},beta_b={beta_b})"),
        PlanKind::Matmat,
        delta_a,
        delta_b,
        workers,
        seed,
    )
}

fn complement(delta: usize, taken: &[usize]) -> Vec<usize> {
    (0..delta).filter(|m| !taken.contains(m)).collect()
}

/// `ell_u` uncoded blocks starting at `start` (cyclic) followed by `ell_c`
/// random combinations of the remaining blocks.
fn uncoded_then_coded<R: Rng>(delta: usize, start: usize, ell_u: usize, ell_c: usize, rng: &mut R) -> Vec<Encoding> {
    let top: Vec<usize> = (0..ell_u).map(|t| (start + t) % delta).collect();
    let rest = complement(delta, &top);
    let mut encs: Vec<Encoding> = top.iter().map(|&m| Encoding::unit(delta, m)).collect();
    for _ in 0..ell_c {
        encs.push(Encoding::random(delta, &rest, rng));
    }
    encs
}

/// Cyclic uncoded blocks on top, dense combinations of the other blocks at the
/// bottom; `Δ = n`.
pub fn build_coded_bottom_matvec(n: usize, gamma_u: Fraction, gamma_c: Fraction, seed: u64) -> Result<EncodingPlan> {
    let ell_u = gamma_u
        .times_int(n as u64)
        .ok_or_else(|| divisibility(format!("gamma_u * n = {gamma_u} * {n} is not an integer")))? as usize;
    let ell_c = gamma_c
        .times_int(n as u64)
        .ok_or_else(|| divisibility(format!("gamma_c * n = {gamma_c} * {n} is not an integer")))? as usize;
    if ell_u + ell_c == 0 || ell_u + ell_c > n {
        return Err(param("need 0 < gamma_u + gamma_c <= 1"));
    }
    if ell_c > 0 && ell_u == n {
        return Err(param("no blocks left to code"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let workers = (0..n).map(|i| WorkerPlan::matvec(uncoded_then_coded(n, i, ell_u, ell_c, &mut rng))).collect();
    plan(
        format!("coded_bottom_matvec(n={n},gamma_u={gamma_u},gamma_c={gamma_c})"),
        PlanKind::Matvec,
        n,
        1,
        workers,
        seed,
    )
}

/// Matrix-matrix version: `Δ_A = a2`, `Δ_B = m·b2` with `m = n/(a2·b2)`;
/// worker `i` holds B blocks starting at `⌊i/a2⌋`.
pub fn build_coded_bottom_matmat(
    n: usize,
    gamma_au: Fraction,
    gamma_ac: Fraction,
    gamma_b: Fraction,
    seed: u64,
) -> Result<EncodingPlan> {
    let a2 = (gamma_au.denom() as usize).lcm(&(gamma_ac.denom() as usize));
    let a_u = gamma_au.times_int(a2 as u64).unwrap_or(0) as usize;
    let a_c = gamma_ac.times_int(a2 as u64).unwrap_or(0) as usize;
    let (b1, b2) = (gamma_b.numer() as usize, gamma_b.denom() as usize);
    if a_u + a_c == 0 || a_u + a_c > a2 || b1 == 0 || b1 > b2 {
        return Err(param("storage fractions must lie in (0, 1]"));
    }
    if a_c > 0 && a_u == a2 {
        return Err(param("no A blocks left to code"));
    }
    if !n.is_multiple_of(a2 * b2) {
        return Err(divisibility(format!("n = {n} is not a multiple of a2*b2 = {}", a2 * b2)));
    }
    let m = n / (a2 * b2);
    let (delta_a, delta_b) = (a2, m * b2);
    let ell_b = m * b1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut workers = Vec::with_capacity(n);
    for i in 0..n {
        let a = uncoded_then_coded(delta_a, i, a_u, a_c, &mut rng);
        let j = i / a2;
        let b = (0..ell_b).map(|t| Encoding::unit(delta_b, (j + t) % delta_b)).collect();
        workers.push(WorkerPlan::matmat(a, b));
    }
    plan(
        format!("coded_bottom_matmat(n={n},gamma_au={gamma_au},gamma_ac={gamma_ac},gamma_b={gamma_b})"),
        PlanKind::Matmat,
        delta_a,
        delta_b,
        workers,
        seed,
    )
}

/// `Δ = lcm(n, k_A)`; worker `i` holds `Δ/n` uncoded blocks from `i·Δ/n`,
/// then `Δ/k_A − Δ/n` combinations of the other blocks.
pub fn build_scs_matvec(n: usize, k_a: usize, seed: u64) -> Result<EncodingPlan> {
    if n == 0 || k_a == 0 || k_a > n {
        return Err(param(format!("need 1 <= k_A <= n, got k_A = {k_a}, n = {n}")));
    }
    let delta = n.lcm(&k_a);
    let per = delta / n;
    let ell_c = delta / k_a - per;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let workers = (0..n).map(|i| WorkerPlan::matvec(uncoded_then_coded(delta, i * per, per, ell_c, &mut rng))).collect();
    plan(format!("scs_matvec(n={n},k_a={k_a})"), PlanKind::Matvec, delta, 1, workers, seed)
}

/// `Δ_A = lcm(n, k_A)`, `Δ_B = k_B`; the A side holds `Δ/n` uncoded blocks
/// from `i·Δ_A/n` plus coded ones, the B side one dense combination.
pub fn build_scs_matmat(n: usize, k_a: usize, k_b: usize, seed: u64) -> Result<EncodingPlan> {
    if n == 0 || k_a == 0 || k_b == 0 || k_a * k_b > n {
        return Err(param(format!("need 1 <= k_A*k_B <= n, got k_A = {k_a}, k_B = {k_b}, n = {n}")));
    }
    let delta_a = n.lcm(&k_a);
    let delta_b = k_b;
    let per = delta_a * delta_b / n;
    let ell_a = delta_a / k_a;
    let ell_c = ell_a - per;
    let all_b: Vec<usize> = (0..delta_b).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut workers = Vec::with_capacity(n);
    for i in 0..n {
        let a = uncoded_then_coded(delta_a, i * delta_a / n, per, ell_c, &mut rng);
        let b = vec![if delta_b == 1 { Encoding::unit(1, 0) } else { Encoding::random(delta_b, &all_b, &mut rng) }];
        workers.push(WorkerPlan::matmat(a, b));
    }
    plan(format!("scs_matmat(n={n},k_a={k_a},k_b={k_b})"), PlanKind::Matmat, delta_a, delta_b, workers, seed)
}

/// `n` points uniformly spaced on [-1, 1].
pub fn equispaced_points(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect()
}

/// One task per worker: `A(z) = Σ A_i z^i`, `B(z) = Σ B_j z^(k_A·j)` evaluated
/// at the worker's point. Matrix-vector when `k_b == 1`.
pub fn build_polynomial_baseline(n: usize, k_a: usize, k_b: usize, points: &[f64]) -> Result<EncodingPlan> {
    if points.len() != n {
        return Err(shape(format!("{} evaluation points for {n} workers", points.len())));
    }
    for i in 0..n {
        for j in 0..i {
            if points[i] == points[j] {
                return Err(param(format!("duplicate evaluation point {}", points[i])));
            }
        }
    }
    if k_a == 0 || k_b == 0 {
        return Err(param("k_A and k_B must be positive"));
    }
    let workers = points
        .iter()
        .map(|&z| {
            let a = Encoding::powers(z, (0..k_a as u64).collect());
            if k_b == 1 {
                WorkerPlan::matvec(vec![a])
            } else {
                let b = Encoding::powers(z, (0..k_b as u64).map(|j| j * k_a as u64).collect());
                WorkerPlan::matmat(vec![a], vec![b])
            }
        })
        .collect();
    let kind = if k_b == 1 { PlanKind::Matvec } else { PlanKind::Matmat };
    plan(format!("polynomial(n={n},k_a={k_a},k_b={k_b})"), kind, k_a, k_b, workers, 0)
}

/// One task per worker with dense random A (and B) combinations.
pub fn build_dense_random_baseline(n: usize, k_a: usize, k_b: usize, seed: u64) -> Result<EncodingPlan> {
    if n == 0 || k_a == 0 || k_b == 0 {
        return Err(param("n, k_A and k_B must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dense = |len: usize, rng: &mut ChaCha8Rng| {
        if len == 1 {
            Encoding::unit(1, 0)
        } else {
            Encoding::random(len, &(0..len).collect::<Vec<_>>(), rng)
        }
    };
    let workers = (0..n)
        .map(|_| {
            let a = dense(k_a, &mut rng);
            if k_b == 1 {
                WorkerPlan::matvec(vec![a])
            } else {
                let b = dense(k_b, &mut rng);
                WorkerPlan::matmat(vec![a], vec![b])
            }
        })
        .collect();
    let kind = if k_b == 1 { PlanKind::Matvec } else { PlanKind::Matmat };
    plan(format!("dense_random(n={n},k_a={k_a},k_b={k_b})"), kind, k_a, k_b, workers, seed)
}

/// Three workers and three unknowns: worker `i` first computes block `i`
/// alone, then the plain sum of the other two.
pub fn build_pair_sum_toy() -> Result<EncodingPlan> {
    let worker = |i: usize| {
        let mut sum = vec![0.0; 3];
        sum[(i + 1) % 3] = 1.0;
        sum[(i + 2) % 3] = 1.0;
        WorkerPlan::matvec(vec![Encoding::unit(3, i), Encoding::with_values(sum)])
    };
    plan("pair_sum_toy".into(), PlanKind::Matvec, 3, 1, (0..3).map(worker).collect(), 0)
}
