//! Event-driven emulation of workers running their task lists in order, with
//! sparsity-aware task costs. A run stops at the first instant the finished
//! tasks determine the product.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockmat::{spgemm_flops, SparseMatrix};
use crate::decoder::{generic_rank, supports_matching_test, ComputationState, FieldRows, Problem, FIELD_SEEDS};
use crate::error::{param, Result};
use crate::field::RankTracker;
use crate::matching::IncrementalMatcher;
use crate::schemes::{EncodingPlan, PlanKind};

/// Distribution of the per-worker slowdown factor (always `>= 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Slowdown {
    /// One factor per worker; `null` marks a dead worker.
    Deterministic { factors: Vec<Option<f64>> },
    Uniform { lo: f64, hi: f64 },
    /// `shift + Exp(rate)`.
    ShiftedExponential { shift: f64, rate: f64 },
}

impl Default for Slowdown {
    fn default() -> Self {
        Slowdown::Uniform { lo: 1.0, hi: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpeedModel {
    /// Seconds per flop at slowdown 1.
    pub base_time: f64,
    pub slowdown: Slowdown,
    /// Fixed seconds added to every task.
    pub overhead: f64,
    /// Per-task multiplicative noise `U[1, 1 + jitter]`; 0 disables it.
    pub jitter: f64,
}

impl Default for SpeedModel {
    fn default() -> Self {
        SpeedModel { base_time: 1e-9, slowdown: Slowdown::default(), overhead: 0.0, jitter: 0.0 }
    }
}

impl SpeedModel {
    /// Identical unit-speed workers.
    pub fn uniform_speed(n: usize) -> Self {
        SpeedModel { slowdown: Slowdown::Deterministic { factors: vec![Some(1.0); n] }, ..Default::default() }
    }

    /// Fixed factors; `f64::INFINITY` marks a dead worker.
    pub fn fixed(factors: &[f64]) -> Self {
        let factors = factors.iter().map(|&f| if f.is_finite() { Some(f) } else { None }).collect();
        SpeedModel { slowdown: Slowdown::Deterministic { factors }, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_time > 0.0 && self.base_time.is_finite()) {
            return Err(param("base_time must be positive"));
        }
        if !(self.overhead >= 0.0 && self.overhead.is_finite()) {
            return Err(param("overhead must be non-negative"));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(param("jitter must be non-negative"));
        }
        match &self.slowdown {
            Slowdown::Deterministic { factors } => {
                if factors.iter().flatten().any(|&f| !(f >= 1.0)) {
                    return Err(param("slowdown factors must be >= 1"));
                }
            }
            Slowdown::Uniform { lo, hi } => {
                if !(*lo >= 1.0 && hi >= lo && hi.is_finite()) {
                    return Err(param("uniform slowdown needs 1 <= lo <= hi"));
                }
            }
            Slowdown::ShiftedExponential { shift, rate } => {
                if !(*shift >= 1.0 && *rate > 0.0 && shift.is_finite()) {
                    return Err(param("shifted exponential needs shift >= 1 and rate > 0"));
                }
            }
        }
        Ok(())
    }

    /// One factor per worker, drawn once per run.
    pub fn draw_slowdowns<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(match &self.slowdown {
            Slowdown::Deterministic { factors } => {
                if factors.len() != n {
                    return Err(param(format!("{} slowdown factors for {n} workers", factors.len())));
                }
                factors.iter().map(|f| f.unwrap_or(f64::INFINITY)).collect()
            }
            Slowdown::Uniform { lo, hi } => {
                (0..n).map(|_| if hi > lo { rng.gen_range(*lo..=*hi) } else { *lo }).collect()
            }
            Slowdown::ShiftedExponential { shift, rate } => (0..n)
                .map(|_| {
                    let u: f64 = rng.gen();
                    shift - (1.0 - u).ln() / rate
                })
                .collect(),
        })
    }
}

/// Where task costs come from.
#[derive(Debug, Clone, Copy)]
pub enum CostSource<'a> {
    /// Count the nonzeros of the actual encoded blocks.
    Measured(&'a Problem),
    /// Expected counts for i.i.d. sparse inputs: `rows` shared rows, block
    /// widths and densities of A and B (B ignored for matrix-vector plans).
    Expected { rows: usize, width_a: usize, density_a: f64, width_b: usize, density_b: f64 },
}

/// Density of a combination of `k` independent blocks of density `sigma`.
pub fn encoded_density(sigma: f64, k: usize) -> f64 {
    1.0 - (1.0 - sigma).powi(k as i32)
}

/// Flops of one task: `2·nnz` of the encoded A block against a vector, or
/// twice the multiply-add count of the encoded product.
pub fn task_cost(plan: &EncodingPlan, worker: usize, task: usize, source: CostSource<'_>) -> Result<f64> {
    Ok(task_costs_for(plan, worker, source)?[task])
}

fn task_costs_for(plan: &EncodingPlan, worker: usize, source: CostSource<'_>) -> Result<Vec<f64>> {
    let tasks = &plan.workers[worker].tasks;
    match source {
        CostSource::Measured(problem) => {
            let (ea, eb) = problem.encode_worker(plan, worker)?;
            tasks
                .iter()
                .map(|t| match t.b {
                    None => Ok(2.0 * ea[t.a].nnz() as f64),
                    Some(j) => Ok(2.0 * spgemm_flops(&ea[t.a], &eb[j])? as f64),
                })
                .collect()
        }
        CostSource::Expected { rows, width_a, density_a, width_b, density_b } => Ok((0..tasks.len())
            .map(|t| {
                let ka = plan.a_encoding(worker, t).support().len();
                let nnz_a = width_a as f64 * encoded_density(density_a, ka);
                match (plan.kind, plan.b_encoding(worker, t)) {
                    (PlanKind::Matmat, Some(b)) => {
                        let nnz_b = width_b as f64 * encoded_density(density_b, b.support().len());
                        2.0 * rows as f64 * nnz_a * nnz_b
                    }
                    _ => 2.0 * rows as f64 * nnz_a,
                }
            })
            .collect()),
    }
}

/// Flop counts of every task, `costs[worker][task]`.
pub fn task_costs(plan: &EncodingPlan, source: CostSource<'_>) -> Result<Vec<Vec<f64>>> {
    (0..plan.n).map(|i| task_costs_for(plan, i, source)).collect()
}

/// Costs of a matrix of fixed size split per the plan.
pub fn measured_costs(plan: &EncodingPlan, a: &SparseMatrix, b: Option<&SparseMatrix>) -> Result<Vec<Vec<f64>>> {
    let rhs = match b {
        Some(b) => crate::decoder::Operand::Matrix(b.clone()),
        None => crate::decoder::Operand::Vector(vec![0.0; a.rows()]),
    };
    let problem = Problem::new(plan, a.clone(), rhs)?;
    task_costs(plan, CostSource::Measured(&problem))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskEvent {
    pub time: f64,
    pub worker: usize,
    pub task: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// First instant the finished tasks decode, or the last finish time when
    /// they never do.
    pub completion_time: f64,
    /// Finished tasks per worker at that instant.
    pub state: ComputationState,
    pub total_symbols: usize,
    pub decodable: bool,
    pub slowdowns: Vec<f64>,
    /// Finished tasks in time order up to the completion instant.
    pub timeline: Vec<TaskEvent>,
}

#[derive(Debug, PartialEq)]
struct Pending {
    time: f64,
    worker: usize,
}

impl Eq for Pending {}

impl Ord for Pending {
    // min-heap on (time, worker)
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.worker.cmp(&self.worker))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Incremental decodability: perfect matching when rows have independent
/// random coefficients, else rank over the prime field. Once decodable,
/// always decodable.
enum Tracker {
    Hall(IncrementalMatcher),
    Field(FieldRows, RankTracker),
}

impl Tracker {
    fn new(plan: &EncodingPlan) -> Self {
        if supports_matching_test(plan) {
            Tracker::Hall(IncrementalMatcher::new(plan.delta()))
        } else {
            Tracker::Field(FieldRows::draw(plan, FIELD_SEEDS[0]), RankTracker::new(plan.delta()))
        }
    }

    fn add(&mut self, plan: &EncodingPlan, worker: usize, task: usize) -> bool {
        match self {
            Tracker::Hall(m) => {
                m.add(plan.task_unknowns(worker, task));
                m.is_perfect()
            }
            Tracker::Field(rows, t) => {
                t.insert_sparse(rows.row(worker, task));
                t.is_full()
            }
        }
    }
}

/// Runs every worker through its task list; task `t` of worker `i` ends at
/// `finish(t-1) + slowdown_i·base·cost + overhead`.
pub fn simulate(plan: &EncodingPlan, costs: &[Vec<f64>], speed: &SpeedModel, seed: u64) -> Result<RunReport> {
    if costs.len() != plan.n || costs.iter().any(|c| c.len() != plan.ell) {
        return Err(param("cost table does not match the plan"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slowdowns = speed.draw_slowdowns(plan.n, &mut rng)?;
    let duration = |i: usize, t: usize, rng: &mut ChaCha8Rng| {
        let noise = if speed.jitter > 0.0 { 1.0 + speed.jitter * rng.gen::<f64>() } else { 1.0 };
        slowdowns[i] * speed.base_time * costs[i][t] * noise + speed.overhead
    };
    let mut heap = BinaryHeap::new();
    for i in 0..plan.n {
        if plan.ell > 0 && slowdowns[i].is_finite() {
            heap.push(Pending { time: duration(i, 0, &mut rng), worker: i });
        }
    }
    let mut w = vec![0; plan.n];
    let mut timeline = Vec::new();
    let mut tracker = Tracker::new(plan);
    let mut now = 0.0;
    let mut decodable = false;
    while let Some(Pending { time, worker }) = heap.pop() {
        now = time;
        let task = w[worker];
        w[worker] += 1;
        timeline.push(TaskEvent { time, worker, task });
        if tracker.add(plan, worker, task) {
            decodable = true;
            break;
        }
        if w[worker] < plan.ell {
            heap.push(Pending { time: time + duration(worker, w[worker], &mut rng), worker });
        }
    }
    let state = ComputationState::new(w);
    if !decodable {
        // a single draw can miss full rank with negligible probability; settle it exactly
        decodable = generic_rank(plan, &state)? == plan.delta();
    }
    Ok(RunReport { completion_time: now, total_symbols: state.total(), state, decodable, slowdowns, timeline })
}

/// One scheme in a comparison.
#[derive(Debug, Clone)]
pub struct CompareEntry {
    pub label: String,
    pub plan: EncodingPlan,
    pub costs: Vec<Vec<f64>>,
    pub kappa_worst: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub scheme: String,
    pub trials: usize,
    pub mean_time: f64,
    pub min_time: f64,
    pub max_time: f64,
    pub mean_symbols: f64,
    pub decoded: usize,
    pub kappa_worst: Option<f64>,
}

/// Runs each scheme `trials` times. Trial `k` uses seed `seed + k` for every
/// scheme, so schemes with equal `n` face the same slowdowns.
pub fn compare_schemes(entries: &[CompareEntry], trials: usize, speed: &SpeedModel, seed: u64) -> Result<Vec<CompareRow>> {
    entries
        .iter()
        .map(|e| {
            let runs: Vec<RunReport> = (0..trials)
                .into_par_iter()
                .map(|k| simulate(&e.plan, &e.costs, speed, seed.wrapping_add(k as u64)))
                .collect::<Result<_>>()?;
            let times: Vec<f64> = runs.iter().map(|r| r.completion_time).collect();
            let t = trials.max(1) as f64;
            Ok(CompareRow {
                scheme: e.label.clone(),
                trials,
                mean_time: times.iter().sum::<f64>() / t,
                min_time: times.iter().copied().fold(f64::INFINITY, f64::min),
                max_time: times.iter().copied().fold(0.0, f64::max),
                mean_symbols: runs.iter().map(|r| r.total_symbols as f64).sum::<f64>() / t,
                decoded: runs.iter().filter(|r| r.decodable).count(),
                kappa_worst: e.kappa_worst,
            })
        })
        .collect()
}

pub fn write_compare_csv<W: Write>(out: W, rows: &[CompareRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "scheme",
            "trials",
            "mean_time",
            "min_time",
            "max_time",
            "mean_symbols",
            "decoded",
            "kappa_worst",
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockmat::generate_sparse;
    use crate::decoder::{is_decodable, DecodeMode};
    use crate::fraction::{frac, Fraction};
    use crate::schemes::*;

    fn unit_costs(plan: &EncodingPlan) -> Vec<Vec<f64>> {
        vec![vec![1.0; plan.ell]; plan.n]
    }

    /// Cyclic uncoded plan with `Δ = n`.
    fn uncoded(n: usize, ell: usize) -> EncodingPlan {
        build_coded_bottom_matvec(n, frac(ell as u64, n as u64), Fraction::zero(), 0).unwrap()
    }

    /// Replays the merged finish times from scratch after every event.
    fn replay(plan: &EncodingPlan, costs: &[Vec<f64>], speed: &SpeedModel, seed: u64) -> (f64, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = speed.draw_slowdowns(plan.n, &mut rng).unwrap();
        let mut events = Vec::new();
        for i in 0..plan.n {
            let mut t = 0.0;
            for k in 0..plan.ell {
                t += s[i] * speed.base_time * costs[i][k] + speed.overhead;
                if t.is_finite() {
                    events.push((t, i));
                }
            }
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut w = vec![0; plan.n];
        for (t, i) in events {
            w[i] += 1;
            let st = ComputationState::new(w.clone());
            if is_decodable(plan, &st, DecodeMode::PrimeField).unwrap() {
                return (t, st.total());
            }
        }
        panic!("never decodable");
    }

    #[test]
    fn single_task() {
        let p = build_dense_random_baseline(1, 1, 1, 0).unwrap();
        let speed = SpeedModel { overhead: 0.5, ..SpeedModel::uniform_speed(1) };
        let r = simulate(&p, &[vec![1e9]], &speed, 0).unwrap();
        assert!(r.decodable);
        assert!((r.completion_time - 1.5).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_costs_overhead_only() {
        let p = uncoded(4, 2);
        let a = SparseMatrix::zeros(10, 8);
        let costs = measured_costs(&p, &a, None).unwrap();
        assert!(costs.iter().flatten().all(|&c| c == 0.0));
        let speed = SpeedModel { overhead: 0.25, ..SpeedModel::uniform_speed(4) };
        let r = simulate(&p, &costs, &speed, 0).unwrap();
        assert!((r.completion_time - 0.25).abs() < 1e-12 || (r.completion_time - 0.5).abs() < 1e-12);
    }

    #[test]
    fn full_density_uncoded_is_dense_count() {
        let p = uncoded(4, 1);
        let a = generate_sparse(6, 8, 1.0, 1).unwrap();
        let costs = measured_costs(&p, &a, None).unwrap();
        assert!(costs.iter().flatten().all(|&c| c == 2.0 * 6.0 * 2.0));
    }

    #[test]
    fn expected_density_formula() {
        assert!((encoded_density(0.03, 4) - (1.0 - 0.97f64.powi(4))).abs() < 1e-15);
        let p = build_dense_random_baseline(4, 4, 1, 0).unwrap();
        let src = CostSource::Expected { rows: 100, width_a: 10, density_a: 0.03, width_b: 0, density_b: 0.0 };
        let c = task_cost(&p, 0, 0, src).unwrap();
        assert!((c - 2.0 * 100.0 * 10.0 * encoded_density(0.03, 4)).abs() < 1e-9);
    }

    #[test]
    fn two_dead_workers_coded_bottom() {
        let p = build_coded_bottom_matvec(5, frac(2, 5), frac(1, 5), 0).unwrap();
        let speed = SpeedModel::fixed(&[1.0, 1.0, 1.0, f64::INFINITY, f64::INFINITY]);
        let r = simulate(&p, &unit_costs(&p), &speed, 0).unwrap();
        assert!(r.decodable);
        assert!(r.total_symbols <= 8);
        assert_eq!(r.state.w[3] + r.state.w[4], 0);
        assert!(is_decodable(&p, &r.state, DecodeMode::PrimeField).unwrap());
    }

    #[test]
    fn matches_replay_oracle() {
        let plans = [uncoded(6, 3), build_scs_matvec(6, 4, 2).unwrap(), build_scs_matmat(5, 2, 2, 1).unwrap()];
        for p in &plans {
            for seed in 0..5 {
                let speed = SpeedModel::default();
                let costs = unit_costs(p);
                let r = simulate(p, &costs, &speed, seed).unwrap();
                let (t, total) = replay(p, &costs, &speed, seed);
                assert!((r.completion_time - t).abs() < 1e-15);
                assert_eq!(r.total_symbols, total);
            }
        }
    }

    #[test]
    fn identical_speeds_finish_at_q_th_task() {
        // every worker finishes task k at time k+1, so decoding happens in the
        // round where the cumulative count first reaches a decodable state
        let p = build_scs_matvec(6, 4, 3).unwrap();
        let r = simulate(&p, &unit_costs(&p), &SpeedModel::uniform_speed(6), 0).unwrap();
        assert!(r.decodable);
        assert!(r.total_symbols >= p.delta());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let p = uncoded(5, 3);
        let speed = SpeedModel { jitter: 0.2, ..SpeedModel::default() };
        let a = simulate(&p, &unit_costs(&p), &speed, 9).unwrap();
        let b = simulate(&p, &unit_costs(&p), &speed, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_speed_models() {
        let bad = SpeedModel { slowdown: Slowdown::Uniform { lo: 0.5, hi: 1.0 }, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SpeedModel { overhead: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let json = r#"{"slowdown":{"kind":"deterministic","factors":[1.0,null]}}"#;
        let m: SpeedModel = serde_json::from_str(json).unwrap();
        let s = m.draw_slowdowns(2, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(s[1].is_infinite());
    }

    #[test]
    fn compare_csv_has_header() {
        let p = uncoded(5, 3);
        let e = CompareEntry { label: "u".into(), costs: unit_costs(&p), plan: p, kappa_worst: Some(1.0) };
        let rows = compare_schemes(&[e], 4, &SpeedModel::default(), 1).unwrap();
        assert_eq!(rows[0].decoded, 4);
        let mut buf = Vec::new();
        write_compare_csv(&mut buf, &rows).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("scheme,trials,mean_time"));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

        #[test]
        fn slower_worker_never_helps(worker in 0usize..6, factor in 1.0f64..4.0) {
            let p = uncoded(6, 3);
            let base = simulate(&p, &unit_costs(&p), &SpeedModel::uniform_speed(6), 0).unwrap();
            let mut f = vec![1.0; 6];
            f[worker] = factor;
            let slow = simulate(&p, &unit_costs(&p), &SpeedModel::fixed(&f), 0).unwrap();
            proptest::prop_assert!(slow.completion_time >= base.completion_time);
        }

        #[test]
        fn reports_are_decodable(seed in 0u64..1000) {
            let p = build_coded_bottom_matvec(6, frac(1, 3), frac(1, 6), 4).unwrap();
            let r = simulate(&p, &unit_costs(&p), &SpeedModel::default(), seed).unwrap();
            proptest::prop_assert!(r.decodable);
            proptest::prop_assert!(is_decodable(&p, &r.state, DecodeMode::PrimeField).unwrap());
            proptest::prop_assert!(r.total_symbols >= p.delta() && r.total_symbols <= p.total_tasks());
        }
    }
}
