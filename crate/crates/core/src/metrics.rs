//! Closed-form straggler resilience `s` and worst-case processed-task
//! threshold `Q` per scheme, independent enumeration oracles for both, and
//! worst-case condition numbers.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::time::Instant;

use num_integer::{binomial, Integer};
use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoder::{condition_number, generic_rank, ComputationState, FieldRows, FIELD_SEEDS};
use crate::error::{regime, Error, Result};
use crate::field::RankTracker;
use crate::fraction::Fraction;
use crate::schemes::{ClassChoice, EncodingPlan, SchemeSpec};

/// Default cap on enumerated subsets or states.
pub const DEFAULT_BUDGET: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    Exhaustive,
    StructureAware,
    SubsetOnly,
}

impl fmt::Display for OracleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleMethod::Exhaustive => "exhaustive",
            OracleMethod::StructureAware => "structure-aware",
            OracleMethod::SubsetOnly => "subset-only",
        })
    }
}

/// How to compute the oracle `Q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QMethod {
    Exhaustive,
    StructureAware,
}

/// Outcome of a metrics evaluation, written to the `status` column.
#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Ok,
    Mismatch(String),
    Regime(String),
    Budget(String),
    Failed(String),
}

impl Status {
    pub fn is_ok(&self) -> bool {
        matches!(self, Status::Ok)
    }

    /// Process exit code for this outcome.
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Regime(_) => 2,
            Status::Mismatch(_) => 3,
            Status::Budget(_) => 5,
            Status::Failed(_) => 1,
        }
    }

    fn from_error(e: &Error) -> Self {
        match e {
            Error::Regime(m) | Error::Divisibility(m) | Error::Parameter(m) => Status::Regime(m.clone()),
            Error::Budget { .. } => Status::Budget(e.to_string()),
            Error::Mismatch(m) => Status::Mismatch(m.clone()),
            _ => Status::Failed(e.to_string()),
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Ok => f.write_str("ok"),
            Status::Mismatch(m) => write!(f, "mismatch: {m}"),
            Status::Regime(m) => write!(f, "regime: {m}"),
            Status::Budget(m) => write!(f, "budget: {m}"),
            Status::Failed(m) => write!(f, "failed: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeMetrics {
    pub scheme_id: String,
    pub n: usize,
    /// Storage fractions as written in the CSV (`a;b` for two matrices).
    pub gamma: String,
    pub beta: String,
    /// Number of unknown block products.
    pub delta: usize,
    pub s_analytic: Option<usize>,
    /// Proven lower bound on `s` where no exact formula exists.
    pub s_lower_bound: Option<usize>,
    pub s_oracle: Option<usize>,
    pub q_analytic: Option<usize>,
    pub q_oracle: Option<usize>,
    pub q_over_delta: Option<Fraction>,
    pub kappa_worst: Option<f64>,
    pub oracle_method: Option<OracleMethod>,
    pub seconds: f64,
    pub status: Status,
}

impl SchemeMetrics {
    fn empty(spec: &SchemeSpec) -> Self {
        let (gamma, beta) = labels(spec);
        SchemeMetrics {
            scheme_id: spec.id(),
            n: spec.n(),
            gamma,
            beta,
            delta: 0,
            s_analytic: None,
            s_lower_bound: None,
            s_oracle: None,
            q_analytic: None,
            q_oracle: None,
            q_over_delta: None,
            kappa_worst: None,
            oracle_method: None,
            seconds: 0.0,
            status: Status::Ok,
        }
    }

    /// Compares analytic values with oracle values where both exist.
    pub fn check_consistency(&self) -> Status {
        let mut bad = Vec::new();
        if let (Some(a), Some(o)) = (self.s_analytic, self.s_oracle) {
            if a != o {
                bad.push(format!("s analytic {a} != oracle {o}"));
            }
        }
        if let (Some(lb), Some(o)) = (self.s_lower_bound, self.s_oracle) {
            if o < lb {
                bad.push(format!("s oracle {o} below lower bound {lb}"));
            }
        }
        if let (Some(a), Some(o)) = (self.q_analytic, self.q_oracle) {
            if a != o {
                bad.push(format!("Q analytic {a} != oracle {o}"));
            }
        }
        if bad.is_empty() {
            Status::Ok
        } else {
            Status::Mismatch(bad.join("; "))
        }
    }

    fn refresh_ratio(&mut self) {
        self.q_over_delta = self
            .q_oracle
            .or(self.q_analytic)
            .filter(|_| self.delta > 0)
            .map(|q| Fraction::from(Ratio::new(q as u64, self.delta as u64)));
    }
}

/// Column order of the metrics CSV.
pub const CSV_HEADER: [&str; 14] = [
    "scheme_id",
    "n",
    "gamma",
    "beta",
    "s_analytic",
    "s_lower_bound",
    "s_oracle",
    "q_analytic",
    "q_oracle",
    "q_over_delta",
    "kappa_worst",
    "oracle_method",
    "seconds",
    "status",
];

fn opt<T: ToString>(x: &Option<T>) -> String {
    x.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

/// Writes metrics rows (header always present).
pub fn write_csv<W: Write>(out: W, rows: &[SchemeMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for m in rows {
        w.write_record([
            m.scheme_id.clone(),
            m.n.to_string(),
            m.gamma.clone(),
            m.beta.clone(),
            opt(&m.s_analytic),
            opt(&m.s_lower_bound),
            opt(&m.s_oracle),
            opt(&m.q_analytic),
            opt(&m.q_oracle),
            opt(&m.q_over_delta),
            m.kappa_worst.map(|k| format!("{k:.6}")).unwrap_or_default(),
            opt(&m.oracle_method),
            format!("{:.3}", m.seconds),
            m.status.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn labels(spec: &SchemeSpec) -> (String, String) {
    match spec {
        SchemeSpec::BetaMatvec { gamma, beta, .. } => (gamma.to_string(), beta.to_string()),
        SchemeSpec::BetaMatmat { gamma_a, gamma_b, beta_a, beta_b, .. } => {
            (format!("{gamma_a};{gamma_b}"), format!("{beta_a};{beta_b}"))
        }
        SchemeSpec::CodedBottomMatvec { gamma_u, gamma_c, .. } => (format!("{gamma_u}+{gamma_c}"), "1".into()),
        SchemeSpec::CodedBottomMatmat { gamma_au, gamma_ac, gamma_b, .. } => {
            (format!("{gamma_au}+{gamma_ac};{gamma_b}"), "1;1".into())
        }
        SchemeSpec::ScsMatvec { k_a, .. } => (format!("1/{k_a}"), String::new()),
        SchemeSpec::ScsMatmat { k_a, k_b, .. }
        | SchemeSpec::Polynomial { k_a, k_b, .. }
        | SchemeSpec::DenseRandom { k_a, k_b, .. } => (format!("1/{k_a};1/{k_b}"), String::new()),
    }
}

/// Lower bound on `Q` for any uncoded assignment in which each of `delta`
/// blocks is replicated `r` times and every worker stores `ell` blocks.
pub fn lower_bound_q_uncoded(delta: usize, r: usize, ell: usize) -> Result<usize> {
    if delta == 0 || r == 0 || ell == 0 || !(delta * r).is_multiple_of(ell) {
        return Err(regime(format!("requires ell | delta*r (delta = {delta}, r = {r}, ell = {ell})")));
    }
    Ok(delta * r + 1 - r * (ell + 1) / 2)
}

/// The same bound divided by `Δ`, in terms of `n` and `γ = ell/Δ`:
/// `nγ(1 − γ/2) + (1 − nγ/2)/Δ`, before rounding `Q` up to an integer.
pub fn lower_bound_q_ratio(n: usize, gamma: Fraction, delta: usize) -> Result<Fraction> {
    let ell = gamma
        .times_int(delta as u64)
        .ok_or_else(|| regime(format!("requires gamma*delta integral ({gamma} * {delta})")))?;
    let nl = n as u64 * ell;
    if !nl.is_multiple_of(delta as u64) || ell == 0 {
        return Err(regime(format!("requires delta | n*ell (n = {n}, ell = {ell}, delta = {delta})")));
    }
    let r = nl / delta as u64;
    // (2Δr − rℓ − r + 2) / (2Δ)
    let num = 2 * delta as u64 * r + 2 - r * (ell + 1);
    Ok(Fraction::from(Ratio::new(num, 2 * delta as u64)))
}

/// `(s, Q)` for a single parallel class shared by `c` groups: `ell` tasks per
/// worker, blocks of size `beta`, `per_group` meta-symbols per class.
/// Covers both `c >= beta` and `beta > c`.
fn single_class(c: usize, ell: usize, beta: usize, per_group: usize) -> (usize, usize) {
    let c1 = (beta - 1) / c;
    let c2 = beta - 1 - c * c1;
    let mut q = c * (per_group * ell - ell * (ell + 1) / 2);
    q += c * (0..c1).map(|i| ell - i).sum::<usize>();
    q += c2 * (ell - c1) + 1;
    (c * ell - beta, q)
}

fn fraction_parts(g: Fraction) -> (usize, usize) {
    (g.numer() as usize, g.denom() as usize)
}

fn groups(n: usize, size: usize) -> Result<usize> {
    if size == 0 || !n.is_multiple_of(size) {
        return Err(regime(format!("requires n divisible by {size}")));
    }
    Ok(n / size)
}

/// Smallest `κ >= 1` with `⌈κ/(m·b1)⌉ + κ·a_c >= a2 − a_u + 1`.
pub fn kappa_min(m: usize, b1: usize, a2: usize, a_u: usize, a_c: usize) -> usize {
    let target = a2 + 1 - a_u;
    (1..).find(|&k: &usize| k.div_ceil(m * b1) + k * a_c >= target).unwrap()
}

/// Closed-form metrics. Fails with a regime error naming the violated
/// condition when no formula covers the parameters.
pub fn analytic_metrics(spec: &SchemeSpec) -> Result<SchemeMetrics> {
    let mut out = SchemeMetrics::empty(spec);
    match spec {
        SchemeSpec::BetaMatvec { n, gamma, beta, classes } => {
            let (a1, a2) = fraction_parts(*gamma);
            let c = groups(*n, a2)?;
            let (delta, ell, beta) = (beta * a2, beta * a1, *beta);
            out.delta = delta;
            let design = classes.resolve(delta, beta, c)?;
            if design.is_single_class() {
                let (s, q) = single_class(c, ell, beta, a2);
                out.s_analytic = Some(s);
                out.q_analytic = Some(q);
            } else if matches!(classes, ClassChoice::ShiftedPair) {
                if c != 2 || beta != 2 {
                    return Err(regime("shifted pair classes require c = beta = 2"));
                }
                if delta < 8 {
                    return Err(regime(format!("shifted pair classes require delta >= 8, got {delta}")));
                }
                if ell + 2 > delta / 2 {
                    return Err(regime(format!("shifted pair classes require ell <= delta/2 - 2, got ell = {ell}")));
                }
                out.s_analytic = Some(2 * ell - 1);
                out.q_analytic = Some(n * ell - ell * (ell + 1) + 1);
            } else {
                if design.max_cross_intersection() > 1 {
                    return Err(regime("distinct classes require block intersections <= 1"));
                }
                if c < beta {
                    return Err(regime(format!("distinct classes require c >= beta (c = {c}, beta = {beta})")));
                }
                let lambda = (beta - 1).min(c - beta);
                out.s_lower_bound = Some(c * ell - beta + lambda);
            }
        }
        SchemeSpec::BetaMatmat { n, gamma_a, gamma_b, beta_a, beta_b, classes_a, classes_b } => {
            let (a1, a2) = fraction_parts(*gamma_a);
            let (b1, b2) = fraction_parts(*gamma_b);
            let c = groups(*n, a2 * b2)?;
            let (ell_a, ell_b) = (beta_a * a1, beta_b * b1);
            let ell = ell_a * ell_b;
            let beta = beta_a * beta_b;
            out.delta = beta_a * a2 * beta_b * b2;
            let da = classes_a.resolve(beta_a * a2, *beta_a, c)?;
            let db = classes_b.resolve(beta_b * b2, *beta_b, c)?;
            if da.is_single_class() && db.is_single_class() {
                let (s, q) = single_class(c, ell, beta, a2 * b2);
                out.s_analytic = Some(s);
                out.q_analytic = Some(q);
            } else if matches!(classes_a, ClassChoice::ShiftedPair) && db.is_single_class() {
                if *beta_a != 2 || *beta_b != 1 || c != 2 {
                    return Err(regime("shifted pair classes on A require beta_A = 2, beta_B = 1 and c = 2"));
                }
                let delta_a = beta_a * a2;
                if delta_a < 8 || ell_a + 2 > delta_a / 2 {
                    return Err(regime(format!(
                        "shifted pair classes on A require delta_A >= 8 and ell_A <= delta_A/2 - 2 \
                         (delta_A = {delta_a}, ell_A = {ell_a})"
                    )));
                }
                out.s_analytic = Some(2 * ell - 1);
            } else {
                return Err(regime("matrix-matrix closed forms require a single class or shifted pairs on A"));
            }
        }
        SchemeSpec::CodedBottomMatvec { n, gamma_u, gamma_c } => {
            let ell_u = gamma_u.times_int(*n as u64).ok_or_else(|| regime("requires n*gamma_u integral"))? as usize;
            let ell_c = gamma_c.times_int(*n as u64).ok_or_else(|| regime("requires n*gamma_c integral"))? as usize;
            if ell_u == 0 {
                return Err(regime("requires at least one uncoded block per worker (n*gamma_u >= 1)"));
            }
            out.delta = *n;
            out.s_analytic = Some((n * ell_c + ell_u - 1) / (ell_c + 1));
            out.q_analytic = Some((*n).max(n * ell_u + 1 - ell_u * (ell_u + 1) / 2));
        }
        SchemeSpec::CodedBottomMatmat { n, gamma_au, gamma_ac, gamma_b } => {
            let a2 = (gamma_au.denom() as usize).lcm(&(gamma_ac.denom() as usize));
            let a_u = gamma_au.times_int(a2 as u64).unwrap_or(0) as usize;
            let a_c = gamma_ac.times_int(a2 as u64).unwrap_or(0) as usize;
            let (b1, b2) = fraction_parts(*gamma_b);
            if a_u == 0 || a_c == 0 {
                return Err(regime("requires a_u >= 1 and a_c >= 1"));
            }
            let m = groups(*n, a2 * b2)?;
            let k = kappa_min(m, b1, a2, a_u, a_c);
            if k > m * a2 * b1 {
                return Err(regime("requires kappa_min <= m*a2*b1"));
            }
            out.delta = a2 * m * b2;
            out.s_analytic = Some(m * a2 * b1 - k);
        }
        SchemeSpec::ScsMatvec { n, k_a } => {
            if *k_a == 0 || k_a > n {
                return Err(regime("requires 1 <= k_A <= n"));
            }
            out.delta = n.lcm(k_a);
            out.s_analytic = Some(n - k_a);
            out.q_analytic = Some(out.delta);
        }
        SchemeSpec::ScsMatmat { n, k_a, k_b } => {
            if *k_a == 0 || *k_b == 0 || k_a * k_b > *n {
                return Err(regime("requires 1 <= k_A*k_B <= n"));
            }
            let delta_a = n.lcm(k_a);
            let delta = delta_a * k_b;
            let ell_c = delta_a / k_a - delta / n;
            out.delta = delta;
            out.s_analytic = Some(n - k_a * k_b);
            out.q_analytic = Some(delta + (k_b - 1) * ell_c);
        }
        SchemeSpec::Polynomial { n, k_a, k_b, .. } | SchemeSpec::DenseRandom { n, k_a, k_b } => {
            if k_a * k_b > *n || k_a * k_b == 0 {
                return Err(regime("requires 1 <= k_A*k_B <= n"));
            }
            out.delta = k_a * k_b;
            out.s_analytic = Some(n - k_a * k_b);
        }
    }
    out.refresh_ratio();
    Ok(out)
}

/// Writes the `idx`-th `k`-subset of `0..n` (lexicographic) into `out`.
fn unrank_combination(n: usize, k: usize, mut idx: u128, out: &mut Vec<usize>) {
    out.clear();
    let mut next = 0;
    for slot in 0..k {
        let mut x = next;
        loop {
            let rest = binomial((n - x - 1) as u128, (k - slot - 1) as u128);
            if idx < rest {
                break;
            }
            idx -= rest;
            x += 1;
        }
        out.push(x);
        next = x + 1;
    }
}

fn subset_count(n: usize, k: usize) -> u128 {
    binomial(n as u128, k as u128)
}

/// Largest `s` such that every set of `s` idle workers, with the rest
/// finished, leaves a decodable system, plus a straggler set of size `s + 1`
/// that is not decodable. Equivalent to scanning straggler sets by growing
/// size, but found as the largest undecodable set of finished workers, which
/// prunes most of the subset lattice. `budget` caps visited search nodes.
pub fn oracle_straggler_resilience_with_witness(plan: &EncodingPlan, budget: u128) -> Result<(usize, Vec<usize>)> {
    let levels = if plan.ell == 0 { vec![0] } else { vec![plan.ell, 0] };
    let (weight, w) = heaviest_undecodable(plan, &levels, budget)?;
    let finished = weight / plan.ell.max(1);
    let stragglers = (0..plan.n).filter(|&i| w[i] == 0).collect();
    Ok((plan.n - finished - 1, stragglers))
}

pub fn oracle_straggler_resilience(plan: &EncodingPlan, budget: u128) -> Result<usize> {
    oracle_straggler_resilience_with_witness(plan, budget).map(|(s, _)| s)
}

/// `Q` together with a heaviest undecodable state.
#[derive(Debug, Clone, PartialEq)]
pub struct QResult {
    pub q: usize,
    pub witness: ComputationState,
}

pub fn oracle_q(plan: &EncodingPlan, method: QMethod, budget: u128) -> Result<usize> {
    let r = match method {
        QMethod::Exhaustive => oracle_q_exhaustive(plan, budget)?,
        QMethod::StructureAware => oracle_q_structure(plan)?,
    };
    Ok(r.q)
}

fn state_count(plan: &EncodingPlan) -> u128 {
    (plan.ell as u128 + 1).checked_pow(plan.n as u32).unwrap_or(u128::MAX)
}

/// `1 +` the heaviest undecodable completion state over all `(ℓ+1)^n` states.
pub fn oracle_q_exhaustive(plan: &EncodingPlan, budget: u128) -> Result<QResult> {
    let needed = state_count(plan);
    if needed > budget {
        return Err(Error::Budget { needed, budget });
    }
    let levels: Vec<usize> = (0..=plan.ell).rev().collect();
    let (weight, w) = heaviest_undecodable(plan, &levels, budget)?;
    Ok(QResult { q: weight + 1, witness: ComputationState::new(w) })
}

/// Depth-first search over states whose per-worker counts are drawn from
/// `levels`, heaviest first, keeping an echelon basis per prefix. Branches
/// whose basis is already full are decodable everywhere below and are cut,
/// as are branches that cannot beat the heaviest undecodable state found.
fn heaviest_undecodable(plan: &EncodingPlan, levels: &[usize], budget: u128) -> Result<(usize, Vec<usize>)> {
    if generic_rank(plan, &ComputationState::full(plan))? < plan.delta() {
        return Err(Error::UnsupportedPlan("full completion is not decodable".into()));
    }
    let rows = FieldRows::draw(plan, FIELD_SEEDS[0]);
    let mut search = Search { plan, rows: &rows, levels, w: vec![0; plan.n], best: None, nodes: 0, budget };
    search.dfs(0, &mut RankTracker::new(plan.delta()), 0)?;
    Ok(search.best.expect("the empty state is undecodable"))
}

struct Search<'a> {
    plan: &'a EncodingPlan,
    rows: &'a FieldRows,
    levels: &'a [usize],
    w: Vec<usize>,
    best: Option<(usize, Vec<usize>)>,
    nodes: u128,
    budget: u128,
}

impl Search<'_> {
    fn dfs(&mut self, i: usize, basis: &mut RankTracker, weight: usize) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::Budget { needed: self.nodes, budget: self.budget });
        }
        let (n, ell) = (self.plan.n, self.plan.ell);
        if i == n {
            // the first draw may be unlucky; keep the state only if the exact check agrees
            let state = ComputationState::new(self.w.clone());
            if generic_rank(self.plan, &state)? < self.plan.delta() {
                self.best = Some((weight, self.w.clone()));
            }
            return Ok(());
        }
        // rank after the first k tasks of worker i; None once the basis is full
        let top = self.levels.iter().copied().max().unwrap_or(0);
        let mut ranks: Vec<Option<usize>> = vec![None; top + 1];
        ranks[0] = Some(basis.rank());
        for t in 0..top {
            basis.insert_sparse(self.rows.row(i, t));
            if basis.is_full() {
                break;
            }
            ranks[t + 1] = Some(basis.rank());
        }
        let rest = ell * (n - i - 1);
        // levels are heaviest first, so each truncation only drops rows
        for &k in self.levels {
            if let Some((b, _)) = self.best {
                if weight + k + rest <= b {
                    break;
                }
            }
            let Some(r) = ranks[k] else { continue };
            basis.truncate(r);
            self.w[i] = k;
            self.dfs(i + 1, basis, weight + k)?;
        }
        basis.truncate(ranks[0].expect("set above"));
        self.w[i] = 0;
        Ok(())
    }
}

/// `Q` for plans whose task supports form one partition of the unknowns into
/// blocks of equal size `β`, each block appearing at most once per worker.
/// Such a state is undecodable exactly when some block has fewer than `β`
/// processed tasks, so the heaviest undecodable state starves one block:
/// every worker stops just above that block, except `β − 1` workers that
/// gain the most by finishing.
pub fn oracle_q_structure(plan: &EncodingPlan) -> Result<QResult> {
    let unsupported = |m: &str| Error::UnsupportedPlan(format!("structure-aware oracle: {m}"));
    let mut ids: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut position: Vec<Vec<Option<usize>>> = Vec::new();
    for i in 0..plan.n {
        for t in 0..plan.ell {
            let mut s = plan.task_unknowns(i, t);
            s.sort_unstable();
            let next = ids.len();
            let id = *ids.entry(s).or_insert(next);
            if id == position.len() {
                position.push(vec![None; plan.n]);
            }
            if position[id][i].is_some() {
                return Err(unsupported("a block appears twice in one worker"));
            }
            position[id][i] = Some(t);
        }
    }
    let beta = ids.keys().next().map_or(0, |s| s.len());
    let mut seen = vec![false; plan.delta()];
    for s in ids.keys() {
        if s.len() != beta {
            return Err(unsupported("blocks differ in size"));
        }
        for &u in s {
            if std::mem::replace(&mut seen[u], true) {
                return Err(unsupported("blocks overlap"));
            }
        }
    }
    let mut best: Option<(usize, Vec<usize>)> = None;
    for pos in &position {
        let mut w: Vec<usize> = pos.iter().map(|p| p.unwrap_or(plan.ell)).collect();
        let mut gains: Vec<(usize, usize)> =
            pos.iter().enumerate().filter_map(|(i, p)| p.map(|p| (plan.ell - p, i))).collect();
        if gains.len() < beta {
            return Err(unsupported("a block is held by fewer than beta workers"));
        }
        gains.sort_unstable_by(|a, b| b.cmp(a));
        for &(_, i) in gains.iter().take(beta - 1) {
            w[i] = plan.ell;
        }
        let total = w.iter().sum();
        if best.as_ref().is_none_or(|b| total > b.0) {
            best = Some((total, w));
        }
    }
    let (weight, w) = best.ok_or_else(|| unsupported("empty plan"))?;
    Ok(QResult { q: weight + 1, witness: ComputationState::new(w) })
}

/// Largest condition number over all choices of `s` idle workers, the others
/// having finished every task.
pub fn worst_case_condition_number(plan: &EncodingPlan, s: usize, budget: u128) -> Result<f64> {
    worst_straggler_set(plan, s, budget).map(|(k, _)| k)
}

/// The set of `s` idle workers whose survivors give the largest condition
/// number, with that number. Ties go to the lexicographically first set.
pub fn worst_straggler_set(plan: &EncodingPlan, s: usize, budget: u128) -> Result<(f64, Vec<usize>)> {
    if s > plan.n {
        return Err(Error::Parameter(format!("cannot idle {s} of {} workers", plan.n)));
    }
    let total = subset_count(plan.n, s);
    if total > budget {
        return Err(Error::Budget { needed: total, budget });
    }
    let (kappa, idx) = (0..total as u64)
        .into_par_iter()
        .map(|idx| {
            let mut comb = Vec::with_capacity(s);
            unrank_combination(plan.n, s, idx as u128, &mut comb);
            let survivors: Vec<usize> = (0..plan.n).filter(|i| !comb.contains(i)).collect();
            condition_number(plan, &survivors).map(|k| (k, idx))
        })
        .try_reduce(
            || (f64::NEG_INFINITY, u64::MAX),
            |a, b| Ok(if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a }),
        )?;
    let mut comb = Vec::with_capacity(s);
    unrank_combination(plan.n, s, idx as u128, &mut comb);
    Ok((kappa, comb))
}

fn fractions(max_denom: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for d in 1..=max_denom {
        for k in 1..=d {
            if k.gcd(&d) == 1 {
                v.push((k, d));
            }
        }
    }
    v
}

fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|d| n.is_multiple_of(*d)).collect()
}

/// Configurations with `n <= max_n` and `Δ <= max_delta` on which a closed
/// form applies (exact or lower bound), one per construction and parameter
/// choice.
pub fn regime_sweep(max_n: usize, max_delta: usize) -> Vec<SchemeSpec> {
    let f = |k: usize, d: usize| Fraction::new(k as u64, d as u64).expect("positive denominator");
    let mut out = Vec::new();
    for n in 1..=max_n {
        for a2 in divisors(n) {
            for (a1, _) in fractions(a2).into_iter().filter(|&(_, d)| d == a2) {
                for beta in 1..=4 {
                    if a1 * beta > a2 || beta * a2 > max_delta {
                        continue;
                    }
                    out.push(SchemeSpec::BetaMatvec { n, gamma: f(a1, a2), beta, classes: ClassChoice::Trivial });
                    if beta == 2 && n == 2 * a2 {
                        out.push(SchemeSpec::BetaMatvec { n, gamma: f(a1, a2), beta, classes: ClassChoice::ShiftedPair });
                    }
                }
            }
        }
        if n % 5 == 0 && (3..=4).contains(&(n / 5)) && 15 <= max_delta {
            let indices = (0..n / 5).collect();
            out.push(SchemeSpec::BetaMatvec { n, gamma: f(1, 5), beta: 3, classes: ClassChoice::Kirkman { indices } });
        }
        for (a1, a2) in fractions(n) {
            for (b1, b2) in fractions(n) {
                if n % (a2 * b2) != 0 {
                    continue;
                }
                for (beta_a, beta_b) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
                    if a1 * beta_a > a2 || b1 * beta_b > b2 || beta_a * a2 * beta_b * b2 > max_delta {
                        continue;
                    }
                    let mut classes = vec![(ClassChoice::Trivial, ClassChoice::Trivial)];
                    if beta_a == 2 && beta_b == 1 && n == 2 * a2 * b2 {
                        classes.push((ClassChoice::ShiftedPair, ClassChoice::Trivial));
                    }
                    for (classes_a, classes_b) in classes {
                        out.push(SchemeSpec::BetaMatmat {
                            n,
                            gamma_a: f(a1, a2),
                            gamma_b: f(b1, b2),
                            beta_a,
                            beta_b,
                            classes_a,
                            classes_b,
                        });
                    }
                }
            }
        }
        if n <= max_delta {
            for ell_u in 1..=n {
                for ell_c in 0..=(n - ell_u) {
                    if ell_c > 0 && ell_u == n {
                        continue;
                    }
                    let gamma_c = if ell_c == 0 { Fraction::zero() } else { f(ell_c, n) };
                    out.push(SchemeSpec::CodedBottomMatvec { n, gamma_u: f(ell_u, n), gamma_c });
                }
            }
        }
        for a2 in 2..=n {
            for b2 in divisors(n / a2.min(n)) {
                if n % (a2 * b2) != 0 || a2 * (n / (a2 * b2)) * b2 > max_delta {
                    continue;
                }
                for a_u in 1..a2 {
                    for a_c in 1..=(a2 - a_u) {
                        for b1 in (1..=b2).filter(|b1| b1.gcd(&b2) == 1) {
                            out.push(SchemeSpec::CodedBottomMatmat {
                                n,
                                gamma_au: f(a_u, a2),
                                gamma_ac: f(a_c, a2),
                                gamma_b: f(b1, b2),
                            });
                        }
                    }
                }
            }
        }
        for k_a in 1..=n {
            if n.lcm(&k_a) <= max_delta {
                out.push(SchemeSpec::ScsMatvec { n, k_a });
            }
            for k_b in 2..=n {
                if k_a * k_b <= n && n.lcm(&k_a) * k_b <= max_delta {
                    out.push(SchemeSpec::ScsMatmat { n, k_a, k_b });
                }
            }
        }
    }
    out.retain(|s| analytic_metrics(s).is_ok());
    out
}

/// What [`evaluate`] computes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsOptions {
    pub analytic: bool,
    pub oracle: bool,
    pub kappa: bool,
    /// `None` picks exhaustive when the state space fits the budget, else the
    /// structure-aware method when the plan allows it.
    pub q_method: Option<QMethod>,
    pub budget: u128,
    pub seed: u64,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        MetricsOptions { analytic: true, oracle: true, kappa: false, q_method: None, budget: DEFAULT_BUDGET, seed: 0 }
    }
}

/// Analytic values, oracles and condition number for one configuration.
/// Failures are recorded in `status` rather than returned, so a batch always
/// yields one row per configuration.
pub fn evaluate(spec: &SchemeSpec, opts: &MetricsOptions) -> SchemeMetrics {
    let start = Instant::now();
    let mut out = SchemeMetrics::empty(spec);
    let mut status = Status::Ok;
    let note = |e: Error, status: &mut Status| {
        if status.is_ok() {
            *status = Status::from_error(&e);
        }
    };
    if opts.analytic {
        match analytic_metrics(spec) {
            Ok(a) => out = a,
            Err(e) => note(e, &mut status),
        }
    }
    let plan = match spec.build(opts.seed) {
        Ok(p) => p,
        Err(e) => {
            note(e, &mut status);
            out.status = status;
            out.seconds = start.elapsed().as_secs_f64();
            return out;
        }
    };
    out.delta = plan.delta();
    if opts.oracle {
        match oracle_straggler_resilience(&plan, opts.budget) {
            Ok(s) => out.s_oracle = Some(s),
            Err(e) => note(e, &mut status),
        }
        let method = opts.q_method.or_else(|| {
            if state_count(&plan) <= opts.budget {
                Some(QMethod::Exhaustive)
            } else if oracle_q_structure(&plan).is_ok() {
                Some(QMethod::StructureAware)
            } else {
                None
            }
        });
        match method {
            Some(m) => match oracle_q(&plan, m, opts.budget) {
                Ok(q) => {
                    out.q_oracle = Some(q);
                    out.oracle_method = Some(match m {
                        QMethod::Exhaustive => OracleMethod::Exhaustive,
                        QMethod::StructureAware => OracleMethod::StructureAware,
                    });
                }
                Err(e) => note(e, &mut status),
            },
            None => out.oracle_method = Some(OracleMethod::SubsetOnly),
        }
    }
    if opts.kappa {
        if let Some(s) = out.s_oracle.or(out.s_analytic) {
            match worst_case_condition_number(&plan, s, opts.budget) {
                Ok(k) => out.kappa_worst = Some(k),
                Err(e) => note(e, &mut status),
            }
        }
    }
    out.refresh_ratio();
    if status.is_ok() {
        status = out.check_consistency();
    }
    out.status = status;
    out.seconds = start.elapsed().as_secs_f64();
    out
}
