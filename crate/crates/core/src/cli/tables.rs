//! Fixed comparison tables at desk scale.
//!
//! Worker, storage and β parameters match the published configurations so
//! the `s` and `Q/Δ` cells are directly comparable. Wall-clock columns are
//! replaced by the expected flops of the busiest worker (full task list) at
//! 2% and 5% density, divided by the cheapest scheme in the table.

use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::{frac, Fraction};
use crate::metrics::{evaluate, worst_case_condition_number, MetricsOptions, Status};
use crate::schemes::{ClassChoice, SchemeSpec};
use crate::simulator::{task_costs, CostSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableId {
    /// Single versus multiple parallel classes, matrix-vector.
    III,
    /// n = 30, γ = 1/10 matrix-vector comparison.
    IvDesk,
    /// n = 18, γ_A = γ_B = 1/3 matrix-matrix comparison.
    V,
    /// n = 18, γ = 1/15 sparsely coded matrix-vector comparison.
    ViDesk,
    /// n = 24, γ_A = 1/4, γ_B = 1/5 sparsely coded matrix-matrix comparison.
    ViiDesk,
}

impl FromStr for TableId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "III" => Ok(TableId::III),
            "IV-DESK" | "IV" => Ok(TableId::IvDesk),
            "V" | "V-DESK" => Ok(TableId::V),
            "VI-DESK" | "VI" => Ok(TableId::ViDesk),
            "VII-DESK" | "VII" => Ok(TableId::ViiDesk),
            _ => Err(param(format!("unknown table '{s}' (expected III, IV-desk, V, VI-desk or VII-desk)"))),
        }
    }
}

impl TableId {
    pub fn label(self) -> &'static str {
        match self {
            TableId::III => "III",
            TableId::IvDesk => "IV-desk",
            TableId::V => "V",
            TableId::ViDesk => "VI-desk",
            TableId::ViiDesk => "VII-desk",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableOptions {
    /// Cross-check closed forms with the oracles (always on for table III,
    /// whose multi-class cells have no closed form).
    pub oracle: bool,
    pub kappa: bool,
    pub budget: u128,
    pub seed: u64,
}

impl Default for TableOptions {
    fn default() -> Self {
        TableOptions { oracle: false, kappa: false, budget: crate::metrics::DEFAULT_BUDGET, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub table: String,
    pub system: String,
    pub method: String,
    pub stragglers: Option<usize>,
    pub q: Option<usize>,
    pub delta: usize,
    /// `Q/Δ` unreduced, as tables usually print it.
    pub q_over_delta: Option<String>,
    pub kappa_worst: Option<f64>,
    pub cost_ratio_2pct: Option<f64>,
    pub cost_ratio_5pct: Option<f64>,
    pub status: String,
}

struct Entry {
    method: &'static str,
    spec: SchemeSpec,
    /// Evaluate the closed form (off where none exists).
    analytic: bool,
    oracle: bool,
    /// Report `Q` (dense baselines print none).
    show_q: bool,
}

fn entry(method: &'static str, spec: SchemeSpec) -> Entry {
    Entry { method, spec, analytic: true, oracle: false, show_q: true }
}

fn baseline(method: &'static str, spec: SchemeSpec) -> Entry {
    Entry { show_q: false, ..entry(method, spec) }
}

fn oracle_only(method: &'static str, spec: SchemeSpec) -> Entry {
    Entry { analytic: false, oracle: true, ..entry(method, spec) }
}

fn beta_mv(n: usize, d: u64, beta: usize, classes: ClassChoice) -> SchemeSpec {
    SchemeSpec::BetaMatvec { n, gamma: frac(1, d), beta, classes }
}

/// Column counts for the cost columns: (rows, cols_a, cols_b).
fn dims(id: TableId) -> (usize, usize, usize) {
    match id {
        TableId::III | TableId::IvDesk => (2000, 1800, 1),
        TableId::V => (2000, 1800, 1800),
        TableId::ViDesk => (1800, 1800, 1),
        TableId::ViiDesk => (2000, 1200, 1000),
    }
}

fn systems(id: TableId) -> Vec<(String, Vec<Entry>)> {
    match id {
        TableId::III => {
            let sys = |n: usize, d: u64, beta: usize, multi: ClassChoice, multi_analytic: bool| {
                let multi = if multi_analytic {
                    Entry { oracle: true, ..entry("beta-level multiple classes", beta_mv(n, d, beta, multi)) }
                } else {
                    oracle_only("beta-level multiple classes", beta_mv(n, d, beta, multi))
                };
                (
                    format!("n={n} gamma=1/{d} beta={beta}"),
                    vec![
                        baseline("dense", SchemeSpec::Polynomial { n, k_a: d as usize, k_b: 1, points: None }),
                        Entry { oracle: true, ..entry("beta-level single class", beta_mv(n, d, beta, ClassChoice::Trivial)) },
                        multi,
                    ],
                )
            };
            vec![
                sys(8, 4, 2, ClassChoice::ShiftedPair, true),
                sys(8, 4, 3, ClassChoice::Transversal, false),
                sys(10, 5, 3, ClassChoice::Kirkman { indices: vec![0, 1] }, false),
            ]
        }
        TableId::IvDesk => vec![(
            "n=30 gamma=1/10".into(),
            vec![
                baseline("polynomial", SchemeSpec::Polynomial { n: 30, k_a: 10, k_b: 1, points: None }),
                baseline("dense random", SchemeSpec::DenseRandom { n: 30, k_a: 10, k_b: 1 }),
                entry(
                    "uncoded cyclic",
                    SchemeSpec::CodedBottomMatvec { n: 30, gamma_u: frac(1, 10), gamma_c: Fraction::zero() },
                ),
                entry("uncoded", beta_mv(30, 10, 1, ClassChoice::Trivial)),
                entry("beta-level beta=2", beta_mv(30, 10, 2, ClassChoice::Trivial)),
                entry("beta-level beta=3", beta_mv(30, 10, 3, ClassChoice::Trivial)),
                entry(
                    "coded at bottom",
                    SchemeSpec::CodedBottomMatvec { n: 30, gamma_u: frac(1, 15), gamma_c: frac(1, 30) },
                ),
            ],
        )],
        TableId::V => {
            let bm = |beta: usize| SchemeSpec::BetaMatmat {
                n: 18,
                gamma_a: frac(1, 3),
                gamma_b: frac(1, 3),
                beta_a: beta,
                beta_b: beta,
                classes_a: ClassChoice::Trivial,
                classes_b: ClassChoice::Trivial,
            };
            vec![(
                "n=18 gamma_a=gamma_b=1/3".into(),
                vec![
                    baseline("polynomial", SchemeSpec::Polynomial { n: 18, k_a: 3, k_b: 3, points: None }),
                    baseline("dense random", SchemeSpec::DenseRandom { n: 18, k_a: 3, k_b: 3 }),
                    entry("uncoded", bm(1)),
                    entry("beta-level beta_a=beta_b=2", bm(2)),
                ],
            )]
        }
        TableId::ViDesk => vec![(
            "n=18 gamma=1/15".into(),
            vec![
                baseline("polynomial", SchemeSpec::Polynomial { n: 18, k_a: 15, k_b: 1, points: None }),
                baseline("dense random", SchemeSpec::DenseRandom { n: 18, k_a: 15, k_b: 1 }),
                entry("sparsely coded", SchemeSpec::ScsMatvec { n: 18, k_a: 15 }),
            ],
        )],
        TableId::ViiDesk => vec![(
            "n=24 gamma_a=1/4 gamma_b=1/5".into(),
            vec![
                baseline("polynomial", SchemeSpec::Polynomial { n: 24, k_a: 4, k_b: 5, points: None }),
                baseline("dense random", SchemeSpec::DenseRandom { n: 24, k_a: 4, k_b: 5 }),
                entry("sparsely coded", SchemeSpec::ScsMatmat { n: 24, k_a: 4, k_b: 5 }),
            ],
        )],
    }
}

fn busiest_worker_flops(spec: &SchemeSpec, seed: u64, dims: (usize, usize, usize), density: f64) -> Result<f64> {
    let plan = spec.build(seed)?;
    let (rows, ca, cb) = dims;
    let costs = task_costs(
        &plan,
        CostSource::Expected {
            rows,
            width_a: ca / plan.delta_a,
            density_a: density,
            width_b: cb / plan.delta_b,
            density_b: density,
        },
    )?;
    Ok(costs.iter().map(|w| w.iter().sum::<f64>()).fold(0.0, f64::max))
}

/// Rows of one table, in the order of the published layout.
pub fn cmd_table(id: TableId, opts: &TableOptions) -> Result<Vec<TableRow>> {
    let mut rows = Vec::new();
    for (system, entries) in systems(id) {
        let mut flops = Vec::new();
        for e in &entries {
            let m = evaluate(
                &e.spec,
                &MetricsOptions {
                    analytic: e.analytic,
                    oracle: e.oracle || opts.oracle,
                    kappa: false,
                    q_method: None,
                    budget: opts.budget,
                    seed: opts.seed,
                },
            );
            let s = m.s_oracle.or(m.s_analytic);
            let q = if e.show_q { m.q_oracle.or(m.q_analytic) } else { None };
            let mut status = m.status.clone();
            let kappa_worst = match (opts.kappa, s) {
                (true, Some(s)) => match worst_case_condition_number(&e.spec.build(opts.seed)?, s, opts.budget) {
                    Ok(k) => Some(k),
                    Err(Error::Budget { needed, budget }) => {
                        if status.is_ok() {
                            status = Status::Budget(format!("kappa needs {needed} subsets > {budget}"));
                        }
                        None
                    }
                    Err(err) => return Err(err),
                },
                _ => None,
            };
            if id != TableId::III {
                let d = dims(id);
                flops.push((busiest_worker_flops(&e.spec, opts.seed, d, 0.02)?, busiest_worker_flops(&e.spec, opts.seed, d, 0.05)?));
            }
            rows.push(TableRow {
                table: id.label().into(),
                system: system.clone(),
                method: e.method.into(),
                stragglers: s,
                q,
                delta: m.delta,
                q_over_delta: q.map(|q| format!("{q}/{}", m.delta)),
                kappa_worst,
                cost_ratio_2pct: None,
                cost_ratio_5pct: None,
                status: status.to_string(),
            });
        }
        if !flops.is_empty() {
            let min2 = flops.iter().map(|f| f.0).fold(f64::INFINITY, f64::min);
            let min5 = flops.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
            let start = rows.len() - flops.len();
            for (r, f) in rows[start..].iter_mut().zip(&flops) {
                r.cost_ratio_2pct = Some(f.0 / min2);
                r.cost_ratio_5pct = Some(f.1 / min5);
            }
        }
    }
    Ok(rows)
}

pub fn write_table_csv<W: Write>(out: W, rows: &[TableRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
