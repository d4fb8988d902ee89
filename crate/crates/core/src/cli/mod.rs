//! Batch front-end behind the `strag` binary: build plans, compute metrics,
//! simulate, verify decoding end to end and regenerate comparison tables.
//!
//! Every command is deterministic given the config's seed. Exit codes: 0
//! success, 2 regime error, 3 analytic/oracle mismatch, 4 decode failure,
//! 5 budget exceeded, 1 anything else.

pub mod config;
pub mod tables;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::decoder::{decode, ComputationState, Problem};
use crate::error::{param, Error, Result};
use crate::metrics::{self, evaluate, worst_straggler_set, MetricsOptions, SchemeMetrics, Status};
use crate::schemes::{EncodingPlan, SchemeSpec};
use crate::simulator::{compare_schemes, task_costs, write_compare_csv, CompareEntry, CompareRow, CostSource};

pub use config::{CostMode, ExperimentConfig, MatrixConfig};
pub use tables::{cmd_table, write_table_csv, TableId, TableOptions, TableRow};

/// Relative Frobenius error an end-to-end decode must stay under.
pub const E2E_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "strag", version, about = "Straggler-tolerant coded matrix multiplication")]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Run the oracles.
    #[arg(long, global = true)]
    pub oracle: bool,
    /// Evaluate closed forms.
    #[arg(long, global = true)]
    pub analytic: bool,
    /// Compute worst-case condition numbers.
    #[arg(long, global = true)]
    pub kappa: bool,
    /// Enumeration budget for the oracles.
    #[arg(long, global = true)]
    pub budget: Option<u64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Build and serialize encoding plans.
    Plan,
    /// Straggler resilience, Q and condition numbers as CSV.
    Metrics,
    /// Simulated completion times.
    Simulate,
    /// Encode, compute, decode and compare with the direct product.
    E2e,
    /// Regenerate a comparison table (III, IV-desk, V, VI-desk, VII-desk).
    Table { id: String },
}

/// Parses, runs and reports; returns the process exit code.
pub fn main_with(args: Args) -> i32 {
    let stdout = std::io::stdout();
    match run(&args, &mut stdout.lock()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(args: &Args) -> Result<ExperimentConfig> {
    let path = args.config.as_ref().ok_or_else(|| param("--config is required for this command"))?;
    let mut c = ExperimentConfig::load(path)?;
    if let Some(s) = args.seed {
        c.seed = s;
    }
    if let Some(b) = args.budget {
        c.budget = b;
    }
    c.kappa |= args.kappa;
    if args.out.is_some() {
        c.output = args.out.clone();
    }
    Ok(c)
}

/// Runs one command, writing results to `--out` (atomically) or `stdout`.
pub fn run(args: &Args, stdout: &mut dyn Write) -> Result<i32> {
    let mut buf = Vec::new();
    let (code, out) = match &args.command {
        Command::Table { id } => {
            let id: TableId = id.parse()?;
            let opts = TableOptions {
                oracle: args.oracle,
                kappa: args.kappa,
                budget: args.budget.map_or(metrics::DEFAULT_BUDGET, u128::from),
                seed: args.seed.unwrap_or(0),
            };
            write_table_csv(&mut buf, &cmd_table(id, &opts)?)?;
            (0, args.out.clone())
        }
        cmd => {
            let c = load_config(args)?;
            let code = match cmd {
                Command::Plan => {
                    let (json, summary) = cmd_plan(&c)?;
                    buf.extend_from_slice(json.as_bytes());
                    eprint!("{summary}");
                    0
                }
                Command::Metrics => {
                    let both = !args.oracle && !args.analytic;
                    let flags = MetricsFlags {
                        analytic: args.analytic || both,
                        oracle: args.oracle || both,
                        kappa: c.kappa,
                    };
                    let rows = cmd_metrics(&c, flags);
                    metrics::write_csv(&mut buf, &rows)?;
                    metrics_exit_code(&rows)
                }
                Command::Simulate => {
                    write_compare_csv(&mut buf, &cmd_simulate(&c)?)?;
                    0
                }
                Command::E2e => {
                    let rows = cmd_e2e(&c)?;
                    write_e2e_csv(&mut buf, &rows)?;
                    if rows.iter().all(|r| r.pass) {
                        0
                    } else {
                        for r in rows.iter().filter(|r| !r.pass) {
                            eprintln!(
                                "decode failure: {} {} kappa = {:e}, residual = {:e}, error = {:e}",
                                r.scheme, r.scenario, r.kappa, r.residual, r.relative_error
                            );
                        }
                        4
                    }
                }
                Command::Table { .. } => unreachable!(),
            };
            (code, c.output.clone())
        }
    };
    match out {
        Some(path) => write_atomic(&path, &buf)?,
        None => stdout.write_all(&buf)?,
    }
    Ok(code)
}

/// Writes to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Plan JSON (one object, or an array for several schemes) and a text
/// summary with Δ, ℓ and each worker's supports.
pub fn cmd_plan(config: &ExperimentConfig) -> Result<(String, String)> {
    let plans = config.validate()?;
    let json = match plans.as_slice() {
        [one] => serde_json::to_string_pretty(one)?,
        many => serde_json::to_string_pretty(many)?,
    };
    Ok((json, plans.iter().map(describe_plan).collect()))
}

/// Reads what [`cmd_plan`] writes.
pub fn load_plans(text: &str) -> Result<Vec<EncodingPlan>> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    let plans = if v.is_array() { serde_json::from_value(v)? } else { vec![serde_json::from_value(v)?] };
    for p in &plans {
        EncodingPlan::validate(p)?;
    }
    Ok(plans)
}

fn fmt_supports(sets: Vec<Vec<usize>>) -> String {
    sets.iter()
        .map(|s| format!("{{{}}}", s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn describe_plan(plan: &EncodingPlan) -> String {
    let mut s = format!(
        "{}: n = {}, delta = {} ({} x {}), ell = {}\n",
        plan.scheme_id,
        plan.n,
        plan.delta(),
        plan.delta_a,
        plan.delta_b,
        plan.ell
    );
    for (i, w) in plan.workers.iter().enumerate() {
        s.push_str(&format!("  W{i}: A {}", fmt_supports(w.a.iter().map(|e| e.support()).collect())));
        if !w.b.is_empty() {
            s.push_str(&format!(" | B {}", fmt_supports(w.b.iter().map(|e| e.support()).collect())));
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricsFlags {
    pub analytic: bool,
    pub oracle: bool,
    pub kappa: bool,
}

/// One metrics row per configured scheme; failures land in `status`.
pub fn cmd_metrics(config: &ExperimentConfig, flags: MetricsFlags) -> Vec<SchemeMetrics> {
    let opts = MetricsOptions {
        analytic: flags.analytic,
        oracle: flags.oracle,
        kappa: flags.kappa,
        q_method: None,
        budget: config.budget as u128,
        seed: config.seed,
    };
    config.schemes.iter().map(|s| evaluate(s, &opts)).collect()
}

/// Mismatch outranks budget, budget outranks other failures and regime
/// errors.
pub fn metrics_exit_code(rows: &[SchemeMetrics]) -> i32 {
    let rank = |s: &Status| match s {
        Status::Ok => 0,
        Status::Regime(_) => 1,
        Status::Failed(_) => 2,
        Status::Budget(_) => 3,
        Status::Mismatch(_) => 4,
    };
    rows.iter().map(|r| &r.status).max_by_key(|s| rank(s)).map_or(0, Status::exit_code)
}

fn costs_for(config: &ExperimentConfig, plan: &EncodingPlan) -> Result<Vec<Vec<f64>>> {
    match config.matrices.mode {
        CostMode::Expected => task_costs(plan, config.matrices.expected(plan)?),
        CostMode::Measured => {
            let inp = config.matrices.generate(plan, config.seed)?;
            let problem = Problem::new(plan, inp.a, inp.rhs)?;
            task_costs(plan, CostSource::Measured(&problem))
        }
    }
}

/// Straggler resilience from the closed form, else the oracle.
fn resilience(spec: Option<&SchemeSpec>, plan: &EncodingPlan, budget: u128) -> Result<usize> {
    if let Some(s) = spec.and_then(|s| metrics::analytic_metrics(s).ok()).and_then(|m| m.s_analytic) {
        return Ok(s);
    }
    metrics::oracle_straggler_resilience(plan, budget)
}

/// Simulated completion statistics per scheme.
pub fn cmd_simulate(config: &ExperimentConfig) -> Result<Vec<CompareRow>> {
    let plans = config.validate()?;
    let entries = plans
        .into_iter()
        .zip(&config.schemes)
        .map(|(plan, spec)| {
            let costs = costs_for(config, &plan)?;
            let kappa_worst = if config.kappa {
                let s = resilience(Some(spec), &plan, config.budget as u128)?;
                match metrics::worst_case_condition_number(&plan, s, config.budget as u128) {
                    Ok(k) => Some(k),
                    Err(Error::Budget { .. }) => None,
                    Err(e) => return Err(e),
                }
            } else {
                None
            };
            Ok(CompareEntry { label: spec.id(), plan, costs, kappa_worst })
        })
        .collect::<Result<Vec<_>>>()?;
    compare_schemes(&entries, config.trials, &config.speed, config.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct E2eRow {
    pub scheme: String,
    pub scenario: String,
    pub symbols: usize,
    pub kappa: f64,
    pub residual: f64,
    pub relative_error: f64,
    pub pass: bool,
}

pub fn write_e2e_csv<W: Write>(out: W, rows: &[E2eRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["scheme", "scenario", "symbols", "kappa", "residual", "relative_error", "pass"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Random state with exactly `total` finished tasks, each task added to a
/// uniformly chosen worker that still has work left.
pub fn random_state<R: Rng>(plan: &EncodingPlan, total: usize, rng: &mut R) -> Result<ComputationState> {
    if total > plan.total_tasks() {
        return Err(param(format!("{total} tasks exceed the plan's {}", plan.total_tasks())));
    }
    let mut w = vec![0; plan.n];
    for _ in 0..total {
        let open: Vec<usize> = (0..plan.n).filter(|&i| w[i] < plan.ell).collect();
        w[open[rng.gen_range(0..open.len())]] += 1;
    }
    Ok(ComputationState::new(w))
}

fn relative_error(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let d = y.norm();
    if d == 0.0 {
        x.norm()
    } else {
        (x - y).norm() / d
    }
}

/// Decodes one state and compares with the direct product.
pub fn check_state(plan: &EncodingPlan, problem: &Problem, direct: &DMatrix<f64>, state: &ComputationState) -> Result<E2eRow> {
    let products = problem.products(plan, state)?;
    let row = |kappa, residual, err: f64| E2eRow {
        scheme: plan.scheme_id.clone(),
        scenario: String::new(),
        symbols: state.total(),
        kappa,
        residual,
        relative_error: err,
        pass: err < E2E_TOLERANCE,
    };
    match decode(plan, state, &products) {
        Ok(d) => {
            let got = d.assemble_product(plan.delta_a, plan.delta_b);
            Ok(row(d.kappa, d.residual, relative_error(&got, direct)))
        }
        Err(Error::DecodeFailure { kappa, residual }) => Ok(row(kappa, residual, f64::INFINITY)),
        Err(e) => Err(e),
    }
}

/// For each scheme: the worst straggler set of size `s` (largest condition
/// number), then `random_states` random partial states with `Q` finished
/// tasks. Schemes with no known `Q` get the straggler check only.
pub fn cmd_e2e(config: &ExperimentConfig) -> Result<Vec<E2eRow>> {
    let plans = config.validate()?;
    let budget = config.budget as u128;
    let mut rows = Vec::new();
    for (plan, spec) in plans.iter().zip(&config.schemes) {
        let inp = config.matrices.generate(plan, config.seed)?;
        let problem = Problem::new(plan, inp.a, inp.rhs)?;
        let direct = problem.direct_product()?;
        let m = evaluate(spec, &MetricsOptions { budget, seed: config.seed, ..Default::default() });
        let s = match m.s_oracle.or(m.s_analytic) {
            Some(s) => s,
            None => resilience(Some(spec), plan, budget)?,
        };
        let (scenario, idle) = match worst_straggler_set(plan, s, budget) {
            Ok((_, idle)) => ("worst_stragglers", idle),
            Err(Error::Budget { .. }) => {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                let mut all: Vec<usize> = (0..plan.n).collect();
                rand::seq::SliceRandom::shuffle(all.as_mut_slice(), &mut rng);
                all.truncate(s);
                all.sort_unstable();
                ("random_stragglers", all)
            }
            Err(e) => return Err(e),
        };
        let survivors: Vec<usize> = (0..plan.n).filter(|i| !idle.contains(i)).collect();
        let mut r = check_state(plan, &problem, &direct, &ComputationState::survivors(plan, &survivors))?;
        r.scenario = format!("{scenario}{idle:?}");
        rows.push(r);
        if let Some(q) = m.q_oracle.or(m.q_analytic) {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
            for k in 0..config.random_states {
                let state = random_state(plan, q, &mut rng)?;
                let mut r = check_state(plan, &problem, &direct, &state)?;
                r.scenario = format!("partial_q{q}_{k}");
                rows.push(r);
            }
        }
    }
    Ok(rows)
}
