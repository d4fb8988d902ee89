//! Acceptance checks. Runs without the libtest harness so every criterion
//! prints its PASS/FAIL line even when all pass; exits nonzero on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_rational::Ratio;
use strag_core::blockmat::{generate_sparse, BlockPartition};
use strag_core::cli::{cmd_e2e, CostMode, ExperimentConfig};
use strag_core::decoder::{Operand, Problem};
use strag_core::metrics::{
    analytic_metrics, oracle_q_exhaustive, oracle_q_structure, oracle_straggler_resilience, regime_sweep,
    worst_case_condition_number, DEFAULT_BUDGET,
};
use strag_core::schemes::{build_pair_sum_toy, ClassChoice, EncodingPlan, SchemeSpec};
use strag_core::simulator::{encoded_density, task_costs, CostSource};
use strag_core::{frac, Fraction};

const SMALL_LIMIT: Duration = Duration::from_secs(5);
const EXHAUSTIVE_LIMIT: Duration = Duration::from_secs(120);
const MULTI_CLASS_LIMIT: Duration = Duration::from_secs(300);
const E2E_LIMIT: Duration = Duration::from_secs(180);
const SWEEP_LIMIT: Duration = Duration::from_secs(900);

const UNCODED_KAPPA: f64 = 1.7321;
const KAPPA_TOL: f64 = 1e-3;
const DENSE_RATIO_BAND: (f64, f64) = (2.5, 6.0);
const E2E_REL_ERROR: f64 = 1e-6;
const E2E_RANDOM_STATES: usize = 20;

const SWEEP_MAX_N: usize = 20;
const SWEEP_MAX_DELTA: usize = 40;
const SWEEP_EXHAUSTIVE_MAX_N: usize = 10;
const SWEEP_SEEDS: u64 = 5;

/// Collects named sub-checks of one criterion.
#[derive(Default)]
struct Checks {
    items: Vec<(bool, String)>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        self.items.push((ok, what.into()));
    }

    fn eq<T: PartialEq + std::fmt::Debug>(&mut self, what: &str, got: T, want: T) {
        let ok = got == want;
        self.check(ok, format!("{what} = {got:?}{}", if ok { String::new() } else { format!(" (want {want:?})") }));
    }

    fn within(&mut self, what: &str, elapsed: Duration, limit: Duration) {
        self.check(elapsed <= limit, format!("{what} {:.1}s <= {}s", elapsed.as_secs_f64(), limit.as_secs()));
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn criterion(id: &str, title: &str, body: impl FnOnce(&mut Checks)) -> bool {
    let start = Instant::now();
    let mut checks = Checks::default();
    let panicked = catch_unwind(AssertUnwindSafe(|| body(&mut checks))).err().map(|e| {
        e.downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into())
    });
    let pass = panicked.is_none() && !checks.items.is_empty() && checks.items.iter().all(|(ok, _)| *ok);
    let mut detail: Vec<String> =
        checks.items.iter().map(|(ok, s)| if *ok { s.clone() } else { format!("FAILED {s}") }).collect();
    if let Some(p) = panicked {
        detail.push(format!("FAILED panic: {p}"));
    }
    println!(
        "[{}] {id} {title} ({:.1}s): {}",
        if pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64(),
        detail.join("; ")
    );
    pass
}

fn beta_mv(n: usize, gamma: Fraction, beta: usize, classes: ClassChoice) -> SchemeSpec {
    SchemeSpec::BetaMatvec { n, gamma, beta, classes }
}

fn s_oracle(plan: &EncodingPlan) -> usize {
    oracle_straggler_resilience(plan, DEFAULT_BUDGET).unwrap()
}

fn q_exhaustive(plan: &EncodingPlan) -> usize {
    oracle_q_exhaustive(plan, DEFAULT_BUDGET).unwrap().q
}

fn small_plans(c: &mut Checks) {
    let (r, t) = timed(|| {
        let p = beta_mv(5, frac(3, 5), 1, ClassChoice::Trivial).build(0).unwrap();
        (s_oracle(&p), q_exhaustive(&p))
    });
    c.eq("uncoded n=5 gamma=3/5 (s, Q)", r, (2, 10));
    c.within("uncoded", t, SMALL_LIMIT);

    let (r, t) = timed(|| {
        let p = SchemeSpec::CodedBottomMatvec { n: 5, gamma_u: frac(2, 5), gamma_c: frac(1, 5) }.build(0).unwrap();
        (s_oracle(&p), q_exhaustive(&p))
    });
    c.eq("coded-bottom n=5 (s, Q)", r, (3, 8));
    c.within("coded-bottom", t, SMALL_LIMIT);

    let (q, t) = timed(|| q_exhaustive(&build_pair_sum_toy().unwrap()));
    c.eq("three-worker pair-sum Q", q, 3);
    c.within("pair-sum", t, SMALL_LIMIT);
}

fn beta_matvec(c: &mut Checks) {
    let spec = beta_mv(12, frac(1, 4), 3, ClassChoice::Trivial);
    let m = analytic_metrics(&spec).unwrap();
    c.eq("n=12 gamma=1/4 beta=3 analytic (s, Q)", (m.s_analytic, m.q_analytic), (Some(6), Some(25)));
    let p = spec.build(0).unwrap();
    c.eq("structure-aware Q", oracle_q_structure(&p).unwrap().q, 25);
    c.eq("subset s", s_oracle(&p), 6);

    let spec = beta_mv(8, frac(1, 4), 2, ClassChoice::Trivial);
    let m = analytic_metrics(&spec).unwrap();
    c.eq("n=8 gamma=1/4 beta=2 analytic (s, Q)", (m.s_analytic, m.q_analytic), (Some(2), Some(13)));
    let (r, t) = timed(|| {
        let p = spec.build(0).unwrap();
        (s_oracle(&p), q_exhaustive(&p))
    });
    c.eq("exhaustive (s, Q)", r, (2, 13));
    c.within("exhaustive", t, EXHAUSTIVE_LIMIT);
}

fn multi_class(c: &mut Checks) {
    let cells = [
        (8, frac(1, 4), 2, ClassChoice::ShiftedPair, 3, 11, 8),
        (8, frac(1, 4), 3, ClassChoice::Transversal, 4, 14, 12),
        (10, frac(1, 5), 3, ClassChoice::Kirkman { indices: vec![0, 1] }, 4, 20, 15),
    ];
    for (n, g, beta, classes, s, q, delta) in cells {
        let label = format!("n={n} beta={beta} {}", classes.label());
        let (r, t) = timed(|| {
            let p = beta_mv(n, g, beta, classes).build(0).unwrap();
            (s_oracle(&p), format!("{}/{}", q_exhaustive(&p), p.delta()))
        });
        c.eq(&format!("{label} (s, Q/delta)"), r, (s, format!("{q}/{delta}")));
        c.within(&label, t, MULTI_CLASS_LIMIT);
    }
    let m = analytic_metrics(&beta_mv(8, frac(1, 4), 2, ClassChoice::ShiftedPair)).unwrap();
    c.eq("shifted-pair closed form Q = n*ell - ell(ell+1) + 1", m.q_analytic, Some(11));
}

fn beta_matmat(c: &mut Checks) {
    let mm = |n, g, beta| SchemeSpec::BetaMatmat {
        n,
        gamma_a: g,
        gamma_b: g,
        beta_a: beta,
        beta_b: beta,
        classes_a: ClassChoice::Trivial,
        classes_b: ClassChoice::Trivial,
    };
    let spec = mm(36, frac(1, 3), 2);
    let m = analytic_metrics(&spec).unwrap();
    c.eq("n=36 analytic (s, Q)", (m.s_analytic, m.q_analytic), (Some(12), Some(117)));
    c.eq("n=36 structure-aware Q", oracle_q_structure(&spec.build(0).unwrap()).unwrap().q, 117);

    let small = mm(12, frac(1, 2), 2);
    let m = analytic_metrics(&small).unwrap();
    let p = small.build(0).unwrap();
    c.eq("n=12 reduced instance analytic s", m.s_analytic, Some(8));
    c.eq("n=12 subset s", s_oracle(&p), 8);
    c.eq("n=12 structure-aware Q vs analytic", Some(oracle_q_structure(&p).unwrap().q), m.q_analytic);
}

fn coded_bottom(c: &mut Checks) {
    let spec = SchemeSpec::CodedBottomMatvec { n: 5, gamma_u: frac(2, 5), gamma_c: frac(1, 5) };
    let m = analytic_metrics(&spec).unwrap();
    c.eq("matvec n=5 analytic (s, Q)", (m.s_analytic, m.q_analytic), (Some(3), Some(8)));
    let spec =
        SchemeSpec::CodedBottomMatmat { n: 12, gamma_au: frac(1, 3), gamma_ac: frac(1, 3), gamma_b: frac(3, 4) };
    c.eq("matmat n=12 kappa_min", strag_core::metrics::kappa_min(1, 3, 3, 1, 1), 2);
    let s = analytic_metrics(&spec).unwrap().s_analytic.unwrap();
    c.eq("matmat n=12 threshold", 12 - s, 5);
    c.eq("matmat n=12 subset oracle threshold", 12 - s_oracle(&spec.build(0).unwrap()), 5);
}

fn scs_figures(c: &mut Checks) {
    let p = SchemeSpec::ScsMatvec { n: 6, k_a: 4 }.build(0).unwrap();
    c.eq("matvec n=6 k_A=4 (Q, threshold)", (q_exhaustive(&p), 6 - s_oracle(&p)), (12, 4));
    let p = SchemeSpec::ScsMatmat { n: 5, k_a: 2, k_b: 2 }.build(0).unwrap();
    let q = q_exhaustive(&p);
    c.eq("matmat n=5 k_A=k_B=2 (Q, s)", (q, s_oracle(&p)), (21, 1));
    c.eq("Q/delta", q as f64 / p.delta() as f64, 1.05);
    let m = analytic_metrics(&SchemeSpec::ScsMatmat { n: 24, k_a: 4, k_b: 5 }).unwrap();
    c.eq("n=24 k_A=4 k_B=5 analytic s", m.s_analytic, Some(4));

    let mut count = 0;
    let mut bad = Vec::new();
    for n in 1..=40usize {
        for k_a in 1..=n {
            for k_b in 1..=n / k_a {
                let m = analytic_metrics(&SchemeSpec::ScsMatmat { n, k_a, k_b }).unwrap();
                let s = (n - k_a * k_b) as u64;
                let want = Ratio::from_integer(1u64) + Ratio::new((k_b as u64 - 1) * s, (n * k_a * k_b) as u64);
                count += 1;
                if m.q_over_delta.map(|f| f.ratio()) != Some(want) {
                    bad.push((n, k_a, k_b));
                }
            }
        }
    }
    c.check(bad.is_empty(), format!("Q/delta identity over {count} configurations, failures {bad:?}"));
}

fn scs_published_ratio(c: &mut Checks) {
    let m = analytic_metrics(&SchemeSpec::ScsMatmat { n: 24, k_a: 4, k_b: 5 }).unwrap();
    c.eq("n=24 k_A=4 k_B=5 analytic Q/delta", m.q_over_delta, Some(frac(7, 6)));
}

fn condition_numbers(c: &mut Checks) {
    let p = beta_mv(30, frac(1, 10), 1, ClassChoice::Trivial).build(0).unwrap();
    let k = worst_case_condition_number(&p, 2, DEFAULT_BUDGET).unwrap();
    c.check((k - UNCODED_KAPPA).abs() <= KAPPA_TOL, format!("uncoded n=30 gamma=1/10 s=2 kappa = {k:.5}"));

    // pinned plan seeds; the ordering between beta = 3 and the polynomial
    // plan depends on the random draw at this size
    for (n, d, seed) in [(10usize, 5u64, 0u64), (12, 6, 0)] {
        let mut specs: Vec<SchemeSpec> =
            (1..=3).map(|beta| beta_mv(n, frac(1, d), beta, ClassChoice::Trivial)).collect();
        specs.push(SchemeSpec::Polynomial { n, k_a: d as usize, k_b: 1, points: None });
        let ks: Vec<f64> = specs
            .iter()
            .map(|s| {
                let sv = analytic_metrics(s).unwrap().s_analytic.unwrap();
                worst_case_condition_number(&s.build(seed).unwrap(), sv, DEFAULT_BUDGET).unwrap()
            })
            .collect();
        let ordered = ks.windows(2).all(|w| w[0] < w[1]);
        let shown: Vec<String> = ks.iter().map(|k| format!("{k:.4e}")).collect();
        c.check(ordered, format!("n={n} gamma=1/{d} seed {seed}: uncoded < beta2 < beta3 < polynomial: {}", shown.join(" < ")));
    }
}

fn end_to_end(c: &mut Checks) {
    let f = frac;
    let schemes = vec![
        beta_mv(5, f(3, 5), 1, ClassChoice::Trivial),
        beta_mv(12, f(1, 4), 3, ClassChoice::Trivial),
        beta_mv(8, f(1, 4), 2, ClassChoice::ShiftedPair),
        beta_mv(8, f(1, 4), 3, ClassChoice::Transversal),
        beta_mv(10, f(1, 5), 3, ClassChoice::Kirkman { indices: vec![0, 1] }),
        SchemeSpec::BetaMatmat {
            n: 18,
            gamma_a: f(1, 3),
            gamma_b: f(1, 3),
            beta_a: 2,
            beta_b: 2,
            classes_a: ClassChoice::Trivial,
            classes_b: ClassChoice::Trivial,
        },
        SchemeSpec::CodedBottomMatvec { n: 5, gamma_u: f(2, 5), gamma_c: f(1, 5) },
        SchemeSpec::CodedBottomMatmat { n: 6, gamma_au: f(1, 3), gamma_ac: f(1, 3), gamma_b: f(1, 2) },
        SchemeSpec::ScsMatvec { n: 6, k_a: 4 },
        SchemeSpec::ScsMatmat { n: 5, k_a: 2, k_b: 2 },
        SchemeSpec::Polynomial { n: 12, k_a: 3, k_b: 3, points: None },
        SchemeSpec::DenseRandom { n: 12, k_a: 3, k_b: 3 },
    ];
    let n_schemes = schemes.len();
    let mut cfg = ExperimentConfig::new(schemes);
    cfg.matrices.rows = 1200;
    cfg.matrices.cols_a = 720;
    cfg.matrices.cols_b = 360;
    cfg.matrices.density_a = 0.03;
    cfg.matrices.density_b = 0.03;
    cfg.matrices.mode = CostMode::Measured;
    cfg.random_states = E2E_RANDOM_STATES;
    cfg.seed = 3;
    let (rows, t) = timed(|| cmd_e2e(&cfg).unwrap());
    let worst = rows.iter().filter(|r| r.scenario.starts_with("worst_stragglers")).count();
    let partial = rows.iter().filter(|r| r.scenario.starts_with("partial_q")).count();
    c.eq("schemes with a worst straggler set", worst, n_schemes);
    c.eq("random states at Q", partial, n_schemes * E2E_RANDOM_STATES);
    let max_err = rows.iter().map(|r| r.relative_error).fold(0.0, f64::max);
    let failed: Vec<String> =
        rows.iter().filter(|r| r.relative_error >= E2E_REL_ERROR).map(|r| format!("{} {}", r.scheme, r.scenario)).collect();
    c.check(failed.is_empty(), format!("{} decodes, max relative error {max_err:.2e}, failures {failed:?}", rows.len()));
    c.within("total", t, E2E_LIMIT);
}

fn cost_trend(c: &mut Checks) {
    const SIGMA: f64 = 0.03;
    // all three plans split A into the same four block-columns
    let uncoded = beta_mv(4, frac(1, 4), 1, ClassChoice::Trivial).build(0).unwrap();
    let beta2 = beta_mv(4, frac(1, 2), 2, ClassChoice::Trivial).build(0).unwrap();
    let dense = SchemeSpec::Polynomial { n: 8, k_a: 4, k_b: 1, points: None }.build(0).unwrap();
    let a = generate_sparse(2000, 2000, SIGMA, 17).unwrap();
    assert_eq!(BlockPartition::new(a.cols(), 4).unwrap().block_width(), 500);
    let mean_task = |p: &EncodingPlan| {
        let problem = Problem::new(p, a.clone(), Operand::Vector(vec![1.0; a.rows()])).unwrap();
        let costs = task_costs(p, CostSource::Measured(&problem)).unwrap();
        let all: Vec<f64> = costs.into_iter().flatten().collect();
        all.iter().sum::<f64>() / all.len() as f64
    };
    let (u, b2, d) = (mean_task(&uncoded), mean_task(&beta2), mean_task(&dense));
    let (rd, rb) = (d / u, b2 / u);
    c.check(
        rd >= DENSE_RATIO_BAND.0 && rd <= DENSE_RATIO_BAND.1,
        format!("measured dense/uncoded = {rd:.3} in [{}, {}]", DENSE_RATIO_BAND.0, DENSE_RATIO_BAND.1),
    );
    c.check(1.0 < rb && rb < rd, format!("measured beta=2/uncoded = {rb:.3} strictly between"));
    let (ed, eb) = (encoded_density(SIGMA, 4) / SIGMA, encoded_density(SIGMA, 2) / SIGMA);
    c.check(
        ed >= DENSE_RATIO_BAND.0 && ed <= DENSE_RATIO_BAND.1 && 1.0 < eb && eb < ed,
        format!("expected ratios dense {ed:.3}, beta=2 {eb:.3}"),
    );
}

fn sweep(c: &mut Checks) {
    let (specs, _) = timed(|| regime_sweep(SWEEP_MAX_N, SWEEP_MAX_DELTA));
    let start = Instant::now();
    let (mut s_checks, mut lb_checks, mut q_exh, mut q_struct, mut q_skipped) = (0, 0, 0, 0, 0);
    let mut mismatches = Vec::new();
    for spec in &specs {
        let m = analytic_metrics(spec).unwrap();
        for seed in 0..SWEEP_SEEDS {
            let plan = spec.build(seed).unwrap();
            let s = s_oracle(&plan);
            if let Some(sa) = m.s_analytic {
                s_checks += 1;
                if sa != s {
                    mismatches.push(format!("{} seed {seed}: s {sa} vs {s}", spec.id()));
                }
            } else if let Some(lb) = m.s_lower_bound {
                lb_checks += 1;
                if s < lb {
                    mismatches.push(format!("{} seed {seed}: s {s} below bound {lb}", spec.id()));
                }
            }
            let Some(qa) = m.q_analytic else { continue };
            let states = (plan.ell as f64 + 1.0).powi(plan.n as i32);
            let q = if plan.n <= SWEEP_EXHAUSTIVE_MAX_N && states <= DEFAULT_BUDGET as f64 {
                q_exh += 1;
                Some(q_exhaustive(&plan))
            } else if let Ok(r) = oracle_q_structure(&plan) {
                q_struct += 1;
                Some(r.q)
            } else {
                q_skipped += 1;
                None
            };
            if let Some(q) = q.filter(|&q| q != qa) {
                mismatches.push(format!("{} seed {seed}: Q {qa} vs {q}", spec.id()));
            }
        }
    }
    c.check(
        mismatches.is_empty(),
        format!(
            "{} configurations x {SWEEP_SEEDS} seeds: {s_checks} exact s, {lb_checks} s bounds, {q_exh} exhaustive Q, \
             {q_struct} structure-aware Q, {q_skipped} Q without oracle; mismatches {mismatches:?}",
            specs.len()
        ),
    );
    c.within("sweep", start.elapsed(), SWEEP_LIMIT);
}

fn main() {
    let results = [
        criterion("1", "small plans", small_plans),
        criterion("2", "beta-level matrix-vector", beta_matvec),
        criterion("3", "multiple parallel classes", multi_class),
        criterion("4", "beta-level matrix-matrix", beta_matmat),
        criterion("5", "coded at bottom", coded_bottom),
        criterion("6a", "sparsely coded plans and Q/delta identity", scs_figures),
        criterion("6b", "sparsely coded n=24 published Q/delta 7/6", scs_published_ratio),
        criterion("7", "condition numbers", condition_numbers),
        criterion("8", "end-to-end decoding", end_to_end),
        criterion("9", "sparsity cost trend", cost_trend),
        criterion("10", "analytic vs oracle sweep", sweep),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
