// Closed-form straggler resilience and Q next to the oracle values.

use strag_core::metrics::{evaluate, MetricsOptions, SchemeMetrics};
use strag_core::schemes::{ClassChoice, SchemeSpec};
use strag_core::{frac, Result};

fn run_example() -> Result<Vec<SchemeMetrics>> {
    let specs = [
        SchemeSpec::BetaMatvec { n: 8, gamma: frac(1, 4), beta: 2, classes: ClassChoice::Trivial },
        SchemeSpec::BetaMatvec { n: 8, gamma: frac(1, 4), beta: 2, classes: ClassChoice::ShiftedPair },
        SchemeSpec::CodedBottomMatvec { n: 5, gamma_u: frac(2, 5), gamma_c: frac(1, 5) },
        SchemeSpec::ScsMatvec { n: 6, k_a: 4 },
    ];
    let rows: Vec<SchemeMetrics> = specs.iter().map(|s| evaluate(s, &MetricsOptions::default())).collect();
    for r in &rows {
        println!(
            "{}: s = {:?} (oracle {:?}), Q = {:?} (oracle {:?}), {}",
            r.scheme_id, r.s_analytic, r.s_oracle, r.q_analytic, r.q_oracle, r.status
        );
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
