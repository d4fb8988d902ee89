// Worst-case condition number over straggler sets for uncoded, β = 2,
// β = 3 and polynomial plans with ten workers.

use strag_core::metrics::{analytic_metrics, worst_case_condition_number, DEFAULT_BUDGET};
use strag_core::schemes::{ClassChoice, SchemeSpec};
use strag_core::{frac, Result};

fn run_example() -> Result<Vec<f64>> {
    let mut specs: Vec<SchemeSpec> = (1..=3)
        .map(|beta| SchemeSpec::BetaMatvec { n: 10, gamma: frac(1, 5), beta, classes: ClassChoice::Trivial })
        .collect();
    specs.push(SchemeSpec::Polynomial { n: 10, k_a: 5, k_b: 1, points: None });
    let mut out = Vec::new();
    for spec in &specs {
        let s = analytic_metrics(spec)?.s_analytic.expect("closed form");
        let k = worst_case_condition_number(&spec.build(0)?, s, DEFAULT_BUDGET)?;
        println!("{} with {s} stragglers: {k:.4e}", spec.id());
        out.push(k);
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
