// Build a β-level matrix-vector plan, print its layout and round-trip it
// through JSON.

use strag_core::cli::describe_plan;
use strag_core::schemes::{ClassChoice, EncodingPlan, SchemeSpec};
use strag_core::{frac, Result};

fn run_example() -> Result<EncodingPlan> {
    let spec = SchemeSpec::BetaMatvec { n: 12, gamma: frac(1, 4), beta: 3, classes: ClassChoice::Trivial };
    let plan = spec.build(1)?;
    print!("{}", describe_plan(&plan));
    let back = EncodingPlan::from_json(&plan.to_json()?)?;
    assert_eq!(back, plan);
    Ok(plan)
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
