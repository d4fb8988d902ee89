// Encode sparse matrices, stop the workers at different points and recover
// the product from whatever they finished.

use strag_core::blockmat::generate_sparse;
use strag_core::decoder::{decode, ComputationState, Operand, Problem};
use strag_core::schemes::SchemeSpec;
use strag_core::Result;

fn run_example() -> Result<f64> {
    // 20 unknown blocks, 5 tasks per worker; any 21 finished tasks suffice
    let plan = SchemeSpec::ScsMatmat { n: 5, k_a: 2, k_b: 2 }.build(4)?;
    let a = generate_sparse(300, 200, 0.04, 1)?;
    let b = generate_sparse(300, 60, 0.04, 2)?;
    let problem = Problem::new(&plan, a, Operand::Matrix(b))?;
    let state = ComputationState::new(vec![5, 5, 4, 5, 2]);
    let products = problem.products(&plan, &state)?;
    let d = decode(&plan, &state, &products)?;
    let got = d.assemble_product(plan.delta_a, plan.delta_b);
    let want = problem.direct_product()?;
    let err = (&got - &want).norm() / want.norm();
    println!("{} tasks, kappa {:.3e}, relative error {err:.2e}", state.total(), d.kappa);
    Ok(err)
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
