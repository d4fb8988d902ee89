// Simulated completion times for three schemes on the same slow cluster,
// with task costs counted from the encoded sparse blocks.

use strag_core::blockmat::generate_sparse;
use strag_core::schemes::{ClassChoice, SchemeSpec};
use strag_core::simulator::{compare_schemes, measured_costs, CompareEntry, CompareRow, SpeedModel};
use strag_core::{frac, Result};

fn run_example() -> Result<Vec<CompareRow>> {
    let specs = [
        SchemeSpec::BetaMatvec { n: 12, gamma: frac(1, 4), beta: 1, classes: ClassChoice::Trivial },
        SchemeSpec::BetaMatvec { n: 12, gamma: frac(1, 4), beta: 3, classes: ClassChoice::Trivial },
        SchemeSpec::Polynomial { n: 12, k_a: 4, k_b: 1, points: None },
    ];
    let a = generate_sparse(2000, 1200, 0.03, 5)?;
    let entries = specs
        .iter()
        .map(|s| {
            let plan = s.build(0)?;
            let costs = measured_costs(&plan, &a, None)?;
            Ok(CompareEntry { label: s.id(), plan, costs, kappa_worst: None })
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = compare_schemes(&entries, 50, &SpeedModel::default(), 9)?;
    for r in &rows {
        println!("{}: mean {:.3e} s, mean tasks at decode {:.1}", r.scheme, r.mean_time, r.mean_symbols);
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
