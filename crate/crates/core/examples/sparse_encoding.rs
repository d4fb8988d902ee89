// Split a sparse matrix into block-columns and compare the density of an
// uncoded block with combinations of two and of all blocks.

use strag_core::blockmat::{encode_block, generate_sparse, BlockPartition, CoefficientVector};
use strag_core::Result;

fn run_example() -> Result<Vec<f64>> {
    let a = generate_sparse(1000, 400, 0.03, 11)?;
    let part = BlockPartition::new(a.cols(), 4)?;
    let mut densities = Vec::new();
    for support in [vec![0], vec![0, 1], vec![0, 1, 2, 3]] {
        let coeffs = CoefficientVector::from_support(4, &support, &vec![0.7; support.len()])?;
        let block = encode_block(&a, &part, &coeffs)?;
        println!("blocks {support:?}: {} nonzeros, density {:.4}", block.nnz(), block.density());
        densities.push(block.density());
    }
    Ok(densities)
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
