// Parallel classes used to place coded blocks: consecutive blocks, the
// shifted pair classes and two classes of the 15-point Kirkman resolution.

use strag_core::designs::{kirkman_classes, shifted_pair_classes, trivial_classes};
use strag_core::Result;

fn run_example() -> Result<usize> {
    let trivial = trivial_classes(12, 3, 1)?;
    println!("consecutive: {:?}", trivial.classes()[0].blocks());
    let shifted = shifted_pair_classes(8)?;
    for c in shifted.classes() {
        println!("shifted pair: {:?}", c.blocks());
    }
    let k = kirkman_classes().select(&[0, 1])?;
    println!("kirkman [0, 1]: {:?} | {:?}", k.classes()[0].blocks(), k.classes()[1].blocks());
    let worst = k.max_cross_intersection();
    println!("largest intersection across classes: {worst}");
    Ok(worst)
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
