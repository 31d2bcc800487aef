//! Gap counts recovered from clustered-tuple counts by alternating sums.

use num_rational::Ratio;
use qr_spacings::arith::{enumerate_squares, make_modulus};
use qr_spacings::spacings::{gaps, joint_sandwich_g, nk_counts, sandwich_g, CirclePointSet};

fn main() -> qr_spacings::Result<()> {
    let set = CirclePointSet::from_residues(&enumerate_squares(&make_modulus(105)?)?);
    println!("gaps (units of 1/105): {:?}", gaps(&set)?);
    let x = Ratio::new(9, 105);
    println!("N_k(9/105), k = 2..6: {:?}", nk_counts(&set, &x, 6)?);
    let sw = sandwich_g(&set, &x, &[1, 2, 3])?;
    println!("g = {}, alternating sum = {}", sw.direct, sw.alternating);
    for (n, lo, hi) in &sw.brackets {
        println!("  n={n}: {lo} <= g <= {hi}");
    }
    let sw = joint_sandwich_g(&set, &Ratio::new(3, 105), &Ratio::new(4, 105), &[1, 2])?;
    println!("g(3/105, 4/105) = {}, alternating sum = {}", sw.direct, sw.alternating);
    Ok(())
}
