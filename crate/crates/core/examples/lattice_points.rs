//! Congruence lattices L(G) and their point counts in dilated regions.

use num_rational::BigRational;
use qr_spacings::lattices::{box_residual_bound, lipschitz_check, ConvexRegion, PartitionTuple};
use qr_spacings::SetPartition;

fn main() -> qr_spacings::Result<()> {
    let tuple = PartitionTuple::new(
        3,
        [
            (3, SetPartition::from_blocks(3, &[&[1, 2], &[3]])?),
            (5, SetPartition::from_blocks(3, &[&[1, 3], &[2]])?),
        ],
    )?;
    let lattice = tuple.lattice();
    println!("supp = {}, disc = {}, index = {}", tuple.supp(), tuple.disc(), lattice.index_by_counting(1)?);
    let region: ConvexRegion = "box:1,2;1/2,3/2".parse()?;
    let dilations: Vec<BigRational> = (1..=8).map(|k| BigRational::from_integer((5 * k).into())).collect();
    println!("s,count,expected,residual,bound");
    for row in lipschitz_check(&region, &dilations, &lattice, 10_000_000)? {
        let bound = box_residual_bound(&region, &row.s, &lattice).unwrap();
        println!("{},{},{},{},{}", row.s, row.count, row.expected, row.residual, bound);
    }
    Ok(())
}
