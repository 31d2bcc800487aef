//! Möbius function and lambda weights on the lattice of set partitions.

use qr_spacings::partitions::{PartitionPoset, SetPartition};

fn main() -> qr_spacings::Result<()> {
    for r in 2..=4 {
        let poset = PartitionPoset::new(r)?;
        println!("r = {r}: {} partitions", poset.len());
        poset.write_lambda_csv(std::io::stdout()).unwrap();
    }
    let poset = PartitionPoset::new(4)?;
    let f = SetPartition::finest(4);
    let g = SetPartition::from_blocks(4, &[&[1, 2], &[3, 4]])?;
    println!("mu({f}, {g}) = {}", poset.mobius(&f, &g));
    // the weights reproduce Delta = 2^(r - r_eff)
    let h = [0, 3, 2];
    println!("sum lambda delta_G({h:?}) mod 5 = {}", poset.delta_decomposition(&h, 5)?);
    Ok(())
}
