//! Squares modulo a square-free q and the mean spacing s = q / N_q.
//!
//!     cargo run --example residues -- 105

use qr_spacings::arith::{enumerate_squares, make_modulus, squares_by_crt};

fn main() -> qr_spacings::Result<()> {
    let q: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(105);
    let m = make_modulus(q)?;
    let set = enumerate_squares(&m)?;
    println!("q = {q} = {:?}", m.primes());
    println!("N_q = {} squares, s = {} (~{:.4})", set.len(), m.mean_spacing(), m.mean_spacing_f64());
    if q <= 200 {
        println!("{:?}", set.residues());
    }
    if q <= 10_000_000 {
        assert_eq!(set, squares_by_crt(&m)?);
        println!("sieve and CRT reconstruction agree");
    }
    Ok(())
}
