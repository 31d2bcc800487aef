//! Gap statistics for odd primorials approaching the exponential law.
//!
//!     cargo run --release --example poisson_convergence -- 8

use num_traits::ToPrimitive;
use qr_spacings::arith::odd_primorial;
use qr_spacings::correlations::pair_correlation_sweep;
use qr_spacings::spacings::residue_spacings;
use qr_spacings::CorrelationOptions;

fn main() -> qr_spacings::Result<()> {
    let top: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(7);
    let moduli: Vec<u64> = (3..=top).map(odd_primorial).collect::<Result<_, _>>()?;
    let rows = pair_correlation_sweep(&moduli, &"box:1,2".parse()?, &CorrelationOptions::default())?;
    println!("{:>10} {:>9} {:>10} {:>10} {:>8} {:>8}", "q", "s", "R2[1,2)", "sqrt(s)dR", "KS", "jointKS");
    for row in rows {
        let rep = residue_spacings(row.q)?;
        println!(
            "{:>10} {:>9.3} {:>10.6} {:>10.6} {:>8.5} {:>8.5}",
            row.q,
            row.s.to_f64().unwrap(),
            row.r2.to_f64().unwrap(),
            row.sqrt_s_deviation,
            rep.ks_exponential,
            rep.joint_ks
        );
    }
    Ok(())
}
