//! Chain counts N_r(h, p), the error term a(h, p), and the complete-sum identity.

use qr_spacings::counting::{scan_a_bound, verify_sum_lemma, PrimeCounter};

fn main() -> qr_spacings::Result<()> {
    let counter = PrimeCounter::new(5, 2)?;
    counter.write_csv(std::io::stdout()).unwrap();
    for p in [3, 5, 7, 11, 13] {
        for r in 2..=4 {
            let check = verify_sum_lemma(p, r)?;
            let scan = scan_a_bound(p, r)?;
            println!(
                "p={p:>2} r={r}: sum a*Delta = {} ({}), max|a| = {}, max|a|/sqrt(p) = {:.3}",
                check.direct,
                if check.holds() { "matches closed form" } else { "MISMATCH" },
                scan.max_abs_a,
                scan.max_ratio
            );
        }
    }
    Ok(())
}
