//! Gaps between consecutive squares modulo a prime against 2^-h.

use qr_spacings::spacings::davenport_histogram;

fn main() -> qr_spacings::Result<()> {
    let p: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1_000_003);
    let hist = davenport_histogram(p)?;
    println!("p = {p}, {} gaps", hist.n);
    for row in hist.rows.iter().take(10) {
        println!("h={:<2} observed {:.5}  2^-h {:.5}", row.h, row.observed, row.expected);
    }
    Ok(())
}
