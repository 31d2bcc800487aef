//! R_r(C, q) by the definition, the divisor/lattice expansion and tuple counting.
//!
//!     cargo run --example correlations -- 1155 "box:1,2;1,2"

use qr_spacings::arith::{enumerate_squares, make_modulus};
use qr_spacings::correlations::{correlation_circle, correlation_definition, correlation_formula};
use qr_spacings::{ConvexRegion, CorrelationOptions};

fn main() -> qr_spacings::Result<()> {
    let mut args = std::env::args().skip(1);
    let q: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(105);
    let region: ConvexRegion = args.next().unwrap_or_else(|| "box:1,2".into()).parse()?;
    let r = region.dim() + 1;
    let m = make_modulus(q)?;
    let opts = CorrelationOptions::default();
    let d = correlation_definition(&m, r, &region, &opts)?;
    let f = correlation_formula(&m, r, &region, &opts)?;
    let c = correlation_circle(&enumerate_squares(&m)?, r, &region)?;
    println!("R_{r}({region}, {q}): vol = {}", d.volume);
    for res in [&d, &f, &c] {
        println!("  {:<18} {}", res.method.as_str(), res.value);
    }
    assert!(d.value == f.value && f.value == c.value);
    Ok(())
}
