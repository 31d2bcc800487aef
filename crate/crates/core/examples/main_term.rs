//! The main term of the expansion equals vol(C) exactly.

use qr_spacings::arith::make_modulus;
use qr_spacings::correlations::{main_term, main_term_expanded};
use qr_spacings::ConvexRegion;

fn main() -> qr_spacings::Result<()> {
    for (q, c) in [(15, "box:1,2"), (105, "box:1/3,7/2;1,2"), (1155, "simplex:5/2,3"), (15, "box:1,2;1,2;1,2")] {
        let region: ConvexRegion = c.parse()?;
        let r = region.dim() + 1;
        let m = make_modulus(q)?;
        let factored = main_term(&m, r, &region)?;
        let expanded = main_term_expanded(&m, r, &region)?;
        println!("q={q:<5} r={r} {c:<18} vol={:<6} factored={factored:<6} expanded={expanded}", region.volume());
    }
    Ok(())
}
