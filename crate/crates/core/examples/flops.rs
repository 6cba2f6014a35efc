//! Attention cost of anchored stripes versus full self-attention.
//!
//!     cargo run --example flops

use doa_defense::defense::{assa_flop_estimate, global_flop_estimate};

fn main() -> anyhow::Result<()> {
    let c = 96;
    println!(
        "{:>6} {:>14} {:>14} {:>8}",
        "tokens", "global", "anchored S=4", "ratio"
    );
    for side in [8u64, 16, 32, 64] {
        let eta = side * side;
        let g = global_flop_estimate(eta, c);
        let a = assa_flop_estimate(eta, c, 4)?;
        println!("{eta:>6} {g:>14.3e} {a:>14.3e} {:>8.3}", a / g);
    }
    for s in [2u64, 4, 8, 16] {
        println!("S={s:<3} {:.3e}", assa_flop_estimate(256, c, s)?);
    }
    Ok(())
}
