//! Divergences between prediction and attention distributions.
use attnbench::metrics::{binary_tvd, jsd, kl_smoothed, tvd};

fn main() -> attnbench::Result<()> {
    let base = [0.7, 0.2, 0.1];
    let spread = [1.0 / 3.0; 3];
    let moved = [0.0, 0.0, 1.0];

    println!("tvd(base, spread)  = {:.4}", tvd(&base, &spread)?);
    println!("jsd(base, spread)  = {:.4}", jsd(&base, &spread)?);
    println!("jsd(base, moved)   = {:.4}", jsd(&base, &moved)?);
    println!("kl(moved || base)  = {:.4}", kl_smoothed(&moved, &base)?);
    println!("jsd upper bound    = {:.4}", jsd(&[1.0, 0.0], &[0.0, 1.0])?);
    println!("binary tvd(.9, .6) = {:.4}", binary_tvd(0.9, 0.6));
    Ok(())
}
