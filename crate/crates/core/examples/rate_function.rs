//! Closed-form quantities of the limit: alpha_k, the rate function I_k, the
//! exact Poisson tail rate it approximates, and the relative-entropy
//! contraction.

use knnball_lab::analytic::{
    alpha_k, contraction_minimum, poisson_tail_rate, rate_i_k, relative_entropy, DensityGrid,
};
use knnball_lab::Dimension;

fn main() -> knnball_lab::Result<()> {
    let (k, s0) = (2, 0.5);
    let alpha = alpha_k(k, s0);
    let d = Dimension::new(1)?;
    println!("k = {k}, s0 = {s0}: alpha_k = {alpha:.6}");
    println!("{:>8} {:>10} {:>12} {:>12} {:>12} {:>12}", "x/alpha", "I_k", "H(const)", "min H", "b=10", "b=100");
    for m in [0.25, 0.5, 1.0, 1.5, 2.0, 4.0] {
        let x = m * alpha;
        let h = relative_entropy(&DensityGrid::constant(m, k, s0, d)?);
        let (h_min, _) = contraction_minimum(x, k, s0, d)?;
        println!(
            "{m:>8} {:>10.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            rate_i_k(x, k, s0),
            h,
            h_min,
            poisson_tail_rate(10.0, x, k, s0)?,
            poisson_tail_rate(100.0, x, k, s0)?
        );
    }
    Ok(())
}
