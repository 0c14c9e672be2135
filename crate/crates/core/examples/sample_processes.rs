//! Draws Poisson, binomial and sandwich-coupled configurations on the torus
//! and prints a few of them as CSV.

use knnball_lab::process::points_to_csv;
use knnball_lab::rng::RngStream;
use knnball_lab::sampling::{
    draw_sandwiched_binomial, sample_binomial_process, sample_coupled, sample_poisson_process, sandwich_holds,
};
use knnball_lab::Dimension;

fn main() -> knnball_lab::Result<()> {
    let d2 = Dimension::new(2)?;

    let poisson = sample_poisson_process(20.0, d2, RngStream::new(1, 0))?;
    println!("Poisson(20) on the 2-torus: {} points", poisson.len());
    print!("{}", points_to_csv(&poisson));

    let binom = sample_binomial_process(5, d2, RngStream::new(1, 1));
    println!("\nbinomial process with 5 points:");
    print!("{}", points_to_csv(&binom));

    // thinned ⊆ base ⊆ augmented, then a binomial sample squeezed between them
    let n = 1000.0;
    let base = sample_poisson_process(n, d2, RngStream::new(1, 2))?;
    let triple = sample_coupled(&base, n, 0.1, RngStream::new(1, 3))?;
    let b = draw_sandwiched_binomial(&triple, n as usize, RngStream::new(1, 4));
    println!(
        "\ncoupled: thinned {} <= base {} <= augmented {}; binomial({}) sandwiched: {}",
        triple.thinned.len(),
        triple.base.len(),
        triple.augmented.len(),
        b.len(),
        sandwich_holds(&triple, &b)
    );
    Ok(())
}
