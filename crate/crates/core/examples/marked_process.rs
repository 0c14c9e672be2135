//! Builds the marked point process of centered, scaled kNN ball volumes and
//! its truncated variant, then compares them.

use knnball_lab::analytic::{expected_low_degree_count, scaling_b_n};
use knnball_lab::process::{build_l_truncated, count_low_degree, tv_distance_atomic};
use knnball_lab::rng::RngStream;
use knnball_lab::sampling::sample_poisson_process;
use knnball_lab::{build_l, Dimension, ProcessParams};

fn main() -> knnball_lab::Result<()> {
    let (n, k, s0) = (2000.0, 1, 0.0);
    let a_n = 0.6 * f64::ln(n);
    let d = Dimension::new(2)?;
    let p = ProcessParams::new(n, a_n, k, s0, d)?;
    let ps = sample_poisson_process(n, d, RngStream::new(5, 0))?;

    let l = build_l(&p, &ps)?;
    println!("n = {n}, a_n = {a_n:.3}, b_n = {:.3}", scaling_b_n(n, a_n, k));
    println!("atoms with mark > s0: {}", l.len());
    for (x, m) in l.atoms().take(5) {
        println!("  x = ({:.4}, {:.4})  mark = {m:.4}", x[0], x[1]);
    }

    // the atom count equals the number of points with fewer than k
    // neighbors inside r_n(s0)
    let t = count_low_degree(&ps, p.radius(s0)?, k)?;
    println!("T = {t} (exact mean {:.3})", expected_low_degree_count(n, a_n, k, s0)?);

    let lt = build_l_truncated(&p, &ps, scaling_b_n(n, a_n, k))?;
    println!(
        "truncated process: {} atoms, submeasure: {}, TV to full: {}",
        lt.len(),
        lt.is_submeasure_of(&l),
        tv_distance_atomic(&l, &lt)?
    );
    print!("\nfirst rows of the CSV form:\n{}", l.to_csv().lines().take(4).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
