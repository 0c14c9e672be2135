//! Grid-accelerated k-nearest-neighbor distances against brute force, and
//! fixed-radius counts across the periodic boundary.

use knnball_lab::rng::RngStream;
use knnball_lab::sampling::sample_poisson_process;
use knnball_lab::spatial::{build_index, count_within, knn_distance, knn_distance_bruteforce};
use knnball_lab::torus::{canonicalize, torus_distance};
use knnball_lab::Dimension;

fn main() -> knnball_lab::Result<()> {
    let d = Dimension::new(3)?;
    let ps = sample_poisson_process(5000.0, d, RngStream::new(3, 0))?;
    let idx = build_index(&ps, 2.0);
    println!("{} points, {} cells per axis", ps.len(), idx.cells_per_axis());

    // a query just inside a corner sees neighbors across every face
    let q = canonicalize(&[0.999, 0.001, 0.5])?;
    for k in [1, 2, 5, 10] {
        let grid = knn_distance(&idx, &q, k, None);
        let brute = knn_distance_bruteforce(&ps, &q, k, None);
        println!("k = {k:>2}: R_k = {grid:.6} (brute force {brute:.6}, identical: {})", grid == brute);
    }
    let r = 0.05;
    println!("points within {r}: {}", count_within(&idx, &q, r, None)?);

    let a = canonicalize(&[0.05, 0.5, 0.5])?;
    let b = canonicalize(&[0.95, 0.5, 0.5])?;
    println!("wrapped distance between x = 0.05 and x = 0.95: {:.2}", torus_distance(&a, &b)?);
    Ok(())
}
