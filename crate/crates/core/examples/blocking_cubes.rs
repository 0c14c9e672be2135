//! Partitions the torus into congruent cubes with boundary shells and
//! compares the blocked process with the global one.

use knnball_lab::analytic::scaling_b_n;
use knnball_lab::blocking::{build_eta, build_eta_truncated, per_cube_counts, BlockedConfig};
use knnball_lab::process::tv_distance_atomic;
use knnball_lab::rng::RngStream;
use knnball_lab::sampling::sample_poisson_process;
use knnball_lab::{build_l, Dimension, ProcessParams};

fn main() -> knnball_lab::Result<()> {
    let n = 20_000.0;
    let a_n = 0.6 * f64::ln(n);
    let d = Dimension::new(1)?;
    let p = ProcessParams::new(n, a_n, 1, 0.0, d)?;
    let b = scaling_b_n(n, a_n, 1);
    let cfg = BlockedConfig::with_default_w(&p, b)?;
    let split = cfg.split(0);
    println!(
        "b_n = {b:.2}: {} cubes of side {:.4}, shell {:.5} (interior volume {:.4})",
        cfg.partition.b_eff(),
        cfg.partition.side(),
        cfg.shell,
        split.interior_volume()
    );

    let ps = sample_poisson_process(n, d, RngStream::new(9, 0))?;
    let l = build_l(&p, &ps)?;
    let eta = build_eta(&p, &ps, &cfg)?;
    let eta_t = build_eta_truncated(&p, &ps, &cfg)?;
    let beff = cfg.partition.b_eff() as f64;
    println!("global atoms {}, blocked atoms {}, truncated blocked {}", l.len(), eta.len(), eta_t.len());
    println!("TV(L, eta) / b_eff = {:.4}", tv_distance_atomic(&l, &eta)? / beff);
    println!("TV(eta, eta') / b_eff = {:.4}", tv_distance_atomic(&eta, &eta_t)? / beff);
    let counts = per_cube_counts(&p, &ps, &cfg)?;
    println!("per-cube counts: {counts:?}");
    Ok(())
}
