//! Mean number of marked atoms in a box above a mark level, against the
//! exact intensity of the process.

use knnball_lab::experiments::*;

fn main() -> knnball_lab::Result<()> {
    let cfg = ExperimentConfig {
        d: 2,
        n_ladder: vec![1000.0],
        box_side: 0.5,
        u_offsets: vec![0.0, 1.0, 2.0],
        reps: 5000,
        ..ExperimentConfig::default()
    };
    let rep = estimate_intensity_check(&cfg)?;
    print!("{}", rep.to_csv());
    for t in &rep.trends {
        println!("trend {} x={:?}: rho {:.3}, p {:.4}, decreasing {}", t.statistic, t.x, t.rho, t.p_value, t.decreasing);
    }
    for w in &rep.warnings {
        println!("warning: {w}");
    }
    println!("report passes: {}", rep.pass);
    Ok(())
}
