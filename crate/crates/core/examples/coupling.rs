//! Failure frequency of the thinning/augmentation sandwich around a
//! binomial process, against its analytic bound. The ratio eps / a_n and n
//! are small here so that failures are actually observed.

use knnball_lab::experiments::*;

fn main() -> knnball_lab::Result<()> {
    let cfg = ExperimentConfig {
        n_ladder: vec![50.0, 200.0],
        a_schedule: ASchedule::Boundary(0.0),
        eps: 0.05,
        reps: 5000,
        ..ExperimentConfig::default()
    };
    let rep = estimate_coupling_failure(&cfg)?;
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
