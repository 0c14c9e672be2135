//! Monte Carlo mean of the low-degree count against its exact finite-n
//! value, for Poisson and binomial input.

use knnball_lab::experiments::*;

fn main() -> knnball_lab::Result<()> {
    let cfg = ExperimentConfig {
        d: 2,
        n_ladder: vec![1000.0],
        reps: 5000,
        ..ExperimentConfig::default()
    };
    let poisson = estimate_mean_t(&cfg)?;
    print!("{}", poisson.to_csv());
    let rep = estimate_mean_t(&ExperimentConfig {
        input: InputKind::Binomial,
        ..cfg
    })?;
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
