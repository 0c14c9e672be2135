//! The three blocking discrepancies along a ladder: global versus blocked
//! process, blocked versus truncated blocked process, and per-cube counts
//! versus Poisson(alpha_k).

use knnball_lab::experiments::*;

fn main() -> knnball_lab::Result<()> {
    let cfg = ExperimentConfig {
        n_ladder: vec![2000.0, 5000.0, 10_000.0, 20_000.0],
        a_schedule: ASchedule::Fraction(0.6),
        reps: 500,
        ..ExperimentConfig::default()
    };
    let rep = estimate_blocking_gap(&cfg)?;
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
