//! Rare-event probability P(T >= 1) rescaled by b_n, which tends to
//! alpha_k when large balls are rare.

use knnball_lab::experiments::*;

fn main() -> knnball_lab::Result<()> {
    let cfg = ExperimentConfig {
        n_ladder: vec![500.0, 2000.0],
        a_schedule: ASchedule::Power(1.3),
        reps: 50_000,
        ..ExperimentConfig::default()
    };
    let rep = estimate_rare_event(&cfg)?;
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
