//! Limit value of the plateau test functional in the rare-event regime,
//! next to a Monte Carlo estimate at small b_n.

use knnball_lab::analytic::{m0_limit_functional, Plateau};
use knnball_lab::experiments::{estimate_m0_functional, ASchedule, ExperimentConfig};
use knnball_lab::Dimension;

fn main() -> knnball_lab::Result<()> {
    let d = Dimension::new(1)?;
    let u = Plateau::full(1.0, d, 0.0, 1.0);
    let limit = m0_limit_functional(&u, &u, [0.0, 0.0], 1, d);
    println!("limit functional {limit:.12} vs (1 - 1/e)^3 = {:.12}", (1.0 - (-1f64).exp()).powi(3));

    let cfg = ExperimentConfig {
        n_ladder: vec![1000.0],
        a_schedule: ASchedule::Power(1.5),
        reps: 50_000,
        ..ExperimentConfig::default()
    };
    let rep = estimate_m0_functional(&cfg)?;
    for p in &rep.points {
        println!(
            "{:<18} n = {} b_n = {:.4}: {:.4} ± {:.4} (reference {:.4})",
            p.statistic,
            p.n,
            p.b_n,
            p.estimate,
            p.stderr,
            p.reference.unwrap_or(f64::NAN)
        );
    }
    for w in &rep.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
