//! Classifies centering schedules by the diagnostic
//! a_n - log n - (k-1) log log n along a ladder.

use knnball_lab::experiments::{regime_report, ASchedule, ExperimentConfig};

fn main() -> knnball_lab::Result<()> {
    let ladder = vec![1e3, 1e4, 1e5, 1e6];
    for (name, schedule) in [
        ("0.6 log n", ASchedule::Fraction(0.6)),
        ("log n + 0.5", ASchedule::Boundary(0.5)),
        ("1.5 log n", ASchedule::Power(1.5)),
    ] {
        let cfg = ExperimentConfig {
            k: 2,
            n_ladder: ladder.clone(),
            a_schedule: schedule,
            ..ExperimentConfig::default()
        };
        let r = regime_report(&cfg)?;
        println!(
            "{name:<12} diagnostic {:?} slope/decade {:+.3} -> {:?}",
            r.diagnostic.iter().map(|g| (g * 100.0).round() / 100.0).collect::<Vec<_>>(),
            r.slope_per_decade,
            r.regime
        );
    }
    Ok(())
}
