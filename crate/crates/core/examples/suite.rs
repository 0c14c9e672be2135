//! Runs the quick acceptance battery and prints one verdict per entry.
//! Replication counts are cut for speed, so trend checks that need many
//! replications (the count TV in particular) can fail here.

use knnball_lab::experiments::{run_estimator, suite_plan};

fn main() -> knnball_lab::Result<()> {
    for entry in suite_plan(true, 7) {
        let rep = run_estimator(&entry.config, entry.estimator)?;
        println!("{:<24} {:<11} {}", entry.label, rep.estimator, if rep.pass { "PASS" } else { "FAIL" });
    }
    Ok(())
}
