//! Distributional checks on the samplers with frozen seeds.

use knnball_lab::analytic::alpha_k;
use knnball_lab::rng::RngStream;
use knnball_lab::sampling::{
    draw_sandwiched_binomial, sample_binomial_process, sample_coupled, sample_limit_process,
    sample_poisson_process, sandwich_holds,
};
use knnball_lab::stats::{poisson_cdf, Summary};
use knnball_lab::Dimension;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn dim(d: usize) -> Dimension {
    Dimension::new(d).unwrap()
}

/// Pearson chi-square p-value of `counts` against a Poisson(`lambda`) law,
/// pooling both tails so every cell expects at least 5 hits.
fn poisson_gof(counts: &[u64], lambda: f64) -> f64 {
    let reps = counts.len() as f64;
    let mut lo = 0u64;
    while reps * poisson_cdf(lo, lambda) < 5.0 {
        lo += 1;
    }
    let mut hi = lo;
    while reps * (1.0 - poisson_cdf(hi, lambda)) >= 5.0 {
        hi += 1;
    }
    // cells: (.., lo], lo+1, ..., hi-1, [hi, ..)
    let cells = (hi - lo + 1) as usize;
    let mut observed = vec![0f64; cells];
    for &c in counts {
        let cell = c.clamp(lo, hi) - lo;
        observed[cell as usize] += 1.0;
    }
    let mut stat = 0.0;
    for (i, &o) in observed.iter().enumerate() {
        let j = lo + i as u64;
        let p = if j == lo {
            poisson_cdf(lo, lambda)
        } else if j == hi {
            1.0 - poisson_cdf(hi - 1, lambda)
        } else {
            poisson_cdf(j, lambda) - poisson_cdf(j - 1, lambda)
        };
        let e = reps * p;
        stat += (o - e) * (o - e) / e;
    }
    let df = (cells - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

#[test]
fn poisson_process_counts_follow_the_poisson_law() {
    for (n, d) in [(5.0, 1), (50.0, 2)] {
        let counts: Vec<u64> = (0..20_000)
            .map(|i| sample_poisson_process(n, dim(d), RngStream::new(11, i)).unwrap().len() as u64)
            .collect();
        let p = poisson_gof(&counts, n);
        assert!(p > 1e-3, "n = {n}: chi-square p = {p}");
    }
}

#[test]
fn poisson_counts_in_a_subbox_are_poisson() {
    // count in [0, 0.5)^2 has mean n / 4
    let n = 50.0;
    let counts: Vec<u64> = (0..20_000)
        .map(|i| {
            let ps = sample_poisson_process(n, dim(2), RngStream::new(12, i)).unwrap();
            ps.iter().filter(|p| p[0] < 0.5 && p[1] < 0.5).count() as u64
        })
        .collect();
    let p = poisson_gof(&counts, n / 4.0);
    assert!(p > 1e-3, "chi-square p = {p}");
}

#[test]
fn binomial_coordinates_are_uniform() {
    let ps = sample_binomial_process(50_000, dim(3), RngStream::new(13, 0));
    assert_eq!(ps.len(), 50_000);
    let mut bins = [0f64; 10];
    for p in ps.iter() {
        for &c in p {
            assert!((0.0..1.0).contains(&c));
            bins[(c * 10.0) as usize] += 1.0;
        }
    }
    let e = 150_000.0 / 10.0;
    let stat: f64 = bins.iter().map(|o| (o - e) * (o - e) / e).sum();
    let p = 1.0 - ChiSquared::new(9.0).unwrap().cdf(stat);
    assert!(p > 1e-3, "chi-square p = {p}");
}

#[test]
fn coupled_triple_has_the_right_marginals() {
    let (n, eta) = (200.0, 0.2);
    let mut thinned = Vec::new();
    let mut augmented = Vec::new();
    let mut holds = 0;
    for i in 0..5000 {
        let base = sample_poisson_process(n, dim(2), RngStream::new(14, i)).unwrap();
        let t = sample_coupled(&base, n, eta, RngStream::new(15, i)).unwrap();
        assert!(t.thinned.is_submultiset_of(&t.base) && t.base.is_submultiset_of(&t.augmented));
        thinned.push(t.thinned.len() as u64);
        augmented.push(t.augmented.len() as u64);
        let b = draw_sandwiched_binomial(&t, n as usize, RngStream::new(16, i));
        assert_eq!(b.len(), n as usize);
        holds += sandwich_holds(&t, &b) as u32;
    }
    assert!(poisson_gof(&thinned, n * (1.0 - eta)) > 1e-3);
    assert!(poisson_gof(&augmented, n * (1.0 + eta)) > 1e-3);
    // failure needs a Poisson(160) above 200 or a Poisson(240) below 200
    let p_fail = (1.0 - poisson_cdf(200, n * (1.0 - eta))) + poisson_cdf(199, n * (1.0 + eta));
    let fails = 5000.0 - holds as f64;
    let sd = (5000.0 * p_fail * (1.0 - p_fail)).sqrt();
    assert!((fails - 5000.0 * p_fail).abs() < 4.0 * sd, "{fails} failures, expected {}", 5000.0 * p_fail);
}

#[test]
fn limit_process_marks_are_shifted_exponentials() {
    let (b, k, s0) = (40.0, 2, 0.5);
    let mut sizes = Vec::new();
    let mut marks = Vec::new();
    for i in 0..4000 {
        let l = sample_limit_process(b, k, s0, dim(1), RngStream::new(17, i)).unwrap();
        sizes.push(l.len() as u64);
        marks.extend(l.marks().iter().map(|m| m - s0));
    }
    assert!(poisson_gof(&sizes, b * alpha_k(k, s0)) > 1e-3);
    let s = Summary::from_values(&marks);
    assert!(marks.iter().all(|&m| m >= 0.0));
    assert!((s.mean - 1.0).abs() < 4.0 * s.stderr, "mark mean {}", s.mean);
}
