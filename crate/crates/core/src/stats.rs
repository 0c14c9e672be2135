//! Small statistical toolkit: Poisson pmf/tails in log space, order-invariant
//! summaries, proportion intervals, count-pmf total variation, and a Spearman
//! trend test.

use statrs::function::gamma::ln_gamma;

/// Two-sided 99% standard normal quantile.
pub const Z99: f64 = 2.575_829_303_548_900_4;

/// `log P(X = j)` for `X ~ Poisson(lambda)`.
pub fn poisson_log_pmf(j: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if j == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    j as f64 * lambda.ln() - lambda - ln_gamma(j as f64 + 1.0)
}

/// `P(X <= j)`.
pub fn poisson_cdf(j: u64, lambda: f64) -> f64 {
    // summed upward from 0; fine for the moderate means used here
    let mut term = (-lambda).exp();
    let mut acc = term;
    for i in 1..=j {
        term *= lambda / i as f64;
        acc += term;
    }
    acc.min(1.0)
}

/// `log P(X >= j)`, accurate far into the upper tail.
pub fn poisson_log_sf(j: u64, lambda: f64) -> f64 {
    if j == 0 {
        return 0.0;
    }
    if (j as f64) <= lambda {
        let lower = poisson_cdf(j - 1, lambda);
        return (1.0 - lower).max(f64::MIN_POSITIVE).ln();
    }
    // sum terms j, j+1, ... relative to the first one
    let lead = poisson_log_pmf(j, lambda);
    let mut ratio = 1.0;
    let mut acc = 1.0;
    let mut i = j;
    loop {
        i += 1;
        ratio *= lambda / i as f64;
        acc += ratio;
        if ratio < 1e-18 * acc {
            break;
        }
    }
    lead + acc.ln()
}

/// `log P(X <= j)`, accurate far into the lower tail.
pub fn poisson_log_cdf(j: u64, lambda: f64) -> f64 {
    if (j as f64) >= lambda {
        return (1.0 - poisson_log_sf(j + 1, lambda).exp()).ln();
    }
    // sum terms j, j-1, ..., 0 relative to the first one
    let lead = poisson_log_pmf(j, lambda);
    let mut ratio = 1.0;
    let mut acc = 1.0;
    let mut i = j;
    while i > 0 {
        ratio *= i as f64 / lambda;
        acc += ratio;
        i -= 1;
        if ratio < 1e-18 * acc {
            break;
        }
    }
    lead + acc.ln()
}

/// Neumaier compensated sum.
pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Sample mean with its standard error. Values are sorted before summation,
/// so the result does not depend on the order replications arrive in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
}

impl Summary {
    pub fn from_values(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary {
                count: 0,
                mean: f64::NAN,
                variance: f64::NAN,
                stderr: f64::NAN,
            };
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let mean = compensated_sum(v.iter().copied()) / n as f64;
        let variance = if n > 1 {
            compensated_sum(v.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64
        } else {
            0.0
        };
        Summary {
            count: n,
            mean,
            variance,
            stderr: (variance / n as f64).sqrt(),
        }
    }

    /// Summary of integer counts; exact accumulation in integers.
    pub fn from_counts(values: &[u64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary::from_values(&[]);
        }
        let s: u128 = values.iter().map(|&v| v as u128).sum();
        let s2: u128 = values.iter().map(|&v| (v as u128) * (v as u128)).sum();
        let mean = s as f64 / n as f64;
        // n * sum(x^2) - (sum x)^2 is exact in integers
        let num = (n as u128) * s2 - s * s;
        let variance = if n > 1 {
            num as f64 / (n as f64 * (n - 1) as f64)
        } else {
            0.0
        };
        Summary {
            count: n,
            mean,
            variance,
            stderr: (variance / n as f64).sqrt(),
        }
    }

    /// 99% normal interval `mean ± Z99 * stderr`.
    pub fn ci99(&self) -> (f64, f64) {
        (self.mean - Z99 * self.stderr, self.mean + Z99 * self.stderr)
    }
}

/// Proportion estimate with its binomial standard error.
pub fn proportion(hits: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = hits as f64 / trials as f64;
    (p, (p * (1.0 - p) / trials as f64).sqrt())
}

/// Empirical pmf of non-negative integer counts.
pub fn empirical_pmf(counts: &[u64]) -> Vec<f64> {
    let max = counts.iter().copied().max().unwrap_or(0) as usize;
    let mut pmf = vec![0.0; max + 1];
    for &c in counts {
        pmf[c as usize] += 1.0;
    }
    let n = counts.len().max(1) as f64;
    pmf.iter_mut().for_each(|p| *p /= n);
    pmf
}

/// Total variation `(1/2) sum_j |p_j - Poisson(lambda)_j|` between an
/// empirical pmf and a Poisson law; the Poisson mass beyond the support of
/// `pmf` is included.
pub fn tv_to_poisson(pmf: &[f64], lambda: f64) -> f64 {
    let mut inside = 0.0;
    let mut q_mass = 0.0;
    for (j, &p) in pmf.iter().enumerate() {
        let q = poisson_log_pmf(j as u64, lambda).exp();
        q_mass += q;
        inside += (p - q).abs();
    }
    0.5 * (inside + (1.0 - q_mass).max(0.0))
}

/// Expected total variation between an empirical pmf of `reps` draws and its
/// own law `Poisson(lambda)`, from the normal approximation of each cell.
pub fn tv_noise_floor(lambda: f64, reps: usize) -> f64 {
    let mut acc = 0.0;
    let hi = (lambda + 12.0 * lambda.sqrt() + 20.0) as u64;
    for j in 0..=hi {
        let q = poisson_log_pmf(j, lambda).exp();
        acc += (2.0 * q * (1.0 - q) / (std::f64::consts::PI * reps as f64)).sqrt();
    }
    0.5 * acc
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for t in i..=j {
            r[idx[t]] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Result of a one-sided Spearman test for a decreasing trend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendTest {
    pub rho: f64,
    /// `P(rho_perm <= rho)` under exchangeability.
    pub p_value: f64,
}

impl TrendTest {
    pub fn decreasing_at(&self, level: f64) -> bool {
        self.rho < 0.0 && self.p_value < level
    }
}

/// Spearman correlation of `values` against their index, with a one-sided
/// p-value for a decreasing trend. Exact permutation distribution up to 8
/// points, Student-t approximation beyond.
pub fn spearman_decreasing(values: &[f64]) -> TrendTest {
    let n = values.len();
    if n < 2 {
        return TrendTest {
            rho: f64::NAN,
            p_value: 1.0,
        };
    }
    let index: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    let rv = ranks(values);
    let rho = pearson(&index, &rv);
    if n <= 8 {
        let mut perm: Vec<f64> = rv.clone();
        perm.sort_by(f64::total_cmp);
        let mut le = 0u64;
        let mut total = 0u64;
        permute_all(&mut perm, 0, &mut |p| {
            total += 1;
            if pearson(&index, p) <= rho + 1e-12 {
                le += 1;
            }
        });
        return TrendTest {
            rho,
            p_value: le as f64 / total as f64,
        };
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho).max(1e-300)).sqrt();
    let dist = statrs::distribution::StudentsT::new(0.0, 1.0, df).expect("valid t");
    use statrs::distribution::ContinuousCDF;
    TrendTest {
        rho,
        p_value: dist.cdf(t),
    }
}

fn permute_all(v: &mut [f64], k: usize, f: &mut impl FnMut(&[f64])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute_all(v, k + 1, f);
        v.swap(k, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_tails() {
        // P(Poisson(10) >= 15) = 0.0834584729...
        assert!((poisson_log_sf(15, 10.0).exp() - 0.083_458_472_934_662_84).abs() < 1e-12);
        assert!((poisson_log_sf(100, 50.0).exp() / 3.200_065_324_585_149_5e-10 - 1.0).abs() < 1e-9);
        assert!((poisson_log_cdf(3, 10.0).exp() - poisson_cdf(3, 10.0)).abs() < 1e-15);
        let total: f64 = (0..60).map(|j| poisson_log_pmf(j, 7.5).exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn summary_is_order_invariant() {
        let v: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1013) as f64 * 0.1 + 1e8).collect();
        let mut w = v.clone();
        w.reverse();
        w.swap(3, 700);
        assert_eq!(Summary::from_values(&v), Summary::from_values(&w));
        let c: Vec<u64> = vec![1, 2, 3, 4];
        let s = Summary::from_counts(&c);
        assert_eq!(s.mean, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn tv_examples() {
        // identical laws: only truncation mass beyond the support remains
        let q: Vec<f64> = (0..80).map(|j| poisson_log_pmf(j, 3.0).exp()).collect();
        assert!(tv_to_poisson(&q, 3.0) < 1e-12);
        // point mass at zero against Poisson(1)
        let tv = tv_to_poisson(&[1.0], 1.0);
        assert!((tv - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn spearman_exact() {
        let t = spearman_decreasing(&[5.0, 4.0, 3.0, 2.0, 1.0]);
        assert!((t.rho + 1.0).abs() < 1e-12);
        assert!((t.p_value - 1.0 / 120.0).abs() < 1e-12);
        let t3 = spearman_decreasing(&[3.0, 2.0, 1.0]);
        assert!((t3.p_value - 1.0 / 6.0).abs() < 1e-12);
        let up = spearman_decreasing(&[1.0, 2.0, 3.0, 4.0]);
        assert!(!up.decreasing_at(0.05));
    }
}
