//! Samplers for the homogeneous Poisson process, the binomial process, the
//! thinning/augmentation coupling between them, and the limiting marked
//! Poisson process.
//!
//! In dimension one every sampler returns its points in increasing order
//! (uniform order statistics built from normalized exponential spacings).
//! The law is unchanged since a point set is unordered, and the sorted layout
//! lets the one-dimensional neighbor sweeps skip a sort.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use statrs::function::gamma::ln_gamma;

use crate::analytic::alpha_k;
use crate::error::{LabError, Result};
use crate::process::MarkedPointSet;
use crate::rng::RngStream;
use crate::torus::{canonicalize, Dimension, TorusPoint};

/// An unmarked finite configuration on the torus, stored as a flat
/// coordinate buffer (`len * d` values).
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: Dimension,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: Dimension) -> Self {
        PointSet {
            dim,
            coords: Vec::new(),
        }
    }

    pub fn with_capacity(dim: Dimension, n: usize) -> Self {
        PointSet {
            dim,
            coords: Vec::with_capacity(n * dim.get()),
        }
    }

    /// Builds a set from raw coordinates, wrapping each into `[0, 1)`.
    pub fn from_points<P: AsRef<[f64]>>(dim: Dimension, points: &[P]) -> Result<Self> {
        let mut ps = PointSet::with_capacity(dim, points.len());
        for p in points {
            ps.push_raw(p.as_ref())?;
        }
        Ok(ps)
    }

    /// Takes ownership of a flat buffer of canonical coordinates.
    pub fn from_flat(dim: Dimension, coords: Vec<f64>) -> Result<Self> {
        if !coords.len().is_multiple_of(dim.get()) {
            return Err(LabError::DimensionMismatch {
                expected: dim.get(),
                got: coords.len() % dim.get(),
            });
        }
        if let Some((i, &c)) = coords
            .iter()
            .enumerate()
            .find(|(_, c)| !(0.0..1.0).contains(*c))
        {
            return Err(LabError::InvalidCoordinate {
                axis: i % dim.get(),
                value: c,
            });
        }
        Ok(PointSet { dim, coords })
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim.get()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim.get();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim.get())
    }

    pub fn flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn torus_point(&self, i: usize) -> TorusPoint {
        TorusPoint::from_canonical(self.point(i).to_vec())
    }

    /// Appends a point given by raw (possibly unwrapped) coordinates.
    pub fn push_raw(&mut self, raw: &[f64]) -> Result<()> {
        if raw.len() != self.dim.get() {
            return Err(LabError::DimensionMismatch {
                expected: self.dim.get(),
                got: raw.len(),
            });
        }
        let p = canonicalize(raw)?;
        self.coords.extend_from_slice(p.coords());
        Ok(())
    }

    pub fn push(&mut self, p: &TorusPoint) -> Result<()> {
        self.push_raw(p.coords())
    }

    #[inline]
    pub(crate) fn push_canonical(&mut self, p: &[f64]) {
        debug_assert_eq!(p.len(), self.dim.get());
        self.coords.extend_from_slice(p);
    }

    /// Points in the given index order.
    pub fn select(&self, idx: &[usize]) -> PointSet {
        let mut out = PointSet::with_capacity(self.dim, idx.len());
        for &i in idx {
            out.push_canonical(self.point(i));
        }
        out
    }

    /// Multiset union (concatenation).
    pub fn union(&self, other: &PointSet) -> Result<PointSet> {
        if self.dim != other.dim {
            return Err(LabError::DimensionMismatch {
                expected: self.dim.get(),
                got: other.dim.get(),
            });
        }
        let mut coords = Vec::with_capacity(self.coords.len() + other.coords.len());
        coords.extend_from_slice(&self.coords);
        coords.extend_from_slice(&other.coords);
        Ok(PointSet {
            dim: self.dim,
            coords,
        })
    }

    /// Whether every point of `self` occurs in `other` at least as often,
    /// comparing coordinates bit for bit.
    pub fn is_submultiset_of(&self, other: &PointSet) -> bool {
        if self.dim != other.dim || self.len() > other.len() {
            return false;
        }
        let a = sorted_keys(self);
        let b = sorted_keys(other);
        let mut j = 0;
        for key in &a {
            while j < b.len() && b[j] < *key {
                j += 1;
            }
            if j == b.len() || b[j] != *key {
                return false;
            }
            j += 1;
        }
        true
    }
}

pub(crate) fn sorted_keys(ps: &PointSet) -> Vec<Vec<u64>> {
    let mut keys: Vec<Vec<u64>> = ps
        .iter()
        .map(|p| p.iter().map(|c| c.to_bits()).collect())
        .collect();
    keys.sort_unstable();
    keys
}

/// The coupled processes used to sandwich a binomial sample between a thinned
/// and an augmented Poisson process.
#[derive(Debug, Clone)]
pub struct CoupledTriple {
    pub thinned: PointSet,
    pub base: PointSet,
    pub augmented: PointSet,
    pub deleted: PointSet,
    pub extra: PointSet,
}

#[inline]
fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.random::<f64>()
}

/// Poisson variate: inversion below mean 30, PTRS transformed rejection
/// (Hörmann 1993) above.
pub fn poisson_variate(mean: f64, rng: &mut ChaCha8Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < 30.0 {
        let u = uniform(rng);
        let mut p = (-mean).exp();
        let mut cdf = p;
        let mut k = 0u64;
        let cap = (mean + 40.0 * mean.sqrt() + 100.0) as u64;
        while u > cdf && k < cap {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        return k;
    }
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = uniform(rng) - 0.5;
        let v = uniform(rng);
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -mean + k * loglam - ln_gamma(k + 1.0);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// `count` i.i.d. uniform points; sorted when `d == 1`.
fn uniform_points(count: usize, dim: Dimension, rng: &mut ChaCha8Rng) -> PointSet {
    let d = dim.get();
    let mut coords = Vec::with_capacity(count * d);
    if d == 1 {
        // order statistics of `count` uniforms from `count + 1` exponential spacings
        let mut acc = 0.0f64;
        for _ in 0..count {
            let e: f64 = Exp1.sample(rng);
            acc += e;
            coords.push(acc);
        }
        let e: f64 = Exp1.sample(rng);
        let total = acc + e;
        let inv = 1.0 / total;
        for c in coords.iter_mut() {
            let v = *c * inv;
            *c = if v < 1.0 { v } else { f64::from_bits(1.0f64.to_bits() - 1) };
        }
    } else {
        for _ in 0..count * d {
            coords.push(uniform(rng));
        }
    }
    PointSet { dim, coords }
}

/// Homogeneous Poisson process of intensity `n` on the torus.
pub fn sample_poisson_process(intensity: f64, dim: Dimension, stream: RngStream) -> Result<PointSet> {
    let mut rng = stream.rng();
    sample_poisson_with(intensity, dim, &mut rng)
}

pub(crate) fn sample_poisson_with(
    intensity: f64,
    dim: Dimension,
    rng: &mut ChaCha8Rng,
) -> Result<PointSet> {
    if !(intensity > 0.0) || !intensity.is_finite() {
        return Err(LabError::param("n", format!("intensity must be positive, got {intensity}")));
    }
    let count = poisson_variate(intensity, rng) as usize;
    Ok(uniform_points(count, dim, rng))
}

/// Binomial process: exactly `count` i.i.d. uniform points.
pub fn sample_binomial_process(count: usize, dim: Dimension, stream: RngStream) -> PointSet {
    let mut rng = stream.rng();
    uniform_points(count, dim, &mut rng)
}

pub(crate) fn sample_binomial_with(count: usize, dim: Dimension, rng: &mut ChaCha8Rng) -> PointSet {
    uniform_points(count, dim, rng)
}

/// Thins `base` (intensity `intensity`) by deleting each point with
/// probability `eta`, and augments it with an independent Poisson process of
/// intensity `intensity * eta`.
pub fn sample_coupled(
    base: &PointSet,
    intensity: f64,
    eta: f64,
    stream: RngStream,
) -> Result<CoupledTriple> {
    let mut rng = stream.rng();
    sample_coupled_with(base, intensity, eta, &mut rng)
}

pub(crate) fn sample_coupled_with(
    base: &PointSet,
    intensity: f64,
    eta: f64,
    rng: &mut ChaCha8Rng,
) -> Result<CoupledTriple> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(LabError::param("eta", format!("must lie in (0, 1], got {eta}")));
    }
    if !(intensity > 0.0) {
        return Err(LabError::param("n", format!("intensity must be positive, got {intensity}")));
    }
    let dim = base.dim();
    let mut thinned = PointSet::with_capacity(dim, base.len());
    let mut deleted = PointSet::new(dim);
    for p in base.iter() {
        if uniform(rng) < eta {
            deleted.push_canonical(p);
        } else {
            thinned.push_canonical(p);
        }
    }
    let extra = sample_poisson_with(intensity * eta, dim, rng)?;
    let augmented = base.union(&extra)?;
    Ok(CoupledTriple {
        thinned,
        base: base.clone(),
        augmented,
        deleted,
        extra,
    })
}

/// Draws a binomial process of `count` points jointly with `triple`.
///
/// When `|thinned| <= count <= |augmented|` the sample is the thinned process
/// plus a uniformly chosen subset of the remaining augmented atoms, so both
/// containments hold. Otherwise a fresh independent sample is drawn. The event
/// that decides between the two branches depends only on counts, and given
/// the counts the atoms are i.i.d. uniform, so the result is exactly a
/// binomial process.
pub fn draw_sandwiched_binomial(triple: &CoupledTriple, count: usize, stream: RngStream) -> PointSet {
    let mut rng = stream.rng();
    draw_sandwiched_with(triple, count, &mut rng)
}

pub(crate) fn draw_sandwiched_with(
    triple: &CoupledTriple,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> PointSet {
    let dim = triple.base.dim();
    let lo = triple.thinned.len();
    let hi = triple.augmented.len();
    if lo <= count && count <= hi {
        let mut out = PointSet::with_capacity(dim, count);
        for p in triple.thinned.iter() {
            out.push_canonical(p);
        }
        let pool: Vec<&[f64]> = triple.deleted.iter().chain(triple.extra.iter()).collect();
        let need = count - lo;
        for i in rand::seq::index::sample(rng, pool.len(), need).into_iter() {
            out.push_canonical(pool[i]);
        }
        out
    } else {
        sample_binomial_with(count, dim, rng)
    }
}

/// Whether `thinned ⊆ binom ⊆ augmented` as multisets.
pub fn sandwich_holds(triple: &CoupledTriple, binom: &PointSet) -> bool {
    triple.thinned.is_submultiset_of(binom) && binom.is_submultiset_of(&triple.augmented)
}

/// Poisson process on `[0,1)^d x [s0, inf)` with mean measure
/// `b e^{-u} / (k-1)! dx du`: Poisson(`b alpha_k`) atoms with uniform
/// locations and marks `s0 + Exp(1)`.
pub fn sample_limit_process(
    b: f64,
    k: usize,
    s0: f64,
    dim: Dimension,
    stream: RngStream,
) -> Result<MarkedPointSet> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(LabError::param("b", format!("must be positive, got {b}")));
    }
    if k == 0 {
        return Err(LabError::param("k", "k must be at least 1"));
    }
    let mut rng = stream.rng();
    let count = poisson_variate(b * alpha_k(k, s0), &mut rng) as usize;
    let locs = uniform_points(count, dim, &mut rng);
    let mut out = MarkedPointSet::new(dim);
    for p in locs.iter() {
        let e: f64 = Exp1.sample(&mut rng);
        out.push_canonical(p, s0 + e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(d: usize) -> Dimension {
        Dimension::new(d).unwrap()
    }

    #[test]
    fn poisson_process_is_deterministic() {
        let a = sample_poisson_process(5.0, dim(2), RngStream::new(11, 0)).unwrap();
        let b = sample_poisson_process(5.0, dim(2), RngStream::new(11, 0)).unwrap();
        assert_eq!(a, b);
        assert!(a.flat().iter().all(|c| (0.0..1.0).contains(c)));
    }

    #[test]
    fn tiny_intensity_is_empty() {
        let ps = sample_poisson_process(1e-9, dim(2), RngStream::new(1, 1)).unwrap();
        assert!(ps.is_empty());
    }

    #[test]
    fn rejects_bad_intensity() {
        assert!(sample_poisson_process(0.0, dim(1), RngStream::new(1, 1)).is_err());
        assert!(sample_poisson_process(-3.0, dim(1), RngStream::new(1, 1)).is_err());
    }

    #[test]
    fn poisson_mean_count() {
        // mean 100 over 1e5 draws: 3 sigma band is 3 * sqrt(100 / 1e5)
        let mut rng = RngStream::new(5, 0).rng();
        let reps = 100_000;
        let total: u64 = (0..reps).map(|_| poisson_variate(100.0, &mut rng)).sum();
        let mean = total as f64 / reps as f64;
        assert!((mean - 100.0).abs() < 3.0 * (100.0f64 / reps as f64).sqrt(), "{mean}");
    }

    #[test]
    fn binomial_counts() {
        assert!(sample_binomial_process(0, dim(2), RngStream::new(1, 0)).is_empty());
        let ps = sample_binomial_process(7, dim(3), RngStream::new(1, 0));
        assert_eq!(ps.len(), 7);
        assert!(ps.flat().iter().all(|c| (0.0..1.0).contains(c)));
    }

    #[test]
    fn one_dimensional_samples_are_sorted() {
        let ps = sample_poisson_process(500.0, dim(1), RngStream::new(2, 0)).unwrap();
        assert!(ps.flat().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn binomial_first_coordinate_is_uniform() {
        // Kolmogorov-Smirnov at the 1% level, critical value 1.628 / sqrt(n)
        for d in [1usize, 2] {
            let n = 10_000;
            let ps = sample_binomial_process(n, dim(d), RngStream::new(3, d as u64));
            let mut xs: Vec<f64> = ps.iter().map(|p| p[0]).collect();
            xs.sort_by(f64::total_cmp);
            let ks = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let lo = (x - i as f64 / n as f64).abs();
                    let hi = ((i + 1) as f64 / n as f64 - x).abs();
                    lo.max(hi)
                })
                .fold(0.0, f64::max);
            assert!(ks < 1.628 / (n as f64).sqrt(), "d={d} ks={ks}");
        }
    }

    #[test]
    fn full_thinning_deletes_everything() {
        let base = sample_poisson_process(50.0, dim(2), RngStream::new(4, 0)).unwrap();
        let t = sample_coupled(&base, 50.0, 1.0, RngStream::new(4, 1)).unwrap();
        assert!(t.thinned.is_empty());
        assert_eq!(t.deleted, base);
    }

    #[test]
    fn coupled_rejects_bad_eta() {
        let base = PointSet::new(dim(1));
        assert!(sample_coupled(&base, 5.0, 0.0, RngStream::new(0, 0)).is_err());
        assert!(sample_coupled(&base, 5.0, 1.5, RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn coupled_containments_hold() {
        for rep in 0..200 {
            let base = sample_poisson_process(40.0, dim(2), RngStream::new(9, rep)).unwrap();
            let t = sample_coupled(&base, 40.0, 0.3, RngStream::new(10, rep)).unwrap();
            assert!(t.thinned.is_submultiset_of(&t.base));
            assert!(t.base.is_submultiset_of(&t.augmented));
            assert_eq!(t.thinned.union(&t.deleted).unwrap().len(), base.len());
            assert!(base.is_submultiset_of(&t.thinned.union(&t.deleted).unwrap()));
            assert_eq!(t.augmented, base.union(&t.extra).unwrap());
        }
    }

    #[test]
    fn coupled_mean_sizes() {
        let reps = 100_000u64;
        let (mut thin, mut aug) = (Vec::new(), Vec::new());
        for rep in 0..reps {
            let mut rng = RngStream::new(12, rep).rng();
            let base = sample_poisson_with(200.0, dim(1), &mut rng).unwrap();
            let t = sample_coupled_with(&base, 200.0, 0.25, &mut rng).unwrap();
            thin.push(t.thinned.len() as f64);
            aug.push(t.augmented.len() as f64);
        }
        for (xs, target) in [(thin, 150.0), (aug, 250.0)] {
            let m = xs.iter().sum::<f64>() / reps as f64;
            let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1) as f64;
            let se = (var / reps as f64).sqrt();
            assert!((m - target).abs() < 3.0 * se, "mean {m} vs {target}");
        }
    }

    #[test]
    fn sandwich_examples() {
        let base = sample_poisson_process(30.0, dim(2), RngStream::new(13, 0)).unwrap();
        let empty = PointSet::new(dim(2));
        let triple = CoupledTriple {
            thinned: base.clone(),
            base: base.clone(),
            augmented: base.clone(),
            deleted: empty.clone(),
            extra: empty,
        };
        assert!(sandwich_holds(&triple, &base));
        let mut alien = base.clone();
        alien.push_raw(&[0.123456789, 0.987654321]).unwrap();
        assert!(!sandwich_holds(&triple, &alien));
    }

    #[test]
    fn sandwiched_binomial_has_exact_count() {
        for rep in 0..100 {
            let mut rng = RngStream::new(14, rep).rng();
            let base = sample_poisson_with(100.0, dim(2), &mut rng).unwrap();
            let t = sample_coupled_with(&base, 100.0, 0.3, &mut rng).unwrap();
            let b = draw_sandwiched_with(&t, 100, &mut rng);
            assert_eq!(b.len(), 100);
            let lo = t.thinned.len();
            let hi = t.augmented.len();
            assert_eq!(sandwich_holds(&t, &b), lo <= 100 && 100 <= hi);
        }
    }

    #[test]
    fn limit_process_counts() {
        let reps = 20_000u64;
        for (b, k, s0, mean) in [(10.0, 1usize, 0.0, 10.0), (4.0, 3, 0.0, 2.0)] {
            let total: usize = (0..reps)
                .map(|r| sample_limit_process(b, k, s0, dim(2), RngStream::new(15, r)).unwrap().len())
                .sum();
            let m = total as f64 / reps as f64;
            assert!((m - mean).abs() < 4.0 * (mean / reps as f64).sqrt(), "{m} vs {mean}");
        }
        assert!(sample_limit_process(0.0, 1, 0.0, dim(1), RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn limit_process_marks_are_shifted_exponentials() {
        let s0 = 0.5;
        let mut marks = Vec::new();
        let mut r = 0;
        while marks.len() < 100_000 {
            let m = sample_limit_process(20.0, 2, s0, dim(1), RngStream::new(16, r)).unwrap();
            marks.extend(m.atoms().map(|(_, u)| u));
            r += 1;
        }
        assert!(marks.iter().all(|&u| u >= s0));
        let n = marks.len() as f64;
        let mean = marks.iter().sum::<f64>() / n;
        // Exp(1) has unit variance
        assert!((mean - 1.5).abs() < 3.0 / n.sqrt(), "{mean}");
        let mut ex: Vec<f64> = marks.iter().map(|u| u - s0).collect();
        ex.sort_by(f64::total_cmp);
        let ks = ex
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = 1.0 - (-x).exp();
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 1.628 / n.sqrt(), "ks={ks}");
    }
}
