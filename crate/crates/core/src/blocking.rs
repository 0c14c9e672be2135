//! Subcube decomposition of the torus: `m^d` congruent cubes, each split
//! into an interior and a boundary shell, and the marked processes computed
//! cube by cube from the points of that cube alone.
//!
//! Inside a cube distances are Euclidean (no wrap). For `m >= 2` every cube
//! has side at most 1/2, so for two points of the same cube the Euclidean
//! and torus distances agree bit for bit; atoms of the blocked process then
//! coincide exactly with atoms of the global process whenever the
//! neighborhoods agree.

use crate::error::{LabError, Result};
use crate::process::{marked_atoms, MarkedPointSet, ProcessParams};
use crate::sampling::PointSet;
use crate::spatial::Neighborhoods;
use crate::torus::Dimension;

/// `m^d` axis-aligned cubes of side `1/m` tiling `[0,1)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubePartition {
    dim: Dimension,
    m: usize,
}

/// Partition with `m = max(1, round(b_target^{1/d}))` cubes per axis.
pub fn make_partition(b_target: f64, d: Dimension) -> Result<CubePartition> {
    if !(b_target > 0.0) || !b_target.is_finite() {
        return Err(LabError::param("b_target", format!("must be positive, got {b_target}")));
    }
    let m = b_target.powf(1.0 / d.get() as f64).round().max(1.0);
    CubePartition::new(m as usize, d)
}

impl CubePartition {
    pub fn new(m: usize, dim: Dimension) -> Result<Self> {
        if m == 0 {
            return Err(LabError::param("m", "need at least one cube per axis"));
        }
        if m.checked_pow(dim.get() as u32).is_none() {
            return Err(LabError::param("m", format!("{m}^{dim} cubes overflow")));
        }
        Ok(CubePartition { dim, m })
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn per_axis(&self) -> usize {
        self.m
    }

    /// Number of cubes `b_eff = m^d`.
    pub fn b_eff(&self) -> usize {
        self.m.pow(self.dim.get() as u32)
    }

    pub fn side(&self) -> f64 {
        1.0 / self.m as f64
    }

    /// Per-axis integer coordinates of cube `l` (axis 0 fastest).
    pub fn cube_coords(&self, l: usize) -> Vec<usize> {
        let mut rest = l;
        (0..self.dim.get())
            .map(|_| {
                let c = rest % self.m;
                rest /= self.m;
                c
            })
            .collect()
    }

    /// Lower corner `z_l` of cube `l`.
    pub fn corner(&self, l: usize) -> Vec<f64> {
        self.cube_coords(l)
            .into_iter()
            .map(|c| c as f64 / self.m as f64)
            .collect()
    }

    /// Index of the cube containing `x`.
    pub fn cube_of(&self, x: &[f64]) -> usize {
        let mut l = 0;
        for &c in x.iter().rev() {
            let a = ((c * self.m as f64).floor().max(0.0) as usize).min(self.m - 1);
            l = l * self.m + a;
        }
        l
    }

    /// `kappa_l(y) = b^{-1/d} y + z_l`, mapping `[0,1)^d` onto cube `l`.
    pub fn kappa(&self, l: usize, y: &[f64]) -> Vec<f64> {
        let s = self.side();
        self.corner(l).iter().zip(y).map(|(z, v)| v * s + z).collect()
    }

    /// Inverse of [`CubePartition::kappa`].
    pub fn kappa_inv(&self, l: usize, x: &[f64]) -> Vec<f64> {
        let m = self.m as f64;
        self.corner(l).iter().zip(x).map(|(z, v)| (v - z) * m).collect()
    }
}

/// Interior `K` and boundary shell `M = Q \ K` of one cube.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeSplit {
    pub cube: usize,
    pub corner: Vec<f64>,
    pub side: f64,
    pub shell: f64,
}

impl CubeSplit {
    /// Whether `x` lies in the cube `corner + [0, side)^d`.
    pub fn in_cube(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.corner)
            .all(|(&c, &z)| c >= z && c < z + self.side)
    }

    /// Whether `x` lies in `K = corner + [shell, side - shell)^d`.
    pub fn in_interior(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.corner)
            .all(|(&c, &z)| c >= z + self.shell && c < z + self.side - self.shell)
    }

    pub fn in_boundary(&self, x: &[f64]) -> bool {
        self.in_cube(x) && !self.in_interior(x)
    }

    pub fn interior_volume(&self) -> f64 {
        (self.side - 2.0 * self.shell).powi(self.corner.len() as i32)
    }

    pub fn boundary_volume(&self) -> f64 {
        self.side.powi(self.corner.len() as i32) - self.interior_volume()
    }
}

pub fn split_cube(part: &CubePartition, l: usize, shell: f64) -> Result<CubeSplit> {
    if l >= part.b_eff() {
        return Err(LabError::param("l", format!("cube {l} out of range 0..{}", part.b_eff())));
    }
    check_shell(part, shell)?;
    Ok(CubeSplit {
        cube: l,
        corner: part.corner(l),
        side: part.side(),
        shell,
    })
}

fn check_shell(part: &CubePartition, shell: f64) -> Result<()> {
    if !(shell >= 0.0) || !(2.0 * shell < part.side()) {
        return Err(LabError::DegenerateInterior {
            shell,
            side: part.side(),
        });
    }
    Ok(())
}

/// A partition together with the boundary width `r_n(w_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockedConfig {
    pub partition: CubePartition,
    pub shell: f64,
    pub w_n: f64,
}

impl BlockedConfig {
    pub fn new(partition: CubePartition, shell: f64, w_n: f64) -> Result<Self> {
        check_shell(&partition, shell)?;
        Ok(BlockedConfig { partition, shell, w_n })
    }

    /// Partition of `b_target` cubes with shell `r_n(w_n)`.
    pub fn for_params(p: &ProcessParams, b_target: f64, w_n: f64) -> Result<Self> {
        let partition = make_partition(b_target, p.d)?;
        Self::new(partition, p.radius(w_n)?, w_n)
    }

    /// As [`BlockedConfig::for_params`] with the default `w_n = sqrt(a_n)`.
    pub fn with_default_w(p: &ProcessParams, b_target: f64) -> Result<Self> {
        if p.a_n < 0.0 {
            return Err(LabError::param("a_n", "default w_n = sqrt(a_n) needs a_n >= 0"));
        }
        Self::for_params(p, b_target, p.a_n.sqrt())
    }

    pub fn split(&self, l: usize) -> CubeSplit {
        split_cube(&self.partition, l, self.shell).expect("validated at construction")
    }
}

/// Point indices of `ps` grouped by cube.
fn group_by_cube(part: &CubePartition, ps: &PointSet) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); part.b_eff()];
    for (i, x) in ps.iter().enumerate() {
        groups[part.cube_of(x)].push(i);
    }
    groups
}

fn blocked(p: &ProcessParams, ps: &PointSet, cfg: &BlockedConfig, r_max: f64) -> Result<Vec<MarkedPointSet>> {
    if p.d != ps.dim() || cfg.partition.dim() != ps.dim() {
        return Err(LabError::DimensionMismatch {
            expected: p.d.get(),
            got: ps.dim().get(),
        });
    }
    let groups = group_by_cube(&cfg.partition, ps);
    let mut out = Vec::with_capacity(groups.len());
    for (l, idx) in groups.iter().enumerate() {
        let mut atoms = MarkedPointSet::new(p.d);
        if idx.len() > p.k {
            let split = cfg.split(l);
            let sub = ps.select(idx);
            let nb = Neighborhoods::in_box(&sub, &split.corner, split.side);
            marked_atoms(p, &sub, &nb, r_max, |i| split.in_interior(sub.point(i)), &mut atoms)?;
        }
        out.push(atoms);
    }
    Ok(out)
}

fn concat(d: Dimension, parts: Vec<MarkedPointSet>) -> MarkedPointSet {
    let mut out = MarkedPointSet::new(d);
    for part in parts {
        for (x, m) in part.atoms() {
            out.push_canonical(x, m);
        }
    }
    out
}

/// Atoms `(X, f(X, ps|Q_l))` for `X` in some interior `K_l` with mark above
/// `s0`, where `R_k` only sees the points of the same cube.
pub fn build_eta(p: &ProcessParams, ps: &PointSet, cfg: &BlockedConfig) -> Result<MarkedPointSet> {
    Ok(concat(p.d, blocked(p, ps, cfg, f64::INFINITY)?))
}

/// [`build_eta`] keeping only atoms with `R_k(X, ps|Q_l) <= r_n(w_n)`.
pub fn build_eta_truncated(p: &ProcessParams, ps: &PointSet, cfg: &BlockedConfig) -> Result<MarkedPointSet> {
    Ok(concat(p.d, blocked(p, ps, cfg, cfg.shell)?))
}

/// Atom count of [`build_eta`] in each cube.
pub fn per_cube_counts(p: &ProcessParams, ps: &PointSet, cfg: &BlockedConfig) -> Result<Vec<usize>> {
    Ok(blocked(p, ps, cfg, f64::INFINITY)?.iter().map(MarkedPointSet::len).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{build_l, tv_distance_atomic};
    use crate::rng::RngStream;
    use crate::sampling::{sample_binomial_process, sample_poisson_process};
    use crate::stats::Summary;
    use proptest::prelude::*;

    fn dim(d: usize) -> Dimension {
        Dimension::new(d).unwrap()
    }

    #[test]
    fn partition_examples() {
        let p = make_partition(16.0, dim(2)).unwrap();
        assert_eq!((p.per_axis(), p.b_eff()), (4, 16));
        let p = make_partition(10.0, dim(2)).unwrap();
        assert_eq!((p.per_axis(), p.b_eff()), (3, 9));
        assert_eq!(make_partition(0.2, dim(3)).unwrap().b_eff(), 1);
        assert!(make_partition(0.0, dim(1)).is_err());
        let total: f64 = (0..p.b_eff()).map(|_| p.side().powi(2)).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn split_examples() {
        let part = CubePartition::new(2, dim(1)).unwrap();
        let s = split_cube(&part, 0, 0.0).unwrap();
        assert!(s.in_interior(&[0.0]) && s.in_interior(&[0.4999]));
        assert_eq!(s.boundary_volume(), 0.0);
        let s = split_cube(&part, 0, 0.1).unwrap();
        assert!(s.in_interior(&[0.1]) && s.in_interior(&[0.399]));
        assert!(!s.in_interior(&[0.4]) && s.in_boundary(&[0.4]));
        assert!(s.in_boundary(&[0.05]) && !s.in_boundary(&[0.6]));
        assert!(split_cube(&part, 0, 0.25).is_err());
        assert!(split_cube(&part, 2, 0.1).is_err());
        for (d, m, shell) in [(1usize, 2usize, 0.1), (2, 3, 0.05), (3, 2, 0.1)] {
            let part = CubePartition::new(m, dim(d)).unwrap();
            let s = split_cube(&part, part.b_eff() - 1, shell).unwrap();
            let want = 1.0 - (1.0 - 2.0 * shell * m as f64).powi(d as i32);
            assert!((s.boundary_volume() * part.b_eff() as f64 - want).abs() < 1e-12);
        }
    }

    #[test]
    fn kappa_round_trip() {
        let part = CubePartition::new(3, dim(2)).unwrap();
        for l in 0..part.b_eff() {
            let x = part.kappa(l, &[0.25, 0.75]);
            assert_eq!(part.cube_of(&x), l);
            let y = part.kappa_inv(l, &x);
            assert!((y[0] - 0.25).abs() < 1e-12 && (y[1] - 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn per_cube_examples() {
        let p = ProcessParams::new(100.0, 1.0, 1, 0.0, dim(1)).unwrap();
        let cfg = BlockedConfig::new(CubePartition::new(2, dim(1)).unwrap(), 0.05, 1.0).unwrap();
        assert_eq!(per_cube_counts(&p, &PointSet::new(dim(1)), &cfg).unwrap(), vec![0, 0]);
        assert!(build_eta(&p, &PointSet::new(dim(1)), &cfg).unwrap().is_empty());
        // two points per cube, far apart relative to r_n(0) = 0.005
        let ps = PointSet::from_points(dim(1), &[[0.1], [0.4], [0.6], [0.9]]).unwrap();
        assert_eq!(per_cube_counts(&p, &ps, &cfg).unwrap(), vec![2, 2]);
        // a lone point in a cube has no k-th neighbor there
        let ps = PointSet::from_points(dim(1), &[[0.1], [0.4], [0.6]]).unwrap();
        assert_eq!(per_cube_counts(&p, &ps, &cfg).unwrap(), vec![2, 0]);
    }

    #[test]
    fn single_cube_uses_euclidean_metric() {
        let p = ProcessParams::new(100.0, 1.0, 1, 0.0, dim(1)).unwrap();
        let cfg = BlockedConfig::new(CubePartition::new(1, dim(1)).unwrap(), 0.0, 1.0).unwrap();
        let ps = PointSet::from_points(dim(1), &[[0.05], [0.5], [0.95]]).unwrap();
        let eta = build_eta(&p, &ps, &cfg).unwrap();
        let l = build_l(&p, &ps).unwrap();
        // on the torus 0.05 and 0.95 are 0.1 apart; in the cube they are not
        assert!((l.marks()[0] - (100.0 * 2.0 * 0.1 - 1.0)).abs() < 1e-9);
        assert!((eta.marks()[0] - (100.0 * 2.0 * 0.45 - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn huge_w_means_no_truncation() {
        let ps = sample_poisson_process(400.0, dim(2), RngStream::new(9, 9)).unwrap();
        let p = ProcessParams::new(400.0, 2.0, 1, -1.0, dim(2)).unwrap();
        let part = CubePartition::new(4, dim(2)).unwrap();
        let cfg = BlockedConfig::new(part, 0.0, 1e9).unwrap();
        let full = build_eta(&p, &ps, &cfg).unwrap();
        assert!(!full.is_empty());
        // a threshold beyond any cube diameter cuts nothing
        assert_eq!(concat(p.d, blocked(&p, &ps, &cfg, 10.0).unwrap()), full);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn partition_membership(seed in 0u64..5000, d in 1usize..=3, m in 1usize..=5, shell_frac in 0.0f64..0.49) {
            let part = CubePartition::new(m, dim(d)).unwrap();
            let shell = shell_frac * part.side();
            let ps = sample_binomial_process(50, dim(d), RngStream::new(seed, 2));
            for x in ps.iter() {
                let holders: Vec<usize> = (0..part.b_eff())
                    .filter(|&l| split_cube(&part, l, shell).unwrap().in_cube(x))
                    .collect();
                prop_assert_eq!(holders.clone(), vec![part.cube_of(x)]);
                let s = split_cube(&part, holders[0], shell).unwrap();
                prop_assert!(s.in_interior(x) != s.in_boundary(x));
            }
        }

        #[test]
        fn truncated_eta_is_submeasure(seed in 0u64..5000, d in 1usize..=2, k in 1usize..=2) {
            let n = 600.0;
            let ps = sample_poisson_process(n, dim(d), RngStream::new(seed, 4)).unwrap();
            let p = ProcessParams::new(n, 3.0, k, -1.0, dim(d)).unwrap();
            let cfg = BlockedConfig::with_default_w(&p, 4.0).unwrap();
            let eta = build_eta(&p, &ps, &cfg).unwrap();
            let cut = build_eta_truncated(&p, &ps, &cfg).unwrap();
            prop_assert!(cut.is_submeasure_of(&eta));
            let counts = per_cube_counts(&p, &ps, &cfg).unwrap();
            prop_assert_eq!(counts.iter().sum::<usize>(), eta.len());
        }
    }

    #[test]
    fn interior_atoms_match_global_process() {
        // with a shell of r_n(w_n) most interior atoms have the same k-NN
        // in the cube and on the torus, and then coincide bit for bit
        let n = 2000.0;
        let p = ProcessParams::new(n, 6.0, 1, 0.0, dim(1)).unwrap();
        let cfg = BlockedConfig::with_default_w(&p, 4.0).unwrap();
        let mut matched = 0usize;
        let mut total = 0usize;
        for rep in 0..50 {
            let ps = sample_poisson_process(n, dim(1), RngStream::derive(31, 0, 0, rep)).unwrap();
            let l = build_l(&p, &ps).unwrap();
            let eta = build_eta(&p, &ps, &cfg).unwrap();
            let tv = tv_distance_atomic(&l, &eta).unwrap();
            total += l.len().max(eta.len());
            matched += l.len().max(eta.len()) - tv as usize;
        }
        assert!(total > 0 && matched as f64 >= 0.5 * total as f64, "{matched}/{total}");
    }

    #[test]
    fn cube_counts_are_exchangeable() {
        let n = 3000.0;
        let p = ProcessParams::new(n, n.ln() - 2.0, 1, 0.0, dim(1)).unwrap();
        let cfg = BlockedConfig::with_default_w(&p, 4.0).unwrap();
        let mut per: Vec<Vec<u64>> = vec![Vec::new(); 4];
        for rep in 0..400 {
            let ps = sample_poisson_process(n, dim(1), RngStream::derive(37, 0, 0, rep)).unwrap();
            for (l, c) in per_cube_counts(&p, &ps, &cfg).unwrap().into_iter().enumerate() {
                per[l].push(c as u64);
            }
        }
        let sums: Vec<Summary> = per.iter().map(|v| Summary::from_counts(v)).collect();
        for a in &sums {
            for b in &sums {
                let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
                assert!((a.mean - b.mean).abs() <= 3.0 * se + 1e-12);
            }
        }
    }
}
