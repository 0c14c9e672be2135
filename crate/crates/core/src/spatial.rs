//! Neighbor queries on the torus (or inside an axis-aligned box).
//!
//! [`GridIndex`] buckets points into a regular cell grid and answers
//! k-nearest-neighbor distance queries by expanding Chebyshev rings of cells,
//! and fixed-radius counts by scanning the cells that overlap the query ball.
//! [`knn_distance_bruteforce`] is the exhaustive reference the grid is tested
//! against. [`Neighborhoods`] wraps whichever index suits the dimension; in
//! one dimension a sorted sweep replaces the grid.

use crate::error::{LabError, Result};
use crate::sampling::PointSet;
use crate::torus::{axis_gap, euclid_dist2, torus_dist2, Dimension, TorusPoint};

/// Default occupancy used when callers do not pick one.
pub const DEFAULT_POINTS_PER_CELL: f64 = 2.0;

/// How distances are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Periodic metric of the unit torus.
    Torus,
    /// Plain Euclidean metric inside a box; nothing wraps.
    Euclidean,
}

#[inline(always)]
fn dist2(metric: Metric, a: &[f64], b: &[f64]) -> f64 {
    match metric {
        Metric::Torus => torus_dist2(a, b),
        Metric::Euclidean => euclid_dist2(a, b),
    }
}

/// Immutable cell grid over a point set.
#[derive(Debug, Clone)]
pub struct GridIndex<'a> {
    points: &'a PointSet,
    metric: Metric,
    m: usize,
    origin: Vec<f64>,
    side: f64,
    // CSR layout: indices of cell c live in order[start[c]..start[c + 1]]
    start: Vec<u32>,
    order: Vec<u32>,
}

/// Grid over the whole torus with `m = max(1, floor((n / target)^{1/d}))`
/// cells per axis.
pub fn build_index(ps: &PointSet, target_points_per_cell: f64) -> GridIndex<'_> {
    let d = ps.dim().get() as f64;
    let target = if target_points_per_cell > 0.0 {
        target_points_per_cell
    } else {
        DEFAULT_POINTS_PER_CELL
    };
    let raw = (ps.len() as f64 / target).powf(1.0 / d).floor();
    let m = if raw.is_finite() && raw >= 1.0 { raw as usize } else { 1 };
    GridIndex::with_cells(ps, m)
}

impl<'a> GridIndex<'a> {
    /// Torus grid with exactly `m` cells per axis.
    pub fn with_cells(ps: &'a PointSet, m: usize) -> Self {
        let d = ps.dim().get();
        Self::build(ps, Metric::Torus, vec![0.0; d], 1.0, m)
    }

    /// Euclidean grid over the box `origin + [0, side)^d`. Points must lie in
    /// the box.
    pub fn in_box(
        ps: &'a PointSet,
        origin: &[f64],
        side: f64,
        target_points_per_cell: f64,
    ) -> Self {
        let d = ps.dim().get() as f64;
        let raw = (ps.len() as f64 / target_points_per_cell.max(1e-9)).powf(1.0 / d).floor();
        let m = if raw.is_finite() && raw >= 1.0 { raw as usize } else { 1 };
        Self::build(ps, Metric::Euclidean, origin.to_vec(), side, m)
    }

    fn build(ps: &'a PointSet, metric: Metric, origin: Vec<f64>, side: f64, m: usize) -> Self {
        let d = ps.dim().get();
        let m = m.max(1);
        let ncells = m.checked_pow(d as u32).expect("grid too large");
        let mut cell_of = Vec::with_capacity(ps.len());
        let mut counts = vec![0u32; ncells + 1];
        let mut idx = GridIndex {
            points: ps,
            metric,
            m,
            origin,
            side,
            start: Vec::new(),
            order: Vec::new(),
        };
        for p in ps.iter() {
            let c = idx.flat_cell(&idx.cell_coords(p));
            counts[c + 1] += 1;
            cell_of.push(c);
        }
        for c in 0..ncells {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut order = vec![0u32; ps.len()];
        for (i, &c) in cell_of.iter().enumerate() {
            order[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        idx.start = counts;
        idx.order = order;
        idx
    }

    pub fn dim(&self) -> Dimension {
        self.points.dim()
    }

    pub fn cells_per_axis(&self) -> usize {
        self.m
    }

    pub fn points(&self) -> &'a PointSet {
        self.points
    }

    #[inline]
    fn axis_cell(&self, axis: usize, c: f64) -> usize {
        let t = ((c - self.origin[axis]) / self.side * self.m as f64).floor();
        if t <= 0.0 {
            0
        } else {
            (t as usize).min(self.m - 1)
        }
    }

    /// Integer cell coordinates `floor(coord * m)` of a location.
    pub fn cell_coords(&self, p: &[f64]) -> Vec<usize> {
        p.iter().enumerate().map(|(a, &c)| self.axis_cell(a, c)).collect()
    }

    #[inline]
    fn flat_cell(&self, cell: &[usize]) -> usize {
        cell.iter().rev().fold(0, |acc, &c| acc * self.m + c)
    }

    /// Point indices stored in the bucket with the given cell coordinates.
    pub fn bucket(&self, cell: &[usize]) -> &[u32] {
        let c = self.flat_cell(cell);
        &self.order[self.start[c] as usize..self.start[c + 1] as usize]
    }

    #[inline]
    fn bucket_flat(&self, c: usize) -> &[u32] {
        &self.order[self.start[c] as usize..self.start[c + 1] as usize]
    }

    /// Range of cell offsets along `axis` that reach distinct cells.
    #[inline]
    fn offset_range(&self, base: usize) -> (isize, isize) {
        let m = self.m as isize;
        match self.metric {
            Metric::Torus => (-((m - 1) / 2), m / 2),
            Metric::Euclidean => (-(base as isize), m - 1 - base as isize),
        }
    }

    #[inline]
    fn shift(&self, base: usize, off: isize) -> usize {
        (base as isize + off).rem_euclid(self.m as isize) as usize
    }

    /// Distance from `x` to the k-th nearest indexed point, skipping
    /// `exclude`; `+inf` when fewer than `k` candidates exist.
    pub fn knn_distance(&self, x: &[f64], k: usize, exclude: Option<usize>) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let d = x.len();
        let w = self.side / self.m as f64;
        let base = self.cell_coords(x);
        let mut slack = f64::INFINITY;
        let mut ranges = Vec::with_capacity(d);
        let mut max_ring = 0isize;
        for a in 0..d {
            let lo = self.origin[a] + base[a] as f64 * w;
            let to_lo = (x[a] - lo).max(0.0);
            let to_hi = (lo + w - x[a]).max(0.0);
            slack = slack.min(to_lo.min(to_hi));
            let r = self.offset_range(base[a]);
            max_ring = max_ring.max(-r.0).max(r.1);
            ranges.push(r);
        }

        let mut best: Vec<f64> = Vec::with_capacity(k + 1);
        let mut offs = vec![0isize; d];
        let mut cell = vec![0usize; d];
        for s in 0..=max_ring {
            // odometer over the ring's bounding box, keeping cells with max |o| == s
            let lims: Vec<(isize, isize)> =
                ranges.iter().map(|&(lo, hi)| (lo.max(-s), hi.min(s))).collect();
            if lims.iter().any(|&(lo, hi)| lo > hi) {
                continue;
            }
            for a in 0..d {
                offs[a] = lims[a].0;
            }
            'cells: loop {
                if offs.iter().any(|o| o.abs() == s) {
                    for a in 0..d {
                        cell[a] = self.shift(base[a], offs[a]);
                    }
                    for &j in self.bucket_flat(self.flat_cell(&cell)) {
                        let j = j as usize;
                        if Some(j) == exclude {
                            continue;
                        }
                        let dd = dist2(self.metric, x, self.points.point(j));
                        if best.len() < k {
                            insert_sorted(&mut best, dd);
                        } else if dd < best[k - 1] {
                            best.pop();
                            insert_sorted(&mut best, dd);
                        }
                    }
                }
                let mut a = 0;
                loop {
                    if a == d {
                        break 'cells;
                    }
                    if offs[a] < lims[a].1 {
                        offs[a] += 1;
                        break;
                    }
                    offs[a] = lims[a].0;
                    a += 1;
                }
            }
            if best.len() == k {
                let reach = s as f64 * w + slack;
                if best[k - 1] <= reach * reach {
                    break;
                }
            }
        }
        if best.len() < k {
            f64::INFINITY
        } else {
            best[k - 1].sqrt()
        }
    }

    /// Number of indexed points within distance `r` of `x` (closed ball),
    /// skipping `exclude`.
    pub fn count_within(&self, x: &[f64], r: f64, exclude: Option<usize>) -> Result<usize> {
        if r.is_nan() || r < 0.0 {
            return Err(LabError::param("r", format!("radius must be non-negative, got {r}")));
        }
        Ok(self.count_within_capped(x, r, exclude, usize::MAX))
    }

    /// As [`count_within`](Self::count_within) but stops once `cap` points
    /// have been found.
    pub fn count_within_capped(&self, x: &[f64], r: f64, exclude: Option<usize>, cap: usize) -> usize {
        let d = x.len();
        let m = self.m as isize;
        let scale = self.m as f64 / self.side;
        let mut lims = Vec::with_capacity(d);
        for (&xa, &oa) in x.iter().zip(&self.origin) {
            let lo = ((xa - r - oa) * scale).floor() as isize;
            let hi = ((xa + r - oa) * scale).floor() as isize;
            let (lo, hi) = match self.metric {
                Metric::Torus if hi - lo + 1 >= m => (0, m - 1),
                Metric::Torus => (lo, hi),
                Metric::Euclidean => (lo.max(0), hi.min(m - 1)),
            };
            if lo > hi {
                return 0;
            }
            lims.push((lo, hi));
        }
        let rr = r;
        let mut count = 0usize;
        let mut offs: Vec<isize> = lims.iter().map(|l| l.0).collect();
        let mut cell = vec![0usize; d];
        loop {
            for a in 0..d {
                cell[a] = offs[a].rem_euclid(m) as usize;
            }
            for &j in self.bucket_flat(self.flat_cell(&cell)) {
                let j = j as usize;
                if Some(j) == exclude {
                    continue;
                }
                if dist2(self.metric, x, self.points.point(j)).sqrt() <= rr {
                    count += 1;
                    if count >= cap {
                        return count;
                    }
                }
            }
            let mut a = 0;
            loop {
                if a == d {
                    return count;
                }
                if offs[a] < lims[a].1 {
                    offs[a] += 1;
                    break;
                }
                offs[a] = lims[a].0;
                a += 1;
            }
        }
    }
}

#[inline]
fn insert_sorted(v: &mut Vec<f64>, x: f64) {
    let pos = v.partition_point(|&y| y <= x);
    v.insert(pos, x);
}

/// Exhaustive k-nearest-neighbor distance on the torus.
pub fn knn_distance_bruteforce(ps: &PointSet, x: &TorusPoint, k: usize, exclude: Option<usize>) -> f64 {
    knn_bruteforce_raw(ps, x.coords(), k, exclude)
}

pub(crate) fn knn_bruteforce_raw(ps: &PointSet, x: &[f64], k: usize, exclude: Option<usize>) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let mut ds: Vec<f64> = ps
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != exclude)
        .map(|(_, p)| torus_dist2(x, p).sqrt())
        .collect();
    if ds.len() < k {
        return f64::INFINITY;
    }
    let (_, kth, _) = ds.select_nth_unstable_by(k - 1, f64::total_cmp);
    *kth
}

/// k-nearest-neighbor distance through a grid index.
pub fn knn_distance(idx: &GridIndex<'_>, x: &TorusPoint, k: usize, exclude: Option<usize>) -> f64 {
    idx.knn_distance(x.coords(), k, exclude)
}

/// Fixed-radius count through a grid index.
pub fn count_within(idx: &GridIndex<'_>, x: &TorusPoint, r: f64, exclude: Option<usize>) -> Result<usize> {
    idx.count_within(x.coords(), r, exclude)
}

/// Sorted sweep over one-dimensional points.
#[derive(Debug, Clone)]
struct Sweep1d {
    metric: Metric,
    xs: Vec<f64>,
    // sorted position -> original index, and its inverse; empty when the
    // input was already sorted
    perm: Vec<u32>,
    rank: Vec<u32>,
}

impl Sweep1d {
    fn new(ps: &PointSet, metric: Metric) -> Self {
        let flat = ps.flat();
        if flat.windows(2).all(|w| w[0] <= w[1]) {
            return Sweep1d {
                metric,
                xs: flat.to_vec(),
                perm: Vec::new(),
                rank: Vec::new(),
            };
        }
        let mut perm: Vec<u32> = (0..flat.len() as u32).collect();
        perm.sort_by(|&a, &b| flat[a as usize].total_cmp(&flat[b as usize]));
        let xs = perm.iter().map(|&i| flat[i as usize]).collect();
        let mut rank = vec![0u32; perm.len()];
        for (pos, &i) in perm.iter().enumerate() {
            rank[i as usize] = pos as u32;
        }
        Sweep1d {
            metric,
            xs,
            perm,
            rank,
        }
    }

    #[inline]
    fn pos(&self, i: usize) -> usize {
        if self.rank.is_empty() {
            i
        } else {
            self.rank[i] as usize
        }
    }

    #[inline]
    fn gap(&self, a: f64, b: f64) -> f64 {
        match self.metric {
            Metric::Torus => axis_gap(a, b),
            Metric::Euclidean => (a - b).abs(),
        }
    }

    /// Sorted position `l` steps to the left of `p`, if it exists.
    #[inline]
    fn left(&self, p: usize, l: usize) -> Option<usize> {
        let n = self.xs.len();
        match self.metric {
            Metric::Torus => Some((p + n - l % n) % n),
            Metric::Euclidean => p.checked_sub(l),
        }
    }

    #[inline]
    fn right(&self, p: usize, r: usize) -> Option<usize> {
        let n = self.xs.len();
        match self.metric {
            Metric::Torus => Some((p + r) % n),
            Metric::Euclidean => (p + r < n).then_some(p + r),
        }
    }

    fn knn(&self, i: usize, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let n = self.xs.len();
        if n <= k {
            return f64::INFINITY;
        }
        let p = self.pos(i);
        let x = self.xs[p];
        let (mut l, mut r) = (1usize, 1usize);
        let mut last = 0.0;
        for _ in 0..k {
            // the nearest points always form a window around p, so the next
            // one is the nearer of the two window neighbors
            let dl = self.left(p, l).map_or(f64::INFINITY, |q| self.gap(x, self.xs[q]));
            let dr = self.right(p, r).map_or(f64::INFINITY, |q| self.gap(x, self.xs[q]));
            if dl <= dr {
                last = dl;
                l += 1;
            } else {
                last = dr;
                r += 1;
            }
        }
        last.abs()
    }

    fn count(&self, i: usize, radius: f64, cap: usize) -> usize {
        let n = self.xs.len();
        if n == 0 {
            return 0;
        }
        let others = n - 1;
        let p = self.pos(i);
        let x = self.xs[p];
        let mut c = 0usize;
        let mut l = 1;
        while c < others && c < cap {
            match self.left(p, l) {
                Some(q) if self.gap(x, self.xs[q]) <= radius => {
                    c += 1;
                    l += 1;
                }
                _ => break,
            }
        }
        let mut r = 1;
        while c < others && c < cap {
            match self.right(p, r) {
                Some(q) if self.gap(x, self.xs[q]) <= radius => {
                    c += 1;
                    r += 1;
                }
                _ => break,
            }
        }
        c
    }

    fn original(&self, pos: usize) -> usize {
        if self.perm.is_empty() {
            pos
        } else {
            self.perm[pos] as usize
        }
    }
}

/// Per-point neighbor queries over a whole configuration, each point
/// excluding itself. Uses a sorted sweep in one dimension and a grid
/// otherwise.
#[derive(Debug, Clone)]
pub struct Neighborhoods<'a> {
    inner: Inner<'a>,
    len: usize,
}

#[derive(Debug, Clone)]
enum Inner<'a> {
    Sweep(Sweep1d),
    Grid(GridIndex<'a>, &'a PointSet),
}

impl<'a> Neighborhoods<'a> {
    /// Neighborhoods under the torus metric.
    pub fn torus(ps: &'a PointSet) -> Self {
        let inner = if ps.dim().get() == 1 {
            Inner::Sweep(Sweep1d::new(ps, Metric::Torus))
        } else {
            Inner::Grid(build_index(ps, DEFAULT_POINTS_PER_CELL), ps)
        };
        Neighborhoods { inner, len: ps.len() }
    }

    /// Neighborhoods under the Euclidean metric of the box
    /// `origin + [0, side)^d` containing every point.
    pub fn in_box(ps: &'a PointSet, origin: &[f64], side: f64) -> Self {
        let inner = if ps.dim().get() == 1 {
            Inner::Sweep(Sweep1d::new(ps, Metric::Euclidean))
        } else {
            let target = DEFAULT_POINTS_PER_CELL;
            Inner::Grid(GridIndex::in_box(ps, origin, side, target), ps)
        };
        Neighborhoods { inner, len: ps.len() }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `R_k` of point `i` with respect to the other points.
    pub fn knn(&self, i: usize, k: usize) -> f64 {
        match &self.inner {
            Inner::Sweep(s) => s.knn(i, k),
            Inner::Grid(g, ps) => g.knn_distance(ps.point(i), k, Some(i)),
        }
    }

    /// Number of other points within `r` of point `i`, saturating at `cap`.
    pub fn count(&self, i: usize, r: f64, cap: usize) -> usize {
        match &self.inner {
            Inner::Sweep(s) => s.count(i, r, cap),
            Inner::Grid(g, ps) => g.count_within_capped(ps.point(i), r, Some(i), cap),
        }
    }

    /// Visits point indices in an order that is cache-friendly for the
    /// underlying structure.
    pub fn for_each_index(&self, mut f: impl FnMut(usize)) {
        match &self.inner {
            Inner::Sweep(s) => (0..self.len).for_each(|p| f(s.original(p))),
            Inner::Grid(..) => (0..self.len).for_each(f),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::sampling::{sample_binomial_process, sample_poisson_process};
    use crate::torus::canonicalize;

    fn dim(d: usize) -> Dimension {
        Dimension::new(d).unwrap()
    }

    fn set(d: usize, pts: &[&[f64]]) -> PointSet {
        PointSet::from_points(dim(d), pts).unwrap()
    }

    #[test]
    fn empty_index() {
        let ps = PointSet::new(dim(2));
        let idx = build_index(&ps, 2.0);
        assert_eq!(idx.cells_per_axis(), 1);
        assert!(idx.bucket(&[0, 0]).is_empty());
        let x = canonicalize(&[0.2, 0.2]).unwrap();
        assert_eq!(knn_distance(&idx, &x, 1, None), f64::INFINITY);
        assert_eq!(count_within(&idx, &x, 0.3, None).unwrap(), 0);
    }

    #[test]
    fn bucket_arithmetic() {
        let ps = set(2, &[&[0.5, 0.5]]);
        let idx = GridIndex::with_cells(&ps, 2);
        assert_eq!(idx.bucket(&[1, 1]), &[0]);
        assert!(idx.bucket(&[0, 0]).is_empty());
    }

    #[test]
    fn every_point_in_its_bucket() {
        let ps = sample_binomial_process(10_000, dim(2), RngStream::new(1, 0));
        let idx = build_index(&ps, 2.0);
        assert_eq!(idx.cells_per_axis(), 70);
        for (i, p) in ps.iter().enumerate() {
            let cell: Vec<usize> = p.iter().map(|c| (c * 70.0).floor() as usize).collect();
            assert_eq!(idx.cell_coords(p), cell);
            assert!(idx.bucket(&cell).contains(&(i as u32)));
        }
    }

    #[test]
    fn knn_examples() {
        let ps = set(1, &[&[0.1], &[0.9]]);
        let idx = build_index(&ps, 2.0);
        let x = ps.torus_point(0);
        assert!((knn_distance(&idx, &x, 1, Some(0)) - 0.2).abs() < 1e-12);
        assert!((knn_distance_bruteforce(&ps, &x, 1, Some(0)) - 0.2).abs() < 1e-12);
        let nb = Neighborhoods::torus(&ps);
        assert!((nb.knn(0, 1) - 0.2).abs() < 1e-12);

        let single = set(2, &[&[0.3, 0.3]]);
        let idx = build_index(&single, 2.0);
        assert_eq!(knn_distance(&idx, &single.torus_point(0), 1, Some(0)), f64::INFINITY);
        assert_eq!(knn_distance_bruteforce(&single, &single.torus_point(0), 1, Some(0)), f64::INFINITY);

        let ps = set(2, &[&[0.0, 0.0], &[0.3, 0.4]]);
        let x = ps.torus_point(0);
        assert!((knn_distance_bruteforce(&ps, &x, 1, Some(0)) - 0.5).abs() < 1e-12);
        assert_eq!(knn_distance_bruteforce(&ps, &x, 3, None), f64::INFINITY);
    }

    #[test]
    fn count_examples() {
        let ps = set(1, &[&[0.1], &[0.9]]);
        let idx = build_index(&ps, 2.0);
        let origin = canonicalize(&[0.0]).unwrap();
        assert_eq!(count_within(&idx, &origin, 0.15, None).unwrap(), 2);
        let x = canonicalize(&[0.5]).unwrap();
        assert_eq!(count_within(&idx, &x, 0.0, None).unwrap(), 0);
        assert!(count_within(&idx, &x, -1.0, None).is_err());
    }

    #[test]
    fn grid_matches_bruteforce_exactly() {
        for d in 1..=3usize {
            for rep in 0..30u64 {
                let n = [3usize, 17, 200][rep as usize % 3];
                let ps = sample_binomial_process(n, dim(d), RngStream::new(2, rep * 10 + d as u64));
                let target = [0.5, 2.0, 8.0][rep as usize % 3];
                let idx = build_index(&ps, target);
                let queries = sample_binomial_process(20, dim(d), RngStream::new(3, rep));
                for k in [1usize, 2, 5] {
                    for q in queries.iter() {
                        let q = canonicalize(q).unwrap();
                        assert_eq!(
                            idx.knn_distance(q.coords(), k, None).to_bits(),
                            knn_distance_bruteforce(&ps, &q, k, None).to_bits()
                        );
                    }
                    for i in 0..ps.len() {
                        let x = ps.torus_point(i);
                        let g = idx.knn_distance(x.coords(), k, Some(i));
                        assert_eq!(g.to_bits(), knn_distance_bruteforce(&ps, &x, k, Some(i)).to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn sweep_matches_bruteforce_exactly() {
        for rep in 0..40u64 {
            let n = [2usize, 3, 9, 150][rep as usize % 4];
            let ps = sample_binomial_process(n, dim(1), RngStream::new(4, rep));
            // shuffled copy exercises the permutation path
            let mut idx: Vec<usize> = (0..n).rev().collect();
            idx.rotate_left(n / 3);
            let shuffled = ps.select(&idx);
            for set in [&ps, &shuffled] {
                let nb = Neighborhoods::torus(set);
                let grid = build_index(set, 2.0);
                for i in 0..set.len() {
                    let x = set.torus_point(i);
                    for k in 1..=4 {
                        assert_eq!(
                            nb.knn(i, k).to_bits(),
                            knn_distance_bruteforce(set, &x, k, Some(i)).to_bits(),
                            "n={n} i={i} k={k}"
                        );
                    }
                    for r in [0.0, 0.01, 0.1, 0.3, 0.6] {
                        let c = grid.count_within(x.coords(), r, Some(i)).unwrap();
                        assert_eq!(nb.count(i, r, usize::MAX), c, "n={n} r={r}");
                    }
                }
            }
        }
    }

    #[test]
    fn open_box_metric_does_not_wrap() {
        let ps = set(1, &[&[0.01], &[0.49]]);
        let nb = Neighborhoods::in_box(&ps, &[0.0], 0.5);
        assert!((nb.knn(0, 1) - 0.48).abs() < 1e-12);
        assert_eq!(nb.count(0, 0.1, usize::MAX), 0);
        let ps2 = set(2, &[&[0.01, 0.01], &[0.49, 0.01], &[0.2, 0.2]]);
        let nb2 = Neighborhoods::in_box(&ps2, &[0.0, 0.0], 0.5);
        let expect = (0.19f64 * 0.19 + 0.19 * 0.19).sqrt();
        assert!((nb2.knn(0, 1) - expect).abs() < 1e-12);
        let g = GridIndex::in_box(&ps2, &[0.0, 0.0], 0.5, 0.5);
        assert!((g.knn_distance(ps2.point(0), 2, Some(0)) - 0.48).abs() < 1e-12);
    }

    #[test]
    fn radius_count_duality() {
        for d in 1..=3usize {
            let ps = sample_poisson_process(300.0, dim(d), RngStream::new(5, d as u64)).unwrap();
            let idx = build_index(&ps, 2.0);
            for i in 0..ps.len().min(60) {
                for k in [1usize, 2, 4] {
                    let r = idx.knn_distance(ps.point(i), k, Some(i));
                    assert!(idx.count_within(ps.point(i), r, Some(i)).unwrap() >= k);
                    let below = (r - 1e-12).max(0.0);
                    assert!(idx.count_within(ps.point(i), below, Some(i)).unwrap() < k);
                }
            }
        }
    }

    #[test]
    fn knn_monotone_in_k() {
        let ps = sample_poisson_process(400.0, dim(2), RngStream::new(6, 0)).unwrap();
        let idx = build_index(&ps, 2.0);
        for i in 0..50 {
            let ds: Vec<f64> = (1..8).map(|k| idx.knn_distance(ps.point(i), k, Some(i))).collect();
            assert!(ds.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
