//! The marked process of k-nearest-neighbor ball volumes, its truncated
//! variant, the low-degree count, and the atomic total-variation distance.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::analytic::radius_r_n;
use crate::error::{LabError, Result};
use crate::sampling::PointSet;
use crate::spatial::Neighborhoods;
use crate::torus::{ball_volume_coeff, canonicalize, Dimension};

/// Relative margin of the neighbor-count prefilter in [`build_l`]. Points
/// with `k` neighbors inside `r_n(s0) (1 - PREFILTER_MARGIN)` have a mark
/// safely below `s0`; all others get an exact `R_k`.
const PREFILTER_MARGIN: f64 = 1e-9;

/// Model constants shared by every process builder.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ProcessParams {
    /// Intensity of the Poisson input, or the point count of the binomial one.
    pub n: f64,
    pub a_n: f64,
    pub k: usize,
    pub s0: f64,
    #[serde(serialize_with = "ser_dim")]
    pub d: Dimension,
}

fn ser_dim<S: serde::Serializer>(d: &Dimension, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u64(d.get() as u64)
}

impl ProcessParams {
    pub fn new(n: f64, a_n: f64, k: usize, s0: f64, d: Dimension) -> Result<Self> {
        if !(n > 0.0) || !n.is_finite() {
            return Err(LabError::param("n", format!("must be positive and finite, got {n}")));
        }
        if !a_n.is_finite() {
            return Err(LabError::param("a_n", format!("must be finite, got {a_n}")));
        }
        if k == 0 {
            return Err(LabError::param("k", "must be at least 1"));
        }
        if !s0.is_finite() {
            return Err(LabError::param("s0", format!("must be finite, got {s0}")));
        }
        Ok(ProcessParams { n, a_n, k, s0, d })
    }

    /// `r_n(u)` for these constants.
    pub fn radius(&self, u: f64) -> Result<f64> {
        radius_r_n(u, self.n, self.a_n, self.d)
    }
}

/// `f = n theta_d r^d - a_n`; an infinite radius gives an infinite mark.
pub fn mark_value(p: &ProcessParams, r: f64) -> f64 {
    if r == f64::INFINITY {
        return f64::INFINITY;
    }
    p.n * ball_volume_coeff(p.d) * r.powi(p.d.get() as i32) - p.a_n
}

/// A finite marked configuration: atoms `(x, mark)` with `x` on the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedPointSet {
    dim: Dimension,
    coords: Vec<f64>,
    marks: Vec<f64>,
}

impl MarkedPointSet {
    pub fn new(dim: Dimension) -> Self {
        MarkedPointSet {
            dim,
            coords: Vec::new(),
            marks: Vec::new(),
        }
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    /// Adds an atom after canonicalizing its location.
    pub fn push(&mut self, x: &[f64], mark: f64) -> Result<()> {
        if x.len() != self.dim.get() {
            return Err(LabError::DimensionMismatch {
                expected: self.dim.get(),
                got: x.len(),
            });
        }
        if mark.is_nan() {
            return Err(LabError::param("mark", "must not be NaN"));
        }
        let p = canonicalize(x)?;
        self.coords.extend_from_slice(p.coords());
        self.marks.push(mark);
        Ok(())
    }

    pub(crate) fn push_canonical(&mut self, x: &[f64], mark: f64) {
        debug_assert_eq!(x.len(), self.dim.get());
        self.coords.extend_from_slice(x);
        self.marks.push(mark);
    }

    pub fn location(&self, i: usize) -> &[f64] {
        let d = self.dim.get();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn marks(&self) -> &[f64] {
        &self.marks
    }

    pub fn atoms(&self) -> impl ExactSizeIterator<Item = (&[f64], f64)> + '_ {
        self.coords
            .chunks_exact(self.dim.get())
            .zip(self.marks.iter().copied())
    }

    /// Number of atoms in `B x (u, inf)` for the box `B = [lo, hi]`.
    pub fn count_in(&self, lo: &[f64], hi: &[f64], u: f64) -> usize {
        self.atoms()
            .filter(|(x, m)| {
                *m > u
                    && x.iter()
                        .zip(lo.iter().zip(hi))
                        .all(|(&c, (&l, &h))| c >= l && c <= h)
            })
            .count()
    }

    /// The atom set as a multiset of exact bit patterns.
    fn key_counts(&self) -> HashMap<Vec<u64>, usize> {
        let mut out: HashMap<Vec<u64>, usize> = HashMap::with_capacity(self.len());
        for (x, m) in self.atoms() {
            let mut key: Vec<u64> = x.iter().map(|c| c.to_bits()).collect();
            key.push(m.to_bits());
            *out.entry(key).or_default() += 1;
        }
        out
    }

    /// Whether every atom of `self` appears in `other` (with multiplicity).
    pub fn is_submeasure_of(&self, other: &MarkedPointSet) -> bool {
        let theirs = other.key_counts();
        self.key_counts()
            .iter()
            .all(|(k, &c)| theirs.get(k).is_some_and(|&t| t >= c))
    }

    /// CSV with header `x_1,...,x_d,mark`.
    pub fn to_csv(&self) -> String {
        let d = self.dim.get();
        let mut s = csv_header(d, true);
        for (x, m) in self.atoms() {
            push_row(&mut s, x, Some(m));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (dim, rows) = parse_csv(text, true)?;
        let mut out = MarkedPointSet::new(dim);
        for row in rows {
            let (x, m) = row.split_at(dim.get());
            out.push(x, m[0])?;
        }
        Ok(out)
    }
}

/// Formats a float with 17 significant digits, enough to round-trip.
pub fn fmt_sig17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn csv_header(d: usize, marked: bool) -> String {
    let mut s = (1..=d).map(|i| format!("x_{i}")).collect::<Vec<_>>().join(",");
    if marked {
        s.push_str(",mark");
    }
    s.push('\n');
    s
}

fn push_row(s: &mut String, x: &[f64], mark: Option<f64>) {
    for (i, c) in x.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&fmt_sig17(*c));
    }
    if let Some(m) = mark {
        let _ = write!(s, ",{}", fmt_sig17(m));
    }
    s.push('\n');
}

fn parse_csv(text: &str, marked: bool) -> Result<(Dimension, Vec<Vec<f64>>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| LabError::Parse("empty CSV".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let d = cols.len() - usize::from(marked);
    let expected = csv_header(d, marked);
    if d == 0 || header.trim() != expected.trim_end() {
        return Err(LabError::Parse(format!("unexpected CSV header `{header}`")));
    }
    let dim = Dimension::new(d)?;
    let mut rows = Vec::new();
    for (ln, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| LabError::Parse(format!("row {}: {e}", ln + 1)))?;
        if row.len() != cols.len() {
            return Err(LabError::Parse(format!(
                "row {} has {} fields, expected {}",
                ln + 1,
                row.len(),
                cols.len()
            )));
        }
        rows.push(row);
    }
    Ok((dim, rows))
}

/// CSV with header `x_1,...,x_d`.
pub fn points_to_csv(ps: &PointSet) -> String {
    let mut s = csv_header(ps.dim().get(), false);
    for x in ps.iter() {
        push_row(&mut s, x, None);
    }
    s
}

pub fn points_from_csv(text: &str) -> Result<PointSet> {
    let (dim, rows) = parse_csv(text, false)?;
    PointSet::from_points(dim, &rows)
}

fn check_dim(p: &ProcessParams, ps: &PointSet) -> Result<()> {
    if p.d != ps.dim() {
        return Err(LabError::DimensionMismatch {
            expected: p.d.get(),
            got: ps.dim().get(),
        });
    }
    Ok(())
}

/// Marks of the points of `ps` whose mark exceeds `s0`, computed from `nb`
/// (which must index the same points). `r_max` adds the extra requirement
/// `R_k <= r_max`.
pub(crate) fn marked_atoms(
    p: &ProcessParams,
    ps: &PointSet,
    nb: &Neighborhoods<'_>,
    r_max: f64,
    mut keep: impl FnMut(usize) -> bool,
    out: &mut MarkedPointSet,
) -> Result<()> {
    if ps.len() <= p.k {
        return Ok(());
    }
    let r_floor = p.radius(p.s0).unwrap_or(0.0) * (1.0 - PREFILTER_MARGIN);
    let mut err = None;
    nb.for_each_index(|i| {
        if err.is_some() || !keep(i) {
            return;
        }
        if r_floor > 0.0 && nb.count(i, r_floor, p.k) >= p.k {
            return;
        }
        let r = nb.knn(i, p.k);
        let f = mark_value(p, r);
        if f > p.s0 && r <= r_max {
            if f.is_nan() {
                err = Some(LabError::Domain("NaN mark".into()));
                return;
            }
            out.push_canonical(ps.point(i), f);
        }
    });
    err.map_or(Ok(()), Err)
}

/// The marked process: one atom `(X, f(X))` for each `X` in `ps` with
/// `f(X) > s0`, where `f = n theta_d R_k^d - a_n`; empty when `|ps| <= k`.
pub fn build_l(p: &ProcessParams, ps: &PointSet) -> Result<MarkedPointSet> {
    build_l_truncated_at(p, ps, f64::INFINITY)
}

/// [`build_l`] keeping only atoms with `R_k <= sqrt(d) b^{-1/d}`.
pub fn build_l_truncated(p: &ProcessParams, ps: &PointSet, b: f64) -> Result<MarkedPointSet> {
    if !(b > 0.0) {
        return Err(LabError::param("b", format!("must be positive, got {b}")));
    }
    let d = p.d.get() as f64;
    build_l_truncated_at(p, ps, d.sqrt() * b.powf(-1.0 / d))
}

fn build_l_truncated_at(p: &ProcessParams, ps: &PointSet, r_max: f64) -> Result<MarkedPointSet> {
    check_dim(p, ps)?;
    let mut out = MarkedPointSet::new(p.d);
    if ps.len() <= p.k {
        return Ok(out);
    }
    let nb = Neighborhoods::torus(ps);
    marked_atoms(p, ps, &nb, r_max, |_| true, &mut out)?;
    Ok(out)
}

/// Number of points whose closed ball of radius `r` holds at most `k`
/// points of `ps`, the point itself included.
pub fn count_low_degree(ps: &PointSet, r: f64, k: usize) -> Result<usize> {
    if !(r >= 0.0) {
        return Err(LabError::param("r", format!("must be non-negative, got {r}")));
    }
    if k == 0 {
        return Ok(0);
    }
    let nb = Neighborhoods::torus(ps);
    let mut t = 0;
    nb.for_each_index(|i| {
        if nb.count(i, r, k) < k {
            t += 1;
        }
    });
    Ok(t)
}

/// `sup_A |m1(A) - m2(A)|` for finite atomic measures: after matching
/// identical atoms, the larger of the two unmatched surpluses.
pub fn tv_distance_atomic(m1: &MarkedPointSet, m2: &MarkedPointSet) -> Result<f64> {
    if m1.dim() != m2.dim() {
        return Err(LabError::DimensionMismatch {
            expected: m1.dim().get(),
            got: m2.dim().get(),
        });
    }
    let mut surplus2 = m2.key_counts();
    let mut surplus1 = 0usize;
    for (key, c1) in m1.key_counts() {
        match surplus2.get_mut(&key) {
            Some(c2) => {
                let matched = c1.min(*c2);
                surplus1 += c1 - matched;
                *c2 -= matched;
            }
            None => surplus1 += c1,
        }
    }
    let surplus2: usize = surplus2.values().sum();
    Ok(surplus1.max(surplus2) as f64)
}
