//! Geometry of the flat torus `[0,1)^d`.
//!
//! Coordinates are stored already reduced modulo 1; [`canonicalize`] is the only
//! place where wrapping happens. Distances use the periodic (minimum image)
//! Euclidean metric.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{LabError, Result};

/// Ambient dimension `d >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dimension(usize);

impl Dimension {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(LabError::param("d", "dimension must be at least 1"));
        }
        Ok(Dimension(d))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A point of the torus; every coordinate lies in `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> Dimension {
        Dimension(self.coords.len())
    }

    /// Wraps coordinates that are already known to be canonical.
    pub(crate) fn from_canonical(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| (0.0..1.0).contains(c)));
        TorusPoint { coords }
    }
}

/// Reduces a single finite coordinate into `[0, 1)`.
#[inline]
pub fn wrap_unit(c: f64) -> f64 {
    let r = c.rem_euclid(1.0);
    // rem_euclid of a tiny negative number rounds up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Reduces raw coordinates modulo 1.
pub fn canonicalize(raw: &[f64]) -> Result<TorusPoint> {
    if raw.is_empty() {
        return Err(LabError::param("d", "a point needs at least one coordinate"));
    }
    let mut coords = Vec::with_capacity(raw.len());
    for (axis, &c) in raw.iter().enumerate() {
        if !c.is_finite() {
            return Err(LabError::InvalidCoordinate { axis, value: c });
        }
        coords.push(wrap_unit(c));
    }
    Ok(TorusPoint { coords })
}

/// Per-axis periodic separation of two canonical coordinates.
#[inline(always)]
pub fn axis_gap(a: f64, b: f64) -> f64 {
    let g = (a - b).abs();
    g.min(1.0 - g)
}

/// Squared toroidal distance between two coordinate slices of equal length.
#[inline(always)]
pub fn torus_dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let g = axis_gap(x, y);
        s += g * g;
    }
    s
}

/// Squared Euclidean distance with no wrapping.
#[inline(always)]
pub fn euclid_dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let g = (x - y).abs();
        s += g * g;
    }
    s
}

/// Toroidal distance on coordinate slices. Callers guarantee equal lengths.
#[inline]
pub fn torus_distance_raw(a: &[f64], b: &[f64]) -> f64 {
    torus_dist2(a, b).sqrt()
}

/// Toroidal distance `min_z |x - y + z|`.
pub fn torus_distance(x: &TorusPoint, y: &TorusPoint) -> Result<f64> {
    if x.coords.len() != y.coords.len() {
        return Err(LabError::DimensionMismatch {
            expected: x.coords.len(),
            got: y.coords.len(),
        });
    }
    Ok(torus_distance_raw(&x.coords, &y.coords))
}

/// Volume `theta_d` of the Euclidean unit ball, `pi^{d/2} / Gamma(d/2 + 1)`.
pub fn ball_volume_coeff(d: Dimension) -> f64 {
    // theta_d = theta_{d-2} * 2 pi / d
    let d = d.get();
    let mut v = if d.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut j = if d.is_multiple_of(2) { 2 } else { 3 };
    while j <= d {
        v *= 2.0 * PI / j as f64;
        j += 2;
    }
    v
}

/// Volume `theta_d r^d` of a ball of radius `r`.
pub fn ball_volume(r: f64, d: Dimension) -> Result<f64> {
    if r.is_nan() || r < 0.0 {
        return Err(LabError::param("r", format!("radius must be non-negative, got {r}")));
    }
    Ok(ball_volume_coeff(d) * r.powi(d.get() as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(c: &[f64]) -> TorusPoint {
        canonicalize(c).unwrap()
    }

    #[test]
    fn canonicalize_wraps() {
        let x = p(&[1.3, -0.25]);
        assert!((x.coords()[0] - 0.3).abs() < 1e-12);
        assert_eq!(x.coords()[1], 0.75);
        assert_eq!(p(&[0.0, 0.0]).coords(), &[0.0, 0.0]);
        assert_eq!(p(&[2.0]).coords(), &[0.0]);
        assert_eq!(p(&[-1e-300]).coords(), &[0.0]);
    }

    #[test]
    fn canonicalize_rejects_non_finite() {
        assert!(matches!(
            canonicalize(&[0.5, f64::NAN]),
            Err(LabError::InvalidCoordinate { axis: 1, .. })
        ));
        assert!(canonicalize(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn distance_examples() {
        assert!((torus_distance(&p(&[0.1]), &p(&[0.9])).unwrap() - 0.2).abs() < 1e-12);
        let d = torus_distance(&p(&[0.9, 0.1]), &p(&[0.1, 0.9])).unwrap();
        assert!((d - 0.08f64.sqrt()).abs() < 1e-12);
        let d = torus_distance(&p(&[0.0, 0.0]), &p(&[0.3, 0.4])).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
        assert!(torus_distance(&p(&[0.1]), &p(&[0.1, 0.2])).is_err());
    }

    #[test]
    fn ball_volumes() {
        let d = |k| Dimension::new(k).unwrap();
        assert_eq!(ball_volume_coeff(d(1)), 2.0);
        assert!((ball_volume_coeff(d(2)) - PI).abs() < 1e-15);
        assert!((ball_volume_coeff(d(3)) - 4.0 * PI / 3.0).abs() < 1e-15);
        assert!((ball_volume_coeff(d(4)) - PI * PI / 2.0).abs() < 1e-14);
        assert!((ball_volume(0.25, d(1)).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(ball_volume(0.0, d(2)).unwrap(), 0.0);
        assert!((ball_volume(1.0, d(3)).unwrap() - 4.0 * PI / 3.0).abs() < 1e-15);
        assert!(ball_volume(-0.1, d(2)).is_err());
        assert!(Dimension::new(0).is_err());
    }

    fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0..1.0f64, d)
    }

    proptest! {
        #[test]
        fn metric_axioms(d in 1usize..4, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut draw = || (0..d).map(|_| rng.random::<f64>()).collect::<Vec<_>>();
            let (x, y, z) = (draw(), draw(), draw());
            let dxy = torus_distance_raw(&x, &y);
            prop_assert_eq!(dxy, torus_distance_raw(&y, &x));
            prop_assert!(dxy <= torus_distance_raw(&x, &z) + torus_distance_raw(&z, &y) + 1e-12);
            prop_assert!(dxy <= (d as f64).sqrt() / 2.0 + 1e-15);
            prop_assert_eq!(torus_distance_raw(&x, &x), 0.0);
        }

        #[test]
        fn translation_invariance(x in point(3), y in point(3), t in point(3)) {
            let xs: Vec<f64> = x.iter().zip(&t).map(|(a, b)| wrap_unit(a + b)).collect();
            let ys: Vec<f64> = y.iter().zip(&t).map(|(a, b)| wrap_unit(a + b)).collect();
            let a = torus_distance_raw(&x, &y);
            let b = torus_distance_raw(&xs, &ys);
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
