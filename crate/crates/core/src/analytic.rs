//! Closed-form quantities: scaling constants, threshold radii, the limiting
//! mark measure `tau_k`, rate functions, the coupling failure bound, exact
//! finite-`n` means, regime diagnostics, and the limit functional of the
//! rare-event regime.

use statrs::function::gamma::ln_gamma;

use crate::error::{LabError, Result};
use crate::stats::{poisson_cdf, poisson_log_cdf, poisson_log_sf};
use crate::torus::{ball_volume_coeff, Dimension};

/// Mark range covered by every quadrature: `[s0, s0 + U_SPAN]`.
pub const U_SPAN: f64 = 40.0;

/// Minimum number of mark panels in any quadrature.
pub const MIN_U_PANELS: usize = 400;

#[inline]
fn ln_factorial(m: usize) -> f64 {
    if m <= 20 {
        // exact in f64, so that e.g. alpha_1(0) is exactly 1
        (1..=m).map(|i| i as f64).product::<f64>().ln()
    } else {
        ln_gamma(m as f64 + 1.0)
    }
}

/// `b_n = n a_n^{k-1} e^{-a_n}`.
pub fn scaling_b_n(n: f64, a_n: f64, k: usize) -> f64 {
    n * a_n.powi(k as i32 - 1) * (-a_n).exp()
}

/// Threshold radius `r_n(u) = ((a_n + u) / (n theta_d))^{1/d}`.
pub fn radius_r_n(u: f64, n: f64, a_n: f64, d: Dimension) -> Result<f64> {
    let lam = a_n + u;
    if !(lam >= 0.0) {
        return Err(LabError::Domain(format!("a_n + u must be non-negative, got {lam}")));
    }
    Ok((lam / (n * ball_volume_coeff(d))).powf(1.0 / d.get() as f64))
}

/// `alpha_k = e^{-s0} / (k-1)!`, the total mass of `tau_k`.
pub fn alpha_k(k: usize, s0: f64) -> f64 {
    (-s0 - ln_factorial(k.saturating_sub(1))).exp()
}

/// Density of `tau_k(du) = e^{-u} / (k-1)! 1{u >= s0} du`.
pub fn tau_k_density(u: f64, k: usize, s0: f64) -> f64 {
    if u < s0 {
        0.0
    } else {
        (-u - ln_factorial(k.saturating_sub(1))).exp()
    }
}

/// `tau_k([u0, u1])` in closed form.
pub fn tau_k_mass(u0: f64, u1: f64, k: usize, s0: f64) -> f64 {
    let lo = u0.max(s0);
    if u1 <= lo {
        return 0.0;
    }
    let c = (-ln_factorial(k.saturating_sub(1))).exp();
    c * ((-lo).exp() - (-u1).exp())
}

/// `H(x) = x log x + 1 - x`, with `H(0) = 1`.
pub fn entropy_h(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(LabError::Domain(format!("H(x) needs x >= 0, got {x}")));
    }
    Ok(if x == 0.0 { 1.0 } else { x * x.ln() + 1.0 - x })
}

/// Rate function `I_k(x) = x log(x / alpha_k) - x + alpha_k` on `x >= 0`,
/// `+inf` below zero.
pub fn rate_i_k(x: f64, k: usize, s0: f64) -> f64 {
    let a = alpha_k(k, s0);
    if x.is_nan() {
        f64::NAN
    } else if x < 0.0 {
        f64::INFINITY
    } else if x == 0.0 {
        a
    } else {
        x * (x / a).ln() - x + a
    }
}

/// Upper bound on the probability that the thinned/augmented sandwich fails:
/// `e^{-n(1+h) H(1/(1+h))} + e^{-n(1-h) H(1/(1-h))}` with `h = eps / a_n`.
pub fn sandwich_failure_bound(n: f64, a_n: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) || !(eps < a_n) {
        return Err(LabError::Domain(format!(
            "need 0 < eps < a_n, got eps = {eps}, a_n = {a_n}"
        )));
    }
    let h = eps / a_n;
    let up = n * (1.0 + h) * entropy_h(1.0 / (1.0 + h))?;
    let down = n * (1.0 - h) * entropy_h(1.0 / (1.0 - h))?;
    Ok((-up).exp() + (-down).exp())
}

/// Exact mean of the low-degree count at threshold `r_n(s0)`:
/// `n P(Poisson(a_n + s0) <= k - 1)`.
pub fn expected_low_degree_count(n: f64, a_n: f64, k: usize, s0: f64) -> Result<f64> {
    intensity_tail(n, a_n, k, s0, 1.0)
}

/// Exact mean `E L(B x (u, inf)) = n Leb(B) P(Poisson(a_n + u) <= k - 1)`.
pub fn intensity_tail(n: f64, a_n: f64, k: usize, u: f64, leb_b: f64) -> Result<f64> {
    let lam = a_n + u;
    if !(lam >= 0.0) {
        return Err(LabError::Domain(format!("a_n + u must be non-negative, got {lam}")));
    }
    if !(0.0..=1.0).contains(&leb_b) {
        return Err(LabError::Domain(format!("Leb(B) must lie in [0, 1], got {leb_b}")));
    }
    if k == 0 {
        return Ok(0.0);
    }
    Ok(n * leb_b * poisson_cdf(k as u64 - 1, lam))
}

/// Exact Poisson counterpart of the rate curve: with `T ~ Poisson(b alpha_k)`,
/// `-(1/b) log P(T >= x b)` for `x >= alpha_k` and `-(1/b) log P(T <= x b)`
/// below. Tends to `I_k(x)` as `b -> inf`.
pub fn poisson_tail_rate(b: f64, x: f64, k: usize, s0: f64) -> Result<f64> {
    if !(b > 0.0) || !(x >= 0.0) {
        return Err(LabError::Domain(format!("need b > 0 and x >= 0, got b = {b}, x = {x}")));
    }
    let a = alpha_k(k, s0);
    let lam = b * a;
    let log_p = if x >= a {
        poisson_log_sf((x * b).ceil() as u64, lam)
    } else {
        poisson_log_cdf((x * b).floor() as u64, lam)
    };
    Ok(-log_p / b)
}

/// Piecewise-constant density of a measure `rho` on `[0,1]^d x [s0, u_max]`
/// relative to `Leb ⊗ tau_k`. Beyond `u_max` the density is taken to be 1.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    k: usize,
    s0: f64,
    u_edges: Vec<f64>,
    /// `(Leb ⊗ tau_k)` mass of each cell, x-major.
    weights: Vec<f64>,
    density: Vec<f64>,
    x_cells: usize,
}

impl DensityGrid {
    /// Density `h(x, u)` evaluated at cell midpoints of a grid with
    /// `x_per_axis^d` spatial cells and `u_panels` mark panels over
    /// `[s0, s0 + U_SPAN]`.
    pub fn from_fn(
        k: usize,
        s0: f64,
        d: Dimension,
        x_per_axis: usize,
        u_panels: usize,
        h: impl Fn(&[f64], f64) -> f64,
    ) -> Result<Self> {
        let u_panels = u_panels.max(1);
        let x_per_axis = x_per_axis.max(1);
        let u_edges: Vec<f64> = (0..=u_panels)
            .map(|j| s0 + U_SPAN * j as f64 / u_panels as f64)
            .collect();
        let dd = d.get();
        let x_cells = x_per_axis.pow(dd as u32);
        let cell_leb = 1.0 / x_cells as f64;
        let mut weights = Vec::with_capacity(x_cells * u_panels);
        let mut density = Vec::with_capacity(x_cells * u_panels);
        let mut mid = vec![0.0; dd];
        for c in 0..x_cells {
            let mut rest = c;
            for m in mid.iter_mut() {
                *m = ((rest % x_per_axis) as f64 + 0.5) / x_per_axis as f64;
                rest /= x_per_axis;
            }
            for j in 0..u_panels {
                let (u0, u1) = (u_edges[j], u_edges[j + 1]);
                let v = h(&mid, 0.5 * (u0 + u1));
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(LabError::Domain(format!("density must be finite and >= 0, got {v}")));
                }
                weights.push(cell_leb * tau_k_mass(u0, u1, k, s0));
                density.push(v);
            }
        }
        Ok(DensityGrid {
            k,
            s0,
            u_edges,
            weights,
            density,
            x_cells,
        })
    }

    /// Constant density `c` with the default resolution.
    pub fn constant(c: f64, k: usize, s0: f64, d: Dimension) -> Result<Self> {
        Self::from_fn(k, s0, d, 1, MIN_U_PANELS, |_, _| c)
    }

    pub fn u_max(&self) -> f64 {
        *self.u_edges.last().expect("non-empty edges")
    }

    pub fn x_cells(&self) -> usize {
        self.x_cells
    }

    fn tail_mass(&self) -> f64 {
        tau_k_mass(self.u_max(), f64::INFINITY, self.k, self.s0)
    }

    /// Total mass `rho(E_0)`.
    pub fn mass(&self) -> f64 {
        let inside: f64 = self.weights.iter().zip(&self.density).map(|(w, h)| w * h).sum();
        inside + self.tail_mass()
    }
}

/// Relative entropy `H_k(rho | Leb ⊗ tau_k) = ∫ (h log h - h + 1) d(Leb ⊗ tau_k)`
/// for a density grid; `h log h` is taken as 0 at `h = 0`.
pub fn relative_entropy(rho: &DensityGrid) -> f64 {
    rho.weights
        .iter()
        .zip(&rho.density)
        .map(|(&w, &h)| w * entropy_h(h).expect("densities are validated non-negative"))
        .sum()
}

/// Minimizes the relative entropy over the exponential tilts
/// `h_beta(u) = (x / alpha_k) (1 - beta) e^{beta (u - s0)}`, all of which
/// have total mass `x`. Returns `(min H_k, argmin beta)`. The minimum sits at
/// `beta = 0` and equals `I_k(x)`.
pub fn contraction_minimum(x: f64, k: usize, s0: f64, d: Dimension) -> Result<(f64, f64)> {
    if !(x > 0.0) {
        return Err(LabError::Domain(format!("mass must be positive, got {x}")));
    }
    let c = x / alpha_k(k, s0);
    let objective = |beta: f64| -> Result<f64> {
        let g = DensityGrid::from_fn(k, s0, d, 1, 4 * MIN_U_PANELS, |_, u| {
            c * (1.0 - beta) * (beta * (u - s0)).exp()
        })?;
        // mass beyond u_max is not carried by the grid
        Ok(relative_entropy(&g))
    };
    let (mut lo, mut hi) = (-0.8f64, 0.4f64);
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let mut fa = objective(a)?;
    let mut fb = objective(b)?;
    while hi - lo > 1e-7 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = objective(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = objective(b)?;
        }
    }
    let beta = 0.5 * (lo + hi);
    Ok((objective(beta)?, beta))
}

/// Which asymptotic regime a centering schedule is in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Diagnostic drifts to `-inf`: many large balls, large deviation regime.
    Ldp,
    /// Diagnostic stays bounded: Poisson convergence boundary.
    Boundary,
    /// Diagnostic drifts to `+inf`: large balls are rare events.
    M0,
}

/// Diagnostic `a_n - log n - (k-1) log log n` along a ladder.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RegimeReport {
    pub n: Vec<f64>,
    pub a_n: Vec<f64>,
    pub diagnostic: Vec<f64>,
    /// Change of the diagnostic per decade of `n` over the last ladder step.
    pub slope_per_decade: f64,
    pub regime: Regime,
}

/// Trend band inside which the diagnostic counts as bounded.
pub const BOUNDARY_SLOPE: f64 = 0.01;

pub fn regime_diagnostic(n_ladder: &[f64], a_values: &[f64], k: usize) -> Result<RegimeReport> {
    if n_ladder.len() != a_values.len() {
        return Err(LabError::Config("ladder and schedule lengths differ".into()));
    }
    if n_ladder.len() < 2 {
        return Err(LabError::Config("regime classification needs at least two ladder points".into()));
    }
    if n_ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::Config("ladder must be strictly increasing".into()));
    }
    if let Some(&bad) = n_ladder.iter().find(|&&n| !(n >= 3.0)) {
        return Err(LabError::Domain(format!("log log n needs n >= 3, got {bad}")));
    }
    let diagnostic: Vec<f64> = n_ladder
        .iter()
        .zip(a_values)
        .map(|(&n, &a)| a - n.ln() - (k as f64 - 1.0) * n.ln().ln())
        .collect();
    let m = n_ladder.len();
    let slope = (diagnostic[m - 1] - diagnostic[m - 2])
        / (n_ladder[m - 1].log10() - n_ladder[m - 2].log10());
    let regime = if slope.abs() <= BOUNDARY_SLOPE {
        Regime::Boundary
    } else if slope < 0.0 {
        Regime::Ldp
    } else {
        Regime::M0
    };
    Ok(RegimeReport {
        n: n_ladder.to_vec(),
        a_n: a_values.to_vec(),
        diagnostic,
        slope_per_decade: slope,
        regime,
    })
}

/// A non-negative test function `U(x, u)` on `[0,1]^d x R` with compact
/// support inside a box.
pub trait MarkFunction {
    fn value(&self, x: &[f64], u: f64) -> f64;
    /// Spatial box `(lo, hi)` and mark interval containing the support.
    fn support(&self) -> (Vec<f64>, Vec<f64>, f64, f64);
    fn sup(&self) -> f64;
}

/// `height` on `[x_lo, x_hi] x [u_lo, u_hi]`, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Plateau {
    pub height: f64,
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    pub u_lo: f64,
    pub u_hi: f64,
}

impl Plateau {
    /// Plateau over the whole cube.
    pub fn full(height: f64, d: Dimension, u_lo: f64, u_hi: f64) -> Self {
        Plateau {
            height,
            x_lo: vec![0.0; d.get()],
            x_hi: vec![1.0; d.get()],
            u_lo,
            u_hi,
        }
    }

    pub fn zero(d: Dimension) -> Self {
        Self::full(0.0, d, 0.0, 0.0)
    }
}

impl MarkFunction for Plateau {
    fn value(&self, x: &[f64], u: f64) -> f64 {
        let inside = u >= self.u_lo
            && u <= self.u_hi
            && x.iter()
                .zip(self.x_lo.iter().zip(&self.x_hi))
                .all(|(&c, (&lo, &hi))| c >= lo && c <= hi);
        if inside {
            self.height
        } else {
            0.0
        }
    }

    fn support(&self) -> (Vec<f64>, Vec<f64>, f64, f64) {
        (self.x_lo.clone(), self.x_hi.clone(), self.u_lo, self.u_hi)
    }

    fn sup(&self) -> f64 {
        self.height
    }
}

/// `F(eta) = prod_l (1 - exp(-(eta(U_l) - eps_l)_+))` given `eta(U_l)`.
pub fn m0_test_value(integrals: [f64; 2], eps: [f64; 2]) -> f64 {
    integrals
        .iter()
        .zip(eps)
        .map(|(&v, e)| 1.0 - (-(v - e).max(0.0)).exp())
        .product()
}

/// Limit functional `xi_k(F) = (1/(k-1)!) ∫ F(delta_{(x,u)}) e^{-u} dx du`
/// for `F` built from two test functions, by a midpoint product rule whose
/// panels align with the support boundaries and whose mark weights integrate
/// `e^{-u}` exactly.
pub fn m0_limit_functional<U1: MarkFunction, U2: MarkFunction>(
    u1: &U1,
    u2: &U2,
    eps: [f64; 2],
    k: usize,
    d: Dimension,
) -> f64 {
    let dd = d.get();
    let (xl1, xh1, ul1, uh1) = u1.support();
    let (xl2, xh2, ul2, uh2) = u2.support();
    let (u_lo, u_hi) = (ul1.max(ul2), uh1.min(uh2));
    if u_hi <= u_lo {
        return 0.0;
    }
    // both factors vanish outside the intersection of the supports
    let mut x_breaks: Vec<Vec<f64>> = Vec::with_capacity(dd);
    for a in 0..dd {
        let lo = xl1[a].max(xl2[a]).max(0.0);
        let hi = xh1[a].min(xh2[a]).min(1.0);
        if hi <= lo {
            return 0.0;
        }
        let mut b = vec![lo, hi];
        for t in [xl1[a], xh1[a], xl2[a], xh2[a]] {
            if t > lo && t < hi {
                b.push(t);
            }
        }
        b.sort_by(f64::total_cmp);
        b.dedup();
        x_breaks.push(refine(&b, if dd == 1 { 64 } else if dd == 2 { 16 } else { 6 }));
    }
    let mut u_breaks = vec![u_lo, u_hi];
    for t in [ul1, uh1, ul2, uh2] {
        if t > u_lo && t < u_hi {
            u_breaks.push(t);
        }
    }
    u_breaks.sort_by(f64::total_cmp);
    u_breaks.dedup();
    let u_nodes = refine(&u_breaks, MIN_U_PANELS);
    let norm = (-ln_factorial(k.saturating_sub(1))).exp();

    let sizes: Vec<usize> = x_breaks.iter().map(|b| b.len() - 1).collect();
    let total: usize = sizes.iter().product();
    let mut mid = vec![0.0; dd];
    let mut acc = 0.0;
    for c in 0..total {
        let mut rest = c;
        let mut vol = 1.0;
        for a in 0..dd {
            let j = rest % sizes[a];
            rest /= sizes[a];
            let (x0, x1) = (x_breaks[a][j], x_breaks[a][j + 1]);
            mid[a] = 0.5 * (x0 + x1);
            vol *= x1 - x0;
        }
        for w in u_nodes.windows(2) {
            let um = 0.5 * (w[0] + w[1]);
            let f = m0_test_value([u1.value(&mid, um), u2.value(&mid, um)], eps);
            if f != 0.0 {
                acc += vol * f * ((-w[0]).exp() - (-w[1]).exp());
            }
        }
    }
    norm * acc
}

/// Splits every interval of `breaks` into equal panels so that the total is
/// at least `min_panels`.
fn refine(breaks: &[f64], min_panels: usize) -> Vec<f64> {
    let span = breaks[breaks.len() - 1] - breaks[0];
    let mut out = vec![breaks[0]];
    for w in breaks.windows(2) {
        let parts = ((min_panels as f64 * (w[1] - w[0]) / span).ceil() as usize).max(1);
        for j in 1..=parts {
            out.push(if j == parts {
                w[1]
            } else {
                w[0] + (w[1] - w[0]) * j as f64 / parts as f64
            });
        }
    }
    out
}
