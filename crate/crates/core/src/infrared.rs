//! The lattice Green function `G(x,y) = ∫ e^{ik·(x−y)} / (1 − Ĵ(k)) dk/(2π)³`
//! over `[−π,π]³`, with `Ĵ(k) = (cos k₁ + cos k₂ + cos k₃)/3`, and the
//! harness comparing box averages of the two-point function with
//! `(1/2β)·avg G`.
//!
//! Two unrelated quadratures are always run side by side:
//!
//! * midpoint on an odd periodic grid after subtracting the radial singular
//!   part `6χ(|k|)cos(k·r)/|k|²`, whose integral reduces to one dimension;
//!   the cell around `k = 0` is refined in `3×3×3` steps;
//! * composite Gauss–Legendre on `[0,π]³` after splitting into three
//!   pyramids and blowing up the corner (`k = πt(1, u, v)` and
//!   permutations), which turns the integrand into a bounded analytic
//!   function.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::mcmc::Estimate;

pub const MIN_GRID: usize = 32;
/// Largest tolerated difference between the two schemes.
pub const SCHEME_TOLERANCE: f64 = 1e-4;
/// Batches required of a Monte Carlo estimate fed to [`bound_report`].
pub const MIN_BATCHES: usize = 100;

const PANEL_ORDER: usize = 16;
const CUTOFF_INNER: f64 = 1.0;
const CUTOFF_OUTER: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scheme {
    Midpoint,
    Nested,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GreenSpec {
    /// Points per axis: midpoint cells (rounded up to odd) and Gauss nodes.
    pub grid: usize,
    /// `3×3×3` refinements of the cell containing `k = 0`.
    pub levels: u32,
}

impl GreenSpec {
    pub fn new(grid: usize, levels: u32) -> Result<Self> {
        if grid < MIN_GRID {
            return Err(Error::InvalidParameter(format!("grid {grid} is below {MIN_GRID}")));
        }
        Ok(GreenSpec { grid, levels })
    }
}

impl Default for GreenSpec {
    fn default() -> Self {
        GreenSpec { grid: 64, levels: 6 }
    }
}

pub fn j_hat(k: [f64; 3]) -> f64 {
    (k[0].cos() + k[1].cos() + k[2].cos()) / 3.0
}

fn cos_dot(k: [f64; 3], r: [i32; 3]) -> f64 {
    (k[0] * r[0] as f64 + k[1] * r[1] as f64 + k[2] * r[2] as f64).cos()
}

/// Smooth step: 1 below the inner radius, 0 beyond the outer one.
fn cutoff(rho: f64) -> f64 {
    let psi = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let s = (CUTOFF_OUTER - rho) / (CUTOFF_OUTER - CUTOFF_INNER);
    psi(s) / (psi(s) + psi(1.0 - s))
}

fn remainder(k: [f64; 3], r: [i32; 3]) -> f64 {
    let rho2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    let c = cos_dot(k, r);
    c / (1.0 - j_hat(k)) - 6.0 * cutoff(rho2.sqrt()) * c / rho2
}

/// `∫ 6χ(|k|)cos(k·r)/|k|² dk / (2π)³ = (3/π²) ∫ χ(ρ) sinc(ρ|r|) dρ`.
fn singular_part(r: [i32; 3]) -> f64 {
    let len = ((r[0] * r[0] + r[1] * r[1] + r[2] * r[2]) as f64).sqrt();
    let rule = GaussLegendre::new(NonZeroUsize::new(64).unwrap());
    let panels = 16;
    let w = CUTOFF_OUTER / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        sum += rule.integrate(p as f64 * w, (p + 1) as f64 * w, |rho| {
            let x = rho * len;
            let sinc = if x.abs() < 1e-12 { 1.0 } else { x.sin() / x };
            cutoff(rho) * sinc
        });
    }
    3.0 / (PI * PI) * sum
}

fn midpoint(spec: &GreenSpec, r: [i32; 3]) -> f64 {
    let n = spec.grid | 1;
    let h = 2.0 * PI / n as f64;
    let centre = (n - 1) / 2;
    let at = |i: usize| -PI + (i as f64 + 0.5) * h;
    let slabs: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in 0..n {
                for l in 0..n {
                    if i == centre && j == centre && l == centre {
                        continue;
                    }
                    s += remainder([at(i), at(j), at(l)], r);
                }
            }
            s
        })
        .collect();
    let mut total: f64 = slabs.iter().sum::<f64>() * h * h * h;
    let mut width = h;
    for _ in 0..spec.levels {
        let sub = width / 3.0;
        for a in -1i32..=1 {
            for b in -1i32..=1 {
                for c in -1i32..=1 {
                    if a == 0 && b == 0 && c == 0 {
                        continue;
                    }
                    total += remainder([a as f64 * sub, b as f64 * sub, c as f64 * sub], r) * sub * sub * sub;
                }
            }
        }
        width = sub;
    }
    total / (8.0 * PI * PI * PI) + singular_part(r)
}

fn nested(spec: &GreenSpec, r: [i32; 3]) -> f64 {
    let panels = spec.grid.div_ceil(PANEL_ORDER).max(1);
    let rule = GaussLegendre::new(NonZeroUsize::new(PANEL_ORDER).unwrap());
    let mut nodes = Vec::with_capacity(panels * PANEL_ORDER);
    for p in 0..panels {
        let (a, b) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
        for &(x, w) in rule.as_node_weight_pairs() {
            nodes.push((0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w));
        }
    }
    let parts: Vec<f64> = nodes
        .par_iter()
        .map(|&(t, wt)| {
            let mut s = 0.0;
            for &(u, wu) in &nodes {
                for &(v, wv) in &nodes {
                    let (a, b, c) = (PI * t, PI * t * u, PI * t * v);
                    // (1 − Ĵ)/t², analytic in t
                    let gap = (3.0 - a.cos() - b.cos() - c.cos()) / (3.0 * t * t);
                    let mut f = 0.0;
                    for k in [[a, b, c], [b, a, c], [b, c, a]] {
                        f += (k[0] * r[0] as f64).cos() * (k[1] * r[1] as f64).cos() * (k[2] * r[2] as f64).cos();
                    }
                    s += wu * wv * f / gap;
                }
            }
            wt * s
        })
        .collect();
    parts.iter().sum()
}

/// `G` at displacement `r` by one scheme.
pub fn green_scheme(spec: &GreenSpec, scheme: Scheme, r: [i32; 3]) -> f64 {
    match scheme {
        Scheme::Midpoint => midpoint(spec, r),
        Scheme::Nested => nested(spec, r),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenValue {
    pub r: [i32; 3],
    pub midpoint: f64,
    pub nested: f64,
    pub delta: f64,
}

impl GreenValue {
    pub fn value(&self) -> f64 {
        self.nested
    }
}

/// Both schemes at `r`; fails when they disagree beyond [`SCHEME_TOLERANCE`].
pub fn green_value(spec: &GreenSpec, r: [i32; 3]) -> Result<GreenValue> {
    let r = canonical(r);
    let m = midpoint(spec, r);
    let n = nested(spec, r);
    let delta = (m - n).abs();
    if delta.is_nan() || delta > SCHEME_TOLERANCE {
        return Err(Error::SchemeDisagreement { delta, tolerance: SCHEME_TOLERANCE });
    }
    Ok(GreenValue { r, midpoint: m, nested: n, delta })
}

pub fn green(spec: &GreenSpec, x: Site, y: Site) -> Result<f64> {
    let (Some(a), Some(b)) = (x.coords(), y.coords()) else {
        return Err(Error::InvalidParameter("the Green function is defined on lattice points only".into()));
    };
    Ok(green_value(spec, [a[0] - b[0], a[1] - b[1], a[2] - b[2]])?.value())
}

/// Sorted absolute coordinates: `G` is invariant under sign flips and
/// permutations of the displacement.
pub fn canonical(r: [i32; 3]) -> [i32; 3] {
    let mut c = r.map(i32::abs);
    c.sort();
    c
}

/// `G(0, r·e₁)` for `r = 0..=max`.
pub fn green_table(spec: &GreenSpec, max: i32) -> Result<Vec<GreenValue>> {
    (0..=max).map(|r| green_value(spec, [r, 0, 0])).collect()
}

/// Smallest `1 − Ĵ` over the midpoint grid away from `k = 0`.
pub fn min_gap(spec: &GreenSpec) -> f64 {
    let n = spec.grid | 1;
    let centre = (n - 1) / 2;
    let h = 2.0 * PI / n as f64;
    let at = |i: usize| -PI + (i as f64 + 0.5) * h;
    let mut m = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                if (i, j, l) != (centre, centre, centre) {
                    m = m.min(1.0 - j_hat([at(i), at(j), at(l)]));
                }
            }
        }
    }
    m
}

/// `avg_{x,y ∈ B_n} G(x − y)` with `B_n = {|z|_∞ ≤ n}`.
pub fn average_green(spec: &GreenSpec, n: i32) -> Result<f64> {
    if n < 0 {
        return Err(Error::InvalidParameter("box radius must be nonnegative".into()));
    }
    let side = 2 * n + 1;
    let mut weight: BTreeMap<[i32; 3], f64> = BTreeMap::new();
    for a in -2 * n..=2 * n {
        for b in -2 * n..=2 * n {
            for c in -2 * n..=2 * n {
                let m = [a, b, c].iter().map(|d| (side - d.abs()) as f64).product::<f64>();
                *weight.entry(canonical([a, b, c])).or_default() += m;
            }
        }
    }
    let mut sum = 0.0;
    for (r, m) in weight {
        sum += m * green_value(spec, r)?.value();
    }
    Ok(sum / (side as f64).powi(6))
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub beta: f64,
    pub n: i32,
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub margin: f64,
    pub passed: bool,
}

/// Compares a Monte Carlo estimate of `avg_{x,y ∈ B_n} ⟨S_x·S_y⟩` with
/// `(1/2β)·avg G`; passes when the estimate is at most the bound plus three
/// standard errors.
pub fn bound_report(spec: &GreenSpec, beta: f64, n: i32, lhs: &Estimate) -> Result<BoundReport> {
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::InvalidParameter("the bound needs β > 0".into()));
    }
    if lhs.batches < MIN_BATCHES {
        return Err(Error::InsufficientSamples(format!("{} batches, need {MIN_BATCHES}", lhs.batches)));
    }
    let rhs = average_green(spec, n)? / (2.0 * beta);
    Ok(BoundReport {
        beta,
        n,
        lhs: lhs.mean,
        lhs_stderr: lhs.stderr,
        rhs,
        margin: rhs - lhs.mean,
        passed: lhs.mean <= rhs + 3.0 * lhs.stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_is_a_partition() {
        assert_eq!(cutoff(0.5), 1.0);
        assert_eq!(cutoff(3.5), 0.0);
        assert!(cutoff(2.0) > 0.0 && cutoff(2.0) < 1.0);
    }

    #[test]
    fn canonical_sorts_magnitudes() {
        assert_eq!(canonical([-2, 0, 1]), [0, 1, 2]);
    }
}
