//! Ground-truth evaluators for tiny systems: trapezoid quadrature over the
//! spin angles and resummed per-bond Bessel series.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Site};
use crate::rational::to_f64;

/// Largest number of angles the quadrature will integrate.
pub const MAX_QUADRATURE_ANGLES: usize = 8;
/// Largest number of grid evaluations the quadrature will perform.
pub const MAX_QUADRATURE_EVALUATIONS: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureSpec {
    pub points_per_angle: usize,
    pub beta: f64,
}

impl QuadratureSpec {
    pub fn new(points_per_angle: usize, beta: f64) -> Result<Self> {
        let spec = QuadratureSpec { points_per_angle, beta };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.points_per_angle < 8 {
            return Err(Error::InvalidParameter(format!(
                "points_per_angle must be at least 8, got {}",
                self.points_per_angle
            )));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be finite and nonnegative, got {}", self.beta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    #[serde(rename = "Z")]
    pub z: f64,
    pub two_point: Vec<TwoPoint>,
    pub magnetization: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoPoint {
    pub x: Site,
    pub y: Site,
    pub value: f64,
}

/// Grid integrator with the first site's angle pinned to zero. The integrand
/// depends only on angle differences, so pinning is exact on a uniform grid.
struct Grid<'a> {
    lat: &'a Lattice,
    p: usize,
    /// `exp(2βJ_b cos(2πd/p))` per bond and grid offset `d`.
    tables: Vec<Vec<f64>>,
    /// For each site rank, bonds to earlier ranks as `(bond, earlier rank)`.
    back: Vec<Vec<(usize, usize)>>,
    cos: Vec<f64>,
}

impl<'a> Grid<'a> {
    fn new(lat: &'a Lattice, spec: &QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        let n = lat.num_sites();
        if n > MAX_QUADRATURE_ANGLES {
            return Err(Error::CostGuard {
                guard: "quadrature_angles",
                detail: format!("{n} angles exceeds the limit of {MAX_QUADRATURE_ANGLES}"),
            });
        }
        let p = spec.points_per_angle;
        let evals = (p as u64).checked_pow(n.saturating_sub(1) as u32);
        if evals.is_none_or(|e| e > MAX_QUADRATURE_EVALUATIONS) {
            return Err(Error::CostGuard {
                guard: "quadrature_evaluations",
                detail: format!("{p}^{} grid points exceeds the limit", n - 1),
            });
        }
        let cos: Vec<f64> = (0..p).map(|d| (std::f64::consts::TAU * d as f64 / p as f64).cos()).collect();
        let tables = lat
            .bonds()
            .iter()
            .map(|b| {
                let k = 2.0 * spec.beta * to_f64(&b.coupling);
                cos.iter().map(|c| (k * c).exp()).collect()
            })
            .collect();
        let mut back = vec![Vec::new(); n];
        for (id, b) in lat.bonds().iter().enumerate() {
            back[b.b].push((id, b.a));
        }
        Ok(Grid { lat, p, tables, back, cos })
    }

    /// Returns `(Σ w, Σ w·cos(θ_x − θ_y) for each pair)` over the grid.
    fn integrate(&self, pairs: &[(usize, usize)]) -> (f64, Vec<f64>) {
        let n = self.lat.num_sites();
        let p = self.p;
        let run = |first: Option<usize>| -> (f64, Vec<f64>) {
            let mut angles = vec![0usize; n];
            let mut acc = (0.0, vec![0.0; pairs.len()]);
            if let Some(a) = first {
                angles[1] = a;
                let w = self.site_factor(1, &angles);
                self.descend(2, w, &mut angles, pairs, &mut acc);
            } else {
                self.descend(1, 1.0, &mut angles, pairs, &mut acc);
            }
            acc
        };
        let (z, obs) = if n >= 2 {
            let parts: Vec<(f64, Vec<f64>)> = (0..p).into_par_iter().map(|a| run(Some(a))).collect();
            // fixed-order reduction keeps results independent of scheduling
            parts.into_iter().fold((0.0, vec![0.0; pairs.len()]), |mut acc, (z, o)| {
                acc.0 += z;
                for (t, v) in acc.1.iter_mut().zip(o) {
                    *t += v;
                }
                acc
            })
        } else {
            run(None)
        };
        let norm = (p as f64).powi(n as i32 - 1);
        (z / norm, obs.into_iter().map(|o| o / norm).collect())
    }

    fn site_factor(&self, rank: usize, angles: &[usize]) -> f64 {
        let p = self.p;
        self.back[rank]
            .iter()
            .map(|&(b, other)| self.tables[b][(angles[rank] + p - angles[other]) % p])
            .product()
    }

    fn descend(&self, rank: usize, w: f64, angles: &mut [usize], pairs: &[(usize, usize)], acc: &mut (f64, Vec<f64>)) {
        if rank == angles.len() {
            acc.0 += w;
            for (k, &(x, y)) in pairs.iter().enumerate() {
                acc.1[k] += w * self.cos[(angles[x] + self.p - angles[y]) % self.p];
            }
            return;
        }
        for a in 0..self.p {
            angles[rank] = a;
            let f = self.site_factor(rank, angles);
            self.descend(rank + 1, w * f, angles, pairs, acc);
        }
    }
}

/// Normalised partition function `∫ Π dθ/2π exp(-βH)`; the ghost angle, when
/// present, is integrated like any other.
pub fn quadrature_z(lat: &Lattice, spec: &QuadratureSpec) -> Result<f64> {
    Ok(Grid::new(lat, spec)?.integrate(&[]).0)
}

/// `⟨S_x·S_y⟩` by quadrature.
pub fn quadrature_two_point(lat: &Lattice, spec: &QuadratureSpec, x: Site, y: Site) -> Result<f64> {
    let (rx, ry) = (lat.rank(x)?, lat.rank(y)?);
    if rx == ry {
        Grid::new(lat, spec)?;
        return Ok(1.0);
    }
    let (z, obs) = Grid::new(lat, spec)?.integrate(&[(rx, ry)]);
    Ok(obs[0] / z)
}

/// Partition function, the requested two-point functions and, with a ghost
/// site, the magnetisation `⟨S_m·S_ghost⟩` at `magnet_site`, all from one
/// grid pass.
pub fn oracle(
    lat: &Lattice,
    spec: &QuadratureSpec,
    pairs: &[(Site, Site)],
    magnet_site: Option<Site>,
) -> Result<OracleResult> {
    let grid = Grid::new(lat, spec)?;
    let mut ranked = Vec::new();
    for &(x, y) in pairs {
        ranked.push((lat.rank(x)?, lat.rank(y)?));
    }
    let mag_pair = match (magnet_site, lat.ghost()) {
        (Some(m), Some(g)) => Some((lat.rank(m)?, g)),
        (Some(_), None) => {
            return Err(Error::InvalidParameter("magnetization requires the ghost site".into()));
        }
        _ => None,
    };
    let mut all: Vec<(usize, usize)> = ranked.iter().copied().filter(|(a, b)| a != b).collect();
    all.extend(mag_pair.filter(|(a, b)| a != b));
    let (z, obs) = grid.integrate(&all);
    let mut idx = 0;
    let mut two_point = Vec::new();
    for (&(x, y), &(rx, ry)) in pairs.iter().zip(&ranked) {
        let value = if rx == ry {
            1.0
        } else {
            idx += 1;
            obs[idx - 1] / z
        };
        two_point.push(TwoPoint { x, y, value });
    }
    let magnetization = mag_pair.map(|(a, b)| if a == b { 1.0 } else { obs[idx] / z });
    Ok(OracleResult { z, two_point, magnetization })
}

/// Partial sum of `Σ_{a−b=m, a+b ≤ cutoff} x^{a+b}/(a! b!)`, which converges
/// to `I_m(2x)`.
pub fn bessel_bond_sum(m: i64, x: f64, cutoff: u64) -> f64 {
    let m = m.unsigned_abs();
    if cutoff < m {
        return 0.0;
    }
    // k-th term: x^{2k+m} / (k! (k+m)!)
    let mut term: f64 = (1..=m).map(|i| x / i as f64).product();
    let mut sum = 0.0;
    let mut k = 0u64;
    while 2 * k + m <= cutoff {
        sum += term;
        k += 1;
        term *= x * x / (k as f64 * (k + m) as f64);
        if term == 0.0 {
            break;
        }
    }
    sum
}

/// `I_m(z)` from the converged bond series.
pub fn bessel_i(m: i64, z: f64) -> f64 {
    bessel_bond_sum(m, z / 2.0, m.unsigned_abs() + 400)
}

/// Largest winding number kept around a cycle in [`bessel_z`].
pub const WINDING_CUTOFF: i64 = 20;

/// `Z` as a sum over integer net fluxes. Each connected component must be a
/// tree (every bond carries zero net flux) or contain exactly one cycle (one
/// shared winding number on the cycle bonds).
pub fn bessel_z(lat: &Lattice, beta: f64) -> Result<f64> {
    let n = lat.num_sites();
    let mut comp = vec![usize::MAX; n];
    let mut z = 1.0;
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = start;
        let mut verts = Vec::new();
        let mut bonds = std::collections::BTreeSet::new();
        while let Some(v) = stack.pop() {
            verts.push(v);
            for &(b, w) in lat.incident(v) {
                bonds.insert(b);
                if comp[w] == usize::MAX {
                    comp[w] = start;
                    stack.push(w);
                }
            }
        }
        let cyclomatic = bonds.len() + 1 - verts.len();
        if cyclomatic > 1 {
            return Err(Error::UnsupportedTopology(format!(
                "component with cyclomatic number {cyclomatic}; only trees and unicyclic graphs are supported"
            )));
        }
        let arg = |b: usize| 2.0 * beta * to_f64(&lat.bonds()[b].coupling);
        let cycle = if cyclomatic == 1 { cycle_bonds(lat, &verts, &bonds) } else { Vec::new() };
        let tree: f64 = bonds.iter().filter(|b| !cycle.contains(b)).map(|&b| bessel_i(0, arg(b))).product();
        let loop_sum = if cycle.is_empty() {
            1.0
        } else {
            (-WINDING_CUTOFF..=WINDING_CUTOFF)
                .map(|m| cycle.iter().map(|&b| bessel_i(m, arg(b))).product::<f64>())
                .sum()
        };
        z *= tree * loop_sum;
    }
    Ok(z)
}

/// Bonds of the unique cycle: repeatedly strip degree-one vertices.
fn cycle_bonds(lat: &Lattice, verts: &[usize], bonds: &std::collections::BTreeSet<usize>) -> Vec<usize> {
    let mut degree: BTreeMap<usize, usize> = verts.iter().map(|&v| (v, lat.incident(v).len())).collect();
    let mut alive: std::collections::BTreeSet<usize> = bonds.clone();
    loop {
        let leaf = degree.iter().find(|(_, &d)| d == 1).map(|(&v, _)| v);
        let Some(v) = leaf else { break };
        degree.remove(&v);
        for &(b, w) in lat.incident(v) {
            if alive.remove(&b) {
                if let Some(d) = degree.get_mut(&w) {
                    *d -= 1;
                }
            }
        }
    }
    alive.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::topology;
    use crate::rational::{int, ratio};

    fn spec(beta: f64) -> QuadratureSpec {
        QuadratureSpec::new(32, beta).unwrap()
    }

    #[test]
    fn beta_zero_is_normalised() {
        let lat = topology::square_with_ghost(int(1), int(1));
        assert!((quadrature_z(&lat, &spec(0.0)).unwrap() - 1.0).abs() < 1e-14);
        let two = quadrature_two_point(&lat, &spec(0.0), Site::at(0, 0, 0), Site::at(1, 1, 0)).unwrap();
        assert!(two.abs() < 1e-14);
        assert!((bessel_z(&topology::cycle(4, int(1)), 0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coincident_points() {
        let lat = topology::dumbbell(int(1));
        assert_eq!(quadrature_two_point(&lat, &spec(0.7), Site::at(0, 0, 0), Site::at(0, 0, 0)).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(QuadratureSpec::new(4, 0.5).is_err());
        let big = crate::lattice::Lattice::cubic(2, crate::lattice::BoundaryCondition::Free).unwrap();
        assert!(matches!(quadrature_z(&big, &spec(0.1)), Err(Error::CostGuard { .. })));
    }

    #[test]
    fn bond_sum_basics() {
        assert_eq!(bessel_bond_sum(0, 0.0, 7), 1.0);
        assert_eq!(bessel_bond_sum(-2, 0.3, 30), bessel_bond_sum(2, 0.3, 30));
        let mut last = 0.0;
        for c in 1..12 {
            let s = bessel_bond_sum(1, 0.8, c);
            assert!(s >= last);
            last = s;
        }
    }

    #[test]
    fn grid_convergence() {
        let lat = topology::cycle(4, ratio(1, 1));
        let a = quadrature_z(&lat, &QuadratureSpec::new(32, 1.0).unwrap()).unwrap();
        let b = quadrature_z(&lat, &QuadratureSpec::new(64, 1.0).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn rejects_two_cycles() {
        let sq = topology::square_with_ghost(int(1), int(1));
        assert!(matches!(bessel_z(&sq, 0.3), Err(Error::UnsupportedTopology(_))));
    }

    #[test]
    fn oracle_bundle_matches_single_calls() {
        let lat = topology::square_with_ghost(ratio(1, 2), ratio(1, 3));
        let s = spec(0.4);
        let x = Site::at(0, 0, 0);
        let y = Site::at(1, 1, 0);
        let res = oracle(&lat, &s, &[(x, y), (x, x)], Some(x)).unwrap();
        let single = quadrature_two_point(&lat, &s, x, y).unwrap();
        assert!((res.two_point[0].value - single).abs() < 1e-14);
        assert_eq!(res.two_point[1].value, 1.0);
        let mag = quadrature_two_point(&lat, &s, x, Site::Ghost).unwrap();
        assert!((res.magnetization.unwrap() - mag).abs() < 1e-14);
    }
}
