//! Directed flux configurations: multiplicities `n_{a→b}` on ordered pairs
//! of coupled sites, the boundary operator, exact weights and exhaustive
//! enumeration of the truncated high-temperature series.

use std::collections::BTreeMap;
use std::fmt;

use num::bigint::BigInt;
use num::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Site};
use crate::rational::{multinomial, power_over_factorial, Rational};

/// Largest `max_edges` accepted by [`enumerate`].
pub const MAX_ENUMERATION_EDGES: u32 = 16;
/// Largest bond count accepted by [`enumerate`].
pub const MAX_ENUMERATION_BONDS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BoundarySpec {
    Empty,
    SourceSink(Site, Site),
}

impl BoundarySpec {
    pub fn source_sink(x: Site, y: Site) -> Result<Self> {
        if x == y {
            return Err(Error::InvalidParameter(format!("source and sink coincide at {x}")));
        }
        if x.is_ghost() || y.is_ghost() {
            return Err(Error::InvalidParameter("the ghost site cannot be a source or sink".into()));
        }
        Ok(BoundarySpec::SourceSink(x, y))
    }

    pub fn reversed(&self) -> Self {
        match *self {
            BoundarySpec::Empty => BoundarySpec::Empty,
            BoundarySpec::SourceSink(x, y) => BoundarySpec::SourceSink(y, x),
        }
    }

    /// Out-minus-in degree demanded at each site rank.
    fn targets(&self, lat: &Lattice) -> Result<Vec<i64>> {
        let mut t = vec![0; lat.num_sites()];
        if let BoundarySpec::SourceSink(x, y) = *self {
            t[lat.rank(x)?] += 1;
            t[lat.rank(y)?] -= 1;
        }
        Ok(t)
    }
}

/// Edge direction relative to a bond `(a, b)` with `a < b` in site order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Dir {
    Up,
    Down,
}

impl Dir {
    pub fn flip(self) -> Dir {
        match self {
            Dir::Up => Dir::Down,
            Dir::Down => Dir::Up,
        }
    }

    fn idx(self) -> usize {
        self as usize
    }
}

/// One directed edge type: a bond traversed in a direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Arc {
    pub bond: usize,
    pub dir: Dir,
}

impl Arc {
    pub fn new(bond: usize, dir: Dir) -> Self {
        Arc { bond, dir }
    }

    /// The arc `from → to`, if the two ranks share a bond.
    pub fn between(lat: &Lattice, from: usize, to: usize) -> Option<Arc> {
        let bond = lat.bond_between(from, to)?;
        let dir = if lat.bonds()[bond].a == from { Dir::Up } else { Dir::Down };
        Some(Arc { bond, dir })
    }

    pub fn tail(&self, lat: &Lattice) -> usize {
        let b = &lat.bonds()[self.bond];
        match self.dir {
            Dir::Up => b.a,
            Dir::Down => b.b,
        }
    }

    pub fn head(&self, lat: &Lattice) -> usize {
        let b = &lat.bonds()[self.bond];
        match self.dir {
            Dir::Up => b.b,
            Dir::Down => b.a,
        }
    }

    pub fn reversed(&self) -> Arc {
        Arc { bond: self.bond, dir: self.dir.flip() }
    }

    pub fn label(&self, lat: &Lattice) -> String {
        format!("{}->{}", lat.site(self.tail(lat)), lat.site(self.head(lat)))
    }
}

/// Multiplicities `[n_{a→b}, n_{b→a}]` per bond of a lattice.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FluxConfig {
    mult: Vec<[u32; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphWeight {
    #[serde(serialize_with = "crate::serde_rational")]
    pub value: Rational,
    #[serde(serialize_with = "crate::serde_rational")]
    pub beta: Rational,
}

impl FluxConfig {
    pub fn empty(lat: &Lattice) -> Self {
        FluxConfig { mult: vec![[0, 0]; lat.num_bonds()] }
    }

    pub fn zeros(bonds: usize) -> Self {
        FluxConfig { mult: vec![[0, 0]; bonds] }
    }

    /// Builds a config from `(from, to, multiplicity)` triples.
    pub fn from_edges(lat: &Lattice, edges: &[(Site, Site, u32)]) -> Result<Self> {
        let mut n = FluxConfig::empty(lat);
        for &(a, b, k) in edges {
            let arc = Arc::between(lat, lat.rank(a)?, lat.rank(b)?)
                .ok_or_else(|| Error::NotContained(format!("no bond between {a} and {b}")))?;
            n.add(arc, k);
        }
        Ok(n)
    }

    pub fn from_arcs(lat: &Lattice, arcs: impl IntoIterator<Item = Arc>) -> Self {
        let mut n = FluxConfig::empty(lat);
        for a in arcs {
            n.add(a, 1);
        }
        n
    }

    pub fn num_bonds(&self) -> usize {
        self.mult.len()
    }

    pub fn get(&self, arc: Arc) -> u32 {
        self.mult[arc.bond][arc.dir.idx()]
    }

    /// `n_{a→b}`; zero when the sites share no bond.
    pub fn get_sites(&self, lat: &Lattice, a: Site, b: Site) -> u32 {
        match (lat.rank(a), lat.rank(b)) {
            (Ok(ra), Ok(rb)) => Arc::between(lat, ra, rb).map(|arc| self.get(arc)).unwrap_or(0),
            _ => 0,
        }
    }

    pub fn bond(&self, bond: usize) -> [u32; 2] {
        self.mult[bond]
    }

    pub fn add(&mut self, arc: Arc, k: u32) {
        self.mult[arc.bond][arc.dir.idx()] += k;
    }

    /// Removes `k` copies of `arc`; fails without modifying when fewer exist.
    pub fn remove(&mut self, arc: Arc, k: u32) -> Result<()> {
        let slot = &mut self.mult[arc.bond][arc.dir.idx()];
        if *slot < k {
            return Err(Error::NotContained(format!("bond {} has only {} copies", arc.bond, slot)));
        }
        *slot -= k;
        Ok(())
    }

    pub fn total_edges(&self) -> u32 {
        self.mult.iter().map(|m| m[0] + m[1]).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_edges() == 0
    }

    /// Direction-insensitive multiplicity per bond.
    pub fn bond_totals(&self) -> Vec<u32> {
        self.mult.iter().map(|m| m[0] + m[1]).collect()
    }

    /// Arcs with positive multiplicity, in bond order.
    pub fn arcs(&self) -> impl Iterator<Item = (Arc, u32)> + '_ {
        self.mult.iter().enumerate().flat_map(|(b, m)| {
            [(Arc::new(b, Dir::Up), m[0]), (Arc::new(b, Dir::Down), m[1])]
                .into_iter()
                .filter(|&(_, k)| k > 0)
        })
    }

    /// Out-degree minus in-degree per site rank.
    pub fn boundary_ranks(&self, lat: &Lattice) -> Vec<i64> {
        let mut d = vec![0i64; lat.num_sites()];
        for (b, m) in lat.bonds().iter().zip(&self.mult) {
            let net = m[0] as i64 - m[1] as i64;
            d[b.a] += net;
            d[b.b] -= net;
        }
        d
    }

    /// Out-degree minus in-degree at every site.
    pub fn boundary(&self, lat: &Lattice) -> BTreeMap<Site, i64> {
        lat.sites().iter().copied().zip(self.boundary_ranks(lat)).collect()
    }

    pub fn out_degree(&self, lat: &Lattice, rank: usize) -> u32 {
        lat.incident(rank)
            .iter()
            .map(|&(b, _)| {
                let d = if lat.bonds()[b].a == rank { Dir::Up } else { Dir::Down };
                self.get(Arc::new(b, d))
            })
            .sum()
    }

    pub fn in_degree(&self, lat: &Lattice, rank: usize) -> u32 {
        lat.incident(rank)
            .iter()
            .map(|&(b, _)| {
                let d = if lat.bonds()[b].a == rank { Dir::Down } else { Dir::Up };
                self.get(Arc::new(b, d))
            })
            .sum()
    }

    pub fn satisfies(&self, lat: &Lattice, spec: &BoundarySpec) -> bool {
        match spec.targets(lat) {
            Ok(t) => self.boundary_ranks(lat) == t,
            Err(_) => false,
        }
    }

    /// `Π (βJ)^{n}/n!` over all arcs.
    pub fn weight(&self, lat: &Lattice, beta: &Rational) -> GraphWeight {
        let mut w = Rational::one();
        for (b, m) in lat.bonds().iter().zip(&self.mult) {
            let bj = beta * &b.coupling;
            for &k in m {
                if k > 0 {
                    w *= power_over_factorial(&bj, k);
                }
            }
        }
        GraphWeight { value: w, beta: beta.clone() }
    }

    pub fn reversed(&self) -> FluxConfig {
        FluxConfig { mult: self.mult.iter().map(|m| [m[1], m[0]]).collect() }
    }

    pub fn touches_ghost(&self, lat: &Lattice) -> bool {
        self.mult
            .iter()
            .enumerate()
            .any(|(b, m)| m[0] + m[1] > 0 && lat.bond_touches_ghost(b))
    }

    /// Directed sum of two configurations on the same lattice.
    pub fn merge(&self, other: &FluxConfig) -> Result<FluxConfig> {
        if self.mult.len() != other.mult.len() {
            return Err(Error::LatticeMismatch(format!(
                "{} bonds versus {} bonds",
                self.mult.len(),
                other.mult.len()
            )));
        }
        Ok(FluxConfig {
            mult: self
                .mult
                .iter()
                .zip(&other.mult)
                .map(|(a, b)| [a[0] + b[0], a[1] + b[1]])
                .collect(),
        })
    }

    pub fn display(&self, lat: &Lattice) -> String {
        let parts: Vec<String> = self
            .arcs()
            .map(|(a, k)| if k == 1 { a.label(lat) } else { format!("{}x{k}", a.label(lat)) })
            .collect();
        format!("{{{}}}", parts.join(", "))
    }
}

impl fmt::Display for FluxConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .mult
            .iter()
            .enumerate()
            .filter(|(_, m)| m[0] + m[1] > 0)
            .map(|(b, m)| format!("{b}:{}/{}", m[0], m[1]))
            .collect();
        write!(f, "[{}]", parts.join(" "))
    }
}

/// `Π_bonds (n_δ1+n_01+n_δ2+n_02)! / (n_δ1! n_01! n_δ2! n_02!)`: the number
/// of ways to distribute the merged edges between the two layers.
pub fn embedding_count(n_delta: &FluxConfig, n_zero: &FluxConfig) -> Result<BigInt> {
    if n_delta.mult.len() != n_zero.mult.len() {
        return Err(Error::LatticeMismatch("configurations on different lattices".into()));
    }
    Ok(n_delta
        .mult
        .iter()
        .zip(&n_zero.mult)
        .fold(BigInt::one(), |acc, (d, z)| acc * multinomial(&[d[0], z[0], d[1], z[1]])))
}

fn check_guard(lat: &Lattice, max_edges: u32) -> Result<()> {
    if max_edges > MAX_ENUMERATION_EDGES {
        return Err(Error::CostGuard {
            guard: "max_edges",
            detail: format!("{max_edges} exceeds {MAX_ENUMERATION_EDGES}"),
        });
    }
    if lat.num_bonds() > MAX_ENUMERATION_BONDS {
        return Err(Error::CostGuard {
            guard: "bonds",
            detail: format!("{} bonds exceeds {MAX_ENUMERATION_BONDS}", lat.num_bonds()),
        });
    }
    Ok(())
}

/// Every configuration with at most `max_edges` edges whose boundary equals
/// `spec`, each exactly once, in lexicographic (bond, multiplicity) order.
pub fn enumerate(lat: &Lattice, spec: &BoundarySpec, max_edges: u32) -> Result<Vec<FluxConfig>> {
    check_guard(lat, max_edges)?;
    enumerate_unguarded(lat, spec, max_edges)
}

/// [`enumerate`] without the cost guard; the caller bounds the work.
pub fn enumerate_unguarded(lat: &Lattice, spec: &BoundarySpec, max_edges: u32) -> Result<Vec<FluxConfig>> {
    let targets = spec.targets(lat)?;
    let n = lat.num_sites();
    let mut last_bond = vec![None; n];
    for (i, b) in lat.bonds().iter().enumerate() {
        last_bond[b.a] = Some(i);
        last_bond[b.b] = Some(i);
    }
    if (0..n).any(|s| last_bond[s].is_none() && targets[s] != 0) {
        return Ok(Vec::new());
    }
    let dfs = Dfs { lat, targets: &targets, last_bond: &last_bond };
    if lat.num_bonds() == 0 {
        return Ok(vec![FluxConfig::empty(lat)]);
    }
    // partition the first bond's multiplicity range across workers
    let firsts: Vec<[u32; 2]> = (0..=max_edges)
        .flat_map(|f| (0..=max_edges - f).map(move |r| [f, r]))
        .collect();
    let parts: Vec<Vec<FluxConfig>> = firsts
        .into_par_iter()
        .map(|first| {
            let mut state = State {
                mult: vec![[0, 0]; lat.num_bonds()],
                current: vec![0; n],
                budget: max_edges,
                out: Vec::new(),
            };
            if dfs.apply(&mut state, 0, first) {
                dfs.descend(&mut state, 1);
            }
            state.out
        })
        .collect();
    Ok(parts.into_iter().flatten().collect())
}

struct Dfs<'a> {
    lat: &'a Lattice,
    targets: &'a [i64],
    last_bond: &'a [Option<usize>],
}

struct State {
    mult: Vec<[u32; 2]>,
    current: Vec<i64>,
    budget: u32,
    out: Vec<FluxConfig>,
}

impl Dfs<'_> {
    /// Places multiplicities on `bond`; returns whether the prefix is still
    /// completable. The state is always left updated.
    fn apply(&self, st: &mut State, bond: usize, m: [u32; 2]) -> bool {
        let b = &self.lat.bonds()[bond];
        let net = m[0] as i64 - m[1] as i64;
        st.mult[bond] = m;
        st.current[b.a] += net;
        st.current[b.b] -= net;
        let used = m[0] + m[1];
        if used > st.budget {
            return false;
        }
        st.budget -= used;
        for s in [b.a, b.b] {
            if self.last_bond[s] == Some(bond) && st.current[s] != self.targets[s] {
                return false;
            }
        }
        // each missing unit of imbalance needs at least half an edge
        let deficit: i64 = st.current.iter().zip(self.targets).map(|(c, t)| (c - t).abs()).sum();
        deficit <= 2 * st.budget as i64
    }

    fn undo(&self, st: &mut State, bond: usize) {
        let b = &self.lat.bonds()[bond];
        let m = st.mult[bond];
        let net = m[0] as i64 - m[1] as i64;
        st.current[b.a] -= net;
        st.current[b.b] += net;
        st.mult[bond] = [0, 0];
    }

    fn descend(&self, st: &mut State, bond: usize) {
        if bond == self.lat.num_bonds() {
            st.out.push(FluxConfig { mult: st.mult.clone() });
            return;
        }
        let budget = st.budget;
        for f in 0..=budget {
            for r in 0..=budget - f {
                let ok = self.apply(st, bond, [f, r]);
                if ok {
                    self.descend(st, bond + 1);
                }
                self.revert(st, bond, budget);
            }
        }
    }

    fn revert(&self, st: &mut State, bond: usize, budget: u32) {
        self.undo(st, bond);
        st.budget = budget;
    }
}

/// Sum of weights over all sourceless configurations with at most
/// `max_edges` edges.
pub fn truncated_z(lat: &Lattice, beta: &Rational, max_edges: u32) -> Result<Rational> {
    Ok(enumerate(lat, &BoundarySpec::Empty, max_edges)?
        .iter()
        .map(|n| n.weight(lat, beta).value)
        .sum())
}

/// `½ Σ_{∂n = {x→y}} (βJ)^n/n!` truncated at `max_edges` edges.
pub fn truncated_f(lat: &Lattice, beta: &Rational, x: Site, y: Site, max_edges: u32) -> Result<Rational> {
    let spec = BoundarySpec::source_sink(x, y)?;
    let total: Rational = enumerate(lat, &spec, max_edges)?
        .iter()
        .map(|n| n.weight(lat, beta).value)
        .sum();
    Ok(total / Rational::from_integer(2.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferenceTerms {
    #[serde(serialize_with = "crate::serde_rational")]
    pub d1: Rational,
    #[serde(serialize_with = "crate::serde_rational")]
    pub d2: Rational,
}

/// The two pieces of `⟨S_x·S_y⟩_plus − ⟨S_x·S_y⟩_free` built from truncated
/// numerators and denominators of both lattices.
pub fn difference_terms(
    lat_plus: &Lattice,
    lat_free: &Lattice,
    beta: &Rational,
    x: Site,
    y: Site,
    max_edges: u32,
) -> Result<DifferenceTerms> {
    BoundarySpec::source_sink(x, y)?;
    if !lat_plus.has_ghost() {
        return Err(Error::LatticeMismatch("the first lattice must carry the ghost site".into()));
    }
    if lat_free.has_ghost() || !lat_plus.same_interior(lat_free) || lat_plus.radius() != lat_free.radius() {
        return Err(Error::LatticeMismatch("free lattice must share the plus lattice's interior sites".into()));
    }
    let z_delta = truncated_z(lat_plus, beta, max_edges)?;
    let z_zero = truncated_z(lat_free, beta, max_edges)?;
    let fd_xy = truncated_f(lat_plus, beta, x, y, max_edges)?;
    let fd_yx = truncated_f(lat_plus, beta, y, x, max_edges)?;
    let f0_xy = truncated_f(lat_free, beta, x, y, max_edges)?;
    let f0_yx = truncated_f(lat_free, beta, y, x, max_edges)?;
    let denom = &z_delta * &z_zero;
    if denom.is_zero() {
        return Err(Error::InvalidParameter("vanishing partition function".into()));
    }
    Ok(DifferenceTerms {
        d1: (fd_xy * &z_zero - f0_yx * &z_delta) / &denom,
        d2: (fd_yx * &z_zero - f0_xy * &z_delta) / &denom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::topology;
    use crate::rational::{int, ratio};
    use std::collections::HashSet;

    fn a() -> Site {
        Site::at(0, 0, 0)
    }
    fn b() -> Site {
        Site::at(1, 0, 0)
    }
    fn c() -> Site {
        Site::at(2, 0, 0)
    }

    #[test]
    fn boundary_examples() {
        let lat = topology::cycle(3, ratio(1, 6));
        let empty = FluxConfig::empty(&lat);
        assert!(empty.boundary(&lat).values().all(|&v| v == 0));
        let single = FluxConfig::from_edges(&lat, &[(a(), b(), 1)]).unwrap();
        let d = single.boundary(&lat);
        assert_eq!((d[&a()], d[&b()], d[&c()]), (1, -1, 0));
        let tri = FluxConfig::from_edges(&lat, &[(a(), b(), 1), (b(), c(), 1), (c(), a(), 1)]).unwrap();
        assert!(tri.boundary(&lat).values().all(|&v| v == 0));
        assert!(empty.satisfies(&lat, &BoundarySpec::Empty));
        let ss = BoundarySpec::source_sink(a(), b()).unwrap();
        assert!(single.satisfies(&lat, &ss));
        assert!(!single.satisfies(&lat, &BoundarySpec::Empty));
    }

    #[test]
    fn weights() {
        let lat = topology::dumbbell(ratio(1, 6));
        assert_eq!(FluxConfig::empty(&lat).weight(&lat, &int(1)).value, int(1));
        let n = FluxConfig::from_edges(&lat, &[(a(), b(), 2)]).unwrap();
        assert_eq!(n.weight(&lat, &int(1)).value, ratio(1, 72));
    }

    #[test]
    fn merge_and_embedding() {
        let lat = topology::dumbbell(ratio(1, 6));
        let d = FluxConfig::from_edges(&lat, &[(a(), b(), 1)]).unwrap();
        let z = FluxConfig::from_edges(&lat, &[(a(), b(), 1)]).unwrap();
        assert_eq!(embedding_count(&d, &z).unwrap(), BigInt::from(2));
        assert_eq!(embedding_count(&d, &FluxConfig::empty(&lat)).unwrap(), BigInt::one());
        let m = d.merge(&z).unwrap();
        assert_eq!(m.bond_totals(), vec![2]);
        assert_eq!(m, z.merge(&d).unwrap());
        let other = topology::path(3, int(1));
        assert!(d.merge(&FluxConfig::empty(&other)).is_err());
    }

    #[test]
    fn dumbbell_enumeration() {
        let lat = topology::dumbbell(int(1));
        assert_eq!(enumerate(&lat, &BoundarySpec::Empty, 0).unwrap(), vec![FluxConfig::empty(&lat)]);
        let two = enumerate(&lat, &BoundarySpec::Empty, 2).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[1], FluxConfig::from_edges(&lat, &[(a(), b(), 1), (b(), a(), 1)]).unwrap());
    }

    #[test]
    fn enumeration_closed_under_reversal() {
        let lat = topology::square_with_ghost(int(1), int(1));
        let all = enumerate(&lat, &BoundarySpec::Empty, 6).unwrap();
        let set: HashSet<FluxConfig> = all.iter().cloned().collect();
        assert_eq!(set.len(), all.len());
        assert!(all.iter().all(|n| set.contains(&n.reversed())));
        let mut sorted = all.clone();
        sorted.sort();
        // DFS order over bonds is lexicographic in the multiplicity vector
        assert_eq!(sorted, all);
    }

    #[test]
    fn guard() {
        let lat = topology::dumbbell(int(1));
        assert!(matches!(enumerate(&lat, &BoundarySpec::Empty, 17), Err(Error::CostGuard { .. })));
    }

    #[test]
    fn beta_zero_difference_vanishes() {
        let plus = topology::square_with_ghost(int(1), int(1));
        let free = plus.without_ghost().unwrap();
        let d = difference_terms(&plus, &free, &int(0), Site::at(0, 0, 0), Site::at(1, 1, 0), 6).unwrap();
        assert!(d.d1.is_zero() && d.d2.is_zero());
        assert!(difference_terms(&plus, &free, &int(1), a(), a(), 4).is_err());
    }
}
