//! Finite lattices: free, plus (ghost site) and periodic boxes in three
//! dimensions, plus arbitrary small graphs built from explicit couplings.
//!
//! Sites are stored in their deterministic site order: interior sites in
//! lexicographic coordinate order, the ghost site last. Every bond is an
//! unordered pair `(a, b)` with `a < b` in that order and an exact rational
//! coupling `J_ab > 0`. The Hamiltonian sums over ordered pairs, so a bond
//! contributes `-2 J_ab cos(θ_a - θ_b)` to the energy.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{ratio, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Site {
    Interior([i32; 3]),
    Ghost,
}

impl Site {
    pub const fn at(x: i32, y: i32, z: i32) -> Site {
        Site::Interior([x, y, z])
    }

    pub fn is_ghost(&self) -> bool {
        matches!(self, Site::Ghost)
    }

    /// Sup-norm of the coordinates; the ghost site lies outside every region.
    pub fn norm(&self) -> Option<i32> {
        match self {
            Site::Interior(c) => Some(c.iter().map(|v| v.abs()).max().unwrap_or(0)),
            Site::Ghost => None,
        }
    }

    pub fn coords(&self) -> Option<[i32; 3]> {
        match self {
            Site::Interior(c) => Some(*c),
            Site::Ghost => None,
        }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Site::Interior([x, y, z]) => write!(f, "({x},{y},{z})"),
            Site::Ghost => write!(f, "ghost"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Free,
    Plus,
    Periodic,
}

impl std::str::FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "free" | "0" => Ok(BoundaryCondition::Free),
            "plus" | "+" => Ok(BoundaryCondition::Plus),
            "periodic" => Ok(BoundaryCondition::Periodic),
            other => Err(Error::Config(format!("unknown boundary condition {other:?}"))),
        }
    }
}

/// Translation-invariant, finite-range, symmetric ferromagnetic coupling
/// rule `J(offset)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTable {
    entries: BTreeMap<[i32; 3], Rational>,
}

impl CouplingTable {
    /// `J = 1/6` on the six unit offsets.
    pub fn nearest_neighbor() -> Self {
        let mut entries = BTreeMap::new();
        for axis in 0..3 {
            for sign in [-1, 1] {
                let mut off = [0; 3];
                off[axis] = sign;
                entries.insert(off, ratio(1, 6));
            }
        }
        CouplingTable { entries }
    }

    pub fn new(entries: impl IntoIterator<Item = ([i32; 3], Rational)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (off, j) in entries {
            if off == [0, 0, 0] {
                return Err(Error::InvalidLattice("self-coupling offset (0,0,0)".into()));
            }
            if j.is_negative() {
                return Err(Error::InvalidLattice(format!(
                    "antiferromagnetic coupling {j} at offset {off:?}"
                )));
            }
            if !j.is_zero() {
                map.insert(off, j);
            }
        }
        for (off, j) in &map {
            let neg = [-off[0], -off[1], -off[2]];
            if map.get(&neg) != Some(j) {
                return Err(Error::InvalidLattice(format!(
                    "coupling table is not symmetric at offset {off:?}"
                )));
            }
        }
        if map.is_empty() {
            return Err(Error::InvalidLattice("empty coupling table".into()));
        }
        Ok(CouplingTable { entries: map })
    }

    pub fn get(&self, offset: [i32; 3]) -> Rational {
        self.entries.get(&offset).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[i32; 3], &Rational)> {
        self.entries.iter()
    }

    pub fn range(&self) -> i32 {
        self.entries
            .keys()
            .flat_map(|o| o.iter().map(|v| v.abs()))
            .max()
            .unwrap_or(0)
    }
}

impl Default for CouplingTable {
    fn default() -> Self {
        Self::nearest_neighbor()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    #[serde(serialize_with = "crate::serde_rational")]
    pub coupling: Rational,
}

#[derive(Debug, Clone)]
pub struct Lattice {
    radius: Option<i32>,
    bc: BoundaryCondition,
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
    bonds: Vec<Bond>,
    bond_index: HashMap<(usize, usize), usize>,
    /// Per site: `(bond, neighbour)` pairs in bond order.
    incident: Vec<Vec<(usize, usize)>>,
}

impl Lattice {
    /// The box of radius `radius` under the given boundary condition with the
    /// nearest-neighbour coupling table.
    pub fn cubic(radius: i32, bc: BoundaryCondition) -> Result<Self> {
        Self::cubic_with(radius, bc, &CouplingTable::nearest_neighbor())
    }

    /// Box lattice with a pluggable coupling rule.
    ///
    /// Free and plus boxes carry spins on the interior `|z| < L`; the plus
    /// boundary `|z| = L` is folded into the ghost site with
    /// `J_{δ,k} = Σ_{m ∈ ∂L} J_{m,k}`. Periodic boxes live on `(ℤ/2Lℤ)³`
    /// with coordinates in `(-L, L]`.
    pub fn cubic_with(radius: i32, bc: BoundaryCondition, table: &CouplingTable) -> Result<Self> {
        if radius < 1 {
            return Err(Error::InvalidLattice(format!(
                "box radius must be at least 1, got {radius}"
            )));
        }
        let mut couplings: BTreeMap<(Site, Site), Rational> = BTreeMap::new();
        let mut add = |a: Site, b: Site, j: &Rational| {
            if a == b {
                return;
            }
            let key = if a < b { (a, b) } else { (b, a) };
            *couplings.entry(key).or_insert_with(Rational::zero) += j;
        };
        let mut sites = Vec::new();
        match bc {
            BoundaryCondition::Free | BoundaryCondition::Plus => {
                let inner = radius - 1;
                for x in -inner..=inner {
                    for y in -inner..=inner {
                        for z in -inner..=inner {
                            sites.push(Site::at(x, y, z));
                        }
                    }
                }
                for &s in &sites {
                    let c = s.coords().unwrap();
                    for (off, j) in table.iter() {
                        let t = [c[0] + off[0], c[1] + off[1], c[2] + off[2]];
                        let norm = t.iter().map(|v| v.abs()).max().unwrap();
                        if norm <= inner {
                            // each unordered pair is visited from both ends
                            add(s, Site::Interior(t), &(j / Rational::from_integer(2.into())));
                        } else if norm == radius && bc == BoundaryCondition::Plus {
                            add(s, Site::Ghost, j);
                        }
                    }
                }
                if bc == BoundaryCondition::Plus {
                    sites.push(Site::Ghost);
                }
            }
            BoundaryCondition::Periodic => {
                let side = 2 * radius;
                let wrap = |v: i32| -> i32 {
                    // representative in (-L, L]
                    let m = (v + radius - 1).rem_euclid(side);
                    m - radius + 1
                };
                for x in (-radius + 1)..=radius {
                    for y in (-radius + 1)..=radius {
                        for z in (-radius + 1)..=radius {
                            sites.push(Site::at(x, y, z));
                        }
                    }
                }
                for &s in &sites {
                    let c = s.coords().unwrap();
                    for (off, j) in table.iter() {
                        let t = [wrap(c[0] + off[0]), wrap(c[1] + off[1]), wrap(c[2] + off[2])];
                        add(s, Site::Interior(t), &(j / Rational::from_integer(2.into())));
                    }
                }
            }
        }
        let bonds = couplings.into_iter().map(|((a, b), j)| (a, b, j)).collect::<Vec<_>>();
        let mut lat = Self::assemble(sites, bonds)?;
        lat.radius = Some(radius);
        lat.bc = bc;
        Ok(lat)
    }

    /// A small graph with explicit unordered couplings. The boundary
    /// condition is reported as `Plus` when the ghost site is present.
    pub fn from_couplings(
        sites: impl IntoIterator<Item = Site>,
        couplings: impl IntoIterator<Item = (Site, Site, Rational)>,
    ) -> Result<Self> {
        let mut sites: Vec<Site> = sites.into_iter().collect();
        sites.sort();
        sites.dedup();
        let known: std::collections::HashSet<Site> = sites.iter().copied().collect();
        let mut merged: BTreeMap<(Site, Site), Rational> = BTreeMap::new();
        for (a, b, j) in couplings {
            if a == b {
                return Err(Error::InvalidLattice(format!("self-coupling at {a}")));
            }
            for s in [a, b] {
                if !known.contains(&s) {
                    return Err(Error::SiteOutside(s.to_string()));
                }
            }
            if j.is_negative() {
                return Err(Error::InvalidLattice(format!("negative coupling {j}")));
            }
            let key = if a < b { (a, b) } else { (b, a) };
            *merged.entry(key).or_insert_with(Rational::zero) += j;
        }
        let bonds = merged
            .into_iter()
            .filter(|(_, j)| !j.is_zero())
            .map(|((a, b), j)| (a, b, j))
            .collect();
        Self::assemble(sites, bonds)
    }

    fn assemble(mut sites: Vec<Site>, bonds: Vec<(Site, Site, Rational)>) -> Result<Self> {
        sites.sort();
        if sites.iter().all(|s| s.is_ghost()) {
            return Err(Error::InvalidLattice("no interior sites".into()));
        }
        let index: HashMap<Site, usize> = sites.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let mut out = Vec::with_capacity(bonds.len());
        let mut bond_index = HashMap::new();
        let mut incident = vec![Vec::new(); sites.len()];
        for (a, b, j) in bonds {
            let (ia, ib) = (index[&a], index[&b]);
            let (lo, hi) = if ia < ib { (ia, ib) } else { (ib, ia) };
            let id = out.len();
            bond_index.insert((lo, hi), id);
            incident[lo].push((id, hi));
            incident[hi].push((id, lo));
            out.push(Bond { a: lo, b: hi, coupling: j });
        }
        let bc = if sites.last() == Some(&Site::Ghost) {
            BoundaryCondition::Plus
        } else {
            BoundaryCondition::Free
        };
        Ok(Lattice { radius: None, bc, sites, index, bonds: out, bond_index, incident })
    }

    pub fn radius(&self) -> Option<i32> {
        self.radius
    }

    pub fn boundary_condition(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn num_bonds(&self) -> usize {
        self.bonds.len()
    }

    pub fn site(&self, rank: usize) -> Site {
        self.sites[rank]
    }

    pub fn has_ghost(&self) -> bool {
        self.ghost().is_some()
    }

    pub fn ghost(&self) -> Option<usize> {
        self.index.get(&Site::Ghost).copied()
    }

    pub fn rank(&self, s: Site) -> Result<usize> {
        self.index.get(&s).copied().ok_or_else(|| Error::SiteOutside(s.to_string()))
    }

    pub fn contains(&self, s: Site) -> bool {
        self.index.contains_key(&s)
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        let key = if a < b { (a, b) } else { (b, a) };
        self.bond_index.get(&key).copied()
    }

    /// `(bond, neighbour)` pairs at a site rank.
    pub fn incident(&self, rank: usize) -> &[(usize, usize)] {
        &self.incident[rank]
    }

    pub fn bond_touches_ghost(&self, bond: usize) -> bool {
        let b = &self.bonds[bond];
        self.sites[b.a].is_ghost() || self.sites[b.b].is_ghost()
    }

    /// Sites `t` with `J_{s,t} > 0`, in site order.
    pub fn neighbors(&self, s: Site) -> Result<Vec<Site>> {
        let r = self.rank(s)?;
        let mut ranks: Vec<usize> = self.incident[r].iter().map(|&(_, t)| t).collect();
        ranks.sort_unstable();
        Ok(ranks.into_iter().map(|t| self.sites[t]).collect())
    }

    /// Exact `J_{a,b}`; zero for non-neighbours, for `a = b`, and for sites
    /// that are not in the lattice.
    pub fn coupling(&self, a: Site, b: Site) -> Rational {
        match (self.index.get(&a), self.index.get(&b)) {
            (Some(&ia), Some(&ib)) => self
                .bond_between(ia, ib)
                .map(|id| self.bonds[id].coupling.clone())
                .unwrap_or_else(Rational::zero),
            _ => Rational::zero(),
        }
    }

    pub fn site_order(&self) -> SiteOrder {
        SiteOrder { ranks: self.index.iter().map(|(&s, &r)| (s, r as i64)).collect() }
    }

    /// Same site set (ignoring the ghost) and same couplings between
    /// non-ghost sites.
    pub fn same_interior(&self, other: &Lattice) -> bool {
        let mine: Vec<Site> = self.sites.iter().copied().filter(|s| !s.is_ghost()).collect();
        let theirs: Vec<Site> = other.sites.iter().copied().filter(|s| !s.is_ghost()).collect();
        mine == theirs
    }

    /// Copy of this lattice without the ghost site and its bonds.
    pub fn without_ghost(&self) -> Result<Lattice> {
        let sites: Vec<Site> = self.sites.iter().copied().filter(|s| !s.is_ghost()).collect();
        let bonds = self
            .bonds
            .iter()
            .filter(|b| !self.sites[b.a].is_ghost() && !self.sites[b.b].is_ghost())
            .map(|b| (self.sites[b.a], self.sites[b.b], b.coupling.clone()))
            .collect();
        let mut lat = Self::assemble(sites, bonds)?;
        lat.radius = self.radius;
        lat.bc = BoundaryCondition::Free;
        Ok(lat)
    }
}

/// Injective site ranking: lexicographic interior order, ghost last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteOrder {
    ranks: HashMap<Site, i64>,
}

impl SiteOrder {
    pub fn sigma(&self, s: Site) -> Option<i64> {
        self.ranks.get(&s).copied()
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }
}

/// Ready-made small graphs used as oracle-sized test systems.
pub mod topology {
    use super::*;

    /// Two sites joined by one bond.
    pub fn dumbbell(j: Rational) -> Lattice {
        path(2, j)
    }

    /// `n` sites in a line along the first axis.
    pub fn path(n: usize, j: Rational) -> Lattice {
        let sites: Vec<Site> = (0..n as i32).map(|i| Site::at(i, 0, 0)).collect();
        let bonds = sites.windows(2).map(|w| (w[0], w[1], j.clone())).collect::<Vec<_>>();
        Lattice::from_couplings(sites, bonds).expect("path graph is well formed")
    }

    /// `n ≥ 3` sites on a ring.
    pub fn cycle(n: usize, j: Rational) -> Lattice {
        assert!(n >= 3, "a cycle needs at least three sites");
        let sites: Vec<Site> = (0..n as i32).map(|i| Site::at(i, 0, 0)).collect();
        let bonds = (0..n).map(|i| (sites[i], sites[(i + 1) % n], j.clone())).collect::<Vec<_>>();
        Lattice::from_couplings(sites, bonds).expect("cycle graph is well formed")
    }

    /// The unit square `(0,0),(1,0),(1,1),(0,1)` with the ghost coupled to
    /// every corner.
    pub fn square_with_ghost(j: Rational, j_ghost: Rational) -> Lattice {
        let corners = [Site::at(0, 0, 0), Site::at(1, 0, 0), Site::at(1, 1, 0), Site::at(0, 1, 0)];
        let mut bonds: Vec<(Site, Site, Rational)> =
            (0..4).map(|i| (corners[i], corners[(i + 1) % 4], j.clone())).collect();
        bonds.extend(corners.iter().map(|&c| (c, Site::Ghost, j_ghost.clone())));
        let sites = corners.iter().copied().chain(std::iter::once(Site::Ghost));
        Lattice::from_couplings(sites, bonds).expect("square graph is well formed")
    }

    /// Planar strip `[-r, r] × {0, 1}` with nearest-neighbour couplings `j`
    /// and the ghost coupled to the four end sites `|x| = r`.
    pub fn ghosted_strip(r: i32, j: Rational) -> Lattice {
        let mut sites = Vec::new();
        for x in -r..=r {
            for y in 0..=1 {
                sites.push(Site::at(x, y, 0));
            }
        }
        let mut bonds = Vec::new();
        for x in -r..=r {
            bonds.push((Site::at(x, 0, 0), Site::at(x, 1, 0), j.clone()));
            if x < r {
                for y in 0..=1 {
                    bonds.push((Site::at(x, y, 0), Site::at(x + 1, y, 0), j.clone()));
                }
            }
        }
        for x in [-r, r] {
            for y in 0..=1 {
                bonds.push((Site::at(x, y, 0), Site::Ghost, j.clone()));
            }
        }
        sites.push(Site::Ghost);
        Lattice::from_couplings(sites, bonds).expect("strip graph is well formed")
    }
}
