//! Paired graphs: merged edges individuated into slots, each slot typed by
//! direction and layer, together with a pairing of incoming to outgoing
//! slots at every paired site.
//!
//! A layered pair `(n_δ, n_0)` is realised by `embedding_count` labellings
//! (which slot of a bond carries which type) and each labelling by `Ψ`
//! pairings, `Ψ = Π_z outdeg(z)!` over the paired sites.

mod ledger;
mod surgical;
mod verify;

pub use ledger::*;
pub use surgical::*;
pub use verify::*;

use std::collections::BTreeMap;
use std::fmt;

use num::bigint::BigInt;
use num::{One, ToPrimitive};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux_graph::{Arc, BoundarySpec, Dir, FluxConfig};
use crate::lattice::Lattice;
use crate::rational::{factorial, power_over_factorial, ratio, Rational};

/// Largest number of objects [`enumerate_pairings`] and [`labelings`] will
/// materialise.
pub const MAX_PAIRINGS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Layer {
    Delta,
    Zero,
}

impl Layer {
    pub fn flip(self) -> Layer {
        match self {
            Layer::Delta => Layer::Zero,
            Layer::Zero => Layer::Delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SlotType {
    pub dir: Dir,
    pub layer: Layer,
}

impl SlotType {
    pub fn reversed(self) -> SlotType {
        SlotType { dir: self.dir.flip(), layer: self.layer.flip() }
    }
}

/// Position `index` among the edges carried by `bond`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Slot {
    pub bond: usize,
    pub index: usize,
}

/// Pairing at one site: incoming slot to outgoing slot.
pub type SitePairing = BTreeMap<Slot, Slot>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairedGraph {
    labels: Vec<Vec<SlotType>>,
    pairing: Vec<SitePairing>,
    paired: Vec<bool>,
    boundary: BoundarySpec,
}

impl PairedGraph {
    /// Checks that every paired site pairs its incoming slots bijectively
    /// with its outgoing slots and that unpaired sites carry no pairing.
    pub fn new(
        lat: &Lattice,
        labels: Vec<Vec<SlotType>>,
        pairing: Vec<SitePairing>,
        paired: Vec<bool>,
        boundary: BoundarySpec,
    ) -> Result<Self> {
        if labels.len() != lat.num_bonds() || pairing.len() != lat.num_sites() || paired.len() != lat.num_sites() {
            return Err(Error::LatticeMismatch("paired graph sized for another lattice".into()));
        }
        if let BoundarySpec::SourceSink(x, y) = boundary {
            if paired[lat.rank(x)?] || paired[lat.rank(y)?] {
                return Err(Error::InvalidParameter("boundary sites cannot be paired".into()));
            }
        }
        let g = PairedGraph { labels, pairing, paired, boundary };
        for z in 0..lat.num_sites() {
            if !g.paired[z] {
                if !g.pairing[z].is_empty() {
                    return Err(Error::InvalidParameter(format!("pairing at unpaired site {}", lat.site(z))));
                }
                continue;
            }
            let ins = g.in_slots(lat, z);
            let outs = g.out_slots(lat, z);
            if ins.len() != outs.len() {
                return Err(Error::Imbalanced { site: lat.site(z).to_string(), out: outs.len() as u32, inn: ins.len() as u32 });
            }
            let p = &g.pairing[z];
            let mut used: Vec<Slot> = p.values().copied().collect();
            used.sort();
            used.dedup();
            if p.len() != ins.len() || !ins.iter().all(|s| p.contains_key(s)) || used != outs {
                return Err(Error::InvalidParameter(format!("pairing at {} is not a bijection", lat.site(z))));
            }
        }
        Ok(g)
    }

    /// Every slot in layer δ, every site except the boundary endpoints
    /// paired, sorted incoming slots matched with sorted outgoing slots.
    pub fn single_layer(lat: &Lattice, flux: &FluxConfig, boundary: BoundarySpec) -> Result<Self> {
        let labels = canonical_labels(lat, flux, &FluxConfig::empty(lat))?;
        let paired = complement_of_boundary(lat, &boundary)?;
        let mut g = PairedGraph { labels, pairing: vec![SitePairing::new(); lat.num_sites()], paired, boundary };
        for z in 0..lat.num_sites() {
            if g.paired[z] {
                let ins = g.in_slots(lat, z);
                let outs = g.out_slots(lat, z);
                if ins.len() != outs.len() {
                    return Err(Error::Imbalanced { site: lat.site(z).to_string(), out: outs.len() as u32, inn: ins.len() as u32 });
                }
                g.pairing[z] = ins.into_iter().zip(outs).collect();
            }
        }
        Ok(g)
    }

    pub fn labels(&self) -> &[Vec<SlotType>] {
        &self.labels
    }

    pub fn pairing(&self, site: usize) -> &SitePairing {
        &self.pairing[site]
    }

    pub fn is_paired(&self, site: usize) -> bool {
        self.paired[site]
    }

    pub fn paired_sites(&self) -> &[bool] {
        &self.paired
    }

    pub fn boundary(&self) -> BoundarySpec {
        self.boundary
    }

    pub fn slot_type(&self, s: Slot) -> Option<SlotType> {
        self.labels.get(s.bond)?.get(s.index).copied()
    }

    pub fn arc(&self, s: Slot) -> Arc {
        Arc::new(s.bond, self.labels[s.bond][s.index].dir)
    }

    pub fn num_edges(&self) -> usize {
        self.labels.iter().map(Vec::len).sum()
    }

    pub fn slots(&self) -> impl Iterator<Item = Slot> + '_ {
        self.labels.iter().enumerate().flat_map(|(bond, l)| (0..l.len()).map(move |index| Slot { bond, index }))
    }

    /// Incoming slots at `z`, sorted.
    pub fn in_slots(&self, lat: &Lattice, z: usize) -> Vec<Slot> {
        self.incident_slots(lat, z, false)
    }

    /// Outgoing slots at `z`, sorted.
    pub fn out_slots(&self, lat: &Lattice, z: usize) -> Vec<Slot> {
        self.incident_slots(lat, z, true)
    }

    fn incident_slots(&self, lat: &Lattice, z: usize, out: bool) -> Vec<Slot> {
        let mut v = Vec::new();
        for &(bond, _) in lat.incident(z) {
            for (index, t) in self.labels[bond].iter().enumerate() {
                let a = Arc::new(bond, t.dir);
                let end = if out { a.tail(lat) } else { a.head(lat) };
                if end == z {
                    v.push(Slot { bond, index });
                }
            }
        }
        v.sort();
        v
    }

    pub fn flux(&self) -> FluxConfig {
        let mut f = FluxConfig::zeros(self.labels.len());
        for s in self.slots() {
            f.add(self.arc(s), 1);
        }
        f
    }

    pub fn layer(&self, layer: Layer) -> FluxConfig {
        let mut f = FluxConfig::zeros(self.labels.len());
        for s in self.slots() {
            if self.labels[s.bond][s.index].layer == layer {
                f.add(self.arc(s), 1);
            }
        }
        f
    }

    /// True when every site except the boundary endpoints is paired and the
    /// merged configuration has the stated boundary.
    pub fn is_complete(&self, lat: &Lattice) -> bool {
        let Ok(expect) = complement_of_boundary(lat, &self.boundary) else { return false };
        expect == self.paired && self.flux().satisfies(lat, &self.boundary)
    }

    /// `Ψ = Π outdeg(z)!` over the paired sites.
    pub fn psi(&self, lat: &Lattice) -> BigInt {
        (0..lat.num_sites())
            .filter(|&z| self.paired[z])
            .fold(BigInt::one(), |acc, z| acc * factorial(self.out_slots(lat, z).len() as u32))
    }

    /// `½ Π_b (βJ_b)^{t_b}/t_b! / Ψ`, with `t_b` the merged edge count.
    pub fn weight(&self, lat: &Lattice, beta: &Rational) -> Rational {
        let mut w = ratio(1, 2);
        for (b, l) in self.labels.iter().enumerate() {
            if !l.is_empty() {
                w *= power_over_factorial(&(beta * &lat.bonds()[b].coupling), l.len() as u32);
            }
        }
        w / Rational::from_integer(self.psi(lat))
    }

    pub fn touches_ghost(&self, lat: &Lattice, s: Slot) -> bool {
        lat.bond_touches_ghost(s.bond)
    }

    pub fn display(&self, lat: &Lattice) -> String {
        let mut parts = Vec::new();
        for s in self.slots() {
            let t = self.labels[s.bond][s.index];
            let l = match t.layer {
                Layer::Delta => "d",
                Layer::Zero => "0",
            };
            parts.push(format!("{}#{}{l}", self.arc(s).label(lat), s.index));
        }
        format!("[{}]", parts.join(" "))
    }

    pub(crate) fn from_parts(
        labels: Vec<Vec<SlotType>>,
        pairing: Vec<SitePairing>,
        paired: Vec<bool>,
        boundary: BoundarySpec,
    ) -> Self {
        PairedGraph { labels, pairing, paired, boundary }
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut Vec<Vec<SlotType>>, &mut Vec<SitePairing>, &mut BoundarySpec) {
        (&mut self.labels, &mut self.pairing, &mut self.boundary)
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.bond, self.index)
    }
}

fn complement_of_boundary(lat: &Lattice, boundary: &BoundarySpec) -> Result<Vec<bool>> {
    let mut paired = vec![true; lat.num_sites()];
    if let BoundarySpec::SourceSink(x, y) = *boundary {
        paired[lat.rank(x)?] = false;
        paired[lat.rank(y)?] = false;
    }
    Ok(paired)
}

/// Number of ways to pair incoming with outgoing edges at `z`.
pub fn pairing_count(lat: &Lattice, flux: &FluxConfig, z: usize) -> Result<BigInt> {
    let out = flux.out_degree(lat, z);
    let inn = flux.in_degree(lat, z);
    if out != inn {
        return Err(Error::Imbalanced { site: lat.site(z).to_string(), out, inn });
    }
    Ok(factorial(out))
}

/// Labels sorted by type on every bond: `δ` before `0`, `Up` before `Down`.
pub fn canonical_labels(lat: &Lattice, n_delta: &FluxConfig, n_zero: &FluxConfig) -> Result<Vec<Vec<SlotType>>> {
    check_sizes(lat, n_delta, n_zero)?;
    Ok((0..lat.num_bonds()).map(|b| sorted_types(bond_counts(n_delta, n_zero, b))).collect())
}

fn check_sizes(lat: &Lattice, a: &FluxConfig, b: &FluxConfig) -> Result<()> {
    if a.num_bonds() != lat.num_bonds() || b.num_bonds() != lat.num_bonds() {
        return Err(Error::LatticeMismatch("configuration sized for another lattice".into()));
    }
    Ok(())
}

const TYPES: [SlotType; 4] = [
    SlotType { dir: Dir::Up, layer: Layer::Delta },
    SlotType { dir: Dir::Up, layer: Layer::Zero },
    SlotType { dir: Dir::Down, layer: Layer::Delta },
    SlotType { dir: Dir::Down, layer: Layer::Zero },
];

fn bond_counts(n_delta: &FluxConfig, n_zero: &FluxConfig, b: usize) -> [u32; 4] {
    let d = n_delta.bond(b);
    let z = n_zero.bond(b);
    [d[0], z[0], d[1], z[1]]
}

fn sorted_types(counts: [u32; 4]) -> Vec<SlotType> {
    let mut out = Vec::new();
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by_key(|&i| TYPES[i]);
    for i in order {
        out.extend(std::iter::repeat_n(TYPES[i], counts[i] as usize));
    }
    out
}

/// Distinct arrangements of a multiset of slot types, in lexicographic order.
pub fn bond_labelings(counts: [u32; 4]) -> Vec<Vec<SlotType>> {
    let mut cur = sorted_types(counts);
    let mut out = vec![cur.clone()];
    while next_permutation(&mut cur) {
        out.push(cur.clone());
    }
    out
}

/// All labellings of the layered pair, as per-bond options; their product
/// has `embedding_count` elements.
pub fn labelings(lat: &Lattice, n_delta: &FluxConfig, n_zero: &FluxConfig) -> Result<Vec<Vec<Vec<SlotType>>>> {
    check_sizes(lat, n_delta, n_zero)?;
    let options: Vec<_> = (0..lat.num_bonds()).map(|b| bond_labelings(bond_counts(n_delta, n_zero, b))).collect();
    let total: u64 = options.iter().try_fold(1u64, |acc, o| acc.checked_mul(o.len() as u64)).unwrap_or(u64::MAX);
    if total > MAX_PAIRINGS {
        return Err(Error::CostGuard { guard: "labelings", detail: format!("{total} exceeds {MAX_PAIRINGS}") });
    }
    Ok(options)
}

/// Lexicographic successor in place; false once the last permutation is
/// reached.
pub(crate) fn next_permutation<T: Ord>(v: &mut [T]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Every bijection from `ins` to `outs`.
pub(crate) fn bijections(ins: &[Slot], outs: &[Slot]) -> Vec<SitePairing> {
    let mut perm: Vec<usize> = (0..outs.len()).collect();
    let mut all = Vec::new();
    loop {
        all.push(ins.iter().zip(&perm).map(|(&i, &p)| (i, outs[p])).collect());
        if !next_permutation(&mut perm) {
            break;
        }
    }
    all
}

/// Per-site pairing options of a labelling; the product enumerates the
/// paired graphs.
pub(crate) fn pairing_options(
    lat: &Lattice,
    labels: &[Vec<SlotType>],
    paired: &[bool],
    boundary: BoundarySpec,
) -> Result<Vec<Vec<SitePairing>>> {
    let probe = PairedGraph {
        labels: labels.to_vec(),
        pairing: vec![SitePairing::new(); lat.num_sites()],
        paired: paired.to_vec(),
        boundary,
    };
    let mut options = Vec::with_capacity(lat.num_sites());
    for z in 0..lat.num_sites() {
        if !paired[z] {
            options.push(vec![SitePairing::new()]);
            continue;
        }
        let ins = probe.in_slots(lat, z);
        let outs = probe.out_slots(lat, z);
        if ins.len() != outs.len() {
            return Err(Error::Imbalanced { site: lat.site(z).to_string(), out: outs.len() as u32, inn: ins.len() as u32 });
        }
        options.push(bijections(&ins, &outs));
    }
    Ok(options)
}

/// Calls `f` on every element of the product of `options`, in odometer order.
pub(crate) fn for_each_product<T>(options: &[Vec<T>], mut f: impl FnMut(&[&T])) {
    if options.iter().any(Vec::is_empty) {
        return;
    }
    let mut idx = vec![0usize; options.len()];
    loop {
        let pick: Vec<&T> = options.iter().zip(&idx).map(|(o, &i)| &o[i]).collect();
        f(&pick);
        let mut k = options.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < options[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Every paired graph on a fixed labelling: boundary endpoints unpaired,
/// every other site paired.
pub fn enumerate_pairings(lat: &Lattice, labels: &[Vec<SlotType>], boundary: BoundarySpec) -> Result<Vec<PairedGraph>> {
    let paired = complement_of_boundary(lat, &boundary)?;
    let options = pairing_options(lat, labels, &paired, boundary)?;
    let total: u64 = options.iter().try_fold(1u64, |acc, o| acc.checked_mul(o.len() as u64)).unwrap_or(u64::MAX);
    if total > MAX_PAIRINGS {
        return Err(Error::CostGuard { guard: "pairings", detail: format!("{total} exceeds {MAX_PAIRINGS}") });
    }
    let mut out = Vec::with_capacity(total as usize);
    for_each_product(&options, |pick| {
        out.push(PairedGraph {
            labels: labels.to_vec(),
            pairing: pick.iter().map(|p| (*p).clone()).collect(),
            paired: paired.clone(),
            boundary,
        });
    });
    Ok(out)
}

/// One open trail (present iff the boundary is a source-sink pair) and the
/// closed loops, each as an edge sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrailDecomposition<E> {
    pub trail: Option<Vec<E>>,
    pub loops: Vec<Vec<E>>,
}

impl<E: Copy + Ord> TrailDecomposition<E> {
    pub fn edges(&self) -> Vec<E> {
        let mut v: Vec<E> = self.trail.iter().flatten().chain(self.loops.iter().flatten()).copied().collect();
        v.sort();
        v
    }
}

/// Follows the pairing. At the source and sink the free choice is fixed by
/// pairing the sorted incoming slots with the sorted outgoing slots; the
/// leftover outgoing slot starts the trail and the leftover incoming slot
/// ends it.
pub fn decompose(lat: &Lattice, g: &PairedGraph) -> Result<TrailDecomposition<Slot>> {
    if !g.is_complete(lat) {
        return Err(Error::InvalidParameter("decomposition needs a completely paired graph".into()));
    }
    let mut next: BTreeMap<Slot, Slot> = BTreeMap::new();
    for p in &g.pairing {
        next.extend(p.iter().map(|(&a, &b)| (a, b)));
    }
    let mut start = None;
    if let BoundarySpec::SourceSink(x, y) = g.boundary {
        for z in [lat.rank(x)?, lat.rank(y)?] {
            let ins = g.in_slots(lat, z);
            let outs = g.out_slots(lat, z);
            for (a, b) in ins.iter().zip(&outs) {
                next.insert(*a, *b);
            }
            if outs.len() > ins.len() {
                start = outs.last().copied();
            }
        }
    }
    let mut seen: BTreeMap<Slot, ()> = BTreeMap::new();
    let walk = |from: Slot, seen: &mut BTreeMap<Slot, ()>| {
        let mut v = vec![from];
        seen.insert(from, ());
        let mut cur = from;
        while let Some(&n) = next.get(&cur) {
            if n == from || seen.contains_key(&n) {
                break;
            }
            seen.insert(n, ());
            v.push(n);
            cur = n;
        }
        v
    };
    let trail = start.map(|s| walk(s, &mut seen));
    let mut loops = Vec::new();
    for s in g.slots() {
        if !seen.contains_key(&s) {
            loops.push(walk(s, &mut seen));
        }
    }
    Ok(TrailDecomposition { trail, loops })
}

/// Deterministic cycle peeling of a balanced configuration: start from the
/// smallest remaining arc, always leave by the smallest available arc, cut
/// out the first closed simple cycle.
pub fn euler_decompose(lat: &Lattice, flux: &FluxConfig) -> Result<TrailDecomposition<Arc>> {
    for z in 0..lat.num_sites() {
        let (out, inn) = (flux.out_degree(lat, z), flux.in_degree(lat, z));
        if out != inn {
            return Err(Error::Imbalanced { site: lat.site(z).to_string(), out, inn });
        }
    }
    let mut rest = flux.clone();
    let mut loops = Vec::new();
    loop {
        let Some((first, _)) = rest.arcs().next() else { break };
        let mut stack: Vec<Arc> = vec![first];
        let mut visited = vec![first.tail(lat)];
        loop {
            let last = *stack.last().unwrap();
            let here = last.head(lat);
            if let Some(pos) = visited.iter().position(|&v| v == here) {
                let cycle: Vec<Arc> = stack.drain(pos..).collect();
                for a in &cycle {
                    rest.remove(*a, 1)?;
                }
                loops.push(cycle);
                break;
            }
            visited.push(here);
            let step = lat
                .incident(here)
                .iter()
                .map(|&(b, _)| Arc::new(b, if lat.bonds()[b].a == here { Dir::Up } else { Dir::Down }))
                .filter(|&a| rest.get(a) > 0)
                .min()
                .ok_or_else(|| Error::InvalidParameter("peeling stalled".into()))?;
            stack.push(step);
        }
    }
    Ok(TrailDecomposition { trail: None, loops })
}

/// A maximal chain of slots linked by the pairing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Component {
    pub slots: Vec<Slot>,
    pub closed: bool,
}

/// Chains following the pairing only: open chains start and end at
/// unpaired sites, closed chains are loops through paired sites.
pub fn components(lat: &Lattice, g: &PairedGraph) -> Vec<Component> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    let successor = |s: Slot| {
        let h = g.arc(s).head(lat);
        g.pairing[h].get(&s).copied()
    };
    for z in 0..lat.num_sites() {
        if g.paired[z] {
            continue;
        }
        for s in g.out_slots(lat, z) {
            let mut v = vec![s];
            seen.insert(s);
            let mut cur = s;
            while let Some(n) = successor(cur) {
                seen.insert(n);
                v.push(n);
                cur = n;
            }
            out.push(Component { slots: v, closed: false });
        }
    }
    for s in g.slots() {
        if seen.contains(&s) {
            continue;
        }
        let mut v = vec![s];
        seen.insert(s);
        let mut cur = s;
        while let Some(n) = successor(cur) {
            if n == s {
                break;
            }
            seen.insert(n);
            v.push(n);
            cur = n;
        }
        out.push(Component { slots: v, closed: true });
    }
    out
}

/// The union of the paired chains leaving the boundary endpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SwitchGraph {
    pub chains: Vec<Vec<Slot>>,
}

impl SwitchGraph {
    pub fn slots(&self) -> impl Iterator<Item = Slot> + '_ {
        self.chains.iter().flatten().copied()
    }
}

pub fn extract_switch_graph(lat: &Lattice, g: &PairedGraph) -> Result<SwitchGraph> {
    if !g.is_complete(lat) || g.boundary == BoundarySpec::Empty {
        return Err(Error::NotSwitchable);
    }
    let chains: Vec<Vec<Slot>> = components(lat, g).into_iter().filter(|c| !c.closed).map(|c| c.slots).collect();
    if chains.iter().flatten().any(|&s| lat.bond_touches_ghost(s.bond)) {
        return Err(Error::NotSwitchable);
    }
    Ok(SwitchGraph { chains })
}

/// Reverses the switch graph: every slot on it flips direction and layer,
/// every pairing along it is reversed, the boundary is exchanged.
pub fn paired_switch(lat: &Lattice, g: &PairedGraph) -> Result<PairedGraph> {
    let sg = extract_switch_graph(lat, g)?;
    let mut out = g.clone();
    for chain in &sg.chains {
        for w in chain.windows(2) {
            let v = g.arc(w[0]).head(lat);
            out.pairing[v].remove(&w[0]);
            out.pairing[v].insert(w[1], w[0]);
        }
    }
    for s in sg.slots() {
        let t = &mut out.labels[s.bond][s.index];
        *t = t.reversed();
    }
    out.boundary = g.boundary.reversed();
    Ok(out)
}

/// Total count of paired graphs over a labelling: `Π outdeg(z)!`.
pub fn pairing_total(lat: &Lattice, labels: &[Vec<SlotType>], boundary: BoundarySpec) -> Result<u64> {
    let paired = complement_of_boundary(lat, &boundary)?;
    let g = PairedGraph::from_parts(labels.to_vec(), vec![SitePairing::new(); lat.num_sites()], paired, boundary);
    g.psi(lat).to_u64().ok_or_else(|| Error::CostGuard { guard: "pairings", detail: "count overflows".into() })
}
