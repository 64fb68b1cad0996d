//! Switching on unpaired graph pairs: the undirected switching bijection,
//! the directed path switch and a search for the collision that keeps the
//! directed switch from being injective.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux_graph::{enumerate, Arc, BoundarySpec, FluxConfig, MAX_ENUMERATION_BONDS, MAX_ENUMERATION_EDGES};
use crate::lattice::{topology, Lattice, Site};
use crate::rational::{int, power_over_factorial, Rational};

pub type EdgeSet = BTreeSet<usize>;

/// An undirected `x ↔ y` path as its bonds in walking order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct UPath {
    pub bonds: Vec<usize>,
    pub delta_avoiding: bool,
}

impl UPath {
    pub fn edge_set(&self) -> EdgeSet {
        self.bonds.iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bonds.is_empty()
    }
}

/// A directed walk `x → … → y` as arcs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DPath {
    pub arcs: Vec<Arc>,
}

impl DPath {
    pub fn new(lat: &Lattice, arcs: Vec<Arc>) -> Result<Self> {
        if arcs.is_empty() {
            return Err(Error::InvalidParameter("empty path".into()));
        }
        for w in arcs.windows(2) {
            if w[0].head(lat) != w[1].tail(lat) {
                return Err(Error::InvalidParameter("consecutive arcs do not meet".into()));
            }
        }
        Ok(DPath { arcs })
    }

    /// Path through the listed sites in order.
    pub fn through(lat: &Lattice, sites: &[Site]) -> Result<Self> {
        let mut arcs = Vec::new();
        for w in sites.windows(2) {
            let (a, b) = (lat.rank(w[0])?, lat.rank(w[1])?);
            arcs.push(
                Arc::between(lat, a, b).ok_or_else(|| Error::NotContained(format!("no bond {} - {}", w[0], w[1])))?,
            );
        }
        DPath::new(lat, arcs)
    }

    pub fn start(&self, lat: &Lattice) -> usize {
        self.arcs[0].tail(lat)
    }

    pub fn end(&self, lat: &Lattice) -> usize {
        self.arcs[self.arcs.len() - 1].head(lat)
    }

    pub fn reversed(&self) -> DPath {
        DPath { arcs: self.arcs.iter().rev().map(|a| a.reversed()).collect() }
    }

    pub fn touches_ghost(&self, lat: &Lattice) -> bool {
        self.arcs.iter().any(|a| lat.bond_touches_ghost(a.bond))
    }

    pub fn as_flux(&self, lat: &Lattice) -> FluxConfig {
        FluxConfig::from_arcs(lat, self.arcs.iter().copied())
    }

    pub fn display(&self, lat: &Lattice) -> String {
        let mut s = lat.site(self.start(lat)).to_string();
        for a in &self.arcs {
            s.push_str("->");
            s.push_str(&lat.site(a.head(lat)).to_string());
        }
        s
    }
}

/// Which member of a pair carries the source/sink pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Carrier {
    First,
    Second,
}

/// Undirected pair `(A_δ, B)` or `(C_δ, D)`. The first member may use ghost
/// bonds; the second never does.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UndirectedPair {
    pub first: EdgeSet,
    pub second: EdgeSet,
}

impl UndirectedPair {
    pub fn union(&self) -> EdgeSet {
        self.first.union(&self.second).copied().collect()
    }

    /// `Π βJ_e` over both members.
    pub fn weight(&self, lat: &Lattice, beta: &Rational) -> Rational {
        self.first
            .iter()
            .chain(&self.second)
            .map(|&b| beta * &lat.bonds()[b].coupling)
            .product()
    }

    /// The member carrying odd degree exactly at `x` and `y`, if the other is
    /// even everywhere.
    pub fn carrier(&self, lat: &Lattice, x: usize, y: usize) -> Option<Carrier> {
        let odd = |s: &EdgeSet| odd_sites(lat, s);
        let xy: BTreeSet<usize> = [x, y].into_iter().collect();
        match (odd(&self.first), odd(&self.second)) {
            (a, b) if a == xy && b.is_empty() => Some(Carrier::First),
            (a, b) if a.is_empty() && b == xy => Some(Carrier::Second),
            _ => None,
        }
    }
}

fn odd_sites(lat: &Lattice, set: &EdgeSet) -> BTreeSet<usize> {
    let mut deg = vec![0u32; lat.num_sites()];
    for &b in set {
        deg[lat.bonds()[b].a] += 1;
        deg[lat.bonds()[b].b] += 1;
    }
    deg.iter().enumerate().filter(|(_, &d)| d % 2 == 1).map(|(s, _)| s).collect()
}

/// `((A∖P) ∪ (B∩P), (B∖P) ∪ (A∩P))`.
pub fn undirected_switch(lat: &Lattice, pair: &UndirectedPair, path: &UPath) -> Result<UndirectedPair> {
    let p = path.edge_set();
    if path.bonds.iter().any(|&b| lat.bond_touches_ghost(b)) {
        return Err(Error::TouchesGhost);
    }
    if !p.is_subset(&pair.union()) {
        return Err(Error::NotContained("path is not contained in the pair's union".into()));
    }
    let first = pair.first.difference(&p).chain(pair.second.intersection(&p)).copied().collect();
    let second = pair.second.difference(&p).chain(pair.first.intersection(&p)).copied().collect();
    Ok(UndirectedPair { first, second })
}

/// Self-avoiding ghost-free paths from `x` to `y`, ordered by length and then
/// lexicographically by their sorted bond list.
pub fn undirected_paths(lat: &Lattice, x: Site, y: Site) -> Result<Vec<UPath>> {
    Ok(directed_paths(lat, x, y)?
        .into_iter()
        .map(|p| UPath { bonds: p.arcs.iter().map(|a| a.bond).collect(), delta_avoiding: true })
        .collect())
}

/// Self-avoiding ghost-free directed paths `x → y`, ordered by length and
/// then lexicographically by sorted bond list.
pub fn directed_paths(lat: &Lattice, x: Site, y: Site) -> Result<Vec<DPath>> {
    let (rx, ry) = (lat.rank(x)?, lat.rank(y)?);
    let mut out = Vec::new();
    let mut visited = vec![false; lat.num_sites()];
    let mut stack = Vec::new();
    fn go(lat: &Lattice, v: usize, ry: usize, visited: &mut [bool], stack: &mut Vec<Arc>, out: &mut Vec<DPath>) {
        if v == ry {
            out.push(DPath { arcs: stack.clone() });
            return;
        }
        for &(_, w) in lat.incident(v) {
            if visited[w] || lat.site(w).is_ghost() {
                continue;
            }
            visited[w] = true;
            stack.push(Arc::between(lat, v, w).expect("incident bond"));
            go(lat, w, ry, visited, stack, out);
            stack.pop();
            visited[w] = false;
        }
    }
    visited[rx] = true;
    if rx != ry {
        go(lat, rx, ry, &mut visited, &mut stack, &mut out);
    }
    out.sort_by_key(|p| {
        let mut bonds: Vec<usize> = p.arcs.iter().map(|a| a.bond).collect();
        bonds.sort_unstable();
        (p.arcs.len(), bonds)
    });
    Ok(out)
}

/// Assigns every pair to the first listed path its union contains.
pub fn canonical_partition(pairs: &[UndirectedPair], paths: &[UPath]) -> Result<Vec<Vec<usize>>> {
    let sets: Vec<EdgeSet> = paths.iter().map(|p| p.edge_set()).collect();
    let mut blocks = vec![Vec::new(); paths.len()];
    for (i, pair) in pairs.iter().enumerate() {
        let u = pair.union();
        let k = sets
            .iter()
            .position(|s| s.is_subset(&u))
            .ok_or_else(|| Error::NotContained(format!("pair {i} contains none of the listed paths")))?;
        blocks[k].push(i);
    }
    Ok(blocks)
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockCount {
    pub path: Vec<usize>,
    pub lambda: usize,
    pub gamma: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct UndirectedReport {
    pub max_edges: u32,
    pub lambda: usize,
    pub gamma: usize,
    pub blocks: Vec<BlockCount>,
    pub weights_equal: bool,
    pub failures: Vec<String>,
}

impl UndirectedReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.lambda == self.gamma && self.weights_equal
    }
}

/// All disjoint edge-set pairs with at most `max_edges` edges in total whose
/// members have the given carrier and whose union contains a listed path.
fn undirected_family(lat: &Lattice, x: usize, y: usize, max_edges: u32, carrier: Carrier, paths: &[EdgeSet]) -> Vec<UndirectedPair> {
    let nb = lat.num_bonds();
    let mut out = Vec::new();
    // each bond is absent, in the first member, or in the second
    let mut assign = vec![0u8; nb];
    fn go(
        lat: &Lattice,
        i: usize,
        used: u32,
        max: u32,
        assign: &mut Vec<u8>,
        visit: &mut dyn FnMut(&[u8]),
    ) {
        if i == assign.len() {
            visit(assign);
            return;
        }
        for choice in 0..3u8 {
            if choice > 0 && used >= max {
                break;
            }
            if choice == 2 && lat.bond_touches_ghost(i) {
                continue;
            }
            assign[i] = choice;
            go(lat, i + 1, used + (choice > 0) as u32, max, assign, visit);
        }
        assign[i] = 0;
    }
    let mut visit = |a: &[u8]| {
        let pair = UndirectedPair {
            first: (0..nb).filter(|&b| a[b] == 1).collect(),
            second: (0..nb).filter(|&b| a[b] == 2).collect(),
        };
        if pair.carrier(lat, x, y) == Some(carrier) {
            let u = pair.union();
            if paths.iter().any(|p| p.is_subset(&u)) {
                out.push(pair);
            }
        }
    };
    go(lat, 0, 0, max_edges, &mut assign, &mut visit);
    out
}

/// Exhaustive check of the undirected switching bijection `Λ_{x,y} ↔ Γ_{x,y}`.
pub fn verify_undirected_bijection(lat: &Lattice, x: Site, y: Site, max_edges: u32, beta: &Rational) -> Result<UndirectedReport> {
    if max_edges > MAX_ENUMERATION_EDGES || lat.num_bonds() > MAX_ENUMERATION_BONDS {
        return Err(Error::CostGuard {
            guard: "undirected_pairs",
            detail: format!("max_edges {max_edges} on {} bonds", lat.num_bonds()),
        });
    }
    BoundarySpec::source_sink(x, y)?;
    let (rx, ry) = (lat.rank(x)?, lat.rank(y)?);
    let paths = undirected_paths(lat, x, y)?;
    let sets: Vec<EdgeSet> = paths.iter().map(|p| p.edge_set()).collect();
    let lambda = undirected_family(lat, rx, ry, max_edges, Carrier::First, &sets);
    let gamma = undirected_family(lat, rx, ry, max_edges, Carrier::Second, &sets);
    let lb = canonical_partition(&lambda, &paths)?;
    let gb = canonical_partition(&gamma, &paths)?;
    let gamma_ref = &gamma;
    let gamma_block: HashMap<&UndirectedPair, usize> =
        gb.iter().enumerate().flat_map(|(k, blk)| blk.iter().map(move |&i| (&gamma_ref[i], k))).collect();

    let results: Vec<(Vec<String>, Vec<UndirectedPair>)> = lb
        .par_iter()
        .enumerate()
        .map(|(k, blk)| {
            let mut failures = Vec::new();
            let mut images = Vec::new();
            for &i in blk {
                let pair = &lambda[i];
                let img = match undirected_switch(lat, pair, &paths[k]) {
                    Ok(img) => img,
                    Err(e) => {
                        failures.push(format!("block {k}: switch failed on pair {i}: {e}"));
                        continue;
                    }
                };
                if img.union() != pair.union() {
                    failures.push(format!("block {k}: union changed for pair {i}"));
                }
                if img.weight(lat, beta) != pair.weight(lat, beta) {
                    failures.push(format!("block {k}: weight changed for pair {i}"));
                }
                match gamma_block.get(&img) {
                    Some(&kk) if kk == k => {}
                    Some(&kk) => failures.push(format!("block {k}: image of pair {i} lies in block {kk}")),
                    None => failures.push(format!("block {k}: image of pair {i} is not in Γ")),
                }
                match undirected_switch(lat, &img, &paths[k]) {
                    Ok(back) if &back == pair => {}
                    _ => failures.push(format!("block {k}: switch is not an involution on pair {i}")),
                }
                images.push(img);
            }
            let distinct: BTreeSet<&UndirectedPair> = images.iter().collect();
            if distinct.len() != images.len() {
                failures.push(format!("block {k}: switch is not injective"));
            }
            if images.len() != gb[k].len() {
                failures.push(format!("block {k}: {} images for {} targets", images.len(), gb[k].len()));
            }
            (failures, images)
        })
        .collect();

    let mut failures = Vec::new();
    let mut all_images = BTreeSet::new();
    for (f, imgs) in &results {
        failures.extend(f.iter().cloned());
        for img in imgs {
            if !all_images.insert(img.clone()) {
                failures.push("images of two blocks intersect".to_string());
            }
        }
    }
    let weights = |fam: &[UndirectedPair]| {
        let mut w: Vec<Rational> = fam.iter().map(|p| p.weight(lat, beta)).collect();
        w.sort();
        w
    };
    let blocks = paths
        .iter()
        .zip(lb.iter().zip(&gb))
        .filter(|(_, (l, g))| !l.is_empty() || !g.is_empty())
        .map(|(p, (l, g))| BlockCount { path: p.bonds.clone(), lambda: l.len(), gamma: g.len() })
        .collect();
    Ok(UndirectedReport {
        max_edges,
        lambda: lambda.len(),
        gamma: gamma.len(),
        blocks,
        weights_equal: weights(&lambda) == weights(&gamma),
        failures,
    })
}

/// Directed pair `(A_δ(x→y), B)`: the first member is sourced at `x → y`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DirectedPair {
    pub first: FluxConfig,
    pub second: FluxConfig,
}

impl DirectedPair {
    pub fn union(&self) -> Result<FluxConfig> {
        self.first.merge(&self.second)
    }

    pub fn total_edges(&self) -> u32 {
        self.first.total_edges() + self.second.total_edges()
    }

    /// Weight of one labelled graph formed by the pair:
    /// `Π_b (βJ_b)^{t_b} / t_b!` with `t_b` the merged multiplicity of bond `b`.
    pub fn weight(&self, lat: &Lattice, beta: &Rational) -> Rational {
        let totals = self.first.bond_totals().into_iter().zip(self.second.bond_totals()).map(|(a, b)| a + b);
        lat.bonds()
            .iter()
            .zip(totals)
            .map(|(b, t)| power_over_factorial(&(beta * &b.coupling), t))
            .product()
    }

    /// Whether every arc of `path` (with multiplicity) is available in the
    /// union.
    pub fn contains(&self, path: &DPath) -> bool {
        let Ok(u) = self.union() else { return false };
        let mut need = FluxConfig::zeros(u.num_bonds());
        for &a in &path.arcs {
            need.add(a, 1);
        }
        let ok = need.arcs().all(|(a, k)| u.get(a) >= k);
        ok
    }
}

/// A directed path whose arcs are each drawn from a named member of a pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SidedPath {
    pub path: DPath,
    pub sides: Vec<Carrier>,
}

impl SidedPath {
    /// Draws each arc from the first member while copies remain there, and
    /// from the second member otherwise.
    pub fn assign(pair: &DirectedPair, path: &DPath) -> Result<SidedPath> {
        let mut first = pair.first.clone();
        let mut second = pair.second.clone();
        let mut sides = Vec::new();
        for &a in &path.arcs {
            if first.remove(a, 1).is_ok() {
                sides.push(Carrier::First);
            } else if second.remove(a, 1).is_ok() {
                sides.push(Carrier::Second);
            } else {
                return Err(Error::NotContained(format!("arc on bond {} is not available", a.bond)));
            }
        }
        Ok(SidedPath { path: path.clone(), sides })
    }

    /// The path traversed backwards; an arc taken from one member lands in the
    /// other after switching.
    pub fn reversed(&self) -> SidedPath {
        let flip = |c: &Carrier| match c {
            Carrier::First => Carrier::Second,
            Carrier::Second => Carrier::First,
        };
        SidedPath { path: self.path.reversed(), sides: self.sides.iter().rev().map(flip).collect() }
    }
}

/// `((A∖P) ∪ rev(B∩P), (B∖P) ∪ rev(A∩P))` with multiplicities, where `P`'s
/// arcs are drawn from the members as recorded in `sided`.
pub fn directed_switch_sided(lat: &Lattice, pair: &DirectedPair, sided: &SidedPath) -> Result<DirectedPair> {
    if sided.path.touches_ghost(lat) {
        return Err(Error::TouchesGhost);
    }
    let mut first = pair.first.clone();
    let mut second = pair.second.clone();
    for (&a, side) in sided.path.arcs.iter().zip(&sided.sides) {
        match side {
            Carrier::First => first.remove(a, 1)?,
            Carrier::Second => second.remove(a, 1)?,
        }
    }
    for (&a, side) in sided.path.arcs.iter().zip(&sided.sides) {
        match side {
            Carrier::First => second.add(a.reversed(), 1),
            Carrier::Second => first.add(a.reversed(), 1),
        }
    }
    Ok(DirectedPair { first, second })
}

/// Directed switch along `path`, drawing arcs from the first member first.
/// Returns the image and the sided path whose reverse undoes the switch.
pub fn directed_switch(lat: &Lattice, pair: &DirectedPair, path: &DPath) -> Result<(DirectedPair, SidedPath)> {
    let sided = SidedPath::assign(pair, path)?;
    let image = directed_switch_sided(lat, pair, &sided)?;
    Ok((image, sided.reversed()))
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectedReport {
    pub max_edges: u32,
    pub pairs: usize,
    pub switched: usize,
    pub failures: Vec<String>,
}

impl DirectedReport {
    pub fn passed(&self) -> bool {
        self.switched > 0 && self.failures.is_empty()
    }
}

/// Every `(x→y, ∅)` pair with at most `max_edges` edges and every
/// ghost-free `x→y` path it contains: the switch keeps the edge count and
/// the weight, swaps the boundaries and is undone by the sided inverse.
pub fn verify_directed_switch(lat: &Lattice, x: Site, y: Site, max_edges: u32, beta: &Rational) -> Result<DirectedReport> {
    let xy = BoundarySpec::source_sink(x, y)?;
    let paths = directed_paths(lat, x, y)?;
    let firsts = enumerate(lat, &xy, max_edges)?;
    let seconds = enumerate(lat, &BoundarySpec::Empty, max_edges)?;
    let mut report = DirectedReport { max_edges, pairs: 0, switched: 0, failures: Vec::new() };
    for a in &firsts {
        for b in &seconds {
            if a.total_edges() + b.total_edges() > max_edges {
                continue;
            }
            report.pairs += 1;
            let pair = DirectedPair { first: a.clone(), second: b.clone() };
            for p in paths.iter().filter(|p| pair.contains(p)) {
                let (img, back) = directed_switch(lat, &pair, p)?;
                report.switched += 1;
                let ok = img.total_edges() == pair.total_edges()
                    && img.first.satisfies(lat, &BoundarySpec::Empty)
                    && img.second.satisfies(lat, &xy.reversed())
                    && img.weight(lat, beta) == pair.weight(lat, beta)
                    && directed_switch_sided(lat, &img, &back).ok().as_ref() == Some(&pair);
                if !ok {
                    report.failures.push(format!(
                        "{} | {} along {}",
                        a.display(lat),
                        b.display(lat),
                        p.display(lat)
                    ));
                }
            }
        }
    }
    Ok(report)
}

/// A verified collision of the directed switch: `G ≠ F` with
/// `G^(P) = F^(Q)`, `P ⊆ G`, `P ⊄ F`, `Q ⊄ G`, `Q ⊆ F`.
#[derive(Debug, Clone)]
pub struct AdverseWitness {
    pub lattice: Lattice,
    pub x: Site,
    pub y: Site,
    pub g: DirectedPair,
    pub f: DirectedPair,
    pub p: DPath,
    pub q: DPath,
    pub image: DirectedPair,
}

impl AdverseWitness {
    /// Re-checks every defining property from scratch.
    pub fn verify(&self) -> bool {
        let lat = &self.lattice;
        let gp = directed_switch(lat, &self.g, &self.p).map(|r| r.0);
        let fq = directed_switch(lat, &self.f, &self.q).map(|r| r.0);
        let (Ok(gp), Ok(fq)) = (gp, fq) else { return false };
        let x = lat.rank(self.x).ok();
        let y = lat.rank(self.y).ok();
        let valid = |pair: &DirectedPair, spec: (&BoundarySpec, &BoundarySpec)| {
            pair.first.satisfies(lat, spec.0) && pair.second.satisfies(lat, spec.1)
        };
        let Ok(xy) = BoundarySpec::source_sink(self.x, self.y) else { return false };
        let fwd = (&xy, &BoundarySpec::Empty);
        let back_spec = xy.reversed();
        let back = (&BoundarySpec::Empty, &back_spec);
        let ends = |p: &DPath| Some(p.start(lat)) == x && Some(p.end(lat)) == y;
        self.g != self.f
            && gp == fq
            && gp == self.image
            && valid(&self.g, fwd)
            && valid(&self.f, fwd)
            && valid(&gp, back)
            && ends(&self.p)
            && ends(&self.q)
            && self.p != self.q
            && !self.p.touches_ghost(lat)
            && !self.q.touches_ghost(lat)
            && self.g.contains(&self.p)
            && !self.f.contains(&self.p)
            && !self.g.contains(&self.q)
            && self.f.contains(&self.q)
    }
}

/// Square `a, b, c, d` with the ghost coupled to the opposite corners `a`
/// and `c`; source `a`, sink `c`.
pub fn adverse_lattice() -> (Lattice, Site, Site) {
    let a = Site::at(0, 0, 0);
    let b = Site::at(1, 0, 0);
    let c = Site::at(1, 1, 0);
    let d = Site::at(0, 1, 0);
    let one = int(1);
    let lat = Lattice::from_couplings(
        [a, b, c, d, Site::Ghost],
        [
            (a, b, one.clone()),
            (b, c, one.clone()),
            (c, d, one.clone()),
            (d, a, one.clone()),
            (a, Site::Ghost, one.clone()),
            (c, Site::Ghost, one),
        ],
    )
    .expect("adverse lattice is well formed");
    (lat, a, c)
}

/// Searches pairs in order of increasing size (up to eight edges) for a
/// collision of the directed switch.
pub fn adverse_example() -> Result<AdverseWitness> {
    let (lat, x, y) = adverse_lattice();
    adverse_search(&lat, x, y, 8)?
        .ok_or_else(|| Error::NotContained("no adverse witness within eight edges".into()))
}

pub fn adverse_search(lat: &Lattice, x: Site, y: Site, max_edges: u32) -> Result<Option<AdverseWitness>> {
    let xy = BoundarySpec::source_sink(x, y)?;
    let paths = directed_paths(lat, x, y)?;
    let firsts = enumerate(lat, &xy, max_edges)?;
    let seconds = enumerate(lat, &BoundarySpec::Empty, max_edges)?;
    let mut by_size: BTreeMap<u32, Vec<DirectedPair>> = BTreeMap::new();
    for a in &firsts {
        for b in &seconds {
            let pair = DirectedPair { first: a.clone(), second: b.clone() };
            if pair.total_edges() <= max_edges {
                by_size.entry(pair.total_edges()).or_default().push(pair);
            }
        }
    }
    // switching preserves size, so collisions only occur within one size
    for (_, pairs) in by_size {
        let mut seen: HashMap<DirectedPair, Vec<(usize, usize)>> = HashMap::new();
        for (gi, g) in pairs.iter().enumerate() {
            for (pi, p) in paths.iter().enumerate() {
                if !g.contains(p) {
                    continue;
                }
                let (img, _) = directed_switch(lat, g, p)?;
                let entry = seen.entry(img.clone()).or_default();
                for &(fi, qi) in entry.iter() {
                    let f = &pairs[fi];
                    let q = &paths[qi];
                    let w = AdverseWitness {
                        lattice: lat.clone(),
                        x,
                        y,
                        g: f.clone(),
                        f: g.clone(),
                        p: q.clone(),
                        q: p.clone(),
                        image: img.clone(),
                    };
                    if w.verify() {
                        return Ok(Some(w));
                    }
                }
                entry.push((gi, pi));
            }
        }
    }
    Ok(None)
}

/// Small oracle topology for the undirected switch: the unit square with the
/// ghost coupled to every corner, `x` and `y` at opposite corners.
pub fn undirected_instance() -> (Lattice, Site, Site) {
    (topology::square_with_ghost(int(1), int(1)), Site::at(0, 0, 0), Site::at(1, 1, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn set(v: &[usize]) -> EdgeSet {
        v.iter().copied().collect()
    }

    #[test]
    fn full_transfer() {
        let (lat, x, y) = undirected_instance();
        let p = &undirected_paths(&lat, x, y).unwrap()[0];
        let pair = UndirectedPair { first: p.edge_set(), second: EdgeSet::new() };
        let img = undirected_switch(&lat, &pair, p).unwrap();
        assert!(img.first.is_empty());
        assert_eq!(img.second, p.edge_set());
    }

    #[test]
    fn switch_from_second_member() {
        let lat = topology::cycle(4, int(1));
        let path = UPath { bonds: vec![0, 1], delta_avoiding: true };
        let pair = UndirectedPair { first: set(&[3]), second: set(&[0, 1, 2]) };
        let img = undirected_switch(&lat, &pair, &path).unwrap();
        assert_eq!(img.first, set(&[0, 1, 3]));
        assert_eq!(img.second, set(&[2]));
    }

    #[test]
    fn paths_are_ordered() {
        let (lat, x, y) = undirected_instance();
        let paths = undirected_paths(&lat, x, y).unwrap();
        assert_eq!(paths.len(), 2);
        assert!(paths.iter().all(|p| p.len() == 2));
        assert!(paths[0].edge_set() < paths[1].edge_set());
    }

    #[test]
    fn partition_first_match() {
        let (lat, x, y) = undirected_instance();
        let paths = undirected_paths(&lat, x, y).unwrap();
        let pairs = vec![UndirectedPair { first: paths[0].edge_set(), second: EdgeSet::new() }, UndirectedPair {
            first: paths[1].edge_set(),
            second: paths[0].edge_set(),
        }];
        let blocks = canonical_partition(&pairs, &paths).unwrap();
        assert_eq!(blocks, vec![vec![0, 1], vec![]]);
        let lonely = vec![UndirectedPair { first: EdgeSet::new(), second: EdgeSet::new() }];
        assert!(canonical_partition(&lonely, &paths).is_err());
    }

    #[test]
    fn small_lambda_is_empty() {
        let (lat, x, y) = undirected_instance();
        let r = verify_undirected_bijection(&lat, x, y, 1, &ratio(1, 2)).unwrap();
        assert_eq!((r.lambda, r.gamma), (0, 0));
        assert!(r.passed());
    }

    #[test]
    fn directed_full_transfer_and_inverse() {
        let (lat, x, y) = adverse_lattice();
        let p = &directed_paths(&lat, x, y).unwrap()[0];
        let pair = DirectedPair { first: p.as_flux(&lat), second: FluxConfig::empty(&lat) };
        let (img, back) = directed_switch(&lat, &pair, p).unwrap();
        assert!(img.first.is_empty());
        assert_eq!(img.second, p.reversed().as_flux(&lat));
        assert_eq!(directed_switch_sided(&lat, &img, &back).unwrap(), pair);
    }

    #[test]
    fn directed_rejects_missing_arcs() {
        let (lat, x, y) = adverse_lattice();
        let p = &directed_paths(&lat, x, y).unwrap()[0];
        let pair = DirectedPair { first: FluxConfig::empty(&lat), second: FluxConfig::empty(&lat) };
        assert!(directed_switch(&lat, &pair, p).is_err());
    }

    #[test]
    fn hand_built_witness_verifies() {
        let (lat, a, c) = adverse_lattice();
        let b = Site::at(1, 0, 0);
        let d = Site::at(0, 1, 0);
        let g = Site::Ghost;
        let gd = FluxConfig::from_edges(&lat, &[(a, b, 1), (b, c, 1), (c, d, 1), (d, a, 1), (a, g, 1), (g, c, 1)]).unwrap();
        let fd = FluxConfig::from_edges(&lat, &[(a, g, 1), (g, c, 1)]).unwrap();
        let f0 = FluxConfig::from_edges(&lat, &[(c, b, 1), (b, a, 1), (a, d, 1), (d, c, 1)]).unwrap();
        let gp = DirectedPair { first: gd, second: FluxConfig::empty(&lat) };
        let fp = DirectedPair { first: fd, second: f0 };
        let p = DPath::through(&lat, &[a, b, c]).unwrap();
        let q = DPath::through(&lat, &[a, d, c]).unwrap();
        let image = directed_switch(&lat, &gp, &p).unwrap().0;
        let w = AdverseWitness { lattice: lat, x: a, y: c, g: gp, f: fp, p, q, image };
        assert!(w.verify());
    }
}
