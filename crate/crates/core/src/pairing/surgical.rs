use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::flux_graph::{BoundarySpec, FluxConfig};
use crate::lattice::{Lattice, Site};
use crate::rational::int;

use super::{canonical_labels, PairedGraph, SitePairing, Slot};

/// Splits `p` into a vertex-simple path from source to sink followed by
/// vertex-simple cycles. Each piece is the shortest available, ties broken
/// by the lexicographic slot sequence.
pub fn surgical_decomposition(lat: &Lattice, g: &PairedGraph, p: &[Slot]) -> Result<Vec<Vec<Slot>>> {
    let BoundarySpec::SourceSink(x, y) = g.boundary() else {
        return Err(Error::InvalidParameter("surgery needs a source-sink graph".into()));
    };
    let mut rest: BTreeSet<Slot> = BTreeSet::new();
    for &s in p {
        if g.slot_type(s).is_none() {
            return Err(Error::NotContained(format!("slot {s}")));
        }
        if lat.bond_touches_ghost(s.bond) {
            return Err(Error::TouchesGhost);
        }
        if !rest.insert(s) {
            return Err(Error::InvalidParameter(format!("slot {s} repeated")));
        }
    }
    let flux = FluxConfig::from_arcs(lat, p.iter().map(|&s| g.arc(s)));
    if !flux.satisfies(lat, &g.boundary()) {
        return Err(Error::NotContained("the switched subgraph must run from source to sink".into()));
    }
    let (s, t) = (lat.rank(x)?, lat.rank(y)?);
    let mut pieces = Vec::new();
    let path = shortest(lat, g, &rest, s, Some(t)).ok_or_else(|| Error::NotContained("no simple path".into()))?;
    for e in &path {
        rest.remove(e);
    }
    pieces.push(path);
    while !rest.is_empty() {
        let mut best: Option<Vec<Slot>> = None;
        for v in rest.iter().map(|&e| g.arc(e).tail(lat)).collect::<BTreeSet<_>>() {
            if let Some(c) = shortest(lat, g, &rest, v, None) {
                if best.as_ref().is_none_or(|b| (c.len(), &c) < (b.len(), b)) {
                    best = Some(c);
                }
            }
        }
        let cycle = best.ok_or_else(|| Error::NotContained("remainder has no simple cycle".into()))?;
        for e in &cycle {
            rest.remove(e);
        }
        pieces.push(cycle);
    }
    Ok(pieces)
}

/// Shortest vertex-simple walk from `from` to `to` (a cycle back to `from`
/// when `to` is `None`) inside `avail`; cycles are reported starting at
/// their smallest slot.
fn shortest(lat: &Lattice, g: &PairedGraph, avail: &BTreeSet<Slot>, from: usize, to: Option<usize>) -> Option<Vec<Slot>> {
    fn dfs(
        lat: &Lattice,
        g: &PairedGraph,
        avail: &BTreeSet<Slot>,
        goal: usize,
        cycle: bool,
        here: usize,
        visited: &mut Vec<usize>,
        stack: &mut Vec<Slot>,
        best: &mut Option<Vec<Slot>>,
    ) {
        if let Some(b) = best {
            if stack.len() >= b.len() {
                return;
            }
        }
        for &e in avail {
            let a = g.arc(e);
            if a.tail(lat) != here {
                continue;
            }
            let h = a.head(lat);
            stack.push(e);
            if h == goal {
                let mut cand = stack.clone();
                if cycle {
                    let m = (0..cand.len()).min_by_key(|&i| cand[i]).unwrap();
                    cand.rotate_left(m);
                }
                if best.as_ref().is_none_or(|b| (cand.len(), &cand) < (b.len(), b)) {
                    *best = Some(cand);
                }
            } else if !visited.contains(&h) {
                visited.push(h);
                dfs(lat, g, avail, goal, cycle, h, visited, stack, best);
                visited.pop();
            }
            stack.pop();
        }
    }
    let mut best = None;
    let goal = to.unwrap_or(from);
    dfs(lat, g, avail, goal, to.is_none(), from, &mut vec![from], &mut Vec::new(), &mut best);
    best
}

/// Reverses `p` slot by slot (direction and layer) and repairs the pairing
/// at each interior vertex of each piece of the decomposition, one piece
/// after another. Where the two path edges were paired to each other they
/// stay paired, reversed. Otherwise, with `c` the partner of the incoming
/// path edge and `b` the partner of the outgoing one, the reversed outgoing
/// edge is paired with `c` and `b` with the reversed incoming edge.
pub fn surgical_switch(lat: &Lattice, g: &PairedGraph, p: &[Slot]) -> Result<PairedGraph> {
    let pieces = surgical_decomposition(lat, g, p)?;
    let mut out = g.clone();
    for (k, piece) in pieces.iter().enumerate() {
        let closed = k > 0;
        let n = piece.len();
        let steps = if closed { n } else { n - 1 };
        for i in 0..steps {
            let e_in = piece[i];
            let e_out = piece[(i + 1) % n];
            let v = g.arc(e_in).head(lat);
            if !g.is_paired(v) {
                continue;
            }
            let (_, pairing, _) = out.parts_mut();
            repair(&mut pairing[v], e_in, e_out)?;
        }
    }
    let (labels, _, boundary) = out.parts_mut();
    for s in p {
        let t = &mut labels[s.bond][s.index];
        *t = t.reversed();
    }
    *boundary = g.boundary().reversed();
    Ok(out)
}

fn repair(pi: &mut SitePairing, e_in: Slot, e_out: Slot) -> Result<()> {
    let broken = || Error::InvalidParameter("pairing lost a path edge".into());
    let c = pi.remove(&e_in).ok_or_else(broken)?;
    if c == e_out {
        pi.insert(e_out, e_in);
        return Ok(());
    }
    let b = pi.iter().find(|(_, &o)| o == e_out).map(|(&i, _)| i).ok_or_else(broken)?;
    pi.insert(e_out, c);
    pi.insert(b, e_in);
    Ok(())
}

/// Sites visited by a slot sequence, starting at the tail of the first slot.
pub fn walk_sites(lat: &Lattice, g: &PairedGraph, walk: &[Slot]) -> Vec<Site> {
    let mut v = Vec::with_capacity(walk.len() + 1);
    if let Some(&f) = walk.first() {
        v.push(lat.site(g.arc(f).tail(lat)));
    }
    v.extend(walk.iter().map(|&s| lat.site(g.arc(s).head(lat))));
    v
}

/// A paired path `x→a1→a2→y` and a paired loop `b1→a1→b2→b3→a2→b4→b1`
/// sharing `a1` and `a2`, surgically switched along `x→a1→b2→b3→a2→y`.
#[derive(Debug, Clone)]
pub struct FigureInstance {
    pub lattice: Lattice,
    pub before: PairedGraph,
    pub p: Vec<Slot>,
    pub after_trail: Vec<Site>,
    pub after_loop: Vec<Site>,
}

pub fn figure_instance() -> Result<FigureInstance> {
    let x = Site::at(0, 0, 0);
    let a1 = Site::at(1, 0, 0);
    let a2 = Site::at(2, 0, 0);
    let y = Site::at(3, 0, 0);
    let b1 = Site::at(1, -1, 0);
    let b2 = Site::at(1, 1, 0);
    let b3 = Site::at(2, 1, 0);
    let b4 = Site::at(2, -1, 0);
    let path = [x, a1, a2, y];
    let lp = [b1, a1, b2, b3, a2, b4, b1];
    let mut bonds = Vec::new();
    for w in path.windows(2).chain(lp.windows(2)) {
        bonds.push((w[0], w[1], int(1)));
    }
    let lat = Lattice::from_couplings([x, a1, a2, y, b1, b2, b3, b4], bonds)?;
    let edges: Vec<(Site, Site, u32)> = path.windows(2).chain(lp.windows(2)).map(|w| (w[0], w[1], 1)).collect();
    let flux = FluxConfig::from_edges(&lat, &edges)?;
    let labels = canonical_labels(&lat, &flux, &FluxConfig::empty(&lat))?;
    let slot = |a: Site, b: Site| -> Result<Slot> {
        let bond = lat.bond_between(lat.rank(a)?, lat.rank(b)?).ok_or_else(|| Error::NotContained(format!("{a}-{b}")))?;
        Ok(Slot { bond, index: 0 })
    };
    let mut pairing = vec![SitePairing::new(); lat.num_sites()];
    let path_slots: Vec<Slot> = path.windows(2).map(|w| slot(w[0], w[1])).collect::<Result<_>>()?;
    let loop_slots: Vec<Slot> = lp.windows(2).map(|w| slot(w[0], w[1])).collect::<Result<_>>()?;
    for i in 0..path_slots.len() - 1 {
        pairing[lat.rank(path[i + 1])?].insert(path_slots[i], path_slots[i + 1]);
    }
    let n = loop_slots.len();
    for i in 0..n {
        pairing[lat.rank(lp[i + 1])?].insert(loop_slots[i], loop_slots[(i + 1) % n]);
    }
    let mut paired = vec![true; lat.num_sites()];
    paired[lat.rank(x)?] = false;
    paired[lat.rank(y)?] = false;
    let before = PairedGraph::new(&lat, labels, pairing, paired, BoundarySpec::source_sink(x, y)?)?;
    let p = [x, a1, b2, b3, a2, y].windows(2).map(|w| slot(w[0], w[1])).collect::<Result<_>>()?;
    Ok(FigureInstance {
        lattice: lat,
        before,
        p,
        after_trail: vec![y, a2, b4, b1, a1, x],
        after_loop: vec![a1, a2, b3, b2, a1],
    })
}
