//! Exhaustive and randomised checks of the pairing machinery, shared by the
//! command-line driver and the test suites.

use std::collections::BTreeSet;

use num::bigint::BigInt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux_graph::{enumerate, Arc, BoundarySpec, FluxConfig};
use crate::lattice::{Lattice, Site};
use crate::rational::{factorial, int, Rational};

use super::{
    canonical_labels, decompose, enumerate_pairings, euler_decompose, for_each_product, labelings, pairing_count, paired_switch,
    Layer, PairedGraph, SitePairing, Slot,
};

/// Every paired graph with at most `max_edges` edges built from a `δ` layer
/// with boundary `xy` and a ghost-free sourceless `0` layer.
pub fn layered_graphs(lat: &Lattice, xy: BoundarySpec, max_edges: u32) -> Result<Vec<PairedGraph>> {
    let firsts = enumerate(lat, &xy, max_edges)?;
    let seconds: Vec<_> =
        enumerate(lat, &BoundarySpec::Empty, max_edges)?.into_iter().filter(|f| !f.touches_ghost(lat)).collect();
    let mut out = Vec::new();
    for a in &firsts {
        for b in &seconds {
            if a.total_edges() + b.total_edges() > max_edges {
                continue;
            }
            let options = labelings(lat, a, b)?;
            let mut err = None;
            for_each_product(&options, |pick| {
                let labels: Vec<_> = pick.iter().map(|l| (*l).clone()).collect();
                match enumerate_pairings(lat, &labels, xy) {
                    Ok(gs) => out.extend(gs),
                    Err(e) => err = Some(e),
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct PairingCountReport {
    pub configurations: usize,
    pub failures: Vec<String>,
}

impl PairingCountReport {
    pub fn passed(&self) -> bool {
        self.configurations > 0 && self.failures.is_empty()
    }
}

/// A centre joined to four leaves; every directed multiplicity pattern with
/// centre degree at most `max_degree` is checked against the enumerated
/// matchings.
pub fn verify_pairing_counts(max_degree: u32) -> Result<PairingCountReport> {
    if max_degree > 4 {
        return Err(Error::CostGuard { guard: "pairing_degree", detail: format!("{max_degree} exceeds 4") });
    }
    let c = Site::at(0, 0, 0);
    let leaves = [Site::at(1, 0, 0), Site::at(-1, 0, 0), Site::at(0, 1, 0), Site::at(0, -1, 0)];
    let lat = Lattice::from_couplings(std::iter::once(c).chain(leaves), leaves.iter().map(|&l| (c, l, int(1))))?;
    let centre = lat.rank(c)?;
    let mut configurations = 0;
    let mut failures = Vec::new();
    let k = max_degree + 1;
    // outs[b] is the centre→leaf multiplicity on bond b, ins[b] the reverse
    for code in 0..k.pow(8) {
        let digits: Vec<u32> = (0..8).map(|i| code / k.pow(i) % k).collect();
        let (outs, ins) = digits.split_at(4);
        let d: u32 = outs.iter().sum();
        if d != ins.iter().sum::<u32>() || d > max_degree {
            continue;
        }
        let mut f = FluxConfig::empty(&lat);
        for (b, &leaf) in leaves.iter().enumerate() {
            let l = lat.rank(leaf)?;
            f.add(Arc::between(&lat, centre, l).expect("star bond"), outs[b]);
            f.add(Arc::between(&lat, l, centre).expect("star bond"), ins[b]);
        }
        configurations += 1;
        let count = pairing_count(&lat, &f, centre)?;
        if count != factorial(d) {
            failures.push(format!("{f:?}: count {count} != {d}!"));
        }
        // the full enumeration needs every leaf balanced as well
        if (0..4).any(|b| outs[b] != ins[b]) {
            continue;
        }
        let labels = canonical_labels(&lat, &f, &FluxConfig::empty(&lat))?;
        let all = enumerate_pairings(&lat, &labels, BoundarySpec::Empty)?;
        let mut product = BigInt::from(1);
        for z in 0..lat.num_sites() {
            product *= pairing_count(&lat, &f, z)?;
        }
        let distinct: BTreeSet<_> = all.iter().collect();
        if BigInt::from(all.len()) != product || distinct.len() != all.len() {
            failures.push(format!("{f:?}: {} matchings, expected {product}", all.len()));
        }
    }
    Ok(PairingCountReport { configurations, failures })
}

/// A balanced configuration: an optional random walk from `x` to `y` plus
/// random closed walks, each closed by retracing it.
pub fn random_flux(lat: &Lattice, rng: &mut ChaCha8Rng, spec: BoundarySpec) -> Result<FluxConfig> {
    let mut f = FluxConfig::empty(lat);
    let step = |at: usize, rng: &mut ChaCha8Rng| {
        let inc = lat.incident(at);
        inc[rng.random_range(0..inc.len())].1
    };
    if let BoundarySpec::SourceSink(x, y) = spec {
        let (mut at, goal) = (lat.rank(x)?, lat.rank(y)?);
        while at != goal {
            let nb = step(at, rng);
            f.add(Arc::between(lat, at, nb).expect("incident pair"), 1);
            at = nb;
        }
    }
    for _ in 0..rng.random_range(0..4) {
        let mut at = rng.random_range(0..lat.num_sites());
        for _ in 0..rng.random_range(1..6) {
            let nb = step(at, rng);
            f.add(Arc::between(lat, at, nb).expect("incident pair"), 1);
            f.add(Arc::between(lat, nb, at).expect("incident pair"), 1);
            at = nb;
        }
    }
    Ok(f)
}

/// [`random_flux`] with a uniformly random pairing at every paired site.
pub fn random_paired(lat: &Lattice, rng: &mut ChaCha8Rng, spec: BoundarySpec) -> Result<PairedGraph> {
    let f = random_flux(lat, rng, spec)?;
    let base = PairedGraph::single_layer(lat, &f, spec)?;
    let mut pairing = Vec::new();
    for z in 0..lat.num_sites() {
        if !base.is_paired(z) {
            pairing.push(SitePairing::new());
            continue;
        }
        let mut outs = base.out_slots(lat, z);
        outs.shuffle(rng);
        pairing.push(base.in_slots(lat, z).into_iter().zip(outs).collect());
    }
    PairedGraph::new(lat, base.labels().to_vec(), pairing, base.paired_sites().to_vec(), spec)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecomposeReport {
    pub samples: usize,
    pub edges: usize,
    pub euler_samples: usize,
    pub failures: Vec<String>,
}

impl DecomposeReport {
    pub fn passed(&self) -> bool {
        self.samples > 0 && self.failures.is_empty()
    }
}

fn linked(lat: &Lattice, g: &PairedGraph, walk: &[Slot], closed: bool) -> bool {
    let ok = walk.windows(2).all(|w| g.arc(w[0]).head(lat) == g.arc(w[1]).tail(lat));
    ok && (!closed || g.arc(*walk.last().unwrap_or(&walk[0])).head(lat) == g.arc(walk[0]).tail(lat))
}

/// Random paired graphs, alternating between sourceless and `x→y`
/// boundaries: the decomposition partitions the slots, follows the pairing
/// and has a trail exactly when there is a source. Sourceless samples are
/// also peeled into simple cycles that sum back to the configuration.
pub fn verify_decompositions(lat: &Lattice, x: Site, y: Site, samples: usize, seed: u64) -> Result<DecomposeReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xy = BoundarySpec::source_sink(x, y)?;
    let mut report = DecomposeReport { samples, edges: 0, euler_samples: 0, failures: Vec::new() };
    for i in 0..samples {
        let spec = if i % 2 == 0 { BoundarySpec::Empty } else { xy };
        let g = random_paired(lat, &mut rng, spec)?;
        report.edges += g.num_edges();
        let d = decompose(lat, &g)?;
        let mut bad = Vec::new();
        if d.edges() != g.slots().collect::<Vec<_>>() {
            bad.push("slots not partitioned");
        }
        if d.trail.is_some() != (spec != BoundarySpec::Empty) {
            bad.push("trail presence");
        }
        if let Some(t) = &d.trail {
            let ends = lat.site(g.arc(t[0]).tail(lat)) == x && lat.site(g.arc(t[t.len() - 1]).head(lat)) == y;
            if !linked(lat, &g, t, false) || !ends {
                bad.push("trail not an x→y walk");
            }
        }
        for l in &d.loops {
            let follows = (0..l.len()).all(|k| {
                let (a, b) = (l[k], l[(k + 1) % l.len()]);
                let v = g.arc(a).head(lat);
                !g.is_paired(v) || g.pairing(v).get(&a) == Some(&b)
            });
            if !linked(lat, &g, l, true) || !follows {
                bad.push("loop does not follow the pairing");
            }
        }
        if spec == BoundarySpec::Empty {
            report.euler_samples += 1;
            let e = euler_decompose(lat, &g.flux())?;
            let mut back = FluxConfig::empty(lat);
            for c in &e.loops {
                let sites: BTreeSet<usize> = c.iter().map(|a| a.tail(lat)).collect();
                if sites.len() != c.len() {
                    bad.push("peeled cycle not simple");
                }
                for a in c {
                    back.add(*a, 1);
                }
            }
            if back != g.flux() {
                bad.push("peeled cycles do not cover the edges");
            }
        }
        if !bad.is_empty() {
            report.failures.push(format!("sample {i}: {}: {}", bad.join(", "), g.display(lat)));
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct PairedSwitchReport {
    pub max_edges: u32,
    pub graphs: usize,
    pub switched: usize,
    pub refused: usize,
    pub failures: Vec<String>,
}

impl PairedSwitchReport {
    pub fn passed(&self) -> bool {
        self.switched > 0 && self.failures.is_empty()
    }
}

/// Every layered paired graph with boundary `x→y` and at most `max_edges`
/// edges: switchable ones map to a `y→x` graph with a sourceless `δ` layer
/// and a ghost-free `0` layer, the map is an involution, weights agree exactly and images
/// are distinct.
pub fn verify_paired_switch(lat: &Lattice, x: Site, y: Site, max_edges: u32, beta: &Rational) -> Result<PairedSwitchReport> {
    let xy = BoundarySpec::source_sink(x, y)?;
    let graphs = layered_graphs(lat, xy, max_edges)?;
    let mut report = PairedSwitchReport { max_edges, graphs: graphs.len(), switched: 0, refused: 0, failures: Vec::new() };
    let mut images = BTreeSet::new();
    for g in &graphs {
        let f = match paired_switch(lat, g) {
            Err(Error::NotSwitchable) => {
                report.refused += 1;
                continue;
            }
            Err(e) => return Err(e),
            Ok(f) => f,
        };
        report.switched += 1;
        let mut bad = Vec::new();
        if f.boundary() != xy.reversed() {
            bad.push("boundary not reversed");
        }
        if !f.is_complete(lat)
            || !f.layer(Layer::Delta).satisfies(lat, &BoundarySpec::Empty)
            || !f.layer(Layer::Zero).satisfies(lat, &xy.reversed())
            || f.layer(Layer::Zero).touches_ghost(lat)
        {
            bad.push("image layers malformed");
        }
        if f.weight(lat, beta) != g.weight(lat, beta) {
            bad.push("weight changed");
        }
        if paired_switch(lat, &f).ok().as_ref() != Some(g) {
            bad.push("not an involution");
        }
        if !images.insert(f) {
            bad.push("image repeated");
        }
        if !bad.is_empty() {
            report.failures.push(format!("{}: {}", bad.join(", "), g.display(lat)));
        }
    }
    Ok(report)
}
