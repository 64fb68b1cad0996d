use std::collections::BTreeSet;

use loopflux::flux_graph::{enumerate, Arc, BoundarySpec, Dir, FluxConfig};
use loopflux::lattice::topology;
use loopflux::pairing::*;
use loopflux::rational::{int, ratio};
use loopflux::{Error, Lattice, Site};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn star(j: i64) -> Lattice {
    let c = Site::at(0, 0, 0);
    let leaves = [Site::at(1, 0, 0), Site::at(-1, 0, 0), Site::at(0, 1, 0), Site::at(0, -1, 0)];
    Lattice::from_couplings(std::iter::once(c).chain(leaves), leaves.iter().map(|&l| (c, l, int(j)))).unwrap()
}

#[test]
fn pairing_count_matches_enumeration() {
    let lat = star(1);
    let c = lat.rank(Site::at(0, 0, 0)).unwrap();
    for degs in [[1, 0, 0, 0], [1, 1, 0, 0], [2, 1, 0, 0], [1, 1, 1, 0], [1, 1, 1, 1], [2, 2, 0, 0], [4, 0, 0, 0]] {
        let mut f = FluxConfig::empty(&lat);
        for (b, &k) in degs.iter().enumerate() {
            f.add(Arc::new(b, Dir::Up), k);
            f.add(Arc::new(b, Dir::Down), k);
        }
        let labels = canonical_labels(&lat, &f, &FluxConfig::empty(&lat)).unwrap();
        let all = enumerate_pairings(&lat, &labels, BoundarySpec::Empty).unwrap();
        let product: num::BigInt =
            (0..lat.num_sites()).map(|z| pairing_count(&lat, &f, z).unwrap()).product();
        assert_eq!(num::BigInt::from(all.len()), product);
        let d: u32 = degs.iter().sum();
        assert_eq!(pairing_count(&lat, &f, c).unwrap(), loopflux::rational::factorial(d));
        let distinct: BTreeSet<_> = all.iter().collect();
        assert_eq!(distinct.len(), all.len());
    }
}

#[test]
fn pairing_count_rejects_imbalance() {
    let lat = star(1);
    let mut f = FluxConfig::empty(&lat);
    f.add(Arc::new(0, Dir::Up), 1);
    assert!(matches!(pairing_count(&lat, &f, 0), Err(Error::Imbalanced { .. })));
}

fn random_balanced(lat: &Lattice, rng: &mut ChaCha8Rng, spec: BoundarySpec) -> FluxConfig {
    let mut f = FluxConfig::empty(lat);
    if let BoundarySpec::SourceSink(x, y) = spec {
        let (mut at, goal) = (lat.rank(x).unwrap(), lat.rank(y).unwrap());
        while at != goal {
            let inc = lat.incident(at);
            let (b, nb) = inc[rng.random_range(0..inc.len())];
            f.add(Arc::between(lat, at, nb).map(|a| Arc::new(b, a.dir)).unwrap(), 1);
            at = nb;
        }
    }
    for _ in 0..rng.random_range(0..4) {
        let start = rng.random_range(0..lat.num_sites());
        let mut at = start;
        let len = rng.random_range(1..6);
        let mut walk = Vec::new();
        for _ in 0..len {
            let inc = lat.incident(at);
            let (_, nb) = inc[rng.random_range(0..inc.len())];
            walk.push((at, nb));
            at = nb;
        }
        // close the walk by retracing it
        let back: Vec<_> = walk.iter().rev().map(|&(a, b)| (b, a)).collect();
        walk.extend(back);
        for (a, b) in walk {
            f.add(Arc::between(lat, a, b).unwrap(), 1);
        }
    }
    f
}

fn random_paired(lat: &Lattice, rng: &mut ChaCha8Rng, spec: BoundarySpec) -> PairedGraph {
    let f = random_balanced(lat, rng, spec);
    let base = PairedGraph::single_layer(lat, &f, spec).unwrap();
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
    PairedGraph::new(lat, base.labels().to_vec(), pairing, base.paired_sites().to_vec(), spec).unwrap()
}

fn assert_linked(lat: &Lattice, g: &PairedGraph, walk: &[Slot], closed: bool) {
    for w in walk.windows(2) {
        assert_eq!(g.arc(w[0]).head(lat), g.arc(w[1]).tail(lat));
    }
    if closed {
        assert_eq!(g.arc(*walk.last().unwrap()).head(lat), g.arc(walk[0]).tail(lat));
    }
}

#[test]
fn random_decompositions_partition_the_edges() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let lat = topology::ghosted_strip(2, int(1));
    let (x, y) = (Site::at(0, 0, 0), Site::at(1, 1, 0));
    for i in 0..10_000 {
        let spec = if i % 2 == 0 { BoundarySpec::Empty } else { BoundarySpec::source_sink(x, y).unwrap() };
        let g = random_paired(&lat, &mut rng, spec);
        let d = decompose(&lat, &g).unwrap();
        let all: Vec<Slot> = g.slots().collect();
        assert_eq!(d.edges(), all);
        assert_eq!(d.trail.is_some(), spec != BoundarySpec::Empty);
        if let Some(t) = &d.trail {
            assert_linked(&lat, &g, t, false);
            assert_eq!(lat.site(g.arc(t[0]).tail(&lat)), x);
            assert_eq!(lat.site(g.arc(*t.last().unwrap()).head(&lat)), y);
        }
        for l in &d.loops {
            assert_linked(&lat, &g, l, true);
            for k in 0..l.len() {
                let (a, b) = (l[k], l[(k + 1) % l.len()]);
                let v = g.arc(a).head(&lat);
                if g.is_paired(v) {
                    assert_eq!(g.pairing(v)[&a], b);
                }
            }
        }
        if spec == BoundarySpec::Empty {
            let e = euler_decompose(&lat, &g.flux()).unwrap();
            let mut back = FluxConfig::empty(&lat);
            for c in &e.loops {
                let sites: BTreeSet<usize> = c.iter().map(|a| a.tail(&lat)).collect();
                assert_eq!(sites.len(), c.len(), "peeled cycles are simple");
                for a in c {
                    back.add(*a, 1);
                }
            }
            assert_eq!(back, g.flux());
        }
    }
}

#[test]
fn euler_decompose_rejects_sources() {
    let lat = topology::path(3, int(1));
    let f = FluxConfig::from_edges(&lat, &[(Site::at(0, 0, 0), Site::at(1, 0, 0), 1)]).unwrap();
    assert!(euler_decompose(&lat, &f).is_err());
}

/// Every paired graph with at most six edges built from a sourced `δ` layer
/// and a ghost-free sourceless `0` layer on the ghosted square.
fn layered_graphs(lat: &Lattice, xy: BoundarySpec) -> Vec<PairedGraph> {
    let firsts = enumerate(lat, &xy, 6).unwrap();
    let seconds: Vec<_> =
        enumerate(lat, &BoundarySpec::Empty, 6).unwrap().into_iter().filter(|f| !f.touches_ghost(lat)).collect();
    let mut out = Vec::new();
    for a in &firsts {
        for b in &seconds {
            if a.total_edges() + b.total_edges() > 6 {
                continue;
            }
            let options = labelings(lat, a, b).unwrap();
            let mut idx = vec![0usize; options.len()];
            loop {
                let labels: Vec<_> = options.iter().zip(&idx).map(|(o, &i)| o[i].clone()).collect();
                out.extend(enumerate_pairings(lat, &labels, xy).unwrap());
                let mut k = options.len();
                let mut done = true;
                while k > 0 {
                    k -= 1;
                    idx[k] += 1;
                    if idx[k] < options[k].len() {
                        done = false;
                        break;
                    }
                    idx[k] = 0;
                }
                if done {
                    break;
                }
            }
        }
    }
    out
}

#[test]
fn paired_switch_exhaustive() {
    let (lat, x, y) = loopflux::switching::undirected_instance();
    let xy = BoundarySpec::source_sink(x, y).unwrap();
    let beta = ratio(1, 3);
    let graphs = layered_graphs(&lat, xy);
    let (mut switched, mut refused) = (0, 0);
    let mut images = BTreeSet::new();
    for g in &graphs {
        match paired_switch(&lat, g) {
            Err(Error::NotSwitchable) => refused += 1,
            Err(e) => panic!("{e}"),
            Ok(f) => {
                switched += 1;
                assert_eq!(f.boundary(), xy.reversed());
                assert!(f.is_complete(&lat));
                assert!(f.layer(Layer::Delta).satisfies(&lat, &BoundarySpec::Empty));
                assert!(f.layer(Layer::Zero).satisfies(&lat, &xy.reversed()));
                assert!(!f.layer(Layer::Zero).touches_ghost(&lat));
                assert_eq!(f.weight(&lat, &beta), g.weight(&lat, &beta));
                assert_eq!(&paired_switch(&lat, &f).unwrap(), g);
                assert!(images.insert(f));
            }
        }
    }
    assert!(switched > 1000, "{switched}");
    assert!(refused > 0);
}

#[test]
fn surgery_along_a_self_avoiding_chain_is_the_paired_switch() {
    let (lat, x, y) = loopflux::switching::undirected_instance();
    let xy = BoundarySpec::source_sink(x, y).unwrap();
    let mut checked = 0;
    for g in layered_graphs(&lat, xy) {
        let Ok(sg) = extract_switch_graph(&lat, &g) else { continue };
        if sg.chains.len() != 1 {
            continue;
        }
        let chain = &sg.chains[0];
        let sites: BTreeSet<usize> = chain.iter().map(|&s| g.arc(s).tail(&lat)).collect();
        if sites.len() != chain.len() {
            continue;
        }
        assert_eq!(surgical_switch(&lat, &g, chain).unwrap(), paired_switch(&lat, &g).unwrap());
        checked += 1;
    }
    assert!(checked > 100);
}

#[test]
fn figure_instance_matches_the_drawing() {
    let fig = figure_instance().unwrap();
    let lat = &fig.lattice;
    let before = decompose(lat, &fig.before).unwrap();
    assert_eq!(before.loops.len(), 1);
    let after = surgical_switch(lat, &fig.before, &fig.p).unwrap();
    assert!(after.is_complete(lat));
    let d = decompose(lat, &after).unwrap();
    assert_eq!(walk_sites(lat, &after, d.trail.as_ref().unwrap()), fig.after_trail);
    assert_eq!(d.loops.len(), 1);
    let mut lp = walk_sites(lat, &after, &d.loops[0]);
    lp.pop();
    let start = lp.iter().position(|&s| s == fig.after_loop[0]).unwrap();
    lp.rotate_left(start);
    lp.push(lp[0]);
    assert_eq!(lp, fig.after_loop);
}

#[test]
fn surgery_rejects_foreign_subgraphs() {
    let fig = figure_instance().unwrap();
    let lat = &fig.lattice;
    assert!(surgical_switch(lat, &fig.before, &fig.p[..2]).is_err());
    let bad = vec![Slot { bond: 0, index: 5 }];
    assert!(matches!(surgical_switch(lat, &fig.before, &bad), Err(Error::NotContained(_))));
}

#[test]
fn regional_ledger_identities() {
    let lat = topology::ghosted_strip(3, ratio(1, 6));
    let (x, y) = (Site::at(0, 0, 0), Site::at(1, 0, 0));
    let beta = ratio(1, 2);
    let coarse = RegionalLedger::build(&lat, x, y, 2, 6, &beta).unwrap();
    let fine = RegionalLedger::build(&lat, x, y, 3, 6, &beta).unwrap();
    for l in [&coarse, &fine] {
        assert!(!l.is_empty());
        assert_eq!(l.total(), l.expected_total);
        assert_eq!(l.class_failures(), Vec::<String>::new());
        for (g, c) in l.iter().take(500) {
            assert_eq!(&l.d(g).unwrap(), c);
            let psi: num::BigInt = (0..lat.num_sites())
                .filter(|&z| g.is_paired(z))
                .map(|z| loopflux::rational::factorial(g.out_slots(&lat, z).len() as u32))
                .product();
            assert_eq!(num::BigInt::from(l.upsilon(g)), psi);
        }
        let r = verify_surgical_weight_equality(&lat, l).unwrap();
        assert!(r.passed(), "{:?}", &r.failures[..r.failures.len().min(5)]);
    }
    assert_eq!(coarse.consistency_failures(&lat, &fine), Vec::<String>::new());
    assert!(fine.len() > coarse.len());
}

#[test]
fn ledger_rejects_large_endpoints() {
    let lat = topology::ghosted_strip(3, ratio(1, 6));
    let r = RegionalLedger::build(&lat, Site::at(1, 0, 0), Site::at(-1, 0, 0), 2, 4, &ratio(1, 2));
    assert!(r.is_err());
}
