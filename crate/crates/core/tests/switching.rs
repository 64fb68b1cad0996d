use loopflux::flux_graph::{enumerate, BoundarySpec};
use loopflux::lattice::topology;
use loopflux::rational::{int, ratio};
use loopflux::switching::*;
use proptest::prelude::*;

#[test]
fn undirected_bijection_on_square_with_ghost() {
    let (lat, x, y) = undirected_instance();
    let r = verify_undirected_bijection(&lat, x, y, 6, &ratio(1, 3)).unwrap();
    assert!(r.failures.is_empty(), "{:?}", r.failures);
    assert!(r.lambda > 0);
    assert_eq!(r.lambda, r.gamma);
    assert!(r.weights_equal);
    assert_eq!(r.blocks.iter().map(|b| b.lambda).sum::<usize>(), r.lambda);
}

#[test]
fn adverse_witness_is_found_and_verified() {
    let w = adverse_example().unwrap();
    assert!(w.verify());
    assert_ne!(w.g, w.f);
    let lat = &w.lattice;
    let gp = directed_switch(lat, &w.g, &w.p).unwrap().0;
    let fq = directed_switch(lat, &w.f, &w.q).unwrap().0;
    assert_eq!(gp, fq);
    assert!(w.g.contains(&w.p) && !w.f.contains(&w.p));
    assert!(w.f.contains(&w.q) && !w.g.contains(&w.q));
}

#[test]
fn directed_union_is_not_preserved() {
    let w = adverse_example().unwrap();
    let before = w.g.union().unwrap();
    let after = w.image.union().unwrap();
    assert_ne!(before, after);
}

/// Every sourced pair with at most six edges on the adverse lattice, every
/// ghost-free path it contains: edge count, boundary swap and inverse.
#[test]
fn directed_switch_exhaustive() {
    let (lat, x, y) = adverse_lattice();
    let xy = BoundarySpec::source_sink(x, y).unwrap();
    let paths = directed_paths(&lat, x, y).unwrap();
    let firsts = enumerate(&lat, &xy, 6).unwrap();
    let seconds = enumerate(&lat, &BoundarySpec::Empty, 6).unwrap();
    let mut checked = 0;
    for a in &firsts {
        for b in &seconds {
            if a.total_edges() + b.total_edges() > 6 {
                continue;
            }
            let pair = DirectedPair { first: a.clone(), second: b.clone() };
            for p in &paths {
                if !pair.contains(p) {
                    continue;
                }
                let (img, back) = directed_switch(&lat, &pair, p).unwrap();
                assert_eq!(img.total_edges(), pair.total_edges());
                assert!(img.first.satisfies(&lat, &BoundarySpec::Empty));
                assert!(img.second.satisfies(&lat, &xy.reversed()));
                assert_eq!(img.weight(&lat, &ratio(1, 2)), pair.weight(&lat, &ratio(1, 2)));
                assert_eq!(directed_switch_sided(&lat, &img, &back).unwrap(), pair);
                checked += 1;
            }
        }
    }
    assert!(checked > 100);
}

fn random_pair(bonds: usize) -> impl Strategy<Value = UndirectedPair> {
    proptest::collection::vec(0u8..3, bonds).prop_map(|v| UndirectedPair {
        first: v.iter().enumerate().filter(|(_, &c)| c == 1).map(|(b, _)| b).collect(),
        second: v.iter().enumerate().filter(|(_, &c)| c == 2).map(|(b, _)| b).collect(),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn undirected_switch_conserves_union(pair in random_pair(8), which in 0usize..4) {
        let lat = topology::cycle(8, int(1));
        let paths = undirected_paths(&lat, loopflux::Site::at(0, 0, 0), loopflux::Site::at(4, 0, 0)).unwrap();
        let mut path = paths[which % paths.len()].clone();
        if which >= 2 {
            path.bonds.truncate(2);
        }
        // the path must be inside the union before switching
        let mut pair = pair;
        for b in path.edge_set() {
            if !pair.first.contains(&b) && !pair.second.contains(&b) {
                pair.second.insert(b);
            }
        }
        let img = undirected_switch(&lat, &pair, &path).unwrap();
        prop_assert_eq!(img.union(), pair.union());
        prop_assert_eq!(undirected_switch(&lat, &img, &path).unwrap(), pair);
    }
}

#[test]
fn ghost_path_rejected() {
    let (lat, _, _) = undirected_instance();
    let g = lat.ghost().unwrap();
    let bond = lat.incident(g)[0].0;
    let path = UPath { bonds: vec![bond], delta_avoiding: false };
    let pair = UndirectedPair { first: [bond].into_iter().collect(), second: Default::default() };
    assert!(undirected_switch(&lat, &pair, &path).is_err());
}
