//! Regional weights: paired graphs restricted to the box `|z| ≤ N`, paired
//! on `|z| < N` away from the endpoints, weighted by the sum over every
//! global extension at a finite truncation.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux_graph::{enumerate_unguarded, BoundarySpec, FluxConfig};
use crate::lattice::{Lattice, Site};
use crate::rational::{ratio, Rational};

use super::{for_each_product, labelings, pairing_options, surgical_switch, PairedGraph, SitePairing, Slot, SlotType};

fn in_region(s: Site, n: i32) -> bool {
    s.norm().is_some_and(|r| r <= n)
}

fn in_interior(s: Site, n: i32) -> bool {
    s.norm().is_some_and(|r| r < n)
}

/// The regional graph seen by the box of radius `n`: labels on bonds with
/// both ends in the box, pairings at interior sites.
pub fn restrict(lat: &Lattice, g: &PairedGraph, n: i32) -> PairedGraph {
    let labels = lat
        .bonds()
        .iter()
        .zip(g.labels())
        .map(|(b, l)| if in_region(lat.site(b.a), n) && in_region(lat.site(b.b), n) { l.clone() } else { Vec::new() })
        .collect();
    let mut pairing = Vec::with_capacity(lat.num_sites());
    let mut paired = Vec::with_capacity(lat.num_sites());
    for z in 0..lat.num_sites() {
        let keep = g.is_paired(z) && in_interior(lat.site(z), n);
        paired.push(keep);
        pairing.push(if keep { g.pairing(z).clone() } else { SitePairing::new() });
    }
    PairedGraph::from_parts(labels, pairing, paired, g.boundary())
}

/// Labels and boundary of a regional graph: the class label for the
/// uniform and counting rules.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Projection {
    pub labels: Vec<Vec<SlotType>>,
    pub boundary: BoundarySpec,
}

pub fn projection(g: &PairedGraph) -> Projection {
    Projection { labels: g.labels().to_vec(), boundary: g.boundary() }
}

/// `C(G_N)` for every regional graph reachable within `max_edges` merged
/// edges, from both source-carrying layers: `δ` with `x→y` and a ghost-free
/// sourceless `0`, or a sourceless `δ` and a ghost-free `0` with `y→x`.
#[derive(Debug, Clone)]
pub struct RegionalLedger {
    pub n: i32,
    pub x: Site,
    pub y: Site,
    pub max_edges: u32,
    pub beta: Rational,
    /// `½ Σ w(n_δ) w(n_0)` over the enumerated layered pairs.
    pub expected_total: Rational,
    /// Global labelled paired graphs visited.
    pub visited: u64,
    entries: BTreeMap<PairedGraph, Rational>,
}

impl RegionalLedger {
    pub fn build(lat: &Lattice, x: Site, y: Site, n: i32, max_edges: u32, beta: &Rational) -> Result<Self> {
        let xy = BoundarySpec::source_sink(x, y)?;
        let (nx, ny) = (x.norm().unwrap_or(0), y.norm().unwrap_or(0));
        if nx + ny >= n {
            return Err(Error::InvalidParameter(format!("|x| + |y| = {} must be below N = {n}", nx + ny)));
        }
        for z in 0..lat.num_sites() {
            if in_interior(lat.site(z), n) && lat.incident(z).iter().any(|&(_, w)| !in_region(lat.site(w), n)) {
                return Err(Error::InvalidParameter(format!("interior site {} couples outside the box", lat.site(z))));
            }
        }
        let ghost_free = |v: Vec<FluxConfig>| v.into_iter().filter(|f| !f.touches_ghost(lat)).collect::<Vec<_>>();
        let sourced = enumerate_unguarded(lat, &xy, max_edges)?;
        let closed = enumerate_unguarded(lat, &BoundarySpec::Empty, max_edges)?;
        let closed_free = ghost_free(closed.clone());
        let reversed_free = ghost_free(enumerate_unguarded(lat, &xy.reversed(), max_edges)?);
        let mut jobs: Vec<(&FluxConfig, &FluxConfig, BoundarySpec)> = Vec::new();
        for (firsts, seconds, spec) in [(&sourced, &closed_free, xy), (&closed, &reversed_free, xy.reversed())] {
            for a in firsts {
                for b in seconds {
                    if a.total_edges() + b.total_edges() <= max_edges {
                        jobs.push((a, b, spec));
                    }
                }
            }
        }
        let parts: Vec<(BTreeMap<PairedGraph, Rational>, Rational, u64)> = jobs
            .par_iter()
            .map(|&(a, b, spec)| accumulate(lat, a, b, spec, n, beta))
            .collect::<Result<_>>()?;
        let mut entries: BTreeMap<PairedGraph, Rational> = BTreeMap::new();
        let mut expected_total = Rational::from_integer(0.into());
        let mut visited = 0;
        for (m, e, v) in parts {
            for (k, w) in m {
                *entries.entry(k).or_insert_with(|| Rational::from_integer(0.into())) += w;
            }
            expected_total += e;
            visited += v;
        }
        Ok(RegionalLedger { n, x, y, max_edges, beta: beta.clone(), expected_total, visited, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn c(&self, g: &PairedGraph) -> Option<&Rational> {
        self.entries.get(g)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PairedGraph, &Rational)> {
        self.entries.iter()
    }

    pub fn total(&self) -> Rational {
        self.entries.values().fold(Rational::from_integer(0.into()), |acc, w| acc + w)
    }

    pub fn classes(&self) -> BTreeMap<Projection, Vec<&PairedGraph>> {
        let mut m: BTreeMap<Projection, Vec<&PairedGraph>> = BTreeMap::new();
        for g in self.entries.keys() {
            m.entry(projection(g)).or_default().push(g);
        }
        m
    }

    /// Number of regional graphs sharing the projection of `g`.
    pub fn upsilon(&self, g: &PairedGraph) -> usize {
        let p = projection(g);
        self.entries.keys().filter(|h| projection(h) == p).count()
    }

    /// Class average of `C`. Every extension of a finite-volume graph is
    /// finitely paired, so the average runs over the whole class.
    pub fn d(&self, g: &PairedGraph) -> Result<Rational> {
        let p = projection(g);
        let class: Vec<&Rational> = self.entries.iter().filter(|(h, _)| projection(h) == p).map(|(_, w)| w).collect();
        if class.is_empty() {
            return Err(Error::EmptyClass);
        }
        let sum = class.iter().fold(Rational::from_integer(0.into()), |acc, w| acc + *w);
        Ok(sum / Rational::from_integer((class.len() as i64).into()))
    }

    /// Classes on which `C` is not constant.
    pub fn class_failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (p, members) in self.classes() {
            let first = &self.entries[members[0]];
            if members.iter().any(|m| &self.entries[*m] != first) {
                out.push(format!("C varies over a class of {} graphs ({:?})", members.len(), p.boundary));
            }
        }
        out
    }

    /// Coarse graphs whose weight differs from the sum over their
    /// refinements in `fine`.
    pub fn consistency_failures(&self, lat: &Lattice, fine: &RegionalLedger) -> Vec<String> {
        let mut sums: BTreeMap<PairedGraph, Rational> = BTreeMap::new();
        for (g, w) in &fine.entries {
            *sums.entry(restrict(lat, g, self.n)).or_insert_with(|| Rational::from_integer(0.into())) += w;
        }
        let mut out = Vec::new();
        let keys: BTreeSet<&PairedGraph> = sums.keys().chain(self.entries.keys()).collect();
        for k in keys {
            if sums.get(k) != self.entries.get(k) {
                out.push(format!("{}: {:?} versus {:?}", k.display(lat), self.entries.get(k), sums.get(k)));
            }
        }
        out
    }
}

/// Visits every labelling and pairing of one layered pair.
fn accumulate(
    lat: &Lattice,
    a: &FluxConfig,
    b: &FluxConfig,
    spec: BoundarySpec,
    n: i32,
    beta: &Rational,
) -> Result<(BTreeMap<PairedGraph, Rational>, Rational, u64)> {
    let options = labelings(lat, a, b)?;
    let expected = ratio(1, 2) * a.weight(lat, beta).value * b.weight(lat, beta).value;
    let mut paired = vec![true; lat.num_sites()];
    if let BoundarySpec::SourceSink(x, y) = spec {
        paired[lat.rank(x)?] = false;
        paired[lat.rank(y)?] = false;
    }
    let mut map: BTreeMap<PairedGraph, Rational> = BTreeMap::new();
    let mut visited = 0u64;
    let mut weight: Option<Rational> = None;
    let mut err = None;
    for_each_product(&options, |pick| {
        let labels: Vec<Vec<SlotType>> = pick.iter().map(|l| (*l).clone()).collect();
        let popts = match pairing_options(lat, &labels, &paired, spec) {
            Ok(p) => p,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        for_each_product(&popts, |pp| {
            let g = PairedGraph::from_parts(labels.clone(), pp.iter().map(|p| (*p).clone()).collect(), paired.clone(), spec);
            let w = weight.get_or_insert_with(|| g.weight(lat, beta)).clone();
            *map.entry(restrict(lat, &g, n)).or_insert_with(|| Rational::from_integer(0.into())) += w;
            visited += 1;
        });
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok((map, expected, visited))
}

#[derive(Debug, Clone, Serialize)]
pub struct SurgicalReport {
    pub n: i32,
    pub graphs: usize,
    pub switched: usize,
    pub c_equal: bool,
    pub upsilon_equal: bool,
    pub d_equal: bool,
    pub injective: bool,
    pub failures: Vec<String>,
}

impl SurgicalReport {
    pub fn passed(&self) -> bool {
        self.switched > 0 && self.c_equal && self.upsilon_equal && self.d_equal && self.injective && self.failures.is_empty()
    }
}

/// For every `x→y` regional graph of the ledger and every subgraph `P` of
/// its interior edges with boundary `x→y`: the surgical image is a `y→x`
/// regional graph of the ledger with the same `C`, the same class size and
/// the same `D`, and no two inputs share an image for the same `P`.
pub fn verify_surgical_weight_equality(lat: &Lattice, ledger: &RegionalLedger) -> Result<SurgicalReport> {
    let xy = BoundarySpec::source_sink(ledger.x, ledger.y)?;
    let mut class_size: BTreeMap<Projection, usize> = BTreeMap::new();
    let mut d_of: BTreeMap<Projection, Rational> = BTreeMap::new();
    for (p, members) in ledger.classes() {
        class_size.insert(p.clone(), members.len());
        let sum = members.iter().fold(Rational::from_integer(0.into()), |acc, m| acc + &ledger.entries[*m]);
        d_of.insert(p, sum / Rational::from_integer((members.len() as i64).into()));
    }
    let mut report = SurgicalReport {
        n: ledger.n,
        graphs: 0,
        switched: 0,
        c_equal: true,
        upsilon_equal: true,
        d_equal: true,
        injective: true,
        failures: Vec::new(),
    };
    let mut images: BTreeMap<(Vec<Slot>, PairedGraph), PairedGraph> = BTreeMap::new();
    for (g, cg) in &ledger.entries {
        if g.boundary() != xy {
            continue;
        }
        report.graphs += 1;
        let inner: Vec<Slot> = g
            .slots()
            .filter(|s| {
                let bd = &lat.bonds()[s.bond];
                in_interior(lat.site(bd.a), ledger.n) && in_interior(lat.site(bd.b), ledger.n)
            })
            .collect();
        for mask in 1u64..(1 << inner.len()) {
            let p: Vec<Slot> = (0..inner.len()).filter(|i| mask >> i & 1 == 1).map(|i| inner[i]).collect();
            let flux = FluxConfig::from_arcs(lat, p.iter().map(|&s| g.arc(s)));
            if !flux.satisfies(lat, &xy) {
                continue;
            }
            let f = surgical_switch(lat, g, &p)?;
            report.switched += 1;
            let Some(cf) = ledger.c(&f) else {
                report.failures.push(format!("image {} is not a regional graph", f.display(lat)));
                report.c_equal = false;
                continue;
            };
            if cf != cg {
                report.c_equal = false;
                report.failures.push(format!("C {} → {}: {cg} versus {cf}", g.display(lat), f.display(lat)));
            }
            let (pg, pf) = (projection(g), projection(&f));
            if class_size[&pg] != class_size[&pf] {
                report.upsilon_equal = false;
                report.failures.push(format!("class sizes {} versus {}", class_size[&pg], class_size[&pf]));
            }
            if d_of[&pg] != d_of[&pf] {
                report.d_equal = false;
                report.failures.push(format!("D {} versus {}", d_of[&pg], d_of[&pf]));
            }
            if let Some(prev) = images.insert((p, f), g.clone()) {
                if &prev != g {
                    report.injective = false;
                    report.failures.push(format!("two graphs share an image: {}", g.display(lat)));
                }
            }
        }
    }
    Ok(report)
}
