//! End-to-end acceptance run. Every criterion is evaluated at full size and
//! reported on its own line; the test fails if any criterion fails.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use loopflux::flux_graph::{truncated_f, truncated_z, BoundarySpec};
use loopflux::infrared::*;
use loopflux::lattice::topology;
use loopflux::mcmc::*;
use loopflux::pairing::*;
use loopflux::rational::{int, ratio, to_f64};
use loopflux::spin_oracle::{bessel_z, quadrature_two_point, quadrature_z, QuadratureSpec};
use loopflux::switching::*;
use loopflux::{BoundaryCondition, Lattice, Rational, Site};
use rayon::prelude::*;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn origin() -> Site {
    Site::at(0, 0, 0)
}

fn e1() -> Site {
    Site::at(1, 0, 0)
}

/// Couplings normalised so that the busiest site has unit row sum.
fn oracle_topologies() -> Vec<(&'static str, Lattice)> {
    vec![
        ("dumbbell", topology::dumbbell(int(1))),
        ("path3", topology::path(3, ratio(1, 2))),
        ("cycle4", topology::cycle(4, ratio(1, 2))),
    ]
}

fn betas() -> [(f64, Rational); 3] {
    [(0.1, ratio(1, 10)), (0.3, ratio(3, 10)), (0.5, ratio(1, 2))]
}

fn oracle_triangle() -> Outcome {
    let start = Instant::now();
    let (mut series_err, mut bessel_err) = (0.0f64, 0.0f64);
    for (name, lat) in oracle_topologies() {
        for (b, br) in betas() {
            let q = ok(quadrature_z(&lat, &ok(QuadratureSpec::new(64, b))?))?;
            let t = to_f64(&ok(truncated_z(&lat, &br, 16))?);
            let s = ok(bessel_z(&lat, b))?;
            series_err = series_err.max((t - q).abs() / q);
            bessel_err = bessel_err.max((s - q).abs() / q);
            ensure!((t - q).abs() / q <= 1e-8, "{name} β={b}: series {t} vs quadrature {q}");
            ensure!((s - q).abs() / q <= 1e-10, "{name} β={b}: bessel {s} vs quadrature {q}");
        }
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(60), "took {took:?}");
    Ok(format!("max rel err series {series_err:.1e}, bessel {bessel_err:.1e}, {took:.1?}"))
}

fn two_point_series() -> Outcome {
    let mut worst = 0.0f64;
    for (name, lat) in oracle_topologies() {
        let far = if name == "path3" { Site::at(2, 0, 0) } else { e1() };
        for y in [e1(), far] {
            for (b, br) in betas() {
                let q = ok(quadrature_two_point(&lat, &ok(QuadratureSpec::new(64, b))?, origin(), y))?;
                let f = ok(truncated_f(&lat, &br, origin(), y, 16))?;
                let z = ok(truncated_z(&lat, &br, 16))?;
                let s = 2.0 * to_f64(&(f / z));
                worst = worst.max((s - q).abs());
                ensure!((s - q).abs() <= 1e-8, "{name} y={y:?} β={b}: series {s} vs quadrature {q}");
            }
        }
    }
    let lat = topology::dumbbell(int(1));
    for (b, br) in betas() {
        let f = ok(truncated_f(&lat, &br, origin(), e1(), 16))?;
        let z = ok(truncated_z(&lat, &br, 16))?;
        let s = 2.0 * to_f64(&(f / z));
        let exact = puruspe::In(1, 2.0 * b) / puruspe::In(0, 2.0 * b);
        ensure!((s - exact).abs() <= 1e-9, "dumbbell β={b}: {s} vs I1/I0 {exact}");
    }
    Ok(format!("max abs err {worst:.1e}; dumbbell matches I1/I0"))
}

fn undirected_switching() -> Outcome {
    let start = Instant::now();
    let (lat, x, y) = undirected_instance();
    let r = ok(verify_undirected_bijection(&lat, x, y, 6, &ratio(1, 3)))?;
    ensure!(r.passed(), "{} failures, |Λ|={} |Γ|={}: {:?}", r.failures.len(), r.lambda, r.gamma, r.failures.first());
    ensure!(r.lambda > 0, "empty family");
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(300), "took {took:?}");
    Ok(format!("|Λ| = |Γ| = {} over {} blocks, {took:.1?}", r.lambda, r.blocks.len()))
}

fn adverse_witness() -> Outcome {
    let w = ok(adverse_example())?;
    ensure!(w.verify(), "witness fails re-verification");
    ensure!(w.g != w.f, "G = F");
    let gp = ok(directed_switch(&w.lattice, &w.g, &w.p))?.0;
    let fq = ok(directed_switch(&w.lattice, &w.f, &w.q))?.0;
    ensure!(gp == fq, "images differ");
    Ok(format!("P = {}, Q = {}", w.p.display(&w.lattice), w.q.display(&w.lattice)))
}

fn pairing_combinatorics() -> Outcome {
    let counts = ok(verify_pairing_counts(4))?;
    ensure!(counts.passed(), "{:?}", counts.failures.first());
    let lat = topology::ghosted_strip(2, int(1));
    let d = ok(verify_decompositions(&lat, origin(), Site::at(1, 1, 0), 20_000, 7))?;
    ensure!(d.passed(), "{:?}", d.failures.first());
    ensure!(d.samples - d.euler_samples >= 10_000 && d.euler_samples >= 10_000, "too few samples");
    Ok(format!(
        "{} degree patterns, {} decompositions ({} edges), {} Euler peelings",
        counts.configurations, d.samples, d.edges, d.euler_samples
    ))
}

fn paired_switching() -> Outcome {
    let (lat, x, y) = undirected_instance();
    let r = ok(verify_paired_switch(&lat, x, y, 6, &ratio(1, 3)))?;
    ensure!(r.passed(), "{} failures: {:?}", r.failures.len(), r.failures.first());
    Ok(format!("{} graphs, {} switched, {} not switchable", r.graphs, r.switched, r.refused))
}

fn surgical_ledger() -> Outcome {
    let start = Instant::now();
    let lat = topology::ghosted_strip(3, ratio(1, 6));
    let beta = ratio(1, 2);
    let coarse = ok(RegionalLedger::build(&lat, origin(), e1(), 2, 6, &beta))?;
    let fine = ok(RegionalLedger::build(&lat, origin(), e1(), 3, 6, &beta))?;
    let mut switched = 0;
    for l in [&coarse, &fine] {
        ensure!(!l.is_empty(), "empty ledger at N={}", l.n);
        ensure!(l.total() == l.expected_total, "class sums differ from the global total at N={}", l.n);
        let f = l.class_failures();
        ensure!(f.is_empty(), "C not constant per class at N={}: {:?}", l.n, f.first());
        for (g, c) in l.iter() {
            ensure!(&ok(l.d(g))? == c, "D differs from C at N={}", l.n);
        }
        let r = ok(verify_surgical_weight_equality(&lat, l))?;
        ensure!(r.passed(), "surgical report at N={}: {:?}", l.n, r.failures.first());
        switched += r.switched;
    }
    let c = coarse.consistency_failures(&lat, &fine);
    ensure!(c.is_empty(), "refinement: {:?}", c.first());
    let fig = ok(figure_instance())?;
    let after = ok(surgical_switch(&fig.lattice, &fig.before, &fig.p))?;
    let d = ok(decompose(&fig.lattice, &after))?;
    let trail = d.trail.as_ref().ok_or("figure image has no trail")?;
    ensure!(walk_sites(&fig.lattice, &after, trail) == fig.after_trail, "figure trail differs");
    ensure!(d.loops.len() == 1, "figure image has {} loops", d.loops.len());
    let mut lp = walk_sites(&fig.lattice, &after, &d.loops[0]);
    lp.pop();
    let at = lp.iter().position(|&s| s == fig.after_loop[0]).ok_or("figure loop misses its start")?;
    lp.rotate_left(at);
    lp.push(lp[0]);
    ensure!(lp == fig.after_loop, "figure loop differs");
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(600), "took {took:?}");
    Ok(format!(
        "{} + {} regional graphs, {} classes at N=2, {switched} surgical images, {took:.1?}",
        coarse.len(),
        fine.len(),
        coarse.classes().len()
    ))
}

fn green_function() -> Outcome {
    let spec = GreenSpec::default();
    let g0 = ok(green_value(&spec, [0, 0, 0]))?;
    ensure!(g0.delta <= 1e-4, "schemes differ by {}", g0.delta);
    ensure!((g0.value() - 1.5164).abs() <= 1e-3, "G(0) = {}", g0.value());
    let mut prev = g0.value();
    for r in 1..=6 {
        let g = ok(green_value(&spec, [r, 0, 0]))?.value();
        ensure!(g < prev, "G(r e1) not decreasing at r={r}: {g} >= {prev}");
        prev = g;
    }
    ensure!(j_hat([0.0; 3]) == 1.0, "Ĵ(0) = {}", j_hat([0.0; 3]));
    let pi = std::f64::consts::PI;
    ensure!(j_hat([pi; 3]) == -1.0, "Ĵ(π,π,π) = {}", j_hat([pi; 3]));
    Ok(format!("G(0) = {:.8} (midpoint {:.8}, nested {:.8})", g0.value(), g0.midpoint, g0.nested))
}

fn infrared_bound() -> Outcome {
    let lat = ok(Lattice::cubic(4, BoundaryCondition::Periodic))?;
    let spec = GreenSpec::default();
    let reports = (0..20u64)
        .into_par_iter()
        .map(|s| {
            let e = estimate_mn(&lat, 0.6, 1, &McSpec::new(20_000, 2_000, 100, 1000 + s)?)?;
            bound_report(&spec, 0.6, 1, &e)
        })
        .collect::<Result<Vec<_>, _>>();
    let reports = ok(reports)?;
    let exceed = reports.iter().filter(|r| !r.passed).count();
    ensure!(exceed <= 2, "{exceed} of 20 seeds exceed the bound");
    let worst = reports.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    Ok(format!(
        "lhs ≈ {:.4}, rhs {:.4}, smallest margin {worst:.4}, {exceed} of 20 exceed",
        reports[0].lhs, reports[0].rhs
    ))
}

fn inequalities() -> Outcome {
    let spec = ok(McSpec::new(20_000, 2_000, 100, 7))?;
    let r = ok(inequality_suite(&[2, 3], &[0.2, 0.4, 0.6], origin(), e1(), &spec))?;
    ensure!(r.passed(), "{:?}", r.failures());
    let zero = ok(inequality_suite(&[2], &[0.0], origin(), e1(), &spec))?;
    ensure!(zero.passed(), "β=0: {:?}", zero.failures());
    let free = ok(Lattice::cubic(2, BoundaryCondition::Free))?;
    let m = ok(estimate_mn(&free, 0.0, 1, &spec))?;
    ensure!((m.mean - 1.0 / 27.0).abs() <= 3.0 * m.stderr, "β=0 box average {m:?}");
    let plus = ok(Lattice::cubic(2, BoundaryCondition::Plus))?;
    let mag = ok(estimate_mag(&plus, 0.0, origin(), &spec))?;
    ensure!(mag.mean.abs() <= 3.0 * mag.stderr, "β=0 magnetisation {mag:?}");
    Ok(format!("{} checks hold at 3σ; β=0 sanity values hold", r.checks.len()))
}

fn worm_probe() -> Outcome {
    let lat = ok(Lattice::cubic(3, BoundaryCondition::Free))?;
    let run = || -> Result<(Vec<loopflux::FluxConfig>, u64), String> {
        let mut chain = ok(WormChain::new(&lat, 0.3, 5))?;
        let mut states = Vec::new();
        let mut violations = 0u64;
        for i in 1..=1_000_000u64 {
            chain.step();
            if !chain.state().flux.satisfies(&lat, &BoundarySpec::Empty) {
                violations += 1;
            }
            if i % 1000 == 0 {
                states.push(chain.state().flux.clone());
            }
        }
        Ok((states, violations))
    };
    let (states, violations) = run()?;
    ensure!(violations == 0, "{violations} unbalanced states");
    let r = ok(loop_structure_probe(&lat, &states, 64, 3))?;
    ensure!(r.monotone(), "fraction not monotone");
    ensure!(r.complete, "fraction does not reach 1");
    let terminal = r.fraction.iter().find(|&&(l, _)| l >= r.longest).map(|&(_, f)| f);
    ensure!(terminal == Some(1.0), "terminal fraction {terminal:?}");
    let again = ok(loop_structure_probe(&lat, &run()?.0, 64, 3))?;
    ensure!(again == r, "probe not reproducible");
    Ok(format!(
        "10^6 steps balanced; {} states, median loop {:?}, longest {}",
        states.len(),
        r.median,
        r.longest
    ))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("oracle triangle", oracle_triangle),
        ("two-point series", two_point_series),
        ("undirected switching", undirected_switching),
        ("directed adverse witness", adverse_witness),
        ("pairing combinatorics", pairing_combinatorics),
        ("paired switching", paired_switching),
        ("surgical switching and ledger", surgical_ledger),
        ("green function", green_function),
        ("infrared bound", infrared_bound),
        ("inequality suite", inequalities),
        ("worm probe", worm_probe),
    ];
    let mut failed = Vec::new();
    let mut out = std::io::stdout();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let line = match &outcome {
            Ok(detail) => format!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => format!("criterion {:>2} FAIL  {name}: {why}", i + 1),
        };
        writeln!(out, "{line}").unwrap();
        out.flush().unwrap();
        if outcome.is_err() {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
