mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use loopflux::flux_graph::{truncated_f, truncated_z};
use loopflux::infrared::{bound_report, green_table, min_gap, GreenSpec};
use loopflux::lattice::topology;
use loopflux::mcmc::{self, Estimate, McSpec};
use loopflux::pairing::{self, RegionalLedger};
use loopflux::rational::{int, parse_rational, ratio, to_f64};
use loopflux::spin_oracle::{self, QuadratureSpec};
use loopflux::switching;
use loopflux::{BoundaryCondition, Error, Lattice, Rational, Site};

use config::{parse_site, LatticeConfig};

const SCHEMA: u64 = 1;

#[derive(Parser)]
#[command(name = "loopflux", version, about = "Verification suites for the directed random-path representation of the XY model")]
struct Cli {
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quadrature partition function and two-point function.
    Oracle(OracleArgs),
    /// Truncated flux-configuration series against the quadrature oracle.
    Series(SeriesArgs),
    /// Exhaustive checks of the switching maps.
    SwitchVerify(SwitchArgs),
    /// Pairing, decomposition, paired switching and regional ledger checks.
    PairingVerify(PairingArgs),
    /// Lattice Green function by two quadrature schemes.
    Infrared(InfraredArgs),
    /// Infrared bound against a box-average estimate from `mc --estimator mn`.
    InfraredBound(BoundArgs),
    /// Metropolis estimators and correlation inequalities.
    Mc(McArgs),
    /// Loop-length statistics of worm-sampled sourceless configurations.
    Probe(ProbeArgs),
    /// Every suite at modest size in one report.
    Report(ReportArgs),
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    beta: String,
    #[arg(long, default_value_t = 64)]
    points: usize,
}

#[derive(Args)]
struct SeriesArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    beta: String,
    #[arg(long)]
    max_edges: u32,
    /// Source and sink, e.g. `--two-point 0,0,0 1,0,0`; defaults to the config's x and y.
    #[arg(long, num_args = 2, value_names = ["X", "Y"])]
    two_point: Option<Vec<String>>,
    #[arg(long, default_value_t = 64)]
    points: usize,
    /// Fail (exit 1) when the series misses the oracle by more than this.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SwitchMode {
    Undirected,
    Directed,
    Adverse,
}

#[derive(Args)]
struct SwitchArgs {
    #[arg(long, value_enum)]
    mode: SwitchMode,
    #[arg(long, default_value_t = 6)]
    max_edges: u32,
    #[arg(long, default_value = "1/3")]
    beta: String,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
enum PairingCheck {
    Psi,
    Decompose,
    Switch,
    Surgical,
    Ledger,
    Upsilon,
}

#[derive(Args)]
struct PairingArgs {
    #[arg(long, default_value_t = 2)]
    region: i32,
    #[arg(long, default_value_t = 6)]
    max_edges: u32,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "psi,decompose,switch,surgical,ledger,upsilon")]
    checks: Vec<PairingCheck>,
    /// Random graphs for the decomposition check.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Required by the decomposition check.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "1/2")]
    beta: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct InfraredArgs {
    #[arg(long, default_value_t = 64)]
    grid: usize,
    #[arg(long, default_value_t = 6)]
    levels: u32,
    #[arg(long, default_value_t = 6)]
    table_r: i32,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    n: i32,
    /// JSON report written by `loopflux mc --estimator mn`.
    #[arg(long)]
    mc: PathBuf,
    #[arg(long, default_value_t = 64)]
    grid: usize,
    #[arg(long, default_value_t = 6)]
    levels: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum Estimator {
    Twopoint,
    Mn,
    Mag,
    Inequalities,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 20_000)]
    sweeps: usize,
    #[arg(long, default_value_t = 2_000)]
    burn_in: usize,
    #[arg(long, default_value_t = 100)]
    batches: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum)]
    estimator: Estimator,
    /// Box radius for the `mn` estimator.
    #[arg(long, default_value_t = 1)]
    n: i32,
    /// Box radii for the inequality suite.
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    radii: Vec<i32>,
    /// Inverse temperatures for the inequality suite.
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6")]
    betas: Vec<f64>,
}

#[derive(Args)]
struct ProbeArgs {
    /// Lattice; defaults to the free box of radius 3.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    steps: u64,
    #[arg(long)]
    cap: usize,
    /// Steps between recorded states.
    #[arg(long, default_value_t = 1000)]
    every: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct ReportArgs {
    /// Run every suite.
    #[arg(long)]
    all: bool,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    max_edges: u32,
    #[arg(long, default_value_t = 2_000)]
    sweeps: usize,
}

/// A finished run: the report body and whether every check held.
struct Outcome {
    body: Body,
    passed: bool,
}

enum Body {
    Json(Value),
    Csv(String),
}

fn rational(text: &str) -> loopflux::Result<(Rational, f64)> {
    let r = parse_rational(text)?;
    let f = to_f64(&r);
    if f < 0.0 {
        return Err(Error::InvalidParameter(format!("beta must be nonnegative, got {text}")));
    }
    Ok((r, f))
}

/// Rounds every float to 12 significant digits so that reports are stable
/// under last-bit noise in formatting.
fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            let r: f64 = format!("{x:.11e}").parse().unwrap_or(x);
            *v = serde_json::Number::from_f64(r).map(Value::Number).unwrap_or(Value::Null);
        }
        Value::Array(a) => a.iter_mut().for_each(round_floats),
        Value::Object(o) => o.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn report(command: &str, passed: bool, fields: Value) -> Outcome {
    let mut map = Map::new();
    map.insert("schema".into(), json!(SCHEMA));
    map.insert("command".into(), json!(command));
    map.insert("passed".into(), json!(passed));
    if let Value::Object(f) = fields {
        map.extend(f);
    }
    let mut v = Value::Object(map);
    round_floats(&mut v);
    Outcome { body: Body::Json(v), passed }
}

fn to_value<T: serde::Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("reports serialise")
}

fn oracle(a: &OracleArgs) -> loopflux::Result<Outcome> {
    let cfg = LatticeConfig::load(&a.config)?;
    let (_, beta) = rational(&a.beta)?;
    let spec = QuadratureSpec::new(a.points, beta)?;
    let pairs: Vec<(Site, Site)> = cfg.pair().ok().into_iter().collect();
    let magnet = cfg.x.filter(|_| cfg.lattice.has_ghost());
    let r = spin_oracle::oracle(&cfg.lattice, &spec, &pairs, magnet)?;
    let two_point: Vec<Value> =
        r.two_point.iter().map(|t| json!({ "x": t.x.to_string(), "y": t.y.to_string(), "value": t.value })).collect();
    Ok(report(
        "oracle",
        true,
        json!({ "beta": beta, "points": a.points, "Z": r.z, "two_point": two_point, "magnetization": r.magnetization }),
    ))
}

fn series(a: &SeriesArgs) -> loopflux::Result<Outcome> {
    let cfg = LatticeConfig::load(&a.config)?;
    let (br, beta) = rational(&a.beta)?;
    let (x, y) = match &a.two_point {
        Some(v) => (parse_site(&v[0])?, parse_site(&v[1])?),
        None => cfg.pair()?,
    };
    let lat = &cfg.lattice;
    let spec = QuadratureSpec::new(a.points, beta)?;
    let z = truncated_z(lat, &br, a.max_edges)?;
    let f = truncated_f(lat, &br, x, y, a.max_edges)?;
    let ratio_xy = 2.0 * to_f64(&(&f / &z));
    let exact = spin_oracle::quadrature_two_point(lat, &spec, x, y)?;
    let z_oracle = spin_oracle::quadrature_z(lat, &spec)?;
    let abs_err = (ratio_xy - exact).abs();
    let z_rel_err = (to_f64(&z) - z_oracle).abs() / z_oracle;
    let passed = a.tolerance.is_none_or(|t| abs_err <= t && z_rel_err <= t);
    Ok(report(
        "series",
        passed,
        json!({
            "beta": beta, "beta_exact": br.to_string(), "max_edges": a.max_edges, "x": x.to_string(), "y": y.to_string(),
            "Z_trunc": to_f64(&z), "Z_oracle": z_oracle, "Z_rel_err": z_rel_err,
            "F_xy": to_f64(&f), "ratio": ratio_xy, "oracle": exact, "abs_err": abs_err,
        }),
    ))
}

fn switch_verify(a: &SwitchArgs) -> loopflux::Result<Outcome> {
    let (beta, _) = rational(&a.beta)?;
    Ok(match a.mode {
        SwitchMode::Undirected => {
            let (lat, x, y) = switching::undirected_instance();
            let r = switching::verify_undirected_bijection(&lat, x, y, a.max_edges, &beta)?;
            report("switch-verify", r.passed(), json!({ "mode": "undirected", "report": to_value(&r) }))
        }
        SwitchMode::Directed => {
            let (lat, x, y) = switching::adverse_lattice();
            let r = switching::verify_directed_switch(&lat, x, y, a.max_edges, &beta)?;
            report("switch-verify", r.passed(), json!({ "mode": "directed", "report": to_value(&r) }))
        }
        SwitchMode::Adverse => {
            let (lat, x, y) = switching::adverse_lattice();
            let w = switching::adverse_search(&lat, x, y, a.max_edges)?;
            let found = w.as_ref().is_some_and(|w| w.verify());
            let witness = w.map(|w| {
                let l = &w.lattice;
                json!({
                    "G": [w.g.first.display(l), w.g.second.display(l)],
                    "F": [w.f.first.display(l), w.f.second.display(l)],
                    "P": w.p.display(l),
                    "Q": w.q.display(l),
                    "image": [w.image.first.display(l), w.image.second.display(l)],
                })
            });
            report("switch-verify", found, json!({ "mode": "adverse", "max_edges": a.max_edges, "witness": witness }))
        }
    })
}

fn ledger_checks(lat: &Lattice, l: &RegionalLedger) -> Vec<String> {
    let mut f = Vec::new();
    if l.total() != l.expected_total {
        f.push(format!("N={}: class sums {} differ from the global total {}", l.n, l.total(), l.expected_total));
    }
    f.extend(l.class_failures());
    for (g, c) in l.iter() {
        match l.d(g) {
            Ok(d) if &d == c => {}
            _ => f.push(format!("N={}: D differs from C at {}", l.n, g.display(lat))),
        }
    }
    f
}

fn pairing_verify(a: &PairingArgs) -> loopflux::Result<Outcome> {
    let (beta, _) = rational(&a.beta)?;
    let mut checks = a.checks.clone();
    checks.sort();
    checks.dedup();
    let seed = match (checks.contains(&PairingCheck::Decompose), a.seed) {
        (true, None) => return Err(Error::Config("the decompose check needs --seed".into())),
        (_, s) => s.unwrap_or(0),
    };
    let strip = topology::ghosted_strip(3, ratio(1, 6));
    let (x, y) = (Site::at(0, 0, 0), Site::at(1, 0, 0));
    let needs_ledger = checks.iter().any(|c| matches!(c, PairingCheck::Surgical | PairingCheck::Ledger | PairingCheck::Upsilon));
    let ledger = needs_ledger.then(|| RegionalLedger::build(&strip, x, y, a.region, a.max_edges, &beta)).transpose()?;
    let mut out = Map::new();
    let mut passed = true;
    for c in checks {
        let (name, ok, v) = match c {
            PairingCheck::Psi => {
                let r = pairing::verify_pairing_counts(4)?;
                ("psi", r.passed(), to_value(&r))
            }
            PairingCheck::Decompose => {
                let lat = topology::ghosted_strip(2, int(1));
                let r = pairing::verify_decompositions(&lat, x, Site::at(1, 1, 0), a.samples, seed)?;
                ("decompose", r.passed(), to_value(&r))
            }
            PairingCheck::Switch => {
                let (lat, sx, sy) = switching::undirected_instance();
                let r = pairing::verify_paired_switch(&lat, sx, sy, a.max_edges, &beta)?;
                ("switch", r.passed(), to_value(&r))
            }
            PairingCheck::Surgical => {
                let l = ledger.as_ref().expect("built above");
                let r = pairing::verify_surgical_weight_equality(&strip, l)?;
                ("surgical", r.passed(), to_value(&r))
            }
            PairingCheck::Ledger => {
                let l = ledger.as_ref().expect("built above");
                let fine = RegionalLedger::build(&strip, x, y, a.region + 1, a.max_edges, &beta)?;
                let mut f = ledger_checks(&strip, l);
                f.extend(ledger_checks(&strip, &fine));
                f.extend(l.consistency_failures(&strip, &fine));
                let v = json!({
                    "region": a.region, "graphs": l.len(), "classes": l.classes().len(),
                    "refined_graphs": fine.len(), "visited": l.visited, "failures": f,
                });
                ("ledger", f.is_empty() && !l.is_empty(), v)
            }
            PairingCheck::Upsilon => {
                let l = ledger.as_ref().expect("built above");
                let f: Vec<String> = l
                    .iter()
                    .filter(|(g, _)| num::BigInt::from(l.upsilon(g)) != g.psi(&strip))
                    .map(|(g, _)| g.display(&strip))
                    .collect();
                ("upsilon", f.is_empty(), json!({ "graphs": l.len(), "failures": f }))
            }
        };
        passed &= ok;
        let mut v = v;
        if let Value::Object(m) = &mut v {
            m.insert("passed".into(), json!(ok));
        }
        out.insert(name.into(), v);
    }
    Ok(report(
        "pairing-verify",
        passed,
        json!({ "region": a.region, "max_edges": a.max_edges, "checks": Value::Object(out) }),
    ))
}

fn infrared(a: &InfraredArgs) -> loopflux::Result<Outcome> {
    let spec = GreenSpec::new(a.grid, a.levels)?;
    let table = match green_table(&spec, a.table_r) {
        Err(Error::SchemeDisagreement { delta, tolerance }) => {
            return Ok(report("infrared", false, json!({ "error": "scheme disagreement", "delta": delta, "tolerance": tolerance })));
        }
        r => r?,
    };
    if a.format == Format::Csv {
        let mut s = String::from("r,G,midpoint,nested,delta\n");
        for g in &table {
            s += &format!("{},{:.12e},{:.12e},{:.12e},{:.3e}\n", g.r.iter().max().copied().unwrap_or(0), g.value(), g.midpoint, g.nested, g.delta);
        }
        return Ok(Outcome { body: Body::Csv(s), passed: true });
    }
    let g0 = table[0];
    let rows: Vec<Value> =
        table.iter().map(|g| json!({ "r": g.r.iter().max().copied().unwrap_or(0), "G": g.value(), "midpoint": g.midpoint, "nested": g.nested, "delta": g.delta })).collect();
    Ok(report(
        "infrared",
        true,
        json!({ "grid": a.grid, "levels": a.levels, "G00": g0.value(), "scheme_delta": g0.delta, "min_gap": min_gap(&spec), "table": rows }),
    ))
}

fn read_estimate(path: &PathBuf, beta: f64, n: i32) -> loopflux::Result<Estimate> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let bad = |what: &str| Error::Config(format!("{}: {what}", path.display()));
    if v["estimator"] != "mn" {
        return Err(bad("not an `mc --estimator mn` report"));
    }
    if v["n"].as_i64() != Some(n as i64) {
        return Err(bad(&format!("box radius {} does not match --n {n}", v["n"])));
    }
    if v["beta"].as_f64().is_none_or(|b| (b - beta).abs() > 1e-12) {
        return Err(bad(&format!("beta {} does not match --beta {beta}", v["beta"])));
    }
    let e = &v["estimate"];
    let num = |k: &str| e[k].as_f64().ok_or_else(|| bad(&format!("missing estimate.{k}")));
    Ok(Estimate {
        mean: num("mean")?,
        stderr: num("stderr")?,
        samples: num("samples")? as usize,
        batches: num("batches")? as usize,
        seed: num("seed")? as u64,
    })
}

fn infrared_bound(a: &BoundArgs) -> loopflux::Result<Outcome> {
    let spec = GreenSpec::new(a.grid, a.levels)?;
    let e = read_estimate(&a.mc, a.beta, a.n)?;
    let r = bound_report(&spec, a.beta, a.n, &e)?;
    Ok(report("infrared-bound", r.passed, json!({ "report": to_value(&r) })))
}

fn mc(a: &McArgs) -> loopflux::Result<Outcome> {
    let cfg = LatticeConfig::load(&a.config)?;
    let spec = McSpec::new(a.sweeps, a.burn_in, a.batches, a.seed)?;
    let lat = &cfg.lattice;
    let estimate = |name: &str, e: Estimate, extra: Value| {
        let mut v = json!({ "estimator": name, "beta": a.beta, "spec": to_value(&spec) });
        if let (Value::Object(m), Value::Object(x)) = (&mut v, extra) {
            m.extend(x);
            m.insert("estimate".into(), to_value(&e));
        }
        report("mc", true, v)
    };
    Ok(match a.estimator {
        Estimator::Twopoint => {
            let (x, y) = cfg.pair()?;
            let e = mcmc::estimate_two_point(lat, a.beta, x, y, &spec)?;
            estimate("twopoint", e, json!({ "x": x.to_string(), "y": y.to_string() }))
        }
        Estimator::Mn => estimate("mn", mcmc::estimate_mn(lat, a.beta, a.n, &spec)?, json!({ "n": a.n })),
        Estimator::Mag => {
            let x = cfg.x.ok_or_else(|| Error::Config("the config must set x".into()))?;
            estimate("mag", mcmc::estimate_mag(lat, a.beta, x, &spec)?, json!({ "x": x.to_string() }))
        }
        Estimator::Inequalities => {
            let (x, y) = cfg.pair()?;
            let r = mcmc::inequality_suite(&a.radii, &a.betas, x, y, &spec)?;
            report(
                "mc",
                r.passed(),
                json!({ "estimator": "inequalities", "spec": to_value(&spec), "radii": a.radii, "betas": a.betas, "checks": to_value(&r.checks) }),
            )
        }
    })
}

fn probe(a: &ProbeArgs) -> loopflux::Result<Outcome> {
    let lat = match &a.config {
        Some(p) => LatticeConfig::load(p)?.lattice,
        None => Lattice::cubic(3, BoundaryCondition::Free)?,
    };
    if a.every == 0 || a.cap == 0 {
        return Err(Error::InvalidParameter("--every and --cap must be positive".into()));
    }
    let states = mcmc::worm_sample(&lat, a.beta, a.steps, a.every, a.seed)?;
    let r = mcmc::loop_structure_probe(&lat, &states, a.cap, a.seed)?;
    let passed = r.monotone() && r.complete;
    if a.format == Format::Csv {
        let mut s = String::from("length,loops,fraction\n");
        for &(l, f) in &r.fraction {
            s += &format!("{l},{},{:.12}\n", r.histogram.get(&l).copied().unwrap_or(0), f);
        }
        return Ok(Outcome { body: Body::Csv(s), passed });
    }
    Ok(report("probe", passed, json!({ "beta": a.beta, "steps": a.steps, "cap": a.cap, "seed": a.seed, "report": to_value(&r) })))
}

fn full_report(a: &ReportArgs) -> loopflux::Result<Outcome> {
    if !a.all {
        return Err(Error::Config("nothing selected; pass --all".into()));
    }
    let mut suites = Map::new();
    let mut passed = true;
    let mut add = |name: &str, o: Outcome| {
        passed &= o.passed;
        if let Body::Json(mut v) = o.body {
            if let Value::Object(m) = &mut v {
                m.remove("schema");
                m.remove("command");
            }
            suites.insert(name.into(), v);
        }
    };

    let mut series = Vec::new();
    let mut series_ok = true;
    for (name, lat) in [
        ("dumbbell", topology::dumbbell(int(1))),
        ("path3", topology::path(3, ratio(1, 2))),
        ("cycle4", topology::cycle(4, ratio(1, 2))),
    ] {
        let (br, b) = (ratio(3, 10), 0.3);
        let (x, y) = (Site::at(0, 0, 0), Site::at(1, 0, 0));
        let spec = QuadratureSpec::new(64, b)?;
        let z = truncated_z(&lat, &br, 12)?;
        let f = truncated_f(&lat, &br, x, y, 12)?;
        let q = spin_oracle::quadrature_two_point(&lat, &spec, x, y)?;
        let zq = spin_oracle::quadrature_z(&lat, &spec)?;
        let zb = spin_oracle::bessel_z(&lat, b)?;
        let err = (2.0 * to_f64(&(f / &z)) - q).abs();
        series_ok &= err < 1e-6 && (zb - zq).abs() / zq < 1e-10;
        series.push(json!({ "topology": name, "beta": b, "Z_trunc": to_f64(&z), "Z_quadrature": zq, "Z_bessel": zb, "two_point_err": err }));
    }
    add("series", report("series", series_ok, json!({ "max_edges": 12, "rows": series })));

    for mode in [SwitchMode::Undirected, SwitchMode::Directed, SwitchMode::Adverse] {
        let name = match mode {
            SwitchMode::Undirected => "switch_undirected",
            SwitchMode::Directed => "switch_directed",
            SwitchMode::Adverse => "switch_adverse",
        };
        let max_edges = if matches!(mode, SwitchMode::Adverse) { 8 } else { a.max_edges };
        add(name, switch_verify(&SwitchArgs { mode, max_edges, beta: "1/3".into() })?);
    }

    let checks = vec![PairingCheck::Psi, PairingCheck::Decompose, PairingCheck::Switch, PairingCheck::Surgical, PairingCheck::Ledger, PairingCheck::Upsilon];
    add(
        "pairing",
        pairing_verify(&PairingArgs { region: 2, max_edges: a.max_edges, checks, samples: 1000, seed: Some(a.seed), beta: "1/2".into() })?,
    );

    add("infrared", infrared(&InfraredArgs { grid: 32, levels: 6, table_r: 3, format: Format::Json })?);

    let spec = McSpec::new(a.sweeps, 1000, 100, a.seed)?;
    let dumb = topology::dumbbell(int(1));
    let (x, y) = (Site::at(0, 0, 0), Site::at(1, 0, 0));
    let e = mcmc::estimate_two_point(&dumb, 0.5, x, y, &spec)?;
    let exact = spin_oracle::quadrature_two_point(&dumb, &QuadratureSpec::new(64, 0.5)?, x, y)?;
    let mc_ok = (e.mean - exact).abs() <= 3.0 * e.stderr;
    add("mc_twopoint", report("mc", mc_ok, json!({ "topology": "dumbbell", "beta": 0.5, "estimate": to_value(&e), "oracle": exact })));

    let lat = Lattice::cubic(2, BoundaryCondition::Free)?;
    let states = mcmc::worm_sample(&lat, 0.3, 100_000, 500, a.seed)?;
    let r = mcmc::loop_structure_probe(&lat, &states, 32, a.seed)?;
    add("probe", report("probe", r.monotone() && r.complete, json!({ "beta": 0.3, "steps": 100_000, "report": to_value(&r) })));

    Ok(report("report", passed, json!({ "seed": a.seed, "suites": Value::Object(suites) })))
}

fn run(cli: &Cli) -> loopflux::Result<Outcome> {
    match &cli.command {
        Command::Oracle(a) => oracle(a),
        Command::Series(a) => series(a),
        Command::SwitchVerify(a) => switch_verify(a),
        Command::PairingVerify(a) => pairing_verify(a),
        Command::Infrared(a) => infrared(a),
        Command::InfraredBound(a) => infrared_bound(a),
        Command::Mc(a) => mc(a),
        Command::Probe(a) => probe(a),
        Command::Report(a) => full_report(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let text = match outcome.body {
        Body::Json(v) => serde_json::to_string_pretty(&v).expect("reports serialise") + "\n",
        Body::Csv(s) => s,
    };
    let written = match &cli.out {
        Some(p) => std::fs::write(p, &text),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if outcome.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
