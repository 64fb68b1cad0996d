//! Monte Carlo: a Metropolis spin sampler with batch-mean estimators and
//! correlation-inequality checks, and a worm-style sampler of sourceless
//! flux configurations with a loop-structure probe.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux_graph::{Arc, BoundarySpec, Dir, FluxConfig};
use crate::lattice::{BoundaryCondition, Lattice, Site};
use crate::pairing::{decompose, PairedGraph, SitePairing};
use crate::rational::{int, Rational};

pub const MIN_SWEEPS: usize = 1000;
pub const MIN_BURN_IN: usize = 1000;
pub const MIN_BATCHES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct McSpec {
    pub sweeps: usize,
    pub burn_in: usize,
    pub batches: usize,
    pub seed: u64,
}

impl McSpec {
    pub fn new(sweeps: usize, burn_in: usize, batches: usize, seed: u64) -> Result<Self> {
        if sweeps < MIN_SWEEPS || burn_in < MIN_BURN_IN {
            return Err(Error::InsufficientSamples(format!(
                "need at least {MIN_SWEEPS} sweeps after {MIN_BURN_IN} of burn-in"
            )));
        }
        if batches < MIN_BATCHES || sweeps < batches {
            return Err(Error::InsufficientSamples(format!("need {MIN_BATCHES} to {sweeps} batches, got {batches}")));
        }
        Ok(McSpec { sweeps, burn_in, batches, seed })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        McSpec { seed, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub batches: usize,
    pub seed: u64,
}

impl Estimate {
    /// Standard error of a difference of independent estimates.
    pub fn joint_stderr(&self, other: &Estimate) -> f64 {
        self.stderr.hypot(other.stderr)
    }
}

/// Batch means over consecutive equal blocks; a trailing partial block is
/// dropped.
pub fn batch_means(series: &[f64], batches: usize, seed: u64) -> Result<Estimate> {
    if batches < 2 || series.len() < batches {
        return Err(Error::InsufficientSamples(format!("{} samples for {batches} batches", series.len())));
    }
    let size = series.len() / batches;
    let means: Vec<f64> = series.chunks_exact(size).take(batches).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let mean = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok(Estimate { mean, stderr: (var / batches as f64).sqrt(), samples: size * batches, batches, seed })
}

/// Angles per site rank; the ghost, when present, stays at angle 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpinState {
    pub angles: Vec<f64>,
}

/// Single-site Metropolis with independent uniform proposals on
/// `exp(2β Σ J cos(θ_k − θ_l))`.
#[derive(Debug, Clone)]
pub struct SpinChain {
    beta: f64,
    nbrs: Vec<Vec<(usize, f64)>>,
    movable: Vec<usize>,
    state: SpinState,
    rng: ChaCha8Rng,
    accepted: u64,
    proposed: u64,
}

impl SpinChain {
    pub fn new(lat: &Lattice, beta: f64, seed: u64) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidParameter(format!("β = {beta}")));
        }
        let mut nbrs = vec![Vec::new(); lat.num_sites()];
        for b in lat.bonds() {
            let j = crate::rational::to_f64(&b.coupling);
            nbrs[b.a].push((b.b, 2.0 * j));
            nbrs[b.b].push((b.a, 2.0 * j));
        }
        let ghost = lat.ghost();
        let movable: Vec<usize> = (0..lat.num_sites()).filter(|&r| Some(r) != ghost).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let angles = (0..lat.num_sites()).map(|r| if Some(r) == ghost { 0.0 } else { rng.random_range(0.0..TAU) }).collect();
        Ok(SpinChain { beta, nbrs, movable, state: SpinState { angles }, rng, accepted: 0, proposed: 0 })
    }

    pub fn sweep(&mut self) {
        for i in 0..self.movable.len() {
            let k = self.movable[i];
            let old = self.state.angles[k];
            let new = self.rng.random_range(0.0..TAU);
            let mut d = 0.0;
            for &(l, c) in &self.nbrs[k] {
                let t = self.state.angles[l];
                d += c * ((new - t).cos() - (old - t).cos());
            }
            self.proposed += 1;
            let log_a = self.beta * d;
            if log_a >= 0.0 || self.rng.random::<f64>() < log_a.exp() {
                self.state.angles[k] = new;
                self.accepted += 1;
            }
        }
    }

    pub fn state(&self) -> &SpinState {
        &self.state
    }

    pub fn acceptance(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

impl Iterator for SpinChain {
    type Item = SpinState;

    fn next(&mut self) -> Option<SpinState> {
        self.sweep();
        Some(self.state.clone())
    }
}

/// A chain already advanced through `burn_in` sweeps.
pub fn spin_sample(lat: &Lattice, beta: f64, burn_in: usize, seed: u64) -> Result<SpinChain> {
    let mut c = SpinChain::new(lat, beta, seed)?;
    for _ in 0..burn_in {
        c.sweep();
    }
    Ok(c)
}

/// Runs a chain and records `observable` once per sweep.
pub fn run_observable(
    lat: &Lattice,
    beta: f64,
    spec: &McSpec,
    observable: impl Fn(&SpinState) -> f64,
) -> Result<Estimate> {
    let mut chain = spin_sample(lat, beta, spec.burn_in, spec.seed)?;
    let mut series = Vec::with_capacity(spec.sweeps);
    for _ in 0..spec.sweeps {
        chain.sweep();
        series.push(observable(chain.state()));
    }
    batch_means(&series, spec.batches, spec.seed)
}

/// `⟨S_x·S_y⟩ = ⟨cos(θ_x − θ_y)⟩`.
pub fn estimate_two_point(lat: &Lattice, beta: f64, x: Site, y: Site, spec: &McSpec) -> Result<Estimate> {
    let (a, b) = (lat.rank(x)?, lat.rank(y)?);
    if a == b {
        return Ok(Estimate { mean: 1.0, stderr: 0.0, samples: spec.sweeps, batches: spec.batches, seed: spec.seed });
    }
    run_observable(lat, beta, spec, |s| (s.angles[a] - s.angles[b]).cos())
}

/// Sites of the lattice with `|z|_∞ ≤ n`.
pub fn box_sites(lat: &Lattice, n: i32) -> Result<Vec<usize>> {
    if let Some(r) = lat.radius() {
        if n > r - 1 {
            return Err(Error::SiteOutside(format!("box of radius {n} in a lattice of radius {r}")));
        }
    }
    Ok((0..lat.num_sites()).filter(|&k| lat.site(k).norm().is_some_and(|m| m <= n)).collect())
}

/// `avg_{x,y ∈ B_n} ⟨S_x·S_y⟩ = ⟨|Σ_{x∈B_n} S_x|²⟩ / |B_n|²`.
pub fn estimate_mn(lat: &Lattice, beta: f64, n: i32, spec: &McSpec) -> Result<Estimate> {
    let sites = box_sites(lat, n)?;
    let size = sites.len() as f64;
    run_observable(lat, beta, spec, |s| {
        let (c, d) = sites.iter().fold((0.0, 0.0), |(c, d), &k| (c + s.angles[k].cos(), d + s.angles[k].sin()));
        (c * c + d * d) / (size * size)
    })
}

/// `⟨S_x·S_ghost⟩ = ⟨cos θ_x⟩` on a lattice with the ghost.
pub fn estimate_mag(lat: &Lattice, beta: f64, x: Site, spec: &McSpec) -> Result<Estimate> {
    if !lat.has_ghost() {
        return Err(Error::InvalidParameter("magnetisation needs the plus boundary".into()));
    }
    let a = lat.rank(x)?;
    run_observable(lat, beta, spec, |s| s.angles[a].cos())
}

/// `⟨cos θ_x cos θ_y⟩ − ⟨cos θ_x⟩⟨cos θ_y⟩`, estimated batch by batch.
pub fn estimate_covariance(lat: &Lattice, beta: f64, x: Site, y: Site, spec: &McSpec) -> Result<Estimate> {
    let (a, b) = (lat.rank(x)?, lat.rank(y)?);
    let mut chain = spin_sample(lat, beta, spec.burn_in, spec.seed)?;
    let mut rows = Vec::with_capacity(spec.sweeps);
    for _ in 0..spec.sweeps {
        chain.sweep();
        let s = chain.state();
        rows.push((s.angles[a].cos(), s.angles[b].cos()));
    }
    let size = rows.len() / spec.batches;
    let covs: Vec<f64> = rows
        .chunks_exact(size)
        .take(spec.batches)
        .map(|c| {
            let m = c.len() as f64;
            let (sx, sy, sxy) = c.iter().fold((0.0, 0.0, 0.0), |(p, q, r), &(u, v)| (p + u, q + v, r + u * v));
            sxy / m - (sx / m) * (sy / m)
        })
        .collect();
    batch_means(&covs, spec.batches, spec.seed)
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityCheck {
    pub name: String,
    /// Estimated `larger − smaller`; the inequality claims it is ≥ 0.
    pub difference: f64,
    pub sigma: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub checks: Vec<InequalityCheck>,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&InequalityCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

fn check(name: String, difference: f64, sigma: f64) -> InequalityCheck {
    InequalityCheck { name, difference, sigma, passed: difference >= -3.0 * sigma }
}

/// Free versus periodic, the product inequality under the plus boundary,
/// and monotonicity of the free two-point function in `L` and `β`, all at
/// the pair `x, y`. Chains run in parallel with seeds derived from
/// `spec.seed`.
pub fn inequality_suite(radii: &[i32], betas: &[f64], x: Site, y: Site, spec: &McSpec) -> Result<InequalityReport> {
    #[derive(Clone, Copy)]
    enum Job {
        Free(usize, usize),
        Periodic(usize, usize),
        Plus(usize, usize),
    }
    let mut jobs = Vec::new();
    for li in 0..radii.len() {
        for bi in 0..betas.len() {
            jobs.extend([Job::Free(li, bi), Job::Periodic(li, bi), Job::Plus(li, bi)]);
        }
    }
    let results: Vec<Estimate> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, job)| {
            let s = spec.with_seed(spec.seed.wrapping_mul(1_000_003).wrapping_add(i as u64));
            match *job {
                Job::Free(l, b) => estimate_two_point(&Lattice::cubic(radii[l], BoundaryCondition::Free)?, betas[b], x, y, &s),
                Job::Periodic(l, b) => {
                    estimate_two_point(&Lattice::cubic(radii[l], BoundaryCondition::Periodic)?, betas[b], x, y, &s)
                }
                Job::Plus(l, b) => estimate_covariance(&Lattice::cubic(radii[l], BoundaryCondition::Plus)?, betas[b], x, y, &s),
            }
        })
        .collect::<Result<_>>()?;
    let at = |kind: usize, l: usize, b: usize| &results[(l * betas.len() + b) * 3 + kind];
    let mut checks = Vec::new();
    for (li, &l) in radii.iter().enumerate() {
        for (bi, &beta) in betas.iter().enumerate() {
            let (f, p, c) = (at(0, li, bi), at(1, li, bi), at(2, li, bi));
            checks.push(check(format!("free <= periodic, L={l}, beta={beta}"), p.mean - f.mean, f.joint_stderr(p)));
            checks.push(check(format!("product inequality, plus, L={l}, beta={beta}"), c.mean, c.stderr));
            if bi > 0 {
                let g = at(0, li, bi - 1);
                checks.push(check(
                    format!("increasing in beta, L={l}, beta {} -> {beta}", betas[bi - 1]),
                    f.mean - g.mean,
                    f.joint_stderr(g),
                ));
            }
            if li > 0 {
                let g = at(0, li - 1, bi);
                checks.push(check(
                    format!("increasing in L, {} -> {l}, beta={beta}", radii[li - 1]),
                    f.mean - g.mean,
                    f.joint_stderr(g),
                ));
            }
        }
    }
    Ok(InequalityReport { checks })
}

/// Every directed simple cycle with two to four edges, each listed once per
/// orientation, starting at its smallest site.
pub fn elementary_cycles(lat: &Lattice) -> Vec<Vec<Arc>> {
    fn extend(lat: &Lattice, start: usize, path: &mut Vec<usize>, arcs: &mut Vec<Arc>, out: &mut Vec<Vec<Arc>>) {
        let here = *path.last().unwrap();
        for &(b, nb) in lat.incident(here) {
            let arc = Arc::new(b, if lat.bonds()[b].a == here { Dir::Up } else { Dir::Down });
            if nb == start && (arcs.len() >= 2 || (arcs.len() == 1 && arcs[0].bond == b)) {
                if arcs.len() == 1 || arcs.iter().all(|a| a.bond != b) {
                    let mut c = arcs.clone();
                    c.push(arc);
                    out.push(c);
                }
                continue;
            }
            if nb <= start || path.contains(&nb) || arcs.len() >= 3 {
                continue;
            }
            path.push(nb);
            arcs.push(arc);
            extend(lat, start, path, arcs, out);
            arcs.pop();
            path.pop();
        }
    }
    let mut out = Vec::new();
    for s in 0..lat.num_sites() {
        extend(lat, s, &mut vec![s], &mut Vec::new(), &mut out);
    }
    out
}

fn flux_weight_factor(lat: &Lattice, beta: &Rational, arc: Arc) -> Rational {
    beta * &lat.bonds()[arc.bond].coupling
}

/// `w(n + c)/w(n) = Π_{a∈c} βJ_a/(n_a + 1)` for `w(n) = Π (βJ)^{n_a}/n_a!`.
pub fn insert_ratio(lat: &Lattice, flux: &FluxConfig, cycle: &[Arc], beta: &Rational) -> Rational {
    cycle.iter().fold(int(1), |acc, &a| acc * flux_weight_factor(lat, beta, a) / int(flux.get(a) as i64 + 1))
}

/// `w(n − c)/w(n)`; zero when `c` is not contained in `n`.
pub fn delete_ratio(lat: &Lattice, flux: &FluxConfig, cycle: &[Arc], beta: &Rational) -> Rational {
    if cycle.iter().any(|&a| flux.get(a) == 0) {
        return int(0);
    }
    cycle.iter().fold(int(1), |acc, &a| acc * int(flux.get(a) as i64) / flux_weight_factor(lat, beta, a))
}

/// Sourceless configuration updated by inserting or deleting one
/// elementary cycle per step with the Metropolis ratio.
#[derive(Debug, Clone)]
pub struct WormState {
    pub flux: FluxConfig,
    pub steps: u64,
    pub accepted: u64,
}

#[derive(Debug, Clone)]
pub struct WormChain<'a> {
    lat: &'a Lattice,
    cycles: Vec<Vec<Arc>>,
    bj: Vec<f64>,
    state: WormState,
    rng: ChaCha8Rng,
}

impl<'a> WormChain<'a> {
    pub fn new(lat: &'a Lattice, beta: f64, seed: u64) -> Result<Self> {
        if !beta.is_finite() || beta <= 0.0 {
            return Err(Error::InvalidParameter(format!("worm sampler needs β > 0, got {beta}")));
        }
        let cycles = elementary_cycles(lat);
        if cycles.is_empty() {
            return Err(Error::UnsupportedTopology("no elementary cycles".into()));
        }
        let bj = lat.bonds().iter().map(|b| beta * crate::rational::to_f64(&b.coupling)).collect();
        Ok(WormChain {
            lat,
            cycles,
            bj,
            state: WormState { flux: FluxConfig::empty(lat), steps: 0, accepted: 0 },
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn num_cycles(&self) -> usize {
        self.cycles.len()
    }

    pub fn state(&self) -> &WormState {
        &self.state
    }

    /// One proposal. Panics if a site becomes imbalanced.
    pub fn step(&mut self) {
        let c = self.rng.random_range(0..self.cycles.len());
        let insert = self.rng.random::<bool>();
        let cycle = &self.cycles[c];
        let f = &mut self.state.flux;
        let ratio = if insert {
            cycle.iter().map(|&a| self.bj[a.bond] / (f.get(a) + 1) as f64).product::<f64>()
        } else if cycle.iter().all(|&a| f.get(a) > 0) {
            cycle.iter().map(|&a| f.get(a) as f64 / self.bj[a.bond]).product::<f64>()
        } else {
            0.0
        };
        self.state.steps += 1;
        if ratio >= 1.0 || self.rng.random::<f64>() < ratio {
            for &a in cycle {
                if insert {
                    f.add(a, 1);
                } else {
                    f.remove(a, 1).expect("deletion checked above");
                }
            }
            self.state.accepted += 1;
            for &a in cycle {
                let t = a.tail(self.lat);
                assert_eq!(f.out_degree(self.lat, t), f.in_degree(self.lat, t), "imbalance at {}", self.lat.site(t));
            }
        }
        if self.state.steps.is_multiple_of(4096) {
            assert!(f.satisfies(self.lat, &BoundarySpec::Empty), "imbalanced configuration");
        }
    }
}

/// A chain of `steps` worm proposals, keeping every `every`-th state.
pub fn worm_sample(lat: &Lattice, beta: f64, steps: u64, every: u64, seed: u64) -> Result<Vec<FluxConfig>> {
    if every == 0 {
        return Err(Error::InvalidParameter("thinning must be positive".into()));
    }
    let mut chain = WormChain::new(lat, beta, seed)?;
    let mut out = Vec::new();
    for i in 1..=steps {
        chain.step();
        if i % every == 0 {
            out.push(chain.state.flux.clone());
        }
    }
    Ok(out)
}

/// Uniformly random pairing at every site of a balanced configuration.
pub fn random_pairing(lat: &Lattice, flux: &FluxConfig, rng: &mut impl Rng) -> Result<PairedGraph> {
    let base = PairedGraph::single_layer(lat, flux, BoundarySpec::Empty)?;
    let mut pairing = Vec::with_capacity(lat.num_sites());
    for z in 0..lat.num_sites() {
        let mut outs = base.out_slots(lat, z);
        outs.shuffle(rng);
        pairing.push(base.in_slots(lat, z).into_iter().zip(outs).collect::<SitePairing>());
    }
    PairedGraph::new(lat, base.labels().to_vec(), pairing, base.paired_sites().to_vec(), BoundarySpec::Empty)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopProbeReport {
    pub samples: usize,
    pub total_edges: u64,
    /// Loop length to number of loops.
    pub histogram: BTreeMap<usize, u64>,
    /// `(ℓ, fraction of edges in loops of length ≤ ℓ)` for `ℓ = 1..=cap`.
    pub fraction: Vec<(usize, f64)>,
    pub longest: usize,
    pub median: Option<usize>,
    /// Whether every edge lies in a loop no longer than `longest`.
    pub complete: bool,
}

impl LoopProbeReport {
    pub fn monotone(&self) -> bool {
        self.fraction.windows(2).all(|w| w[0].1 <= w[1].1)
    }
}

/// Decomposes each state under a uniformly random pairing and tallies loop
/// lengths. An empty ensemble reports fraction 1.
pub fn loop_structure_probe(lat: &Lattice, states: &[FluxConfig], cap: usize, seed: u64) -> Result<LoopProbeReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut histogram: BTreeMap<usize, u64> = BTreeMap::new();
    let mut total = 0u64;
    for s in states {
        let g = random_pairing(lat, s, &mut rng)?;
        for l in decompose(lat, &g)?.loops {
            *histogram.entry(l.len()).or_default() += 1;
            total += l.len() as u64;
        }
    }
    let edges_upto = |ell: usize| histogram.range(..=ell).map(|(&len, &n)| len as u64 * n).sum::<u64>();
    let fraction = (1..=cap)
        .map(|ell| (ell, if total == 0 { 1.0 } else { edges_upto(ell) as f64 / total as f64 }))
        .collect();
    let longest = histogram.keys().next_back().copied().unwrap_or(0);
    let loops: u64 = histogram.values().sum();
    let median = (loops > 0).then(|| {
        let mut seen = 0;
        *histogram
            .iter()
            .find(|(_, &n)| {
                seen += n;
                2 * seen >= loops
            })
            .unwrap()
            .0
    });
    Ok(LoopProbeReport {
        samples: states.len(),
        total_edges: total,
        complete: edges_upto(longest) == total,
        histogram,
        fraction,
        longest,
        median,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::topology;

    #[test]
    fn batch_means_of_constant_series() {
        let e = batch_means(&[2.0; 1000], 100, 0).unwrap();
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn cycles_on_a_square() {
        // four 2-cycles plus the square in both orientations
        let c = elementary_cycles(&topology::cycle(4, int(1)));
        assert_eq!(c.len(), 6);
    }

    #[test]
    fn cycles_with_ghost() {
        let lat = topology::square_with_ghost(int(1), int(1));
        let c = elementary_cycles(&lat);
        let by_len = |n| c.iter().filter(|x| x.len() == n).count();
        assert_eq!(by_len(2), 8);
        assert_eq!(by_len(3), 8);
        // the square itself and the four squares through the ghost
        assert_eq!(by_len(4), 2 * 5);
    }
}
