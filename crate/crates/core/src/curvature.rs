//! Lower-bound engine: `sigma >= -sup (1/N) sum_i J^{x_i,y_i}(F_i(x), F_i(y)) / d(x, y)`
//! over pairs of distinct configurations, and the coupling rates that realize
//! the bound in simulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jfunc::{augmented, j_exact};
use crate::space::{distance_unchecked, Configuration, FiniteMeasure, GroundMetric, Site};
use crate::transport::{optimal_plan, TransportPlan};

/// Jump rates of an `N`-particle system: the measure `F_i(x_i, config, .)`.
pub trait JumpKernel: Sync {
    fn n_sites(&self) -> usize;

    /// Jump measure of particle `i` in configuration `config`.
    fn jump(&self, i: usize, config: &[Site]) -> FiniteMeasure;
}

/// Particles moving independently with the same single-site rates `q(x, .)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteKernel {
    rows: Vec<FiniteMeasure>,
}

impl SiteKernel {
    pub fn new(rows: Vec<FiniteMeasure>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidModel("empty site set".into()));
        }
        for (x, r) in rows.iter().enumerate() {
            if let Some(s) = r.support().find(|&s| s >= n) {
                return Err(Error::InvalidModel(format!("row {x} jumps to unknown site {s}")));
            }
        }
        Ok(Self { rows })
    }

    /// From a dense rate matrix `q[x][y]`; diagonal entries are ignored.
    pub fn from_matrix(q: &[Vec<f64>]) -> Result<Self> {
        let rows = q
            .iter()
            .enumerate()
            .map(|(x, row)| {
                if row.len() != q.len() {
                    return Err(Error::InvalidModel("rate matrix is not square".into()));
                }
                FiniteMeasure::new(row.iter().enumerate().filter(|(y, _)| *y != x).map(|(y, &w)| (y, w)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows)
    }

    pub fn row(&self, x: Site) -> &FiniteMeasure {
        &self.rows[x]
    }

    pub fn rows(&self) -> &[FiniteMeasure] {
        &self.rows
    }
}

impl JumpKernel for SiteKernel {
    fn n_sites(&self) -> usize {
        self.rows.len()
    }

    fn jump(&self, i: usize, config: &[Site]) -> FiniteMeasure {
        self.rows[config[i]].clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certification {
    ExactEnumeration,
    ClosedForm,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    Exhaustive,
    /// Pairs differing in one coordinate. A heuristic, never certified.
    Adjacent,
    Random { samples: usize, seed: u64 },
}

/// Countable state spaces cut to `{0..=k}`; sites above `k - margin` are
/// treated as boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub k: usize,
    pub margin: usize,
}

impl Truncation {
    pub fn interior(&self, s: Site) -> bool {
        s + self.margin <= self.k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchStats {
    pub pairs_examined: usize,
    pub strategy: Strategy,
    pub truncation: Option<Truncation>,
    /// Pairs touching the truncation margin, evaluated but kept out of the bound.
    pub boundary_pairs: usize,
    pub boundary_sup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub bound: f64,
    pub sup_value: f64,
    pub witness: (Configuration, Configuration),
    pub certification: Certification,
    pub stats: SearchStats,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineOptions {
    pub truncation: Option<Truncation>,
    /// Upper limit on `|E|^{2N}` for exhaustive search.
    pub cap: f64,
    /// Worker threads; `None` uses the ambient rayon pool.
    pub workers: Option<usize>,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self { truncation: None, cap: 1e6, workers: None }
    }
}

/// `(1/N) sum_i J^{x_i,y_i}(F_i(x), F_i(y))`.
pub fn normalized_j_sum(kernel: &dyn JumpKernel, x: &Configuration, y: &Configuration, g: &GroundMetric) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let mut s = 0.0;
    for i in 0..x.len() {
        let (m1, m2) = (kernel.jump(i, x.sites()), kernel.jump(i, y.sites()));
        s += j_exact(x[i], y[i], &m1, &m2, g)?.value;
    }
    Ok(s / x.len() as f64)
}

/// Exact sup over ordered site pairs for a single particle.
pub fn bound_single(kernel: &SiteKernel, g: &GroundMetric, opts: &EngineOptions) -> Result<CurvatureReport> {
    let n = kernel.n_sites();
    if n != g.n_sites() {
        return Err(Error::InvalidModel(format!("kernel has {n} sites, metric has {}", g.n_sites())));
    }
    let configs: Vec<Vec<Site>> = (0..n).map(|s| vec![s]).collect();
    let jumps: Vec<Vec<FiniteMeasure>> = kernel.rows().iter().map(|r| vec![r.clone()]).collect();
    let pairs = move |a: usize| (0..n).filter(move |&b| b != a).map(move |b| (a, b));
    let outer: Vec<usize> = (0..n).collect();
    run(&configs, &jumps, g, &outer, &pairs, Strategy::Exhaustive, opts)
}

/// Sup over configuration pairs according to `strategy`.
pub fn bound_system(
    kernel: &dyn JumpKernel,
    g: &GroundMetric,
    n_particles: usize,
    strategy: Strategy,
    opts: &EngineOptions,
) -> Result<CurvatureReport> {
    let e = kernel.n_sites();
    if e != g.n_sites() {
        return Err(Error::InvalidModel(format!("kernel has {e} sites, metric has {}", g.n_sites())));
    }
    if n_particles == 0 || e == 0 {
        return Err(Error::InvalidArgument("empty configuration space".into()));
    }
    let n_configs_f = (e as f64).powi(n_particles as i32);
    let needed = match strategy {
        Strategy::Exhaustive => n_configs_f * n_configs_f,
        Strategy::Adjacent => n_configs_f * n_particles as f64 * (e as f64 - 1.0) / 2.0,
        Strategy::Random { .. } => 0.0,
    };
    if needed > opts.cap {
        return Err(Error::CapExceeded { needed, cap: opts.cap });
    }

    match strategy {
        Strategy::Random { samples, seed } => {
            if e < 2 {
                return Err(Error::InvalidArgument("need two sites to sample pairs".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut configs: Vec<Vec<Site>> = Vec::with_capacity(2 * samples);
            for _ in 0..samples {
                let a: Vec<Site> = (0..n_particles).map(|_| rng.gen_range(0..e)).collect();
                let mut b = a.clone();
                while b == a {
                    b = (0..n_particles).map(|_| rng.gen_range(0..e)).collect();
                }
                let (a, b) = if a < b { (a, b) } else { (b, a) };
                configs.push(a);
                configs.push(b);
            }
            let jumps = all_jumps(kernel, &configs);
            let outer: Vec<usize> = (0..samples).map(|k| 2 * k).collect();
            let pairs = |a: usize| std::iter::once((a, a + 1));
            run(&configs, &jumps, g, &outer, &pairs, strategy, opts)
        }
        _ => {
            let n_configs = n_configs_f as usize;
            let configs: Vec<Vec<Site>> = (0..n_configs).map(|k| decode(k, e, n_particles)).collect();
            let jumps = all_jumps(kernel, &configs);
            let outer: Vec<usize> = (0..n_configs).collect();
            if strategy == Strategy::Exhaustive {
                let pairs = move |a: usize| (a + 1..n_configs).map(move |b| (a, b));
                run(&configs, &jumps, g, &outer, &pairs, strategy, opts)
            } else {
                // raising one coordinate gives a lexicographically larger partner
                let cfgs = &configs;
                let pairs = move |a: usize| {
                    (0..n_particles).flat_map(move |i| {
                        let stride = e.pow((n_particles - 1 - i) as u32);
                        (cfgs[a][i] + 1..e).map(move |s| (a, a + (s - cfgs[a][i]) * stride))
                    })
                };
                run(&configs, &jumps, g, &outer, &pairs, strategy, opts)
            }
        }
    }
}

// Mixed-radix decoding; coordinate 0 is the most significant digit so index
// order is lexicographic order.
fn decode(mut k: usize, e: usize, n: usize) -> Vec<Site> {
    let mut v = vec![0; n];
    for slot in v.iter_mut().rev() {
        *slot = k % e;
        k /= e;
    }
    v
}

fn all_jumps(kernel: &dyn JumpKernel, configs: &[Vec<Site>]) -> Vec<Vec<FiniteMeasure>> {
    configs.par_iter().map(|c| (0..c.len()).map(|i| kernel.jump(i, c)).collect()).collect()
}

#[derive(Clone, Copy)]
struct Best {
    value: f64,
    a: usize,
    b: usize,
}

fn better(new: Best, old: Option<Best>, configs: &[Vec<Site>]) -> bool {
    match old {
        None => true,
        Some(o) => {
            new.value > o.value
                || (new.value == o.value && (&configs[new.a], &configs[new.b]) < (&configs[o.a], &configs[o.b]))
        }
    }
}

#[derive(Default, Clone, Copy)]
struct Partial {
    interior: Option<Best>,
    boundary: Option<Best>,
    examined: usize,
    boundary_pairs: usize,
}

fn run<I, F>(
    configs: &[Vec<Site>],
    jumps: &[Vec<FiniteMeasure>],
    g: &GroundMetric,
    outer: &[usize],
    pairs: &F,
    strategy: Strategy,
    opts: &EngineOptions,
) -> Result<CurvatureReport>
where
    F: Fn(usize) -> I + Sync,
    I: Iterator<Item = (usize, usize)>,
{
    let interior = |c: &[Site]| opts.truncation.map_or(true, |t| c.iter().all(|&s| t.interior(s)));
    let eval = |a: usize| -> Result<Partial> {
        let mut p = Partial::default();
        for (ia, ib) in pairs(a) {
            let (x, y) = (&configs[ia], &configs[ib]);
            let d = distance_unchecked(x, y, g);
            if d == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for i in 0..x.len() {
                s += j_exact(x[i], y[i], &jumps[ia][i], &jumps[ib][i], g)?.value;
            }
            let best = Best { value: s / x.len() as f64 / d, a: ia, b: ib };
            if interior(x) && interior(y) {
                p.examined += 1;
                if better(best, p.interior, configs) {
                    p.interior = Some(best);
                }
            } else {
                p.boundary_pairs += 1;
                if better(best, p.boundary, configs) {
                    p.boundary = Some(best);
                }
            }
        }
        Ok(p)
    };
    let partials: Vec<Result<Partial>> = match opts.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?
            .install(|| outer.par_iter().map(|&a| eval(a)).collect()),
        None => outer.par_iter().map(|&a| eval(a)).collect(),
    };
    let mut total = Partial::default();
    for p in partials {
        let p = p?;
        total.examined += p.examined;
        total.boundary_pairs += p.boundary_pairs;
        if let Some(b) = p.interior {
            if better(b, total.interior, configs) {
                total.interior = Some(b);
            }
        }
        if let Some(b) = p.boundary {
            if better(b, total.boundary, configs) {
                total.boundary = Some(b);
            }
        }
    }
    let best = total
        .interior
        .ok_or_else(|| Error::InvalidArgument("no pair of distinct interior configurations to examine".into()))?;
    let certification = match strategy {
        Strategy::Exhaustive => Certification::ExactEnumeration,
        _ => Certification::Sampled,
    };
    Ok(CurvatureReport {
        bound: -best.value,
        sup_value: best.value,
        witness: (Configuration::new(configs[best.a].clone())?, Configuration::new(configs[best.b].clone())?),
        certification,
        stats: SearchStats {
            pairs_examined: total.examined,
            strategy,
            truncation: opts.truncation,
            boundary_pairs: total.boundary_pairs,
            boundary_sup: total.boundary.map(|b| b.value),
        },
    })
}

/// Per-particle optimal couplings of the augmented jump measures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingRates {
    pub plans: Vec<TransportPlan>,
    pub total_rate: f64,
}

impl CouplingRates {
    /// Rate of change of the distance under the coupling:
    /// `(1/N) sum_i (cost_i - mass_i d(x_i, y_i))`.
    pub fn drift(&self, x: &Configuration, y: &Configuration, g: &GroundMetric) -> f64 {
        let s: f64 = self.plans.iter().enumerate().map(|(i, p)| p.cost - p.mass() * g.d(x[i], y[i])).sum();
        s / x.len() as f64
    }
}

pub fn coupling_rates(kernel: &dyn JumpKernel, x: &Configuration, y: &Configuration, g: &GroundMetric) -> Result<CouplingRates> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    x.check(g)?;
    y.check(g)?;
    let mut plans = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let (m1, m2) = (kernel.jump(i, x.sites()), kernel.jump(i, y.sites()));
        let (a, b) = augmented(x[i], y[i], &m1, &m2);
        plans.push(optimal_plan(&a, &b, g)?);
    }
    let total_rate = plans.iter().map(|p| p.mass()).sum();
    Ok(CouplingRates { plans, total_rate })
}
