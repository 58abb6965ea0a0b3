use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rates::RateSeq;
use crate::curvature::{Certification, JumpKernel};
use crate::error::{Error, Result};
use crate::space::{FiniteMeasure, GroundMetric, Site};
use crate::transport::wasserstein;

/// Rows of a stochastic matrix as measures, after checking them.
pub fn stochastic_rows(p: &[Vec<f64>]) -> Result<Vec<FiniteMeasure>> {
    p.iter()
        .enumerate()
        .map(|(x, row)| {
            if row.len() != p.len() {
                return Err(Error::InvalidModel("transition matrix is not square".into()));
            }
            let m = FiniteMeasure::new(row.iter().copied().enumerate())?;
            if (m.mass() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!("row {x} of P sums to {}", m.mass())));
            }
            Ok(m)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaP {
    /// `(x, y, theta(x, y))` for ordered pairs `x != y`.
    pub pairs: Vec<(Site, Site, f64)>,
    pub inf: f64,
}

/// Discrete-time curvature `1 - W(P_x, P_y) / d(x, y)` of a transition matrix.
pub fn theta_p(p: &[Vec<f64>], g: &GroundMetric) -> Result<ThetaP> {
    let rows = stochastic_rows(p)?;
    if rows.len() != g.n_sites() {
        return Err(Error::InvalidModel(format!("P has {} rows, metric has {} sites", rows.len(), g.n_sites())));
    }
    if rows.len() < 2 {
        return Err(Error::InvalidModel("need two sites".into()));
    }
    let mut pairs = Vec::with_capacity(rows.len() * (rows.len() - 1));
    for x in 0..rows.len() {
        for y in (0..rows.len()).filter(|&y| y != x) {
            pairs.push((x, y, 1.0 - wasserstein(&rows[x], &rows[y], g)? / g.d(x, y)));
        }
    }
    let inf = pairs.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    Ok(ThetaP { pairs, inf })
}

/// Particles leave a site holding `n` of them at rate `c_x(n)` and move by `P`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroRange {
    pub p: Vec<Vec<f64>>,
    /// One sequence shared by all sites, or one per site; indexed by occupancy.
    pub rates: Vec<RateSeq>,
}

impl ZeroRange {
    pub fn n_sites(&self) -> usize {
        self.p.len()
    }

    pub fn c(&self, x: Site, n: usize) -> f64 {
        let seq = if self.rates.len() == 1 { &self.rates[0] } else { &self.rates[x] };
        seq.at(n)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        stochastic_rows(&self.p)?;
        if self.rates.len() != 1 && self.rates.len() != self.n_sites() {
            return Err(Error::InvalidModel(format!("{} rate sequences for {} sites", self.rates.len(), self.n_sites())));
        }
        for (x, seq) in self.rates.iter().enumerate() {
            seq.check(&format!("c[{x}]"), 1, n.max(1), false)?;
        }
        Ok(())
    }

    pub fn kernel(&self, n: usize) -> Result<ZeroRangeKernel> {
        self.validate(n)?;
        Ok(ZeroRangeKernel { rows: stochastic_rows(&self.p)?, spec: self.clone() })
    }

    pub fn metric(&self) -> Result<GroundMetric> {
        GroundMetric::trivial(self.n_sites())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroRangeKernel {
    rows: Vec<FiniteMeasure>,
    spec: ZeroRange,
}

impl JumpKernel for ZeroRangeKernel {
    fn n_sites(&self) -> usize {
        self.rows.len()
    }

    fn jump(&self, i: usize, config: &[Site]) -> FiniteMeasure {
        let x = config[i];
        let n = config.iter().filter(|&&s| s == x).count();
        self.rows[x].scaled(self.spec.c(x, n))
    }
}

/// Jumps `c(x, config) P_x` for an arbitrary rate function.
pub struct RateFnKernel<F> {
    rows: Vec<FiniteMeasure>,
    rate: F,
}

impl<F: Fn(Site, &[Site]) -> f64 + Sync> RateFnKernel<F> {
    pub fn new(p: &[Vec<f64>], rate: F) -> Result<Self> {
        Ok(Self { rows: stochastic_rows(p)?, rate })
    }
}

impl<F: Fn(Site, &[Site]) -> f64 + Sync> JumpKernel for RateFnKernel<F> {
    fn n_sites(&self) -> usize {
        self.rows.len()
    }

    fn jump(&self, i: usize, config: &[Site]) -> FiniteMeasure {
        self.rows[config[i]].scaled((self.rate)(config[i], config))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroRangeBound {
    pub value: f64,
    pub theta_star: f64,
    /// The subtracted rate-variation term.
    pub rate_term: f64,
    pub certification: Certification,
}

/// Occupancy form: `inf theta(x,y) c_x(n) ^ c_y(m) - 2 sup (1 - P_xx) (n/m) |c_x(n) - c_x(n+m)|`,
/// with `n, m >= 1` and `n + m <= N` in the sup.
pub fn zero_range_bound(spec: &ZeroRange, n: usize) -> Result<ZeroRangeBound> {
    spec.validate(n)?;
    if n < 1 {
        return Err(Error::InvalidArgument("empty occupancy range".into()));
    }
    let theta = theta_p(&spec.p, &spec.metric()?)?;
    let e = spec.n_sites();
    let mut lower = f64::INFINITY;
    for &(x, y, th) in &theta.pairs {
        for a in 1..=n {
            for b in 1..=n {
                lower = lower.min(th * spec.c(x, a).min(spec.c(y, b)));
            }
        }
    }
    let mut variation: f64 = 0.0;
    for x in 0..e {
        let stay = 1.0 - spec.p[x][x];
        for a in 1..n {
            for b in 1..=n - a {
                variation = variation.max(stay * a as f64 / b as f64 * (spec.c(x, a) - spec.c(x, a + b)).abs());
            }
        }
    }
    Ok(ZeroRangeBound {
        value: lower - 2.0 * variation,
        theta_star: theta.inf,
        rate_term: 2.0 * variation,
        certification: Certification::ClosedForm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConfigSet {
    Exhaustive,
    Sampled { samples: usize, seed: u64 },
}

/// General form with rates `c_x(config)`:
/// `inf theta(u,v) c_u(U) ^ c_v(V) - sup_x (1 - P_xx) |c_x|_Lip`, both over
/// pairs of distinct configurations from `set`. Sampling only yields an estimate.
pub fn zero_range_bound_general(
    p: &[Vec<f64>],
    rate: &(dyn Fn(Site, &[Site]) -> f64 + Sync),
    n: usize,
    set: ConfigSet,
    cap: f64,
) -> Result<ZeroRangeBound> {
    let e = p.len();
    let theta = theta_p(p, &GroundMetric::trivial(e)?)?;
    let th = |u: Site, v: Site| theta.pairs[u * (e - 1) + if v > u { v - 1 } else { v }].2;
    if n == 0 {
        return Err(Error::InvalidArgument("empty configuration range".into()));
    }

    let pairs: Vec<(Vec<Site>, Vec<Site>)> = match set {
        ConfigSet::Exhaustive => {
            let total = (e as f64).powi(2 * n as i32);
            if total > cap {
                return Err(Error::CapExceeded { needed: total, cap });
            }
            let configs = all_configs(e, n);
            let mut out = Vec::new();
            for a in &configs {
                for b in &configs {
                    if a != b {
                        out.push((a.clone(), b.clone()));
                    }
                }
            }
            out
        }
        ConfigSet::Sampled { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::with_capacity(samples);
            while out.len() < samples {
                let a: Vec<Site> = (0..n).map(|_| rng.gen_range(0..e)).collect();
                let mut b = a.clone();
                // perturb a random number of coordinates so near pairs are common
                let moves = rng.gen_range(1..=n);
                for _ in 0..moves {
                    let i = rng.gen_range(0..n);
                    b[i] = rng.gen_range(0..e);
                }
                if a != b {
                    out.push((a, b));
                }
            }
            out
        }
    };
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no configuration pairs".into()));
    }

    let mut lower = f64::INFINITY;
    let mut lip = vec![0.0f64; e];
    for (a, b) in &pairs {
        let dist = a.iter().zip(b).filter(|(s, t)| s != t).count() as f64 / n as f64;
        for &u in a {
            for &v in b.iter().filter(|&&v| v != u) {
                lower = lower.min(th(u, v) * rate(u, a).min(rate(v, b)));
            }
        }
        for x in 0..e {
            if a.contains(&x) && b.contains(&x) {
                lip[x] = lip[x].max((rate(x, a) - rate(x, b)).abs() / dist);
            }
        }
    }
    let variation = (0..e).map(|x| (1.0 - p[x][x]) * lip[x]).fold(0.0, f64::max);
    let certification = match set {
        ConfigSet::Exhaustive => Certification::ExactEnumeration,
        ConfigSet::Sampled { .. } => Certification::Sampled,
    };
    Ok(ZeroRangeBound { value: lower - variation, theta_star: theta.inf, rate_term: variation, certification })
}

fn all_configs(e: usize, n: usize) -> Vec<Vec<Site>> {
    let total = e.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let mut c = vec![0; n];
            for slot in c.iter_mut().rev() {
                *slot = code % e;
                code /= e;
            }
            c
        })
        .collect()
}
