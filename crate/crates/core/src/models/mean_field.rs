use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rates::RateSeq;
use crate::curvature::JumpKernel;
use crate::error::{Error, Result};
use crate::space::{Configuration, FiniteMeasure, GroundMetric, Site};

/// Interaction rate `base + slope * mean(config)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanRate {
    #[serde(default)]
    pub base: f64,
    #[serde(default)]
    pub slope: f64,
}

impl MeanRate {
    pub const ZERO: MeanRate = MeanRate { base: 0.0, slope: 0.0 };

    pub fn at(&self, config: &[Site]) -> f64 {
        let mean = config.iter().sum::<usize>() as f64 / config.len() as f64;
        self.base + self.slope * mean
    }
}

/// Birth–death particles on `{0..=k}` whose rates are shifted by
/// `q_plus` / `q_minus`, with the constants `a`, `b` claimed for the drift inequalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanFieldBd {
    pub birth: RateSeq,
    pub death: RateSeq,
    pub q_plus: MeanRate,
    pub q_minus: MeanRate,
    pub a: f64,
    pub b: f64,
    pub k: usize,
}

impl MeanFieldBd {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidModel("truncation K must be positive".into()));
        }
        self.birth.check("birth", 0, self.k, false)?;
        self.death.check("death", 1, self.k, false)?;
        if !(self.b > 0.0) || !self.a.is_finite() {
            return Err(Error::InvalidModel(format!("need real a and b > 0, got a = {}, b = {}", self.a, self.b)));
        }
        for (name, r) in [("q_plus", self.q_plus), ("q_minus", self.q_minus)] {
            let lo = r.base + r.slope.min(0.0) * self.k as f64;
            if lo < 0.0 {
                return Err(Error::InvalidModel(format!("{name} can be negative")));
            }
        }
        Ok(())
    }

    /// Total death rate, zero at the origin.
    pub fn down(&self, x: Site, config: &[Site]) -> f64 {
        if x == 0 {
            0.0
        } else {
            self.death.at(x) + self.q_minus.at(config)
        }
    }

    pub fn up(&self, x: Site, config: &[Site]) -> f64 {
        self.birth.at(x) + self.q_plus.at(config)
    }

    pub fn kernel(&self) -> Result<MeanFieldKernel> {
        self.validate()?;
        Ok(MeanFieldKernel { spec: self.clone() })
    }

    pub fn metric(&self) -> Result<GroundMetric> {
        GroundMetric::weighted_line(&vec![1.0; self.k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldKernel {
    spec: MeanFieldBd,
}

impl JumpKernel for MeanFieldKernel {
    fn n_sites(&self) -> usize {
        self.spec.k + 1
    }

    fn jump(&self, i: usize, config: &[Site]) -> FiniteMeasure {
        let x = config[i];
        let mut atoms = Vec::with_capacity(2);
        if x >= 1 {
            atoms.push((x - 1, self.spec.down(x, config)));
        }
        if x < self.spec.k {
            atoms.push((x + 1, self.spec.up(x, config)));
        }
        FiniteMeasure::new(atoms).expect("rates checked at construction")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanFieldReport {
    pub bound: f64,
    pub checks: usize,
    /// Largest excess of a left side over its right side (non-positive when valid).
    pub worst_slack: f64,
}

/// Returns `-a - b` after checking both drift inequalities on every
/// coordinate of every sampled pair; any violation rejects the constants.
pub fn mean_field_bd_bound(spec: &MeanFieldBd, sample: &[(Configuration, Configuration)]) -> Result<MeanFieldReport> {
    spec.validate()?;
    let g = spec.metric()?;
    let tol = 1e-9;
    let mut checks = 0;
    let mut worst = f64::NEG_INFINITY;
    for (xs, ys) in sample {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch(xs.len(), ys.len()));
        }
        xs.check(&g)?;
        ys.check(&g)?;
        let (xb, yb) = (xs.sites(), ys.sites());
        let dbar = xb.iter().zip(yb).map(|(&x, &y)| x.abs_diff(y)).sum::<usize>() as f64 / xb.len() as f64;
        for i in 0..xb.len() {
            let (x, y) = (xb[i], yb[i]);
            let (lhs, rhs) = if x == y {
                let lhs = (spec.q_minus.at(xb) - spec.q_minus.at(yb)).abs() + (spec.q_plus.at(xb) - spec.q_plus.at(yb)).abs();
                (lhs, spec.b * dbar)
            } else {
                let (lo, lo_cfg, hi, hi_cfg) = if x < y { (x, xb, y, yb) } else { (y, yb, x, xb) };
                let lhs = spec.down(lo, lo_cfg) - spec.up(lo, lo_cfg) - spec.down(hi, hi_cfg) + spec.up(hi, hi_cfg);
                (lhs, spec.a * (hi - lo) as f64 + spec.b * dbar)
            };
            checks += 1;
            let slack = lhs - rhs;
            worst = worst.max(slack);
            if slack > tol * (1.0 + rhs.abs()) {
                return Err(Error::Violation(format!(
                    "drift inequality fails at coordinate {i} of {xb:?} vs {yb:?}: {lhs} > {rhs}"
                )));
            }
        }
    }
    Ok(MeanFieldReport { bound: -spec.a - spec.b, checks, worst_slack: worst })
}

/// Uniform random configuration pairs on `{0..=k}^n`.
pub fn random_pairs(k: usize, n: usize, count: usize, seed: u64) -> Vec<(Configuration, Configuration)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || Configuration::new((0..n).map(|_| rng.gen_range(0..=k)).collect()).expect("n >= 1");
    (0..count).map(|_| (draw(), draw())).collect()
}
