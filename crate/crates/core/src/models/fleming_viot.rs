use serde::{Deserialize, Serialize};

use super::zero_range::{stochastic_rows, theta_p};
use crate::curvature::{JumpKernel, SiteKernel};
use crate::error::{Error, Result};
use crate::jfunc::j_exact;
use crate::space::{FiniteMeasure, GroundMetric, Site};

/// Own jumps `q(x, .)` plus relocation at rate `beta(x)` onto `mu_config P`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlemingViot {
    /// Rate matrix; the diagonal is ignored.
    pub q: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub p: Vec<Vec<f64>>,
    /// Bound on the metric; defaults to its diameter.
    #[serde(default)]
    pub d_inf: Option<f64>,
}

impl FlemingViot {
    pub fn n_sites(&self) -> usize {
        self.q.len()
    }

    pub fn validate(&self) -> Result<()> {
        let e = self.n_sites();
        if self.beta.len() != e || self.p.len() != e {
            return Err(Error::InvalidModel(format!("q has {e} rows, beta {} entries, P {} rows", self.beta.len(), self.p.len())));
        }
        if let Some(b) = self.beta.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
            return Err(Error::InvalidModel(format!("relocation rate {b} is out of range")));
        }
        stochastic_rows(&self.p)?;
        SiteKernel::from_matrix(&self.q)?;
        Ok(())
    }

    pub fn kernel(&self) -> Result<FvKernel> {
        self.validate()?;
        Ok(FvKernel { q: SiteKernel::from_matrix(&self.q)?, beta: self.beta.clone(), p: stochastic_rows(&self.p)? })
    }

    pub fn d_inf(&self, g: &GroundMetric) -> Result<f64> {
        let diam = g.diameter();
        match self.d_inf {
            None => Ok(diam),
            Some(v) if v >= diam - 1e-12 * diam.max(1.0) => Ok(v),
            Some(v) => Err(Error::InvalidModel(format!("d_inf = {v} is below the metric diameter {diam}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FvKernel {
    q: SiteKernel,
    beta: Vec<f64>,
    p: Vec<FiniteMeasure>,
}

impl JumpKernel for FvKernel {
    fn n_sites(&self) -> usize {
        self.beta.len()
    }

    fn jump(&self, i: usize, config: &[Site]) -> FiniteMeasure {
        let x = config[i];
        let w = self.beta[x] / config.len() as f64;
        config.iter().fold(self.q.row(x).clone(), |acc, &s| acc.plus(&self.p[s].scaled(w)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FvBound {
    pub value: f64,
    pub theta_star: f64,
    /// The sup term and the pair attaining it.
    pub sup_value: f64,
    pub witness: (Site, Site),
}

/// `-(1 - theta*) |beta|_inf - sup_{x != y} (J(q(x), q(y))/d + |beta(x) - beta(y)| d_inf / d - beta(x) v beta(y))`.
pub fn fv_bound(fv: &FlemingViot, g: &GroundMetric) -> Result<FvBound> {
    fv.validate()?;
    let e = fv.n_sites();
    if g.n_sites() != e {
        return Err(Error::InvalidModel(format!("model has {e} sites, metric has {}", g.n_sites())));
    }
    let theta = theta_p(&fv.p, g)?;
    let d_inf = fv.d_inf(g)?;
    let q = SiteKernel::from_matrix(&fv.q)?;
    let beta_sup = fv.beta.iter().copied().fold(0.0, f64::max);
    let mut best = (f64::NEG_INFINITY, (0, 0));
    for x in 0..e {
        for y in (0..e).filter(|&y| y != x) {
            let d = g.d(x, y);
            let j = j_exact(x, y, q.row(x), q.row(y), g)?.value;
            let (bx, by) = (fv.beta[x], fv.beta[y]);
            let term = j / d + (bx - by).abs() * d_inf / d - bx.max(by);
            if term > best.0 {
                best = (term, (x, y));
            }
        }
    }
    Ok(FvBound {
        value: -(1.0 - theta.inf) * beta_sup - best.0,
        theta_star: theta.inf,
        sup_value: best.0,
        witness: best.1,
    })
}
