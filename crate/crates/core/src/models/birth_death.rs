use serde::{Deserialize, Serialize};

use super::rates::RateSeq;
use crate::curvature::SiteKernel;
use crate::error::{Error, Result};
use crate::space::{FiniteMeasure, GroundMetric, Site};

/// Birth–death rates on `{0..=k}` with line weights `u_0..u_{k-1}`.
///
/// The death rate at 0 is always taken to be zero, whatever `death` says there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirthDeath {
    pub birth: RateSeq,
    pub death: RateSeq,
    pub weights: RateSeq,
    pub k: usize,
}

impl BirthDeath {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidModel(format!("truncation K = {} is below 2", self.k)));
        }
        self.birth.check("birth", 0, self.k, false)?;
        self.death.check("death", 1, self.k, false)?;
        self.weights.check("weights", 0, self.k - 1, true)
    }

    pub fn b(&self, x: Site) -> f64 {
        self.birth.at(x)
    }

    pub fn d(&self, x: Site) -> f64 {
        if x == 0 {
            0.0
        } else {
            self.death.at(x)
        }
    }

    /// `u_k`, with `u_{-1} = 0`.
    pub fn u(&self, k: isize) -> f64 {
        if k < 0 {
            0.0
        } else {
            self.weights.at(k as usize)
        }
    }

    pub fn metric(&self) -> Result<GroundMetric> {
        self.validate()?;
        let u: Vec<f64> = (0..self.k).map(|j| self.weights.at(j)).collect();
        GroundMetric::weighted_line(&u)
    }

    /// Nearest-neighbour kernel, births suppressed at `k`.
    pub fn kernel(&self) -> Result<SiteKernel> {
        self.validate()?;
        self.build(1)
    }

    /// Births jump by two, deaths by one; births leaving `{0..=k}` are dropped.
    pub fn modified_kernel(&self) -> Result<SiteKernel> {
        self.validate()?;
        self.build(2)
    }

    fn build(&self, step: usize) -> Result<SiteKernel> {
        let rows = (0..=self.k)
            .map(|x| {
                let mut atoms = Vec::with_capacity(2);
                if x >= 1 {
                    atoms.push((x - 1, self.d(x)));
                }
                if x + step <= self.k {
                    atoms.push((x + step, self.b(x)));
                }
                FiniteMeasure::new(atoms)
            })
            .collect::<Result<Vec<_>>>()?;
        SiteKernel::new(rows)
    }

    fn ratio(&self, num: isize, x: Site) -> f64 {
        self.u(num) / self.u(x as isize)
    }

    /// Term of the classical bound at `x`.
    pub fn bd_term(&self, x: Site) -> f64 {
        let i = x as isize;
        self.b(x) + self.d(x + 1) - self.d(x) * self.ratio(i - 1, x) - self.b(x + 1) * self.ratio(i + 1, x)
    }

    /// Term of the modified-chain bound at `x`; `classical` swaps
    /// `|b_{x+1} - b_x|` for `b_x + b_{x+1}`.
    pub fn modified_term(&self, x: Site, classical: bool) -> f64 {
        let i = x as isize;
        let (b0, b1) = (self.b(x), self.b(x + 1));
        let spread = if classical { b0 + b1 } else { (b1 - b0).abs() };
        b0 + self.d(x + 1) - self.d(x) * self.ratio(i - 1, x) - spread * self.ratio(i + 1, x) - b1 * self.ratio(i + 2, x)
    }

    /// Transport cost between the augmented jump measures of the modified
    /// chain at `(x, x + 1)`.
    pub fn modified_adjacent_cost(&self, x: Site) -> f64 {
        let i = x as isize;
        let (dx, b0, b1) = (self.d(x), self.b(x), self.b(x + 1));
        dx * self.u(i - 1) + (dx + b1) * self.u(i) + (b1 - b0).abs() * self.u(i + 1) + b1 * self.u(i + 2)
    }
}

fn infimum(terms: impl Iterator<Item = f64>) -> f64 {
    terms.fold(f64::INFINITY, f64::min)
}

/// `inf_x b_x + d_{x+1} - d_x u_{x-1}/u_x - b_{x+1} u_{x+1}/u_x` over `x <= k - 2`.
pub fn bd_bound(bd: &BirthDeath) -> Result<f64> {
    bd.validate()?;
    Ok(infimum((0..=bd.k - 2).map(|x| bd.bd_term(x))))
}

/// Bound for the modified chain over `x <= k - 3`.
pub fn modified_bd_bound(bd: &BirthDeath) -> Result<f64> {
    modified(bd, false)
}

/// The same bound obtained with the classical coupling at adjacent pairs.
pub fn modified_bd_classical_bound(bd: &BirthDeath) -> Result<f64> {
    modified(bd, true)
}

fn modified(bd: &BirthDeath, classical: bool) -> Result<f64> {
    bd.validate()?;
    if bd.k < 3 {
        return Err(Error::InvalidModel("modified chain needs K >= 3".into()));
    }
    Ok(infimum((0..=bd.k - 3).map(|x| bd.modified_term(x, classical))))
}

/// First eigenpair of the chain killed at 0, on `{1..=k}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenPair {
    pub lambda0: f64,
    /// `eta[j]` is `eta(j + 1)`; normalized so `eta(1) = 1`.
    pub eta: Vec<f64>,
    pub residual: f64,
}

impl EigenPair {
    pub fn eta_sup(&self) -> f64 {
        self.eta.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_increasing(&self) -> bool {
        self.eta.windows(2).all(|w| w[1] > w[0])
    }

    /// Line metric `d(x, y) = |eta(x) - eta(y)|` on `{0..=k}` with `eta(0) = 0`.
    pub fn metric(&self) -> Result<GroundMetric> {
        let mut prev = 0.0;
        let u: Vec<f64> = self
            .eta
            .iter()
            .map(|&e| {
                let step = e - prev;
                prev = e;
                step
            })
            .collect();
        GroundMetric::weighted_line(&u)
    }
}

const EIGEN_MAX_ITER: usize = 500;

/// Inverse iteration on the killed generator, births suppressed at `k`.
pub fn bd_eigen(bd: &BirthDeath) -> Result<EigenPair> {
    bd.validate()?;
    let k = bd.k;
    let b: Vec<f64> = (1..=k).map(|x| if x == k { 0.0 } else { bd.b(x) }).collect();
    let d: Vec<f64> = (1..=k).map(|x| bd.d(x)).collect();
    if d.iter().any(|&r| r <= 0.0) {
        return Err(Error::InvalidModel("death rates must be positive on 1..=K".into()));
    }
    let diag: Vec<f64> = b.iter().zip(&d).map(|(bx, dx)| bx + dx).collect();
    let apply = |v: &[f64]| -> Vec<f64> {
        (0..k)
            .map(|j| {
                let left = if j > 0 { v[j - 1] } else { 0.0 };
                let right = if j + 1 < k { v[j + 1] } else { 0.0 };
                diag[j] * v[j] - d[j] * left - b[j] * right
            })
            .collect()
    };
    let residual_of = |eta: &[f64], lambda: f64| -> f64 {
        apply(eta).iter().zip(eta).map(|(a, e)| (a - lambda * e).abs()).fold(0.0, f64::max)
    };

    let mut eta = vec![1.0; k];
    let mut shift = 0.0;
    let mut lambda = f64::NAN;
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    for _ in 0..EIGEN_MAX_ITER {
        let sub: Vec<f64> = d[1..].iter().map(|x| -x).collect();
        let sup: Vec<f64> = b[..k - 1].iter().map(|x| -x).collect();
        let main: Vec<f64> = diag.iter().map(|x| x - shift).collect();
        let y = match solve_tridiagonal(sub, main, sup, eta.clone()) {
            Some(y) => y,
            None => {
                // exact hit on an eigenvalue
                shift *= 1.0 - 1e-12;
                continue;
            }
        };
        let ey: f64 = eta.iter().zip(&y).map(|(a, c)| a * c).sum();
        let ee: f64 = eta.iter().map(|a| a * a).sum();
        let estimate = shift + ee / ey;
        let scale = y.iter().copied().fold(0.0, |m: f64, v| if v.abs() > m.abs() { v } else { m });
        if scale == 0.0 || !scale.is_finite() {
            return Err(Error::Numeric("inverse iteration collapsed".into()));
        }
        eta = y.iter().map(|v| v / scale).collect();
        let settled = lambda.is_finite() && (estimate - lambda).abs() <= 1e-3 * estimate.abs();
        lambda = estimate;
        let res = residual_of(&eta, lambda);
        let sup_norm = eta.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        if best.as_ref().map_or(true, |(r, _, _)| res < *r) {
            best = Some((res, eta.clone(), lambda));
        }
        if res <= 1e-10 * sup_norm {
            break;
        }
        if settled {
            shift = lambda;
        }
    }
    let (_, eta, lambda0) = best.ok_or_else(|| Error::Numeric("inverse iteration did not run".into()))?;
    let first = eta[0];
    if first <= 0.0 {
        return Err(Error::Numeric("eigenvector is not positive".into()));
    }
    let eta: Vec<f64> = eta.iter().map(|v| v / first).collect();
    let residual = residual_of(&eta, lambda0);
    let sup_norm = eta.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if residual > 1e-8 * sup_norm || lambda0 <= 0.0 {
        return Err(Error::Numeric(format!("eigen residual {residual:e} above target")));
    }
    Ok(EigenPair { lambda0, eta, residual })
}

/// Tridiagonal solve with partial pivoting. `sub` and `sup` have length `n - 1`.
fn solve_tridiagonal(mut sub: Vec<f64>, mut main: Vec<f64>, mut sup: Vec<f64>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = main.len();
    if n == 1 {
        return (main[0] != 0.0).then(|| vec![rhs[0] / main[0]]);
    }
    // second superdiagonal fill-in from row swaps, stored in `sub`
    for i in 0..n - 1 {
        if main[i].abs() >= sub[i].abs() {
            if main[i] == 0.0 {
                return None;
            }
            let fact = sub[i] / main[i];
            main[i + 1] -= fact * sup[i];
            rhs[i + 1] -= fact * rhs[i];
            sub[i] = 0.0;
        } else {
            let fact = main[i] / sub[i];
            main[i] = sub[i];
            let temp = main[i + 1];
            main[i + 1] = sup[i] - fact * temp;
            if i + 2 < n {
                sub[i] = sup[i + 1];
                sup[i + 1] = -fact * sub[i];
            } else {
                sub[i] = 0.0;
            }
            sup[i] = temp;
            rhs.swap(i, i + 1);
            rhs[i + 1] -= fact * rhs[i];
        }
    }
    if main[n - 1] == 0.0 {
        return None;
    }
    rhs[n - 1] /= main[n - 1];
    rhs[n - 2] = (rhs[n - 2] - sup[n - 2] * rhs[n - 1]) / main[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        rhs[i] = (rhs[i] - sup[i] * rhs[i + 1] - sub[i] * rhs[i + 2]) / main[i];
    }
    Some(rhs)
}

/// `c (theta - |eta|_inf / eta(1)) + lambda_0`.
pub fn fv_eigen_bound(eigen: &EigenPair, c: f64, theta: f64) -> f64 {
    c * (theta - eigen.eta_sup() / eigen.eta[0]) + eigen.lambda0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdiSeries {
    /// `partial_sums[n - 1]` is the series truncated at level `n`.
    pub partial_sums: Vec<f64>,
    pub last_increment: f64,
    /// Last increment below `1e-3` of the sum and non-increasing.
    pub converged: bool,
}

/// Partial sums of `S = sum_{k>=1} (d_k a_k)^{-1} sum_{l>=k} a_l` with both
/// sums cut at level `n`, for `n = 1..=k`.
///
/// Runs on the ratio recurrence `R_n = R_{n-1} b_{n-1} / d_n + 1/d_n`, which
/// never forms the products `a_k` and so cannot overflow. Levels where `a_n`
/// vanishes contribute no new term.
pub fn cdi_series(bd: &BirthDeath) -> Result<CdiSeries> {
    bd.validate()?;
    let mut partial_sums = Vec::with_capacity(bd.k);
    let (mut r, mut s) = (0.0, 0.0);
    let mut alive = true;
    let mut increments = Vec::with_capacity(bd.k);
    for n in 1..=bd.k {
        let dn = bd.d(n);
        if dn <= 0.0 {
            return Err(Error::InvalidModel(format!("death rate at {n} must be positive")));
        }
        if n >= 2 && bd.b(n - 1) == 0.0 {
            alive = false;
        }
        r = r * (if n >= 2 { bd.b(n - 1) } else { 0.0 }) / dn + if alive { 1.0 / dn } else { 0.0 };
        s += r;
        increments.push(r);
        partial_sums.push(s);
    }
    let last_increment = *increments.last().unwrap_or(&0.0);
    let non_increasing = increments.len() < 2 || increments[increments.len() - 1] <= increments[increments.len() - 2];
    let converged = non_increasing && last_increment < 1e-3 * s.max(f64::MIN_POSITIVE);
    Ok(CdiSeries { partial_sums, last_increment, converged })
}
