use serde::{Deserialize, Serialize};

use crate::curvature::Certification;
use crate::error::{Error, Result};

/// Constants entering the bounds for systems on the line or in `R^n` whose
/// jump laws come from a fixed parametric family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelFamily {
    /// Exponential jumps of parameter `lambda`, with `beta` and `lambda` anti-monotone.
    Exponential { beta_over_lambda_lip: f64 },
    /// Centered Gaussian jumps with diagonal covariance.
    Gaussian { beta_sup: f64, beta_lip: f64, sqrt_cov_lip: f64, diag_norm_sup: f64 },
    /// Jump laws `alpha` on `{-n..n}`.
    Discrete { beta_sup: f64, beta_lip: f64, alpha_lip: f64, moment_sup: f64 },
}

pub fn kernel_family_bound(family: &KernelFamily) -> f64 {
    match *family {
        KernelFamily::Exponential { beta_over_lambda_lip } => -2.0 * beta_over_lambda_lip,
        KernelFamily::Gaussian { beta_sup, beta_lip, sqrt_cov_lip, diag_norm_sup } => {
            -2.0 * beta_sup * sqrt_cov_lip - 2.0 * beta_lip * diag_norm_sup
        }
        KernelFamily::Discrete { beta_sup, beta_lip, alpha_lip, moment_sup } => -2.0 * beta_sup * alpha_lip - 2.0 * beta_lip * moment_sup,
    }
}

/// Jump law of one particle at a sampled state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpLaw {
    Exponential { lambda: f64 },
    Gaussian { cov: Vec<Vec<f64>> },
    /// `pmf[k + n]` is the weight of a jump by `k`.
    Discrete { pmf: Vec<f64> },
}

/// A particle state `(x, config)` with its jump rate and law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSample {
    pub position: Vec<f64>,
    pub config: Vec<Vec<f64>>,
    pub beta: f64,
    #[serde(flatten)]
    pub law: JumpLaw,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(s, t)| (s - t) * (s - t)).sum::<f64>().sqrt()
}

/// `|x - y| + (1/N) sum_j |x_j - y_j|`.
fn state_distance(s: &KernelSample, t: &KernelSample) -> f64 {
    let n = s.config.len().max(1) as f64;
    euclid(&s.position, &t.position) + s.config.iter().zip(&t.config).map(|(a, b)| euclid(a, b)).sum::<f64>() / n
}

/// Measure norm `sum_{k=-n}^{n} (n - k) |mu(k)|` on `{-n..n}`.
pub fn discrete_norm(mu: &[f64]) -> f64 {
    let n = (mu.len() / 2) as f64;
    mu.iter().enumerate().map(|(j, w)| (n - (j as f64 - n)) * w.abs()).sum()
}

/// `sum_l |sum_{k<=l} (a(k) - b(k))|`: the transport distance between two
/// laws on `{-n..n}`.
pub fn discrete_cdf_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut cum = 0.0;
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b).take(a.len().saturating_sub(1)) {
        cum += x - y;
        total += cum.abs();
    }
    total
}

fn check_samples(samples: &[KernelSample]) -> Result<()> {
    let first = samples.first().ok_or_else(|| Error::InvalidArgument("empty kernel sample".into()))?;
    for s in samples {
        if s.config.len() != first.config.len() || s.position.len() != first.position.len() {
            return Err(Error::InvalidArgument("kernel samples differ in shape".into()));
        }
        if !(s.beta >= 0.0 && s.beta.is_finite()) {
            return Err(Error::InvalidModel(format!("jump rate {} is out of range", s.beta)));
        }
    }
    Ok(())
}

/// Largest ratio `|phi(s) - phi(t)| / dist(s, t)` over sample pairs.
fn lipschitz_over<T>(samples: &[KernelSample], values: &[T], diff: impl Fn(&T, &T) -> f64) -> f64 {
    let mut lip: f64 = 0.0;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let d = state_distance(&samples[i], &samples[j]);
            if d > 0.0 {
                lip = lip.max(diff(&values[i], &values[j]) / d);
            }
        }
    }
    lip
}

/// Estimates the family constants over an explicit sample of states. The
/// result is only as good as the sample and is tagged accordingly.
pub fn estimate_family(samples: &[KernelSample]) -> Result<(KernelFamily, Certification)> {
    check_samples(samples)?;
    let betas: Vec<f64> = samples.iter().map(|s| s.beta).collect();
    let beta_sup = betas.iter().copied().fold(0.0, f64::max);
    let beta_lip = lipschitz_over(samples, &betas, |a, b| (a - b).abs());
    let family = match &samples[0].law {
        JumpLaw::Exponential { .. } => {
            let lambdas = samples
                .iter()
                .map(|s| match s.law {
                    JumpLaw::Exponential { lambda } if lambda > 0.0 => Ok(lambda),
                    _ => Err(Error::InvalidModel("mixed or invalid exponential laws".into())),
                })
                .collect::<Result<Vec<f64>>>()?;
            for i in 0..samples.len() {
                for j in i + 1..samples.len() {
                    if (betas[i] - betas[j]) * (lambdas[i] - lambdas[j]) > 0.0 {
                        return Err(Error::InvalidModel(format!("beta and lambda are not anti-monotone at samples {i}, {j}")));
                    }
                }
            }
            let ratio: Vec<f64> = betas.iter().zip(&lambdas).map(|(b, l)| b / l).collect();
            KernelFamily::Exponential { beta_over_lambda_lip: lipschitz_over(samples, &ratio, |a, b| (a - b).abs()) }
        }
        JumpLaw::Gaussian { .. } => {
            let diags = samples
                .iter()
                .map(|s| match &s.law {
                    JumpLaw::Gaussian { cov } => gaussian_diag(cov),
                    _ => Err(Error::InvalidModel("mixed jump laws".into())),
                })
                .collect::<Result<Vec<Vec<f64>>>>()?;
            let roots: Vec<Vec<f64>> = diags.iter().map(|d| d.iter().map(|v| v.sqrt()).collect()).collect();
            let sqrt_cov_lip = lipschitz_over(samples, &roots, |a, b| euclid(a, b));
            let diag_norm_sup = diags.iter().map(|d| d.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
            KernelFamily::Gaussian { beta_sup, beta_lip, sqrt_cov_lip, diag_norm_sup }
        }
        JumpLaw::Discrete { pmf } => {
            let width = pmf.len();
            let pmfs = samples
                .iter()
                .map(|s| match &s.law {
                    JumpLaw::Discrete { pmf } if pmf.len() == width && width % 2 == 1 => {
                        let mass: f64 = pmf.iter().sum();
                        if pmf.iter().any(|w| *w < 0.0) || (mass - 1.0).abs() > 1e-9 {
                            return Err(Error::InvalidModel("jump law is not a probability vector".into()));
                        }
                        Ok(pmf.clone())
                    }
                    _ => Err(Error::InvalidModel("discrete laws must share an odd width".into())),
                })
                .collect::<Result<Vec<Vec<f64>>>>()?;
            let alpha_lip = lipschitz_over(samples, &pmfs, |a, b| {
                discrete_norm(&a.iter().zip(b.iter()).map(|(s, t)| s - t).collect::<Vec<_>>())
            });
            let half = (width / 2) as f64;
            let moment_sup = pmfs
                .iter()
                .map(|p| p.iter().enumerate().map(|(j, w)| (j as f64 - half).abs() * w).sum::<f64>())
                .fold(0.0, f64::max);
            KernelFamily::Discrete { beta_sup, beta_lip, alpha_lip, moment_sup }
        }
    };
    Ok((family, Certification::Sampled))
}

fn gaussian_diag(cov: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = cov.len();
    let mut diag = Vec::with_capacity(n);
    for (i, row) in cov.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidModel("covariance is not square".into()));
        }
        for (j, &v) in row.iter().enumerate() {
            if i != j && v != 0.0 {
                return Err(Error::InvalidModel("only diagonal covariances are supported".into()));
            }
        }
        if !(row[i] >= 0.0) {
            return Err(Error::InvalidModel("negative variance".into()));
        }
        diag.push(row[i]);
    }
    Ok(diag)
}
