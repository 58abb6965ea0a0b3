use rayon::prelude::*;
use serde::Serialize;

use super::{replica_rng, simulate_coupled_with};
use crate::curvature::JumpKernel;
use crate::error::{Error, Result};
use crate::space::{config_distance, Configuration, GroundMetric};

/// `points` times spaced geometrically over `[horizon / 100, horizon]`.
pub fn geometric_grid(horizon: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![horizon];
    }
    let lo = horizon / 100.0;
    (0..points).map(|k| lo * 100f64.powf(k as f64 / (points - 1) as f64)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionOptions {
    pub horizon: f64,
    pub replicas: usize,
    /// Defaults to [`geometric_grid`] with 20 points.
    pub grid: Option<Vec<f64>>,
    pub seed: u64,
    /// Theoretical bound to compare against.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionFit {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    /// Minus the slope of `ln(mean)` against time; `+inf` when coalesced.
    pub fitted_rate: f64,
    /// Delete-one jackknife standard error of `fitted_rate`.
    pub rate_se: f64,
    pub coalesced: bool,
    /// Grid points entering the fit.
    pub points_used: usize,
    pub replicas: usize,
    pub bound: Option<f64>,
    pub seed: u64,
}

impl ContractionFit {
    /// Whether the fitted rate clears `bound - 2 se`; `None` without a bound.
    pub fn consistent(&self) -> Option<bool> {
        self.bound.map(|b| self.coalesced || self.fitted_rate >= b - 2.0 * self.rate_se)
    }
}

/// Runs the optimal coupling from each start pair (cycled over replicas),
/// records `d(Y_t, Z_t)` on the grid and fits an exponential decay to the mean.
///
/// Only grid points where at least two replicas are still apart enter the
/// fit, so every jackknife subsample has a positive mean there.
pub fn contraction_estimate(
    kernel: &dyn JumpKernel,
    g: &GroundMetric,
    starts: &[(Configuration, Configuration)],
    opts: &ContractionOptions,
) -> Result<ContractionFit> {
    if opts.replicas < 30 {
        return Err(Error::InvalidArgument(format!("{} replicas; at least 30 required", opts.replicas)));
    }
    if starts.is_empty() {
        return Err(Error::InvalidArgument("no start pairs".into()));
    }
    let times = opts.grid.clone().unwrap_or_else(|| geometric_grid(opts.horizon, 20));
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) || times[0] < 0.0 {
        return Err(Error::InvalidArgument("time grid must be increasing and non-negative".into()));
    }
    let horizon = opts.horizon.max(*times.last().expect("non-empty"));

    let paths: Vec<Vec<f64>> = (0..opts.replicas)
        .into_par_iter()
        .map(|r| {
            let (y0, z0) = &starts[r % starts.len()];
            let mut rng = replica_rng(opts.seed, r as u64);
            let traj = simulate_coupled_with(kernel, g, y0, z0, horizon, opts.seed, &mut rng)?;
            times
                .iter()
                .map(|&t| {
                    let (y, z) = traj.state_at(t);
                    config_distance(y, z, g)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let reps = opts.replicas as f64;
    let m = times.len();
    let mut mean = vec![0.0; m];
    let mut se = vec![0.0; m];
    let mut alive = vec![0usize; m];
    for k in 0..m {
        let col: Vec<f64> = paths.iter().map(|p| p[k]).collect();
        mean[k] = col.iter().sum::<f64>() / reps;
        let var = col.iter().map(|v| (v - mean[k]).powi(2)).sum::<f64>() / (reps - 1.0);
        se[k] = (var / reps).sqrt();
        alive[k] = col.iter().filter(|&&v| v > 0.0).count();
    }
    let used: Vec<usize> = (0..m).filter(|&k| alive[k] >= 2).collect();
    let base = ContractionFit {
        times: times.clone(),
        mean: mean.clone(),
        se,
        fitted_rate: f64::INFINITY,
        rate_se: 0.0,
        coalesced: true,
        points_used: used.len(),
        replicas: opts.replicas,
        bound: opts.bound,
        seed: opts.seed,
    };
    if used.len() < 2 {
        return Ok(base);
    }

    let fit = |means: &dyn Fn(usize) -> f64| -> f64 {
        let xs: Vec<f64> = used.iter().map(|&k| times[k]).collect();
        let ys: Vec<f64> = used.iter().map(|&k| means(k).ln()).collect();
        -ols_slope(&xs, &ys)
    };
    let fitted_rate = fit(&|k| mean[k]);
    let sums: Vec<f64> = (0..m).map(|k| mean[k] * reps).collect();
    let jack: Vec<f64> = (0..opts.replicas).map(|r| fit(&|k| (sums[k] - paths[r][k]) / (reps - 1.0))).collect();
    let jmean = jack.iter().sum::<f64>() / reps;
    let rate_se = ((reps - 1.0) / reps * jack.iter().map(|v| (v - jmean).powi(2)).sum::<f64>()).sqrt();
    Ok(ContractionFit { fitted_rate, rate_se, coalesced: false, ..base })
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
