use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{exponential, replica_rng};
use crate::error::{Error, Result};
use crate::models::agents::Agents;
use crate::space::Site;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HerdOptions {
    pub n_agents: usize,
    pub start_site: Site,
    /// Exit once the share of the start site is at most this.
    pub z_threshold: f64,
    pub horizon: f64,
    pub replicas: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HerdStats {
    /// Exit time per replica; `None` when censored at the horizon.
    pub exit_times: Vec<Option<f64>>,
    pub censored_fraction: f64,
    /// Censored replicas count as the horizon.
    pub median_exit: f64,
    pub mean_exit: f64,
    pub log_mean_over_n: f64,
    pub n_agents: usize,
    pub horizon: f64,
}

/// First time the consensus site's share drops to `z_threshold`, starting
/// with every agent on `start_site`.
///
/// Agents are exchangeable, so only site occupancies are tracked: every agent
/// jumps at the same total rate `T + sum_y f(n_y / N)`, so the mover's site is
/// drawn in proportion to occupancy and its target in proportion to the
/// per-site rates.
pub fn herd_experiment(spec: &Agents, opts: &HerdOptions) -> Result<HerdStats> {
    spec.kernel(opts.n_agents.max(1))?;
    if opts.start_site >= spec.n_sites {
        return Err(Error::UnknownSite { site: opts.start_site, size: spec.n_sites });
    }
    if !(opts.horizon > 0.0) || opts.replicas == 0 {
        return Err(Error::InvalidArgument("herd run needs a positive horizon and replicas".into()));
    }
    let exit_times: Vec<Option<f64>> = (0..opts.replicas)
        .into_par_iter()
        .map(|r| run_one(spec, opts, &mut replica_rng(opts.seed, r as u64)))
        .collect();

    let filled: Vec<f64> = exit_times.iter().map(|t| t.unwrap_or(opts.horizon)).collect();
    let reps = opts.replicas as f64;
    let censored = exit_times.iter().filter(|t| t.is_none()).count() as f64 / reps;
    let mean_exit = filled.iter().sum::<f64>() / reps;
    let mut sorted = filled;
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median_exit = if sorted.len() % 2 == 1 { sorted[mid] } else { 0.5 * (sorted[mid - 1] + sorted[mid]) };
    Ok(HerdStats {
        exit_times,
        censored_fraction: censored,
        median_exit,
        mean_exit,
        log_mean_over_n: mean_exit.ln() / opts.n_agents as f64,
        n_agents: opts.n_agents,
        horizon: opts.horizon,
    })
}

fn run_one<R: Rng>(spec: &Agents, opts: &HerdOptions, rng: &mut R) -> Option<f64> {
    let n = opts.n_agents;
    let mut counts = vec![0usize; spec.n_sites];
    counts[opts.start_site] = n;
    let share = |c: usize| c as f64 / n as f64;
    if share(n) <= opts.z_threshold {
        return Some(0.0);
    }
    let mut t = 0.0;
    let mut targets = vec![0.0; spec.n_sites];
    loop {
        for (w, &c) in targets.iter_mut().zip(&counts) {
            *w = spec.rate(c, n);
        }
        let per_agent: f64 = targets.iter().sum();
        if per_agent <= 0.0 {
            return None;
        }
        t += exponential(rng, per_agent * n as f64);
        if t > opts.horizon {
            return None;
        }
        let from = draw(rng, &counts.iter().map(|&c| c as f64).collect::<Vec<_>>(), n as f64);
        let to = draw(rng, &targets, per_agent);
        if from == to {
            continue;
        }
        counts[from] -= 1;
        counts[to] += 1;
        if share(counts[opts.start_site]) <= opts.z_threshold {
            return Some(t);
        }
    }
}

fn draw<R: Rng>(rng: &mut R, weights: &[f64], total: f64) -> usize {
    super::pick(rng, weights.iter().copied(), total)
}
