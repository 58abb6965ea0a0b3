//! Exact stochastic simulation of particle systems and of their optimal coupling.
//!
//! Random numbers come from ChaCha8 (`rand_chacha`). A run with master seed `s`
//! draws replica `r` from the stream `ChaCha8Rng::seed_from_u64(s)` with
//! `set_stream(r)`, so replicas are independent and reproducible whatever the
//! thread schedule.

mod contraction;
mod herd;
mod stats;

pub use contraction::{contraction_estimate, geometric_grid, ContractionFit, ContractionOptions};
pub use herd::{herd_experiment, HerdOptions, HerdStats};
pub use stats::{chi_square_two_sample, ChiSquareTest};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::curvature::{coupling_rates, JumpKernel};
use crate::error::{Error, Result};
use crate::space::{Configuration, FiniteMeasure, GroundMetric, Site};

/// Generator for replica `replica` of a run seeded with `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// Event times, strictly increasing in `(0, horizon]`.
    pub times: Vec<f64>,
    /// `states[0]` is the start; `states[k + 1]` follows event `k`.
    pub states: Vec<Configuration>,
    pub seed: u64,
    pub horizon: f64,
    /// Jumps onto the current site, which leave the state unchanged and are not recorded.
    pub null_events: usize,
}

impl Trajectory {
    /// State at time `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> &Configuration {
        &self.states[self.times.partition_point(|&s| s <= t)]
    }

    pub fn final_state(&self) -> &Configuration {
        self.states.last().expect("trajectory holds its start")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<(Configuration, Configuration)>,
    pub seed: u64,
    pub horizon: f64,
    pub null_events: usize,
}

impl CoupledTrajectory {
    pub fn state_at(&self, t: f64) -> &(Configuration, Configuration) {
        &self.states[self.times.partition_point(|&s| s <= t)]
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon {horizon} must be positive and finite")));
    }
    Ok(())
}

fn exponential<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    -(1.0 - rng.gen::<f64>()).ln() / rate
}

/// Index drawn with probability proportional to `weights`.
fn pick<R: Rng>(rng: &mut R, weights: impl Iterator<Item = f64> + Clone, total: f64) -> usize {
    let target = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, w) in weights.enumerate() {
        if w > 0.0 {
            acc += w;
            last = k;
            if target < acc {
                return k;
            }
        }
    }
    last
}

fn check_rates(jumps: &[FiniteMeasure]) -> Result<f64> {
    let total: f64 = jumps.iter().map(FiniteMeasure::mass).sum();
    if !total.is_finite() {
        return Err(Error::Numeric("infinite total jump rate".into()));
    }
    Ok(total)
}

/// Gillespie simulation of the particle system up to `horizon`.
pub fn simulate(kernel: &dyn JumpKernel, start: &Configuration, horizon: f64, seed: u64) -> Result<Trajectory> {
    simulate_with(kernel, start, horizon, seed, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub(crate) fn simulate_with<R: Rng>(
    kernel: &dyn JumpKernel,
    start: &Configuration,
    horizon: f64,
    seed: u64,
    rng: &mut R,
) -> Result<Trajectory> {
    check_horizon(horizon)?;
    check_sites(kernel, start)?;
    let mut state = start.clone();
    let mut traj = Trajectory { times: Vec::new(), states: vec![state.clone()], seed, horizon, null_events: 0 };
    let mut t = 0.0;
    loop {
        let jumps: Vec<FiniteMeasure> = (0..state.len()).map(|i| kernel.jump(i, state.sites())).collect();
        let total = check_rates(&jumps)?;
        if total <= 0.0 {
            break;
        }
        t += exponential(rng, total);
        if t > horizon {
            break;
        }
        let i = pick(rng, jumps.iter().map(FiniteMeasure::mass), total);
        let m = &jumps[i];
        let dest = m.atoms()[pick(rng, m.atoms().iter().map(|a| a.1), m.mass())].0;
        if dest == state[i] {
            traj.null_events += 1;
            continue;
        }
        state.set(i, dest);
        traj.times.push(t);
        traj.states.push(state.clone());
    }
    Ok(traj)
}

fn check_sites(kernel: &dyn JumpKernel, c: &Configuration) -> Result<()> {
    let n = kernel.n_sites();
    match c.sites().iter().find(|&&s| s >= n) {
        Some(&site) => Err(Error::UnknownSite { site, size: n }),
        None => Ok(()),
    }
}

/// One transition of the coupled chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledEvent {
    pub wait: f64,
    pub particle: usize,
    pub to: (Site, Site),
}

/// Draws the next transition of the optimal coupling from `(y, z)`; `None`
/// when both copies are frozen.
pub fn sample_coupled_event<R: Rng>(
    kernel: &dyn JumpKernel,
    g: &GroundMetric,
    y: &Configuration,
    z: &Configuration,
    rng: &mut R,
) -> Result<Option<CoupledEvent>> {
    let rates = coupling_rates(kernel, y, z, g)?;
    if !(rates.total_rate > 0.0) {
        return Ok(None);
    }
    if !rates.total_rate.is_finite() {
        return Err(Error::Numeric("infinite total jump rate".into()));
    }
    let wait = exponential(rng, rates.total_rate);
    let particle = pick(rng, rates.plans.iter().map(|p| p.mass()), rates.total_rate);
    let plan = &rates.plans[particle];
    let k = pick(rng, plan.pairs.iter().map(|p| p.2), plan.mass());
    let (u, v, _) = plan.pairs[k];
    Ok(Some(CoupledEvent { wait, particle, to: (u, v) }))
}

/// Simulation of the coupled pair `(Y, Z)`, with plans rebuilt after every event.
pub fn simulate_coupled(
    kernel: &dyn JumpKernel,
    g: &GroundMetric,
    y0: &Configuration,
    z0: &Configuration,
    horizon: f64,
    seed: u64,
) -> Result<CoupledTrajectory> {
    simulate_coupled_with(kernel, g, y0, z0, horizon, seed, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub(crate) fn simulate_coupled_with<R: Rng>(
    kernel: &dyn JumpKernel,
    g: &GroundMetric,
    y0: &Configuration,
    z0: &Configuration,
    horizon: f64,
    seed: u64,
    rng: &mut R,
) -> Result<CoupledTrajectory> {
    check_horizon(horizon)?;
    if y0.len() != z0.len() {
        return Err(Error::LengthMismatch(y0.len(), z0.len()));
    }
    y0.check(g)?;
    z0.check(g)?;
    let (mut y, mut z) = (y0.clone(), z0.clone());
    let mut traj = CoupledTrajectory { times: Vec::new(), states: vec![(y.clone(), z.clone())], seed, horizon, null_events: 0 };
    let mut t = 0.0;
    while let Some(ev) = sample_coupled_event(kernel, g, &y, &z, rng)? {
        t += ev.wait;
        if t > horizon {
            break;
        }
        let i = ev.particle;
        if (y[i], z[i]) == ev.to {
            traj.null_events += 1;
            continue;
        }
        y.set(i, ev.to.0);
        z.set(i, ev.to.1);
        traj.times.push(t);
        traj.states.push((y.clone(), z.clone()));
    }
    Ok(traj)
}
