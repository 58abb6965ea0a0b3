//! Model catalog: kernel builders and closed-form curvature bounds.

pub mod agents;
pub mod birth_death;
pub mod fleming_viot;
pub mod kernel_family;
pub mod mean_field;
pub mod rates;
pub mod zero_range;

use serde::{Deserialize, Serialize};

pub use agents::{agents_bound, agents_bound_grid, herd_threshold, inf_sum_f, Agents, HerdThreshold, InfSum};
pub use birth_death::{bd_bound, bd_eigen, cdi_series, fv_eigen_bound, modified_bd_bound, BirthDeath, CdiSeries, EigenPair};
pub use fleming_viot::{fv_bound, FlemingViot, FvBound};
pub use kernel_family::{estimate_family, kernel_family_bound, KernelFamily, KernelSample};
pub use mean_field::{mean_field_bd_bound, MeanFieldBd, MeanRate};
pub use rates::{Polynomial, RateSeq};
pub use zero_range::{theta_p, zero_range_bound, ThetaP, ZeroRange, ZeroRangeBound};

use crate::curvature::{JumpKernel, SiteKernel, Truncation};
use crate::error::{Error, Result};
use crate::space::GroundMetric;

/// Sites within this distance of a truncation edge are boundary sites.
pub const TRUNCATION_MARGIN: usize = 5;

/// A particle model, independent of the number of particles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Independent particles with a dense rate matrix and an explicit metric.
    Chain { rates: Vec<Vec<f64>>, distances: Option<Vec<Vec<f64>>> },
    BirthDeath(BirthDeath),
    ModifiedBd(BirthDeath),
    Agents(Agents),
    ZeroRange(ZeroRange),
    FlemingViot(FlemingViot),
    MeanFieldBd(MeanFieldBd),
    KernelSystem { constants: KernelFamily },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Chain { .. } => "chain",
            ModelSpec::BirthDeath(_) => "birth_death",
            ModelSpec::ModifiedBd(_) => "modified_bd",
            ModelSpec::Agents(_) => "agents",
            ModelSpec::ZeroRange(_) => "zero_range",
            ModelSpec::FlemingViot(_) => "fleming_viot",
            ModelSpec::MeanFieldBd(_) => "mean_field_bd",
            ModelSpec::KernelSystem { .. } => "kernel_system",
        }
    }

    /// Ground metric on the (truncated) site set. Chains default to the trivial metric.
    pub fn metric(&self) -> Result<GroundMetric> {
        match self {
            ModelSpec::Chain { rates, distances } => match distances {
                Some(m) => GroundMetric::general(m.clone()),
                None => GroundMetric::trivial(rates.len()),
            },
            ModelSpec::BirthDeath(bd) | ModelSpec::ModifiedBd(bd) => bd.metric(),
            ModelSpec::Agents(a) => a.metric(),
            ModelSpec::ZeroRange(z) => z.metric(),
            ModelSpec::FlemingViot(fv) => GroundMetric::trivial(fv.n_sites()),
            ModelSpec::MeanFieldBd(m) => m.metric(),
            ModelSpec::KernelSystem { .. } => Err(no_finite_kernel()),
        }
    }

    pub fn truncation(&self) -> Option<Truncation> {
        let k = match self {
            ModelSpec::BirthDeath(bd) | ModelSpec::ModifiedBd(bd) => bd.k,
            ModelSpec::MeanFieldBd(m) => m.k,
            _ => return None,
        };
        Some(Truncation { k, margin: TRUNCATION_MARGIN })
    }

    /// Single-site kernel, for models whose particles do not interact.
    pub fn site_kernel(&self) -> Result<Option<SiteKernel>> {
        Ok(match self {
            ModelSpec::Chain { rates, .. } => Some(SiteKernel::from_matrix(rates)?),
            ModelSpec::BirthDeath(bd) => Some(bd.kernel()?),
            ModelSpec::ModifiedBd(bd) => Some(bd.modified_kernel()?),
            _ => None,
        })
    }
}

fn no_finite_kernel() -> Error {
    Error::InvalidModel("kernel systems on continuous spaces have no finite kernel".into())
}

/// Jump kernel of the `n`-particle system.
pub fn build_kernel(spec: &ModelSpec, n: usize) -> Result<Box<dyn JumpKernel + Send>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one particle".into()));
    }
    if let Some(k) = spec.site_kernel()? {
        return Ok(Box::new(k));
    }
    Ok(match spec {
        ModelSpec::Agents(a) => Box::new(a.kernel(n)?),
        ModelSpec::ZeroRange(z) => Box::new(z.kernel(n)?),
        ModelSpec::FlemingViot(fv) => Box::new(fv.kernel()?),
        ModelSpec::MeanFieldBd(m) => Box::new(m.kernel()?),
        ModelSpec::KernelSystem { .. } => return Err(no_finite_kernel()),
        _ => unreachable!("site kernels handled above"),
    })
}
