//! Exact W1 distances and optimal plans between finite measures of equal mass.
//!
//! [`wasserstein`] dispatches on the metric kind: half the total variation for
//! the trivial metric, the CDF integral for line metrics and the
//! transportation simplex otherwise. The `_lp` variants always use the simplex
//! and serve as the reference route.

mod simplex;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::space::{BaseMeasure, FiniteMeasure, GroundMetric, LineMeasure, MetricKind, Site};

/// Relative tolerance on the mass balance of two measures.
pub const MASS_TOL: f64 = 1e-9;

/// Coupling of two measures with its cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportPlan {
    /// `(source, target, weight)` with positive weights, sorted by `(source, target)`.
    pub pairs: Vec<(Site, Site, f64)>,
    pub cost: f64,
    pub left: FiniteMeasure,
    pub right: FiniteMeasure,
}

impl TransportPlan {
    pub fn mass(&self) -> f64 {
        self.pairs.iter().map(|p| p.2).sum()
    }
}

/// Checks the masses agree within [`MASS_TOL`] and returns the common mass.
pub fn check_masses<S: Ord + Copy>(m1: &FiniteMeasure<S>, m2: &FiniteMeasure<S>) -> Result<f64> {
    let (a, b) = (m1.mass(), m2.mass());
    if (a - b).abs() > MASS_TOL * a.max(b).max(1.0) {
        return Err(Error::MassMismatch(a, b));
    }
    Ok(a.max(b))
}

/// Exact W1 distance.
pub fn wasserstein(m1: &FiniteMeasure, m2: &FiniteMeasure, g: &GroundMetric) -> Result<f64> {
    g.check_measure(m1)?;
    g.check_measure(m2)?;
    check_masses(m1, m2)?;
    match g.kind() {
        MetricKind::Trivial => half_total_variation(m1, m2),
        MetricKind::WeightedLine | MetricKind::MeasureLine => {
            let (a, b) = (g.to_line(m1).expect("line"), g.to_line(m2).expect("line"));
            wasserstein_line(&a, &b, g.base().expect("line"))
        }
        MetricKind::General => Ok(simplex_plan(m1, m2, g)?.cost),
    }
}

/// W1 through the transportation simplex, whatever the metric kind.
pub fn wasserstein_lp(m1: &FiniteMeasure, m2: &FiniteMeasure, g: &GroundMetric) -> Result<f64> {
    Ok(optimal_plan_lp(m1, m2, g)?.cost)
}

/// `sup_A m1(A) - m2(A)`, i.e. half the atom-wise L1 difference.
pub fn half_total_variation<S: Ord + Copy>(m1: &FiniteMeasure<S>, m2: &FiniteMeasure<S>) -> Result<f64> {
    check_masses(m1, m2)?;
    let (a, b) = (m1.atoms(), m2.atoms());
    let (mut i, mut j) = (0, 0);
    let mut l1 = 0.0;
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if x.0 == y.0 => {
                l1 += (x.1 - y.1).abs();
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x.0 < y.0 => {
                l1 += x.1;
                i += 1;
            }
            (Some(x), None) => {
                l1 += x.1;
                i += 1;
            }
            (_, Some(y)) => {
                l1 += y.1;
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    Ok(0.5 * l1)
}

/// `int |F1 - F2| dmu` for the line metric `d(x, y) = mu([min, max))`.
///
/// Both distribution functions are constant between consecutive atoms of
/// `m1 + m2`, so the integral is a finite sum of `|F1 - F2| * mu([t_k, t_{k+1}))`.
pub fn wasserstein_line(m1: &LineMeasure, m2: &LineMeasure, mu: &BaseMeasure) -> Result<f64> {
    check_masses(m1, m2)?;
    let (a, b) = (m1.atoms(), m2.atoms());
    let (mut i, mut j) = (0, 0);
    let (mut f1, mut f2) = (0.0, 0.0);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let t = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.0.min(y.0),
            (Some(x), None) => x.0,
            (None, Some(y)) => y.0,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i].0 == t {
            f1 += a[i].1;
            i += 1;
        }
        while j < b.len() && b[j].0 == t {
            f2 += b[j].1;
            j += 1;
        }
        let next = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.0.min(y.0),
            (Some(x), None) => x.0,
            (None, Some(y)) => y.0,
            (None, None) => break,
        };
        total += (f1 - f2).abs() * mu.interval(t.0, next.0);
    }
    Ok(total)
}

/// An optimal plan; closed-form couplings for trivial and line metrics,
/// the simplex otherwise.
pub fn optimal_plan(m1: &FiniteMeasure, m2: &FiniteMeasure, g: &GroundMetric) -> Result<TransportPlan> {
    g.check_measure(m1)?;
    g.check_measure(m2)?;
    check_masses(m1, m2)?;
    match g.kind() {
        MetricKind::Trivial => {
            let mut pairs = Vec::new();
            let mut rest1 = Vec::new();
            let mut rest2 = Vec::new();
            for &(s, w) in m1.atoms() {
                let common = w.min(m2.weight(s));
                if common > 0.0 {
                    pairs.push((s, s, common));
                }
                if w > common {
                    rest1.push((s, w - common));
                }
            }
            for &(s, w) in m2.atoms() {
                let common = w.min(m1.weight(s));
                if w > common {
                    rest2.push((s, w - common));
                }
            }
            pairs.extend(northwest(&rest1, &rest2));
            Ok(finish(pairs, m1, m2, g))
        }
        // monotone coupling; site order is coordinate order
        MetricKind::WeightedLine | MetricKind::MeasureLine => {
            Ok(finish(northwest(m1.atoms(), m2.atoms()), m1, m2, g))
        }
        MetricKind::General => simplex_plan(m1, m2, g),
    }
}

/// Optimal plan from the transportation simplex.
pub fn optimal_plan_lp(m1: &FiniteMeasure, m2: &FiniteMeasure, g: &GroundMetric) -> Result<TransportPlan> {
    g.check_measure(m1)?;
    g.check_measure(m2)?;
    check_masses(m1, m2)?;
    simplex_plan(m1, m2, g)
}

fn simplex_plan(m1: &FiniteMeasure, m2: &FiniteMeasure, g: &GroundMetric) -> Result<TransportPlan> {
    let (a, b) = (m1.atoms(), m2.atoms());
    let supply: Vec<f64> = a.iter().map(|x| x.1).collect();
    let demand: Vec<f64> = b.iter().map(|x| x.1).collect();
    let mut cost = Vec::with_capacity(a.len() * b.len());
    for &(s, _) in a {
        for &(t, _) in b {
            cost.push(g.d(s, t));
        }
    }
    let flows = simplex::solve(&supply, &demand, &cost)?;
    let pairs = flows.into_iter().map(|(r, c, f)| (a[r].0, b[c].0, f)).collect();
    Ok(finish(pairs, m1, m2, g))
}

// Greedy staircase coupling of two sorted atom lists.
fn northwest(a: &[(Site, f64)], b: &[(Site, f64)]) -> Vec<(Site, Site, f64)> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a.first().map_or(0.0, |x| x.1), b.first().map_or(0.0, |x| x.1));
    while i < a.len() && j < b.len() {
        let last = i + 1 == a.len() && j + 1 == b.len();
        let x = if last { 0.5 * (ra + rb) } else { ra.min(rb) };
        if x > 0.0 {
            out.push((a[i].0, b[j].0, x));
        }
        if last {
            break;
        }
        ra -= x;
        rb -= x;
        if (ra <= rb && i + 1 < a.len()) || j + 1 == b.len() {
            i += 1;
            rb = rb.max(0.0);
            ra = a[i].1;
        } else {
            j += 1;
            ra = ra.max(0.0);
            rb = b[j].1;
        }
    }
    out
}

fn finish(mut pairs: Vec<(Site, Site, f64)>, m1: &FiniteMeasure, m2: &FiniteMeasure, g: &GroundMetric) -> TransportPlan {
    pairs.sort_by(|p, q| (p.0, p.1).cmp(&(q.0, q.1)));
    let cost = pairs.iter().map(|&(s, t, w)| w * g.d(s, t)).sum();
    TransportPlan { pairs, cost, left: m1.clone(), right: m2.clone() }
}
