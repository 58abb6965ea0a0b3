//! The functional `J^{x,y}(m1, m2)` and upper bounds on it.

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::space::{abs_first_moment, BaseMeasure, FiniteMeasure, GroundMetric, LineMeasure, Site};
use crate::transport::{check_masses, wasserstein, wasserstein_line};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JMethod {
    Exact,
    ClassicalBound,
    DensityClosedForm,
    KernelBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JResult {
    pub value: f64,
    pub method: JMethod,
    /// The transport term before the mass-weighted distance is subtracted.
    pub augmented_cost: f64,
}

/// `(m1 + m2(E) δx, m2 + m1(E) δy)`, two measures of equal mass.
pub fn augmented(x: Site, y: Site, m1: &FiniteMeasure, m2: &FiniteMeasure) -> (FiniteMeasure, FiniteMeasure) {
    (m1.with_atom(x, m2.mass()), m2.with_atom(y, m1.mass()))
}

/// Exact value through the transport solver. May be negative.
pub fn j_exact(x: Site, y: Site, m1: &FiniteMeasure, m2: &FiniteMeasure, g: &GroundMetric) -> Result<JResult> {
    g.check_site(x)?;
    g.check_site(y)?;
    let (a, b) = augmented(x, y, m1, m2);
    let cost = wasserstein(&a, &b, g)?;
    Ok(JResult {
        value: cost - (m1.mass() + m2.mass()) * g.d(x, y),
        method: JMethod::Exact,
        augmented_cost: cost,
    })
}

/// `int [d(u,y) - d(x,y)] m1(du) + int [d(x,v) - d(x,y)] m2(dv)`: the cost of
/// moving the two particles independently.
pub fn j_classical_bound(x: Site, y: Site, m1: &FiniteMeasure, m2: &FiniteMeasure, g: &GroundMetric) -> Result<JResult> {
    g.check_site(x)?;
    g.check_site(y)?;
    g.check_measure(m1)?;
    g.check_measure(m2)?;
    let dxy = g.d(x, y);
    let a: f64 = m1.atoms().iter().map(|&(u, w)| w * g.d(u, y)).sum();
    let b: f64 = m2.atoms().iter().map(|&(v, w)| w * g.d(x, v)).sum();
    let cost = a + b;
    Ok(JResult {
        value: cost - (m1.mass() + m2.mass()) * dxy,
        method: JMethod::ClassicalBound,
        augmented_cost: cost,
    })
}

/// Closed form under the trivial metric when `q(x, dz) = alpha(x, z) zeta(dz)`.
///
/// `alpha_x`, `alpha_y` hold density values per site and `zeta` the atom weights
/// of the reference measure. Self-jump densities `alpha(x, x)`, `alpha(y, y)`
/// are null jumps and are dropped.
pub fn j_density_closed_form(
    x: Site,
    y: Site,
    alpha_x: &FiniteMeasure,
    alpha_y: &FiniteMeasure,
    zeta: &FiniteMeasure,
) -> Result<JResult> {
    if x == y {
        return Err(Error::InvalidArgument("density closed form needs x != y".into()));
    }
    let ax = if alpha_x.weight(x) > 0.0 {
        warn!("dropping self-jump density alpha({x},{x})");
        alpha_x.without(x)
    } else {
        alpha_x.clone()
    };
    let ay = if alpha_y.weight(y) > 0.0 {
        warn!("dropping self-jump density alpha({y},{y})");
        alpha_y.without(y)
    } else {
        alpha_y.clone()
    };
    let common: f64 = ax.atoms().iter().map(|&(z, a)| a.min(ay.weight(z)) * zeta.weight(z)).sum();
    let value = -common - ay.weight(x) * zeta.weight(x) - ax.weight(y) * zeta.weight(y);
    let mass = |a: &FiniteMeasure| -> f64 { a.atoms().iter().map(|&(z, w)| w * zeta.weight(z)).sum() };
    Ok(JResult {
        value,
        method: JMethod::DensityClosedForm,
        augmented_cost: value + mass(&ax) + mass(&ay),
    })
}

/// Bound for jump measures `beta * alpha(. - x)` on the line:
/// `beta_y W(alpha_x, alpha_y) + (beta_x - beta_y) int |z| alpha_x(dz)` with
/// `beta_x >= beta_y` (the roles are swapped otherwise).
///
/// `x`, `y` are the jump origins and `mu` the base measure of the line metric.
pub fn j_kernel_bound(
    x: f64,
    y: f64,
    beta_x: f64,
    beta_y: f64,
    alpha_x: &LineMeasure,
    alpha_y: &LineMeasure,
    mu: &BaseMeasure,
) -> Result<JResult> {
    for a in [alpha_x, alpha_y] {
        if (a.mass() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidMeasure(format!("jump law has mass {}", a.mass())));
        }
    }
    if !(beta_x >= 0.0 && beta_y >= 0.0) {
        return Err(Error::InvalidArgument("negative jump rate".into()));
    }
    let (bx, by, ax, ay) = if beta_x >= beta_y { (beta_x, beta_y, alpha_x, alpha_y) } else { (beta_y, beta_x, alpha_y, alpha_x) };
    check_masses(ax, ay)?;
    let value = by * wasserstein_line(ax, ay, mu)? + (bx - by) * abs_first_moment(ax);
    let dxy = mu.interval(x.min(y), x.max(y));
    Ok(JResult {
        value,
        method: JMethod::KernelBound,
        augmented_cost: value + (beta_x + beta_y) * dxy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::wasserstein_lp;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn meas(v: &[(usize, f64)]) -> FiniteMeasure {
        FiniteMeasure::new(v.to_vec()).unwrap()
    }

    #[test]
    fn exact_examples() {
        let g = GroundMetric::weighted_line(&[1.0, 2.0, 0.5]).unwrap();
        // jumps straight onto the partner cost nothing in the transport term
        let r = j_exact(0, 2, &meas(&[(2, 1.5)]), &meas(&[(0, 0.5)]), &g).unwrap();
        assert!((r.value + 2.0 * 3.0).abs() < 1e-12);
        let m = meas(&[(1, 1.0), (3, 2.0)]);
        assert_eq!(j_exact(1, 1, &m, &m, &g).unwrap().value, 0.0);

        let t = GroundMetric::trivial(3).unwrap();
        let m1 = meas(&[(1, 1.0), (2, 2.0)]);
        let m2 = meas(&[(0, 0.5), (2, 1.0)]);
        let r = j_exact(0, 1, &m1, &m2, &t).unwrap();
        assert!((r.value + 2.5).abs() < 1e-12);
        assert!((r.augmented_cost - r.value - 4.5).abs() < 1e-12);
        let d = j_density_closed_form(0, 1, &m1, &m2, &FiniteMeasure::new((0..3).map(|s| (s, 1.0))).unwrap()).unwrap();
        assert!((d.value + 2.5).abs() < 1e-12);
    }

    #[test]
    fn density_examples() {
        let zeta = FiniteMeasure::new((0..5).map(|s| (s, 1.0))).unwrap();
        let a = meas(&[(2, 1.0), (3, 0.5)]);
        let r = j_density_closed_form(0, 1, &a, &a, &zeta).unwrap();
        assert!((r.value + 1.5).abs() < 1e-15);
        let r = j_density_closed_form(0, 1, &meas(&[(2, 1.0)]), &meas(&[(3, 1.0)]), &zeta).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(j_density_closed_form(0, 0, &a, &a, &zeta).is_err());
    }

    #[test]
    fn classical_examples() {
        let g = GroundMetric::trivial(2).unwrap();
        let z = FiniteMeasure::zero();
        assert_eq!(j_classical_bound(0, 1, &z, &z, &g).unwrap().value, 0.0);
        // birth-death with x < y - 1: d_x u_{x-1} - b_x u_x - d_y u_{y-1} + b_y u_y
        let u = [1.0, 1.5, 2.5, 0.7, 3.0, 1.1];
        let g = GroundMetric::weighted_line(&u).unwrap();
        let (b, d) = ([0.3, 1.2, 0.8, 2.0, 0.4, 1.0, 0.0], [0.0, 0.9, 1.7, 0.5, 1.3, 0.6, 2.2]);
        let q = |x: usize| meas(&[(x - 1, d[x]), (x + 1, b[x])]);
        let (x, y) = (1, 4);
        let expected = d[x] * u[x - 1] - b[x] * u[x] - d[y] * u[y - 1] + b[y] * u[y];
        let r = j_classical_bound(x, y, &q(x), &q(y), &g).unwrap();
        assert!((r.value - expected).abs() < 1e-12);
    }

    #[test]
    fn kernel_examples() {
        let leb = BaseMeasure::lebesgue();
        let a = LineMeasure::on_line(&[(-1.0, 0.3), (2.0, 0.7)]).unwrap();
        assert_eq!(j_kernel_bound(0.0, 1.0, 1.5, 1.5, &a, &a, &leb).unwrap().value, 0.0);
        let one = LineMeasure::on_line(&[(1.0, 1.0)]).unwrap();
        assert_eq!(j_kernel_bound(0.0, 1.0, 2.0, 1.0, &one, &one, &leb).unwrap().value, 1.0);
        let half = LineMeasure::on_line(&[(1.0, 0.5)]).unwrap();
        assert!(j_kernel_bound(0.0, 1.0, 2.0, 1.0, &half, &one, &leb).is_err());
    }

    fn instance(seed: u64) -> (GroundMetric, Site, Site, FiniteMeasure, FiniteMeasure) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..6);
        let pts: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 5.0).collect();
        let g = GroundMetric::general(
            (0..n).map(|i| (0..n).map(|j| (pts[i] - pts[j]).abs() + if i == j { 0.0 } else { 0.5 }).collect()).collect(),
        )
        .unwrap();
        let mut m = || FiniteMeasure::new((0..rng.gen_range(0..4)).map(|_| (rng.gen_range(0..n), rng.gen_range(0.1..2.0)))).unwrap();
        let (m1, m2) = (m(), m());
        let x = rng.gen_range(0..n);
        let y = rng.gen_range(0..n);
        (g, x, y, m1, m2)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn homogeneity(seed in any::<u64>(), alpha in 0.01f64..50.0) {
            let (g, x, y, m1, m2) = instance(seed);
            let j = j_exact(x, y, &m1, &m2, &g).unwrap().value;
            let js = j_exact(x, y, &m1.scaled(alpha), &m2.scaled(alpha), &g).unwrap().value;
            prop_assert!((js - alpha * j).abs() <= 1e-12 * (alpha * j).abs().max(alpha * (m1.mass() + m2.mass())).max(1e-300));
        }

        #[test]
        fn subadditivity(s1 in any::<u64>(), s2 in any::<u64>()) {
            let (g, x, y, m1, m2) = instance(s1);
            let mut rng = ChaCha8Rng::seed_from_u64(s2);
            let n = g.n_sites();
            let mut m = || FiniteMeasure::new((0..rng.gen_range(0..4)).map(|_| (rng.gen_range(0..n), rng.gen_range(0.1..2.0)))).unwrap();
            let (n1, n2) = (m(), m());
            let lhs = j_exact(x, y, &m1.plus(&n1), &m2.plus(&n2), &g).unwrap().value;
            let rhs = j_exact(x, y, &m1, &m2, &g).unwrap().value + j_exact(x, y, &n1, &n2, &g).unwrap().value;
            prop_assert!(lhs <= rhs + 1e-9);
        }

        #[test]
        fn classical_dominates_exact(seed in any::<u64>()) {
            let (g, x, y, m1, m2) = instance(seed);
            let e = j_exact(x, y, &m1, &m2, &g).unwrap().value;
            let c = j_classical_bound(x, y, &m1, &m2, &g).unwrap().value;
            prop_assert!(e <= c + 1e-9);
        }

        #[test]
        fn min_over_added_masses(seed in any::<u64>(), extra in 0.0f64..3.0, short in 0.0f64..1.0) {
            let (g, x, y, m1, m2) = instance(seed);
            let j = j_exact(x, y, &m1, &m2, &g).unwrap();
            let (e1, e2) = (m1.mass(), m2.mass());
            let a = e2 + extra;
            let b = e1 + a - e2;
            let v = wasserstein_lp(&m1.with_atom(x, a), &m2.with_atom(y, b), &g).unwrap() - (e1 + a) * g.d(x, y);
            prop_assert!((v - j.value).abs() <= 1e-9 * j.augmented_cost.max(1.0));
            // below m2(E) the expression can only be larger
            let a = e2 * short;
            let b = e1 + a - e2;
            if b >= 0.0 {
                let v = wasserstein_lp(&m1.with_atom(x, a), &m2.with_atom(y, b), &g).unwrap() - (e1 + a) * g.d(x, y);
                prop_assert!(v >= j.value - 1e-9);
            }
        }
    }
}
