use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rates::Polynomial;
use crate::curvature::JumpKernel;
use crate::error::{Error, Result};
use crate::space::{FiniteMeasure, GroundMetric, Site};

/// Agents choosing a site at rate `T / #E + f(share of the site)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Agents {
    pub n_sites: usize,
    pub temperature: f64,
    pub f: Polynomial,
    #[serde(default)]
    pub monotone: bool,
    #[serde(default)]
    pub convex: bool,
}

impl Agents {
    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::InvalidModel("agents need at least two sites".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidModel(format!("temperature {} must be non-negative", self.temperature)));
        }
        if self.f.eval(0.0) < 0.0 {
            return Err(Error::InvalidModel("f(0) must be non-negative".into()));
        }
        Ok(())
    }

    /// Rate of jumping to a site holding `count` of the `n` agents.
    pub fn rate(&self, count: usize, n: usize) -> f64 {
        self.temperature / self.n_sites as f64 + self.f.eval(count as f64 / n as f64)
    }

    pub fn kernel(&self, n: usize) -> Result<AgentsKernel> {
        self.validate()?;
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one agent".into()));
        }
        if let Some(k) = (0..=n).find(|&k| !(self.rate(k, n) >= 0.0)) {
            return Err(Error::InvalidModel(format!("negative jump rate at share {k}/{n}")));
        }
        Ok(AgentsKernel { spec: self.clone() })
    }

    pub fn metric(&self) -> Result<GroundMetric> {
        GroundMetric::trivial(self.n_sites)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentsKernel {
    spec: Agents,
}

impl JumpKernel for AgentsKernel {
    fn n_sites(&self) -> usize {
        self.spec.n_sites
    }

    fn jump(&self, _i: usize, config: &[Site]) -> FiniteMeasure {
        let mut counts = vec![0usize; self.spec.n_sites];
        for &s in config {
            counts[s] += 1;
        }
        FiniteMeasure::new(counts.iter().enumerate().map(|(y, &c)| (y, self.spec.rate(c, config.len()))))
            .expect("rates checked at construction")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfMethod {
    ClosedForm,
    Multistart,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfSum {
    pub value: f64,
    pub method: InfMethod,
}

/// `inf_mu sum_x f(mu(x))` over probability vectors on `n_sites` points.
pub fn inf_sum_f(f: &Polynomial, n_sites: usize, convex: bool) -> InfSum {
    let e = n_sites as f64;
    if convex {
        return InfSum { value: e * f.eval(1.0 / e), method: InfMethod::ClosedForm };
    }
    let df = f.derivative();
    let objective = |mu: &[f64]| mu.iter().map(|&m| f.eval(m)).sum::<f64>();
    let mut starts: Vec<Vec<f64>> = vec![vec![1.0 / e; n_sites]];
    for k in 0..n_sites {
        let mut v = vec![0.0; n_sites];
        v[k] = 1.0;
        starts.push(v);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    starts.extend((0..32).map(|_| uniform_simplex_point(&mut rng, n_sites)));

    let mut best = f64::INFINITY;
    for mut mu in starts {
        let mut val = objective(&mu);
        let mut step = 0.1;
        for _ in 0..2000 {
            let grad: Vec<f64> = mu.iter().map(|&m| df.eval(m)).collect();
            let cand = project_simplex(&mu.iter().zip(&grad).map(|(m, g)| m - step * g).collect::<Vec<_>>());
            let cv = objective(&cand);
            if cv < val - 1e-15 {
                mu = cand;
                val = cv;
                step *= 1.2;
            } else {
                step *= 0.5;
                if step < 1e-14 {
                    break;
                }
            }
        }
        best = best.min(val);
    }
    InfSum { value: best, method: InfMethod::Multistart }
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (j, &s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - 1.0) / (j + 1) as f64;
        if s - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Uniform point on the simplex via normalized exponentials.
fn uniform_simplex_point<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

const GRID: usize = 10_000;

/// Maximizes `h` on `[lo, hi]`: grid scan, then golden-section on the best cell.
fn maximize(h: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let at = |k: usize| lo + (hi - lo) * k as f64 / GRID as f64;
    let kbest = (0..=GRID).max_by(|&a, &b| h(at(a)).total_cmp(&h(at(b))).then(b.cmp(&a))).unwrap_or(0);
    let (mut a, mut b) = (at(kbest.saturating_sub(1)), at((kbest + 1).min(GRID)));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    while b - a > tol {
        if h(c) >= h(d) {
            b = d;
            d = c;
            c = b - phi * (b - a);
        } else {
            a = c;
            c = d;
            d = a + phi * (b - a);
        }
    }
    let mut z = 0.5 * (a + b);
    let grid_z = at(kbest);
    if h(grid_z) > h(z) {
        z = grid_z;
    }
    (z, h(z))
}

/// `sup_{[0,1]} |f'|`.
pub fn lipschitz(f: &Polynomial) -> f64 {
    let df = f.derivative();
    let (_, m) = maximize(|z| df.eval(z).abs(), 0.0, 1.0, 1e-12);
    m.max(df.eval(0.0).abs()).max(df.eval(1.0).abs())
}

/// Lipschitz constant of `f` restricted to the grid `{k/n}`.
pub fn grid_lipschitz(f: &Polynomial, n: usize) -> f64 {
    (0..n)
        .map(|k| (f.eval((k + 1) as f64 / n as f64) - f.eval(k as f64 / n as f64)).abs() * n as f64)
        .fold(0.0, f64::max)
}

/// `T - (1 or 2) |f|_Lip + inf_mu sum_x f(mu(x))`, with `|f|_Lip = sup |f'|` on `[0, 1]`.
pub fn agents_bound(spec: &Agents) -> Result<f64> {
    spec.validate()?;
    Ok(assemble(spec, lipschitz(&spec.f)))
}

/// As [`agents_bound`], with the Lipschitz constant taken over the shares `{k/n}`
/// actually reachable by `n` agents.
pub fn agents_bound_grid(spec: &Agents, n: usize) -> Result<f64> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one agent".into()));
    }
    Ok(assemble(spec, grid_lipschitz(&spec.f, n)))
}

fn assemble(spec: &Agents, lip: f64) -> f64 {
    let factor = if spec.monotone { 1.0 } else { 2.0 };
    spec.temperature - factor * lip + inf_sum_f(&spec.f, spec.n_sites, spec.convex).value
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HerdThreshold {
    pub z_star: f64,
    pub m_star: f64,
    pub t_critical: f64,
}

/// Consensus threshold for a strictly convex `f` with `f(0) = 0`.
pub fn herd_threshold(f: &Polynomial, n_sites: usize) -> Result<HerdThreshold> {
    if n_sites < 2 {
        return Err(Error::InvalidModel("need at least two sites".into()));
    }
    if f.eval(0.0) != 0.0 {
        log::warn!("f(0) = {} is not zero", f.eval(0.0));
    }
    let d2 = f.derivative().derivative();
    if (0..=GRID).any(|k| d2.eval(k as f64 / GRID as f64) < 0.0) {
        log::warn!("f is not convex on the grid");
    }
    let g = |z: f64| f.eval(z) - z * (f.eval(z) + f.eval(1.0 - z));
    let (mut z, _) = maximize(g, 0.5, 1.0, 1e-10);

    // golden section stalls near 1e-8 on a flat maximum; finish on g' = 0
    let df = f.derivative();
    let dg = |z: f64| df.eval(z) - f.eval(z) - f.eval(1.0 - z) - z * (df.eval(z) - df.eval(1.0 - z));
    let (mut a, mut b) = ((z - 1e-6).max(0.5), (z + 1e-6).min(1.0));
    if dg(a) > 0.0 && dg(b) < 0.0 {
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if dg(mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
            if b - a < 1e-15 {
                break;
            }
        }
        let polished = 0.5 * (a + b);
        if g(polished) >= g(z) {
            z = polished;
        }
    }
    let m_star = g(z);
    if !(m_star > 0.0) {
        return Err(Error::InvalidModel(format!("m* = {m_star} is not positive; f is not strictly convex enough")));
    }
    let e = n_sites as f64;
    Ok(HerdThreshold { z_star: z, m_star, t_critical: m_star * e / (z * e - 1.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::{bound_system, EngineOptions, Strategy};
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn agents(e: usize, t: f64, f: Polynomial, monotone: bool, convex: bool) -> Agents {
        Agents { n_sites: e, temperature: t, f, monotone, convex }
    }

    #[test]
    fn kernel_example() {
        let a = agents(2, 1.0, Polynomial::monomial(2), true, true);
        let k = a.kernel(2).unwrap();
        let m = k.jump(0, &[0, 0]);
        assert_eq!(m.atoms(), &[(0, 1.5), (1, 0.5)]);
        let m = k.jump(1, &[0, 1]);
        assert_eq!(m.mass(), 1.0 + 2.0 * 0.25);
    }

    #[test]
    fn inf_sums() {
        for e in 2..6 {
            let s = inf_sum_f(&Polynomial::monomial(2), e, true);
            assert_eq!(s.value, e as f64 * (1.0 / e as f64).powi(2));
            let s = inf_sum_f(&Polynomial::monomial(2), e, false);
            assert!((s.value - 1.0 / e as f64).abs() < 1e-9);
            let aff = Polynomial::affine(-0.5, 0.7);
            let s = inf_sum_f(&aff, e, false);
            assert!((s.value - (-0.5 + 0.7 * e as f64)).abs() < 1e-12);
        }
        assert_eq!(inf_sum_f(&Polynomial::zero(), 3, false).value, 0.0);
    }

    #[test]
    fn closed_form_bounds() {
        let (a, b) = (-0.4, 0.9);
        for e in [2usize, 3, 7] {
            let t = 0.3;
            let spec = agents(e, t, Polynomial::affine(a, b), true, true);
            assert!((agents_bound(&spec).unwrap() - (t + b * e as f64 + a - a.abs())).abs() < 1e-12);
            let sq = agents(e, t, Polynomial::monomial(2), true, true);
            assert!((agents_bound(&sq).unwrap() - (t - 2.0 + 1.0 / e as f64)).abs() < 1e-12);
        }
        assert_eq!(agents_bound(&agents(3, 1.0, Polynomial::zero(), false, true)).unwrap(), 1.0);
        assert!((grid_lipschitz(&Polynomial::monomial(2), 10) - 1.9).abs() < 1e-12);
    }

    #[test]
    fn herd_square() {
        let h = herd_threshold(&Polynomial::monomial(2), 3).unwrap();
        assert!((h.z_star - (0.5 + 1.0 / 12f64.sqrt())).abs() < 1e-9, "{}", h.z_star);
        assert!((h.m_star - 1.0 / (6.0 * 3f64.sqrt())).abs() < 1e-9);
        assert!((h.t_critical - 3.0 / (9.0 + 3.0 * 3f64.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn herd_cube_against_grid() {
        let f = Polynomial::monomial(3);
        let h = herd_threshold(&f, 4).unwrap();
        let g = |z: f64| f.eval(z) - z * (f.eval(z) + f.eval(1.0 - z));
        let scan = (0..=1_000_000).map(|k| g(0.5 + 0.5 * k as f64 / 1e6)).fold(f64::MIN, f64::max);
        assert!((h.m_star - scan).abs() < 1e-8);
        assert!(h.z_star > 0.5 && h.z_star < 1.0);
    }

    #[test]
    fn herd_rejects_linear() {
        assert!(herd_threshold(&Polynomial::affine(1.0, 0.0), 3).is_err());
    }

    #[test]
    fn engine_dominates_closed_form() {
        let spec = agents(3, 1.0, Polynomial::monomial(2), true, true);
        let k = spec.kernel(3).unwrap();
        let rep = bound_system(&k, &spec.metric().unwrap(), 3, Strategy::Exhaustive, &EngineOptions::default()).unwrap();
        assert!(rep.bound >= agents_bound(&spec).unwrap() - 1e-9);
        let free = agents(3, 1.0, Polynomial::zero(), false, true);
        let rep = bound_system(&free.kernel(2).unwrap(), &free.metric().unwrap(), 2, Strategy::Exhaustive, &EngineOptions::default()).unwrap();
        assert!((rep.bound - 1.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn monotone_flag_helps(c1 in 0.0f64..2.0, c2 in 0.0f64..2.0, t in 0.0f64..3.0, e in 2usize..6) {
            let f = Polynomial::new(vec![0.0, c1, c2]).unwrap();
            let mono = agents(e, t, f.clone(), true, true);
            let plain = agents(e, t, f, false, true);
            prop_assert!(agents_bound(&mono).unwrap() >= agents_bound(&plain).unwrap());
        }

        #[test]
        fn multistart_matches_convex(c1 in -1.0f64..1.0, c2 in 0.01f64..2.0, e in 2usize..6) {
            let f = Polynomial::new(vec![0.5, c1, c2]).unwrap();
            let closed = inf_sum_f(&f, e, true).value;
            let searched = inf_sum_f(&f, e, false).value;
            prop_assert!((closed - searched).abs() < 1e-8);
        }
    }
}
