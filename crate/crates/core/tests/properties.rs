use jumpcurv::curvature::{coupling_rates, JumpKernel};
use jumpcurv::jfunc::{j_classical_bound, j_exact};
use jumpcurv::models::agents::Agents;
use jumpcurv::models::rates::Polynomial;
use jumpcurv::sim::simulate_coupled;
use jumpcurv::space::{Configuration, FiniteMeasure, GroundMetric};
use jumpcurv::transport::{optimal_plan, wasserstein};
use proptest::prelude::*;

/// Distance matrix of points in the plane; positive off the diagonal.
fn planar_metric(points: &[(f64, f64)]) -> GroundMetric {
    let d = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
    GroundMetric::general(points.iter().map(|&p| points.iter().map(|&q| d(p, q)).collect()).collect()).unwrap()
}

fn points(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..10.0f64, 0.0..10.0f64), n).prop_filter("distinct", |ps| {
        ps.iter().enumerate().all(|(i, a)| ps[..i].iter().all(|b| (a.0 - b.0).abs() + (a.1 - b.1).abs() > 1e-3))
    })
}

fn measure(n: usize, mass: f64) -> impl Strategy<Value = FiniteMeasure> {
    prop::collection::vec(0.01..1.0f64, n).prop_map(move |w| {
        let total: f64 = w.iter().sum();
        FiniteMeasure::new(w.into_iter().enumerate().map(|(s, x)| (s, x * mass / total))).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn wasserstein_is_a_metric(ps in points(5), a in measure(5, 1.0), b in measure(5, 1.0), c in measure(5, 1.0)) {
        let g = planar_metric(&ps);
        let ab = wasserstein(&a, &b, &g).unwrap();
        let ba = wasserstein(&b, &a, &g).unwrap();
        let ac = wasserstein(&a, &c, &g).unwrap();
        let cb = wasserstein(&c, &b, &g).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-9 * (1.0 + ab));
        prop_assert!(ab <= ac + cb + 1e-9);
        prop_assert!(wasserstein(&a, &a, &g).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn plan_has_the_right_marginals(ps in points(4), a in measure(4, 2.0), b in measure(4, 2.0)) {
        let g = planar_metric(&ps);
        let plan = optimal_plan(&a, &b, &g).unwrap();
        let mut left = [0.0; 4];
        let mut right = [0.0; 4];
        for &(u, v, w) in &plan.pairs {
            left[u] += w;
            right[v] += w;
        }
        for s in 0..4 {
            prop_assert!((left[s] - a.weight(s)).abs() <= 1e-9);
            prop_assert!((right[s] - b.weight(s)).abs() <= 1e-9);
        }
        let cost: f64 = plan.pairs.iter().map(|&(u, v, w)| w * g.d(u, v)).sum();
        prop_assert!((cost - wasserstein(&a, &b, &g).unwrap()).abs() <= 1e-9 * (1.0 + cost));
    }

    #[test]
    fn exact_j_below_independent_moves(ps in points(5), m1 in measure(5, 1.5), m2 in measure(5, 0.7), x in 0usize..5, y in 0usize..5) {
        let g = planar_metric(&ps);
        let exact = j_exact(x, y, &m1, &m2, &g).unwrap().value;
        let classical = j_classical_bound(x, y, &m1, &m2, &g).unwrap().value;
        prop_assert!(exact <= classical + 1e-9);
    }

    #[test]
    fn coupled_rates_keep_each_marginal(y in prop::collection::vec(0usize..3, 6), z in prop::collection::vec(0usize..3, 6)) {
        let agents = Agents { n_sites: 3, temperature: 0.5, f: Polynomial::monomial(2), monotone: true, convex: true };
        let kernel = agents.kernel(6).unwrap();
        let g = agents.metric().unwrap();
        let rates = coupling_rates(&kernel, &Configuration::new(y.clone()).unwrap(), &Configuration::new(z.clone()).unwrap(), &g).unwrap();
        for i in 0..6 {
            let (fy, fz) = (kernel.jump(i, &y), kernel.jump(i, &z));
            let mut left = [0.0; 3];
            let mut right = [0.0; 3];
            for &(u, v, w) in &rates.plans[i].pairs {
                left[u] += w;
                right[v] += w;
            }
            for s in 0..3 {
                let want_left = fy.weight(s) + if s == y[i] { fz.mass() } else { 0.0 };
                let want_right = fz.weight(s) + if s == z[i] { fy.mass() } else { 0.0 };
                prop_assert!((left[s] - want_left).abs() <= 1e-9);
                prop_assert!((right[s] - want_right).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn coupled_runs_replay_from_the_seed(seed in any::<u64>()) {
        let agents = Agents { n_sites: 3, temperature: 1.0, f: Polynomial::monomial(1), monotone: true, convex: true };
        let kernel = agents.kernel(4).unwrap();
        let g = agents.metric().unwrap();
        let y = Configuration::new(vec![0, 0, 1, 2]).unwrap();
        let z = Configuration::new(vec![2, 1, 1, 0]).unwrap();
        let a = simulate_coupled(&kernel, &g, &y, &z, 2.0, seed).unwrap();
        let b = simulate_coupled(&kernel, &g, &y, &z, 2.0, seed).unwrap();
        prop_assert_eq!(&a.times, &b.times);
        prop_assert_eq!(&a.states, &b.states);
    }
}
