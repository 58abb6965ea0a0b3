//! Acceptance suite: one pass/fail line per criterion, non-zero exit on any failure.

use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use jumpcurv::curvature::{bound_single, coupling_rates, EngineOptions, Truncation};
use jumpcurv::jfunc::{j_classical_bound, j_exact};
use jumpcurv::models::agents::{agents_bound, herd_threshold, Agents};
use jumpcurv::models::birth_death::{bd_bound, bd_eigen, fv_eigen_bound, modified_bd_bound, modified_bd_classical_bound, BirthDeath};
use jumpcurv::models::rates::{Polynomial, RateSeq};
use jumpcurv::models::TRUNCATION_MARGIN;
use jumpcurv::sim::{chi_square_two_sample, herd_experiment, simulate, simulate_coupled, HerdOptions};
use jumpcurv::space::{BaseMeasure, Configuration, FiniteMeasure, GroundMetric, Segment};
use jumpcurv::transport::{half_total_variation, wasserstein_line, wasserstein_lp};
use jumpcurv::curvature::JumpKernel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_jumpcurv");

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn random_measure(rng: &mut ChaCha8Rng, sites: usize, atoms: std::ops::RangeInclusive<usize>) -> FiniteMeasure {
    let atoms = rng.gen_range(atoms);
    FiniteMeasure::new((0..atoms).map(|_| (rng.gen_range(0..sites), rng.gen_range(0.05..3.0)))).unwrap()
}

fn random_general_metric(rng: &mut ChaCha8Rng, n: usize) -> GroundMetric {
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen::<f64>() * 4.0, rng.gen::<f64>() * 4.0)).collect();
    let d = |i: usize, j: usize| ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt() + if i == j { 0.0 } else { 0.1 };
    GroundMetric::general((0..n).map(|i| (0..n).map(|j| d(i, j)).collect()).collect()).unwrap()
}

/// Two measures with at most 8 atoms each and equal mass.
fn equal_mass_pair(rng: &mut ChaCha8Rng, sites: usize) -> (FiniteMeasure, FiniteMeasure) {
    let a = random_measure(rng, sites, 1..=8);
    let b = random_measure(rng, sites, 1..=8);
    let b = b.scaled(a.mass() / b.mass());
    (a, b)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let sites = rng.gen_range(2..=10);
        let (a, b) = equal_mass_pair(&mut rng, sites);
        let g = match i % 3 {
            0 => GroundMetric::trivial(sites).unwrap(),
            1 => GroundMetric::weighted_line(&(0..sites - 1).map(|_| rng.gen_range(0.1..3.0)).collect::<Vec<_>>()).unwrap(),
            _ => {
                let mut coords: Vec<f64> = (0..sites).map(|_| rng.gen_range(-5.0..5.0)).collect();
                coords.sort_by(f64::total_cmp);
                coords.dedup();
                if coords.len() < sites {
                    coords = (0..sites).map(|k| k as f64 * 0.7).collect();
                }
                let base = BaseMeasure::new(
                    vec![(0.3, 0.5)],
                    vec![Segment { start: -6.0, end: 0.0, density: 2.0 }, Segment { start: 0.0, end: 6.0, density: 0.5 }],
                )
                .unwrap();
                GroundMetric::measure_line(coords, base).unwrap()
            }
        };
        let lp = wasserstein_lp(&a, &b, &g).map_err(|e| e.to_string())?;
        let reference = if i % 3 == 0 {
            half_total_variation(&a, &b).map_err(|e| e.to_string())?
        } else {
            let (la, lb) = (g.to_line(&a).unwrap(), g.to_line(&b).unwrap());
            wasserstein_line(&la, &lb, g.base().unwrap()).map_err(|e| e.to_string())?
        };
        check(close(lp, reference, 1e-9), || format!("instance {i}: simplex {lp} vs closed form {reference}"))?;
        worst = worst.max((lp - reference).abs());
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("1000 instances, max |diff| {worst:.2e}, {:.2}s", elapsed.as_secs_f64()))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let je = |x, y, a: &FiniteMeasure, b: &FiniteMeasure, g: &GroundMetric| j_exact(x, y, a, b, g).map(|r| r.value).map_err(|e| e.to_string());
    for i in 0..1000 {
        let sites = rng.gen_range(2..=7);
        let g = random_general_metric(&mut rng, sites);
        let (x, y) = (rng.gen_range(0..sites), rng.gen_range(0..sites));
        let m1 = random_measure(&mut rng, sites, 0..=5);
        let m2 = random_measure(&mut rng, sites, 0..=5);
        let j = je(x, y, &m1, &m2, &g)?;
        let (e1, e2, dxy) = (m1.mass(), m2.mass(), g.d(x, y));

        let alpha = rng.gen_range(0.01..20.0);
        let js = je(x, y, &m1.scaled(alpha), &m2.scaled(alpha), &g)?;
        let scale = (alpha * j).abs().max(alpha * (e1 + e2) * g.diameter()).max(f64::MIN_POSITIVE);
        check((js - alpha * j).abs() <= 1e-12 * scale, || format!("homogeneity, instance {i}: {js} vs {}", alpha * j))?;

        let n1 = random_measure(&mut rng, sites, 0..=4);
        let n2 = random_measure(&mut rng, sites, 0..=4);
        let lhs = je(x, y, &m1.plus(&n1), &m2.plus(&n2), &g)?;
        let rhs = j + je(x, y, &n1, &n2, &g)?;
        check(lhs <= rhs + 1e-9, || format!("subadditivity, instance {i}: {lhs} > {rhs}"))?;

        let a = e2 + rng.gen_range(0.0..3.0);
        let b = e1 + a - e2;
        let v = wasserstein_lp(&m1.with_atom(x, a), &m2.with_atom(y, b), &g).map_err(|e| e.to_string())? - (e1 + a) * dxy;
        check(close(v, j, 1e-9), || format!("attainment for a >= m2(E), instance {i}: {v} vs {j}"))?;
        let a = e2 * rng.gen_range(0.0..1.0);
        let b = e1 + a - e2;
        if b >= 0.0 {
            let v = wasserstein_lp(&m1.with_atom(x, a), &m2.with_atom(y, b), &g).map_err(|e| e.to_string())? - (e1 + a) * dxy;
            check(v >= j - 1e-9, || format!("a < m2(E) below the minimum, instance {i}: {v} < {j}"))?;
        }

        let (big, small, xx, yy) = if e1 >= e2 { (&m1, &m2, x, y) } else { (&m2, &m1, y, x) };
        // J is symmetric under swapping (x, m1) with (y, m2)
        let alt = wasserstein_lp(big, &small.with_atom(yy, big.mass() - small.mass()), &g).map_err(|e| e.to_string())? - big.mass() * g.d(xx, yy);
        check(j <= alt + 1e-9, || format!("alternative bound, instance {i}: {j} > {alt}"))?;

        let c = j_classical_bound(x, y, &m1, &m2, &g).map_err(|e| e.to_string())?.value;
        check(j <= c + 1e-9, || format!("classical bound, instance {i}: {j} > {c}"))?;

        if e1 > 0.0 && e2 > 0.0 {
            let (p1, p2) = (m1.scaled(1.0 / e1), m2.scaled(1.0 / e2));
            let jp = je(x, y, &p1, &p2, &g)?;
            let w = wasserstein_lp(&p1, &p2, &g).map_err(|e| e.to_string())?;
            check(jp <= w - dxy + 1e-9, || format!("probability case, instance {i}: {jp} > {}", w - dxy))?;
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("6 properties x 1000 instances, {:.2}s", elapsed.as_secs_f64()))
}

fn mm1(k: usize) -> BirthDeath {
    BirthDeath { birth: RateSeq::Const(1.0), death: RateSeq::Const(2.0), weights: RateSeq::Geometric { scale: 1.0, ratio: 2f64.sqrt() }, k }
}

fn criterion_3() -> Outcome {
    let bd = mm1(40);
    let exact = 3.0 - 2.0 * 2f64.sqrt();
    let closed = bd_bound(&bd).map_err(|e| e.to_string())?;
    let opts = EngineOptions { truncation: Some(Truncation { k: 40, margin: TRUNCATION_MARGIN }), ..Default::default() };
    let engine = bound_single(&bd.kernel().unwrap(), &bd.metric().unwrap(), &opts).map_err(|e| e.to_string())?.bound;
    check(close(closed, exact, 1e-6), || format!("bd_bound {closed} vs 3 - 2 sqrt 2 = {exact}"))?;
    check(close(engine, closed, 1e-6), || format!("engine {engine} vs bd_bound {closed}"))?;
    Ok(format!("engine {engine:.9}, closed form {closed:.9}"))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    for i in 0..100 {
        let k = rng.gen_range(6..=14);
        let b: Vec<f64> = (0..=k).map(|_| rng.gen_range(0.0..5.0)).collect();
        let d: Vec<f64> = (0..=k).map(|_| rng.gen_range(0.01..5.0)).collect();
        let u: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..3.0)).collect();
        let bd = BirthDeath { birth: RateSeq::Values(b.clone()), death: RateSeq::Values(d.clone()), weights: RateSeq::Values(u.clone()), k };
        let kernel = bd.modified_kernel().map_err(|e| e.to_string())?;
        let g = bd.metric().map_err(|e| e.to_string())?;
        for x in 1..=k - 3 {
            let cost = coupling_rates(&kernel, &Configuration::single(x), &Configuration::single(x + 1), &g).map_err(|e| e.to_string())?.plans[0].cost;
            let expr = d[x] * u[x - 1] + (d[x] + b[x + 1]) * u[x] + (b[x + 1] - b[x]).abs() * u[x + 1] + b[x + 1] * u[x + 2];
            check((cost - expr).abs() <= 1e-9 * (1.0 + expr), || format!("instance {i}, x = {x}: engine {cost} vs {expr}"))?;
            checked += 1;
        }
        let (m, c) = (modified_bd_bound(&bd).map_err(|e| e.to_string())?, modified_bd_classical_bound(&bd).map_err(|e| e.to_string())?);
        check(m >= c, || format!("instance {i}: modified {m} below classical {c}"))?;
    }
    Ok(format!("100 instances, {checked} adjacent pairs"))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..200 {
        let (a, b, t) = (rng.gen_range(-3.0..3.0), rng.gen_range(0.0..2.0), rng.gen_range(0.0..4.0));
        let e = rng.gen_range(2..=6usize);
        let spec = Agents { n_sites: e, temperature: t, f: Polynomial::affine(a, b), monotone: true, convex: true };
        let got = agents_bound(&spec).map_err(|err| err.to_string())?;
        let want = t + b * e as f64 + a - a.abs();
        check(close(got, want, 1e-12), || format!("affine instance {i}: {got} vs {want}"))?;
    }
    for e in 2..=8usize {
        let t = 0.5 + e as f64;
        let spec = Agents { n_sites: e, temperature: t, f: Polynomial::monomial(2), monotone: true, convex: true };
        let got = agents_bound(&spec).map_err(|err| err.to_string())?;
        let want = t - 2.0 + 1.0 / e as f64;
        check(close(got, want, 1e-12), || format!("x^2 with {e} sites: {got} vs {want}"))?;
    }
    let h = herd_threshold(&Polynomial::monomial(2), 3).map_err(|e| e.to_string())?;
    let (z, m) = (0.5 + 1.0 / 12f64.sqrt(), 1.0 / (6.0 * 3f64.sqrt()));
    check(close(h.z_star, z, 1e-9), || format!("z_star {} vs {z}", h.z_star))?;
    check(close(h.m_star, m, 1e-9), || format!("m_star {} vs {m}", h.m_star))?;
    check(close(h.t_critical, 0.211325, 1e-6), || format!("T_critical {}", h.t_critical))?;
    Ok(format!("z* {:.12}, m* {:.12}, T_c {:.9}", h.z_star, h.m_star, h.t_critical))
}

/// Site of particle 0 at `t_star`, solo against the first marginal of the coupling.
fn marginal_test(kernel: &dyn JumpKernel, g: &GroundMetric, y: &Configuration, z: &Configuration, t_star: f64, replicas: u64, seed: u64) -> Result<(f64, usize), String> {
    let e = g.n_sites();
    let (mut solo, mut coupled) = (vec![0u64; e], vec![0u64; e]);
    let mut events = 0;
    for r in 0..replicas {
        let s = simulate(kernel, y, t_star, seed + 2 * r).map_err(|e| e.to_string())?;
        solo[s.final_state().sites()[0]] += 1;
        let c = simulate_coupled(kernel, g, y, z, t_star, seed + 2 * r + 1).map_err(|e| e.to_string())?;
        coupled[c.states.last().unwrap().0.sites()[0]] += 1;
        events += s.times.len().min(c.times.len());
    }
    let test = chi_square_two_sample(&solo, &coupled).map_err(|e| e.to_string())?;
    Ok((test.p_value, events))
}

fn criterion_6() -> Outcome {
    let two = jumpcurv::curvature::SiteKernel::from_matrix(&[vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
    let g2 = GroundMetric::trivial(2).unwrap();
    let (p_chain, ev_chain) = marginal_test(&two, &g2, &Configuration::single(0), &Configuration::single(1), 5.0, 5000, 600)?;
    let agents = Agents { n_sites: 3, temperature: 1.0, f: Polynomial::monomial(2), monotone: true, convex: true };
    let kernel = agents.kernel(10).unwrap();
    let g3 = agents.metric().unwrap();
    let y = Configuration::new(vec![0; 10]).unwrap();
    let z = Configuration::new(vec![1, 1, 1, 2, 2, 2, 0, 0, 1, 2]).unwrap();
    let (p_agents, ev_agents) = marginal_test(&kernel, &g3, &y, &z, 1.0, 5000, 6000)?;
    check(ev_chain >= 10_000 && ev_agents >= 10_000, || format!("too few events: {ev_chain}, {ev_agents}"))?;
    check(p_chain > 0.05, || format!("two-state chain p = {p_chain}"))?;
    check(p_agents > 0.05, || format!("agents p = {p_agents}"))?;
    Ok(format!("p = {p_chain:.3} ({ev_chain} events), agents p = {p_agents:.3} ({ev_agents} events)"))
}

fn run_cli(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("JUMPCURV_WORKERS");
    if let Some(w) = workers {
        cmd.env("JUMPCURV_WORKERS", w);
    }
    cmd.output().expect("binary runs")
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    for preset in ["two-state", "mm1-sqrt2", "agents-free", "fv-discrete"] {
        let out = run_cli(&["verify", "--preset", preset, "--replicas", "200"], None);
        let report: Value = serde_json::from_slice(&out.stdout).map_err(|e| format!("{preset}: bad report: {e}"))?;
        let r = &report["result"];
        let (rate, se, bound) = (r["fitted_rate"].as_f64(), r["rate_se"].as_f64().unwrap_or(0.0), r["bound"].as_f64().unwrap_or(f64::NAN));
        let rate = rate.unwrap_or(f64::INFINITY);
        check(out.status.code() == Some(0), || format!("{preset}: exit {:?}, {}", out.status.code(), String::from_utf8_lossy(&out.stderr)))?;
        check(r["verdict"] == "consistent" && rate >= bound - 2.0 * se, || format!("{preset}: rate {rate} +- {se} vs bound {bound}"))?;
        lines.push(format!("{preset} {rate:.3}+-{se:.3}>={bound:.3}"));
    }
    let out = run_cli(&["verify", "--preset", "two-state", "--claimed-bound", "10"], None);
    check(out.status.code() == Some(4), || format!("violated claim exits {:?}", out.status.code()))?;
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!("{}; violation exits 4; {:.1}s", lines.join(", "), elapsed.as_secs_f64()))
}

fn criterion_8() -> Outcome {
    let h = herd_threshold(&Polynomial::monomial(2), 3).map_err(|e| e.to_string())?;
    let spec = |t: f64| Agents { n_sites: 3, temperature: t, f: Polynomial::monomial(2), monotone: true, convex: true };
    let run = |t: f64, n: usize| {
        let opts = HerdOptions { n_agents: n, start_site: 0, z_threshold: h.z_star, horizon: 1e3, replicas: 100, seed: 8 };
        herd_experiment(&spec(t), &opts).map_err(|e| e.to_string())
    };
    let censored: Vec<f64> = [50, 100, 200].iter().map(|&n| run(0.1, n).map(|s| s.censored_fraction)).collect::<Result<_, _>>()?;
    check(censored.windows(2).all(|w| w[1] >= w[0]), || format!("censored fractions {censored:?} not non-decreasing"))?;
    let (m50, m200) = (run(2.0, 50)?.median_exit, run(2.0, 200)?.median_exit);
    check(m50 <= 2.0 * m200 && m200 <= 2.0 * m50, || format!("T = 2 medians {m50} and {m200}"))?;
    Ok(format!("censored {censored:?}; T = 2 medians {m50:.4}, {m200:.4}"))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pure_death = BirthDeath { birth: RateSeq::Const(0.0), death: RateSeq::Linear { a: 0.0, b: 1.0 }, weights: RateSeq::Const(1.0), k: 200 };
    let cdi = BirthDeath {
        birth: RateSeq::Const(1.0),
        death: RateSeq::Quadratic { a: 0.0, b: 0.0, c: 1.0 },
        weights: RateSeq::Const(1.0),
        k: 100,
    };
    let mut instances = vec![pure_death.clone(), cdi.clone(), mm1(40), mm1(100)];
    for _ in 0..20 {
        let k = rng.gen_range(5..=80);
        instances.push(BirthDeath {
            birth: RateSeq::Values((0..=k).map(|_| rng.gen_range(0.1..5.0)).collect()),
            death: RateSeq::Values((0..=k).map(|_| rng.gen_range(0.1..5.0)).collect()),
            weights: RateSeq::Const(1.0),
            k,
        });
    }
    for (i, bd) in instances.iter().enumerate() {
        let e = bd_eigen(bd).map_err(|e| e.to_string())?;
        check(e.residual <= 1e-8 * e.eta_sup(), || format!("instance {i}: residual {} vs |eta| {}", e.residual, e.eta_sup()))?;
    }
    let l0 = bd_eigen(&pure_death).map_err(|e| e.to_string())?.lambda0;
    check(close(l0, 1.0, 1e-6), || format!("pure death lambda0 = {l0}"))?;
    let fv = fv_eigen_bound(&bd_eigen(&cdi).map_err(|e| e.to_string())?, 1.0, 0.0);
    check(fv.is_finite(), || format!("eigen bound {fv}"))?;
    Ok(format!("{} residuals ok, pure death lambda0 {l0:.9}, eigen bound {fv:.6}", instances.len()))
}

fn criterion_10(dir: &Path) -> Outcome {
    let write = |name: &str, text: &str| {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    };
    let m1 = write("m1.csv", "site,weight\n0,0.5\n2,0.25\n3,0.25\n");
    let m2 = write("m2.csv", "site,weight\n1,0.6\n3,0.4\n");
    let t2 = write("t2.toml", "[model]\npreset = \"herd-x2\"\ntemperature = 2.0\n[run]\nreplicas = 40\nhorizon = 50.0\n");
    let runs: Vec<Vec<&str>> = vec![
        vec!["wasserstein", "--m1", &m1, "--m2", &m2, "--metric", "euclidean"],
        vec!["j", "--x", "0", "--y", "1", "--m1", &m1, "--m2", &m2, "--metric", "trivial"],
        vec!["bound", "--preset", "agents-free"],
        vec!["bound", "--preset", "fv-discrete"],
        vec!["eigen", "--preset", "cdi-quadratic"],
        vec!["threshold", "--preset", "herd-x2"],
        vec!["simulate", "--preset", "agents-free", "--seed", "11"],
        vec!["couple", "--preset", "mm1-sqrt2", "--seed", "12"],
        vec!["contract", "--preset", "fv-discrete", "--seed", "13", "--replicas", "60"],
        vec!["herd", "--model", &t2, "--seed", "14"],
        vec!["verify", "--preset", "two-state", "--seed", "15"],
        vec!["config", "--preset", "mm1-sqrt2"],
    ];
    for args in &runs {
        let csv = dir.join("series.csv");
        let csv = csv.to_str().unwrap();
        let mut with_csv = args.clone();
        let writes_csv = !matches!(args[0], "wasserstein" | "j" | "config" | "bound" | "threshold");
        if writes_csv {
            with_csv.extend(["--csv", csv]);
        }
        let first = run_cli(&with_csv, None);
        let first_csv = std::fs::read(csv).unwrap_or_default();
        let _ = std::fs::remove_file(csv);
        let second = run_cli(&with_csv, Some("1"));
        let second_csv = std::fs::read(csv).unwrap_or_default();
        let _ = std::fs::remove_file(csv);
        check(first.status.success(), || format!("{}: exit {:?}: {}", args[0], first.status.code(), String::from_utf8_lossy(&first.stderr)))?;
        check(first.stdout == second.stdout, || format!("{}: stdout differs between runs", args.join(" ")))?;
        check(first_csv == second_csv, || format!("{}: CSV differs between runs", args.join(" ")))?;
        check(!writes_csv || !first_csv.is_empty(), || format!("{}: no CSV written", args[0]))?;
    }
    Ok(format!("{} commands byte-identical across runs and worker counts", runs.len()))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("transport oracle equivalence", Box::new(criterion_1)),
        ("J property suite", Box::new(criterion_2)),
        ("birth-death sharpness", Box::new(criterion_3)),
        ("modified birth-death", Box::new(criterion_4)),
        ("agents closed forms", Box::new(criterion_5)),
        ("coupling marginals", Box::new(criterion_6)),
        ("contraction verification", Box::new(criterion_7)),
        ("herd metastability", Box::new(criterion_8)),
        ("eigen solver", Box::new(criterion_9)),
        ("determinism", Box::new(move || criterion_10(dir.path()))),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({why})", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
