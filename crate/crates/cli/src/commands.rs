//! One function per subcommand; each returns the report and optional CSV.

use std::path::PathBuf;

use jumpcurv::curvature::{bound_single, bound_system, Certification, CurvatureReport, EngineOptions};
use jumpcurv::jfunc::{j_classical_bound, j_density_closed_form, j_exact, j_kernel_bound, JResult};
use jumpcurv::models::agents::{agents_bound, agents_bound_grid, herd_threshold, inf_sum_f};
use jumpcurv::models::birth_death::{bd_bound, bd_eigen, cdi_series, fv_eigen_bound, modified_bd_bound, modified_bd_classical_bound};
use jumpcurv::models::fleming_viot::fv_bound;
use jumpcurv::models::kernel_family::kernel_family_bound;
use jumpcurv::models::mean_field::{mean_field_bd_bound, random_pairs};
use jumpcurv::models::zero_range::zero_range_bound;
use jumpcurv::models::{build_kernel, ModelSpec};
use jumpcurv::sim::{contraction_estimate, geometric_grid, herd_experiment, simulate, simulate_coupled, ContractionOptions, HerdOptions};
use jumpcurv::space::{config_distance, BaseMeasure, Configuration, FiniteMeasure};
use jumpcurv::transport::{optimal_plan, wasserstein};
use serde_json::{json, Map, Value};

use crate::config::{Loaded, RunConfig};
use crate::error::{CliError, CliResult};
use crate::inputs::{parse_metric, read_line_measure, read_measure, sites_needed};
use crate::report::{csv_table, envelope, fmt_num, num, to_json};

/// Result of a command before rendering.
pub struct Outcome {
    pub report: Value,
    pub csv: Option<String>,
    /// Set when a checked inequality failed; the outputs are still written.
    pub violation: Option<String>,
}

impl Outcome {
    fn plain(report: Value) -> Self {
        Self { report, csv: None, violation: None }
    }
}

fn meta(loaded: &Loaded) -> Map<String, Value> {
    let cfg = &loaded.config;
    let mut m = Map::new();
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("seed".into(), json!(cfg.run.seed));
    m.insert("k".into(), cfg.model.truncation().map_or(Value::Null, |t| json!(t.k)));
    m.insert("margin".into(), cfg.model.truncation().map_or(Value::Null, |t| json!(t.margin)));
    m.insert("strategy".into(), to_json(&cfg.run.strategy()));
    m.insert("n".into(), json!(cfg.run.n));
    m.insert("model".into(), json!(cfg.model.name()));
    m.insert("defaults".into(), json!(loaded.defaults));
    m.insert("config".into(), to_json(cfg));
    m
}

fn plain_meta(pairs: &[(&str, Value)]) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    for (k, v) in pairs {
        m.insert((*k).into(), v.clone());
    }
    m
}

pub fn wasserstein_cmd(m1: &PathBuf, m2: &PathBuf, metric: &str, plan_out: bool) -> CliResult<Outcome> {
    let (a, b) = (read_measure(m1)?, read_measure(m2)?);
    let g = parse_metric(metric, sites_needed(&[&a, &b], &[]))?;
    let distance = wasserstein(&a, &b, &g)?;
    let plan = optimal_plan(&a, &b, &g)?;
    let result = json!({
        "distance": num(distance),
        "mass": num(a.mass()),
        "metric_kind": to_json(&g.kind()),
        "plan_cost": num(plan.cost),
    });
    let csv = plan_out.then(|| {
        csv_table(
            &["source", "target", "weight"],
            plan.pairs.iter().map(|&(s, t, w)| vec![s.to_string(), t.to_string(), fmt_num(w)]),
        )
    });
    let meta = plain_meta(&[("metric", json!(metric))]);
    Ok(Outcome { report: envelope("wasserstein", meta, result), csv, violation: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum JMethodArg {
    Exact,
    Classical,
    Density,
    Kernel,
}

pub struct JInputs<'a> {
    pub x: &'a str,
    pub y: &'a str,
    pub m1: &'a PathBuf,
    pub m2: &'a PathBuf,
    pub metric: &'a str,
    pub method: JMethodArg,
    pub zeta: Option<&'a PathBuf>,
    pub beta_x: Option<f64>,
    pub beta_y: Option<f64>,
}

pub fn j_cmd(inp: &JInputs) -> CliResult<Outcome> {
    let site = |s: &str| s.parse::<usize>().map_err(|_| CliError::validation(format!("site `{s}` is not a non-negative integer")));
    let real = |s: &str| s.parse::<f64>().map_err(|_| CliError::validation(format!("position `{s}` is not a number")));
    let r: JResult = match inp.method {
        JMethodArg::Kernel => {
            if inp.metric != "lebesgue" {
                return Err(CliError::validation("the kernel method runs on the line with `--metric lebesgue`"));
            }
            let (bx, by) = match (inp.beta_x, inp.beta_y) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(CliError::validation("the kernel method needs --beta-x and --beta-y")),
            };
            let a = FiniteMeasure::on_line(&read_line_measure(inp.m1)?)?;
            let b = FiniteMeasure::on_line(&read_line_measure(inp.m2)?)?;
            j_kernel_bound(real(inp.x)?, real(inp.y)?, bx, by, &a, &b, &BaseMeasure::lebesgue())?
        }
        method => {
            let (x, y) = (site(inp.x)?, site(inp.y)?);
            let (a, b) = (read_measure(inp.m1)?, read_measure(inp.m2)?);
            let n = sites_needed(&[&a, &b], &[x, y]);
            match method {
                JMethodArg::Exact => j_exact(x, y, &a, &b, &parse_metric(inp.metric, n)?)?,
                JMethodArg::Classical => j_classical_bound(x, y, &a, &b, &parse_metric(inp.metric, n)?)?,
                JMethodArg::Density => {
                    if !inp.metric.starts_with("trivial") {
                        return Err(CliError::validation("the density closed form needs the trivial metric"));
                    }
                    let zeta = match inp.zeta {
                        Some(p) => read_measure(p)?,
                        None => FiniteMeasure::new((0..n).map(|s| (s, 1.0)))?,
                    };
                    j_density_closed_form(x, y, &a, &b, &zeta)?
                }
                JMethodArg::Kernel => unreachable!("handled above"),
            }
        }
    };
    let result = json!({"value": num(r.value), "method": to_json(&r.method), "augmented_cost": num(r.augmented_cost)});
    let meta = plain_meta(&[("metric", json!(inp.metric)), ("x", json!(inp.x)), ("y", json!(inp.y))]);
    Ok(Outcome::plain(envelope("j", meta, result)))
}

/// A bound value with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceBound {
    pub value: f64,
    /// `None` for a claimed bound.
    pub certification: Option<Certification>,
    pub source: &'static str,
}

impl ReferenceBound {
    /// Sampled bounds are estimates; a failed comparison against one is not a violation.
    pub fn certified(&self) -> bool {
        self.certification != Some(Certification::Sampled)
    }
}

/// Closed-form bound for the model, when it has one.
fn closed_form(cfg: &RunConfig) -> CliResult<Option<(f64, Value)>> {
    let run = &cfg.run;
    Ok(Some(match &cfg.model {
        ModelSpec::Chain { .. } => return Ok(None),
        ModelSpec::BirthDeath(bd) => {
            let v = bd_bound(bd)?;
            (v, json!({"value": num(v)}))
        }
        ModelSpec::ModifiedBd(bd) => {
            let v = modified_bd_bound(bd)?;
            (v, json!({"value": num(v), "classical_coupling": num(modified_bd_classical_bound(bd)?)}))
        }
        ModelSpec::Agents(a) => {
            let v = agents_bound(a)?;
            (v, json!({"value": num(v), "grid_lipschitz_value": num(agents_bound_grid(a, run.n)?)}))
        }
        ModelSpec::ZeroRange(z) => {
            let b = zero_range_bound(z, run.n)?;
            let j = json!({"value": num(b.value), "theta_star": num(b.theta_star), "rate_term": num(b.rate_term)});
            (b.value, j)
        }
        ModelSpec::FlemingViot(fv) => {
            let b = fv_bound(fv, &cfg.model.metric()?)?;
            let j = json!({
                "value": num(b.value),
                "theta_star": num(b.theta_star),
                "sup_value": num(b.sup_value),
                "witness": [b.witness.0, b.witness.1],
            });
            (b.value, j)
        }
        ModelSpec::MeanFieldBd(m) => {
            let sample = random_pairs(m.k, run.n, run.validation_samples, run.seed);
            let r = mean_field_bd_bound(m, &sample)?;
            (r.bound, json!({"value": num(r.bound), "checks": r.checks, "worst_slack": num(r.worst_slack)}))
        }
        ModelSpec::KernelSystem { constants } => {
            let v = kernel_family_bound(constants);
            (v, json!({"value": num(v)}))
        }
    }))
}

fn engine(cfg: &RunConfig) -> CliResult<Option<CurvatureReport>> {
    if matches!(cfg.model, ModelSpec::KernelSystem { .. }) {
        return Ok(None);
    }
    let g = cfg.model.metric()?;
    let opts = EngineOptions { truncation: cfg.model.truncation(), cap: cfg.run.cap, workers: None };
    let report = match cfg.model.site_kernel()? {
        Some(k) => bound_single(&k, &g, &opts)?,
        None => {
            let kernel = build_kernel(&cfg.model, cfg.run.n)?;
            bound_system(kernel.as_ref(), &g, cfg.run.n, cfg.run.strategy(), &opts)?
        }
    };
    Ok(Some(report))
}

fn curvature_json(r: &CurvatureReport) -> Value {
    let s = &r.stats;
    json!({
        "bound": num(r.bound),
        "sup_value": num(r.sup_value),
        "witness": [r.witness.0.sites(), r.witness.1.sites()],
        "certification": to_json(&r.certification),
        "stats": {
            "pairs_examined": s.pairs_examined,
            "strategy": to_json(&s.strategy),
            "truncation": to_json(&s.truncation),
            "boundary_pairs": s.boundary_pairs,
            "boundary_sup": s.boundary_sup.map_or(Value::Null, num),
        },
    })
}

/// The bound checked by `contract` and `verify`: closed form when the model
/// has one, otherwise the engine's.
fn reference_bound(cfg: &RunConfig) -> CliResult<(ReferenceBound, Value)> {
    if let Some(value) = cfg.run.claimed_bound {
        return Ok((ReferenceBound { value, certification: None, source: "claimed" }, json!({"value": num(value)})));
    }
    if let Some((value, j)) = closed_form(cfg)? {
        return Ok((ReferenceBound { value, certification: Some(Certification::ClosedForm), source: "closed_form" }, j));
    }
    let r = engine(cfg)?.expect("models without a closed form have a finite kernel");
    Ok((ReferenceBound { value: r.bound, certification: Some(r.certification), source: "engine" }, curvature_json(&r)))
}

pub fn bound_cmd(loaded: &Loaded) -> CliResult<Outcome> {
    let cfg = &loaded.config;
    let closed = closed_form(cfg)?;
    let eng = engine(cfg)?;
    let (value, cert) = match (&closed, &eng) {
        (Some((v, _)), _) => (*v, Certification::ClosedForm),
        (None, Some(r)) => (r.bound, r.certification),
        (None, None) => unreachable!("every model has a closed form or a kernel"),
    };
    let mut result = Map::new();
    result.insert("bound".into(), num(value));
    result.insert("certification".into(), to_json(&cert));
    result.insert("closed_form".into(), closed.map_or(Value::Null, |(_, j)| j));
    result.insert("engine".into(), eng.as_ref().map_or(Value::Null, curvature_json));
    if let Some(r) = &eng {
        // flat copies of the engine's fields for quick inspection
        result.insert("sup".into(), num(r.sup_value));
        result.insert("witness".into(), json!([r.witness.0.sites(), r.witness.1.sites()]));
        result.insert("stats".into(), curvature_json(r)["stats"].clone());
    }
    Ok(Outcome::plain(envelope("bound", meta(loaded), Value::Object(result))))
}

pub fn eigen_cmd(loaded: &Loaded) -> CliResult<Outcome> {
    let cfg = &loaded.config;
    let ModelSpec::BirthDeath(bd) = &cfg.model else {
        return Err(CliError::validation("eigen needs a birth_death model"));
    };
    let e = bd_eigen(bd)?;
    let cdi = cdi_series(bd)?;
    let fv = cfg.run.absorption.map(|c| {
        json!({"absorption": num(c), "theta": num(cfg.run.theta), "value": num(fv_eigen_bound(&e, c, cfg.run.theta))})
    });
    let result = json!({
        "lambda0": num(e.lambda0),
        "residual": num(e.residual),
        "eta_sup": num(e.eta_sup()),
        "eta_increasing": e.is_increasing(),
        "cdi": {
            "sum": num(*cdi.partial_sums.last().unwrap_or(&0.0)),
            "last_increment": num(cdi.last_increment),
            "converged": cdi.converged,
        },
        "fv_eigen_bound": fv.unwrap_or(Value::Null),
    });
    let csv = csv_table(&["x", "eta"], e.eta.iter().enumerate().map(|(i, &v)| vec![(i + 1).to_string(), fmt_num(v)]));
    Ok(Outcome { report: envelope("eigen", meta(loaded), result), csv: Some(csv), violation: None })
}

pub fn threshold_cmd(loaded: &Loaded) -> CliResult<Outcome> {
    let cfg = &loaded.config;
    let ModelSpec::Agents(a) = &cfg.model else {
        return Err(CliError::validation("threshold needs an agents model"));
    };
    let h = herd_threshold(&a.f, a.n_sites)?;
    let inf = inf_sum_f(&a.f, a.n_sites, a.convex);
    let result = json!({
        "z_star": num(h.z_star),
        "m_star": num(h.m_star),
        "t_critical": num(h.t_critical),
        "temperature": num(a.temperature),
        "below_critical": a.temperature < h.t_critical,
        "agents_bound": num(agents_bound(a)?),
        "agents_bound_grid": num(agents_bound_grid(a, cfg.run.n)?),
        "inf_sum_f": {"value": num(inf.value), "method": to_json(&inf.method)},
    });
    Ok(Outcome::plain(envelope("threshold", meta(loaded), result)))
}

fn configuration(sites: Vec<usize>) -> CliResult<Configuration> {
    Ok(Configuration::new(sites)?)
}

fn start_pair(cfg: &RunConfig) -> CliResult<(Configuration, Configuration)> {
    let z = cfg.run.start_z.clone().ok_or_else(|| CliError::validation("run.start_z is required for coupled runs"))?;
    Ok((configuration(cfg.run.start_y())?, configuration(z)?))
}

fn state_row(t: f64, c: &Configuration) -> Vec<String> {
    std::iter::once(fmt_num(t)).chain(c.sites().iter().map(|s| s.to_string())).collect()
}

pub fn simulate_cmd(loaded: &Loaded) -> CliResult<Outcome> {
    let cfg = &loaded.config;
    let kernel = build_kernel(&cfg.model, cfg.run.n)?;
    let start = configuration(cfg.run.start_y())?;
    let traj = simulate(kernel.as_ref(), &start, cfg.run.horizon, cfg.run.seed)?;
    let result = json!({
        "events": traj.times.len(),
        "null_events": traj.null_events,
        "final_state": traj.final_state().sites(),
        "horizon": num(traj.horizon),
    });
    let header: Vec<String> = std::iter::once("t".to_string()).chain((0..cfg.run.n).map(|i| format!("x{i}"))).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = std::iter::once(state_row(0.0, &traj.states[0]))
        .chain(traj.times.iter().zip(&traj.states[1..]).map(|(&t, c)| state_row(t, c)));
    let csv = csv_table(&header, rows);
    Ok(Outcome { report: envelope("simulate", meta(loaded), result), csv: Some(csv), violation: None })
}

pub fn couple_cmd(loaded: &Loaded) -> CliResult<Outcome> {
    let cfg = &loaded.config;
    let kernel = build_kernel(&cfg.model, cfg.run.n)?;
    let g = cfg.model.metric()?;
    let (y, z) = start_pair(cfg)?;
    let traj = simulate_coupled(kernel.as_ref(), &g, &y, &z, cfg.run.horizon, cfg.run.seed)?;
    let dist = traj.states.iter().map(|(a, b)| config_distance(a, b, &g)).collect::<jumpcurv::Result<Vec<f64>>>()?;
    let coalesced_at = dist.iter().position(|&d| d == 0.0).map(|k| if k == 0 { 0.0 } else { traj.times[k - 1] });
    let result = json!({
        "events": traj.times.len(),
        "null_events": traj.null_events,
        "initial_distance": num(dist[0]),
        "final_distance": num(*dist.last().expect("start recorded")),
        "coalesced_at": coalesced_at.map_or(Value::Null, num),
        "horizon": num(traj.horizon),
    });
    let times = std::iter::once(0.0).chain(traj.times.iter().copied());
    let csv = csv_table(&["t", "d"], times.zip(&dist).map(|(t, &d)| vec![fmt_num(t), fmt_num(d)]));
    Ok(Outcome { report: envelope("couple", meta(loaded), result), csv: Some(csv), violation: None })
}

/// Contraction fit against the reference bound; shared by `contract` and `verify`.
fn contraction(loaded: &Loaded, command: &str, with_bound_report: bool) -> CliResult<Outcome> {
    let cfg = &loaded.config;
    let (reference, bound_json) = reference_bound(cfg)?;
    let kernel = build_kernel(&cfg.model, cfg.run.n)?;
    let g = cfg.model.metric()?;
    let starts = [start_pair(cfg)?];
    let opts = ContractionOptions {
        horizon: cfg.run.horizon,
        replicas: cfg.run.replicas,
        grid: Some(geometric_grid(cfg.run.horizon, cfg.run.grid_points)),
        seed: cfg.run.seed,
        bound: Some(reference.value),
    };
    let fit = contraction_estimate(kernel.as_ref(), &g, &starts, &opts)?;
    let consistent = fit.consistent().expect("bound supplied");
    let verdict = match (consistent, reference.certified()) {
        (true, _) => "consistent",
        (false, true) => "bound violated",
        (false, false) => "inconsistent with an uncertified bound",
    };
    let violation = (!consistent && reference.certified()).then(|| {
        format!(
            "fitted rate {} below bound {} minus two standard errors ({})",
            fmt_num(fit.fitted_rate),
            fmt_num(reference.value),
            fmt_num(fit.rate_se)
        )
    });
    let mut result = Map::new();
    result.insert("fitted_rate".into(), num(fit.fitted_rate));
    result.insert("rate_se".into(), num(fit.rate_se));
    result.insert("bound".into(), num(reference.value));
    result.insert("bound_source".into(), json!(reference.source));
    result.insert("certification".into(), reference.certification.map_or(json!("claimed"), |c| to_json(&c)));
    result.insert("verdict".into(), json!(verdict));
    result.insert("coalesced".into(), json!(fit.coalesced));
    result.insert("points_used".into(), json!(fit.points_used));
    result.insert("replicas".into(), json!(fit.replicas));
    result.insert("start".into(), json!([starts[0].0.sites(), starts[0].1.sites()]));
    if with_bound_report {
        result.insert("bound_report".into(), bound_json);
    }
    let csv = csv_table(
        &["t", "mean_d", "se"],
        (0..fit.times.len()).map(|k| vec![fmt_num(fit.times[k]), fmt_num(fit.mean[k]), fmt_num(fit.se[k])]),
    );
    Ok(Outcome { report: envelope(command, meta(loaded), Value::Object(result)), csv: Some(csv), violation })
}

pub fn contract_cmd(loaded: &Loaded) -> CliResult<Outcome> {
    contraction(loaded, "contract", false)
}

pub fn verify_cmd(loaded: &Loaded) -> CliResult<Outcome> {
    contraction(loaded, "verify", true)
}

pub fn herd_cmd(loaded: &Loaded) -> CliResult<Outcome> {
    let cfg = &loaded.config;
    let ModelSpec::Agents(a) = &cfg.model else {
        return Err(CliError::validation("herd needs an agents model"));
    };
    let z = match cfg.run.z_threshold {
        Some(z) => z,
        None => herd_threshold(&a.f, a.n_sites)
            .map_err(|e| CliError::validation(format!("set run.z_threshold; no threshold could be computed: {e}")))?
            .z_star,
    };
    let opts = HerdOptions {
        n_agents: cfg.run.n,
        start_site: cfg.run.start_site,
        z_threshold: z,
        horizon: cfg.run.horizon,
        replicas: cfg.run.replicas,
        seed: cfg.run.seed,
    };
    let stats = herd_experiment(a, &opts)?;
    let result = json!({
        "z_threshold": num(z),
        "censored_fraction": num(stats.censored_fraction),
        "median_exit": num(stats.median_exit),
        "mean_exit": num(stats.mean_exit),
        "log_mean_over_n": num(stats.log_mean_over_n),
        "n_agents": stats.n_agents,
        "horizon": num(stats.horizon),
        "replicas": opts.replicas,
        "evidence": "censoring growth in N across runs; no exit-rate estimate",
    });
    let csv = csv_table(
        &["replica", "exit_time", "censored"],
        stats.exit_times.iter().enumerate().map(|(r, t)| {
            vec![r.to_string(), fmt_num(t.unwrap_or(stats.horizon)), t.is_none().to_string()]
        }),
    );
    Ok(Outcome { report: envelope("herd", meta(loaded), result), csv: Some(csv), violation: None })
}

/// Applies command-line overrides and records which defaults they replaced.
pub fn apply_overrides(loaded: &mut Loaded, o: &crate::RunOverrides) -> CliResult<()> {
    let run = &mut loaded.config.run;
    let mut set = |key: &str| loaded.defaults.retain(|d| d != &format!("run.{key}"));
    macro_rules! over {
        ($field:ident) => {
            if let Some(v) = o.$field.clone() {
                run.$field = v;
                set(stringify!($field));
            }
        };
        ($field:ident, opt) => {
            if let Some(v) = o.$field.clone() {
                run.$field = Some(v);
                set(stringify!($field));
            }
        };
    }
    over!(seed);
    over!(n);
    over!(horizon);
    over!(replicas);
    over!(samples);
    over!(strategy);
    over!(start_y, opt);
    over!(start_z, opt);
    over!(z_threshold, opt);
    over!(absorption, opt);
    over!(claimed_bound, opt);
    over!(theta);
    if let Some(k) = o.k {
        match &mut loaded.config.model {
            ModelSpec::BirthDeath(bd) | ModelSpec::ModifiedBd(bd) => bd.k = k,
            ModelSpec::MeanFieldBd(m) => m.k = k,
            _ => return Err(CliError::validation("--k applies to birth-death models only")),
        }
        loaded.defaults.retain(|d| d != "model.k");
    }
    if o.n.is_none() {
        // keep n in step with an overridden start
        if let Some(y) = &o.start_y {
            loaded.config.run.n = y.len();
        }
    }
    loaded.config.run.validate()
}
