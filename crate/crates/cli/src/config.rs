//! Run configuration: TOML files, shipped presets and defaults.

use std::path::{Path, PathBuf};

use jumpcurv::curvature::Strategy;
use jumpcurv::models::ModelSpec;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

pub const PRESETS: &[(&str, &str)] = &[
    ("two-state", include_str!("../presets/two-state.toml")),
    ("mm1-sqrt2", include_str!("../presets/mm1-sqrt2.toml")),
    ("agents-free", include_str!("../presets/agents-free.toml")),
    ("fv-discrete", include_str!("../presets/fv-discrete.toml")),
    ("cdi-quadratic", include_str!("../presets/cdi-quadratic.toml")),
    ("herd-x2", include_str!("../presets/herd-x2.toml")),
];

pub const DEFAULT_K: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    Exhaustive,
    Adjacent,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunParams {
    /// Number of particles.
    pub n: usize,
    pub seed: u64,
    pub strategy: StrategyName,
    /// Pair samples for the random strategy.
    pub samples: usize,
    /// Largest pair count allowed for exhaustive search.
    pub cap: f64,
    pub horizon: f64,
    pub replicas: usize,
    pub grid_points: usize,
    /// Pairs drawn to validate mean-field constants.
    pub validation_samples: usize,
    pub start_site: usize,
    /// Relocation exponent for the eigenfunction bound.
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_y: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_z: Option<Vec<usize>>,
    /// Exit share for herd runs; defaults to the computed threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_threshold: Option<f64>,
    /// Killing rate for the eigenfunction bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absorption: Option<f64>,
    /// Asserted curvature bound checked by `contract` and `verify` in place of the computed one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claimed_bound: Option<f64>,
}

impl RunParams {
    pub fn strategy(&self) -> Strategy {
        match self.strategy {
            StrategyName::Exhaustive => Strategy::Exhaustive,
            StrategyName::Adjacent => Strategy::Adjacent,
            StrategyName::Random => Strategy::Random { samples: self.samples, seed: self.seed },
        }
    }

    pub fn start_y(&self) -> Vec<usize> {
        self.start_y.clone().unwrap_or_else(|| vec![0; self.n])
    }

    pub(crate) fn validate(&self) -> CliResult<()> {
        let bad = |field: &str, why: &str| Err(CliError::validation(format!("run.{field}: {why}")));
        if self.n == 0 {
            return bad("n", "must be at least 1");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon", "must be positive and finite");
        }
        if !(self.cap >= 1.0) {
            return bad("cap", "must be at least 1");
        }
        if self.samples == 0 || self.validation_samples == 0 || self.grid_points < 2 {
            return bad("samples", "samples and validation_samples must be positive, grid_points at least 2");
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad("theta", "must lie in [0, 1]");
        }
        for (field, start) in [("start_y", &self.start_y), ("start_z", &self.start_z)] {
            if let Some(s) = start {
                if s.len() != self.n {
                    return bad(field, &format!("has {} entries, n is {}", s.len(), self.n));
                }
            }
        }
        if let Some(z) = self.z_threshold {
            if !(0.0..1.0).contains(&z) {
                return bad("z_threshold", "must lie in [0, 1)");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub run: RunParams,
    #[serde(default)]
    pub output: OutputPaths,
}

/// A resolved config with the names of the defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub config: RunConfig,
    pub defaults: Vec<String>,
}

pub fn preset_text(name: &str) -> CliResult<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        CliError::validation(format!("unknown preset `{name}`; known presets: {}", names.join(", ")))
    })
}

pub fn load_config(path: &Path) -> CliResult<Loaded> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}

pub fn load_preset(name: &str) -> CliResult<Loaded> {
    parse_config(preset_text(name)?, Path::new("."))
}

/// Parses a config; `base` resolves relative CSV paths.
pub fn parse_config(text: &str, base: &Path) -> CliResult<Loaded> {
    let mut table = parse_table(text)?;
    if let Some(name) = table.get_mut("model").and_then(Value::as_table_mut).and_then(|m| m.remove("preset")) {
        let name = name.as_str().ok_or_else(|| CliError::validation("model.preset must be a string"))?.to_string();
        let mut merged = parse_table(preset_text(&name)?)?;
        merge(&mut merged, table);
        table = merged;
    }
    let mut defaults = Vec::new();
    normalize_model(&mut table, base, &mut defaults)?;
    fill_run_defaults(&mut table, &mut defaults)?;
    let config: RunConfig = Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::validation(e.message().to_string()))?;
    config.run.validate()?;
    Ok(Loaded { config, defaults })
}

/// Serializes a config so that [`parse_config`] reads it back unchanged.
pub fn emit_config(config: &RunConfig) -> CliResult<String> {
    toml::to_string(config).map_err(|e| CliError::validation(format!("cannot serialize config: {e}")))
}

fn parse_table(text: &str) -> CliResult<Table> {
    text.parse::<Table>().map_err(|e| CliError::validation(e.message().to_string()))
}

fn merge(base: &mut Table, over: Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn model_table(table: &mut Table) -> CliResult<&mut Table> {
    table
        .get_mut("model")
        .and_then(Value::as_table_mut)
        .ok_or_else(|| CliError::validation("missing [model] table"))
}

/// Expands rate shorthands (a bare number, a CSV column) and fills `k`.
fn normalize_model(table: &mut Table, base: &Path, defaults: &mut Vec<String>) -> CliResult<()> {
    let model = model_table(table)?;
    let kind = model.get("model").and_then(Value::as_str).unwrap_or_default().to_string();
    match kind.as_str() {
        "birth_death" | "modified_bd" | "mean_field_bd" => {
            for key in ["birth", "death", "weights"] {
                if let Some(v) = model.get_mut(key) {
                    expand_rate(v, &format!("model.{key}"), base)?;
                }
            }
            if !model.contains_key("k") {
                model.insert("k".into(), Value::Integer(DEFAULT_K as i64));
                defaults.push("model.k".into());
            }
        }
        "zero_range" => {
            if let Some(v) = model.get_mut("rates") {
                if !v.is_array() {
                    *v = Value::Array(vec![v.clone()]);
                }
                for (i, item) in v.as_array_mut().expect("array").iter_mut().enumerate() {
                    expand_rate(item, &format!("model.rates[{i}]"), base)?;
                }
            }
        }
        _ => {}
    }
    Ok(())
}

fn expand_rate(v: &mut Value, field: &str, base: &Path) -> CliResult<()> {
    match v {
        Value::Float(x) => *v = single("const", Value::Float(*x)),
        Value::Integer(x) => *v = single("const", Value::Float(*x as f64)),
        Value::Table(t) if t.contains_key("csv") => {
            let path = t.get("csv").and_then(Value::as_str).ok_or_else(|| CliError::validation(format!("{field}.csv must be a path")))?;
            let column = t
                .get("column")
                .and_then(Value::as_str)
                .ok_or_else(|| CliError::validation(format!("{field}.column must name a CSV column")))?;
            if let Some(extra) = t.keys().find(|k| *k != "csv" && *k != "column") {
                return Err(CliError::validation(format!("{field}: unknown field `{extra}`")));
            }
            let values = read_column(&base.join(path), column)?;
            *v = single("values", Value::Array(values.into_iter().map(Value::Float).collect()));
        }
        _ => {}
    }
    Ok(())
}

fn single(key: &str, value: Value) -> Value {
    let mut t = Table::new();
    t.insert(key.into(), value);
    Value::Table(t)
}

/// Reads the named column of a headed CSV file as numbers.
pub fn read_column(path: &Path, column: &str) -> CliResult<Vec<f64>> {
    let err = |m: String| CliError::validation(format!("{}: {m}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    let idx = headers.iter().position(|h| h.trim() == column).ok_or_else(|| err(format!("no column `{column}`")))?;
    reader
        .records()
        .enumerate()
        .map(|(row, rec)| {
            let rec = rec.map_err(|e| err(e.to_string()))?;
            let cell = rec.get(idx).unwrap_or("").trim();
            cell.parse::<f64>().map_err(|_| err(format!("row {}: `{cell}` is not a number", row + 1)))
        })
        .collect()
}

fn fill_run_defaults(table: &mut Table, defaults: &mut Vec<String>) -> CliResult<()> {
    let run = table.entry("run").or_insert_with(|| Value::Table(Table::new()));
    let run = run.as_table_mut().ok_or_else(|| CliError::validation("run must be a table"))?;
    let start_len = run.get("start_y").and_then(Value::as_array).map(|a| a.len() as i64);
    let fixed: [(&str, Value); 11] = [
        ("n", Value::Integer(start_len.unwrap_or(1))),
        ("seed", Value::Integer(0)),
        ("strategy", Value::String("exhaustive".into())),
        ("samples", Value::Integer(1000)),
        ("cap", Value::Float(1e6)),
        ("horizon", Value::Float(1.0)),
        ("replicas", Value::Integer(200)),
        ("grid_points", Value::Integer(20)),
        ("validation_samples", Value::Integer(1000)),
        ("start_site", Value::Integer(0)),
        ("theta", Value::Float(0.0)),
    ];
    for (key, value) in fixed {
        if !run.contains_key(key) {
            run.insert(key.into(), value);
            defaults.push(format!("run.{key}"));
        }
    }
    Ok(())
}
