//! Measure files and metric specifications.

use std::path::Path;

use jumpcurv::space::{BaseMeasure, FiniteMeasure, GroundMetric};

use crate::error::{CliError, CliResult};

/// Rows of a `site,weight` CSV file, sites kept as text.
fn measure_rows(path: &Path) -> CliResult<Vec<(String, f64)>> {
    let err = |m: String| CliError::validation(format!("{}: {m}", path.display()));
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "site" || &headers[1] != "weight" {
        return Err(err("expected header `site,weight`".into()));
    }
    reader
        .records()
        .enumerate()
        .map(|(row, rec)| {
            let rec = rec.map_err(|e| err(e.to_string()))?;
            let w = rec[1].parse::<f64>().map_err(|_| err(format!("row {}: bad weight `{}`", row + 1, &rec[1])))?;
            Ok((rec[0].to_string(), w))
        })
        .collect()
}

/// Measure on integer sites.
pub fn read_measure(path: &Path) -> CliResult<FiniteMeasure> {
    let rows = measure_rows(path)?;
    let atoms = rows
        .into_iter()
        .map(|(s, w)| {
            s.parse::<usize>()
                .map(|s| (s, w))
                .map_err(|_| CliError::validation(format!("{}: site `{s}` is not a non-negative integer", path.display())))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(FiniteMeasure::new(atoms)?)
}

/// Measure on the real line.
pub fn read_line_measure(path: &Path) -> CliResult<Vec<(f64, f64)>> {
    measure_rows(path)?
        .into_iter()
        .map(|(s, w)| {
            s.parse::<f64>()
                .map(|s| (s, w))
                .map_err(|_| CliError::validation(format!("{}: site `{s}` is not a number", path.display())))
        })
        .collect()
}

/// Parses a metric given inline or as a file path.
///
/// Inline forms: `trivial`, `trivial:N`, `euclidean`, `euclidean:c0,c1,..`,
/// `weighted_line:u0,u1,..`. `n_sites` sizes the forms without explicit
/// parameters. A file holds either one such line or a CSV distance matrix.
pub fn parse_metric(spec: &str, n_sites: usize) -> CliResult<GroundMetric> {
    let spec = spec.trim();
    if let Some(metric) = parse_declaration(spec, n_sites)? {
        return Ok(metric);
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("metric `{spec}` is neither a known kind nor a readable file: {e}")))?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if let Some(metric) = parse_declaration(first.trim(), n_sites)? {
        return Ok(metric);
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let matrix = reader
        .records()
        .map(|rec| {
            let rec = rec.map_err(|e| CliError::validation(format!("{spec}: {e}")))?;
            rec.iter().map(|c| c.parse::<f64>().map_err(|_| CliError::validation(format!("{spec}: bad entry `{c}`")))).collect()
        })
        .collect::<CliResult<Vec<Vec<f64>>>>()?;
    Ok(GroundMetric::general(matrix)?)
}

fn parse_declaration(line: &str, n_sites: usize) -> CliResult<Option<GroundMetric>> {
    let (kind, params) = match line.split_once(':') {
        Some((k, p)) => (k.trim(), Some(p.trim())),
        None => (line, None),
    };
    let numbers = |p: &str| -> CliResult<Vec<f64>> {
        p.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::validation(format!("metric parameter `{t}` is not a number"))))
            .collect()
    };
    let metric = match (kind, params) {
        ("trivial", None) => GroundMetric::trivial(n_sites)?,
        ("trivial", Some(p)) => {
            GroundMetric::trivial(p.parse().map_err(|_| CliError::validation(format!("trivial metric size `{p}`")))?)?
        }
        ("euclidean", None) => GroundMetric::measure_line((0..n_sites).map(|k| k as f64).collect(), BaseMeasure::lebesgue())?,
        ("euclidean", Some(p)) => GroundMetric::measure_line(numbers(p)?, BaseMeasure::lebesgue())?,
        ("weighted_line", Some(p)) => GroundMetric::weighted_line(&numbers(p)?)?,
        ("weighted_line", None) => return Err(CliError::validation("weighted_line needs its weights, e.g. weighted_line:1,2")),
        _ => return Ok(None),
    };
    Ok(Some(metric))
}

/// Smallest site count covering every site in `measures` and `extra`.
pub fn sites_needed(measures: &[&FiniteMeasure], extra: &[usize]) -> usize {
    measures.iter().flat_map(|m| m.support()).chain(extra.iter().copied()).max().map_or(0, |s| s + 1)
}
