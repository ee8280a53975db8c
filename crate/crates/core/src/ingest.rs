//! Loading datasets: CPC-JSON documents, AutoML search logs and flat CSV.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::model::{
    ConditionalSchema, Dataset, DatasetDoc, DatasetError, DimensionBody, DimensionSpec, Kind, NumericRange,
    Observation, OptionSpec, SchemaError, Value,
};
use crate::path::AxisPath;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("input is not valid UTF-8")]
    NotUtf8,
    #[error("malformed document at `{path}` (line {line}, column {column}): {message}")]
    Malformed {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("automl log line {line}: {message}")]
    AutoMl { line: usize, message: String },
    #[error("csv row {row}, column `{column}`: {message}")]
    Csv {
        row: usize,
        column: String,
        message: String,
    },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("column kinds: {0}")]
    Kinds(String),
}

/// Parses and fully validates a CPC-JSON document.
pub fn parse_cpc_json(bytes: &[u8]) -> Result<Dataset, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|_| IngestError::NotUtf8)?;
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: DatasetDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        IngestError::Malformed {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    Ok(Dataset::new(doc.schema, doc.observations)?)
}

/// Pretty-printed CPC-JSON.
pub fn to_cpc_json(dataset: &Dataset) -> String {
    serde_json::to_string_pretty(dataset).expect("dataset serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PipelineStep {
    pub step_name: String,
    pub block_id: String,
    #[serde(default)]
    pub hyperparameters: BTreeMap<String, Json>,
}

/// One tested pipeline from an AutoML search log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AutoMlRun {
    pub run_id: String,
    pub steps: Vec<PipelineStep>,
    #[serde(default)]
    pub metrics: BTreeMap<String, Json>,
}

/// Observed extents widened by 5% of the span so hand-edited values near
/// the boundary stay legal. Degenerate extents widen by 5% of the magnitude
/// (at least 0.05).
fn widened(lo: f64, hi: f64) -> (f64, f64) {
    let pad = if hi > lo {
        0.05 * (hi - lo)
    } else {
        0.05 * lo.abs().max(1.0)
    };
    (lo - pad, hi + pad)
}

fn scalar_text(v: &Json) -> Option<String> {
    match v {
        Json::String(s) => Some(s.clone()),
        Json::Bool(b) => Some(b.to_string()),
        Json::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Builds a dimension from every value one column took: numeric when all
/// values are numbers, categorical (first-appearance order) otherwise.
fn infer_dimension(id: &str, values: &[&Json]) -> Result<DimensionSpec, String> {
    if values.iter().all(|v| v.is_number()) {
        let nums: Vec<f64> = values.iter().filter_map(|v| v.as_f64()).collect();
        let lo = nums.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = nums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (min, max) = widened(lo, hi);
        return Ok(DimensionSpec::numeric(id, min, max));
    }
    let mut options: Vec<String> = Vec::new();
    for v in values {
        let text = scalar_text(v).ok_or_else(|| format!("`{id}` has a non-scalar value {v}"))?;
        if !options.contains(&text) {
            options.push(text);
        }
    }
    Ok(DimensionSpec::categorical(
        id,
        options.iter().map(|o| OptionSpec::leaf(o)).collect(),
    ))
}

fn typed_value(dim: &DimensionSpec, v: &Json) -> Value {
    match dim.kind() {
        Kind::Numeric => Value::Number(v.as_f64().expect("numeric dimension inferred from numbers")),
        Kind::Categorical => Value::Category(scalar_text(v).expect("checked during inference")),
    }
}

/// Converts a JSON-lines AutoML log: one categorical axis per pipeline step
/// whose options are the block ids; each block carries its hyperparameters as
/// child dimensions; metrics become trailing numeric axes.
pub fn from_automl_log(bytes: &[u8]) -> Result<Dataset, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|_| IngestError::NotUtf8)?;
    let mut runs: Vec<(usize, AutoMlRun)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let run: AutoMlRun = serde_json::from_str(line).map_err(|e| IngestError::AutoMl {
            line: i + 1,
            message: e.to_string(),
        })?;
        runs.push((i + 1, run));
    }
    let Some((_, first)) = runs.first() else {
        return Err(IngestError::Empty("automl log has no runs"));
    };

    let step_names: Vec<String> = first.steps.iter().map(|s| s.step_name.clone()).collect();
    let metric_names: Vec<String> = first.metrics.keys().cloned().collect();
    for (line, run) in &runs {
        let err = |message: String| IngestError::AutoMl { line: *line, message };
        let names: Vec<&String> = run.steps.iter().map(|s| &s.step_name).collect();
        if names.len() != step_names.len() || names.iter().zip(&step_names).any(|(a, b)| *a != b) {
            return Err(err(format!(
                "run `{}` has steps {:?}, expected {:?}",
                run.run_id, names, step_names
            )));
        }
        let metrics: Vec<&String> = run.metrics.keys().collect();
        if metrics.len() != metric_names.len() || metrics.iter().zip(&metric_names).any(|(a, b)| *a != b) {
            return Err(err(format!(
                "run `{}` reports metrics {:?}, expected {:?}",
                run.run_id, metrics, metric_names
            )));
        }
        if let Some((name, v)) = run.metrics.iter().find(|(_, v)| !v.is_number()) {
            return Err(err(format!(
                "run `{}` has non-numeric metric `{name}` = {v}",
                run.run_id
            )));
        }
    }
    if let Some(clash) = metric_names.iter().find(|m| step_names.contains(m)) {
        return Err(IngestError::AutoMl {
            line: 1,
            message: format!("metric `{clash}` collides with a step name"),
        });
    }

    let mut dimensions = Vec::new();
    for (k, step) in step_names.iter().enumerate() {
        let mut blocks: Vec<String> = Vec::new();
        // block id → (hyperparameter names, first line seen)
        let mut hp_names: BTreeMap<&str, (BTreeSet<&String>, usize)> = BTreeMap::new();
        for (line, run) in &runs {
            let s = &run.steps[k];
            let names: BTreeSet<&String> = s.hyperparameters.keys().collect();
            match hp_names.get(s.block_id.as_str()) {
                None => {
                    blocks.push(s.block_id.clone());
                    hp_names.insert(&s.block_id, (names, *line));
                }
                Some((expected, first_line)) if *expected != names => {
                    return Err(IngestError::AutoMl {
                        line: *line,
                        message: format!(
                            "block `{}` in step `{step}` has hyperparameters {:?} but line {first_line} has {:?}",
                            s.block_id, names, expected
                        ),
                    });
                }
                Some(_) => {}
            }
        }
        let mut options = Vec::new();
        for block in &blocks {
            let (names, _) = &hp_names[block.as_str()];
            let mut children = Vec::new();
            for name in names {
                let values: Vec<&Json> = runs
                    .iter()
                    .filter(|(_, r)| &r.steps[k].block_id == block)
                    .map(|(_, r)| &r.steps[k].hyperparameters[*name])
                    .collect();
                let dim = infer_dimension(name, &values).map_err(|message| IngestError::AutoMl { line: 1, message })?;
                children.push(dim);
            }
            options.push(OptionSpec::with_children(block, children));
        }
        dimensions.push(DimensionSpec::categorical(step, options));
    }
    for metric in &metric_names {
        let values: Vec<&Json> = runs.iter().map(|(_, r)| &r.metrics[metric]).collect();
        dimensions.push(infer_dimension(metric, &values).map_err(|message| IngestError::AutoMl { line: 1, message })?);
    }
    let schema = ConditionalSchema::new(dimensions)?;

    let observations = runs
        .iter()
        .map(|(_, run)| {
            let mut obs = Observation::new(run.run_id.clone());
            for (k, s) in run.steps.iter().enumerate() {
                let step_path = AxisPath::root(step_names[k].clone());
                let branch = step_path.branch(s.block_id.clone());
                let step_dim = &schema.dimensions()[k];
                let option = step_dim
                    .options()
                    .iter()
                    .find(|o| o.value == s.block_id)
                    .expect("block collected");
                for (name, v) in &s.hyperparameters {
                    let dim = option
                        .children
                        .iter()
                        .find(|d| &d.id == name)
                        .expect("hyperparameter collected");
                    obs.values.insert(branch.child(name.clone()), typed_value(dim, v));
                }
                obs.values.insert(step_path, Value::Category(s.block_id.clone()));
            }
            for (j, metric) in metric_names.iter().enumerate() {
                let dim = &schema.dimensions()[step_names.len() + j];
                obs.values
                    .insert(AxisPath::root(metric.clone()), typed_value(dim, &run.metrics[metric]));
            }
            obs
        })
        .collect();
    Ok(Dataset::new(schema, observations)?)
}

/// Declared kind of every CSV column, keyed by header name.
pub type ColumnKinds = BTreeMap<String, Kind>;

/// Parses `name=kind` pairs separated by commas; kinds are `categorical`
/// (`c`) or `numeric` (`n`).
pub fn parse_column_kinds(spec: &str) -> Result<ColumnKinds, IngestError> {
    let mut kinds = ColumnKinds::new();
    for pair in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, kind) = pair
            .split_once(['=', ':'])
            .ok_or_else(|| IngestError::Kinds(format!("expected name=kind, got `{pair}`")))?;
        let kind = match kind.trim() {
            "categorical" | "c" => Kind::Categorical,
            "numeric" | "n" => Kind::Numeric,
            other => return Err(IngestError::Kinds(format!("unknown kind `{other}` for `{name}`"))),
        };
        if kinds.insert(name.trim().to_owned(), kind).is_some() {
            return Err(IngestError::Kinds(format!("column `{name}` declared twice")));
        }
    }
    Ok(kinds)
}

/// Loads a classic (branch-free) table. Numeric ranges are the exact data
/// extents; a constant column is widened by ±0.5.
pub fn from_flat_csv(bytes: &[u8], kinds: &ColumnKinds) -> Result<Dataset, IngestError> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(IngestError::Empty("csv file is empty"));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| IngestError::Csv {
            row: 1,
            column: String::new(),
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    for h in &headers {
        if !kinds.contains_key(h) {
            return Err(IngestError::Kinds(format!("no kind declared for column `{h}`")));
        }
    }
    if let Some(extra) = kinds.keys().find(|k| !headers.contains(k)) {
        return Err(IngestError::Kinds(format!(
            "declared column `{extra}` is not in the header"
        )));
    }

    let mut rows: Vec<Vec<Value>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::Csv {
            row: e.position().map_or(0, |p| p.line() as usize),
            column: String::new(),
            message: e.to_string(),
        })?;
        let row = record.position().map_or(rows.len() + 2, |p| p.line() as usize);
        let mut values = Vec::with_capacity(headers.len());
        for (cell, column) in record.iter().zip(&headers) {
            let value = match kinds[column] {
                Kind::Numeric => {
                    let v: f64 = cell.parse().map_err(|_| IngestError::Csv {
                        row,
                        column: column.clone(),
                        message: format!("`{cell}` is not a number"),
                    })?;
                    if !v.is_finite() {
                        return Err(IngestError::Csv {
                            row,
                            column: column.clone(),
                            message: format!("`{cell}` is not finite"),
                        });
                    }
                    Value::Number(v)
                }
                Kind::Categorical => Value::Category(cell.to_owned()),
            };
            values.push(value);
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(IngestError::Empty("csv file has no data rows"));
    }

    let dimensions = headers
        .iter()
        .enumerate()
        .map(|(j, column)| match kinds[column] {
            Kind::Numeric => {
                let nums = rows.iter().filter_map(|r| r[j].as_number());
                let (lo, hi) = nums.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                let (min, max) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
                DimensionSpec {
                    id: column.clone(),
                    label: column.clone(),
                    body: DimensionBody::Numeric {
                        range: NumericRange { min, max, step: None },
                        range_branches: Vec::new(),
                    },
                }
            }
            Kind::Categorical => {
                let mut options: Vec<&str> = Vec::new();
                for r in &rows {
                    let s = r[j].as_category().expect("categorical cell");
                    if !options.contains(&s) {
                        options.push(s);
                    }
                }
                DimensionSpec::categorical(column, options.into_iter().map(OptionSpec::leaf).collect())
            }
        })
        .collect();
    let schema = ConditionalSchema::new(dimensions)?;
    let observations = rows
        .into_iter()
        .enumerate()
        .map(|(i, values)| Observation {
            id: format!("row-{}", i + 1),
            values: headers.iter().map(|h| AxisPath::root(h.clone())).zip(values).collect(),
        })
        .collect();
    Ok(Dataset::new(schema, observations)?)
}
