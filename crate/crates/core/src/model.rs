//! Conditional data: schemas whose categorical options or numeric ranges
//! carry extra child dimensions, and observations whose values exist exactly
//! where those predicates hold.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::path::{parse_range_key, range_key, AxisPath, BranchPath, SEPARATOR};

/// A single coordinate of an observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Category(String),
}

impl Value {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(v) => Some(*v),
            Value::Category(_) => None,
        }
    }

    pub fn as_category(&self) -> Option<&str> {
        match self {
            Value::Category(s) => Some(s),
            Value::Number(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(v) => write!(f, "{v}"),
            Value::Category(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Category(s.to_owned())
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Number(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Kind {
    Categorical,
    Numeric,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Categorical => "categorical",
            Kind::Numeric => "numeric",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DimensionSpec {
    pub id: String,
    #[serde(default)]
    pub label: String,
    #[serde(flatten)]
    pub body: DimensionBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum DimensionBody {
    Categorical {
        options: Vec<OptionSpec>,
    },
    #[serde(rename_all = "camelCase")]
    Numeric {
        range: NumericRange,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        range_branches: Vec<RangeBranch>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub value: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<DimensionSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericRange {
    pub min: f64,
    pub max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl NumericRange {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    /// Snaps `v` to the declared step grid anchored at `min`, if any.
    pub fn snap(&self, v: f64) -> f64 {
        match self.step {
            Some(step) => {
                let snapped = self.min + ((v - self.min) / step).round() * step;
                snapped.clamp(self.min, self.max)
            }
            None => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeBranch {
    pub low: f64,
    pub high: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<DimensionSpec>,
}

impl DimensionSpec {
    pub fn categorical(id: &str, options: Vec<OptionSpec>) -> Self {
        Self {
            id: id.to_owned(),
            label: id.to_owned(),
            body: DimensionBody::Categorical { options },
        }
    }

    pub fn numeric(id: &str, min: f64, max: f64) -> Self {
        Self {
            id: id.to_owned(),
            label: id.to_owned(),
            body: DimensionBody::Numeric {
                range: NumericRange { min, max, step: None },
                range_branches: Vec::new(),
            },
        }
    }

    pub fn kind(&self) -> Kind {
        match self.body {
            DimensionBody::Categorical { .. } => Kind::Categorical,
            DimensionBody::Numeric { .. } => Kind::Numeric,
        }
    }

    pub fn display_label(&self) -> &str {
        if self.label.is_empty() {
            &self.id
        } else {
            &self.label
        }
    }

    pub fn options(&self) -> &[OptionSpec] {
        match &self.body {
            DimensionBody::Categorical { options } => options,
            DimensionBody::Numeric { .. } => &[],
        }
    }

    pub fn range(&self) -> Option<&NumericRange> {
        match &self.body {
            DimensionBody::Numeric { range, .. } => Some(range),
            DimensionBody::Categorical { .. } => None,
        }
    }

    pub fn option_index(&self, value: &str) -> Option<usize> {
        self.options().iter().position(|o| o.value == value)
    }

    /// Branches that carry child dimensions, in declared order.
    pub fn branches(&self) -> Vec<Branch<'_>> {
        match &self.body {
            DimensionBody::Categorical { options } => options
                .iter()
                .filter(|o| !o.children.is_empty())
                .map(Branch::Option)
                .collect(),
            DimensionBody::Numeric { range_branches, .. } => range_branches
                .iter()
                .filter(|r| !r.children.is_empty())
                .map(Branch::Range)
                .collect(),
        }
    }

    /// Looks up a branch by key; childless options resolve too.
    pub fn branch(&self, key: &str) -> Option<Branch<'_>> {
        match &self.body {
            DimensionBody::Categorical { options } => options.iter().find(|o| o.value == key).map(Branch::Option),
            DimensionBody::Numeric { range_branches, .. } => {
                let (low, high) = parse_range_key(key)?;
                range_branches
                    .iter()
                    .find(|r| r.low == low && r.high == high)
                    .map(Branch::Range)
            }
        }
    }

    /// Checks a value against the dimension's domain.
    pub fn check_value(&self, value: &Value) -> Result<(), ViolationKind> {
        match (&self.body, value) {
            (DimensionBody::Categorical { options }, Value::Category(s)) => {
                if options.iter().any(|o| &o.value == s) {
                    Ok(())
                } else {
                    Err(ViolationKind::UnknownOption)
                }
            }
            (DimensionBody::Numeric { range, .. }, Value::Number(v)) => {
                if range.contains(*v) {
                    Ok(())
                } else {
                    Err(ViolationKind::OutOfRange)
                }
            }
            _ => Err(ViolationKind::TypeMismatch),
        }
    }
}

impl OptionSpec {
    pub fn leaf(value: &str) -> Self {
        Self {
            value: value.to_owned(),
            children: Vec::new(),
        }
    }

    pub fn with_children(value: &str, children: Vec<DimensionSpec>) -> Self {
        Self {
            value: value.to_owned(),
            children,
        }
    }
}

/// A predicate binding child dimensions to an option or a numeric range.
#[derive(Debug, Clone, Copy)]
pub enum Branch<'a> {
    Option(&'a OptionSpec),
    Range(&'a RangeBranch),
}

impl<'a> Branch<'a> {
    pub fn key(&self) -> String {
        match self {
            Branch::Option(o) => o.value.clone(),
            Branch::Range(r) => range_key(r.low, r.high),
        }
    }

    pub fn children(&self) -> &'a [DimensionSpec] {
        match self {
            Branch::Option(o) => &o.children,
            Branch::Range(r) => &r.children,
        }
    }

    pub fn matches(&self, value: &Value) -> Result<bool, ModelError> {
        evaluate_predicate(*self, value)
    }
}

/// Evaluates a branch predicate: option equality or inclusive range membership.
pub fn evaluate_predicate(branch: Branch<'_>, value: &Value) -> Result<bool, ModelError> {
    match (branch, value) {
        (Branch::Option(o), Value::Category(s)) => Ok(&o.value == s),
        (Branch::Range(r), Value::Number(v)) => Ok(*v >= r.low && *v <= r.high),
        (Branch::Option(_), Value::Number(_)) => Err(ModelError::TypeMismatch {
            expected: Kind::Categorical,
            found: Kind::Numeric,
        }),
        (Branch::Range(_), Value::Category(_)) => Err(ModelError::TypeMismatch {
            expected: Kind::Numeric,
            found: Kind::Categorical,
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemaError {
    #[error("schema has no dimensions")]
    Empty,
    #[error("`{path}`: ids and option values must be non-empty and must not contain `/`")]
    IllegalName { path: String },
    #[error("`{path}`: duplicate sibling dimension id")]
    DuplicateId { path: String },
    #[error("`{path}`: categorical dimension needs at least one option")]
    NoOptions { path: String },
    #[error("`{path}`: duplicate option `{value}`")]
    DuplicateOption { path: String, value: String },
    #[error("`{path}`: numeric range needs finite min < max (got {min}..{max})")]
    InvalidRange { path: String, min: f64, max: f64 },
    #[error("`{path}`: step must be finite and positive")]
    InvalidStep { path: String },
    #[error("`{path}`: range branch [{low},{high}] must satisfy min <= low < high <= max")]
    RangeBranchBounds { path: String, low: f64, high: f64 },
    #[error("`{path}`: range branches {first} and {second} overlap")]
    OverlappingRanges {
        path: String,
        first: String,
        second: String,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("type mismatch: expected {expected} value, found {found}")]
    TypeMismatch { expected: Kind, found: Kind },
    #[error("unknown dimension path `{0}`")]
    UnknownDimension(String),
    #[error("unknown branch path `{0}`")]
    UnknownBranch(String),
    #[error("observation `{id}` is invalid: {report}")]
    InvalidObservation { id: String, report: ValidationReport },
}

/// Validated tree of dimension specs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemaDoc", into = "SchemaDoc")]
pub struct ConditionalSchema {
    dimensions: Vec<DimensionSpec>,
}

#[derive(Serialize, Deserialize)]
struct SchemaDoc {
    dimensions: Vec<DimensionSpec>,
}

impl TryFrom<SchemaDoc> for ConditionalSchema {
    type Error = SchemaError;

    fn try_from(doc: SchemaDoc) -> Result<Self, Self::Error> {
        ConditionalSchema::new(doc.dimensions)
    }
}

impl From<ConditionalSchema> for SchemaDoc {
    fn from(schema: ConditionalSchema) -> Self {
        SchemaDoc {
            dimensions: schema.dimensions,
        }
    }
}

fn legal_name(s: &str) -> bool {
    !s.is_empty() && !s.contains(SEPARATOR)
}

fn check_dimensions(dims: &[DimensionSpec], prefix: &str) -> Result<(), SchemaError> {
    let mut seen = HashSet::new();
    for dim in dims {
        let path = if prefix.is_empty() {
            dim.id.clone()
        } else {
            format!("{prefix}{SEPARATOR}{}", dim.id)
        };
        if !legal_name(&dim.id) {
            return Err(SchemaError::IllegalName { path });
        }
        if !seen.insert(dim.id.as_str()) {
            return Err(SchemaError::DuplicateId { path });
        }
        match &dim.body {
            DimensionBody::Categorical { options } => {
                if options.is_empty() {
                    return Err(SchemaError::NoOptions { path });
                }
                let mut values = HashSet::new();
                for option in options {
                    if !legal_name(&option.value) {
                        return Err(SchemaError::IllegalName {
                            path: format!("{path}{SEPARATOR}{}", option.value),
                        });
                    }
                    if !values.insert(option.value.as_str()) {
                        return Err(SchemaError::DuplicateOption {
                            path,
                            value: option.value.clone(),
                        });
                    }
                    check_dimensions(&option.children, &format!("{path}{SEPARATOR}{}", option.value))?;
                }
            }
            DimensionBody::Numeric { range, range_branches } => {
                if !(range.min.is_finite() && range.max.is_finite() && range.min < range.max) {
                    return Err(SchemaError::InvalidRange {
                        path,
                        min: range.min,
                        max: range.max,
                    });
                }
                if let Some(step) = range.step {
                    if !(step.is_finite() && step > 0.0) {
                        return Err(SchemaError::InvalidStep { path });
                    }
                }
                let mut sorted: Vec<&RangeBranch> = range_branches.iter().collect();
                for rb in &sorted {
                    if !(range.min <= rb.low && rb.low < rb.high && rb.high <= range.max) {
                        return Err(SchemaError::RangeBranchBounds {
                            path,
                            low: rb.low,
                            high: rb.high,
                        });
                    }
                }
                sorted.sort_by(|a, b| a.low.total_cmp(&b.low));
                for pair in sorted.windows(2) {
                    // Inclusive bounds: touching endpoints count as overlap.
                    if pair[1].low <= pair[0].high {
                        return Err(SchemaError::OverlappingRanges {
                            path,
                            first: range_key(pair[0].low, pair[0].high),
                            second: range_key(pair[1].low, pair[1].high),
                        });
                    }
                }
                for rb in range_branches {
                    check_dimensions(
                        &rb.children,
                        &format!("{path}{SEPARATOR}{}", range_key(rb.low, rb.high)),
                    )?;
                }
            }
        }
    }
    Ok(())
}

impl ConditionalSchema {
    pub fn new(dimensions: Vec<DimensionSpec>) -> Result<Self, SchemaError> {
        if dimensions.is_empty() {
            return Err(SchemaError::Empty);
        }
        check_dimensions(&dimensions, "")?;
        Ok(Self { dimensions })
    }

    /// Top-level dimensions, in display order.
    pub fn dimensions(&self) -> &[DimensionSpec] {
        &self.dimensions
    }

    pub fn dimension(&self, path: &AxisPath) -> Option<&DimensionSpec> {
        let segments = path.segments();
        let mut dims = self.dimensions.as_slice();
        let mut i = 0;
        loop {
            let dim = dims.iter().find(|d| d.id == segments[i])?;
            if i + 1 == segments.len() {
                return Some(dim);
            }
            dims = dim.branch(&segments[i + 1])?.children();
            i += 2;
        }
    }

    pub fn branch(&self, path: &BranchPath) -> Option<Branch<'_>> {
        self.dimension(&path.owner())?.branch(path.key())
    }

    /// Rewrites range keys to their canonical spelling.
    pub fn canonical_branch(&self, path: &BranchPath) -> Option<BranchPath> {
        let mut canonical: Option<BranchPath> = None;
        let segments = path.segments();
        let mut dims = self.dimensions.as_slice();
        for pair in segments.chunks(2) {
            let dim = dims.iter().find(|d| d.id == pair[0])?;
            let branch = dim.branch(&pair[1])?;
            let owner = match &canonical {
                None => AxisPath::root(dim.id.clone()),
                Some(b) => b.child(dim.id.clone()),
            };
            canonical = Some(owner.branch(branch.key()));
            dims = branch.children();
        }
        canonical
    }

    pub fn canonical_axis(&self, path: &AxisPath) -> Option<AxisPath> {
        let canonical = match path.parent_branch() {
            None => path.clone(),
            Some(parent) => self.canonical_branch(&parent)?.child(path.dimension_id()),
        };
        self.dimension(&canonical).map(|_| canonical)
    }

    /// Maximum branch nesting depth; 0 for a flat schema.
    pub fn depth(&self) -> usize {
        fn depth_of(dims: &[DimensionSpec]) -> usize {
            dims.iter()
                .flat_map(|d| d.branches())
                .map(|b| 1 + depth_of(b.children()))
                .max()
                .unwrap_or(0)
        }
        depth_of(&self.dimensions)
    }

    /// Every branch with children, depth-first in declared order.
    pub fn branch_paths(&self) -> Vec<BranchPath> {
        fn walk(dims: &[DimensionSpec], prefix: Option<&BranchPath>, out: &mut Vec<BranchPath>) {
            for dim in dims {
                let axis = child_path(prefix, &dim.id);
                for branch in dim.branches() {
                    let bp = axis.branch(branch.key());
                    out.push(bp.clone());
                    walk(branch.children(), Some(&bp), out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.dimensions, None, &mut out);
        out
    }

    /// Every dimension path, depth-first in declared order.
    pub fn axis_paths(&self) -> Vec<AxisPath> {
        fn walk(dims: &[DimensionSpec], prefix: Option<&BranchPath>, out: &mut Vec<AxisPath>) {
            for dim in dims {
                let axis = child_path(prefix, &dim.id);
                out.push(axis.clone());
                for branch in dim.branches() {
                    walk(branch.children(), Some(&axis.branch(branch.key())), out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.dimensions, None, &mut out);
        out
    }
}

pub(crate) fn child_path(prefix: Option<&BranchPath>, id: &str) -> AxisPath {
    match prefix {
        Some(b) => b.child(id),
        None => AxisPath::root(id),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub id: String,
    pub values: BTreeMap<AxisPath, Value>,
}

impl Observation {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            values: BTreeMap::new(),
        }
    }

    pub fn with(mut self, path: &str, value: impl Into<Value>) -> Self {
        let path: AxisPath = path.parse().expect("valid axis path");
        self.values.insert(path, value.into());
        self
    }

    pub fn value(&self, path: &AxisPath) -> Option<&Value> {
        self.values.get(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ViolationKind {
    MissingValue,
    NonMatchingBranch,
    UnknownPath,
    OutOfRange,
    UnknownOption,
    TypeMismatch,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::MissingValue => "missing value",
            ViolationKind::NonMatchingBranch => "value on non-matching branch",
            ViolationKind::UnknownPath => "unknown path",
            ViolationKind::OutOfRange => "out-of-range numeric",
            ViolationKind::UnknownOption => "unknown option",
            ViolationKind::TypeMismatch => "type mismatch",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.kind)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, path: &str, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.path == path && v.kind == kind)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Lists every way `observation` fails to be an element of the conditional
/// data described by `schema`.
pub fn validate_observation(schema: &ConditionalSchema, observation: &Observation) -> ValidationReport {
    fn walk(
        dims: &[DimensionSpec],
        prefix: Option<&BranchPath>,
        observation: &Observation,
        out: &mut BTreeSet<Violation>,
    ) {
        for dim in dims {
            let path = child_path(prefix, &dim.id);
            let Some(value) = observation.values.get(&path) else {
                out.insert(Violation {
                    path: path.to_string(),
                    kind: ViolationKind::MissingValue,
                });
                continue;
            };
            if let Err(kind) = dim.check_value(value) {
                out.insert(Violation {
                    path: path.to_string(),
                    kind,
                });
                continue;
            }
            for branch in dim.branches() {
                if branch.matches(value) == Ok(true) {
                    walk(branch.children(), Some(&path.branch(branch.key())), observation, out);
                }
            }
        }
    }

    let mut found = BTreeSet::new();
    walk(schema.dimensions(), None, observation, &mut found);

    for path in observation.values.keys() {
        if schema.dimension(path).is_none() {
            found.insert(Violation {
                path: path.to_string(),
                kind: ViolationKind::UnknownPath,
            });
            continue;
        }
        for ancestor in path.ancestor_branches() {
            let branch = schema
                .branch(&ancestor)
                .expect("resolvable dimension implies resolvable ancestors");
            let holds = observation
                .values
                .get(&ancestor.owner())
                .is_some_and(|v| branch.matches(v) == Ok(true));
            if !holds {
                found.insert(Violation {
                    path: path.to_string(),
                    kind: ViolationKind::NonMatchingBranch,
                });
                break;
            }
        }
    }

    ValidationReport {
        violations: found.into_iter().collect(),
    }
}

/// The axes a valid observation crosses, depth-first: each dimension is
/// followed immediately by the children of its matching branches.
pub fn active_paths(schema: &ConditionalSchema, observation: &Observation) -> Result<Vec<AxisPath>, ModelError> {
    let report = validate_observation(schema, observation);
    if !report.is_valid() {
        return Err(ModelError::InvalidObservation {
            id: observation.id.clone(),
            report,
        });
    }
    let mut out = Vec::new();
    collect_active(schema.dimensions(), None, &observation.values, &mut out);
    Ok(out)
}

/// Depth-first walk over whatever values are present; absent dimensions are
/// skipped rather than reported.
pub(crate) fn collect_active(
    dims: &[DimensionSpec],
    prefix: Option<&BranchPath>,
    values: &BTreeMap<AxisPath, Value>,
    out: &mut Vec<AxisPath>,
) {
    for dim in dims {
        let path = child_path(prefix, &dim.id);
        let Some(value) = values.get(&path) else {
            continue;
        };
        out.push(path.clone());
        for branch in dim.branches() {
            if branch.matches(value) == Ok(true) {
                collect_active(branch.children(), Some(&path.branch(branch.key())), values, out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("duplicate observation id `{0}`")]
    DuplicateId(String),
    #[error("{} invalid observation(s): {}", .0.len(), summarize(.0))]
    InvalidObservations(Vec<ObservationIssue>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservationIssue {
    pub id: String,
    pub report: ValidationReport,
}

fn summarize(issues: &[ObservationIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("`{}` ({})", i.id, i.report))
        .collect::<Vec<_>>()
        .join(", ")
}

/// A schema plus observations that all validate against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetDoc", into = "DatasetDoc")]
pub struct Dataset {
    schema: ConditionalSchema,
    observations: Vec<Observation>,
}

/// Unvalidated CPC-JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetDoc {
    pub schema: ConditionalSchema,
    #[serde(default)]
    pub observations: Vec<Observation>,
}

impl TryFrom<DatasetDoc> for Dataset {
    type Error = DatasetError;

    fn try_from(doc: DatasetDoc) -> Result<Self, Self::Error> {
        Dataset::new(doc.schema, doc.observations)
    }
}

impl From<Dataset> for DatasetDoc {
    fn from(ds: Dataset) -> Self {
        DatasetDoc {
            schema: ds.schema,
            observations: ds.observations,
        }
    }
}

impl Dataset {
    pub fn new(schema: ConditionalSchema, observations: Vec<Observation>) -> Result<Self, DatasetError> {
        let mut ids = HashSet::new();
        for o in &observations {
            if !ids.insert(o.id.as_str()) {
                return Err(DatasetError::DuplicateId(o.id.clone()));
            }
        }
        let issues: Vec<ObservationIssue> = observations
            .iter()
            .filter_map(|o| {
                let report = validate_observation(&schema, o);
                (!report.is_valid()).then(|| ObservationIssue {
                    id: o.id.clone(),
                    report,
                })
            })
            .collect();
        if !issues.is_empty() {
            return Err(DatasetError::InvalidObservations(issues));
        }
        Ok(Self { schema, observations })
    }

    pub fn schema(&self) -> &ConditionalSchema {
        &self.schema
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn observation(&self, id: &str) -> Option<&Observation> {
        self.observations.iter().find(|o| o.id == id)
    }

    /// A new dataset with `observation` appended.
    pub fn with_observation(&self, observation: Observation) -> Result<Self, DatasetError> {
        if self.observation(&observation.id).is_some() {
            return Err(DatasetError::DuplicateId(observation.id));
        }
        let report = validate_observation(&self.schema, &observation);
        if !report.is_valid() {
            return Err(DatasetError::InvalidObservations(vec![ObservationIssue {
                id: observation.id,
                report,
            }]));
        }
        let mut observations = self.observations.clone();
        observations.push(observation);
        Ok(Self {
            schema: self.schema.clone(),
            observations,
        })
    }
}

/// Ids of observations whose value at the branch's owning dimension satisfies
/// the branch predicate.
pub fn conditional_subset(dataset: &Dataset, branch_path: &BranchPath) -> Result<BTreeSet<String>, ModelError> {
    let branch = dataset
        .schema()
        .branch(branch_path)
        .ok_or_else(|| ModelError::UnknownBranch(branch_path.to_string()))?;
    let owner = dataset
        .schema()
        .canonical_branch(branch_path)
        .expect("resolved above")
        .owner();
    Ok(dataset
        .observations()
        .iter()
        .filter(|o| o.values.get(&owner).is_some_and(|v| branch.matches(v) == Ok(true)))
        .map(|o| o.id.clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::fixtures::figure_dataset;

    fn bp(s: &str) -> BranchPath {
        s.parse().unwrap()
    }

    #[test]
    fn predicate_examples() {
        let enabled = OptionSpec::leaf("Enabled");
        assert!(evaluate_predicate(Branch::Option(&enabled), &"Enabled".into()).unwrap());
        assert!(!evaluate_predicate(Branch::Option(&enabled), &"Disabled".into()).unwrap());
        let range = RangeBranch {
            low: 0.0,
            high: 10.0,
            children: vec![],
        };
        assert!(evaluate_predicate(Branch::Range(&range), &10.0.into()).unwrap());
        assert!(evaluate_predicate(Branch::Range(&range), &0.0.into()).unwrap());
        assert!(!evaluate_predicate(Branch::Range(&range), &10.000001.into()).unwrap());
        assert!(matches!(
            evaluate_predicate(Branch::Range(&range), &"x".into()),
            Err(ModelError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn subset_of_enabled_lines() {
        let schema = ConditionalSchema::new(vec![DimensionSpec::categorical(
            "Axis_3",
            vec![
                OptionSpec::with_children("Enabled", vec![DimensionSpec::numeric("s", 0.0, 1.0)]),
                OptionSpec::leaf("Disabled"),
            ],
        )])
        .unwrap();
        let obs = vec![
            Observation::new("a")
                .with("Axis_3", "Enabled")
                .with("Axis_3/Enabled/s", 0.5),
            Observation::new("b")
                .with("Axis_3", "Enabled")
                .with("Axis_3/Enabled/s", 0.1),
            Observation::new("c").with("Axis_3", "Disabled"),
        ];
        let ds = Dataset::new(schema.clone(), obs).unwrap();
        let ids = conditional_subset(&ds, &bp("Axis_3/Enabled")).unwrap();
        assert_eq!(ids.into_iter().collect::<Vec<_>>(), ["a", "b"]);
        assert!(conditional_subset(&ds, &bp("Axis_3/Disabled")).unwrap().len() == 1);
        assert!(conditional_subset(&ds, &bp("Axis_9/x")).is_err());

        let empty = Dataset::new(schema, vec![]).unwrap();
        assert!(conditional_subset(&empty, &bp("Axis_3/Enabled")).unwrap().is_empty());
    }

    #[test]
    fn validation_reports_each_violation() {
        let ds = figure_dataset();
        let schema = ds.schema();

        let stray = ds.observations()[0].clone().with("Axis_3", "Disabled");
        let report = validate_observation(schema, &stray);
        assert!(report.has("Axis_3/Enabled/Subaxis_1", ViolationKind::NonMatchingBranch));

        let mut missing = ds.observations()[0].clone();
        missing.values.remove(&"Axis_4".parse().unwrap());
        assert!(validate_observation(schema, &missing).has("Axis_4", ViolationKind::MissingValue));

        let bad = ds.observations()[0]
            .clone()
            .with("Axis_1", 1e9)
            .with("Axis_2", "Option_Z")
            .with("Nope", 1.0);
        let report = validate_observation(schema, &bad);
        assert!(report.has("Axis_1", ViolationKind::OutOfRange));
        assert!(report.has("Axis_2", ViolationKind::UnknownOption));
        assert!(report.has("Nope", ViolationKind::UnknownPath));

        for o in ds.observations() {
            assert!(validate_observation(schema, o).is_valid());
        }
    }

    #[test]
    fn active_paths_follow_declared_order() {
        let ds = figure_dataset();
        let upper = ds.observation("L1").unwrap();
        let paths: Vec<String> = active_paths(ds.schema(), upper)
            .unwrap()
            .iter()
            .map(ToString::to_string)
            .collect();
        assert_eq!(
            paths,
            [
                "Axis_1",
                "Axis_2",
                "Axis_2/Option_A/Subaxis_1",
                "Axis_2/Option_A/Subaxis_2",
                "Axis_3",
                "Axis_3/Enabled/Subaxis_1",
                "Axis_3/Enabled/Subaxis_2",
                "Axis_4",
            ]
        );

        let disabled = Observation::new("d")
            .with("Axis_1", 1.0)
            .with("Axis_2", "Option_A")
            .with("Axis_2/Option_A/Subaxis_1", "Suboption_1")
            .with("Axis_2/Option_A/Subaxis_2", 0.5)
            .with("Axis_3", "Disabled")
            .with("Axis_4", 0.2);
        let paths = active_paths(ds.schema(), &disabled).unwrap();
        assert!(paths.iter().all(|p| !p.to_string().starts_with("Axis_3/")));
    }

    #[test]
    fn schema_rejects_bad_shapes() {
        let overlapping = DimensionSpec {
            id: "x".into(),
            label: String::new(),
            body: DimensionBody::Numeric {
                range: NumericRange {
                    min: 0.0,
                    max: 10.0,
                    step: None,
                },
                range_branches: vec![
                    RangeBranch {
                        low: 0.0,
                        high: 5.0,
                        children: vec![DimensionSpec::numeric("a", 0.0, 1.0)],
                    },
                    RangeBranch {
                        low: 5.0,
                        high: 10.0,
                        children: vec![DimensionSpec::numeric("b", 0.0, 1.0)],
                    },
                ],
            },
        };
        assert!(matches!(
            ConditionalSchema::new(vec![overlapping]),
            Err(SchemaError::OverlappingRanges { .. })
        ));
        assert!(matches!(
            ConditionalSchema::new(vec![DimensionSpec::categorical("c", vec![])]),
            Err(SchemaError::NoOptions { .. })
        ));
        assert!(matches!(
            ConditionalSchema::new(vec![DimensionSpec::numeric("n", 1.0, 1.0)]),
            Err(SchemaError::InvalidRange { .. })
        ));
        assert!(matches!(
            ConditionalSchema::new(vec![
                DimensionSpec::numeric("n", 0.0, 1.0),
                DimensionSpec::numeric("n", 0.0, 1.0)
            ]),
            Err(SchemaError::DuplicateId { .. })
        ));
        assert!(matches!(
            ConditionalSchema::new(vec![DimensionSpec::categorical("c", vec![OptionSpec::leaf("a/b")])]),
            Err(SchemaError::IllegalName { .. })
        ));
    }

    #[test]
    fn canonical_range_keys() {
        let schema = ConditionalSchema::new(vec![DimensionSpec {
            id: "x".into(),
            label: String::new(),
            body: DimensionBody::Numeric {
                range: NumericRange {
                    min: 0.0,
                    max: 10.0,
                    step: Some(0.5),
                },
                range_branches: vec![RangeBranch {
                    low: 2.5,
                    high: 5.0,
                    children: vec![DimensionSpec::numeric("a", 0.0, 1.0)],
                }],
            },
        }])
        .unwrap();
        let canonical = schema.canonical_branch(&bp("x/[2.50,5.0]")).unwrap();
        assert_eq!(canonical.to_string(), "x/[2.5,5]");
        assert_eq!(schema.depth(), 1);
        let range = schema.dimensions()[0].range().unwrap();
        assert_eq!(range.snap(2.6), 2.5);
        assert_eq!(range.snap(11.0), 10.0);
    }
}
