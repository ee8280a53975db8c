//! Edit mode: building a new observation by picking values axis by axis.
//!
//! Selections are kept consistent at every step:
//! - picking a value inside a branch sets the branch's owning dimension to
//!   the value the branch requires, which drops selections inside every
//!   sibling branch;
//! - picking (or changing) a dimension's value drops selections inside every
//!   branch of that dimension the new value does not satisfy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    child_path, collect_active, Branch, ConditionalSchema, Dataset, DatasetError, DimensionBody, DimensionSpec,
    Observation, Value, ViolationKind,
};
use crate::path::{AxisPath, BranchPath};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EditError {
    #[error("an edit session is already active")]
    AlreadyActive,
    #[error("no active edit session")]
    Inactive,
    #[error("unknown source observation `{0}`")]
    UnknownSource(String),
    #[error("unknown axis `{0}`")]
    UnknownPath(String),
    #[error("illegal value for `{path}`: {kind}")]
    IllegalValue { path: String, kind: ViolationKind },
    #[error("incomplete observation, missing: {}", join(.missing))]
    Incomplete { missing: Vec<AxisPath> },
    #[error("committed observation is invalid: {0}")]
    Invalid(#[from] DatasetError),
}

fn join(paths: &[AxisPath]) -> String {
    paths.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EditOrigin {
    Scratch,
    DuplicateOf(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditSession {
    active: bool,
    selections: BTreeMap<AxisPath, Value>,
    origin: EditOrigin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tooltip {
    pub path: AxisPath,
    pub label: String,
    pub value: String,
}

#[derive(Debug, Clone)]
pub struct Committed {
    pub dataset: Dataset,
    pub observation_id: String,
    pub session: EditSession,
}

impl EditSession {
    /// Opens a session, either empty or seeded with an existing line.
    pub fn begin(current: Option<&EditSession>, dataset: &Dataset, origin: EditOrigin) -> Result<Self, EditError> {
        if current.is_some_and(EditSession::is_active) {
            return Err(EditError::AlreadyActive);
        }
        let selections = match &origin {
            EditOrigin::Scratch => BTreeMap::new(),
            EditOrigin::DuplicateOf(id) => dataset
                .observation(id)
                .ok_or_else(|| EditError::UnknownSource(id.clone()))?
                .values
                .clone(),
        };
        Ok(Self {
            active: true,
            selections,
            origin,
        })
    }

    pub fn cancel(&self) -> Self {
        Self {
            active: false,
            selections: BTreeMap::new(),
            origin: self.origin.clone(),
        }
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn origin(&self) -> &EditOrigin {
        &self.origin
    }

    pub fn selections(&self) -> &BTreeMap<AxisPath, Value> {
        &self.selections
    }

    fn require_active(&self) -> Result<(), EditError> {
        if self.active {
            Ok(())
        } else {
            Err(EditError::Inactive)
        }
    }

    pub fn select(&self, schema: &ConditionalSchema, path: &AxisPath, value: Value) -> Result<Self, EditError> {
        self.require_active()?;
        let path = schema
            .canonical_axis(path)
            .ok_or_else(|| EditError::UnknownPath(path.to_string()))?;
        let dim = schema.dimension(&path).expect("canonical axis resolves");
        let value = legalize(dim, &path, value)?;

        let mut selections = self.selections.clone();
        for ancestor in path.ancestor_branches() {
            let owner = ancestor.owner();
            let branch = schema.branch(&ancestor).expect("ancestor of a resolved axis");
            let holds = selections.get(&owner).is_some_and(|v| branch.matches(v) == Ok(true));
            if !holds {
                let owner_dim = schema.dimension(&owner).expect("ancestor owner resolves");
                set_and_prune(&mut selections, owner_dim, &owner, implied_value(owner_dim, branch));
            }
        }
        set_and_prune(&mut selections, dim, &path, value);
        Ok(Self {
            selections,
            ..self.clone()
        })
    }

    /// Removes a selection together with everything selected beneath it.
    pub fn clear(&self, schema: &ConditionalSchema, path: &AxisPath) -> Result<Self, EditError> {
        self.require_active()?;
        let path = schema
            .canonical_axis(path)
            .ok_or_else(|| EditError::UnknownPath(path.to_string()))?;
        let mut selections = self.selections.clone();
        selections.retain(|k, _| k != &path && !is_beneath(k, &path));
        Ok(Self {
            selections,
            ..self.clone()
        })
    }

    /// Dimensions a commit still needs, in traversal order.
    pub fn missing_paths(&self, schema: &ConditionalSchema) -> Vec<AxisPath> {
        fn walk(
            dims: &[DimensionSpec],
            prefix: Option<&BranchPath>,
            selections: &BTreeMap<AxisPath, Value>,
            out: &mut Vec<AxisPath>,
        ) {
            for dim in dims {
                let path = child_path(prefix, &dim.id);
                let Some(value) = selections.get(&path) else {
                    out.push(path);
                    continue;
                };
                for branch in dim.branches() {
                    if branch.matches(value) == Ok(true) {
                        walk(branch.children(), Some(&path.branch(branch.key())), selections, out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(schema.dimensions(), None, &self.selections, &mut out);
        out
    }

    /// Appends the selections as a new observation and closes the session.
    pub fn commit(&self, dataset: &Dataset) -> Result<Committed, EditError> {
        self.require_active()?;
        let missing = self.missing_paths(dataset.schema());
        if !missing.is_empty() {
            return Err(EditError::Incomplete { missing });
        }
        let id = fresh_id(dataset);
        let observation = Observation {
            id: id.clone(),
            values: self.selections.clone(),
        };
        let dataset = dataset.with_observation(observation)?;
        Ok(Committed {
            dataset,
            observation_id: id,
            session: self.cancel(),
        })
    }

    /// Per-axis label/value pairs for client tooltips, in traversal order.
    pub fn tooltips(&self, schema: &ConditionalSchema) -> Vec<Tooltip> {
        let mut order = Vec::new();
        collect_active(schema.dimensions(), None, &self.selections, &mut order);
        order
            .into_iter()
            .filter_map(|path| {
                let dim = schema.dimension(&path)?;
                let value = self.selections.get(&path)?;
                Some(Tooltip {
                    label: dim.display_label().to_owned(),
                    value: value.to_string(),
                    path,
                })
            })
            .collect()
    }
}

fn is_beneath(candidate: &AxisPath, owner: &AxisPath) -> bool {
    let (c, o) = (candidate.segments(), owner.segments());
    c.len() > o.len() && c.starts_with(o)
}

fn legalize(dim: &DimensionSpec, path: &AxisPath, value: Value) -> Result<Value, EditError> {
    dim.check_value(&value).map_err(|kind| EditError::IllegalValue {
        path: path.to_string(),
        kind,
    })?;
    Ok(match (&dim.body, value) {
        (DimensionBody::Numeric { range, .. }, Value::Number(v)) => Value::Number(range.snap(v)),
        (_, v) => v,
    })
}

/// The value an owning dimension must take for `branch` to hold.
fn implied_value(dim: &DimensionSpec, branch: Branch<'_>) -> Value {
    match branch {
        Branch::Option(o) => Value::Category(o.value.clone()),
        Branch::Range(r) => {
            let range = dim.range().expect("range branch on numeric dimension");
            let mid = range.snap((r.low + r.high) / 2.0);
            if mid >= r.low && mid <= r.high {
                Value::Number(mid)
            } else {
                Value::Number(r.low)
            }
        }
    }
}

fn set_and_prune(selections: &mut BTreeMap<AxisPath, Value>, dim: &DimensionSpec, path: &AxisPath, value: Value) {
    let failing: Vec<BranchPath> = dim
        .branches()
        .into_iter()
        .filter(|b| b.matches(&value) != Ok(true))
        .map(|b| path.branch(b.key()))
        .collect();
    selections.retain(|k, _| !failing.iter().any(|b| b.contains_axis(k)));
    selections.insert(path.clone(), value);
}

fn fresh_id(dataset: &Dataset) -> String {
    (1..)
        .map(|n| format!("edit-{n}"))
        .find(|id| dataset.observation(id).is_none())
        .expect("unbounded id space")
}
