//! Addresses into a conditional schema.
//!
//! A path alternates dimension ids and branch keys: `Axis_3/Enabled/Subaxis_1`
//! names the `Subaxis_1` dimension that exists under the `Enabled` option of
//! `Axis_3`. An [`AxisPath`] always ends on a dimension id; a [`BranchPath`]
//! always ends on a branch key. Numeric range branches use the key
//! `[low,high]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const SEPARATOR: char = '/';

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("empty path")]
    Empty,
    #[error("path `{0}` has an empty segment")]
    EmptySegment(String),
    #[error("path `{0}` does not end on a dimension id")]
    NotAnAxis(String),
    #[error("path `{0}` does not end on a branch key")]
    NotABranch(String),
}

/// Path to a dimension (top-level or nested).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AxisPath {
    segments: Vec<String>,
}

/// Path to a branch: an option value or range of some dimension.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BranchPath {
    segments: Vec<String>,
}

fn split(s: &str) -> Result<Vec<String>, PathError> {
    if s.is_empty() {
        return Err(PathError::Empty);
    }
    let segments: Vec<String> = s.split(SEPARATOR).map(str::to_owned).collect();
    if segments.iter().any(String::is_empty) {
        return Err(PathError::EmptySegment(s.to_owned()));
    }
    Ok(segments)
}

impl AxisPath {
    pub fn root(dimension_id: impl Into<String>) -> Self {
        Self {
            segments: vec![dimension_id.into()],
        }
    }

    pub fn dimension_id(&self) -> &str {
        self.segments.last().expect("axis path is never empty")
    }

    /// Number of branches between the top level and this dimension.
    pub fn depth(&self) -> usize {
        self.segments.len() / 2
    }

    pub fn is_top_level(&self) -> bool {
        self.segments.len() == 1
    }

    /// The branch this dimension hangs off, `None` at the top level.
    pub fn parent_branch(&self) -> Option<BranchPath> {
        if self.is_top_level() {
            None
        } else {
            Some(BranchPath {
                segments: self.segments[..self.segments.len() - 1].to_vec(),
            })
        }
    }

    /// Every governing branch, outermost first.
    pub fn ancestor_branches(&self) -> impl Iterator<Item = BranchPath> + '_ {
        (2..self.segments.len()).step_by(2).map(move |end| BranchPath {
            segments: self.segments[..end].to_vec(),
        })
    }

    pub fn branch(&self, key: impl Into<String>) -> BranchPath {
        let mut segments = self.segments.clone();
        segments.push(key.into());
        BranchPath { segments }
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }
}

impl BranchPath {
    pub fn owner(&self) -> AxisPath {
        AxisPath {
            segments: self.segments[..self.segments.len() - 1].to_vec(),
        }
    }

    pub fn key(&self) -> &str {
        self.segments.last().expect("branch path is never empty")
    }

    pub fn child(&self, dimension_id: impl Into<String>) -> AxisPath {
        let mut segments = self.segments.clone();
        segments.push(dimension_id.into());
        AxisPath { segments }
    }

    /// Nesting level: 1 for a branch of a top-level dimension.
    pub fn depth(&self) -> usize {
        self.segments.len() / 2
    }

    /// Enclosing branch, `None` for branches of top-level dimensions.
    pub fn parent_branch(&self) -> Option<BranchPath> {
        self.owner().parent_branch()
    }

    /// True if `axis` lies somewhere inside this branch.
    pub fn contains_axis(&self, axis: &AxisPath) -> bool {
        axis.segments.len() > self.segments.len() && axis.segments.starts_with(&self.segments)
    }

    /// True if `other` is nested strictly inside this branch.
    pub fn contains_branch(&self, other: &BranchPath) -> bool {
        other.segments.len() > self.segments.len() && other.segments.starts_with(&self.segments)
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }
}

impl FromStr for AxisPath {
    type Err = PathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let segments = split(s)?;
        if segments.len() % 2 == 0 {
            return Err(PathError::NotAnAxis(s.to_owned()));
        }
        Ok(Self { segments })
    }
}

impl FromStr for BranchPath {
    type Err = PathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let segments = split(s)?;
        if segments.len() % 2 == 1 {
            return Err(PathError::NotABranch(s.to_owned()));
        }
        Ok(Self { segments })
    }
}

impl fmt::Display for AxisPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.segments.join("/"))
    }
}

impl fmt::Display for BranchPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.segments.join("/"))
    }
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(AxisPath);
string_serde!(BranchPath);

/// Canonical key of a numeric range branch.
pub fn range_key(low: f64, high: f64) -> String {
    format!("[{low},{high}]")
}

/// Inverse of [`range_key`]; tolerant of any float spelling Rust parses.
pub fn parse_range_key(key: &str) -> Option<(f64, f64)> {
    let inner = key.strip_prefix('[')?.strip_suffix(']')?;
    let (low, high) = inner.split_once(',')?;
    Some((low.trim().parse().ok()?, high.trim().parse().ok()?))
}
