//! Headless engine for conditional parallel coordinates.
//!
//! Conditional data attaches extra dimensions to particular values (or
//! numeric ranges) of a dimension. This crate models such data, lays it out
//! as parallel coordinates with expandable axes, resolves pointing, brushing
//! and edit-mode interactions, and exports deterministic SVG and geometry
//! JSON.

pub mod edit;
pub mod ingest;
pub mod interaction;
pub mod layout;
pub mod model;
pub mod path;
pub mod render;
#[cfg(any(test, feature = "testkit"))]
pub mod testkit;

pub use edit::{EditError, EditOrigin, EditSession};
pub use ingest::{from_automl_log, from_flat_csv, parse_column_kinds, parse_cpc_json, to_cpc_json, IngestError};
pub use interaction::{
    edit_mode_emphasis, hit_test, resolve_brushes, resolve_highlight, BrushSet, Emphasis, EmphasisMode,
    HighlightRequest, HitTarget, InteractionError, Interval,
};
pub use layout::{
    compute_layout, dimension_weight, total_weight, trace_values, Canvas, ExpansionState, LayoutError, LayoutGeometry,
    LayoutOptions, Point, Rect, StateError,
};
pub use model::{
    active_paths, conditional_subset, evaluate_predicate, validate_observation, ConditionalSchema, Dataset,
    DatasetError, DimensionSpec, Kind, Observation, ValidationReport, Value,
};
pub use path::{AxisPath, BranchPath};
pub use render::{geometry_from_json, geometry_to_json, to_svg, RenderError, Style};

/// Default cap on branch nesting accepted by the CLI and server.
pub const DEFAULT_MAX_DEPTH: usize = 8;
