//! Pointing and highlighting: hit-testing geometry, resolving what a hovered
//! target emphasizes, and conjunctive range brushing.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::edit::EditSession;
use crate::layout::{AxisDomain, LayoutGeometry, Point};
use crate::model::{conditional_subset, Dataset, DimensionBody, Value};
use crate::path::{AxisPath, BranchPath};

/// Half-size of the square marker drawn at each option anchor.
pub const OPTION_MARKER: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InteractionError {
    #[error("target refers to something that no longer exists: {0}")]
    StaleTarget(String),
    #[error("unknown axis `{0}`")]
    UnknownAxis(String),
    #[error("cannot brush categorical axis `{0}`")]
    CategoricalBrush(String),
    #[error("invalid brush on `{path}`: {reason}")]
    InvalidBrush { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum HitTarget {
    Polyline { observation_id: String },
    Option { axis_path: AxisPath, option_value: String },
    BranchBox { branch_path: BranchPath },
    AxisRange { axis_path: AxisPath, value: f64 },
    None,
}

fn distance_to_segment(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.x + t * dx, a.y + t * dy);
    ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt()
}

fn distance_to_polyline(p: Point, vertices: &[Point]) -> Option<f64> {
    match vertices {
        [] => None,
        [only] => Some(distance_to_segment(p, *only, *only)),
        _ => vertices
            .windows(2)
            .map(|w| distance_to_segment(p, w[0], w[1]))
            .min_by(f64::total_cmp),
    }
}

/// Resolves what lies under `point`. Overlaps resolve as option marker,
/// then branch-box background (deepest box), then nearest polyline, then
/// axis line.
pub fn hit_test(geometry: &LayoutGeometry, point: Point, tolerance: f64) -> HitTarget {
    let tolerance = tolerance.max(0.0);
    let axis_x: HashMap<&AxisPath, (f64, usize)> = geometry.axes.iter().map(|a| (&a.path, (a.x, a.depth))).collect();

    let option = geometry
        .options
        .iter()
        .filter_map(|o| {
            let &(x, depth) = axis_x.get(&o.axis)?;
            let half_band = (o.band[1] - o.band[0]) / 2.0;
            let half_w = OPTION_MARKER + tolerance;
            let half_h = (OPTION_MARKER + tolerance).min(half_band);
            let (dx, dy) = ((point.x - x).abs(), (point.y - o.y).abs());
            (dx <= half_w && dy <= half_h).then(|| (dx.hypot(dy), depth, o))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    if let Some((_, _, o)) = option {
        return HitTarget::Option {
            axis_path: o.axis.clone(),
            option_value: o.value.clone(),
        };
    }

    if let Some(b) = geometry
        .boxes
        .iter()
        .filter(|b| b.rect.contains(point))
        .max_by_key(|b| b.depth)
    {
        return HitTarget::BranchBox {
            branch_path: b.branch.clone(),
        };
    }

    let line = geometry
        .polylines
        .iter()
        .filter_map(|l| {
            let d = distance_to_polyline(point, &l.vertices)?;
            (d <= tolerance).then_some((d, l.id.as_str()))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    if let Some((_, id)) = line {
        return HitTarget::Polyline {
            observation_id: id.to_owned(),
        };
    }

    let axis = geometry
        .axes
        .iter()
        .filter(|a| {
            (point.x - a.x).abs() <= tolerance && point.y >= a.y_top - tolerance && point.y <= a.y_bottom + tolerance
        })
        .min_by(|a, b| (point.x - a.x).abs().total_cmp(&(point.x - b.x).abs()));
    if let Some(a) = axis {
        let t = ((point.y - a.y_top) / (a.y_bottom - a.y_top)).clamp(0.0, 1.0);
        let value = match &a.domain {
            AxisDomain::Numeric { min, max } => min + (1.0 - t) * (max - min),
            AxisDomain::Categorical { options } => {
                let n = options.len() as f64;
                (t * n - 0.5).clamp(0.0, n - 1.0)
            }
        };
        return HitTarget::AxisRange {
            axis_path: a.path.clone(),
            value,
        };
    }

    HitTarget::None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EmphasisMode {
    Hover,
    Brush,
    #[default]
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Emphasis {
    #[serde(rename = "observationIds")]
    pub highlighted: BTreeSet<String>,
    pub mode: EmphasisMode,
    /// Set while an edit session is open: the working polyline is drawn in
    /// the edit color and ordinary highlighting is suppressed.
    #[serde(default)]
    pub working_line: bool,
}

impl Emphasis {
    fn hover(ids: BTreeSet<String>) -> Self {
        Self {
            highlighted: ids,
            mode: EmphasisMode::Hover,
            working_line: false,
        }
    }
}

/// Lines emphasized by pointing at `target`.
pub fn resolve_highlight(dataset: &Dataset, target: &HitTarget) -> Result<Emphasis, InteractionError> {
    let schema = dataset.schema();
    match target {
        HitTarget::None => Ok(Emphasis::default()),
        HitTarget::Polyline { observation_id } => {
            if dataset.observation(observation_id).is_none() {
                return Err(InteractionError::StaleTarget(format!("observation `{observation_id}`")));
            }
            Ok(Emphasis::hover(BTreeSet::from([observation_id.clone()])))
        }
        HitTarget::Option {
            axis_path,
            option_value,
        } => {
            let axis = schema
                .canonical_axis(axis_path)
                .ok_or_else(|| InteractionError::StaleTarget(format!("axis `{axis_path}`")))?;
            let dim = schema.dimension(&axis).expect("canonical axis resolves");
            if dim.option_index(option_value).is_none() {
                return Err(InteractionError::StaleTarget(format!(
                    "option `{option_value}` on `{axis_path}`"
                )));
            }
            Ok(Emphasis::hover(lines_with_option(dataset, &axis, option_value)))
        }
        HitTarget::BranchBox { branch_path } => conditional_subset(dataset, branch_path)
            .map(Emphasis::hover)
            .map_err(|_| InteractionError::StaleTarget(format!("branch `{branch_path}`"))),
        HitTarget::AxisRange { axis_path, value } => {
            let axis = schema
                .canonical_axis(axis_path)
                .ok_or_else(|| InteractionError::StaleTarget(format!("axis `{axis_path}`")))?;
            let dim = schema.dimension(&axis).expect("canonical axis resolves");
            match &dim.body {
                DimensionBody::Categorical { options } => {
                    let k = value.round().clamp(0.0, (options.len() - 1) as f64) as usize;
                    Ok(Emphasis::hover(lines_with_option(dataset, &axis, &options[k].value)))
                }
                DimensionBody::Numeric { .. } => Ok(Emphasis::hover(nearest_values(dataset, &axis, *value))),
            }
        }
    }
}

fn lines_with_option(dataset: &Dataset, axis: &AxisPath, option: &str) -> BTreeSet<String> {
    dataset
        .observations()
        .iter()
        .filter(|o| o.values.get(axis).and_then(Value::as_category) == Some(option))
        .map(|o| o.id.clone())
        .collect()
}

/// Lines crossing a numeric axis closest to `target` (all ties).
fn nearest_values(dataset: &Dataset, axis: &AxisPath, target: f64) -> BTreeSet<String> {
    let crossing: Vec<(f64, &str)> = dataset
        .observations()
        .iter()
        .filter_map(|o| {
            let v = o.values.get(axis)?.as_number()?;
            Some(((v - target).abs(), o.id.as_str()))
        })
        .collect();
    let Some(best) = crossing.iter().map(|c| c.0).min_by(f64::total_cmp) else {
        return BTreeSet::new();
    };
    crossing
        .into_iter()
        .filter(|c| c.0 == best)
        .map(|c| c.1.to_owned())
        .collect()
}

/// Closed interval on a numeric axis, serialized as `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for Interval {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Self { lo, hi }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

/// At most one brush per axis.
pub type BrushSet = BTreeMap<AxisPath, Interval>;

/// Lines lying inside every brushed interval. Lines without a value on a
/// brushed axis are never inside it.
pub fn resolve_brushes(dataset: &Dataset, brushes: &BrushSet) -> Result<Emphasis, InteractionError> {
    let schema = dataset.schema();
    let mut checked = Vec::with_capacity(brushes.len());
    for (path, interval) in brushes {
        let axis = schema
            .canonical_axis(path)
            .ok_or_else(|| InteractionError::UnknownAxis(path.to_string()))?;
        let dim = schema.dimension(&axis).expect("canonical axis resolves");
        let range = dim
            .range()
            .ok_or_else(|| InteractionError::CategoricalBrush(path.to_string()))?;
        let invalid = |reason: &str| InteractionError::InvalidBrush {
            path: path.to_string(),
            reason: reason.to_owned(),
        };
        if !(interval.lo.is_finite() && interval.hi.is_finite()) || interval.lo > interval.hi {
            return Err(invalid("interval must be finite with lo <= hi"));
        }
        if interval.lo < range.min || interval.hi > range.max {
            return Err(invalid("interval exceeds the axis range"));
        }
        checked.push((axis, *interval));
    }
    let highlighted = dataset
        .observations()
        .iter()
        .filter(|o| {
            checked.iter().all(|(axis, iv)| {
                o.values
                    .get(axis)
                    .and_then(Value::as_number)
                    .is_some_and(|v| v >= iv.lo && v <= iv.hi)
            })
        })
        .map(|o| o.id.clone())
        .collect();
    Ok(Emphasis {
        highlighted,
        mode: EmphasisMode::Brush,
        working_line: false,
    })
}

/// What the client is pointing at or brushing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum HighlightRequest {
    Target(HitTarget),
    Brushes(BrushSet),
}

/// Emphasis honoring edit mode: while a session is active, hovering and
/// brushing emphasize nothing and the working line is flagged instead.
pub fn edit_mode_emphasis(
    session: Option<&EditSession>,
    dataset: &Dataset,
    request: &HighlightRequest,
) -> Result<Emphasis, InteractionError> {
    if session.is_some_and(EditSession::is_active) {
        return Ok(Emphasis {
            highlighted: BTreeSet::new(),
            mode: EmphasisMode::None,
            working_line: true,
        });
    }
    match request {
        HighlightRequest::Target(t) => resolve_highlight(dataset, t),
        HighlightRequest::Brushes(b) => resolve_brushes(dataset, b),
    }
}
