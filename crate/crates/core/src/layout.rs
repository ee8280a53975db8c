//! Geometry for conditional parallel coordinates.
//!
//! The drawable width is cut into `W` equal unit columns where `W` is the
//! summed weight of the top-level dimensions. A dimension's axis sits in the
//! first column of its slot; each expanded branch gets a box spanning the
//! remaining columns, confined to the vertical band of its option (or range),
//! and the branch's child axes are laid out inside that box with the same
//! rules.
//!
//! Polylines that pass a dimension with expanded branches get one extra
//! vertex at the right edge of that dimension's slot, at the height of the
//! last vertex. Lines therefore run horizontally through the slot and never
//! cut a box whose predicate they do not satisfy.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{child_path, ConditionalSchema, Dataset, DimensionBody, DimensionSpec, Kind, Value};
use crate::path::{AxisPath, BranchPath};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("unknown branch `{0}`")]
    UnknownBranch(String),
    #[error("branch `{0}` has no child dimensions to expand")]
    NotExpandable(String),
    #[error("cannot expand `{path}` while enclosing branch `{ancestor}` is collapsed")]
    AncestorCollapsed { path: String, ancestor: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LayoutError {
    #[error("invalid canvas: {0}")]
    InvalidCanvas(String),
    #[error("invalid layout options: {0}")]
    InvalidOptions(String),
    #[error(
        "canvas too small: {total_weight} columns need at least {min_width} px of width \
         at {min_column_width} px per column"
    )]
    CanvasTooSmall {
        total_weight: u32,
        min_column_width: f64,
        min_width: f64,
    },
    #[error("unknown dimension `{0}`")]
    UnknownDimension(String),
    #[error(transparent)]
    State(#[from] StateError),
}

/// The set of currently unfolded branches. Always prefix-closed and stored
/// with canonical range keys.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExpansionState {
    expanded: BTreeSet<BranchPath>,
}

impl ExpansionState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every branch with children expanded.
    pub fn all(schema: &ConditionalSchema) -> Self {
        Self {
            expanded: schema.branch_paths().into_iter().collect(),
        }
    }

    /// Builds a state from paths in any order.
    pub fn from_paths<'a, I>(schema: &ConditionalSchema, paths: I) -> Result<Self, StateError>
    where
        I: IntoIterator<Item = &'a BranchPath>,
    {
        let mut paths: Vec<&BranchPath> = paths.into_iter().collect();
        paths.sort_by_key(|p| p.depth());
        let mut state = Self::new();
        for p in paths {
            state = state.expand(schema, p)?;
        }
        Ok(state)
    }

    /// Parses `all` or a comma-separated list of branch paths. Blank input
    /// is the fully collapsed state; unknown paths are errors.
    pub fn parse_spec(schema: &ConditionalSchema, spec: &str) -> Result<Self, StateError> {
        let spec = spec.trim();
        if spec == "all" {
            return Ok(Self::all(schema));
        }
        let paths = spec
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<BranchPath>()
                    .map_err(|_| StateError::UnknownBranch(s.to_owned()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_paths(schema, &paths)
    }

    pub fn contains(&self, path: &BranchPath) -> bool {
        self.expanded.contains(path)
    }

    pub fn is_empty(&self) -> bool {
        self.expanded.is_empty()
    }

    pub fn len(&self) -> usize {
        self.expanded.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &BranchPath> {
        self.expanded.iter()
    }

    pub fn expand(&self, schema: &ConditionalSchema, path: &BranchPath) -> Result<Self, StateError> {
        let canonical = schema
            .canonical_branch(path)
            .ok_or_else(|| StateError::UnknownBranch(path.to_string()))?;
        let branch = schema.branch(&canonical).expect("canonical path resolves");
        if branch.children().is_empty() {
            return Err(StateError::NotExpandable(canonical.to_string()));
        }
        let mut ancestor = canonical.parent_branch();
        while let Some(a) = ancestor {
            if !self.expanded.contains(&a) {
                return Err(StateError::AncestorCollapsed {
                    path: canonical.to_string(),
                    ancestor: a.to_string(),
                });
            }
            ancestor = a.parent_branch();
        }
        let mut next = self.clone();
        next.expanded.insert(canonical);
        Ok(next)
    }

    /// Removes `path` and everything expanded inside it.
    pub fn collapse(&self, path: &BranchPath) -> Self {
        Self {
            expanded: self
                .expanded
                .iter()
                .filter(|p| *p != path && !path.contains_branch(p))
                .cloned()
                .collect(),
        }
    }

    pub fn validate(&self, schema: &ConditionalSchema) -> Result<(), StateError> {
        let rebuilt = Self::from_paths(schema, self.expanded.iter())?;
        if rebuilt.expanded != self.expanded {
            // Non-canonical spelling of a range key.
            let odd = self.expanded.difference(&rebuilt.expanded).next().expect("sets differ");
            return Err(StateError::UnknownBranch(odd.to_string()));
        }
        Ok(())
    }
}

fn weight_of(dim: &DimensionSpec, path: &AxisPath, expansion: &ExpansionState) -> u32 {
    let widest = dim
        .branches()
        .into_iter()
        .filter_map(|branch| {
            let bp = path.branch(branch.key());
            expansion.contains(&bp).then(|| {
                branch
                    .children()
                    .iter()
                    .map(|c| weight_of(c, &bp.child(c.id.clone()), expansion))
                    .sum::<u32>()
            })
        })
        .max();
    match widest {
        None => 1,
        Some(sum) => 1 + sum,
    }
}

/// Number of unit columns a dimension consumes: 1 when collapsed, otherwise
/// 1 for its own axis plus the widest expanded branch.
pub fn dimension_weight(
    schema: &ConditionalSchema,
    path: &AxisPath,
    expansion: &ExpansionState,
) -> Result<u32, LayoutError> {
    let dim = schema
        .dimension(path)
        .ok_or_else(|| LayoutError::UnknownDimension(path.to_string()))?;
    Ok(weight_of(dim, path, expansion))
}

pub fn total_weight(schema: &ConditionalSchema, expansion: &ExpansionState) -> u32 {
    schema
        .dimensions()
        .iter()
        .map(|d| weight_of(d, &AxisPath::root(d.id.clone()), expansion))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Canvas {
    pub width: f64,
    pub height: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    40.0
}

impl Canvas {
    pub fn new(width: f64, height: f64, margin: f64) -> Self {
        Self { width, height, margin }
    }

    fn check(&self) -> Result<(), LayoutError> {
        let finite = self.width.is_finite() && self.height.is_finite() && self.margin.is_finite();
        if !finite || self.width <= 0.0 || self.height <= 0.0 || self.margin < 0.0 {
            return Err(LayoutError::InvalidCanvas(format!(
                "width and height must be positive, margin non-negative (got {}x{}, margin {})",
                self.width, self.height, self.margin
            )));
        }
        if self.width - 2.0 * self.margin <= 0.0 || self.height - 2.0 * self.margin <= 0.0 {
            return Err(LayoutError::InvalidCanvas(format!(
                "margin {} leaves no drawable area in {}x{}",
                self.margin, self.width, self.height
            )));
        }
        Ok(())
    }
}

impl Default for Canvas {
    fn default() -> Self {
        Self::new(1200.0, 600.0, default_margin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct LayoutOptions {
    /// Gap between a branch box and its band, and between box and sub-axes.
    pub inner_padding: f64,
    pub min_column_width: f64,
}

impl Default for LayoutOptions {
    fn default() -> Self {
        Self {
            inner_padding: 6.0,
            min_column_width: 40.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Axis-aligned rectangle, serialized as `[x0, y0, x1, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl From<[f64; 4]> for Rect {
    fn from([x0, y0, x1, y1]: [f64; 4]) -> Self {
        Self { x0, y0, x1, y1 }
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.x0, r.y0, r.x1, r.y1]
    }
}

impl Rect {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }

    pub fn shrink(&self, by: f64) -> Rect {
        Rect {
            x0: self.x0 + by,
            y0: self.y0 + by,
            x1: self.x1 - by,
            y1: self.y1 - by,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum AxisDomain {
    Categorical { options: Vec<String> },
    Numeric { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tick {
    pub label: String,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AxisGeom {
    pub path: AxisPath,
    pub label: String,
    pub depth: usize,
    pub x: f64,
    pub y_top: f64,
    pub y_bottom: f64,
    pub domain: AxisDomain,
    pub ticks: Vec<Tick>,
}

impl AxisGeom {
    pub fn kind(&self) -> Kind {
        match self.domain {
            AxisDomain::Categorical { .. } => Kind::Categorical,
            AxisDomain::Numeric { .. } => Kind::Numeric,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OptionAnchor {
    pub axis: AxisPath,
    pub value: String,
    pub y: f64,
    /// Vertical extent reserved for this option, `[top, bottom]`.
    pub band: [f64; 2],
    pub expandable: bool,
    pub expanded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchBox {
    pub branch: BranchPath,
    pub depth: usize,
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub id: String,
    #[serde(rename = "points", with = "flat_points")]
    pub vertices: Vec<Point>,
}

mod flat_points {
    use super::Point;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(points: &[Point], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(points.iter().flat_map(|p| [p.x, p.y]))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Point>, D::Error> {
        let flat = Vec::<f64>::deserialize(d)?;
        if flat.len() % 2 != 0 {
            return Err(D::Error::custom("point array must have even length"));
        }
        Ok(flat.chunks(2).map(|c| Point::new(c[0], c[1])).collect())
    }
}

/// Everything a renderer or client needs to draw one view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LayoutGeometry {
    pub canvas: Canvas,
    pub total_weight: u32,
    pub column_width: f64,
    pub axes: Vec<AxisGeom>,
    pub options: Vec<OptionAnchor>,
    pub boxes: Vec<BranchBox>,
    pub polylines: Vec<Polyline>,
}

impl LayoutGeometry {
    pub fn axis(&self, path: &AxisPath) -> Option<&AxisGeom> {
        self.axes.iter().find(|a| &a.path == path)
    }

    pub fn branch_box(&self, path: &BranchPath) -> Option<&BranchBox> {
        self.boxes.iter().find(|b| &b.branch == path)
    }

    pub fn polyline(&self, id: &str) -> Option<&Polyline> {
        self.polylines.iter().find(|p| p.id == id)
    }

    pub fn option_anchor(&self, axis: &AxisPath, value: &str) -> Option<&OptionAnchor> {
        self.options.iter().find(|o| &o.axis == axis && o.value == value)
    }
}

struct Placed<'a> {
    dim: &'a DimensionSpec,
    x: f64,
    y_top: f64,
    y_bottom: f64,
    /// Right edge of the slot, set only when some branch is expanded.
    slot_end: Option<f64>,
}

impl Placed<'_> {
    fn y_of(&self, value: &Value) -> Option<f64> {
        let h = self.y_bottom - self.y_top;
        match (&self.dim.body, value) {
            (DimensionBody::Categorical { options }, Value::Category(s)) => {
                let k = options.iter().position(|o| &o.value == s)?;
                Some(self.y_top + (k as f64 + 0.5) * h / options.len() as f64)
            }
            (DimensionBody::Numeric { range, .. }, Value::Number(v)) => {
                Some(self.y_top + (1.0 - (v - range.min) / (range.max - range.min)) * h)
            }
            _ => None,
        }
    }
}

struct Grid<'a> {
    left: f64,
    unit: f64,
    padding: f64,
    expansion: &'a ExpansionState,
    placed: HashMap<AxisPath, Placed<'a>>,
    axes: Vec<AxisGeom>,
    options: Vec<OptionAnchor>,
    boxes: Vec<BranchBox>,
}

impl<'a> Grid<'a> {
    fn column_x(&self, col: u32) -> f64 {
        self.left + f64::from(col) * self.unit
    }

    fn place(
        &mut self,
        dims: &'a [DimensionSpec],
        prefix: Option<&BranchPath>,
        first_col: u32,
        y_top: f64,
        y_bottom: f64,
    ) {
        let mut col = first_col;
        let h = y_bottom - y_top;
        for dim in dims {
            let path = child_path(prefix, &dim.id);
            let weight = weight_of(dim, &path, self.expansion);
            let x = self.left + (f64::from(col) + 0.5) * self.unit;

            let (domain, ticks) = match &dim.body {
                DimensionBody::Categorical { options } => {
                    let n = options.len() as f64;
                    let ticks = options
                        .iter()
                        .enumerate()
                        .map(|(k, o)| Tick {
                            label: o.value.clone(),
                            y: y_top + (k as f64 + 0.5) * h / n,
                        })
                        .collect();
                    for (k, o) in options.iter().enumerate() {
                        let band_top = y_top + k as f64 * h / n;
                        let band_bottom = y_top + (k as f64 + 1.0) * h / n;
                        self.options.push(OptionAnchor {
                            axis: path.clone(),
                            value: o.value.clone(),
                            y: y_top + (k as f64 + 0.5) * h / n,
                            band: [band_top, band_bottom],
                            expandable: !o.children.is_empty(),
                            expanded: self.expansion.contains(&path.branch(o.value.clone())),
                        });
                    }
                    let domain = AxisDomain::Categorical {
                        options: options.iter().map(|o| o.value.clone()).collect(),
                    };
                    (domain, ticks)
                }
                DimensionBody::Numeric { range, .. } => {
                    let ticks = (0..=4)
                        .map(|i| {
                            let t = f64::from(i) / 4.0;
                            let v = range.min + t * (range.max - range.min);
                            Tick {
                                label: format_tick(v),
                                y: y_bottom - t * h,
                            }
                        })
                        .collect();
                    (
                        AxisDomain::Numeric {
                            min: range.min,
                            max: range.max,
                        },
                        ticks,
                    )
                }
            };

            self.axes.push(AxisGeom {
                path: path.clone(),
                label: dim.display_label().to_owned(),
                depth: path.depth(),
                x,
                y_top,
                y_bottom,
                domain,
                ticks,
            });
            self.placed.insert(
                path.clone(),
                Placed {
                    dim,
                    x,
                    y_top,
                    y_bottom,
                    slot_end: (weight > 1).then(|| self.column_x(col + weight)),
                },
            );

            for branch in dim.branches() {
                let bp = path.branch(branch.key());
                if !self.expansion.contains(&bp) {
                    continue;
                }
                let band = match (&dim.body, branch) {
                    (DimensionBody::Categorical { options }, crate::model::Branch::Option(o)) => {
                        let n = options.len() as f64;
                        let k = options.iter().position(|x| x.value == o.value).expect("own option") as f64;
                        (y_top + k * h / n, y_top + (k + 1.0) * h / n)
                    }
                    (DimensionBody::Numeric { range, .. }, crate::model::Branch::Range(r)) => {
                        let span = range.max - range.min;
                        let y = |v: f64| y_top + (1.0 - (v - range.min) / span) * h;
                        (y(r.high), y(r.low))
                    }
                    _ => unreachable!("branch kind follows dimension kind"),
                };
                let pv = self.padding.min((band.1 - band.0) / 6.0);
                let ph = self.padding.min(self.unit / 6.0);
                let columns: u32 = branch
                    .children()
                    .iter()
                    .map(|c| weight_of(c, &bp.child(c.id.clone()), self.expansion))
                    .sum();
                let rect = Rect {
                    x0: self.column_x(col + 1) + ph,
                    y0: band.0 + pv,
                    x1: self.column_x(col + 1 + columns) - ph,
                    y1: band.1 - pv,
                };
                self.boxes.push(BranchBox {
                    branch: bp.clone(),
                    depth: bp.depth(),
                    rect,
                });
                self.place(branch.children(), Some(&bp), col + 1, rect.y0 + pv, rect.y1 - pv);
            }
            col += weight;
        }
    }

    fn trace(
        &self,
        dims: &[DimensionSpec],
        prefix: Option<&BranchPath>,
        values: &BTreeMap<AxisPath, Value>,
        out: &mut Vec<Point>,
    ) {
        for dim in dims {
            let path = child_path(prefix, &dim.id);
            let (Some(value), Some(placed)) = (values.get(&path), self.placed.get(&path)) else {
                continue;
            };
            let Some(y) = placed.y_of(value) else {
                continue;
            };
            out.push(Point::new(placed.x, y));
            for branch in dim.branches() {
                let bp = path.branch(branch.key());
                if self.expansion.contains(&bp) && branch.matches(value) == Ok(true) {
                    self.trace(branch.children(), Some(&bp), values, out);
                }
            }
            if let Some(end) = placed.slot_end {
                let last = *out.last().expect("pushed above");
                if end > last.x {
                    out.push(Point::new(end, last.y));
                }
            }
        }
    }
}

fn format_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_owned()
    } else {
        s.to_owned()
    }
}

fn build_grid<'a>(
    schema: &'a ConditionalSchema,
    expansion: &'a ExpansionState,
    canvas: Canvas,
    options: LayoutOptions,
) -> Result<(Grid<'a>, u32), LayoutError> {
    canvas.check()?;
    if !(options.inner_padding.is_finite() && options.inner_padding > 0.0) {
        return Err(LayoutError::InvalidOptions("inner padding must be positive".into()));
    }
    if !(options.min_column_width.is_finite() && options.min_column_width > 0.0) {
        return Err(LayoutError::InvalidOptions(
            "minimum column width must be positive".into(),
        ));
    }
    expansion.validate(schema)?;

    let total = total_weight(schema, expansion);
    let drawable = canvas.width - 2.0 * canvas.margin;
    let unit = drawable / f64::from(total);
    if unit < options.min_column_width {
        return Err(LayoutError::CanvasTooSmall {
            total_weight: total,
            min_column_width: options.min_column_width,
            min_width: f64::from(total) * options.min_column_width + 2.0 * canvas.margin,
        });
    }
    let mut grid = Grid {
        left: canvas.margin,
        unit,
        padding: options.inner_padding,
        expansion,
        placed: HashMap::new(),
        axes: Vec::new(),
        options: Vec::new(),
        boxes: Vec::new(),
    };
    grid.place(
        schema.dimensions(),
        None,
        0,
        canvas.margin,
        canvas.height - canvas.margin,
    );
    Ok((grid, total))
}

/// Lays out every visible axis, option, branch box and polyline.
pub fn compute_layout(
    dataset: &Dataset,
    expansion: &ExpansionState,
    canvas: Canvas,
    options: LayoutOptions,
) -> Result<LayoutGeometry, LayoutError> {
    let schema = dataset.schema();
    let (mut grid, total) = build_grid(schema, expansion, canvas, options)?;
    let polylines = dataset
        .observations()
        .iter()
        .map(|o| {
            let mut vertices = Vec::new();
            grid.trace(schema.dimensions(), None, &o.values, &mut vertices);
            Polyline {
                id: o.id.clone(),
                vertices,
            }
        })
        .collect();
    let mut axes = std::mem::take(&mut grid.axes);
    axes.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(LayoutGeometry {
        canvas,
        total_weight: total,
        column_width: grid.unit,
        axes,
        options: std::mem::take(&mut grid.options),
        boxes: std::mem::take(&mut grid.boxes),
        polylines,
    })
}

/// Vertices for a possibly partial value map, e.g. an in-progress edit.
/// Missing values are skipped.
pub fn trace_values(
    schema: &ConditionalSchema,
    expansion: &ExpansionState,
    canvas: Canvas,
    options: LayoutOptions,
    values: &BTreeMap<AxisPath, Value>,
) -> Result<Vec<Point>, LayoutError> {
    let (grid, _) = build_grid(schema, expansion, canvas, options)?;
    let mut out = Vec::new();
    grid.trace(schema.dimensions(), None, values, &mut out);
    Ok(out)
}
