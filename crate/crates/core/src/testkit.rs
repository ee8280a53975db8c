//! Fixtures, seeded generators and brute-force oracles for tests.
//!
//! The oracles deliberately avoid the library's traversal helpers: they work
//! on canonical path strings and flat tables so that agreement with the
//! production code is evidence rather than tautology.

pub mod fixtures {
    use crate::ingest::{from_automl_log, from_flat_csv, parse_column_kinds, parse_cpc_json};
    use crate::layout::ExpansionState;
    use crate::model::{ConditionalSchema, Dataset};

    pub const FIGURE_JSON: &str = include_str!("../../../data/figure.json");
    pub const CHATBOT_JSON: &str = include_str!("../../../data/chatbot.json");
    pub const CARS_CSV: &str = include_str!("../../../data/cars.csv");
    pub const CARS_KINDS: &str =
        "cylinders=categorical,economy=numeric,displacement=numeric,horsepower=numeric,weight=numeric,acceleration=numeric,year=numeric";
    pub const AUTOML_JSONL: &str = include_str!("../../../data/automl_runs.jsonl");

    /// Four axes and three lines: `L1` upper, `L2` middle, `L3` lower.
    pub fn figure_dataset() -> Dataset {
        parse_cpc_json(FIGURE_JSON.as_bytes()).expect("figure fixture is valid")
    }

    /// Both options of `Axis_2` and `Axis_3`'s `Enabled` option expanded.
    pub fn figure_expansion(schema: &ConditionalSchema) -> ExpansionState {
        ExpansionState::all(schema)
    }

    pub fn chatbot_dataset() -> Dataset {
        parse_cpc_json(CHATBOT_JSON.as_bytes()).expect("chatbot fixture is valid")
    }

    pub fn cars_dataset() -> Dataset {
        let kinds = parse_column_kinds(CARS_KINDS).expect("kinds");
        from_flat_csv(CARS_CSV.as_bytes(), &kinds).expect("cars fixture is valid")
    }

    pub fn automl_dataset() -> Dataset {
        from_automl_log(AUTOML_JSONL.as_bytes()).expect("automl fixture is valid")
    }
}

pub mod gen {
    use rand::seq::SliceRandom;
    use rand::Rng;

    use crate::layout::ExpansionState;
    use crate::model::{
        child_path, ConditionalSchema, Dataset, DimensionBody, DimensionSpec, NumericRange, Observation, OptionSpec,
        RangeBranch, Value,
    };
    use crate::path::BranchPath;

    #[derive(Debug, Clone, Copy)]
    pub struct SchemaShape {
        pub max_dims: usize,
        pub max_depth: usize,
        pub max_options: usize,
        pub max_children: usize,
    }

    impl Default for SchemaShape {
        fn default() -> Self {
            Self {
                max_dims: 6,
                max_depth: 3,
                max_options: 4,
                max_children: 3,
            }
        }
    }

    fn dimension<R: Rng>(rng: &mut R, id: String, depth: usize, shape: &SchemaShape) -> DimensionSpec {
        let can_branch = depth < shape.max_depth;
        let children = |rng: &mut R| -> Vec<DimensionSpec> {
            if !can_branch || !rng.gen_bool(0.45) {
                return Vec::new();
            }
            (0..rng.gen_range(1..=shape.max_children))
                .map(|i| dimension(rng, format!("s{i}"), depth + 1, shape))
                .collect()
        };
        if rng.gen_bool(0.6) {
            let n = rng.gen_range(1..=shape.max_options);
            let options = (0..n)
                .map(|k| OptionSpec {
                    value: format!("o{k}"),
                    children: children(rng),
                })
                .collect();
            DimensionSpec {
                label: id.clone(),
                id,
                body: DimensionBody::Categorical { options },
            }
        } else {
            let min = f64::from(rng.gen_range(-50..50));
            let max = min + f64::from(rng.gen_range(1..100));
            let span = max - min;
            let mut range_branches = Vec::new();
            // Up to two disjoint ranges: lower and upper thirds.
            if rng.gen_bool(0.5) {
                range_branches.push(RangeBranch {
                    low: min,
                    high: min + span / 3.0,
                    children: children(rng),
                });
            }
            if rng.gen_bool(0.5) {
                range_branches.push(RangeBranch {
                    low: min + 2.0 * span / 3.0,
                    high: max,
                    children: children(rng),
                });
            }
            DimensionSpec {
                label: id.clone(),
                id,
                body: DimensionBody::Numeric {
                    range: NumericRange { min, max, step: None },
                    range_branches,
                },
            }
        }
    }

    pub fn schema<R: Rng>(rng: &mut R, shape: &SchemaShape) -> ConditionalSchema {
        let d = rng.gen_range(1..=shape.max_dims);
        let dims = (0..d).map(|i| dimension(rng, format!("d{i}"), 0, shape)).collect();
        ConditionalSchema::new(dims).expect("generated schemas are valid")
    }

    /// Each branch is expanded with probability one half once its enclosing
    /// branch is expanded.
    pub fn expansion<R: Rng>(rng: &mut R, schema: &ConditionalSchema) -> ExpansionState {
        let mut state = ExpansionState::new();
        for bp in schema.branch_paths() {
            let parent_open = bp.parent_branch().is_none_or(|p| state.contains(&p));
            if parent_open && rng.gen_bool(0.5) {
                state = state.expand(schema, &bp).expect("parent is open");
            }
        }
        state
    }

    fn fill<R: Rng>(rng: &mut R, dims: &[DimensionSpec], prefix: Option<&BranchPath>, obs: &mut Observation) {
        for dim in dims {
            let path = child_path(prefix, &dim.id);
            let value = match &dim.body {
                DimensionBody::Categorical { options } => {
                    Value::Category(options.choose(rng).expect("non-empty").value.clone())
                }
                DimensionBody::Numeric { range, range_branches } => {
                    let pick = range_branches.choose(rng).filter(|_| rng.gen_bool(0.6));
                    let (lo, hi) = pick.map_or((range.min, range.max), |r| (r.low, r.high));
                    let v = match rng.gen_range(0..8) {
                        0 => lo,
                        1 => hi,
                        _ => rng.gen_range(lo..=hi),
                    };
                    Value::Number(v)
                }
            };
            for branch in dim.branches() {
                if branch.matches(&value) == Ok(true) {
                    fill(rng, branch.children(), Some(&path.branch(branch.key())), obs);
                }
            }
            obs.values.insert(path, value);
        }
    }

    pub fn observation<R: Rng>(rng: &mut R, schema: &ConditionalSchema, id: String) -> Observation {
        let mut obs = Observation::new(id);
        fill(rng, schema.dimensions(), None, &mut obs);
        obs
    }

    pub fn dataset<R: Rng>(rng: &mut R, schema: &ConditionalSchema, lines: usize) -> Dataset {
        let observations = (0..lines)
            .map(|i| observation(rng, schema, format!("o{i:03}")))
            .collect();
        Dataset::new(schema.clone(), observations).expect("generated observations are valid")
    }
}

pub mod oracle {
    use std::collections::{BTreeMap, BTreeSet};

    use crate::interaction::BrushSet;
    use crate::layout::{Canvas, ExpansionState, Point, Rect};
    use crate::model::{ConditionalSchema, Dataset, DimensionBody, DimensionSpec, Observation, Value};

    struct Node<'a> {
        path: String,
        /// Branch string this dimension hangs off; empty at the top level.
        parent_branch: String,
        dim: &'a DimensionSpec,
    }

    fn key_of_range(low: f64, high: f64) -> String {
        format!("[{low},{high}]")
    }

    fn flatten<'a>(dims: &'a [DimensionSpec], parent_branch: &str, out: &mut Vec<Node<'a>>) {
        for dim in dims {
            let path = if parent_branch.is_empty() {
                dim.id.clone()
            } else {
                format!("{parent_branch}/{}", dim.id)
            };
            out.push(Node {
                path: path.clone(),
                parent_branch: parent_branch.to_owned(),
                dim,
            });
            match &dim.body {
                DimensionBody::Categorical { options } => {
                    for o in options {
                        flatten(&o.children, &format!("{path}/{}", o.value), out);
                    }
                }
                DimensionBody::Numeric { range_branches, .. } => {
                    for r in range_branches {
                        flatten(&r.children, &format!("{path}/{}", key_of_range(r.low, r.high)), out);
                    }
                }
            }
        }
    }

    fn weight_by_scan(nodes: &[Node<'_>], expanded: &BTreeSet<String>, path: &str) -> u32 {
        let owned: Vec<&String> = expanded
            .iter()
            .filter(|b| b.rsplit_once('/').is_some_and(|(owner, _)| owner == path))
            .collect();
        let mut best = None;
        for b in owned {
            let sum: u32 = nodes
                .iter()
                .filter(|n| &n.parent_branch == b)
                .map(|n| weight_by_scan(nodes, expanded, &n.path))
                .sum();
            best = Some(best.map_or(sum, |m: u32| m.max(sum)));
        }
        best.map_or(1, |m| 1 + m)
    }

    /// Weight of the dimension at `path` by scanning a flat node table.
    pub fn dimension_weight(schema: &ConditionalSchema, expansion: &ExpansionState, path: &str) -> u32 {
        let mut nodes = Vec::new();
        flatten(schema.dimensions(), "", &mut nodes);
        let expanded: BTreeSet<String> = expansion.iter().map(ToString::to_string).collect();
        weight_by_scan(&nodes, &expanded, path)
    }

    pub fn total_weight(schema: &ConditionalSchema, expansion: &ExpansionState) -> u32 {
        schema
            .dimensions()
            .iter()
            .map(|d| dimension_weight(schema, expansion, &d.id))
            .sum()
    }

    /// Every dimension path with its weight.
    pub fn all_weights(schema: &ConditionalSchema, expansion: &ExpansionState) -> Vec<(String, u32)> {
        let mut nodes = Vec::new();
        flatten(schema.dimensions(), "", &mut nodes);
        let expanded: BTreeSet<String> = expansion.iter().map(ToString::to_string).collect();
        nodes
            .iter()
            .map(|n| (n.path.clone(), weight_by_scan(&nodes, &expanded, &n.path)))
            .collect()
    }

    /// Paths an observation must carry: every top-level dimension plus the
    /// children of each branch its own values select.
    fn required_paths(schema: &ConditionalSchema, values: &BTreeMap<String, &Value>) -> BTreeSet<String> {
        let mut nodes = Vec::new();
        flatten(schema.dimensions(), "", &mut nodes);
        let mut required = BTreeSet::new();
        // Nodes are in pre-order, so parents are decided before children.
        for n in &nodes {
            let needed = n.parent_branch.is_empty() || {
                let (owner, key) = n.parent_branch.rsplit_once('/').expect("branch has owner");
                required.contains(owner)
                    && match values.get(owner) {
                        Some(Value::Category(s)) => s == key,
                        Some(Value::Number(v)) => {
                            let inner = key.strip_prefix('[').and_then(|k| k.strip_suffix(']'));
                            match inner.and_then(|k| k.split_once(',')) {
                                Some((lo, hi)) => {
                                    let (lo, hi): (f64, f64) = (lo.parse().unwrap(), hi.parse().unwrap());
                                    *v >= lo && *v <= hi
                                }
                                // A number on a categorical owner selects no option.
                                None => false,
                            }
                        }
                        None => false,
                    }
            };
            if needed {
                required.insert(n.path.clone());
            }
        }
        required
    }

    /// Edit-state invariant: every selected path must be required by the
    /// selections themselves, i.e. no selection sits below a branch whose
    /// owner is unselected or selects something else.
    pub fn selections_consistent(schema: &ConditionalSchema, selections: &BTreeMap<crate::AxisPath, Value>) -> bool {
        let values: BTreeMap<String, &Value> = selections.iter().map(|(k, v)| (k.to_string(), v)).collect();
        let required = required_paths(schema, &values);
        values.keys().all(|k| required.contains(k))
    }

    /// Independent validity check: the key set must equal the required set
    /// and every value must lie in its dimension's domain.
    pub fn is_valid(schema: &ConditionalSchema, obs: &Observation) -> bool {
        let values: BTreeMap<String, &Value> = obs.values.iter().map(|(k, v)| (k.to_string(), v)).collect();
        let required = required_paths(schema, &values);
        if values.keys().cloned().collect::<BTreeSet<_>>() != required {
            return false;
        }
        let mut nodes = Vec::new();
        flatten(schema.dimensions(), "", &mut nodes);
        values.iter().all(|(path, value)| {
            let Some(n) = nodes.iter().find(|n| &n.path == path) else {
                return false;
            };
            match (&n.dim.body, value) {
                (DimensionBody::Categorical { options }, Value::Category(s)) => options.iter().any(|o| &o.value == s),
                (DimensionBody::Numeric { range, .. }, Value::Number(v)) => *v >= range.min && *v <= range.max,
                _ => false,
            }
        })
    }

    /// Classic parallel coordinates for a flat dataset: `d` equally spaced
    /// axes at column centers, options at half-band offsets, max at top.
    pub struct FlatLayout {
        pub axis_x: Vec<f64>,
        pub polylines: Vec<(String, Vec<Point>)>,
    }

    pub fn flat_pc_layout(dataset: &Dataset, canvas: Canvas) -> FlatLayout {
        let dims = dataset.schema().dimensions();
        let d = dims.len() as f64;
        let spacing = (canvas.width - 2.0 * canvas.margin) / d;
        let top = canvas.margin;
        let height = canvas.height - 2.0 * canvas.margin;
        let axis_x: Vec<f64> = (0..dims.len())
            .map(|i| canvas.margin + spacing * (i as f64 + 0.5))
            .collect();
        let polylines = dataset
            .observations()
            .iter()
            .map(|o| {
                let pts = dims
                    .iter()
                    .zip(&axis_x)
                    .map(|(dim, &x)| {
                        let value = o.values.iter().find(|(k, _)| k.to_string() == dim.id).unwrap().1;
                        let y = match (&dim.body, value) {
                            (DimensionBody::Categorical { options }, Value::Category(s)) => {
                                let k = options.iter().position(|opt| &opt.value == s).unwrap() as f64;
                                let band = height / options.len() as f64;
                                top + band * k + band / 2.0
                            }
                            (DimensionBody::Numeric { range, .. }, Value::Number(v)) => {
                                top + height * (range.max - v) / (range.max - range.min)
                            }
                            _ => unreachable!("valid flat dataset"),
                        };
                        Point::new(x, y)
                    })
                    .collect();
                (o.id.clone(), pts)
            })
            .collect();
        FlatLayout { axis_x, polylines }
    }

    /// Liang–Barsky clip: does segment `a`–`b` touch the closed rectangle?
    pub fn segment_hits_rect(a: Point, b: Point, r: &Rect) -> bool {
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let mut t0: f64 = 0.0;
        let mut t1: f64 = 1.0;
        for (p, q) in [(-dx, a.x - r.x0), (dx, r.x1 - a.x), (-dy, a.y - r.y0), (dy, r.y1 - a.y)] {
            if p == 0.0 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let t = q / p;
                if p < 0.0 {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }

    /// Ids of polylines with any segment (or lone vertex) touching `rect`.
    pub fn lines_through(polylines: &[(String, Vec<Point>)], rect: &Rect) -> BTreeSet<String> {
        polylines
            .iter()
            .filter(|(_, pts)| match pts.as_slice() {
                [] => false,
                [p] => rect.contains(*p),
                _ => pts.windows(2).any(|w| segment_hits_rect(w[0], w[1], rect)),
            })
            .map(|(id, _)| id.clone())
            .collect()
    }

    /// Intersection of per-axis filters, each computed on its own.
    pub fn brush_filter(dataset: &Dataset, brushes: &BrushSet) -> BTreeSet<String> {
        let mut result: BTreeSet<String> = dataset.observations().iter().map(|o| o.id.clone()).collect();
        for (axis, iv) in brushes {
            let passing: BTreeSet<String> = dataset
                .observations()
                .iter()
                .filter(|o| matches!(o.values.get(axis), Some(Value::Number(v)) if *v >= iv.lo && *v <= iv.hi))
                .map(|o| o.id.clone())
                .collect();
            result = result.intersection(&passing).cloned().collect();
        }
        result
    }

    /// Per-column min/max of every numeric-looking column, by direct scan.
    pub fn csv_extents(csv: &str) -> BTreeMap<String, (f64, f64)> {
        let mut lines = csv.lines();
        let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
        let mut out: BTreeMap<String, (f64, f64)> = BTreeMap::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            for (name, cell) in header.iter().zip(line.split(',')) {
                if let Ok(v) = cell.trim().parse::<f64>() {
                    let e = out.entry((*name).to_owned()).or_insert((v, v));
                    e.0 = e.0.min(v);
                    e.1 = e.1.max(v);
                }
            }
        }
        out
    }
}
