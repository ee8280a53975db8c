use std::collections::BTreeSet;

use cpc_core::layout::BranchBox;
use cpc_core::model::ViolationKind;
use cpc_core::testkit::{fixtures, gen, oracle};
use cpc_core::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn roomy_canvas(schema: &ConditionalSchema, expansion: &ExpansionState) -> Canvas {
    let w = f64::from(total_weight(schema, expansion));
    Canvas::new(w * 60.0 + 80.0, 600.0, 40.0)
}

fn nested(outer: &BranchBox, inner: &BranchBox) -> bool {
    inner.branch.to_string().starts_with(&format!("{}/", outer.branch))
}

#[test]
fn weight_matches_brute_force_on_random_schemas() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let schema = gen::schema(&mut rng, &gen::SchemaShape::default());
        for _ in 0..10 {
            let exp = gen::expansion(&mut rng, &schema);
            for axis in schema.axis_paths() {
                let got = dimension_weight(&schema, &axis, &exp).unwrap();
                assert_eq!(
                    got,
                    oracle::dimension_weight(&schema, &exp, &axis.to_string()),
                    "{axis}"
                );
            }
            assert_eq!(total_weight(&schema, &exp), oracle::total_weight(&schema, &exp));
        }
    }
}

#[test]
fn figure_weight_is_eight() {
    let ds = fixtures::figure_dataset();
    assert_eq!(total_weight(ds.schema(), &fixtures::figure_expansion(ds.schema())), 8);
}

#[test]
fn boxes_never_overlap_and_geometry_stays_on_canvas() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let schema = gen::schema(&mut rng, &gen::SchemaShape::default());
        let ds = gen::dataset(&mut rng, &schema, 10);
        for _ in 0..30 {
            let exp = gen::expansion(&mut rng, &schema);
            let canvas = roomy_canvas(&schema, &exp);
            let g = compute_layout(&ds, &exp, canvas, LayoutOptions::default()).unwrap();
            let frame = Rect {
                x0: 0.0,
                y0: 0.0,
                x1: canvas.width,
                y1: canvas.height,
            };
            for (i, a) in g.boxes.iter().enumerate() {
                assert!(frame.contains_rect(&a.rect));
                for b in &g.boxes[i + 1..] {
                    if nested(a, b) {
                        assert!(a.rect.contains_rect(&b.rect), "{} ⊄ {}", b.branch, a.branch);
                    } else if nested(b, a) {
                        assert!(b.rect.contains_rect(&a.rect), "{} ⊄ {}", a.branch, b.branch);
                    } else {
                        assert!(!a.rect.intersects(&b.rect), "{} overlaps {}", a.branch, b.branch);
                    }
                }
            }
            for p in g.polylines.iter().flat_map(|l| &l.vertices) {
                assert!(frame.contains(*p));
            }
        }
    }
}

#[test]
fn collapsed_cars_layout_is_classic_parallel_coordinates() {
    let ds = fixtures::cars_dataset();
    let canvas = Canvas::new(1000.0, 500.0, 30.0);
    let g = compute_layout(&ds, &ExpansionState::new(), canvas, LayoutOptions::default()).unwrap();
    let flat = oracle::flat_pc_layout(&ds, canvas);
    let xs: Vec<f64> = g.axes.iter().map(|a| a.x).collect();
    assert_eq!(xs.len(), flat.axis_x.len());
    for (a, b) in xs.iter().zip(&flat.axis_x) {
        assert!((a - b).abs() <= 1e-9);
    }
    assert!(g.boxes.is_empty());
    for (id, pts) in &flat.polylines {
        let line = g.polyline(id).unwrap();
        assert_eq!(line.vertices.len(), pts.len());
        for (p, q) in line.vertices.iter().zip(pts) {
            assert!((p.x - q.x).abs() <= 1e-9 && (p.y - q.y).abs() <= 1e-9, "{id}");
        }
    }
}

#[test]
fn branch_box_highlight_equals_geometric_intersection() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..60 {
        let schema = gen::schema(&mut rng, &gen::SchemaShape::default());
        let n = rng.gen_range(0..=50);
        let ds = gen::dataset(&mut rng, &schema, n);
        let exp = gen::expansion(&mut rng, &schema);
        let g = compute_layout(&ds, &exp, roomy_canvas(&schema, &exp), LayoutOptions::default()).unwrap();
        let lines: Vec<(String, Vec<Point>)> = g.polylines.iter().map(|l| (l.id.clone(), l.vertices.clone())).collect();
        for b in &g.boxes {
            let target = HitTarget::BranchBox {
                branch_path: b.branch.clone(),
            };
            let got = resolve_highlight(&ds, &target).unwrap().highlighted;
            assert_eq!(got, oracle::lines_through(&lines, &b.rect.shrink(1e-6)), "{}", b.branch);
        }
    }
}

#[test]
fn figure_hovers_match_the_described_lines() {
    let ds = fixtures::figure_dataset();
    let exp = fixtures::figure_expansion(ds.schema());
    let g = compute_layout(&ds, &exp, Canvas::new(960.0, 480.0, 40.0), LayoutOptions::default()).unwrap();

    let boxed = g.branch_box(&"Axis_2/Option_A".parse().unwrap()).unwrap();
    let centre = Point::new((boxed.rect.x0 + boxed.rect.x1) / 2.0, boxed.rect.y0 + 2.0);
    let hit = hit_test(&g, centre, 3.0);
    assert!(matches!(hit, HitTarget::BranchBox { .. }), "{hit:?}");
    let upper: BTreeSet<String> = ["L1", "L2"].map(String::from).into();
    assert_eq!(resolve_highlight(&ds, &hit).unwrap().highlighted, upper);

    let anchor = g
        .option_anchor(&"Axis_3/Enabled/Subaxis_1".parse().unwrap(), "Suboption_2")
        .unwrap();
    let axis = g.axis(&anchor.axis).unwrap();
    let hit = hit_test(&g, Point::new(axis.x, anchor.y), 3.0);
    let outer: BTreeSet<String> = ["L1", "L3"].map(String::from).into();
    assert_eq!(resolve_highlight(&ds, &hit).unwrap().highlighted, outer);
}

fn random_value<R: Rng>(rng: &mut R, dim: &DimensionSpec) -> Value {
    match dim.range() {
        Some(r) => Value::Number(rng.gen_range(r.min..=r.max)),
        None => Value::Category(dim.options().choose(rng).unwrap().value.clone()),
    }
}

#[test]
fn random_edit_sequences_keep_selections_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut commits = 0;
    for _ in 0..10 {
        let schema = gen::schema(&mut rng, &gen::SchemaShape::default());
        let mut ds = gen::dataset(&mut rng, &schema, 5);
        let axes = schema.axis_paths();
        let mut session: Option<EditSession> = None;
        for _ in 0..500 {
            let roll = rng.gen_range(0..100);
            match session.clone() {
                None => {
                    let origin = if roll < 50 {
                        EditOrigin::Scratch
                    } else {
                        EditOrigin::DuplicateOf(ds.observations().choose(&mut rng).unwrap().id.clone())
                    };
                    session = Some(EditSession::begin(None, &ds, origin).unwrap());
                }
                Some(s) => {
                    let path = axes.choose(&mut rng).unwrap();
                    let next = if roll < 65 {
                        let v = random_value(&mut rng, schema.dimension(path).unwrap());
                        s.select(&schema, path, v).unwrap()
                    } else if roll < 80 {
                        s.clear(&schema, path).unwrap()
                    } else if roll < 97 {
                        match s.commit(&ds) {
                            Ok(c) => {
                                let obs = c.dataset.observation(&c.observation_id).unwrap();
                                assert!(validate_observation(&schema, obs).is_valid());
                                ds = c.dataset;
                                commits += 1;
                                c.session
                            }
                            Err(EditError::Incomplete { missing }) => {
                                assert_eq!(missing, s.missing_paths(&schema));
                                s
                            }
                            Err(e) => panic!("{e}"),
                        }
                    } else {
                        s.cancel()
                    };
                    assert!(oracle::selections_consistent(&schema, next.selections()), "{next:?}");
                    session = next.is_active().then_some(next);
                }
            }
        }
    }
    assert!(commits > 0);
}

#[test]
fn duplicate_then_commit_copies_every_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for _ in 0..50 {
        let schema = gen::schema(&mut rng, &gen::SchemaShape::default());
        let ds = gen::dataset(&mut rng, &schema, 3);
        let source = ds.observations()[0].clone();
        let s = EditSession::begin(None, &ds, EditOrigin::DuplicateOf(source.id.clone())).unwrap();
        let c = s.commit(&ds).unwrap();
        assert_eq!(c.dataset.observation(&c.observation_id).unwrap().values, source.values);
    }
}

#[test]
fn validator_agrees_with_recursive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..100 {
        let schema = gen::schema(&mut rng, &gen::SchemaShape::default());
        let axes = schema.axis_paths();
        for i in 0..20 {
            let mut obs = gen::observation(&mut rng, &schema, format!("x{i}"));
            // Perturb: drop, add or overwrite a random path.
            let path = axes.choose(&mut rng).unwrap().clone();
            match rng.gen_range(0..4) {
                0 => {
                    obs.values.remove(&path);
                }
                1 => {
                    let v = random_value(&mut rng, schema.dimension(&path).unwrap());
                    obs.values.insert(path, v);
                }
                2 => {
                    obs.values.insert(path, Value::Number(1e9));
                }
                _ => {}
            }
            let report = validate_observation(&schema, &obs);
            assert_eq!(report.is_valid(), oracle::is_valid(&schema, &obs), "{obs:?}\n{report}");
        }
    }
}

#[test]
fn missing_values_are_named() {
    let ds = fixtures::figure_dataset();
    let obs = Observation::new("m").with("Axis_1", 1.0);
    let report = validate_observation(ds.schema(), &obs);
    assert!(report.has("Axis_2", ViolationKind::MissingValue));
}

#[test]
fn cpc_json_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..50 {
        let schema = gen::schema(&mut rng, &gen::SchemaShape::default());
        let ds = gen::dataset(&mut rng, &schema, 8);
        let text = to_cpc_json(&ds);
        let back = parse_cpc_json(text.as_bytes()).unwrap();
        assert_eq!(to_cpc_json(&back), text);
        assert_eq!(back.observations(), ds.observations());
    }
}

#[test]
fn geometry_json_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    for _ in 0..30 {
        let schema = gen::schema(&mut rng, &gen::SchemaShape::default());
        let ds = gen::dataset(&mut rng, &schema, 6);
        let exp = gen::expansion(&mut rng, &schema);
        let g = compute_layout(&ds, &exp, roomy_canvas(&schema, &exp), LayoutOptions::default()).unwrap();
        let text = geometry_to_json(&g);
        let back = geometry_from_json(&text).unwrap();
        assert_eq!(geometry_to_json(&back), text);
        assert_eq!(back.axes.len(), g.axes.len());
    }
}

#[test]
fn consistency_oracle_rejects_orphaned_selections() {
    let ds = fixtures::figure_dataset();
    let p = |s: &str| -> AxisPath { s.parse().unwrap() };
    let mut sel = std::collections::BTreeMap::new();
    sel.insert(p("Axis_3"), Value::from("Disabled"));
    sel.insert(p("Axis_3/Enabled/Subaxis_1"), Value::from("Suboption_1"));
    assert!(!oracle::selections_consistent(ds.schema(), &sel));
    sel.insert(p("Axis_3"), Value::from("Enabled"));
    assert!(oracle::selections_consistent(ds.schema(), &sel));
    sel.remove(&p("Axis_3"));
    assert!(!oracle::selections_consistent(ds.schema(), &sel));
}
