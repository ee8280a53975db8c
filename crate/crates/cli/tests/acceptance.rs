//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if
//! any criterion fails. Runs without the web UI.

// `ensure!(x <= tol)` must fail on NaN, which the negated form does.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use cpc_core::layout::LayoutGeometry;
use cpc_core::testkit::{fixtures, gen, oracle};
use cpc_core::*;
use http_body_util::BodyExt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};
use tower::ServiceExt;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !($cond) {
            return Err(format!($($fmt)+));
        }
    };
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn cpc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_cpc"))
        .args(args)
        .output()
        .expect("cpc binary runs")
}

fn roomy_canvas(schema: &ConditionalSchema, expansion: &ExpansionState) -> Canvas {
    let w = f64::from(total_weight(schema, expansion));
    Canvas::new(w * 60.0 + 80.0, 600.0, 40.0)
}

fn ac1_pc_equivalence() -> Outcome {
    let ds = fixtures::cars_dataset();
    ensure!(
        ds.schema().depth() == 0,
        "cars data should be flat, depth {}",
        ds.schema().depth()
    );
    let mut worst: f64 = 0.0;
    for canvas in [Canvas::new(1000.0, 500.0, 30.0), Canvas::new(777.7, 333.3, 12.5)] {
        let g =
            compute_layout(&ds, &ExpansionState::new(), canvas, LayoutOptions::default()).map_err(|e| e.to_string())?;
        let flat = oracle::flat_pc_layout(&ds, canvas);
        ensure!(
            g.axes.len() == flat.axis_x.len(),
            "axis count {} vs {}",
            g.axes.len(),
            flat.axis_x.len()
        );
        for (a, x) in g.axes.iter().zip(&flat.axis_x) {
            worst = worst.max((a.x - x).abs());
        }
        for (id, pts) in &flat.polylines {
            let line = g.polyline(id).ok_or(format!("missing polyline {id}"))?;
            ensure!(line.vertices.len() == pts.len(), "{id}: vertex count differs");
            for (p, q) in line.vertices.iter().zip(pts) {
                worst = worst.max((p.x - q.x).abs()).max((p.y - q.y).abs());
            }
        }
    }
    ensure!(worst <= 1e-9, "max deviation {worst:e} px");
    Ok(format!("{} lines, max deviation {worst:e} px", ds.observations().len()))
}

fn ac2_weight_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0usize;
    for _ in 0..500 {
        let schema = gen::schema(&mut rng, &gen::SchemaShape::default());
        for _ in 0..20 {
            let exp = gen::expansion(&mut rng, &schema);
            for (path, expected) in oracle::all_weights(&schema, &exp) {
                let axis: AxisPath = path.parse().map_err(|e| format!("{e:?}"))?;
                let got = dimension_weight(&schema, &axis, &exp).map_err(|e| e.to_string())?;
                ensure!(got == expected, "{path}: {got} vs brute force {expected}");
                checked += 1;
            }
        }
    }
    let ds = fixtures::figure_dataset();
    let w = total_weight(ds.schema(), &fixtures::figure_expansion(ds.schema()));
    ensure!(w == 8, "figure total weight {w}");
    Ok(format!(
        "10000 states, {checked} dimension weights exact; figure W = {w}"
    ))
}

fn inside(g: &LayoutGeometry) -> Result<(), String> {
    let c = g.canvas;
    let ok = |x: f64, y: f64| (0.0..=c.width).contains(&x) && (0.0..=c.height).contains(&y);
    for a in &g.axes {
        ensure!(ok(a.x, a.y_top) && ok(a.x, a.y_bottom), "axis {} off canvas", a.path);
    }
    for b in &g.boxes {
        ensure!(
            ok(b.rect.x0, b.rect.y0) && ok(b.rect.x1, b.rect.y1),
            "box {} off canvas",
            b.branch
        );
    }
    for o in &g.options {
        ensure!(
            ok(g.axis(&o.axis).map_or(-1.0, |a| a.x), o.y),
            "option {}={} off canvas",
            o.axis,
            o.value
        );
    }
    for l in &g.polylines {
        ensure!(l.vertices.iter().all(|p| ok(p.x, p.y)), "polyline {} off canvas", l.id);
    }
    Ok(())
}

fn ac3_no_overlap() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut states, mut pairs) = (0usize, 0usize);
    for _ in 0..20 {
        let schema = gen::schema(&mut rng, &gen::SchemaShape::default());
        let ds = gen::dataset(&mut rng, &schema, 12);
        for _ in 0..50 {
            let exp = gen::expansion(&mut rng, &schema);
            let g = compute_layout(&ds, &exp, roomy_canvas(&schema, &exp), LayoutOptions::default())
                .map_err(|e| e.to_string())?;
            inside(&g)?;
            for (i, a) in g.boxes.iter().enumerate() {
                for b in &g.boxes[i + 1..] {
                    let a_in_b = a.branch.to_string().starts_with(&format!("{}/", b.branch));
                    let b_in_a = b.branch.to_string().starts_with(&format!("{}/", a.branch));
                    if !(a_in_b || b_in_a) {
                        pairs += 1;
                        ensure!(!a.rect.intersects(&b.rect), "{} overlaps {}", a.branch, b.branch);
                    }
                }
            }
            states += 1;
        }
    }
    Ok(format!(
        "{states} states, {pairs} non-nested box pairs disjoint, all geometry on canvas"
    ))
}

fn ac4_highlight_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut boxes = 0usize;
    for _ in 0..100 {
        let schema = gen::schema(&mut rng, &gen::SchemaShape::default());
        let n = rng.gen_range(0..=50);
        let ds = gen::dataset(&mut rng, &schema, n);
        let exp = if rng.gen_bool(0.5) {
            ExpansionState::all(&schema)
        } else {
            gen::expansion(&mut rng, &schema)
        };
        let g = compute_layout(&ds, &exp, roomy_canvas(&schema, &exp), LayoutOptions::default())
            .map_err(|e| e.to_string())?;
        let lines: Vec<(String, Vec<Point>)> = g.polylines.iter().map(|l| (l.id.clone(), l.vertices.clone())).collect();
        for b in &g.boxes {
            let target = HitTarget::BranchBox {
                branch_path: b.branch.clone(),
            };
            let got = resolve_highlight(&ds, &target).map_err(|e| e.to_string())?.highlighted;
            let geometric = oracle::lines_through(&lines, &b.rect.shrink(1e-6));
            ensure!(got == geometric, "{}: {got:?} vs geometric {geometric:?}", b.branch);
            boxes += 1;
        }
    }

    let ds = fixtures::figure_dataset();
    let g = compute_layout(
        &ds,
        &fixtures::figure_expansion(ds.schema()),
        Canvas::default(),
        LayoutOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let upper: BTreeSet<String> = ["L1", "L2"].map(String::from).into();
    let outer: BTreeSet<String> = ["L1", "L3"].map(String::from).into();
    let bx = g
        .branch_box(&"Axis_2/Option_A".parse().unwrap())
        .ok_or("no Option_A box")?;
    let hover = hit_test(&g, Point::new(bx.rect.x1 - 3.0, bx.rect.y1 - 3.0), 2.0);
    let box_ids = resolve_highlight(&ds, &hover).map_err(|e| e.to_string())?.highlighted;
    ensure!(box_ids == upper, "box hover {hover:?} gave {box_ids:?}");
    let anchor = g
        .option_anchor(&"Axis_3/Enabled/Subaxis_1".parse().unwrap(), "Suboption_2")
        .ok_or("no Suboption_2 anchor")?;
    let x = g.axis(&anchor.axis).ok_or("no sub-axis")?.x;
    let hover = hit_test(&g, Point::new(x + 2.0, anchor.y - 2.0), 2.0);
    let opt_ids = resolve_highlight(&ds, &hover).map_err(|e| e.to_string())?.highlighted;
    ensure!(opt_ids == outer, "sub-option hover {hover:?} gave {opt_ids:?}");
    Ok(format!(
        "{boxes} boxes match segment-box intersection; box hover -> upper two {box_ids:?}, sub-option hover -> upper and lower {opt_ids:?}"
    ))
}

fn random_value<R: Rng>(rng: &mut R, dim: &DimensionSpec) -> cpc_core::Value {
    match dim.range() {
        Some(r) => cpc_core::Value::Number(rng.gen_range(r.min..=r.max)),
        None => cpc_core::Value::Category(dim.options().choose(rng).unwrap().value.clone()),
    }
}

fn ac5_edit_fuzzing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut events, mut commits, mut duplicates) = (0usize, 0usize, 0usize);
    for _ in 0..3 {
        let schema = loop {
            let s = gen::schema(&mut rng, &gen::SchemaShape::default());
            if s.depth() > 0 {
                break s;
            }
        };
        let mut ds = gen::dataset(&mut rng, &schema, 6);
        let axes = schema.axis_paths();
        let mut session: Option<EditSession> = None;
        for _ in 0..10_000 {
            events += 1;
            let roll = rng.gen_range(0..100);
            let Some(s) = session.take() else {
                let origin = if roll < 50 {
                    EditOrigin::Scratch
                } else {
                    EditOrigin::DuplicateOf(ds.observations().choose(&mut rng).unwrap().id.clone())
                };
                let opened = EditSession::begin(None, &ds, origin.clone()).map_err(|e| e.to_string())?;
                if let EditOrigin::DuplicateOf(src) = &origin {
                    ensure!(
                        opened.selections() == &ds.observation(src).unwrap().values,
                        "duplicate of {src} does not copy its values"
                    );
                    if roll % 5 == 0 {
                        let c = opened.commit(&ds).map_err(|e| e.to_string())?;
                        let copy = c.dataset.observation(&c.observation_id).unwrap();
                        ensure!(
                            copy.values == ds.observation(src).unwrap().values,
                            "duplicate-commit of {src} drifted"
                        );
                        ds = c.dataset;
                        duplicates += 1;
                        continue;
                    }
                }
                session = Some(opened);
                continue;
            };
            let path = axes.choose(&mut rng).unwrap();
            let next = if roll < 60 {
                let v = random_value(&mut rng, schema.dimension(path).unwrap());
                s.select(&schema, path, v).map_err(|e| e.to_string())?
            } else if roll < 78 {
                s.clear(&schema, path).map_err(|e| e.to_string())?
            } else if roll < 97 {
                match s.commit(&ds) {
                    Ok(c) => {
                        let obs = c.dataset.observation(&c.observation_id).unwrap();
                        let report = validate_observation(&schema, obs);
                        ensure!(report.is_valid(), "commit {} invalid: {report}", c.observation_id);
                        ensure!(oracle::is_valid(&schema, obs), "oracle rejects {}", c.observation_id);
                        ds = c.dataset;
                        commits += 1;
                        c.session
                    }
                    Err(EditError::Incomplete { .. }) => s,
                    Err(e) => return Err(e.to_string()),
                }
            } else {
                s.cancel()
            };
            ensure!(
                oracle::selections_consistent(&schema, next.selections()),
                "inconsistent selections after event {events}: {:?}",
                next.selections()
            );
            session = next.is_active().then_some(next);
        }
    }
    Ok(format!(
        "{events} events, selections always consistent; {commits} commits valid; {duplicates} duplicate-commits exact"
    ))
}

async fn send(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, Body::from))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    (status, res.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Runtime::new().expect("tokio runtime")
}

fn ac6_determinism() -> Outcome {
    let figure = data("figure.json");
    let figure = figure.to_str().unwrap();
    let mut outputs = BTreeSet::new();
    for _ in 0..5 {
        let out = cpc(&["render", figure, "--expand", "all", "--width", "960", "--height", "480"]);
        ensure!(
            out.status.success(),
            "render failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        outputs.insert(out.stdout);
    }
    ensure!(outputs.len() == 1, "{} distinct SVG outputs", outputs.len());

    let hashes = runtime().block_on(async {
        let app = cpc_server::router(cpc_server::AppState::new(cpc_server::ServerConfig::default()));
        let (status, body) = send(&app, "POST", "/api/datasets", Some(fixtures::CHATBOT_JSON.to_owned())).await;
        assert_eq!(status, StatusCode::CREATED);
        let id = serde_json::from_slice::<Json>(&body).unwrap()["datasetId"].as_str().unwrap().to_owned();
        let req = json!({ "expansion": ["item/pizza", "item/pizza/diameter/[40,50]", "payment/online"], "canvas": { "width": 1600, "height": 700, "margin": 40 } });
        let mut hashes = BTreeSet::new();
        for _ in 0..10 {
            let (status, body) = send(&app, "POST", &format!("/api/datasets/{id}/layout"), Some(req.to_string())).await;
            assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
            hashes.insert(Sha256::digest(&body).to_vec());
        }
        hashes
    });
    ensure!(hashes.len() == 1, "{} distinct layout hashes", hashes.len());
    Ok("5 renders byte-identical; 10 layout responses hash-equal".into())
}

fn ac7_automl_flow() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let converted = dir.path().join("automl.json");
    let converted_s = converted.to_str().unwrap();
    let log = data("automl_runs.jsonl");
    let out = cpc(&[
        "convert",
        "--from",
        "automl",
        log.to_str().unwrap(),
        "--out",
        converted_s,
    ]);
    ensure!(
        out.status.success(),
        "convert: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&converted).map_err(|e| e.to_string())?;
    let ds = parse_cpc_json(text.as_bytes()).map_err(|e| e.to_string())?;
    ensure!(ds.observations().len() == 5, "{} runs", ds.observations().len());

    let render = |expand: &str| -> Result<String, String> {
        let out = cpc(&[
            "render",
            converted_s,
            "--expand",
            expand,
            "--width",
            "2400",
            "--height",
            "700",
        ]);
        ensure!(out.status.success(), "render: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).map_err(|e| e.to_string())
    };
    let collapsed = render("")?;
    let top = ds.schema().dimensions().len();
    let axes = collapsed.matches("class=\"axis\"").count();
    ensure!(
        axes == top && !collapsed.contains("branch-box"),
        "collapsed view has {axes} axes"
    );
    let expanded = render("all")?;
    let nested: Vec<String> = ds
        .schema()
        .axis_paths()
        .into_iter()
        .filter(|p| !p.is_top_level())
        .map(|p| p.to_string())
        .collect();
    for p in &nested {
        ensure!(expanded.contains(&format!("data-path=\"{p}\"")), "sub-axis {p} missing");
    }

    let export = runtime().block_on(async {
        let app = cpc_server::router(cpc_server::AppState::new(cpc_server::ServerConfig::default()));
        let (status, body) = send(&app, "POST", "/api/datasets", Some(text.clone())).await;
        assert_eq!(status, StatusCode::CREATED);
        let id = serde_json::from_slice::<Json>(&body).unwrap()["datasetId"]
            .as_str()
            .unwrap()
            .to_owned();
        let uri = format!("/api/datasets/{id}/edit");
        let act = |body: Json| send(&app, "POST", &uri, Some(body.to_string()));
        let (status, body) = act(json!({ "action": "begin", "duplicateOf": "run-1" })).await;
        assert_eq!(status, StatusCode::CREATED);
        let sid = serde_json::from_slice::<Json>(&body).unwrap()["sessionId"]
            .as_str()
            .unwrap()
            .to_owned();
        for (path, value) in [
            ("estimator", json!("SVC")),
            ("estimator/SVC/C", json!(5.0)),
            ("estimator/SVC/gamma", json!(0.05)),
            ("estimator/SVC/kernel", json!("rbf")),
        ] {
            let (status, body) =
                act(json!({ "action": "select", "sessionId": sid, "path": path, "value": value })).await;
            assert_eq!(status, StatusCode::OK, "{path}: {}", String::from_utf8_lossy(&body));
        }
        let (status, body) = act(json!({ "action": "commit", "sessionId": sid })).await;
        assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
        let new_id = serde_json::from_slice::<Json>(&body).unwrap()["observationId"]
            .as_str()
            .unwrap()
            .to_owned();
        let (status, body) = send(&app, "GET", &format!("/api/datasets/{id}/observations/export"), None).await;
        assert_eq!(status, StatusCode::OK);
        (new_id, body)
    });
    let (new_id, bytes) = export;
    let exported = parse_cpc_json(&bytes).map_err(|e| e.to_string())?;
    let obs = exported.observation(&new_id).ok_or(format!("{new_id} not exported"))?;
    ensure!(
        validate_observation(exported.schema(), obs).is_valid(),
        "exported {new_id} invalid"
    );
    ensure!(
        !obs.values
            .keys()
            .any(|k| k.to_string().starts_with("estimator/RandomForest/")),
        "stale RandomForest hyperparameters survived"
    );
    ensure!(
        exported.observations().len() == 6,
        "{} exported runs",
        exported.observations().len()
    );
    Ok(format!(
        "5 runs converted; collapsed view {axes} axes; expanded view shows {} hyperparameter sub-axes; edited pipeline {new_id} exported",
        nested.len()
    ))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("PC-equivalence", ac1_pc_equivalence),
        ("weight oracle", ac2_weight_oracle),
        ("no-overlap", ac3_no_overlap),
        ("highlight equivalence", ac4_highlight_equivalence),
        ("edit-state fuzzing", ac5_edit_fuzzing),
        ("determinism", ac6_determinism),
        ("AutoML pipeline flow", ac7_automl_flow),
    ];
    // Panics are reported as failures on their criterion's line.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| (*s).to_owned()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] AC{} {name}: {detail} ({secs:.2}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] AC{} {name}: {why} ({secs:.2}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
