//! Deterministic SVG export and canonical geometry JSON.
//!
//! Output depends only on the inputs: elements are emitted in a fixed
//! back-to-front order, attributes in a fixed order, and every coordinate is
//! rounded to three decimals.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value as Json};
use thiserror::Error;

use crate::interaction::{Emphasis, OPTION_MARKER};
use crate::layout::{AxisDomain, LayoutGeometry, Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("{what} at ({x}, {y}) lies outside the {width}x{height} canvas")]
    OutsideCanvas {
        what: String,
        x: f64,
        y: f64,
        width: f64,
        height: f64,
    },
}

/// Colors, strokes and fonts. Defaults are pinned by golden tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct Style {
    pub background: String,
    pub axis: String,
    pub axis_width: f64,
    pub text: String,
    pub font_family: String,
    pub font_size: f64,
    pub line: String,
    pub line_width: f64,
    pub line_opacity: f64,
    pub emphasis: String,
    pub emphasis_width: f64,
    pub edit: String,
    pub edit_width: f64,
    /// Fill for options that can be clicked to reveal sub-axes.
    pub expandable: String,
    pub expanded: String,
    pub option: String,
    pub box_fill: String,
    pub box_stroke: String,
}

impl Default for Style {
    fn default() -> Self {
        Self {
            background: "#ffffff".into(),
            axis: "#333333".into(),
            axis_width: 1.5,
            text: "#222222".into(),
            font_family: "sans-serif".into(),
            font_size: 11.0,
            line: "#4682b4".into(),
            line_width: 1.2,
            line_opacity: 0.7,
            emphasis: "#ff7f0e".into(),
            emphasis_width: 2.5,
            edit: "#d62728".into(),
            edit_width: 2.5,
            expandable: "#9e9e9e".into(),
            expanded: "#616161".into(),
            option: "#ffffff".into(),
            box_fill: "#f4f4f4".into(),
            box_stroke: "#bdbdbd".into(),
        }
    }
}

/// Three decimals, trailing zeros trimmed, never `-0`.
pub fn fmt_coord(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_owned()
    } else {
        s.to_owned()
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn points_attr(vertices: &[Point]) -> String {
    vertices
        .iter()
        .map(|p| format!("{},{}", fmt_coord(p.x), fmt_coord(p.y)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn check_inside(geometry: &LayoutGeometry, edit_overlay: Option<&[Point]>) -> Result<(), RenderError> {
    let (w, h) = (geometry.canvas.width, geometry.canvas.height);
    let check = |what: &dyn Fn() -> String, x: f64, y: f64| {
        if x.is_finite() && y.is_finite() && (0.0..=w).contains(&x) && (0.0..=h).contains(&y) {
            Ok(())
        } else {
            Err(RenderError::OutsideCanvas {
                what: what(),
                x,
                y,
                width: w,
                height: h,
            })
        }
    };
    for a in &geometry.axes {
        check(&|| format!("axis `{}`", a.path), a.x, a.y_top)?;
        check(&|| format!("axis `{}`", a.path), a.x, a.y_bottom)?;
    }
    for b in &geometry.boxes {
        check(&|| format!("box `{}`", b.branch), b.rect.x0, b.rect.y0)?;
        check(&|| format!("box `{}`", b.branch), b.rect.x1, b.rect.y1)?;
    }
    for l in &geometry.polylines {
        for p in &l.vertices {
            check(&|| format!("polyline `{}`", l.id), p.x, p.y)?;
        }
    }
    for p in edit_overlay.unwrap_or_default() {
        check(&|| "edit polyline".to_owned(), p.x, p.y)?;
    }
    Ok(())
}

/// Renders one view as SVG 1.1.
pub fn to_svg(
    geometry: &LayoutGeometry,
    emphasis: Option<&Emphasis>,
    edit_overlay: Option<&[Point]>,
    style: &Style,
) -> Result<String, RenderError> {
    check_inside(geometry, edit_overlay)?;
    let (w, h) = (fmt_coord(geometry.canvas.width), fmt_coord(geometry.canvas.height));
    let fs = style.font_size;
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="{}" font-size="{}">"#,
        escape(&style.font_family),
        fmt_coord(fs)
    );
    let _ = writeln!(
        svg,
        r#"<rect class="background" x="0" y="0" width="{w}" height="{h}" fill="{}"/>"#,
        style.background
    );

    svg.push_str("<g class=\"boxes\">\n");
    for b in &geometry.boxes {
        let r = b.rect;
        let _ = writeln!(
            svg,
            r#"<rect class="branch-box" data-branch="{}" x="{}" y="{}" width="{}" height="{}" fill="{}" stroke="{}"/>"#,
            escape(&b.branch.to_string()),
            fmt_coord(r.x0),
            fmt_coord(r.y0),
            fmt_coord(r.x1 - r.x0),
            fmt_coord(r.y1 - r.y0),
            style.box_fill,
            style.box_stroke
        );
    }
    svg.push_str("</g>\n");

    svg.push_str("<g class=\"axes\">\n");
    for a in &geometry.axes {
        let _ = writeln!(
            svg,
            r#"<line class="axis" data-path="{}" x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="{}" stroke-width="{}"/>"#,
            escape(&a.path.to_string()),
            fmt_coord(a.y_top),
            fmt_coord(a.y_bottom),
            style.axis,
            fmt_coord(style.axis_width),
            x = fmt_coord(a.x),
        );
        let label_y = (a.y_top - 0.6 * fs).max(fs);
        let _ = writeln!(
            svg,
            r#"<text class="axis-label" x="{}" y="{}" text-anchor="middle" fill="{}">{}</text>"#,
            fmt_coord(a.x),
            fmt_coord(label_y),
            style.text,
            escape(&a.label)
        );
        if let AxisDomain::Numeric { .. } = a.domain {
            for t in &a.ticks {
                let _ = writeln!(
                    svg,
                    r#"<text class="tick" x="{}" y="{}" text-anchor="end" fill="{}">{}</text>"#,
                    fmt_coord((a.x - 4.0).max(0.0)),
                    fmt_coord(t.y + 0.35 * fs),
                    style.text,
                    escape(&t.label)
                );
            }
        }
    }
    svg.push_str("</g>\n");

    svg.push_str("<g class=\"options\">\n");
    for o in &geometry.options {
        let Some(axis) = geometry.axis(&o.axis) else {
            continue;
        };
        let half = OPTION_MARKER.min((o.band[1] - o.band[0]) / 2.0);
        let (class, fill) = match (o.expandable, o.expanded) {
            (true, true) => ("option expanded", &style.expanded),
            (true, false) => ("option expandable", &style.expandable),
            _ => ("option", &style.option),
        };
        let _ = writeln!(
            svg,
            r#"<rect class="{class}" data-axis="{}" data-value="{}" x="{}" y="{}" width="{}" height="{}" fill="{fill}" stroke="{}"/>"#,
            escape(&o.axis.to_string()),
            escape(&o.value),
            fmt_coord(axis.x - half),
            fmt_coord(o.y - half),
            fmt_coord(2.0 * half),
            fmt_coord(2.0 * half),
            style.axis
        );
        let _ = writeln!(
            svg,
            r#"<text class="option-label" x="{}" y="{}" fill="{}">{}</text>"#,
            fmt_coord(axis.x + half + 3.0),
            fmt_coord(o.y + 0.35 * fs),
            style.text,
            escape(&o.value)
        );
    }
    svg.push_str("</g>\n");

    svg.push_str("<g class=\"polylines\">\n");
    for l in &geometry.polylines {
        let _ = writeln!(
            svg,
            r#"<polyline data-id="{}" points="{}" fill="none" stroke="{}" stroke-width="{}" stroke-opacity="{}"/>"#,
            escape(&l.id),
            points_attr(&l.vertices),
            style.line,
            fmt_coord(style.line_width),
            fmt_coord(style.line_opacity)
        );
    }
    svg.push_str("</g>\n");

    svg.push_str("<g class=\"emphasis\">\n");
    if let Some(e) = emphasis {
        for l in geometry.polylines.iter().filter(|l| e.highlighted.contains(&l.id)) {
            let _ = writeln!(
                svg,
                r#"<polyline data-id="{}" points="{}" fill="none" stroke="{}" stroke-width="{}"/>"#,
                escape(&l.id),
                points_attr(&l.vertices),
                style.emphasis,
                fmt_coord(style.emphasis_width)
            );
        }
    }
    svg.push_str("</g>\n");

    svg.push_str("<g class=\"edit\">\n");
    if let Some(vertices) = edit_overlay.filter(|v| !v.is_empty()) {
        let _ = writeln!(
            svg,
            r#"<polyline class="edit-line" points="{}" fill="none" stroke="{}" stroke-width="{}"/>"#,
            points_attr(vertices),
            style.edit,
            fmt_coord(style.edit_width)
        );
    }
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}

fn canonical(value: Json) -> Json {
    match value {
        Json::Number(n) if n.is_f64() => {
            let v = n.as_f64().expect("f64 number");
            let r = (v * 1000.0).round() / 1000.0;
            let r = if r == 0.0 { 0.0 } else { r };
            Json::Number(Number::from_f64(r).expect("finite geometry"))
        }
        Json::Array(items) => Json::Array(items.into_iter().map(canonical).collect()),
        Json::Object(map) => {
            let mut entries: Vec<(String, Json)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut sorted = Map::new();
            for (k, v) in entries {
                sorted.insert(k, canonical(v));
            }
            Json::Object(sorted)
        }
        other => other,
    }
}

/// Canonical geometry JSON: sorted keys, coordinates rounded to 3 decimals.
pub fn geometry_to_json(geometry: &LayoutGeometry) -> String {
    let value = serde_json::to_value(geometry).expect("geometry serializes");
    serde_json::to_string(&canonical(value)).expect("json value serializes")
}

pub fn geometry_from_json(json: &str) -> Result<LayoutGeometry, serde_json::Error> {
    serde_json::from_str(json)
}
