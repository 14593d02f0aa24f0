use std::collections::BTreeSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::enumerate::SpaceDomains;
use crate::layout::{ContourSize, Layout};
use crate::problem::{Problem, SpaceKind};

/// One space as drawn, in modules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SketchRect {
    pub id: String,
    pub label: String,
    pub unit: String,
    pub kind: SpaceKind,
    pub x: f64,
    pub y: f64,
    pub l: f64,
    pub w: f64,
}

#[derive(Clone, Debug)]
pub struct SvgStyle {
    /// Pixels per meter.
    pub scale: f64,
    /// Spaces drawn with the `diff` class.
    pub highlight: BTreeSet<String>,
    pub title: Option<String>,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle { scale: 40.0, highlight: BTreeSet::new(), title: None }
    }
}

fn label_of(problem: &Problem, id: &str) -> String {
    problem
        .space(id)
        .and_then(|i| problem.spec.spaces[i].label.clone())
        .unwrap_or_else(|| id.to_string())
}

pub fn rects_from_layout(problem: &Problem, layout: &Layout) -> Vec<SketchRect> {
    layout
        .spaces
        .iter()
        .map(|p| SketchRect {
            id: p.id.clone(),
            label: label_of(problem, &p.id),
            unit: p.unit.clone(),
            kind: p.kind,
            x: p.x as f64,
            y: p.y as f64,
            l: p.l as f64,
            w: p.w as f64,
        })
        .collect()
}

fn mid(d: &crate::fd::Dom) -> f64 {
    (d.min() as f64 + d.max() as f64) / 2.0
}

/// Rectangles at the midpoints of the origin and size domains. They may
/// overlap while the domains are wide.
pub fn rects_from_domains(problem: &Problem, domains: &[SpaceDomains]) -> Vec<SketchRect> {
    domains
        .iter()
        .map(|d| {
            let s = &problem.spec.spaces[problem.space(&d.id).expect("domains of a known space")];
            SketchRect {
                id: d.id.clone(),
                label: label_of(problem, &d.id),
                unit: s.unit.clone(),
                kind: s.kind,
                x: mid(&d.x1),
                y: mid(&d.y1),
                l: mid(&d.l),
                w: mid(&d.w),
            }
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn kind_class(k: SpaceKind) -> &'static str {
    match k {
        SpaceKind::Room => "room",
        SpaceKind::Corridor => "corridor",
        SpaceKind::Staircase => "staircase",
    }
}

const MARGIN: f64 = 10.0;

/// SVG of the units side by side, y axis pointing up. Output depends only
/// on the inputs.
pub fn render_svg(problem: &Problem, units: &[ContourSize], rects: &[SketchRect], style: &SvgStyle) -> String {
    let k = style.scale * problem.spec.module_length;
    let mut offset = Vec::new();
    let mut x = MARGIN;
    let mut height: f64 = 0.0;
    for u in units {
        offset.push((u.id.as_str(), x, u.w as f64 * k));
        x += u.l as f64 * k + MARGIN;
        height = height.max(u.w as f64 * k);
    }
    let total_h = height + 2.0 * MARGIN;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{x:.2}" height="{total_h:.2}" viewBox="0 0 {x:.2} {total_h:.2}">"#
    );
    out.push_str(
        "<style>.unit rect{fill:#fff;stroke:#000;stroke-width:3}\
.room rect{fill:#f4e3c1}.corridor rect{fill:#d9d9d9}.staircase rect{fill:#c1d4f4}\
g rect{stroke:#333;stroke-width:1;fill-opacity:0.85}.diff rect{stroke:#d00;stroke-width:3}\
text{font:12px sans-serif;text-anchor:middle;dominant-baseline:middle}</style>\n",
    );
    if let Some(t) = &style.title {
        let _ = writeln!(out, "<title>{}</title>", escape(t));
    }
    let place = |unit: &str, x: f64, y: f64, w: f64| -> Option<(f64, f64)> {
        let &(_, ox, uh) = offset.iter().find(|o| o.0 == unit)?;
        Some((ox + x * k, MARGIN + (height - uh) + uh - (y + w) * k))
    };
    for u in units {
        let (px, py) = place(&u.id, 0.0, 0.0, u.w as f64).unwrap();
        let _ = writeln!(
            out,
            r#"<g id="unit-{}" class="unit"><rect x="{px:.2}" y="{py:.2}" width="{:.2}" height="{:.2}"/></g>"#,
            escape(&u.id),
            u.l as f64 * k,
            u.w as f64 * k
        );
    }
    for r in rects {
        let Some((px, py)) = place(&r.unit, r.x, r.y, r.w) else { continue };
        let (pw, ph) = (r.l * k, r.w * k);
        let class = if style.highlight.contains(&r.id) {
            format!("{} diff", kind_class(r.kind))
        } else {
            kind_class(r.kind).to_string()
        };
        let _ = writeln!(
            out,
            r#"<g id="space-{}" class="{class}"><rect x="{px:.2}" y="{py:.2}" width="{pw:.2}" height="{ph:.2}"/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
            escape(&r.id),
            px + pw / 2.0,
            py + ph / 2.0,
            escape(&r.label)
        );
    }
    out.push_str("</svg>\n");
    out
}
