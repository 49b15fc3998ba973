//! Deterministic SVG figures: pieces as filled polygons, the graph as a
//! polyline and the frame axes as dashed arrows. Coordinates are written
//! with six decimals and the y axis is flipped so that the figure reads
//! with y pointing up.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::geometry::{ConvexPolygon, Point};
use crate::graph::Frame;

/// Width of the rendered figure in pixels; the height follows the aspect ratio.
pub const FIGURE_WIDTH: f64 = 800.0;

#[derive(Clone, Debug, Default)]
pub struct Scene {
    pub pieces: Vec<ConvexPolygon>,
    /// World-space polyline of a graph.
    pub graph: Option<Vec<Point>>,
    pub frame: Option<Frame>,
    pub title: Option<String>,
}

impl Scene {
    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty() && self.graph.as_ref().is_none_or(|g| g.is_empty())
    }
}

fn fmt6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn pt(p: Point) -> String {
    format!("{},{}", fmt6(p.x), fmt6(-p.y))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render_svg(scene: &Scene) -> Result<String> {
    if scene.is_empty() {
        return Err(Error::InvalidInput("nothing to render".into()));
    }
    let points: Vec<Point> = scene
        .pieces
        .iter()
        .flat_map(|p| p.vertices().iter().copied())
        .chain(scene.graph.iter().flatten().copied())
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &points {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let extent = (x1 - x0).max(y1 - y0).max(1e-9);
    let margin = 0.05 * extent;
    let (vx, vy) = (x0 - margin, -(y1 + margin));
    let (vw, vh) = (x1 - x0 + 2.0 * margin, y1 - y0 + 2.0 * margin);
    let stroke = 0.002 * extent;
    let height = FIGURE_WIDTH * vh / vw;

    let mut s = String::new();
    let w = &mut s;
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#).expect("string write");
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="{} {} {} {}">"#,
        fmt6(FIGURE_WIDTH),
        fmt6(height),
        fmt6(vx),
        fmt6(vy),
        fmt6(vw),
        fmt6(vh)
    )
    .expect("string write");
    if let Some(t) = &scene.title {
        writeln!(w, "  <title>{}</title>", escape(t)).expect("string write");
    }
    writeln!(
        w,
        r##"  <defs><marker id="arrow" viewBox="0 0 10 10" refX="10" refY="5" markerWidth="6" markerHeight="6" orient="auto"><path d="M0,0 L10,5 L0,10 z" fill="#555555"/></marker></defs>"##
    )
    .expect("string write");
    writeln!(w, r##"  <g id="pieces" fill="#4c72b0" fill-opacity="0.55" stroke="#2a3f66" stroke-width="{}">"##, fmt6(stroke * 0.5))
        .expect("string write");
    for p in &scene.pieces {
        let pts: Vec<String> = p.vertices().iter().map(|&v| pt(v)).collect();
        writeln!(w, r#"    <polygon points="{}"/>"#, pts.join(" ")).expect("string write");
    }
    writeln!(w, "  </g>").expect("string write");
    if let Some(g) = &scene.graph {
        let pts: Vec<String> = g.iter().map(|&v| pt(v)).collect();
        writeln!(
            w,
            r##"  <polyline id="graph" points="{}" fill="none" stroke="#c44e52" stroke-width="{}"/>"##,
            pts.join(" "),
            fmt6(stroke)
        )
        .expect("string write");
    }
    if let Some(f) = &scene.frame {
        let c = Point::new(0.5 * (x0 + x1), 0.5 * (y0 + y1));
        let len = 0.4 * extent;
        writeln!(w, r##"  <g id="frame" stroke="#555555" stroke-width="{}" stroke-dasharray="{} {}">"##, fmt6(stroke), fmt6(4.0 * stroke), fmt6(2.0 * stroke))
            .expect("string write");
        for axis in [f.x_axis(), f.y_axis()] {
            let tip = c + axis * len;
            writeln!(
                w,
                r##"    <line x1="{}" y1="{}" x2="{}" y2="{}" marker-end="url(#arrow)"/>"##,
                fmt6(c.x),
                fmt6(-c.y),
                fmt6(tip.x),
                fmt6(-tip.y)
            )
            .expect("string write");
        }
        writeln!(w, "  </g>").expect("string write");
    }
    writeln!(w, "</svg>").expect("string write");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor4::c4_ifs;
    use crate::ifs::generation;

    #[test]
    fn c4_generation_two_has_sixteen_squares() {
        let g = generation(&c4_ifs(), &ConvexPolygon::unit_square(), 2).unwrap();
        let svg = render_svg(&Scene {
            pieces: g.polygons(),
            ..Scene::default()
        })
        .unwrap();
        assert_eq!(svg.matches("<polygon ").count(), 16);
        assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn empty_scene_is_an_error() {
        assert!(render_svg(&Scene::default()).is_err());
    }

    #[test]
    fn frame_and_graph_are_drawn() {
        let svg = render_svg(&Scene {
            pieces: vec![ConvexPolygon::unit_square()],
            graph: Some(vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0)]),
            frame: Some(Frame::new(0.3)),
            title: Some("a < b".into()),
        })
        .unwrap();
        assert_eq!(svg.matches("<line ").count(), 2);
        assert!(svg.contains(r#"points="0.000000,0.000000 1.000000,-1.000000""#));
        assert!(svg.contains("a &lt; b"));
        assert!(!svg.contains("-0.000000"));
    }
}
