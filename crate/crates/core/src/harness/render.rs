use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, EpisodeTrace, HarnessError, TraceRecord};
use crate::world::{RoadGeometry, Vehicle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderStyle {
    Ascii,
    Svg,
}

impl std::str::FromStr for RenderStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ascii" => Ok(RenderStyle::Ascii),
            "svg" => Ok(RenderStyle::Svg),
            other => Err(format!(
                "unknown render style `{other}` (expected ascii or svg)"
            )),
        }
    }
}

/// Linear map from the square `[-extent, extent]^2` of world metres onto a
/// `width x height` canvas with the y axis pointing down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Canvas {
    pub width: f64,
    pub height: f64,
    pub extent: f64,
}

impl Canvas {
    pub fn ascii(g: &RoadGeometry) -> Self {
        Canvas {
            width: 61.0,
            height: 31.0,
            extent: g.route_half_length,
        }
    }

    pub fn svg(g: &RoadGeometry) -> Self {
        Canvas {
            width: 600.0,
            height: 600.0,
            extent: g.route_half_length,
        }
    }

    pub fn to_canvas(&self, x: f64, y: f64) -> (f64, f64) {
        let span = 2.0 * self.extent;
        (
            (x + self.extent) / span * self.width,
            (self.extent - y) / span * self.height,
        )
    }

    pub fn to_world(&self, cx: f64, cy: f64) -> (f64, f64) {
        let span = 2.0 * self.extent;
        (
            cx / self.width * span - self.extent,
            self.extent - cy / self.height * span,
        )
    }

    fn scale_x(&self) -> f64 {
        self.width / (2.0 * self.extent)
    }

    fn scale_y(&self) -> f64 {
        self.height / (2.0 * self.extent)
    }
}

fn ascii_cell(g: &RoadGeometry, x: f64, y: f64) -> char {
    let w = g.lane_width;
    let on_h = y.abs() <= w && x.abs() <= g.route_half_length;
    let on_v = x.abs() <= w && y.abs() <= g.route_half_length;
    if g.in_intersection(x, y) {
        '+'
    } else if on_h && g.in_stop_region(x, y) || on_v && g.in_stop_region(-y, x) {
        's'
    } else if on_h || on_v {
        '.'
    } else {
        ' '
    }
}

fn vehicle_glyph(i: usize) -> char {
    if i == 0 {
        'E'
    } else {
        char::from_digit((i % 10) as u32, 10).expect("digit")
    }
}

/// Text frame: a label line, then the grid. `+` intersection, `s` stop
/// regions, `.` road, `E` the ego and digits for other vehicles.
pub fn render_ascii_frame(
    g: &RoadGeometry,
    vehicles: &[Vehicle],
    label: &str,
    canvas: &Canvas,
) -> String {
    let (cols, rows) = (canvas.width as usize, canvas.height as usize);
    let mut grid: Vec<Vec<char>> = (0..rows)
        .map(|r| {
            (0..cols)
                .map(|c| {
                    let (x, y) = canvas.to_world(c as f64 + 0.5, r as f64 + 0.5);
                    ascii_cell(g, x, y)
                })
                .collect()
        })
        .collect();
    for (i, v) in vehicles.iter().enumerate() {
        let (cx, cy) = canvas.to_canvas(v.state.cont.x, v.state.cont.y);
        if cx >= 0.0 && cy >= 0.0 && (cx as usize) < cols && (cy as usize) < rows {
            grid[cy as usize][cx as usize] = vehicle_glyph(i);
        }
    }
    let mut out = String::with_capacity((cols + 1) * (rows + 1));
    out.push_str(label);
    out.push('\n');
    for row in grid {
        out.extend(row);
        out.push('\n');
    }
    out
}

/// SVG 1.1 frame with roads, stop regions, the intersection, vehicle
/// rectangles and the label.
pub fn render_svg_frame(
    g: &RoadGeometry,
    vehicles: &[Vehicle],
    label: &str,
    canvas: &Canvas,
) -> String {
    let (sx, sy) = (canvas.scale_x(), canvas.scale_y());
    let mut s = String::new();
    writeln!(
        s,
        r##"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">
<rect x="0" y="0" width="{w}" height="{h}" fill="#dfe8d8"/>"##,
        w = canvas.width,
        h = canvas.height
    )
    .unwrap();
    let rect = |s: &mut String, x0: f64, y0: f64, x1: f64, y1: f64, fill: &str| {
        let (ax, ay) = canvas.to_canvas(x0, y1);
        let (bx, by) = canvas.to_canvas(x1, y0);
        writeln!(
            s,
            r#"<rect x="{ax:.3}" y="{ay:.3}" width="{:.3}" height="{:.3}" fill="{fill}"/>"#,
            bx - ax,
            by - ay
        )
        .unwrap();
    };
    let (r, w, h, d) = (
        g.route_half_length,
        g.lane_width,
        g.intersection_half,
        g.stop_region_depth,
    );
    rect(&mut s, -r, -w, r, w, "#555555");
    rect(&mut s, -w, -r, w, r, "#555555");
    rect(&mut s, -h - d, -w, -h, w, "#8a6d3b");
    rect(&mut s, -w, h, w, h + d, "#8a6d3b");
    rect(&mut s, -h, -h, h, h, "#777777");
    rect(&mut s, r - g.goal_length, -w, r, w, "#3b7a57");
    for (i, v) in vehicles.iter().enumerate() {
        let c = &v.state.cont;
        let (cx, cy) = canvas.to_canvas(c.x, c.y);
        let (lw, lh) = (g.veh_len * sx, g.veh_wid * sy);
        let angle = c.theta.to_degrees() - 90.0;
        let fill = if i == 0 {
            "#d62728"
        } else if v.driver.is_some_and(|d| d.runs_stop) {
            "#ff7f0e"
        } else {
            "#1f77b4"
        };
        writeln!(
            s,
            r#"<rect x="{:.3}" y="{:.3}" width="{lw:.3}" height="{lh:.3}" fill="{fill}" transform="rotate({angle:.3} {cx:.3} {cy:.3})"/>"#,
            cx - lw / 2.0,
            cy - lh / 2.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="8" y="20" font-family="monospace" font-size="14">{}</text>"#,
        xml_escape(label)
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// One frame per step record of `trace`.
pub fn render(trace: &EpisodeTrace, style: RenderStyle) -> Result<Vec<String>, HarnessError> {
    let g = trace
        .records
        .iter()
        .find_map(|r| match r {
            TraceRecord::Start { geometry, .. } => Some(*geometry),
            _ => None,
        })
        .ok_or(HarnessError::Trace {
            line: 1,
            message: "trace has no start record".into(),
        })?;
    let canvas = match style {
        RenderStyle::Ascii => Canvas::ascii(&g),
        RenderStyle::Svg => Canvas::svg(&g),
    };
    Ok(trace
        .steps()
        .map(|r| match r {
            TraceRecord::Step {
                t,
                time,
                option,
                vehicles,
                ..
            } => {
                let label = format!("t={t} ({time:.1} s) option={option}");
                match style {
                    RenderStyle::Ascii => render_ascii_frame(&g, vehicles, &label, &canvas),
                    RenderStyle::Svg => render_svg_frame(&g, vehicles, &label, &canvas),
                }
            }
            _ => unreachable!("steps() yields step records"),
        })
        .collect())
}

/// Writes SVG frames as `frame_%06d.svg` into `dir`; returns the count.
pub fn write_svg_frames(frames: &[String], dir: &Path) -> Result<usize, HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (i, f) in frames.iter().enumerate() {
        let path = dir.join(format!("frame_{i:06}.svg"));
        std::fs::write(&path, f).map_err(io_err(&path))?;
    }
    Ok(frames.len())
}
