//! Static SVG of a closed-loop run: state space with regions and target on
//! the left, time series of x, u, w and e(k) on the right.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::Polytope;
use crate::regional::RegionalLaw;

use super::TrajectoryLog;

/// Constraint sets drawn alongside the trajectory.
#[derive(Debug, Clone)]
pub struct PlotBounds {
    pub x_set: Polytope,
    pub target: Polytope,
    pub u_range: (f64, f64),
    pub w_range: (f64, f64),
}

/// Label, values, fallback range and dashed limits of one time series.
type Series<'a> = (&'a str, Vec<f64>, (f64, f64), Option<(f64, f64)>);

const WIDTH: f64 = 1000.0;
const HEIGHT: f64 = 560.0;
const MARGIN: f64 = 40.0;

/// Maps a data rectangle onto a pixel rectangle (y up).
struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Frame {
    fn px(&self, p: [f64; 2]) -> (f64, f64) {
        let sx = (p[0] - self.lo[0]) / (self.hi[0] - self.lo[0]).max(1e-12);
        let sy = (p[1] - self.lo[1]) / (self.hi[1] - self.lo[1]).max(1e-12);
        (self.x0 + sx * self.w, self.y0 + (1.0 - sy) * self.h)
    }

    fn axes(&self, out: &mut String, label: &str) {
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
            self.x0, self.y0, self.w, self.h
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" font-family="sans-serif">{label}</text>"#,
            self.x0 + 4.0,
            self.y0 - 4.0
        );
    }

    fn polyline(&self, out: &mut String, pts: &[[f64; 2]], style: &str) {
        if pts.is_empty() {
            return;
        }
        let coords: Vec<String> = pts
            .iter()
            .map(|&p| {
                let (x, y) = self.px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(out, r#"<polyline points="{}" {style}/>"#, coords.join(" "));
    }

    fn polygon(&self, out: &mut String, pts: &[[f64; 2]], style: &str) {
        if pts.len() < 3 {
            return;
        }
        let coords: Vec<String> = pts
            .iter()
            .map(|&p| {
                let (x, y) = self.px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(out, r#"<polygon points="{}" {style}/>"#, coords.join(" "));
    }

    fn hline(&self, out: &mut String, level: f64, t_max: f64) {
        self.polyline(
            out,
            &[[0.0, level], [t_max, level]],
            r##"fill="none" stroke="#c00" stroke-dasharray="4 3""##,
        );
    }
}

/// Region of `law` clipped to `x_set`, as polygon vertices.
pub fn region_polygon(law: &RegionalLaw, x_set: &Polytope) -> Result<Vec<[f64; 2]>> {
    law.region.intersect(x_set)?.vertices_2d()
}

fn range(values: impl Iterator<Item = f64>, fallback: (f64, f64)) -> (f64, f64) {
    let (mut lo, mut hi) = fallback;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let pad = 0.05 * (hi - lo).max(1e-9);
    (lo - pad, hi + pad)
}

/// Renders the run; states must be planar.
pub fn trajectory_svg(
    log: &TrajectoryLog,
    laws: &[RegionalLaw],
    bounds: &PlotBounds,
) -> Result<String> {
    if bounds.x_set.dim() != 2 {
        return Err(Error::DimensionTooHigh(bounds.x_set.dim()));
    }
    let (lo, hi) = bounds.x_set.bounding_box()?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let side = HEIGHT - 2.0 * MARGIN;
    let state = Frame {
        x0: MARGIN,
        y0: MARGIN,
        w: side,
        h: side,
        lo: [lo[0], lo[1]],
        hi: [hi[0], hi[1]],
    };
    state.axes(&mut out, "state space (x1, x2)");
    if let Ok(target) = bounds.target.vertices_2d() {
        state.polygon(
            &mut out,
            &target,
            r##"fill="#9cf" fill-opacity="0.5" stroke="#06c""##,
        );
    }
    for law in laws {
        if let Ok(poly) = region_polygon(law, &bounds.x_set) {
            state.polygon(
                &mut out,
                &poly,
                r##"fill="#f66" fill-opacity="0.12" stroke="#c00" stroke-width="0.8""##,
            );
        }
    }
    let mut path: Vec<[f64; 2]> = log.records.iter().map(|r| [r.x[0], r.x[1]]).collect();
    if log.final_state.len() == 2 {
        path.push([log.final_state[0], log.final_state[1]]);
    }
    state.polyline(
        &mut out,
        &path,
        r#"fill="none" stroke="black" stroke-width="1.2""#,
    );
    for (i, p) in path.iter().enumerate() {
        let (x, y) = state.px(*p);
        let solved = log.records.get(i).is_some_and(|r| r.e);
        let fill = if solved { "#c00" } else { "black" };
        let _ = writeln!(
            out,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{fill}"/>"#
        );
    }

    // time series, one panel per signal
    let steps = log.records.len();
    let t_max = steps.max(1) as f64;
    let left = 2.0 * MARGIN + side;
    let panel_w = WIDTH - left - MARGIN;
    let panel_h = (HEIGHT - 2.0 * MARGIN - 3.0 * 20.0) / 4.0;
    let series: [Series; 4] = [
        (
            "x(k)",
            log.records.iter().flat_map(|r| r.x.clone()).collect(),
            (lo.min(), hi.max()),
            Some((lo.min(), hi.max())),
        ),
        (
            "u(k)",
            log.records.iter().map(|r| r.u[0]).collect(),
            bounds.u_range,
            Some(bounds.u_range),
        ),
        (
            "w(k)",
            log.records.iter().map(|r| r.w[0]).collect(),
            bounds.w_range,
            Some(bounds.w_range),
        ),
        (
            "e(k)",
            log.records
                .iter()
                .map(|r| f64::from(u8::from(r.e)))
                .collect(),
            (0.0, 1.0),
            None,
        ),
    ];
    for (row, (label, values, fallback, limits)) in series.into_iter().enumerate() {
        let (vlo, vhi) = range(values.iter().copied(), fallback);
        let frame = Frame {
            x0: left,
            y0: MARGIN + row as f64 * (panel_h + 20.0),
            w: panel_w,
            h: panel_h,
            lo: [0.0, vlo],
            hi: [t_max, vhi],
        };
        frame.axes(&mut out, label);
        if let Some((a, b)) = limits {
            frame.hline(&mut out, a, t_max);
            frame.hline(&mut out, b, t_max);
        }
        if row == 0 {
            for c in 0..2 {
                let pts: Vec<[f64; 2]> = log.records.iter().map(|r| [r.k as f64, r.x[c]]).collect();
                let color = if c == 0 { "black" } else { "#06c" };
                frame.polyline(&mut out, &pts, &format!(r#"fill="none" stroke="{color}""#));
            }
        } else {
            // zero-order hold staircase
            let mut pts = Vec::with_capacity(2 * values.len());
            for (k, v) in values.iter().enumerate() {
                pts.push([k as f64, *v]);
                pts.push([k as f64 + 1.0, *v]);
            }
            frame.polyline(&mut out, &pts, r#"fill="none" stroke="black""#);
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}
