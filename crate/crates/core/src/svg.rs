//! Plain SVG output for training curves and planned paths.

use std::fmt::Write as _;

use crate::env::EnvConfig;
use crate::gridmap::CellState;
use crate::trainer::PathTrace;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 60.0;

fn open(s: &mut String) {
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">
<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Line chart with one polyline vertex per value (x = index).
pub fn line_chart(title: &str, y_label: &str, values: &[f64]) -> String {
    let mut s = String::new();
    open(&mut s);
    let (plot_w, plot_h) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let mut lo = finite.clone().fold(f64::INFINITY, f64::min);
    let mut hi = finite.fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        lo -= 1.0;
        hi += 1.0;
    }
    let n = values.len().max(2) - 1;
    let px = |i: usize| MARGIN + plot_w * i as f64 / n as f64;
    let py = |v: f64| MARGIN + plot_h * (hi - v) / (hi - lo);

    let _ = writeln!(
        s,
        r#"<text x="{}" y="30" font-family="sans-serif" font-size="18" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for (v, anchor_y) in [(hi, MARGIN), (lo, MARGIN + plot_h)] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="end">{}</text>"#,
            MARGIN - 6.0,
            anchor_y + 4.0,
            v
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">episode</text>"#,
        WIDTH / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    s.push_str(r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points=""#);
    for (i, &v) in values.iter().enumerate() {
        let v = if v.is_finite() { v } else { lo };
        let _ = write!(
            s,
            "{}{:.2},{:.2}",
            if i == 0 { "" } else { " " },
            px(i),
            py(v)
        );
    }
    s.push_str("\"/>\n</svg>\n");
    s
}

/// The environment grid with a path overlay. Footprint centres are joined
/// by a polyline; start and goal footprints are outlined.
pub fn path_plot(env: &EnvConfig, trace: &PathTrace) -> String {
    let mut s = String::new();
    open(&mut s);
    let grid = &env.grid;
    let scale = ((WIDTH - 2.0 * MARGIN) / grid.width() as f64)
        .min((HEIGHT - 2.0 * MARGIN) / grid.height() as f64);
    let ox = (WIDTH - scale * grid.width() as f64) / 2.0;
    let oy = (HEIGHT - scale * grid.height() as f64) / 2.0;
    // world y grows upward, SVG y downward
    let sx = |x: f64| ox + scale * x;
    let sy = |y: f64| oy + scale * (grid.height() as f64 - y);

    let _ = writeln!(
        s,
        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb(254,254,254)" stroke="black"/>"#,
        sx(0.0),
        sy(grid.height() as f64),
        scale * grid.width() as f64,
        scale * grid.height() as f64
    );
    for y in 0..grid.height() {
        // run-length encode each row to keep the file small
        let mut x = 0;
        while x < grid.width() {
            let state = grid.get(x, y).unwrap();
            let run = (x..grid.width())
                .take_while(|&i| grid.get(i, y) == Some(state))
                .count();
            let fill = match state {
                CellState::Occupied => Some("rgb(40,70,160)"),
                CellState::Unknown => Some("rgb(205,205,205)"),
                CellState::Free => None,
            };
            if let Some(fill) = fill {
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                    sx(x as f64),
                    sy(y as f64 + 1.0),
                    scale * run as f64,
                    scale
                );
            }
            x += run;
        }
    }
    let (fw, fh) = (env.footprint.0 as f64, env.footprint.1 as f64);
    for (state, colour) in [(env.start, "red"), (env.goal, "red")] {
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
            sx(state.x as f64),
            sy(state.y as f64 + fh),
            scale * fw,
            scale * fh
        );
    }
    s.push_str(r#"<polyline fill="none" stroke="darkorange" stroke-width="3" points=""#);
    for (i, st) in trace.states.iter().enumerate() {
        let _ = write!(
            s,
            "{}{:.2},{:.2}",
            if i == 0 { "" } else { " " },
            sx(st.x as f64 + fw / 2.0),
            sy(st.y as f64 + fh / 2.0)
        );
    }
    s.push_str("\"/>\n</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::default_layout;
    use crate::oracle::shortest_path;

    #[test]
    fn chart_has_one_vertex_per_value() {
        let values: Vec<f64> = (0..37).map(|i| (i as f64).sin()).collect();
        let svg = line_chart("reward", "accumulated reward", &values);
        assert!(svg.contains(r#"width="800" height="600""#));
        let points = svg
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        assert_eq!(points.split(' ').count(), 37);
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn flat_and_empty_series() {
        assert!(line_chart("t", "y", &[]).contains("<polyline"));
        assert!(line_chart("t", "y", &[3.0, 3.0]).contains("<polyline"));
    }

    #[test]
    fn path_plot_contains_trace() {
        let env = default_layout();
        let sp = shortest_path(&env).unwrap();
        let svg = path_plot(&env, &sp.trace);
        let points = svg
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        assert_eq!(points.split(' ').count(), sp.trace.states.len());
        // two walls, ten rows each: exactly 120 rectangle runs of obstacle
        assert_eq!(svg.matches("rgb(40,70,160)").count(), 120);
    }
}
