//! Minimal SVG scatter with markers for flipped decisions.

use std::fmt::Write as _;

use impact_parity::threshold::FlipRecord;
use impact_parity::{Dataset, Error, FlipDirection, Group, Result};
use serde::Serialize;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;

/// One flipped example with its plotted coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlipPoint {
    pub index: usize,
    pub group: Group,
    pub direction: FlipDirection,
    pub x: f64,
    pub y: f64,
}

pub struct Figure {
    pub svg: String,
    pub points: Vec<FlipPoint>,
}

fn column(data: &Dataset, name: &str) -> Result<Vec<f64>> {
    let j = data
        .feature_index(name)
        .ok_or_else(|| Error::UnknownColumn(name.into()))?;
    Ok(data.features().column(j).to_vec())
}

fn extent(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.03 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn group_colour(g: Group) -> &'static str {
    match g {
        Group::A => "#1f77b4",
        Group::B => "#d62728",
    }
}

pub fn render(data: &Dataset, x_name: &str, y_name: &str, flips: &[FlipRecord]) -> Result<Figure> {
    let xs = column(data, x_name)?;
    let ys = column(data, y_name)?;
    if let Some(r) = flips.iter().find(|r| r.index >= data.len()) {
        return Err(Error::Format(format!("flip index {} beyond {} examples", r.index, data.len())));
    }
    let (x0, x1) = extent(&xs);
    let (y0, y1) = extent(&ys);
    let sx = |v: f64| MARGIN + (v - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |v: f64| HEIGHT - MARGIN - (v - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{l} {t} V{b} H{r}" fill="none" stroke="black"/>"#
    );
    for (v, anchor_x, anchor_y) in [(x0, l, b + 16.0), (x1, r, b + 16.0)] {
        let _ = writeln!(svg, r#"<text x="{anchor_x:.1}" y="{anchor_y:.1}" font-size="10" text-anchor="middle">{v:.2}</text>"#);
    }
    for (v, anchor_y) in [(y0, b), (y1, t)] {
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{anchor_y:.1}" font-size="10" text-anchor="end">{v:.2}</text>"#, l - 6.0);
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 14.0,
        escape(x_name)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_name)
    );

    let names = data.group_names();
    for (i, (legend, g)) in [(&names.a, Group::A), (&names.b, Group::B)].into_iter().enumerate() {
        let y = 20.0 + 14.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.1}" cy="{y:.1}" r="3" fill="{}"/><text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            r - 80.0,
            group_colour(g),
            r - 72.0,
            y + 4.0,
            escape(legend)
        );
    }

    let _ = writeln!(svg, r#"<g id="points" fill-opacity="0.35">"#);
    for i in 0..data.len() {
        let g = data.groups()[i];
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}"/>"#,
            sx(xs[i]),
            sy(ys[i]),
            group_colour(g)
        );
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r#"<g id="flips" stroke="black" stroke-width="0.8">"#);
    let mut points = Vec::with_capacity(flips.len());
    for r in flips {
        let (cx, cy) = (sx(xs[r.index]), sy(ys[r.index]));
        let s = 5.0;
        // Upward triangles for newly accepted, downward for newly rejected.
        let path = match r.direction {
            FlipDirection::Up => format!("M{:.2} {:.2} L{:.2} {:.2} L{:.2} {:.2} Z", cx, cy - s, cx - s, cy + s, cx + s, cy + s),
            FlipDirection::Down => format!("M{:.2} {:.2} L{:.2} {:.2} L{:.2} {:.2} Z", cx, cy + s, cx - s, cy - s, cx + s, cy - s),
        };
        let _ = writeln!(
            svg,
            r#"<path class="flip-{}" data-index="{}" d="{path}" fill="{}"/>"#,
            r.direction.as_str(),
            r.index,
            group_colour(r.group)
        );
        points.push(FlipPoint {
            index: r.index,
            group: r.group,
            direction: r.direction,
            x: xs[r.index],
            y: ys[r.index],
        });
    }
    let _ = writeln!(svg, "</g>\n</svg>");
    Ok(Figure { svg, points })
}
