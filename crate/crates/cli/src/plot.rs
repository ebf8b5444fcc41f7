//! Minimal static line plots: SVG with labelled axes, or long-format CSV.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub label: &'static str,
    pub log: bool,
}

/// Data range of an axis in plotted units (log10 for log axes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

const W: f64 = 720.0;
const H: f64 = 460.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

fn transform(v: f64, log: bool) -> Option<f64> {
    if log {
        (v > 0.0).then(|| v.log10())
    } else {
        v.is_finite().then_some(v)
    }
}

/// Extent of all plottable points, widened when degenerate.
pub fn data_range(series: &[Series], axis: Axis, pick_x: bool) -> Range {
    let vals = series
        .iter()
        .flat_map(|s| if pick_x { &s.x } else { &s.y })
        .filter_map(|&v| transform(v, axis.log));
    let (mut min, mut max) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !min.is_finite() {
        return Range { min: 0.0, max: 1.0 };
    }
    if max - min < 1e-12 {
        let pad = if min.abs() > 0.0 { 0.05 * min.abs() } else { 0.5 };
        min -= pad;
        max += pad;
    }
    Range { min, max }
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        format!("1e{v:.1}")
    } else {
        format!("{v:.3e}")
    }
}

pub fn to_svg(series: &[Series], x_axis: Axis, y_axis: Axis, title: &str) -> String {
    let xr = data_range(series, x_axis, true);
    let yr = data_range(series, y_axis, false);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |v: f64| LEFT + (v - xr.min) / (xr.max - xr.min) * pw;
    let sy = |v: f64| TOP + ph - (v - yr.min) / (yr.max - yr.min) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" data-x-min="{}" data-x-max="{}" data-y-min="{}" data-y-max="{}" data-x-log="{}" data-y-log="{}">"#,
        xr.min, xr.max, yr.min, yr.max, x_axis.log, y_axis.log
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="18" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = xr.min + f * (xr.max - xr.min);
        let yv = yr.min + f * (yr.max - yr.min);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>"#,
            sx(xv),
            TOP + ph + 16.0,
            tick_label(xv, x_axis.log)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            sy(yv) + 3.0,
            tick_label(yv, y_axis.log)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 18.0,
        escape(x_axis.label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_axis.label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser
            .x
            .iter()
            .zip(&ser.y)
            .filter_map(|(&x, &y)| Some((transform(x, x_axis.log)?, transform(y, y_axis.log)?)))
            .map(|(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            pts.join(" "),
            escape(&ser.name)
        );
        let ly = TOP + 14.0 * (i as f64 + 1.0);
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10">{}</text>"#,
            W - RIGHT + 10.0,
            W - RIGHT + 30.0,
            W - RIGHT + 34.0,
            ly + 3.0,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn to_csv(series: &[Series]) -> String {
    let mut s = String::from("series,x,y\n");
    for ser in series {
        for (x, y) in ser.x.iter().zip(&ser.y) {
            let _ = writeln!(s, "{},{x},{y}", ser.name);
        }
    }
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
