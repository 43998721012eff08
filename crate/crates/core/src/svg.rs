//! Minimal polar plots written as standalone SVG.

use std::fmt::Write;

const SIZE: f64 = 520.0;
const CX: f64 = 260.0;
const CY: f64 = 270.0;
const RADIUS: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Markers,
    Line,
    /// Line joined back to its first point.
    Closed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarSeries {
    pub label: String,
    pub color: String,
    pub style: Style,
    /// `(angle in degrees, radius)` pairs.
    pub points: Vec<(f64, f64)>,
}

impl PolarSeries {
    pub fn new(label: &str, color: &str, style: Style, points: Vec<(f64, f64)>) -> Self {
        PolarSeries {
            label: label.into(),
            color: color.into(),
            style,
            points,
        }
    }

    /// Constant-radius reference circle.
    pub fn circle(label: &str, color: &str, radius: f64) -> Self {
        let pts = (0..=72).map(|i| (i as f64 * 5.0, radius)).collect();
        PolarSeries::new(label, color, Style::Closed, pts)
    }
}

/// Rounds `x` up to 1, 2 or 5 times a power of ten.
fn nice_ceiling(x: f64) -> f64 {
    if !(x > 0.0 && x.is_finite()) {
        return 1.0;
    }
    let p = 10f64.powf(x.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * p)
        .find(|v| *v >= x * (1.0 - 1e-12))
        .unwrap_or(10.0 * p)
}

fn to_xy(theta_deg: f64, r: f64, r_max: f64) -> (f64, f64) {
    let (s, c) = theta_deg.to_radians().sin_cos();
    let rr = RADIUS * r / r_max;
    (CX + rr * c, CY - rr * s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders the series on a shared radial scale whose outer ring is the
/// smallest 1-2-5 value covering every radius.
pub fn polar_plot(title: &str, radial_unit: &str, series: &[PolarSeries]) -> String {
    let data_max = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1.abs()))
        .filter(|r| r.is_finite())
        .fold(0.0, f64::max);
    let r_max = nice_ceiling(data_max);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{CX}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        escape(title)
    )
    .unwrap();
    for k in 1..=4 {
        let r = r_max * k as f64 / 4.0;
        writeln!(
            s,
            r##"<circle cx="{CX}" cy="{CY}" r="{:.2}" fill="none" stroke="#ccc"/>"##,
            RADIUS * k as f64 / 4.0
        )
        .unwrap();
        let (x, y) = to_xy(80.0, r, r_max);
        writeln!(
            s,
            r##"<text x="{x:.2}" y="{y:.2}" fill="#666">{}</text>"##,
            fmt_tick(r)
        )
        .unwrap();
    }
    for a in (0..360).step_by(30) {
        let (x, y) = to_xy(a as f64, r_max, r_max);
        writeln!(
            s,
            r##"<line x1="{CX}" y1="{CY}" x2="{x:.2}" y2="{y:.2}" stroke="#e4e4e4"/>"##
        )
        .unwrap();
        let (lx, ly) = to_xy(a as f64, r_max * 1.08, r_max);
        writeln!(
            s,
            r#"<text x="{lx:.2}" y="{:.2}" text-anchor="middle">{a}°</text>"#,
            ly + 4.0
        )
        .unwrap();
    }
    for ser in series {
        let pts: Vec<(f64, f64)> = ser
            .points
            .iter()
            .map(|&(a, r)| to_xy(a, r, r_max))
            .collect();
        match ser.style {
            Style::Markers => {
                for (x, y) in &pts {
                    writeln!(
                        s,
                        r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{}"/>"#,
                        ser.color
                    )
                    .unwrap();
                }
            }
            Style::Line | Style::Closed => {
                let mut d = String::new();
                for (i, (x, y)) in pts.iter().enumerate() {
                    write!(d, "{}{x:.2},{y:.2} ", if i == 0 { "M" } else { "L" }).unwrap();
                }
                if ser.style == Style::Closed {
                    d.push('Z');
                }
                writeln!(
                    s,
                    r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.6"/>"#,
                    d.trim_end(),
                    ser.color
                )
                .unwrap();
            }
        }
    }
    for (i, ser) in series.iter().enumerate() {
        let y = SIZE - 14.0 * (series.len() - i) as f64;
        writeln!(
            s,
            r#"<rect x="12" y="{:.0}" width="10" height="10" fill="{}"/>"#,
            y - 9.0,
            ser.color
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="28" y="{y:.0}">{}</text>"#,
            escape(&ser.label)
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.0}" y="{:.0}" text-anchor="end">radius: {}</text>"#,
        SIZE - 12.0,
        SIZE - 14.0,
        escape(radial_unit)
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    if v >= 100.0 {
        format!("{v:.0}")
    } else if v >= 1.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.3e}")
    }
}
