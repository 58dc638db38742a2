//! Minimal self-contained SVG charts.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
/// Floor for values drawn on a logarithmic axis.
const LOG_FLOOR: f64 = 1e-14;

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Optional `(low, high)` per point, drawn as a shaded band.
    pub band: Option<Vec<(f64, f64)>>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    log_y: bool,
}

impl Frame {
    fn fit(values: impl Iterator<Item = (f64, f64)>, log_y: bool) -> Self {
        let (mut x, mut y) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
        for (px, py) in values {
            let py = if log_y { py.max(LOG_FLOOR).log10() } else { py };
            if px.is_finite() && py.is_finite() {
                x = (x.0.min(px), x.1.max(px));
                y = (y.0.min(py), y.1.max(py));
            }
        }
        if !x.0.is_finite() {
            x = (0.0, 1.0);
            y = (0.0, 1.0);
        }
        if log_y {
            y = (y.0.floor(), y.1.ceil());
        }
        for r in [&mut x, &mut y] {
            if r.1 - r.0 < 1e-12 {
                *r = (r.0 - 0.5, r.1 + 0.5);
            }
        }
        Self { x, y, log_y }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let y = if self.log_y { y.max(LOG_FLOOR).log10() } else { y };
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    out.push('\n');
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(out, r#"<path d="M{x0} {y1} V{y0} H{x1}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let x = f.x.0 + (f.x.1 - f.x.0) * i as f64 / 4.0;
        let p = f.px(x);
        let _ = writeln!(out, r#"<text x="{p:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, y0 + 18.0, tick(x));
    }
    let ticks: Vec<f64> = if f.log_y {
        (f.y.0 as i32..=f.y.1 as i32).map(|e| 10f64.powi(e)).collect()
    } else {
        (0..=4).map(|i| f.y.0 + (f.y.1 - f.y.0) * i as f64 / 4.0).collect()
    };
    for y in ticks {
        let p = f.py(y);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, x0 - 6.0, p + 4.0, tick(y));
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 16.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.0e}")
    } else {
        format!("{}", (v * 1000.0).round() / 1000.0)
    }
}

/// One polyline per series, with optional shaded bands and a legend.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], log_y: bool) -> String {
    let all = series.iter().flat_map(|s| {
        let band = s.band.iter().flatten().zip(&s.points).flat_map(|(&(lo, hi), &(x, _))| [(x, lo), (x, hi)]);
        s.points.iter().copied().chain(band)
    });
    let f = Frame::fit(all, log_y);
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, x_label, y_label);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if let Some(band) = &s.band {
            let upper = s.points.iter().zip(band).map(|(&(x, _), &(_, hi))| (x, hi));
            let lower = s.points.iter().zip(band).rev().map(|(&(x, _), &(lo, _))| (x, lo));
            let pts: Vec<String> = upper.chain(lower).map(|(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
            let _ = writeln!(out, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, pts.join(" "));
        }
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
        let ly = TOP + 16.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 18.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 24.0, ly + 4.0, escape(&s.label));
    }
    out.push_str("</svg>\n");
    out
}

/// Bars with symmetric error whiskers, from zero.
pub fn bar_chart(title: &str, y_label: &str, bars: &[(String, f64, f64)]) -> String {
    let extent = bars.iter().flat_map(|(_, v, e)| [(0.0, v - e), (1.0, v + e), (0.0, 0.0)]);
    let mut f = Frame::fit(extent, false);
    f.x = (0.0, bars.len().max(1) as f64);
    let mut out = String::new();
    header(&mut out, title);
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(out, r#"<path d="M{x0} {y1} V{y0} H{x1}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let y = f.y.0 + (f.y.1 - f.y.0) * i as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, x0 - 6.0, f.py(y) + 4.0, tick(y));
    }
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
    let slot = (x1 - x0) / bars.len().max(1) as f64;
    for (i, (label, v, e)) in bars.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let (top, base) = (f.py(v.max(0.0)), f.py(v.min(0.0)));
        let left = x0 + slot * (i as f64 + 0.2);
        let _ = writeln!(
            out,
            r#"<rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
            slot * 0.6,
            (base - top).max(0.5)
        );
        let mid = left + slot * 0.3;
        let _ = writeln!(out, r#"<line x1="{mid:.2}" y1="{:.2}" x2="{mid:.2}" y2="{:.2}" stroke="black"/>"#, f.py(v - e), f.py(v + e));
        let _ = writeln!(out, r#"<text x="{mid:.2}" y="{:.1}" text-anchor="middle">{}</text>"#, y0 + 18.0, escape(label));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(svg: &str, tag: &str) -> usize {
        svg.matches(&format!("<{tag} ")).count()
    }

    #[test]
    fn line_chart_has_one_polyline_per_series() {
        let series: Vec<Series> = (0..5)
            .map(|i| Series {
                label: format!("s{i}"),
                points: vec![(0.0, 1.0), (1.0, 10f64.powi(-i))],
                band: None,
            })
            .collect();
        let svg = line_chart("t", "x", "y", &series, true);
        assert_eq!(count(&svg, "polyline"), 5);
        assert_eq!(count(&svg, "polygon"), 0);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }

    #[test]
    fn bands_become_polygons() {
        let s = Series {
            label: "a<b".into(),
            points: vec![(1.0, 2.0), (2.0, 3.0)],
            band: Some(vec![(1.5, 2.5), (2.5, 3.5)]),
        };
        let svg = line_chart("t", "x", "y", &[s], false);
        assert_eq!(count(&svg, "polygon"), 1);
        assert!(svg.contains("a&lt;b"));
    }

    #[test]
    fn bar_chart_has_one_bar_per_entry() {
        let bars: Vec<(String, f64, f64)> = ["none", "all"].iter().map(|s| (s.to_string(), 0.5, 0.1)).collect();
        let svg = bar_chart("t", "y", &bars);
        // background plus bars
        assert_eq!(count(&svg, "rect"), 3);
    }
}
