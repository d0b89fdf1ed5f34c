//! Minimal self-contained SVG charts. Every chart is also written as CSV by
//! the caller.

use std::fmt::Write as _;

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;

fn header(out: &mut String, width: f64, height: f64) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = write!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Plot area placed at `(x0, y0)` with size `(w, h)` mapping data ranges.
struct Panel {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Panel {
    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xr.0) / (self.xr.1 - self.xr.0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.yr.0) / (self.yr.1 - self.yr.0) * self.h
    }

    fn frame(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let (x0, y0, w, h) = (self.x0, self.y0, self.w, self.h);
        let _ = write!(out, r##"<rect x="{x0:.1}" y="{y0:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#444"/>"##);
        for i in 0..=4 {
            let t = i as f64 / 4.0;
            let (xv, yv) = (self.xr.0 + t * (self.xr.1 - self.xr.0), self.yr.0 + t * (self.yr.1 - self.yr.0));
            let (px, py) = (self.px(xv), self.py(yv));
            let _ = write!(
                out,
                r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                y0 + h + 14.0,
                tick(xv)
            );
            let _ = write!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, x0 - 4.0, py + 4.0, tick(yv));
        }
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
            x0 + w / 2.0,
            y0 - 8.0,
            escape(title)
        );
        let _ = write!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, x0 + w / 2.0, y0 + h + 30.0, escape(xlabel));
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
            x0 - 34.0,
            y0 + h / 2.0,
            x0 - 34.0,
            y0 + h / 2.0,
            escape(ylabel)
        );
    }

    fn polyline(&self, out: &mut String, points: &[(f64, f64)], color: &str, markers: bool) {
        let pts: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y))).collect();
        let _ = write!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#, pts.join(" "));
        if markers {
            for &(x, y) in points {
                let _ = write!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, self.px(x), self.py(y));
            }
        }
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 10.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// A curve in the unit square (ROC or precision-recall).
pub fn curve(title: &str, xlabel: &str, ylabel: &str, points: &[(f64, f64)], diagonal: bool) -> String {
    let mut out = String::new();
    header(&mut out, W, H);
    let p = Panel { x0: PAD + 10.0, y0: PAD - 16.0, w: W - 2.0 * PAD, h: H - 2.0 * PAD, xr: (0.0, 1.0), yr: (0.0, 1.0) };
    p.frame(&mut out, title, xlabel, ylabel);
    if diagonal {
        let _ = write!(
            out,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#aaa" stroke-dasharray="4 3"/>"##,
            p.px(0.0),
            p.py(0.0),
            p.px(1.0),
            p.py(1.0)
        );
    }
    p.polyline(&mut out, points, "#1f5fa8", false);
    out.push_str("</svg>\n");
    out
}

/// Sequential blue colour for `t` in [0, 1].
fn shade(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(247.0, 8.0), lerp(251.0, 48.0), lerp(255.0, 107.0))
}

/// Heatmap of AUROC by trainable layers (rows) and data fraction (columns).
pub fn heatmap(k_list: &[usize], fractions: &[u32], value: impl Fn(usize, u32) -> Option<f64>) -> String {
    let cell = (44.0, 24.0);
    let (left, top) = (70.0, 40.0);
    let width = left + cell.0 * fractions.len() as f64 + 20.0;
    let height = top + cell.1 * k_list.len() as f64 + 50.0;
    let value = &value;
    let values: Vec<f64> = k_list.iter().flat_map(|&k| fractions.iter().filter_map(move |&f| value(k, f))).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = String::new();
    header(&mut out, width, height);
    let _ = write!(out, r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="13">AUROC by trainable layers and training data</text>"#, width / 2.0);
    for (c, f) in fractions.iter().enumerate() {
        let x = left + cell.0 * (c as f64 + 0.5);
        let _ = write!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{f}%</text>"#, top + cell.1 * k_list.len() as f64 + 16.0);
    }
    let _ = write!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">training data</text>"#,
        left + cell.0 * fractions.len() as f64 / 2.0,
        top + cell.1 * k_list.len() as f64 + 34.0
    );
    for (r, &k) in k_list.iter().enumerate() {
        let y = top + cell.1 * r as f64;
        let _ = write!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">k={k}</text>"#, left - 6.0, y + cell.1 * 0.65);
        for (c, &f) in fractions.iter().enumerate() {
            let x = left + cell.0 * c as f64;
            match value(k, f) {
                Some(v) => {
                    let t = (v - lo) / span;
                    let ink = if t > 0.55 { "white" } else { "black" };
                    let _ = write!(
                        out,
                        r##"<rect x="{x:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="{}" stroke="#fff"/><text x="{:.1}" y="{:.1}" text-anchor="middle" fill="{ink}" font-size="10">{v:.3}</text>"##,
                        cell.0,
                        cell.1,
                        shade(t),
                        x + cell.0 / 2.0,
                        y + cell.1 * 0.65
                    );
                }
                None => {
                    let _ = write!(out, r##"<rect x="{x:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="#eee" stroke="#fff"/>"##, cell.0, cell.1);
                }
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

/// One panel of a multi-panel line chart.
pub struct Series<'a> {
    pub title: &'a str,
    pub ylabel: &'a str,
    /// `(x, y)` pairs; `None` values are skipped.
    pub points: Vec<(f64, Option<f64>)>,
}

/// Panels side by side in a 2 x 2 grid (or fewer).
pub fn panels(xlabel: &str, series: &[Series]) -> String {
    let (pw, ph) = (W, H - 40.0);
    let cols = series.len().clamp(1, 2);
    let rows = series.len().div_ceil(2).max(1);
    let mut out = String::new();
    header(&mut out, pw * cols as f64, ph * rows as f64);
    for (i, s) in series.iter().enumerate() {
        let (c, r) = ((i % 2) as f64, (i / 2) as f64);
        let pts: Vec<(f64, f64)> = s.points.iter().filter_map(|&(x, y)| y.map(|y| (x, y))).collect();
        let (mut lo, mut hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        let pad = if hi > lo { 0.08 * (hi - lo) } else { 0.5 };
        let xmax = s.points.iter().map(|p| p.0).fold(1.0, f64::max);
        let p = Panel {
            x0: c * pw + PAD + 14.0,
            y0: r * ph + PAD - 16.0,
            w: pw - 2.0 * PAD - 10.0,
            h: ph - 2.0 * PAD,
            xr: (1.0, xmax),
            yr: (lo - pad, hi + pad),
        };
        p.frame(&mut out, s.title, xlabel, s.ylabel);
        p.polyline(&mut out, &pts, "#b03a2e", true);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_has_one_cell_per_pair() {
        let svg = heatmap(&[0, 18], &[20, 100], |k, f| Some(k as f64 / 18.0 + f as f64 / 1000.0));
        assert_eq!(svg.matches("<rect x=").count(), 4);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn panels_skip_missing_points() {
        let s = Series { title: "a", ylabel: "y", points: vec![(1.0, Some(0.1)), (2.0, None), (3.0, Some(0.4))] };
        let svg = panels("decile", &[s]);
        assert_eq!(svg.matches("<circle").count(), 2);
    }

    #[test]
    fn titles_are_escaped() {
        assert!(curve("a<b", "x", "y", &[(0.0, 0.0), (1.0, 1.0)], true).contains("a&lt;b"));
    }
}
