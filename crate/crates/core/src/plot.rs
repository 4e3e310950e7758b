//! Minimal SVG scatter/line plots, enough for the scan and deviation
//! figures without a plotting dependency.

use std::fmt::Write as _;
use std::io::Write;

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    pub line: bool,
    pub radius: f64,
}

impl Series {
    pub fn scatter(label: impl Into<String>, points: Vec<(f64, f64)>, color: &'static str) -> Self {
        Series {
            label: label.into(),
            points,
            color,
            line: false,
            radius: 3.0,
        }
    }

    pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>, color: &'static str) -> Self {
        Series {
            label: label.into(),
            points,
            color,
            line: true,
            radius: 0.0,
        }
    }
}

pub struct SvgPlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub log_y: bool,
}

const W: f64 = 640.0;
const H: f64 = 440.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 36.0;
const MB: f64 = 52.0;

impl SvgPlot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        SvgPlot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            log_y: false,
        }
    }

    pub fn push(&mut self, s: Series) {
        self.series.push(s);
    }

    fn ranges(&self) -> ((f64, f64), (f64, f64)) {
        let mut xr = (f64::INFINITY, f64::NEG_INFINITY);
        let mut yr = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.series {
            for &(x, y) in &s.points {
                let y = if self.log_y { y.max(1e-300).log10() } else { y };
                xr.0 = xr.0.min(x);
                xr.1 = xr.1.max(x);
                yr.0 = yr.0.min(y);
                yr.1 = yr.1.max(y);
            }
        }
        for r in [&mut xr, &mut yr] {
            if !r.0.is_finite() || !r.1.is_finite() {
                *r = (0.0, 1.0);
            }
            if r.1 - r.0 < 1e-12 {
                r.0 -= 0.5;
                r.1 += 0.5;
            }
            let pad = 0.04 * (r.1 - r.0);
            r.0 -= pad;
            r.1 += pad;
        }
        (xr, yr)
    }

    pub fn render(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.ranges();
        let px = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
        let py = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
        );
        let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="20" font-size="15" text-anchor="middle" font-family="sans-serif">{}</text>"#,
            W / 2.0,
            xml_escape(&self.title)
        );
        // axes
        let _ = writeln!(
            out,
            r#"<line x1="{ML}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
            H - MB,
            W - MR,
            H - MB
        );
        let _ = writeln!(
            out,
            r#"<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{}" stroke="black"/>"#,
            H - MB
        );
        // ticks
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" font-size="11" text-anchor="middle" font-family="sans-serif">{:.3}</text>"#,
                px(fx),
                H - MB + 16.0,
                fx
            );
            let label = if self.log_y {
                format!("1e{fy:.2}")
            } else {
                format!("{fy:.3}")
            };
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" font-size="11" text-anchor="end" font-family="sans-serif">{}</text>"#,
                ML - 6.0,
                py(fy) + 4.0,
                label
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="13" text-anchor="middle" font-family="sans-serif">{}</text>"#,
            (ML + W - MR) / 2.0,
            H - 12.0,
            xml_escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{}" font-size="13" text-anchor="middle" font-family="sans-serif" transform="rotate(-90 16 {})">{}</text>"#,
            (MT + H - MB) / 2.0,
            (MT + H - MB) / 2.0,
            xml_escape(&self.y_label)
        );
        // legend
        for (i, s) in self.series.iter().enumerate() {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" font-size="11" fill="{}" font-family="sans-serif">{}</text>"#,
                W - MR - 150.0,
                MT + 14.0 * (i + 1) as f64,
                s.color,
                xml_escape(&s.label)
            );
        }
        for s in &self.series {
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .map(|&(x, y)| {
                    let yv = if self.log_y { y.max(1e-300).log10() } else { y };
                    (px(x), py(yv))
                })
                .collect();
            if s.line {
                let path: String = pts
                    .iter()
                    .enumerate()
                    .map(|(i, (x, y))| format!("{}{x:.2},{y:.2}", if i == 0 { "M" } else { "L" }))
                    .collect();
                let _ = writeln!(
                    out,
                    r#"<path d="{path}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                    s.color
                );
            } else {
                for (x, y) in pts {
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{x:.2}" cy="{y:.2}" r="{}" fill="{}" fill-opacity="0.75"/>"#,
                        s.radius, s.color
                    );
                }
            }
        }
        let _ = writeln!(out, "</svg>");
        out
    }

    pub fn write_to<Wr: Write>(&self, mut w: Wr) -> std::io::Result<()> {
        w.write_all(self.render().as_bytes())
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
