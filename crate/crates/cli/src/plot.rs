//! Minimal self-contained SVG figures: line charts, paired histograms and stem plots.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Compact tick label.
fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    log_x: bool,
}

impl Frame {
    fn tx(&self, x: f64) -> f64 {
        let (a, b, v) = if self.log_x {
            (self.x0.log10(), self.x1.log10(), x.max(self.x0).log10())
        } else {
            (self.x0, self.x1, x)
        };
        LEFT + (v - a) / (b - a).max(1e-300) * (W - LEFT - RIGHT)
    }

    fn ty(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0).max(1e-300) * (H - TOP - BOTTOM)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        esc(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str, x_ticks: &[(f64, String)]) {
    let (xa, xb, ya, yb) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(
        out,
        r##"<path d="M{xa} {ya} L{xa} {yb} L{xb} {yb}" fill="none" stroke="#333"/>"##
    );
    for (x, label) in x_ticks {
        let px = f.tx(*x);
        let _ = writeln!(
            out,
            r##"<line x1="{px:.1}" y1="{yb}" x2="{px:.1}" y2="{:.1}" stroke="#333"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            yb + 5.0,
            yb + 18.0,
            esc(label)
        );
    }
    for i in 0..=5 {
        let v = f.y0 + (f.y1 - f.y0) * i as f64 / 5.0;
        let py = f.ty(v);
        let _ = writeln!(
            out,
            r##"<line x1="{:.1}" y1="{py:.1}" x2="{xa}" y2="{py:.1}" stroke="#333"/><line x1="{xa}" y1="{py:.1}" x2="{xb}" y2="{py:.1}" stroke="#eee"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            xa - 5.0,
            xa - 8.0,
            py + 4.0,
            fmt_tick(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (xa + xb) / 2.0,
        H - 18.0,
        esc(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        (ya + yb) / 2.0,
        (ya + yb) / 2.0,
        esc(y_label)
    );
}

fn legend(out: &mut String, labels: &[&str]) {
    for (i, l) in labels.iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * i as f64;
        let x = W - RIGHT + 15.0;
        let c = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<rect x="{x}" y="{:.1}" width="14" height="4" fill="{c}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            y - 2.0,
            x + 20.0,
            y + 4.0,
            esc(l)
        );
    }
}

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct LinePlot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub log_x: bool,
    /// Fixed y range; defaults to the data range.
    pub y_range: Option<(f64, f64)>,
    /// Custom x tick positions and labels; defaults to evenly spaced ticks.
    pub x_ticks: Option<Vec<(f64, String)>>,
    /// Draw each series as a step function (for empirical CDFs).
    pub steps: bool,
    pub series: Vec<Series>,
}

pub fn line_plot(p: &LinePlot) -> String {
    let pts = p.series.iter().flat_map(|s| s.points.iter());
    let finite: Vec<(f64, f64)> = pts
        .filter(|(x, y)| x.is_finite() && y.is_finite() && (!p.log_x || *x > 0.0))
        .copied()
        .collect();
    let (mut x0, mut x1) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (x, _)| (a.min(*x), b.max(*x)));
    if !x0.is_finite() {
        (x0, x1) = (if p.log_x { 1e-3 } else { 0.0 }, 1.0);
    }
    if x1 <= x0 {
        x1 = if p.log_x { x0 * 10.0 } else { x0 + 1.0 };
    }
    let (y0, y1) = p.y_range.unwrap_or_else(|| {
        let (a, b) = finite
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, y)| (a.min(*y), b.max(*y)));
        if a.is_finite() && b > a {
            (a.min(0.0), b)
        } else {
            (0.0, 1.0)
        }
    });
    let f = Frame { x0, x1, y0, y1, log_x: p.log_x };
    let ticks = p.x_ticks.clone().unwrap_or_else(|| {
        if p.log_x {
            let (a, b) = (x0.log10().floor() as i32, x1.log10().ceil() as i32);
            let stride = ((b - a) / 6).max(1);
            (a..=b)
                .step_by(stride as usize)
                .map(|e| 10f64.powi(e))
                .filter(|v| *v >= x0 && *v <= x1)
                .map(|v| (v, format!("1e{}", v.log10().round())))
                .collect()
        } else {
            (0..=5).map(|i| x0 + (x1 - x0) * i as f64 / 5.0).map(|v| (v, fmt_tick(v))).collect()
        }
    });
    let mut out = String::new();
    header(&mut out, p.title);
    axes(&mut out, &f, p.x_label, p.y_label, &ticks);
    for (i, s) in p.series.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        let mut last: Option<(f64, f64)> = None;
        for &(x, y) in &s.points {
            if !(x.is_finite() && y.is_finite()) || (p.log_x && x <= 0.0) {
                continue;
            }
            let (px, py) = (f.tx(x), f.ty(y));
            match last {
                None => {
                    let _ = write!(d, "M{px:.1} {py:.1}");
                }
                Some((_, ly)) if p.steps => {
                    let _ = write!(d, " L{px:.1} {ly:.1} L{px:.1} {py:.1}");
                }
                Some(_) => {
                    let _ = write!(d, " L{px:.1} {py:.1}");
                }
            }
            last = Some((px, py));
        }
        let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{c}" stroke-width="2"/>"#);
        if !p.steps {
            for &(x, y) in &s.points {
                if x.is_finite() && y.is_finite() && (!p.log_x || x > 0.0) {
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{c}"/>"#,
                        f.tx(x),
                        f.ty(y)
                    );
                }
            }
        }
    }
    let labels: Vec<&str> = p.series.iter().map(|s| s.label.as_str()).collect();
    legend(&mut out, &labels);
    out.push_str("</svg>\n");
    out
}

/// Overlaid histograms sharing bin edges.
pub fn histogram_plot(title: &str, x_label: &str, edges: &[f64], series: &[(&str, &[u64])]) -> String {
    let x0 = edges.first().copied().unwrap_or(0.0);
    let x1 = edges.last().copied().unwrap_or(1.0).max(x0 + 1e-12);
    let ymax = series
        .iter()
        .flat_map(|(_, c)| c.iter())
        .copied()
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let f = Frame { x0, x1, y0: 0.0, y1: ymax, log_x: false };
    let ticks: Vec<(f64, String)> = (0..=5)
        .map(|i| x0 + (x1 - x0) * i as f64 / 5.0)
        .map(|v| (v, fmt_tick(v)))
        .collect();
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, x_label, "count", &ticks);
    for (i, (_, counts)) in series.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        for (b, &n) in counts.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let (a, z) = (f.tx(edges[b]), f.tx(edges[b + 1]));
            let top = f.ty(n as f64);
            let _ = writeln!(
                out,
                r#"<rect x="{a:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="{c}" fill-opacity="0.55"/>"#,
                (z - a).max(0.5),
                f.ty(0.0) - top
            );
        }
    }
    let labels: Vec<&str> = series.iter().map(|(l, _)| *l).collect();
    legend(&mut out, &labels);
    out.push_str("</svg>\n");
    out
}

/// Stem plot of a range profile.
pub fn stem_plot(title: &str, x_label: &str, y_label: &str, x: &[f64], y: &[f64]) -> String {
    let x0 = x.first().copied().unwrap_or(0.0);
    let x1 = x.last().copied().unwrap_or(1.0).max(x0 + 1e-12);
    let ymax = y.iter().copied().fold(0.0, f64::max);
    let f = Frame {
        x0,
        x1,
        y0: 0.0,
        y1: if ymax > 0.0 { ymax * 1.1 } else { 1.0 },
        log_x: false,
    };
    let ticks: Vec<(f64, String)> = (0..=5)
        .map(|i| x0 + (x1 - x0) * i as f64 / 5.0)
        .map(|v| (v, fmt_tick(v)))
        .collect();
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, x_label, y_label, &ticks);
    let base = f.ty(0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        if yi <= 0.0 {
            continue;
        }
        let (px, py) = (f.tx(xi), f.ty(yi));
        let _ = writeln!(
            out,
            r#"<line x1="{px:.1}" y1="{base:.1}" x2="{px:.1}" y2="{py:.1}" stroke="{0}" stroke-width="2"/><circle cx="{px:.1}" cy="{py:.1}" r="3.5" fill="{0}"/>"#,
            PALETTE[0]
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn well_formed(s: &str) {
        assert!(s.starts_with("<svg"));
        assert!(s.trim_end().ends_with("</svg>"));
        assert!(!s.contains("NaN") && !s.contains("inf"));
        assert!(!s.contains("href"), "figures must not reference external assets");
    }

    #[test]
    fn line_plot_handles_log_axis_and_gaps() {
        let s = line_plot(&LinePlot {
            title: "t <&>",
            x_label: "x",
            y_label: "y",
            log_x: true,
            y_range: Some((0.0, 1.0)),
            x_ticks: None,
            steps: true,
            series: vec![Series {
                label: "a".into(),
                points: vec![(0.0, 0.0), (1e-6, 0.2), (1e-2, 0.9), (f64::NAN, 1.0), (1.0, 1.0)],
            }],
        });
        well_formed(&s);
        assert!(s.contains("t &lt;&amp;&gt;"));
    }

    #[test]
    fn empty_inputs_still_render() {
        well_formed(&line_plot(&LinePlot {
            title: "",
            x_label: "",
            y_label: "",
            log_x: false,
            y_range: None,
            x_ticks: None,
            steps: false,
            series: vec![],
        }));
        well_formed(&histogram_plot("h", "x", &[0.0, 1.0], &[("a", &[0])]));
        well_formed(&stem_plot("s", "x", "y", &[], &[]));
    }

    #[test]
    fn stems_only_for_positive_values() {
        let s = stem_plot("s", "x", "y", &[0.0, 1.0, 2.0], &[0.0, 2.0, 0.0]);
        assert_eq!(s.matches("<circle").count(), 1);
    }
}
