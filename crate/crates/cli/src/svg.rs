//! Minimal self-contained line charts.

use std::fmt::Write as _;

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Draw markers only.
    pub scatter: bool,
}

pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f5fa8", "#c0392b", "#2e8b57", "#8e44ad"];

fn fmt(v: f64) -> String {
    // fixed precision keeps output byte-stable and compact
    format!("{v:.2}")
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render(c: &Chart) -> String {
    let pts = c.series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(&c.title));
    let _ = writeln!(
        s,
        r#"<path d="M{p} {t} L{p} {b} L{r} {b}" stroke="black" fill="none"/>"#,
        p = PAD,
        t = PAD,
        b = H - PAD,
        r = W - PAD
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            fmt(px(xv)),
            fmt(H - PAD + 18.0),
            tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            fmt(PAD - 6.0),
            fmt(py(yv) + 4.0),
            tick(yv)
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 16.0, escape(&c.x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(&c.y_label)
    );
    for (k, ser) in c.series.iter().enumerate() {
        let col = COLORS[k % COLORS.len()];
        let good: Vec<&(f64, f64)> = ser.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
        if !ser.scatter && good.len() > 1 {
            let d: Vec<String> = good
                .iter()
                .enumerate()
                .map(|(i, p)| format!("{}{} {}", if i == 0 { "M" } else { "L" }, fmt(px(p.0)), fmt(py(p.1))))
                .collect();
            let _ = writeln!(s, r#"<path d="{}" stroke="{col}" fill="none" stroke-width="1.5"/>"#, d.join(" "));
        }
        for p in &good {
            let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="3" fill="{col}"/>"#, fmt(px(p.0)), fmt(py(p.1)));
        }
        let ly = PAD + 16.0 * k as f64;
        let _ = writeln!(s, r#"<rect x="{}" y="{}" width="10" height="10" fill="{col}"/>"#, W - PAD - 150.0, fmt(ly - 9.0));
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, W - PAD - 135.0, fmt(ly), escape(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_without_external_refs() {
        let c = Chart {
            title: "a < b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![Series {
                label: "s".into(),
                points: vec![(0.0, 1.0), (1.0, f64::NAN), (2.0, 3.0)],
                scatter: false,
            }],
        };
        let out = render(&c);
        assert!(out.starts_with("<svg") && out.ends_with("</svg>\n"));
        assert!(out.contains("a &lt; b"));
        assert!(!out.contains("href"));
        assert_eq!(out, render(&c));
    }
}
