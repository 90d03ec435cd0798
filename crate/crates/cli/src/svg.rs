//! Minimal self-contained SVG line plots; no display dependency.

use std::io::Write;
use std::path::Path;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 520.0;
const MARGIN: f64 = 64.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series<'a> {
    pub name: &'a str,
    pub points: &'a [(f64, f64)],
}

/// Writes a line plot of the series with optional point markers.
pub fn line_plot(
    path: &Path,
    title: &str,
    series: &[Series<'_>],
    markers: &[(f64, f64)],
) -> std::io::Result<()> {
    let all = series
        .iter()
        .flat_map(|s| s.points.iter())
        .chain(markers.iter());
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    if !(x_lo < x_hi) {
        x_hi = x_lo + 1.0;
    }
    if !(y_lo < y_hi) {
        y_hi = y_lo + 1.0;
    }
    let pad_y = 0.05 * (y_hi - y_lo);
    let (y_lo, y_hi) = (y_lo - pad_y, y_hi + pad_y);

    let sx = (WIDTH - 2.0 * MARGIN) / (x_hi - x_lo);
    let sy = (HEIGHT - 2.0 * MARGIN) / (y_hi - y_lo);
    let px = |x: f64| MARGIN + (x - x_lo) * sx;
    let py = |y: f64| HEIGHT - MARGIN - (y - y_lo) * sy;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"monospace\" font-size=\"13\">\n"
    ));
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"26\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));

    // Axes with five ticks each.
    out.push_str(&format!(
        "<line x1=\"{m:.1}\" y1=\"{b:.1}\" x2=\"{r:.1}\" y2=\"{b:.1}\" stroke=\"#333\"/>\n\
         <line x1=\"{m:.1}\" y1=\"{t:.1}\" x2=\"{m:.1}\" y2=\"{b:.1}\" stroke=\"#333\"/>\n",
        m = MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
    ));
    for i in 0..=4 {
        let fx = x_lo + (x_hi - x_lo) * i as f64 / 4.0;
        let fy = y_lo + (y_hi - y_lo) * i as f64 / 4.0;
        out.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{b:.1}\" x2=\"{x:.1}\" y2=\"{b2:.1}\" stroke=\"#333\"/>\n\
             <text x=\"{x:.1}\" y=\"{ly:.1}\" text-anchor=\"middle\">{lbl}</text>\n",
            x = px(fx),
            b = HEIGHT - MARGIN,
            b2 = HEIGHT - MARGIN + 6.0,
            ly = HEIGHT - MARGIN + 22.0,
            lbl = fmt_tick(fx),
        ));
        out.push_str(&format!(
            "<line x1=\"{m2:.1}\" y1=\"{y:.1}\" x2=\"{m:.1}\" y2=\"{y:.1}\" stroke=\"#333\"/>\n\
             <text x=\"{lx:.1}\" y=\"{ty:.1}\" text-anchor=\"end\">{lbl}</text>\n",
            m = MARGIN,
            m2 = MARGIN - 6.0,
            y = py(fy),
            lx = MARGIN - 10.0,
            ty = py(fy) + 4.0,
            lbl = fmt_tick(fy),
        ));
    }

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{}</text>\n",
            WIDTH - MARGIN - 150.0,
            MARGIN + 18.0 * (i + 1) as f64,
            escape(s.name)
        ));
    }

    for &(x, y) in markers {
        out.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#d62728\"/>\n",
            px(x),
            py(y)
        ));
    }
    out.push_str("</svg>\n");

    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(out.as_bytes())
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
