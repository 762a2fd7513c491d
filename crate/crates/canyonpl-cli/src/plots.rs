//! Minimal deterministic SVG renderer for the report command.
//!
//! Every chart is emitted as a fixed 640x400 canvas with coordinates rounded
//! to two decimals and no timestamps or random ids, so rerunning a report on
//! the same inputs produces byte-identical files.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 52.0;

/// Escapes text for use inside SVG attribute values and element bodies.
fn esc(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn fmt(v: f64) -> String {
    // Normalize negative zero so identical plots never differ by "-0.00".
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.2}")
}

/// Pads a value range by 5% on each side, guarding degenerate spans.
fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let span = hi - lo;
    if span > 0.0 {
        (lo - 0.05 * span, hi + 0.05 * span)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

/// Linear map from a data value to a y pixel (inverted: larger is higher).
fn y_pixel(v: f64, lo: f64, hi: f64) -> f64 {
    let t = (v - lo) / (hi - lo);
    HEIGHT - MARGIN_BOTTOM - t * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
}

fn x_pixel(v: f64, lo: f64, hi: f64) -> f64 {
    let t = (v - lo) / (hi - lo);
    MARGIN_LEFT + t * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
}

fn header(title: &str) -> String {
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" ",
            "viewBox=\"0 0 640 400\" font-family=\"sans-serif\" font-size=\"12\">\n",
            "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n",
            "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n"
        ),
        esc(title)
    )
}

/// Draws the plot frame and five horizontal value gridlines with labels.
fn y_axis(out: &mut String, lo: f64, hi: f64) {
    for i in 0..=4 {
        let v = lo + (hi - lo) * f64::from(i) / 4.0;
        let y = y_pixel(v, lo, hi);
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#ddd\"/>\n",
            fmt(MARGIN_LEFT),
            fmt(y),
            fmt(WIDTH - MARGIN_RIGHT),
            fmt(y)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            fmt(MARGIN_LEFT - 6.0),
            fmt(y + 4.0),
            fmt(v)
        ));
    }
    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n",
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP),
        fmt(WIDTH - MARGIN_LEFT - MARGIN_RIGHT),
        fmt(HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    ));
}

/// Sorted-sample quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

/// One box-and-whisker per labeled sample set.
pub fn box_plot(title: &str, rows: &[(String, Vec<f64>)]) -> String {
    let mut values: Vec<f64> = rows.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    if values.is_empty() {
        values.push(0.0);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = padded(lo, hi);

    let mut out = header(title);
    y_axis(&mut out, lo, hi);
    let slot = (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / rows.len().max(1) as f64;
    for (i, (name, raw)) in rows.iter().enumerate() {
        let mut sorted = raw.clone();
        sorted.sort_by(f64::total_cmp);
        let cx = MARGIN_LEFT + slot * (i as f64 + 0.5);
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            fmt(cx),
            fmt(HEIGHT - MARGIN_BOTTOM + 18.0),
            esc(name)
        ));
        if sorted.is_empty() {
            continue;
        }
        let q1 = quantile(&sorted, 0.25);
        let q2 = quantile(&sorted, 0.5);
        let q3 = quantile(&sorted, 0.75);
        let min = sorted[0];
        let max = sorted[sorted.len() - 1];
        let half = (slot * 0.3).min(30.0);
        // Whisker stem plus caps at the sample extremes.
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#333\"/>\n",
            fmt(cx),
            fmt(y_pixel(min, lo, hi)),
            fmt(y_pixel(max, lo, hi))
        ));
        for v in [min, max] {
            out.push_str(&format!(
                "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#333\"/>\n",
                fmt(cx - half * 0.5),
                fmt(y_pixel(v, lo, hi)),
                fmt(cx + half * 0.5)
            ));
        }
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#9ecae1\" stroke=\"#333\"/>\n",
            fmt(cx - half),
            fmt(y_pixel(q3, lo, hi)),
            fmt(half * 2.0),
            fmt(y_pixel(q1, lo, hi) - y_pixel(q3, lo, hi))
        ));
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#333\" stroke-width=\"2\"/>\n",
            fmt(cx - half),
            fmt(y_pixel(q2, lo, hi)),
            fmt(cx + half)
        ));
    }
    out.push_str("</svg>\n");
    out
}

/// Scatter of (x, y) pairs with a y = x reference line.
pub fn scatter_plot(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    let mut values: Vec<f64> = points.iter().flat_map(|&(x, y)| [x, y]).collect();
    if values.is_empty() {
        values.push(0.0);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Shared range on both axes keeps the reference line at 45 degrees.
    let (lo, hi) = padded(lo, hi);

    let mut out = header(title);
    y_axis(&mut out, lo, hi);
    for i in 0..=4 {
        let v = lo + (hi - lo) * f64::from(i) / 4.0;
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            fmt(x_pixel(v, lo, hi)),
            fmt(HEIGHT - MARGIN_BOTTOM + 18.0),
            fmt(v)
        ));
    }
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n",
        fmt(x_pixel(lo, lo, hi)),
        fmt(y_pixel(lo, lo, hi)),
        fmt(x_pixel(hi, lo, hi)),
        fmt(y_pixel(hi, lo, hi))
    ));
    for &(x, y) in points {
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"2.50\" fill=\"#3182bd\" fill-opacity=\"0.6\"/>\n",
            fmt(x_pixel(x, lo, hi)),
            fmt(y_pixel(y, lo, hi))
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        fmt((MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0),
        fmt(HEIGHT - 12.0),
        esc(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
        fmt((MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2.0),
        esc(y_label)
    ));
    out.push_str("</svg>\n");
    out
}

/// Vertical bars around a zero baseline with (lo, hi) whiskers per bar.
pub fn bar_chart(title: &str, rows: &[(String, f64, f64, f64)]) -> String {
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    for &(_, mean, wlo, whi) in rows {
        lo = lo.min(mean).min(wlo);
        hi = hi.max(mean).max(whi);
    }
    let (lo, hi) = padded(lo, hi);

    let mut out = header(title);
    y_axis(&mut out, lo, hi);
    let zero = y_pixel(0.0, lo, hi);
    out.push_str(&format!(
        "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#444\"/>\n",
        fmt(MARGIN_LEFT),
        fmt(zero),
        fmt(WIDTH - MARGIN_RIGHT)
    ));
    let slot = (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / rows.len().max(1) as f64;
    for (i, (name, mean, wlo, whi)) in rows.iter().enumerate() {
        let cx = MARGIN_LEFT + slot * (i as f64 + 0.5);
        let half = (slot * 0.3).min(24.0);
        let top = y_pixel(mean.max(0.0), lo, hi);
        let bottom = y_pixel(mean.min(0.0), lo, hi);
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#9ecae1\" stroke=\"#333\"/>\n",
            fmt(cx - half),
            fmt(top),
            fmt(half * 2.0),
            fmt(bottom - top)
        ));
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#333\"/>\n",
            fmt(cx),
            fmt(y_pixel(*wlo, lo, hi)),
            fmt(y_pixel(*whi, lo, hi))
        ));
        // Rotated labels keep long feature names legible in a narrow slot.
        out.push_str(&format!(
            "<text x=\"{0}\" y=\"{1}\" text-anchor=\"end\" transform=\"rotate(-35 {0} {1})\">{2}</text>\n",
            fmt(cx),
            fmt(HEIGHT - MARGIN_BOTTOM + 16.0),
            esc(name)
        ));
    }
    out.push_str("</svg>\n");
    out
}
