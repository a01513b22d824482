//! Minimal SVG charts for reports: heatmap, horizontal bars, box plots.

use std::fmt::Write as _;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" \
         viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// Row-normalized heatmap of a square count matrix (rows gold, columns predicted).
pub fn heatmap(title: &str, labels: &[&str], counts: &[Vec<u64>]) -> String {
    let cell = 56.0;
    let left = 120.0;
    let top = 60.0;
    let n = labels.len() as f64;
    let mut s = header(left + n * cell + 20.0, top + n * cell + 70.0);
    let _ = writeln!(
        s,
        "<text x=\"{left}\" y=\"24\" font-size=\"14\">{}</text>",
        escape(title)
    );
    for (i, row) in counts.iter().enumerate() {
        let total: u64 = row.iter().sum();
        for (j, &c) in row.iter().enumerate() {
            let frac = if total == 0 { 0.0 } else { c as f64 / total as f64 };
            let shade = (255.0 - 200.0 * frac).round() as u8;
            let (x, y) = (left + j as f64 * cell, top + i as f64 * cell);
            let _ = writeln!(
                s,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({shade},{shade},255)\" stroke=\"#888\"/>"
            );
            let ink = if frac > 0.6 { "white" } else { "black" };
            let _ = writeln!(
                s,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"{ink}\">{c}</text>",
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            left - 6.0,
            top + i as f64 * cell + cell / 2.0 + 4.0,
            escape(labels[i])
        );
    }
    for (j, l) in labels.iter().enumerate() {
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"10\">{}</text>",
            left + j as f64 * cell + cell / 2.0,
            top + n * cell + 16.0,
            escape(l)
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">predicted</text>",
        left + n * cell / 2.0,
        top + n * cell + 40.0
    );
    s.push_str("</svg>\n");
    s
}

/// Horizontal bars with optional +/- error whiskers.
pub fn bar_chart(title: &str, labels: &[&str], values: &[f64], errors: Option<&[f64]>) -> String {
    let (left, top, bar_h, width) = (120.0, 40.0, 22.0, 360.0);
    let max = values
        .iter()
        .zip(errors.unwrap_or(&vec![0.0; values.len()]))
        .map(|(v, e)| (v + e).abs())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let min = values.iter().copied().fold(0.0f64, f64::min).min(0.0);
    let span = max - min;
    let x_of = |v: f64| left + (v - min) / span * width;
    let mut s = header(left + width + 80.0, top + labels.len() as f64 * (bar_h + 6.0) + 30.0);
    let _ = writeln!(
        s,
        "<text x=\"{left}\" y=\"22\" font-size=\"14\">{}</text>",
        escape(title)
    );
    for (i, (l, &v)) in labels.iter().zip(values).enumerate() {
        let y = top + i as f64 * (bar_h + 6.0);
        let (x0, x1) = (x_of(0.0_f64.min(v)), x_of(0.0_f64.max(v)));
        let _ = writeln!(
            s,
            "<rect x=\"{x0:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{bar_h}\" fill=\"#4a7ab5\"/>",
            (x1 - x0).max(0.5)
        );
        if let Some(err) = errors {
            let (a, b) = (x_of(v - err[i]), x_of(v + err[i]));
            let cy = y + bar_h / 2.0;
            let _ = writeln!(
                s,
                "<line x1=\"{a:.1}\" y1=\"{cy:.1}\" x2=\"{b:.1}\" y2=\"{cy:.1}\" stroke=\"black\"/>"
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            left - 6.0,
            y + bar_h / 2.0 + 4.0,
            escape(l)
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\">{v:.4}</text>",
            x1 + 4.0,
            y + bar_h / 2.0 + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Horizontal box plots (quartiles and min/max whiskers), one per label.
pub fn box_plot(title: &str, labels: &[&str], samples: &[Vec<f64>]) -> String {
    let (left, top, row_h, width) = (120.0, 40.0, 28.0, 360.0);
    let all = samples.iter().flatten().copied();
    let (mut min, mut max) = all.fold((0.0f64, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
    if max - min < 1e-12 {
        min -= 1.0;
        max += 1.0;
    }
    let x_of = |v: f64| left + (v - min) / (max - min) * width;
    let mut s = header(left + width + 40.0, top + labels.len() as f64 * row_h + 30.0);
    let _ = writeln!(
        s,
        "<text x=\"{left}\" y=\"22\" font-size=\"14\">{}</text>",
        escape(title)
    );
    let zero = x_of(0.0);
    let _ = writeln!(
        s,
        "<line x1=\"{zero:.1}\" y1=\"{top}\" x2=\"{zero:.1}\" y2=\"{:.1}\" stroke=\"#bbb\"/>",
        top + labels.len() as f64 * row_h
    );
    for (i, (l, xs)) in labels.iter().zip(samples).enumerate() {
        let mut v = xs.clone();
        v.sort_by(f64::total_cmp);
        let y = top + i as f64 * row_h;
        let cy = y + row_h / 2.0;
        let [lo, q1, med, q3, hi] = [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| x_of(quantile(&v, q)));
        let _ = writeln!(
            s,
            "<line x1=\"{lo:.1}\" y1=\"{cy:.1}\" x2=\"{hi:.1}\" y2=\"{cy:.1}\" stroke=\"black\"/>"
        );
        let _ = writeln!(
            s,
            "<rect x=\"{q1:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"#f3c16b\" stroke=\"black\"/>",
            y + 5.0,
            (q3 - q1).max(0.5),
            row_h - 10.0
        );
        let _ = writeln!(
            s,
            "<line x1=\"{med:.1}\" y1=\"{:.1}\" x2=\"{med:.1}\" y2=\"{:.1}\" stroke=\"black\" stroke-width=\"2\"/>",
            y + 5.0,
            y + row_h - 5.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            left - 6.0,
            cy + 4.0,
            escape(l)
        );
    }
    s.push_str("</svg>\n");
    s
}
