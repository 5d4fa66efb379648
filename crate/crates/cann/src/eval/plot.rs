//! Minimal SVG emission for the two interpretation views: a partial
//! dependence line with the input's histogram above it, and a box plot of
//! permutation importance scores per input.

use crate::error::Result;
use crate::eval::importance::ImportanceResult;
use crate::eval::pdp::PdpResult;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;

fn scale(v: f64, lo: f64, hi: f64, out_lo: f64, out_hi: f64) -> f64 {
    if hi - lo == 0.0 {
        return 0.5 * (out_lo + out_hi);
    }
    out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo)
}

fn header() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// PDP line plot with the input's histogram in a band above it.
pub fn pdp_svg(result: &PdpResult) -> Result<String> {
    let mut svg = header();
    let hist_top = MARGIN;
    let hist_bottom = MARGIN + 90.0;
    let line_top = hist_bottom + 24.0;
    let line_bottom = HEIGHT - MARGIN;

    let x_lo = result
        .grid
        .first()
        .copied()
        .unwrap_or(0.0)
        .min(result.histogram_edges.first().copied().unwrap_or(0.0));
    let x_hi = result
        .grid
        .last()
        .copied()
        .unwrap_or(1.0)
        .max(result.histogram_edges.last().copied().unwrap_or(1.0));

    let max_count = result.histogram_counts.iter().copied().max().unwrap_or(1) as f64;
    for (k, &count) in result.histogram_counts.iter().enumerate() {
        let x0 = scale(result.histogram_edges[k], x_lo, x_hi, MARGIN, WIDTH - MARGIN);
        let x1 = scale(result.histogram_edges[k + 1], x_lo, x_hi, MARGIN, WIDTH - MARGIN);
        let h = (count as f64 / max_count) * (hist_bottom - hist_top);
        svg.push_str(&format!(
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#9ecae1\"/>\n",
            x0,
            hist_bottom - h,
            (x1 - x0).max(0.5),
            h
        ));
    }

    let y_lo = result
        .average_prediction
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let y_hi = result
        .average_prediction
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let pad = ((y_hi - y_lo) * 0.05).max(1e-12);
    let (y_lo, y_hi) = (y_lo - pad, y_hi + pad);

    let points: Vec<String> = result
        .grid
        .iter()
        .zip(&result.average_prediction)
        .map(|(&g, &p)| {
            format!(
                "{:.2},{:.2}",
                scale(g, x_lo, x_hi, MARGIN, WIDTH - MARGIN),
                scale(p, y_lo, y_hi, line_bottom, line_top)
            )
        })
        .collect();
    svg.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\"/>\n",
        points.join(" ")
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN}\" y1=\"{line_bottom}\" x2=\"{:.2}\" y2=\"{line_bottom}\" stroke=\"black\"/>\n",
        WIDTH - MARGIN
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN}\" y1=\"{line_top}\" x2=\"{MARGIN}\" y2=\"{line_bottom}\" stroke=\"black\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        HEIGHT - 14.0,
        result.input
    ));
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Box plot (median, quartile box, whiskers at the data range) of the FI
/// distributions, one row per input, sorted by median.
pub fn importance_svg(result: &ImportanceResult) -> Result<String> {
    let mut svg = header();
    let mut rows: Vec<(String, Vec<f64>)> = result
        .inputs
        .iter()
        .cloned()
        .zip(result.scores.iter().cloned())
        .collect();
    for (_, v) in rows.iter_mut() {
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    }
    let med = |v: &[f64]| {
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    };
    rows.sort_by(|a, b| med(&b.1).partial_cmp(&med(&a.1)).expect("finite"));

    let lo = rows
        .iter()
        .flat_map(|(_, v)| v.first().copied())
        .fold(f64::INFINITY, f64::min)
        .min(0.0);
    let hi = rows
        .iter()
        .flat_map(|(_, v)| v.last().copied())
        .fold(f64::NEG_INFINITY, f64::max)
        .max(1e-12);
    let row_h = (HEIGHT - 2.0 * MARGIN) / rows.len().max(1) as f64;

    for (i, (name, v)) in rows.iter().enumerate() {
        let cy = MARGIN + row_h * (i as f64 + 0.5);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let k = pos.floor() as usize;
            let w = pos - k as f64;
            v[k] * (1.0 - w) + v[(k + 1).min(v.len() - 1)] * w
        };
        let (x_min, x_q1, x_med, x_q3, x_max) = (
            scale(v[0], lo, hi, MARGIN, WIDTH - MARGIN),
            scale(q(0.25), lo, hi, MARGIN, WIDTH - MARGIN),
            scale(med(v), lo, hi, MARGIN, WIDTH - MARGIN),
            scale(q(0.75), lo, hi, MARGIN, WIDTH - MARGIN),
            scale(*v.last().expect("nonempty"), lo, hi, MARGIN, WIDTH - MARGIN),
        );
        svg.push_str(&format!(
            "<line x1=\"{x_min:.2}\" y1=\"{cy:.2}\" x2=\"{x_max:.2}\" y2=\"{cy:.2}\" stroke=\"#636363\"/>\n"
        ));
        svg.push_str(&format!(
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#fdae6b\" stroke=\"#e6550d\"/>\n",
            x_q1,
            cy - row_h * 0.3,
            (x_q3 - x_q1).max(0.5),
            row_h * 0.6
        ));
        svg.push_str(&format!(
            "<line x1=\"{x_med:.2}\" y1=\"{:.2}\" x2=\"{x_med:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"2\"/>\n",
            cy - row_h * 0.3,
            cy + row_h * 0.3
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"11\" dominant-baseline=\"middle\">{}</text>\n",
            MARGIN - 6.0,
            cy,
            name
        ));
    }
    let x_zero = scale(0.0, lo, hi, MARGIN, WIDTH - MARGIN);
    svg.push_str(&format!(
        "<line x1=\"{x_zero:.2}\" y1=\"{MARGIN}\" x2=\"{x_zero:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-dasharray=\"4\"/>\n",
        HEIGHT - MARGIN
    ));
    svg.push_str("</svg>\n");
    Ok(svg)
}
