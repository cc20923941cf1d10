//! Minimal SVG learning-curve plots: one line per group (mean across runs)
//! with a translucent min/max band.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::harness::runner::IterationRecord;

/// One plotted group: a label plus the per-run iteration records.
#[derive(Debug, Clone)]
pub struct CurveGroup {
    pub label: String,
    pub runs: Vec<Vec<IterationRecord>>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 24.0;
const MARGIN_B: f64 = 48.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// Render accuracy-vs-labeled-count curves as an SVG document.
pub fn plot_svg(groups: &[CurveGroup]) -> Result<String> {
    if groups.is_empty() || groups.iter().any(|g| g.runs.is_empty()) {
        return Err(Error::InvalidConfig("nothing to plot".into()));
    }

    // aggregate each group: per iteration index, mean and min/max accuracy
    struct Series {
        label: String,
        xs: Vec<f64>,
        mean: Vec<f64>,
        lo: Vec<f64>,
        hi: Vec<f64>,
    }
    let mut series = Vec::new();
    for group in groups {
        let len = group
            .runs
            .iter()
            .map(Vec::len)
            .min()
            .ok_or_else(|| Error::InvalidConfig("empty group".into()))?;
        if len == 0 {
            return Err(Error::InvalidConfig(format!(
                "group '{}' has an empty run",
                group.label
            )));
        }
        let mut xs = Vec::with_capacity(len);
        let mut mean = Vec::with_capacity(len);
        let mut lo = Vec::with_capacity(len);
        let mut hi = Vec::with_capacity(len);
        for i in 0..len {
            let accs: Vec<f64> = group.runs.iter().map(|r| r[i].test_accuracy).collect();
            xs.push(group.runs[0][i].labeled_count as f64);
            mean.push(accs.iter().sum::<f64>() / accs.len() as f64);
            lo.push(accs.iter().copied().fold(f64::INFINITY, f64::min));
            hi.push(accs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
        series.push(Series {
            label: group.label.clone(),
            xs,
            mean,
            lo,
            hi,
        });
    }

    let x_min = series.iter().flat_map(|s| s.xs.iter()).copied().fold(f64::INFINITY, f64::min);
    let x_max = series
        .iter()
        .flat_map(|s| s.xs.iter())
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
        .max(x_min + 1.0);
    let y_min = series
        .iter()
        .flat_map(|s| s.lo.iter())
        .copied()
        .fold(f64::INFINITY, f64::min)
        .min(1.0);
    let y_max = series
        .iter()
        .flat_map(|s| s.hi.iter())
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
        .max(y_min + 1e-6);

    let px = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y - y_min) / (y_max - y_min) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    )
    .unwrap();
    writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>").unwrap();

    // axes
    writeln!(
        svg,
        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        px(x_min),
        py(y_min),
        px(x_max),
        py(y_min)
    )
    .unwrap();
    writeln!(
        svg,
        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        px(x_min),
        py(y_min),
        px(x_min),
        py(y_max)
    )
    .unwrap();
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let x = x_min + frac * (x_max - x_min);
        let y = y_min + frac * (y_max - y_min);
        writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{:.0}</text>",
            px(x),
            HEIGHT - MARGIN_B + 16.0,
            x
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{:.3}</text>",
            MARGIN_L - 6.0,
            py(y) + 4.0,
            y
        )
        .unwrap();
    }
    writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">labeled points</text>",
        px((x_min + x_max) / 2.0),
        HEIGHT - 10.0
    )
    .unwrap();
    writeln!(
        svg,
        "<text x=\"14\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1})\">test accuracy</text>",
        py((y_min + y_max) / 2.0),
        py((y_min + y_max) / 2.0)
    )
    .unwrap();

    for (idx, s) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        // min/max band
        let mut band = String::new();
        for (x, y) in s.xs.iter().zip(&s.hi) {
            write!(band, "{:.2},{:.2} ", px(*x), py(*y)).unwrap();
        }
        for (x, y) in s.xs.iter().zip(&s.lo).rev() {
            write!(band, "{:.2},{:.2} ", px(*x), py(*y)).unwrap();
        }
        writeln!(
            svg,
            "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.15\" stroke=\"none\"/>",
            band.trim_end()
        )
        .unwrap();
        // mean line
        let mut line = String::new();
        for (x, y) in s.xs.iter().zip(&s.mean) {
            write!(line, "{:.2},{:.2} ", px(*x), py(*y)).unwrap();
        }
        writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            line.trim_end()
        )
        .unwrap();
        // legend
        let ly = MARGIN_T + 16.0 * idx as f64 + 8.0;
        writeln!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            WIDTH - MARGIN_R + 12.0,
            WIDTH - MARGIN_R + 34.0
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\">{}</text>",
            WIDTH - MARGIN_R + 40.0,
            ly + 4.0,
            xml_escape(&s.label)
        )
        .unwrap();
    }
    writeln!(svg, "</svg>").unwrap();
    Ok(svg)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
