//! Static SVG line charts for convergence traces: error against rounds or
//! against transmitted bits, on a log-scale y axis. Output is a single
//! self-contained file with no external references.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum XAxis {
    Rounds,
    Bits,
}

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Reads the error column of a run trace against the chosen x axis.
/// Rows with nonpositive error are dropped (they cannot be drawn on a log
/// axis).
pub fn read_error_series(path: &Path, x_axis: XAxis) -> Result<Series> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading trace {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("trace CSV is empty")?;
    let columns: Vec<&str> = header.split(',').collect();
    let find = |name: &str| {
        columns
            .iter()
            .position(|c| *c == name)
            .with_context(|| format!("trace {} has no \"{name}\" column", path.display()))
    };
    let x_col = match x_axis {
        XAxis::Rounds => find("t")?,
        XAxis::Bits => find("bits")?,
    };
    let y_col = find("error")?;
    let mut points = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |col: usize| -> Result<f64> {
            fields
                .get(col)
                .with_context(|| format!("row {} is short", idx + 2))?
                .parse::<f64>()
                .with_context(|| format!("row {} has a malformed number", idx + 2))
        };
        let x = parse(x_col)?;
        let y = parse(y_col)?;
        if y > 0.0 && y.is_finite() {
            points.push((x, y));
        }
    }
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(Series { label, points })
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-3..1e7).contains(&a) && (v.round() - v).abs() < 1e-9 * a.max(1.0) {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.3e}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders a log-y line chart; fails rather than drawing an empty plot.
pub fn render(series: &[Series], x_label: &str, y_label: &str) -> Result<String> {
    let drawable: Vec<&Series> = series.iter().filter(|s| !s.points.is_empty()).collect();
    if drawable.is_empty() {
        bail!("nothing to plot: every series is empty");
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &drawable {
        for &(x, y) in &s.points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    if x0 == x1 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let (mut ly0, mut ly1) = (y0.log10(), y1.log10());
    if (ly1 - ly0).abs() < 1e-12 {
        ly0 -= 0.5;
        ly1 += 0.5;
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| MARGIN_TOP + (1.0 - (y.log10() - ly0) / (ly1 - ly0)) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));

    // Decade gridlines and y tick labels.
    let first_decade = ly0.ceil() as i64;
    let last_decade = ly1.floor() as i64;
    let mut decades: Vec<i64> = (first_decade..=last_decade).collect();
    if decades.len() > 12 {
        let stride = decades.len().div_ceil(12);
        decades = decades.into_iter().step_by(stride).collect();
    }
    if decades.is_empty() {
        decades = vec![];
    }
    for &d in &decades {
        let y = py(10f64.powi(d as i32));
        svg.push_str(&format!(
            "<line x1=\"{MARGIN_LEFT}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
            WIDTH - MARGIN_RIGHT
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">1e{d}</text>\n",
            MARGIN_LEFT - 8.0,
            y + 4.0
        ));
    }

    // X ticks: five evenly spaced values.
    for i in 0..=4 {
        let x = x0 + (x1 - x0) * i as f64 / 4.0;
        let xp = px(x);
        svg.push_str(&format!(
            "<line x1=\"{xp:.2}\" y1=\"{:.2}\" x2=\"{xp:.2}\" y2=\"{:.2}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
            MARGIN_TOP,
            HEIGHT - MARGIN_BOTTOM
        ));
        svg.push_str(&format!(
            "<text x=\"{xp:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
            HEIGHT - MARGIN_BOTTOM + 20.0,
            fmt_tick(x)
        ));
    }

    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{:.2}\" \
         stroke=\"black\" stroke-width=\"1.5\"/>\n",
        HEIGHT - MARGIN_BOTTOM
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" \
         stroke=\"black\" stroke-width=\"1.5\"/>\n",
        HEIGHT - MARGIN_BOTTOM,
        WIDTH - MARGIN_RIGHT,
        HEIGHT - MARGIN_BOTTOM
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        xml_escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{:.2}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 18 {:.2})\">{}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        xml_escape(y_label)
    ));

    // Series.
    for (idx, s) in drawable.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        if s.points.len() == 1 {
            let (x, y) = s.points[0];
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                px(x),
                py(y)
            ));
        } else {
            let coords: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" \
                 stroke-width=\"1.8\"/>\n",
                coords.join(" ")
            ));
        }
    }

    // Legend, top right.
    let legend_x = WIDTH - MARGIN_RIGHT - 220.0;
    for (idx, s) in drawable.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let y = MARGIN_TOP + 16.0 + idx as f64 * 20.0;
        svg.push_str(&format!(
            "<line x1=\"{legend_x:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
             stroke=\"{color}\" stroke-width=\"2.5\"/>\n",
            legend_x + 26.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>\n",
            legend_x + 34.0,
            y + 4.0,
            xml_escape(&s.label)
        ));
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Reads the given traces and writes one chart. Nothing is written when
/// rendering fails.
pub fn plot_files(paths: &[PathBuf], x_axis: XAxis, out: &Path) -> Result<()> {
    if paths.is_empty() {
        bail!("no trace files given");
    }
    let series: Vec<Series> = paths
        .iter()
        .map(|p| read_error_series(p, x_axis))
        .collect::<Result<_>>()?;
    let x_label = match x_axis {
        XAxis::Rounds => "rounds",
        XAxis::Bits => "transmitted bits",
    };
    let svg = render(&series, x_label, "convergence error")?;
    fs::write(out, svg).with_context(|| format!("writing plot {}", out.display()))?;
    Ok(())
}
