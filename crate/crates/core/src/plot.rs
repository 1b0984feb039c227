//! Per-figure plot data as CSV, plus a minimal SVG line chart rendered from
//! the same series.
//!
//! | file              | columns                         |
//! |-------------------|---------------------------------|
//! | `consensus.csv`   | `k,agent,weighted_error`        |
//! | `tracking.csv`    | `k,agent,s,xbar`                |
//! | `trajectories.csv`| `k,agent,x`                     |
//! | `cost.csv`        | `k,social_cost`                 |
//! | `compare-cost.csv`| `k,cost_a,cost_b`               |

use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;
use crate::metrics::ConsensusSeries;
use crate::trace::{join, RunTrace};

pub fn write_consensus_csv(series: &ConsensusSeries, mut out: impl Write) -> Result<()> {
    writeln!(out, "k,agent,weighted_error")?;
    for (k, row) in series.ks.iter().zip(&series.values) {
        for (i, e) in row.iter().enumerate() {
            writeln!(out, "{k},{i},{e}")?;
        }
    }
    Ok(())
}

pub fn write_tracking_csv(trace: &RunTrace, mut out: impl Write) -> Result<()> {
    writeln!(out, "k,agent,s,xbar")?;
    for r in &trace.records {
        let xbar = join(&trace.xbar(r));
        for i in 0..trace.n {
            writeln!(out, "{},{},{},{}", r.k, i, join(trace.agent_slice(&r.s, i)), xbar)?;
        }
    }
    Ok(())
}

pub fn write_trajectories_csv(trace: &RunTrace, mut out: impl Write) -> Result<()> {
    writeln!(out, "k,agent,x")?;
    for r in &trace.records {
        for i in 0..trace.n {
            writeln!(out, "{},{},{}", r.k, i, join(trace.agent_slice(&r.x, i)))?;
        }
    }
    Ok(())
}

pub fn write_cost_csv(series: &[(usize, f64)], mut out: impl Write) -> Result<()> {
    writeln!(out, "k,social_cost")?;
    for (k, c) in series {
        writeln!(out, "{k},{c}")?;
    }
    Ok(())
}

/// Joint cost series; rows are paired by position, so both traces must use
/// the same record stride.
pub fn write_compare_cost_csv(a: &[(usize, f64)], b: &[(usize, f64)], mut out: impl Write) -> Result<()> {
    writeln!(out, "k,cost_a,cost_b")?;
    for ((k, ca), (_, cb)) in a.iter().zip(b) {
        writeln!(out, "{k},{ca},{cb}")?;
    }
    Ok(())
}

/// One labelled polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// Axes, polylines and a legend. Non-finite points are dropped.
pub fn svg_line_chart(title: &str, x_label: &str, y_label: &str, lines: &[Line]) -> String {
    let (w, h, margin) = (720.0, 420.0, 60.0);
    let finite = lines
        .iter()
        .flat_map(|l| l.points.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| margin + (x - x0) / (x1 - x0) * (w - 2.0 * margin);
    let sy = |y: f64| h - margin - (y - y0) / (y1 - y0) * (h - 2.0 * margin);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<path d="M{m},{t} L{m},{b} L{r},{b}" stroke="black" fill="none"/>"#,
        m = margin,
        t = margin,
        b = h - margin,
        r = w - margin
    );
    for (val, y) in [(y0, h - margin), (y1, margin)] {
        let _ = writeln!(svg, r#"<text x="{}" y="{y}" text-anchor="end">{}</text>"#, margin - 4.0, tick(val));
    }
    for (val, x) in [(x0, margin), (x1, w - margin)] {
        let _ = writeln!(svg, r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#, h - margin + 16.0, tick(val));
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 16.0, escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (idx, line) in lines.iter().enumerate() {
        let colour = PALETTE[idx % PALETTE.len()];
        let pts: Vec<String> = line
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" stroke="{colour}" fill="none" stroke-width="1.2"/>"#,
            pts.join(" ")
        );
        let ly = margin + 14.0 * idx as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            w - margin - 110.0,
            w - margin - 90.0,
            w - margin - 85.0,
            ly + 4.0,
            escape(&line.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
