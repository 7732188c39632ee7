//! Static SVG line charts: median line over two shaded percentile bands.

use std::fmt::Write;

use postln_lens::lens::stage_label;

#[derive(Debug, Clone, PartialEq)]
pub struct BandRow {
    pub stage: i32,
    /// p5, p25, p50, p75, p95; `None` for a stage with no defined values.
    pub band: Option<[f64; 5]>,
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 48.0;

fn polygon(points: &[(f64, f64)]) -> String {
    points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect::<Vec<_>>().join(" ")
}

pub fn render(name: &str, rows: &[BandRow], layers: usize) -> String {
    let defined: Vec<(usize, [f64; 5])> = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.band.map(|b| (i, b)))
        .collect();
    let (mut lo, mut hi) = defined
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, b)| (lo.min(b[0]), hi.max(b[4])));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let n = rows.len().max(2);
    let x = |i: usize| LEFT + (W - LEFT - RIGHT) * i as f64 / (n - 1) as f64;
    let y = |v: f64| TOP + (H - TOP - BOTTOM) * (hi - v) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{name}</text>"#, W / 2.0);

    // Axes and ticks.
    let (x0, x1, yb) = (LEFT, W - RIGHT, H - BOTTOM);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{yb}" x2="{x1}" y2="{yb}" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{TOP}" x2="{x0}" y2="{yb}" stroke="black"/>"#);
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            x(i),
            yb + 18.0,
            stage_label(r.stage, layers)
        );
    }
    for t in 0..=4 {
        let v = lo + (hi - lo) * t as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{v:.3}</text>"#,
            LEFT - 6.0,
            y(v) + 4.0
        );
    }

    // Contiguous runs of defined stages become separate band segments.
    let mut runs: Vec<Vec<(usize, [f64; 5])>> = Vec::new();
    for &(i, b) in &defined {
        match runs.last_mut() {
            Some(run) if run.last().is_some_and(|&(j, _)| j + 1 == i) => run.push((i, b)),
            _ => runs.push(vec![(i, b)]),
        }
    }
    for run in &runs {
        for (lo_idx, hi_idx, fill) in [(0, 4, "#c6dbef"), (1, 3, "#6baed6")] {
            let mut pts: Vec<(f64, f64)> = run.iter().map(|&(i, b)| (x(i), y(b[hi_idx]))).collect();
            pts.extend(run.iter().rev().map(|&(i, b)| (x(i), y(b[lo_idx]))));
            let _ = writeln!(svg, r#"<polygon points="{}" fill="{fill}" stroke="none"/>"#, polygon(&pts));
        }
        let line: Vec<(f64, f64)> = run.iter().map(|&(i, b)| (x(i), y(b[2]))).collect();
        let _ = writeln!(
            svg,
            r##"<polyline points="{}" fill="none" stroke="#08306b" stroke-width="2"/>"##,
            polygon(&line)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
