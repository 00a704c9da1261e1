//! Self-contained SVG charts: filled density contours and PML curves.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::risk::RiskReport;

const VIRIDIS: [(f64, f64, f64); 6] = [
    (68.0, 1.0, 84.0),
    (65.0, 68.0, 135.0),
    (42.0, 120.0, 142.0),
    (34.0, 168.0, 132.0),
    (122.0, 209.0, 81.0),
    (253.0, 231.0, 37.0),
];

const LINE_COLORS: [&str; 6] = [
    "#d62728", "#7f3c8d", "#1f77b4", "#ff7f0e", "#2ca02c", "#8c564b",
];

fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let i = (t.floor() as usize).min(VIRIDIS.len() - 2);
    let f = t - i as f64;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    let mix = |x: f64, y: f64| (x + f * (y - x)).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(a.0, b.0),
        mix(a.1, b.1),
        mix(a.2, b.2)
    )
}

pub fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Options for [`contour_svg`].
#[derive(Debug, Clone)]
pub struct ContourOptions {
    pub title: String,
    /// Number of filled bands between the grid minimum and maximum.
    pub levels: usize,
    /// Points in [0, 1]² drawn on top of the contours.
    pub points: Vec<[f64; 2]>,
}

impl Default for ContourOptions {
    fn default() -> Self {
        Self {
            title: String::new(),
            levels: 10,
            points: Vec::new(),
        }
    }
}

/// Filled contour plot of a midpoint grid as returned by `density_grid`
/// (entry `[i][j]` at ((i + ½)/r, (j + ½)/r); first coordinate horizontal).
pub fn contour_svg(grid: &[Vec<f64>], options: &ContourOptions) -> Result<String> {
    let r = grid.len();
    if r < 2 || grid.iter().any(|row| row.len() != r) {
        return Err(Error::Validation(
            "contour grid must be square with at least 2 rows".into(),
        ));
    }
    let levels = options.levels.max(1);
    let lo = grid.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let hi = grid
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let band = |v: f64| (((v - lo) / span * levels as f64).floor() as usize).min(levels - 1);

    let (margin, size, legend) = (50.0, 400.0, 70.0);
    let width = margin * 2.0 + size + legend;
    let height = margin * 2.0 + size;
    let cell = size / r as f64;
    let px = |u: f64| margin + u * size;
    let py = |u: f64| margin + (1.0 - u) * size;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    if !options.title.is_empty() {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="25" text-anchor="middle" font-size="14">{}</text>"#,
            margin + size / 2.0,
            escape_xml(&options.title)
        );
    }
    let _ = writeln!(out, r#"<g shape-rendering="crispEdges">"#);
    for (i, row) in grid.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let t = (band(v) as f64 + 0.5) / levels as f64;
            let _ = writeln!(
                out,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                px(i as f64 / r as f64),
                py((j + 1) as f64 / r as f64),
                cell + 0.05,
                cell + 0.05,
                color(t)
            );
        }
    }
    let _ = writeln!(out, "</g>");

    // Iso-lines at the band boundaries by marching squares on the midpoints.
    let _ = writeln!(
        out,
        r#"<g stroke="black" stroke-width="0.6" fill="none" stroke-opacity="0.6">"#
    );
    for level in 1..levels {
        let c = lo + span * level as f64 / levels as f64;
        let mut path = String::new();
        for i in 0..r - 1 {
            for j in 0..r - 1 {
                for (a, b) in marching_cell(grid, i, j, c) {
                    let to_px =
                        |(x, y): (f64, f64)| (px((x + 0.5) / r as f64), py((y + 0.5) / r as f64));
                    let (ax, ay) = to_px(a);
                    let (bx, by) = to_px(b);
                    let _ = write!(path, "M{ax:.2},{ay:.2}L{bx:.2},{by:.2}");
                }
            }
        }
        if !path.is_empty() {
            let _ = writeln!(out, r#"<path d="{path}"/>"#);
        }
    }
    let _ = writeln!(out, "</g>");

    if !options.points.is_empty() {
        let _ = writeln!(out, r#"<g fill="white" stroke="black" stroke-width="0.8">"#);
        for p in &options.points {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3"/>"#,
                px(p[0].clamp(0.0, 1.0)),
                py(p[1].clamp(0.0, 1.0))
            );
        }
        let _ = writeln!(out, "</g>");
    }

    axes_frame(&mut out, margin, size);
    for k in 0..=5 {
        let u = k as f64 / 5.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{u:.1}</text>"#,
            px(u),
            margin + size + 16.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{u:.1}</text>"#,
            margin - 6.0,
            py(u) + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">u1</text>"#,
        margin + size / 2.0,
        height - 12.0
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">u2</text>"#,
        margin + size / 2.0,
        margin + size / 2.0
    );

    // Colour key.
    let key_x = margin + size + 20.0;
    let step = size / levels as f64;
    for level in 0..levels {
        let _ = writeln!(
            out,
            r#"<rect x="{key_x}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            py((level + 1) as f64 / levels as f64),
            step + 0.05,
            color((level as f64 + 0.5) / levels as f64)
        );
    }
    for (u, v) in [(0.0, lo), (1.0, hi)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.1}">{v:.3}</text>"#,
            key_x + 20.0,
            py(u) + 4.0
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Line segments of the level-`c` iso-line inside the square with lower-left
/// corner (i, j), in grid coordinates.
fn marching_cell(grid: &[Vec<f64>], i: usize, j: usize, c: f64) -> Vec<((f64, f64), (f64, f64))> {
    let v = [
        grid[i][j],
        grid[i + 1][j],
        grid[i + 1][j + 1],
        grid[i][j + 1],
    ];
    let corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
    let case = v
        .iter()
        .enumerate()
        .fold(0, |acc, (k, &x)| acc | (usize::from(x > c) << k));
    if case == 0 || case == 15 {
        return Vec::new();
    }
    let edge = |k: usize| {
        let (a, b) = (k, (k + 1) % 4);
        let t = (c - v[a]) / (v[b] - v[a]);
        let (x0, y0) = corners[a];
        let (x1, y1) = corners[b];
        (i as f64 + x0 + t * (x1 - x0), j as f64 + y0 + t * (y1 - y0))
    };
    // Edges crossed, paired in order around the square; saddles resolved by the centre value.
    let crossed: Vec<usize> = (0..4)
        .filter(|&k| (v[k] > c) != (v[(k + 1) % 4] > c))
        .collect();
    if crossed.len() == 2 {
        return vec![(edge(crossed[0]), edge(crossed[1]))];
    }
    let centre_above = v.iter().sum::<f64>() / 4.0 > c;
    let corner0_above = v[0] > c;
    if centre_above == corner0_above {
        vec![(edge(0), edge(1)), (edge(2), edge(3))]
    } else {
        vec![(edge(3), edge(0)), (edge(1), edge(2))]
    }
}

fn axes_frame(out: &mut String, margin: f64, size: f64) {
    let _ = writeln!(
        out,
        r#"<rect x="{margin}" y="{margin}" width="{size}" height="{size}" fill="none" stroke="black"/>"#
    );
}

fn nice_step(span: f64, target_ticks: usize) -> f64 {
    let raw = span / target_ticks as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

/// Line chart of PML against return period on a logarithmic period axis.
/// Losses are shown in units of `unit` (e.g. 1e6 for millions).
pub fn pml_svg(report: &RiskReport, unit: f64, unit_label: &str) -> Result<String> {
    let periods = &report.return_periods;
    if periods.is_empty() || report.scenarios.is_empty() {
        return Err(Error::Validation("nothing to plot".into()));
    }
    if periods.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::Validation("return periods must be positive".into()));
    }
    let mut order: Vec<usize> = (0..periods.len()).collect();
    order.sort_by(|&a, &b| periods[a].total_cmp(&periods[b]));
    let t_min = periods[order[0]];
    let t_max = periods[order[order.len() - 1]];
    let (log_lo, log_hi) = if t_max > t_min {
        (t_min.log10(), t_max.log10())
    } else {
        (t_min.log10() - 0.5, t_min.log10() + 0.5)
    };
    let values = report
        .scenarios
        .iter()
        .flat_map(|s| s.pml.iter().map(|v| v / unit));
    let y_max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let y_min = values.fold(f64::INFINITY, f64::min);
    let step = nice_step((y_max - y_min).max(y_max.abs() * 0.1).max(1e-12), 6);
    let y_lo = (y_min / step).floor() * step;
    let y_hi = ((y_max / step).ceil() * step).max(y_lo + step);

    let (left, right, top, bottom) = (70.0, 170.0, 40.0, 50.0);
    let (w, h) = (480.0, 320.0);
    let width = left + w + right;
    let height = top + h + bottom;
    let px = |t: f64| left + (t.log10() - log_lo) / (log_hi - log_lo) * w;
    let py = |v: f64| top + (1.0 - (v - y_lo) / (y_hi - y_lo)) * h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">Probable maximum loss</text>"#,
        left + w / 2.0
    );

    // Decade grid with 1-2-5 ticks.
    let _ = writeln!(out, r##"<g stroke="#dddddd">"##);
    let mut ticks = Vec::new();
    let mut decade = 10f64.powf(log_lo.floor());
    while decade <= 10f64.powf(log_hi) * 1.0001 {
        for f in [1.0, 2.0, 5.0] {
            let t = decade * f;
            if t.log10() >= log_lo - 1e-9 && t.log10() <= log_hi + 1e-9 {
                ticks.push(t);
            }
        }
        decade *= 10.0;
    }
    for &t in &ticks {
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{}"/>"#,
            top + h,
            x = px(t)
        );
    }
    let mut y = y_lo;
    let mut y_ticks = Vec::new();
    while y <= y_hi + step * 1e-9 {
        y_ticks.push(y);
        let _ = writeln!(
            out,
            r#"<line x1="{left}" y1="{yy:.2}" x2="{}" y2="{yy:.2}"/>"#,
            left + w,
            yy = py(y)
        );
        y += step;
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(
        out,
        r#"<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="black"/>"#
    );
    for &t in &ticks {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            px(t),
            top + h + 16.0,
            t
        );
    }
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10()).ceil() as usize
    };
    for &v in &y_ticks {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{v:.decimals$}</text>"#,
            left - 6.0,
            py(v) + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">return period (years, log scale)</text>"#,
        left + w / 2.0,
        height - 10.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{c}" text-anchor="middle" transform="rotate(-90 16 {c})">PML ({})</text>"#,
        escape_xml(unit_label),
        c = top + h / 2.0
    );

    for (k, s) in report.scenarios.iter().enumerate() {
        let colour = LINE_COLORS[k % LINE_COLORS.len()];
        let pts: Vec<String> = order
            .iter()
            .map(|&i| format!("{:.2},{:.2}", px(periods[i]), py(s.pml[i] / unit)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let ly = top + 10.0 + 18.0 * k as f64;
        let lx = left + w + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape_xml(&s.label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
