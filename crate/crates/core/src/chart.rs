//! Static SVG charts: sweep results and robustness/consistency curves.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::experiment::SweepRow;
use crate::frlp::{table_r_grid, TABLE_C};
use crate::numerics::{c_lab, c_paw, r_lab, r_paw, unit_grid};

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const Y_MAX: f64 = 1.05;
const PALETTE: [&str; 10] =
    ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

fn px(x: f64) -> f64 {
    LEFT + x.clamp(0.0, 1.0) * (W - LEFT - RIGHT)
}

fn py(y: f64) -> f64 {
    TOP + (1.0 - y.clamp(0.0, Y_MAX) / Y_MAX) * (H - TOP - BOTTOM)
}

fn points(pts: &[(f64, f64)]) -> String {
    pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect::<Vec<_>>().join(" ")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Svg(String);

impl Svg {
    fn new(x_label: &str, y_label: &str) -> Self {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let (x0, x1, y0, y1) = (px(0.0), px(1.0), py(0.0), py(Y_MAX));
        for k in 0..=10 {
            let v = k as f64 / 10.0;
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{y0:.2}" x2="{:.2}" y2="{:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="middle">{v:.1}</text>"##,
                px(v),
                px(v),
                y0 + 4.0,
                px(v),
                y0 + 18.0
            );
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{x0:.2}" y2="{:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"##,
                x0 - 4.0,
                py(v),
                py(v),
                x0 - 7.0,
                py(v) + 4.0
            );
        }
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##,
            x1 - x0,
            y0 - y1
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            H - 10.0,
            escape(x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
        Svg(s)
    }

    fn legend(&mut self, k: usize, color: &str, label: &str) {
        let x = W - RIGHT + 15.0;
        let y = TOP + 15.0 + 18.0 * k as f64;
        let _ = writeln!(
            self.0,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 20.0,
            x + 26.0,
            y + 4.0,
            escape(label)
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], color: &str, dash: bool) {
        let dash = if dash { r#" stroke-dasharray="5,4""# } else { "" };
        let _ = writeln!(
            self.0,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
            points(pts)
        );
    }

    fn finish(mut self) -> String {
        self.0.push_str("</svg>\n");
        self.0
    }
}

/// Label used for a sweep series.
pub fn series_label(algorithm: &str, lambda: Option<f64>) -> String {
    match lambda {
        Some(l) => format!("{algorithm} λ={l:.3}"),
        None => algorithm.to_string(),
    }
}

/// Mean ratio per gamma with a min/max band, one series per
/// `(algorithm, lambda)` in first-appearance order.
pub fn sweep_chart(rows: &[SweepRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Parameter("no rows to chart".into()));
    }
    let mut order: Vec<String> = Vec::new();
    let mut series: BTreeMap<String, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        let label = series_label(&r.algorithm, r.lambda);
        if !series.contains_key(&label) {
            order.push(label.clone());
        }
        series.entry(label).or_default().entry(r.gamma.to_bits()).or_default().push(r.ratio);
    }
    let mut svg = Svg::new("noise γ", "ALG / OPT");
    for (k, label) in order.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut stats: Vec<(f64, f64, f64, f64)> = series[label]
            .iter()
            .map(|(&g, v)| {
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (f64::from_bits(g), mean, lo, hi)
            })
            .collect();
        stats.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut band: Vec<(f64, f64)> = stats.iter().map(|s| (s.0, s.3)).collect();
        band.extend(stats.iter().rev().map(|s| (s.0, s.2)));
        let _ = writeln!(
            svg.0,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
            points(&band)
        );
        let mean: Vec<(f64, f64)> = stats.iter().map(|s| (s.0, s.1)).collect();
        svg.polyline(&mean, color, false);
        for &(x, y) in &mean {
            let _ = writeln!(svg.0, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, px(x), py(y));
        }
        svg.legend(k, color, label);
    }
    Ok(svg.finish())
}

/// Robustness/consistency tradeoffs of LAB and PAW over `k` lambdas, the
/// two coin-flip segments and the LP upper-bound points.
pub fn curve_chart(k: usize) -> Result<String> {
    if k < 2 {
        return Err(Error::Parameter("need at least two grid points".into()));
    }
    let e = 1.0 - (-1.0f64).exp();
    let grid = unit_grid(k);
    let lab: Vec<(f64, f64)> = grid.iter().map(|&l| (r_lab(l), c_lab(l))).collect();
    let paw: Vec<(f64, f64)> = grid.iter().map(|&l| (r_paw(l), c_paw(l))).collect();
    let mut svg = Svg::new("robustness r", "consistency c");
    svg.polyline(&lab, PALETTE[0], false);
    svg.legend(0, PALETTE[0], "LAB");
    svg.polyline(&paw, PALETTE[1], false);
    svg.legend(1, PALETTE[1], "PAW");
    svg.polyline(&[(0.0, 1.0), (e, e)], PALETTE[7], true);
    svg.polyline(&[(0.5, 1.0), (e, e)], PALETTE[2], true);
    svg.legend(2, PALETTE[7], "coin flip (weighted)");
    svg.legend(3, PALETTE[2], "coin flip (unweighted)");
    for (r, c) in table_r_grid().into_iter().zip(TABLE_C) {
        let _ = writeln!(svg.0, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{}"/>"#, px(r), py(c), PALETTE[3]);
    }
    svg.legend(4, PALETTE[3], "LP upper bound");
    Ok(svg.finish())
}
