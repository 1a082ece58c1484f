//! Static SVG line charts of experiment tables: per-series means with a
//! `±2 sd` band.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{AppError, Result};
use crate::experiment::{BenchRow, CurveRow, ResultRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// F1 against sample size, from `results.csv`.
    F1,
    /// Edge count against sample size, from `results.csv`.
    Edges,
    /// Held-out log-likelihood against mean edge count, from a curve table.
    CvCurve,
    /// Mean seconds against `p`, from `bench.csv`.
    Time,
}

impl std::str::FromStr for PlotKind {
    type Err = AppError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f1" => Ok(PlotKind::F1),
            "edges" => Ok(PlotKind::Edges),
            "cvcurve" => Ok(PlotKind::CvCurve),
            "time" => Ok(PlotKind::Time),
            _ => Err(AppError::Usage(format!("unknown plot kind {s:?}"))),
        }
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path, expected: &[&str]) -> Result<Table> {
        let mut r = csv::Reader::from_path(path).map_err(|e| AppError::format(path, e.to_string()))?;
        let header: Vec<String> = r.headers().map_err(|e| AppError::format(path, e.to_string()))?.iter().map(String::from).collect();
        if header != expected {
            return Err(AppError::format(path, format!("expected columns {}, found {}", expected.join(","), header.join(","))));
        }
        let rows = r.records().collect::<Result<Vec<_>, _>>().map_err(|e| AppError::format(path, e.to_string()))?;
        if rows.is_empty() {
            return Err(AppError::format(path, "no data rows"));
        }
        Ok(Table { header, rows })
    }

    fn col(&self, name: &str) -> usize {
        self.header.iter().position(|h| h == name).expect("column checked on read")
    }

    fn num(&self, path: &Path, row: &csv::StringRecord, name: &str) -> Result<f64> {
        let field = &row[self.col(name)];
        field.parse().map_err(|_| AppError::format(path, format!("column {name}: not a number: {field:?}")))
    }
}

struct Series {
    name: String,
    /// `(x, values at x)` in first-seen order.
    points: Vec<(f64, Vec<f64>)>,
}

fn add(series: &mut Vec<Series>, name: String, x: f64, y: f64) {
    let idx = match series.iter().position(|s| s.name == name) {
        Some(i) => i,
        None => {
            series.push(Series { name, points: Vec::new() });
            series.len() - 1
        }
    };
    let pts = &mut series[idx].points;
    match pts.iter_mut().find(|(px, _)| *px == x) {
        Some((_, ys)) => ys.push(y),
        None => pts.push((x, vec![y])),
    }
}

fn collect(path: &Path, kind: PlotKind) -> Result<(Vec<Series>, &'static str, &'static str)> {
    let mut series = Vec::new();
    match kind {
        PlotKind::F1 | PlotKind::Edges => {
            let t = Table::read(path, &ResultRow::HEADER)?;
            let (kc, pc, mc) = (t.col("kind"), t.col("p"), t.col("method"));
            let first = (&t.rows[0][kc], &t.rows[0][pc]);
            let mixed = t.rows.iter().any(|r| (&r[kc], &r[pc]) != first);
            let metric = if kind == PlotKind::F1 { "f1" } else { "edges" };
            for r in &t.rows {
                let name = if mixed { format!("{} {} p={}", &r[mc], &r[kc], &r[pc]) } else { r[mc].to_string() };
                add(&mut series, name, t.num(path, r, "n")?, t.num(path, r, metric)?);
            }
            Ok((series, "n", if kind == PlotKind::F1 { "F1" } else { "edges" }))
        }
        PlotKind::CvCurve => {
            let t = Table::read(path, &CurveRow::HEADER)?;
            for r in &t.rows {
                let (x, y) = (t.num(path, r, "edges_mean")?, t.num(path, r, "holdout_ll_mean")?);
                if x.is_finite() && y.is_finite() {
                    add(&mut series, r[t.col("method")].to_string(), x, y);
                }
            }
            Ok((series, "mean edges", "held-out log-likelihood"))
        }
        PlotKind::Time => {
            let t = Table::read(path, &BenchRow::HEADER)?;
            let nc = t.col("n");
            let mixed = t.rows.iter().any(|r| r[nc] != t.rows[0][nc]);
            for r in &t.rows {
                let m = &r[t.col("method")];
                let name = if mixed { format!("{m} n={}", &r[nc]) } else { m.to_string() };
                add(&mut series, name, t.num(path, r, "p")?, t.num(path, r, "seconds_mean")?);
            }
            Ok((series, "p", "seconds"))
        }
    }
}

/// `(x, mean, sd)` sorted by `x`; sd is the sample deviation, 0 for one value.
fn summarize(s: &Series) -> Vec<(f64, f64, f64)> {
    let mut out: Vec<(f64, f64, f64)> = s
        .points
        .iter()
        .map(|(x, ys)| {
            let n = ys.len() as f64;
            let mean = ys.iter().sum::<f64>() / n;
            let var = if ys.len() > 1 { ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            (*x, mean, var.sqrt())
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

const PALETTE: [&str; 8] = ["#1b6ca8", "#d1495b", "#2e933c", "#edae49", "#6a4c93", "#00798c", "#8d6346", "#555555"];
const W: f64 = 680.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|i| i as f64 * step).collect(), decimals)
}

/// Renders the chart for `results` as SVG text.
pub fn render(results: &Path, kind: PlotKind) -> Result<String> {
    let (series, xlabel, ylabel) = collect(results, kind)?;
    let stats: Vec<Vec<(f64, f64, f64)>> = series.iter().map(summarize).collect();
    let all = stats.iter().flatten();
    if all.clone().next().is_none() {
        return Err(AppError::format(results, "no finite points to plot"));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, m, sd) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(m - 2.0 * sd);
        y1 = y1.max(m + 2.0 * sd);
    }
    let (x0, x1) = padded(x0, x1);
    let (y0, y1) = padded(y0, y1);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##);
    let (xt, xd) = ticks(x0, x1);
    for t in xt {
        let x = sx(t);
        let _ = writeln!(svg, r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/>"##, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(svg, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{t:.xd$}</text>"#, TOP + ph + 18.0);
    }
    let (yt, yd) = ticks(y0, y1);
    for t in yt {
        let y = sy(t);
        let _ = writeln!(svg, r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#333"/>"##, LEFT - 5.0);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{t:.yd$}</text>"#, LEFT - 8.0, y + 4.0);
    }
    let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xlabel}</text>"#, LEFT + pw / 2.0, H - 12.0);
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{ylabel}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (i, (s, pts)) in series.iter().zip(&stats).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if pts.iter().any(|p| p.2 > 0.0) {
            let upper = pts.iter().map(|&(x, m, sd)| format!("{:.2},{:.2}", sx(x), sy(m + 2.0 * sd)));
            let lower = pts.iter().rev().map(|&(x, m, sd)| format!("{:.2},{:.2}", sx(x), sy(m - 2.0 * sd)));
            let band: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(svg, r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, band.join(" "));
        }
        let line: Vec<String> = pts.iter().map(|&(x, m, _)| format!("{:.2},{:.2}", sx(x), sy(m))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        for &(x, m, _) in pts {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(m));
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = W - RIGHT + 15.0;
        let _ = writeln!(svg, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&s.name));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_steps_are_round() {
        assert_eq!(ticks(0.0, 1.0), (vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0], 1));
        let (t, d) = ticks(51.0, 1275.0);
        assert_eq!((t[0], d), (500.0, 0));
    }

    #[test]
    fn summary_statistics() {
        let s = Series { name: "a".into(), points: vec![(2.0, vec![1.0, 3.0]), (1.0, vec![5.0])] };
        let out = summarize(&s);
        assert_eq!(out[0], (1.0, 5.0, 0.0));
        assert_eq!(out[1].1, 2.0);
        assert!((out[1].2 - 2f64.sqrt()).abs() < 1e-15);
    }
}
