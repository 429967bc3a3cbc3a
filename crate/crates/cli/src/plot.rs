//! Static SVG rendering of record tables.

use std::fmt::Write;

use trigreg::experiments::{summarize, RecordTable};

use crate::error::{CliError, CliResult};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn column(table: &RecordTable, name: &str) -> CliResult<Vec<f64>> {
    table
        .column(name)
        .map_err(|_| CliError::Core(trigreg::Error::Parse(format!("unknown column `{name}`"))))
}

/// Values on the plotting scale; `None` for entries that cannot be drawn.
fn to_scale(v: f64, log: bool) -> Option<f64> {
    match (v.is_finite(), log) {
        (false, _) => None,
        (true, true) if v > 0.0 => Some(v.log10()),
        (true, true) => None,
        (true, false) => Some(v),
    }
}

fn label(v: f64, log: bool) -> String {
    let x = if log { 10f64.powf(v) } else { v };
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10();
    if !(-3.0..5.0).contains(&mag) {
        format!("{x:.1e}")
    } else {
        let digits = (3.0 - mag.floor()).clamp(0.0, 6.0) as usize;
        let s = format!("{x:.digits$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    }
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let base = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * base)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * base);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), mut y: (f64, f64)) -> Self {
        if y.1 - y.0 <= 0.0 {
            let pad = if y.0 == 0.0 { 1.0 } else { 0.5 * y.0.abs() };
            y = (y.0 - pad, y.1 + pad);
        } else {
            let pad = 0.05 * (y.1 - y.0);
            y = (y.0 - pad, y.1 + pad);
        }
        Frame { x, y }
    }

    fn px(&self, v: f64) -> f64 {
        let span = self.x.1 - self.x.0;
        let t = if span > 0.0 {
            (v - self.x.0) / span
        } else {
            0.5
        };
        LEFT + t * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }

    fn open(&self, out: &mut String, title: &str, y_label: &str, log: bool) {
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            out,
            r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        );
        let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
        let _ = writeln!(
            out,
            r#"<path d="M{x0} {y0} L{x0} {y1} L{x1} {y1}" fill="none" stroke="black"/>"#
        );
        for t in nice_ticks(self.y.0, self.y.1) {
            let y = self.py(t);
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                x0,
                x0 - 6.0,
                y + 4.0,
                label(t, log)
            );
        }
        let name = if log {
            format!("{y_label} (log scale)")
        } else {
            y_label.to_string()
        };
        let _ = writeln!(
            out,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(&name)
        );
    }
}

/// Box per column: quartile box, median line, whiskers at the last points within 1.5 IQR, crosses beyond.
pub fn boxplot_svg(
    table: &RecordTable,
    columns: &[String],
    log: bool,
    title: &str,
) -> CliResult<String> {
    let mut series = Vec::with_capacity(columns.len());
    for c in columns {
        let vals: Vec<f64> = column(table, c)?
            .into_iter()
            .filter_map(|v| to_scale(v, log))
            .collect();
        series.push((c, vals));
    }
    let all = series.iter().flat_map(|(_, v)| v.iter().copied());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
    let frame = Frame::new((0.0, series.len() as f64), (lo, hi));
    let mut out = String::new();
    frame.open(&mut out, title, "value", log);
    let slot = (WIDTH - LEFT - RIGHT) / series.len().max(1) as f64;
    let half = (0.3 * slot).min(40.0);
    for (k, (name, vals)) in series.iter().enumerate() {
        let cx = frame.px(k as f64 + 0.5);
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(out, r#"<g class="box" data-column="{}">"#, escape(name));
        if let Some(s) = summarize(vals) {
            let iqr = s.q75 - s.q25;
            let (flo, fhi) = (s.q25 - 1.5 * iqr, s.q75 + 1.5 * iqr);
            let inside = vals.iter().copied().filter(|v| *v >= flo && *v <= fhi);
            let (wlo, whi) = inside.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
            let (top, bot) = (frame.py(s.q75), frame.py(s.q25));
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.25" stroke="{color}"/>"#,
                cx - half,
                2.0 * half,
                bot - top
            );
            let _ = writeln!(
                out,
                r#"<line class="median" x1="{:.2}" y1="{m:.2}" x2="{:.2}" y2="{m:.2}" stroke="{color}" stroke-width="2"/>"#,
                cx - half,
                cx + half,
                m = frame.py(s.median)
            );
            for (from, to) in [(s.q75, whi), (s.q25, wlo)] {
                let (a, b) = (frame.py(from), frame.py(to));
                let _ = writeln!(
                    out,
                    r#"<line class="whisker" x1="{cx:.2}" y1="{a:.2}" x2="{cx:.2}" y2="{b:.2}" stroke="{color}"/><line x1="{:.2}" y1="{b:.2}" x2="{:.2}" y2="{b:.2}" stroke="{color}"/>"#,
                    cx - half / 2.0,
                    cx + half / 2.0
                );
            }
            for v in vals.iter().filter(|v| **v < flo || **v > fhi) {
                let y = frame.py(*v);
                let _ = writeln!(
                    out,
                    r#"<path class="outlier" d="M{:.2} {:.2} L{:.2} {:.2} M{:.2} {:.2} L{:.2} {:.2}" stroke="{color}"/>"#,
                    cx - 4.0,
                    y - 4.0,
                    cx + 4.0,
                    y + 4.0,
                    cx - 4.0,
                    y + 4.0,
                    cx + 4.0,
                    y - 4.0
                );
            }
        }
        let _ = writeln!(out, "</g>");
        let _ = writeln!(
            out,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            HEIGHT - BOTTOM + 20.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Per-group column means against the (sorted) values of `group`, one polyline per column.
pub fn line_svg(
    table: &RecordTable,
    group: &str,
    columns: &[String],
    log: bool,
    title: &str,
) -> CliResult<String> {
    let g = column(table, group)?;
    let mut keys: Vec<f64> = g.iter().copied().filter(|v| v.is_finite()).collect();
    keys.sort_by(f64::total_cmp);
    keys.dedup();
    let mut series = Vec::with_capacity(columns.len());
    for c in columns {
        let v = column(table, c)?;
        let pts: Vec<(f64, Option<f64>)> = keys
            .iter()
            .map(|k| {
                let sel: Vec<f64> = g
                    .iter()
                    .zip(&v)
                    .filter(|(gv, _)| *gv == k)
                    .map(|(_, x)| *x)
                    .collect();
                let mean = summarize(&sel).map_or(f64::NAN, |s| s.mean);
                (*k, to_scale(mean, log))
            })
            .collect();
        series.push((c, pts));
    }
    let ys = series
        .iter()
        .flat_map(|(_, p)| p.iter().filter_map(|(_, y)| *y));
    let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
    let x = match (keys.first(), keys.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => (0.0, 1.0),
    };
    let frame = Frame::new(x, (lo, hi));
    let mut out = String::new();
    frame.open(&mut out, title, "mean", log);
    for t in &keys {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#,
            frame.px(*t),
            HEIGHT - BOTTOM + 16.0,
            label(*t, false)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - BOTTOM + 40.0,
        escape(group)
    );
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(out, r#"<g class="series" data-column="{}">"#, escape(name));
        // non-finite means break the curve
        for run in pts.split(|(_, y)| y.is_none()).filter(|r| !r.is_empty()) {
            let coords: Vec<String> = run
                .iter()
                .map(|(xv, yv)| {
                    format!(
                        "{:.2},{:.2}",
                        frame.px(*xv),
                        frame.py(yv.unwrap_or_default())
                    )
                })
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                coords.join(" ")
            );
        }
        for (xv, yv) in pts.iter().filter_map(|(a, b)| b.map(|y| (*a, y))) {
            let _ = writeln!(
                out,
                r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                frame.px(xv),
                frame.py(yv)
            );
        }
        let _ = writeln!(out, "</g>");
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            WIDTH - RIGHT - 150.0,
            WIDTH - RIGHT - 125.0,
            WIDTH - RIGHT - 118.0,
            ly + 4.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
