//! Deterministic SVG line plots and heatmaps.
//!
//! Output depends only on the input values: coordinates are printed with
//! fixed precision and there are no timestamps or random ids, so equal
//! inputs give byte-identical files.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const TICKS: usize = 5;

/// Line colours, assigned to series in order and cycled.
pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Colormap stops at `t = 0, 0.25, 0.5, 0.75, 1`, interpolated linearly
/// in RGB (samples of viridis, dark purple to yellow).
pub const COLORMAP: [(u8, u8, u8); 5] = [(68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37)];

/// Fill for non-finite heatmap cells.
pub const MISSING_COLOR: &str = "#bfbfbf";

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("malformed CSV at line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("invalid plot input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, PlotError>;

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Maps `t` in `[0, 1]` (clamped) to a `#rrggbb` colour.
pub fn colormap(t: f64) -> String {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let pos = t * (COLORMAP.len() - 1) as f64;
    let i = (pos.floor() as usize).min(COLORMAP.len() - 2);
    let f = pos - i as f64;
    let (a, b) = (COLORMAP[i], COLORMAP[i + 1]);
    let mix = |x: u8, y: u8| (x as f64 + (y as f64 - x as f64) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Range of the finite values, widened when degenerate.
fn extent(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return None;
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.5 };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

/// Shortest fixed-precision label that distinguishes ticks `step` apart.
fn tick_label(v: f64, step: f64) -> String {
    let digits = if step >= 1.0 { 0 } else { (-step.log10()).ceil().min(12.0) as usize + 1 };
    let s = format!("{v:.digits$}");
    if s.starts_with('-') && s.trim_start_matches(['-', '0', '.']).is_empty() {
        s[1..].to_string()
    } else {
        s
    }
}

fn header(out: &mut String, title: &str) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##).unwrap();
    writeln!(
        out,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_LEFT + (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / 2.0,
        escape(title)
    )
    .unwrap();
}

/// Line plot of one or more series with axes, ticks and a legend.
pub fn line_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<String> {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = extent(all().map(|p| p.0)).ok_or_else(|| PlotError::Invalid("no finite x values".into()))?;
    let (y0, y1) = extent(all().map(|p| p.1)).ok_or_else(|| PlotError::Invalid("no finite y values".into()))?;
    let (pw, ph) = (WIDTH - MARGIN_LEFT - MARGIN_RIGHT, HEIGHT - MARGIN_TOP - MARGIN_BOTTOM);
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut out = String::new();
    header(&mut out, title);
    writeln!(
        out,
        r##"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" fill="none" stroke="#000000"/>"##
    )
    .unwrap();
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        writeln!(
            out,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#000000"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            MARGIN_TOP + ph,
            MARGIN_TOP + ph + 5.0,
            MARGIN_TOP + ph + 18.0,
            tick_label(xv, (x1 - x0) / TICKS as f64)
        )
        .unwrap();
        writeln!(
            out,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{MARGIN_LEFT}" y2="{py:.2}" stroke="#000000"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            MARGIN_LEFT - 5.0,
            MARGIN_LEFT - 8.0,
            py + 4.0,
            tick_label(yv, (y1 - y0) / TICKS as f64)
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        MARGIN_TOP + ph / 2.0,
        MARGIN_TOP + ph / 2.0,
        escape(y_label)
    )
    .unwrap();
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        )
        .unwrap();
        let ly = MARGIN_TOP + 10.0 + 18.0 * k as f64;
        let lx = WIDTH - MARGIN_RIGHT + 10.0;
        writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            escape(&s.label)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Heatmap of a row-major `rows × cols` field; row 0 is drawn at the top.
/// Values are normalized to the finite range and coloured with [`colormap`].
pub fn heatmap_svg(title: &str, values: &[f64], rows: usize, cols: usize) -> Result<String> {
    if rows == 0 || cols == 0 || values.len() != rows * cols {
        return Err(PlotError::Invalid(format!("{} values do not fill a {rows}x{cols} grid", values.len())));
    }
    let (lo, hi) = extent(values.iter().copied()).unwrap_or((0.0, 1.0));
    let (pw, ph) = (WIDTH - MARGIN_LEFT - MARGIN_RIGHT, HEIGHT - MARGIN_TOP - MARGIN_BOTTOM);
    let (cw, ch) = (pw / cols as f64, ph / rows as f64);
    let mut out = String::new();
    header(&mut out, title);
    for r in 0..rows {
        for c in 0..cols {
            let v = values[r * cols + c];
            let fill = if v.is_finite() { colormap((v - lo) / (hi - lo)) } else { MISSING_COLOR.to_string() };
            writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                MARGIN_LEFT + c as f64 * cw,
                MARGIN_TOP + r as f64 * ch,
                cw + 0.05,
                ch + 0.05
            )
            .unwrap();
        }
    }
    // Colour bar with the value range.
    let bx = WIDTH - MARGIN_RIGHT + 20.0;
    let steps = 50;
    for i in 0..steps {
        let t = 1.0 - i as f64 / (steps - 1) as f64;
        writeln!(
            out,
            r#"<rect x="{bx:.2}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            MARGIN_TOP + i as f64 * ph / steps as f64,
            ph / steps as f64 + 0.05,
            colormap(t)
        )
        .unwrap();
    }
    let step = (hi - lo) / TICKS as f64;
    writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, bx + 22.0, MARGIN_TOP + 10.0, tick_label(hi, step)).unwrap();
    writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, bx + 22.0, MARGIN_TOP + ph, tick_label(lo, step)).unwrap();
    out.push_str("</svg>\n");
    Ok(out)
}

/// Numeric CSV: optional header row, then rows of equal width.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Table> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut columns: Option<Vec<String>> = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let line = i + 1;
            let rec = rec.map_err(|e| PlotError::Csv { line, msg: e.to_string() })?;
            let fields: Vec<&str> = rec.iter().map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
            match parsed {
                Ok(vals) => {
                    let width = columns.as_ref().map_or_else(|| rows.first().map(Vec::len), |c| Some(c.len()));
                    if let Some(w) = width {
                        if vals.len() != w {
                            return Err(PlotError::Csv {
                                line,
                                msg: format!("expected {w} fields, found {}", vals.len()),
                            });
                        }
                    }
                    rows.push(vals);
                }
                Err(_) if i == 0 => {
                    columns = Some(fields.iter().map(|s| s.to_string()).collect());
                }
                Err(e) => return Err(PlotError::Csv { line, msg: e.to_string() }),
            }
        }
        if rows.is_empty() {
            return Err(PlotError::Csv { line: 1, msg: "no data rows".into() });
        }
        let width = rows[0].len();
        let columns = columns.unwrap_or_else(|| (0..width).map(|i| format!("c{i}")).collect());
        Ok(Table { columns, rows })
    }

    /// One series per column after the first, which supplies x.
    pub fn series(&self) -> Result<Vec<Series>> {
        if self.columns.len() < 2 {
            return Err(PlotError::Invalid("a line plot needs at least two columns".into()));
        }
        Ok((1..self.columns.len())
            .map(|c| Series {
                label: self.columns[c].clone(),
                points: self.rows.iter().map(|r| (r[0], r[c])).collect(),
            })
            .collect())
    }

    /// Row-major grid from `x,y,value` rows ordered with x outermost.
    pub fn grid(&self) -> Result<(Vec<f64>, usize, usize)> {
        if self.columns.len() != 3 {
            return Err(PlotError::Invalid(format!(
                "a heatmap needs x,y,value columns, found {}",
                self.columns.len()
            )));
        }
        let n = self.rows.len();
        let cols = self.rows.iter().take_while(|r| r[0] == self.rows[0][0]).count();
        if cols == 0 || !n.is_multiple_of(cols) {
            return Err(PlotError::Invalid(format!("{n} rows do not form a grid with {cols} columns")));
        }
        let rows = n / cols;
        for (i, r) in self.rows.iter().enumerate() {
            let (a, b) = (i / cols, i % cols);
            if r[0] != self.rows[a * cols][0] || r[1] != self.rows[b][1] {
                return Err(PlotError::Invalid(format!("row {} breaks the x-major grid order", i + 1)));
            }
        }
        Ok((self.rows.iter().map(|r| r[2]).collect(), rows, cols))
    }
}
