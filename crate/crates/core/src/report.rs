//! CSV tables and static SVG line plots.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CqdError, Result};

/// Column-named table of optional floats; `None` is written as an empty field.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) -> Result<()> {
        CqdError::check_len(self.columns.len(), row.len())?;
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

fn format_float(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.16e}")
    }
}

pub fn write_csv(table: &Table, out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CqdError::Csv(e.to_string());
    w.write_record(&table.columns).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| v.map(format_float).unwrap_or_default()))
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `table` with 17 significant digits per float.
pub fn emit_csv(table: &Table, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(table, std::io::BufWriter::new(file))
}

pub fn read_csv(input: impl std::io::Read) -> Result<Table> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let csv_err = |e: csv::Error| CqdError::Csv(e.to_string());
    let columns: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if columns.is_empty() || columns.iter().all(String::is_empty) {
        return Err(CqdError::Csv("missing header".into()));
    }
    let mut table = Table::new(columns);
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|f| {
                let f = f.trim();
                if f.is_empty() {
                    Ok(None)
                } else {
                    f.parse::<f64>()
                        .map(Some)
                        .map_err(|_| CqdError::Csv(format!("row {}: {f:?} is not a number", line + 1)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        table
            .push(row)
            .map_err(|_| CqdError::Csv(format!("row {} has the wrong number of fields", line + 1)))?;
    }
    Ok(table)
}

pub fn parse_csv(path: &Path) -> Result<Table> {
    read_csv(std::fs::File::open(path)?)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Series drawn by [`emit_plot`]: the whole-state fidelity columns when
/// present, otherwise every column but the first.
pub fn plot_series(table: &Table) -> Vec<usize> {
    let fid: Vec<usize> = (1..table.columns.len())
        .filter(|&i| {
            let c = &table.columns[i];
            c.ends_with("fidelity") && !c.starts_with("partial")
        })
        .collect();
    if fid.is_empty() {
        (1..table.columns.len()).collect()
    } else {
        fid
    }
}

fn nice_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / count as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= count as f64)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

/// Renders a line plot of `table` as SVG text. The first column is the x axis.
pub fn render_svg(table: &Table, title: &str) -> Result<String> {
    if table.columns.len() < 2 {
        return Err(CqdError::Csv("need at least two columns to plot".into()));
    }
    let series = plot_series(table);
    let finite = |v: &Option<f64>| v.filter(|x| x.is_finite());
    let xs: Vec<Option<f64>> = table.rows.iter().map(|r| finite(&r[0])).collect();
    let mut ys = Vec::new();
    for &s in &series {
        for r in &table.rows {
            if let Some(y) = finite(&r[s]) {
                ys.push(y);
            }
        }
    }
    let (mut x0, mut x1) = xs
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (mut y0, mut y1) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);

    let (w, h) = (800.0, 500.0);
    let (ml, mr, mt, mb) = (70.0, 180.0, 40.0, 50.0);
    let pw = w - ml - mr;
    let ph = h - mt - mb;
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| mt + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, ml + pw / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for t in nice_ticks(x0, x1, 8) {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            mt + ph,
            mt + ph + 5.0,
            mt + ph + 18.0,
            trim_tick(t)
        );
    }
    for t in nice_ticks(y0, y1, 6) {
        let y = sy(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{ml}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            ml - 5.0,
            ml - 8.0,
            y + 4.0,
            trim_tick(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        ml + pw / 2.0,
        h - 10.0,
        escape(&table.columns[0])
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">value</text>"#,
        mt + ph / 2.0,
        mt + ph / 2.0
    );

    for (k, &s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut run: Vec<(f64, f64)> = Vec::new();
        let flush = |run: &mut Vec<(f64, f64)>, svg: &mut String| {
            if !run.is_empty() {
                let pts: Vec<String> = run.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    pts.join(" ")
                );
                run.clear();
            }
        };
        for (row, x) in table.rows.iter().zip(&xs) {
            match (x, finite(&row[s])) {
                (Some(x), Some(y)) => run.push((*x, y)),
                _ => flush(&mut run, &mut svg),
            }
        }
        flush(&mut run, &mut svg);
        let ly = mt + 10.0 + 18.0 * k as f64;
        let lx = ml + pw + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&table.columns[s])
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn trim_tick(t: f64) -> String {
    let s = format!("{t:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Reads a CSV and writes its line plot.
pub fn emit_plot(csv_path: &Path, svg_path: &Path) -> Result<()> {
    let table = parse_csv(csv_path)?;
    let title = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    std::fs::write(svg_path, render_svg(&table, &title)?)?;
    Ok(())
}
