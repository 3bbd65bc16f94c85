//! CSV and SVG outputs.

use std::fmt::Write as _;
use std::path::Path;

use crate::cascade::DetectTrace;
use crate::error::{Error, Result};
use crate::evaluation::EvalReport;
use crate::io::{atomic_write, read_file};
use crate::shape::Shape;

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_file(path)?)
        .map_err(|_| Error::InvalidInput(format!("{} is not UTF-8", path.display())))
}

fn parse_row(line: &str, line_no: usize, path: &Path) -> Result<Vec<f64>> {
    line.split(',')
        .map(|v| {
            v.trim().parse::<f64>().map_err(|_| {
                Error::InvalidInput(format!("{}:{}: bad number {v:?}", path.display(), line_no + 1))
            })
        })
        .collect()
}

/// `index,x1,y1,...,xL,yL`, one row per sample in input order.
pub fn render_predictions(shapes: &[Shape]) -> String {
    let l = shapes.first().map_or(0, Shape::num_landmarks);
    let mut out = String::from("index");
    for i in 1..=l {
        let _ = write!(out, ",x{i},y{i}");
    }
    out.push('\n');
    for (i, s) in shapes.iter().enumerate() {
        let _ = write!(out, "{i}");
        for v in s.as_slice() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_predictions(path: &Path, shapes: &[Shape]) -> Result<()> {
    atomic_write(path, render_predictions(shapes).as_bytes())
}

pub fn read_predictions(path: &Path) -> Result<Vec<Shape>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_row(line, line_no, path)?;
        if row.first().copied() != Some(out.len() as f64) {
            return Err(Error::InvalidInput(format!(
                "{}:{}: rows must be numbered consecutively from 0",
                path.display(),
                line_no + 1
            )));
        }
        out.push(Shape::new(row[1..].to_vec())?);
    }
    Ok(out)
}

/// `index,box_fallback,domain_stage1,...` per sample.
pub fn render_trace(traces: &[DetectTrace]) -> String {
    let n = traces.first().map_or(0, |t| t.domain_labels.len());
    let mut out = String::from("index,box_fallback");
    for s in 1..=n {
        let _ = write!(out, ",domain_stage{s}");
    }
    out.push('\n');
    for (i, t) in traces.iter().enumerate() {
        let _ = write!(out, "{i},{}", u8::from(t.box_fallback));
        for l in &t.domain_labels {
            let _ = write!(out, ",{l}");
        }
        out.push('\n');
    }
    out
}

pub fn render_errors(report: &EvalReport) -> String {
    let mut out = String::from("index,error\n");
    for (i, e) in report.errors.iter().enumerate() {
        let _ = writeln!(out, "{i},{e}");
    }
    out
}

pub fn render_ced(report: &EvalReport) -> String {
    let mut out = String::from("threshold,fraction\n");
    for (t, f) in &report.ced {
        let _ = writeln!(out, "{t},{f}");
    }
    out
}

pub fn read_ced(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        match parse_row(line, line_no, path)?.as_slice() {
            &[t, f] => out.push((t, f)),
            _ => {
                return Err(Error::InvalidInput(format!(
                    "{}:{}: expected two columns",
                    path.display(),
                    line_no + 1
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidInput(format!("{} has no CED rows", path.display())));
    }
    Ok(out)
}

/// CED curve as an SVG polyline with a simple frame and axis labels.
pub fn render_ced_svg(points: &[(f64, f64)]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const PAD: f64 = 48.0;
    let t_max = points.iter().map(|p| p.0).fold(0.0, f64::max).max(1e-12);
    let sx = |t: f64| PAD + t / t_max * (W - 2.0 * PAD);
    let sy = |f: f64| H - PAD - f * (H - 2.0 * PAD);
    let mut poly = String::new();
    for &(t, f) in points {
        let _ = write!(poly, "{:.2},{:.2} ", sx(t), sy(f));
    }
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let t = t_max * f;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{t:.3}</text>"#,
            sx(t),
            H - PAD + 16.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{f:.2}</text>"#,
            PAD - 6.0,
            sy(f) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">normalized error</text>"#,
        W / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">fraction of samples</text>"#,
        H / 2.0,
        H / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#,
        poly.trim_end()
    );
    svg.push_str("</svg>\n");
    svg
}
