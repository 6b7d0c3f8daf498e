//! CSV, SVG and manifest emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};

/// Fixed 17-significant-digit scientific notation.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

/// One output directory and the files written into it.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutDir { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Files written so far, relative to the root.
    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn path_for(&mut self, rel: &str) -> Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        if !self.files.iter().any(|f| f == rel) {
            self.files.push(rel.to_string());
        }
        Ok(p)
    }

    pub fn write_text(&mut self, rel: &str, text: &str) -> Result<()> {
        let p = self.path_for(rel)?;
        std::fs::write(&p, text).map_err(|e| CliError::io(&p, e))
    }

    /// Header plus rows; numbers go through [`num`].
    pub fn write_csv(&mut self, rel: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
        let p = self.path_for(rel)?;
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r.iter().map(Cell::render))?;
        }
        w.flush().map_err(|e| CliError::io(&p, e))
    }

    /// Open `rel` below this root as its own directory.
    pub fn subdir(&self, rel: &str) -> Result<OutDir> {
        OutDir::create(&self.root.join(rel))
    }

    /// Record the files of a sub-directory opened with [`OutDir::subdir`].
    pub fn adopt(&mut self, rel: &str, sub: &OutDir) {
        for f in &sub.files {
            let name = format!("{rel}/{f}");
            if !self.files.contains(&name) {
                self.files.push(name);
            }
        }
    }

    pub fn write_manifest(&mut self, m: &RunManifest) -> Result<()> {
        let mut m = m.clone();
        m.files = self.files.clone();
        m.files.push("manifest.json".into());
        let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Input(e.to_string()))?;
        self.write_text("manifest.json", &(text + "\n"))
    }
}

/// A CSV cell.
#[derive(Clone, Debug)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => num(*x),
            Cell::Int(k) => k.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

impl From<usize> for Cell {
    fn from(k: usize) -> Self {
        Cell::Int(k as i64)
    }
}

/// What was run and what it produced.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub output_dir: String,
    pub deterministic: bool,
    pub version: String,
    pub overrides: BTreeMap<String, String>,
    pub parameters: BTreeMap<String, String>,
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, out: &Path) -> Self {
        RunManifest {
            command: command.into(),
            output_dir: out.display().to_string(),
            deterministic: true,
            version: env!("CARGO_PKG_VERSION").into(),
            ..Default::default()
        }
    }

    pub fn param(&mut self, k: &str, v: impl ToString) -> &mut Self {
        self.parameters.insert(k.into(), v.to_string());
        self
    }
}

/// Series drawing style.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Style {
    Line,
    Dots,
}

#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

impl Series {
    pub fn line(name: &str, points: Vec<(f64, f64)>) -> Self {
        Series { name: name.into(), points, style: Style::Line }
    }

    pub fn dots(name: &str, points: Vec<(f64, f64)>) -> Self {
        Series { name: name.into(), points, style: Style::Dots }
    }
}

/// A 2-D plot rendered to a standalone SVG string.
#[derive(Clone, Debug, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Filled polygons drawn under the series.
    pub shades: Vec<Vec<(f64, f64)>>,
    /// Labelled points drawn over the series.
    pub markers: Vec<(f64, f64, String)>,
    /// Vertical guide lines.
    pub vlines: Vec<f64>,
}

const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const W: f64 = 720.0;
const H: f64 = 440.0;
const ML: f64 = 78.0;
const MR: f64 = 150.0;
const MT: f64 = 36.0;
const MB: f64 = 52.0;

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let m = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        let d = 0.5 * (1.0 + lo.abs()) * 1e-3;
        return (lo - d, hi + d);
    }
    let pad = 0.04 * (hi - lo);
    (lo - pad, hi + pad)
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64, step: f64) -> String {
    let digits = (-step.log10().floor()).max(0.0) as usize;
    // grid values are k·step, so anything this small is a rounded zero
    let v = if v.abs() < 1e-9 * step { 0.0 } else { v };
    if v.abs() >= 1e5 || (v != 0.0 && v.abs() < 1e-3) {
        format!("{v:.2e}")
    } else {
        format!("{v:.digits$}")
    }
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Plot { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), ..Default::default() }
    }

    pub fn render(&self) -> String {
        let all = || {
            self.series
                .iter()
                .flat_map(|s| s.points.iter().copied())
                .chain(self.shades.iter().flatten().copied())
                .chain(self.markers.iter().map(|m| (m.0, m.1)))
        };
        let (x0, x1) = range(all().map(|p| p.0).chain(self.vlines.iter().copied()));
        let (y0, y1) = range(all().map(|p| p.1));
        let pw = W - ML - MR;
        let ph = H - MT - MB;
        let sx = |x: f64| ML + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| MT + (y1 - y) / (y1 - y0) * ph;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            ML + pw / 2.0,
            esc(&self.title)
        );
        // grid and ticks
        let xs = nice_step(x1 - x0);
        let mut v = (x0 / xs).ceil() * xs;
        while v <= x1 + 1e-9 * xs {
            let x = sx(v);
            let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{MT}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##, MT + ph);
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                MT + ph + 16.0,
                tick_label(v, xs)
            );
            v += xs;
        }
        let ys = nice_step(y1 - y0);
        let mut v = (y0 / ys).ceil() * ys;
        while v <= y1 + 1e-9 * ys {
            let y = sy(v);
            let _ = writeln!(s, r##"<line x1="{ML}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##, ML + pw);
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                ML - 6.0,
                y + 4.0,
                tick_label(v, ys)
            );
            v += ys;
        }
        let _ = writeln!(s, r#"<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            ML + pw / 2.0,
            H - 12.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            MT + ph / 2.0,
            MT + ph / 2.0,
            esc(&self.y_label)
        );
        for poly in &self.shades {
            let pts: Vec<String> = poly.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                s,
                r##"<polygon points="{}" fill="#9ecae1" fill-opacity="0.6" stroke="none"/>"##,
                pts.join(" ")
            );
        }
        for &xv in &self.vlines {
            let x = sx(xv);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{MT}" x2="{x:.2}" y2="{:.2}" stroke="#555" stroke-dasharray="4 3"/>"##,
                MT + ph
            );
        }
        for (k, ser) in self.series.iter().enumerate() {
            let c = COLORS[k % COLORS.len()];
            let pts: Vec<(f64, f64)> =
                ser.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).copied().collect();
            match ser.style {
                Style::Line => {
                    let d: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                    let _ = writeln!(
                        s,
                        r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.4"/>"#,
                        d.join(" ")
                    );
                }
                Style::Dots => {
                    for &(x, y) in &pts {
                        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.2" fill="{c}"/>"#, sx(x), sy(y));
                    }
                }
            }
            let ly = MT + 14.0 + 18.0 * k as f64;
            let lx = ML + pw + 12.0;
            let _ = writeln!(s, r#"<rect x="{lx}" y="{:.2}" width="14" height="4" fill="{c}"/>"#, ly - 4.0);
            let _ = writeln!(s, r#"<text x="{}" y="{ly:.2}">{}</text>"#, lx + 20.0, esc(&ser.name));
        }
        for (x, y, label) in &self.markers {
            let (px, py) = (sx(*x), sy(*y));
            let _ = writeln!(
                s,
                r#"<circle cx="{px:.2}" cy="{py:.2}" r="4.5" fill="none" stroke="black" stroke-width="1.5"/>"#
            );
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, px + 7.0, py - 7.0, esc(label));
        }
        s.push_str("</svg>\n");
        s
    }
}
