//! Output plumbing: CSV tables, standalone SVG plots and the run manifest.
//! All files of a run go through one [`OutputDir`], which writes the
//! manifest last.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// CSV table with a header row, rendered into memory.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }
}

/// Full-precision, platform-independent float formatting.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Draw markers instead of a polyline.
    pub scatter: bool,
}

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite()) {
        b = (b.0.min(*x), b.1.max(*x), b.2.min(*y), b.3.max(*y));
    }
    if !b.0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    if b.1 - b.0 < 1e-12 {
        b.0 -= 0.5;
        b.1 += 0.5;
    }
    if b.3 - b.2 < 1e-12 {
        b.2 -= 0.5;
        b.3 += 0.5;
    }
    b
}

/// Cartesian line/scatter plot.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let (x0, x1, y0, y1) = bounds(series);
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = header(title);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
            sx(fx),
            H - PAD + 16.0,
            tick(fx)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
            PAD - 6.0,
            sy(fy) + 4.0,
            tick(fy)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 14.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<(f64, f64)> = ser
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| (sx(x), sy(y)))
            .collect();
        if ser.scatter {
            for (x, y) in pts {
                let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.5" fill="{color}"/>"#);
            }
        } else {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                polyline(&pts)
            );
        }
        legend(&mut s, i, color, &ser.label);
    }
    s.push_str("</svg>\n");
    s
}

/// Polar plot of `r(angle)`, closed around the circle.
pub fn polar_plot(title: &str, series: &[Series]) -> String {
    let rmax = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .filter(|r| r.is_finite())
        .fold(0.0, f64::max)
        .max(1e-12);
    let (cx, cy) = (W / 2.0, H / 2.0 + 10.0);
    let scale = (H / 2.0 - PAD) / rmax;
    let mut s = header(title);
    for k in 1..=4 {
        let r = rmax * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r##"<circle cx="{cx}" cy="{cy}" r="{:.2}" fill="none" stroke="#cccccc"/>"##,
            r * scale
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{cy}" font-size="10">{}</text>"#,
            cx + r * scale + 2.0,
            tick(r)
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{cy}" x2="{}" y2="{cy}" stroke="#cccccc"/>"##,
        cx - rmax * scale,
        cx + rmax * scale
    );
    let _ = writeln!(
        s,
        r##"<line x1="{cx}" y1="{}" x2="{cx}" y2="{}" stroke="#cccccc"/>"##,
        cy - rmax * scale,
        cy + rmax * scale
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts: Vec<(f64, f64)> = ser
            .points
            .iter()
            .filter(|(_, r)| r.is_finite())
            .map(|&(a, r)| (cx + r * scale * a.cos(), cy - r * scale * a.sin()))
            .collect();
        if let Some(&first) = pts.first() {
            pts.push(first);
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            polyline(&pts)
        );
        legend(&mut s, i, color, &ser.label);
    }
    s.push_str("</svg>\n");
    s
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-size="15" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    s
}

fn legend(s: &mut String, i: usize, color: &str, label: &str) {
    let y = PAD + 14.0 * i as f64 + 10.0;
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{y}" font-size="11" fill="{color}" text-anchor="end">{}</text>"#,
        W - PAD - 6.0,
        escape(label)
    );
}

fn polyline(pts: &[(f64, f64)]) -> String {
    pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect::<Vec<_>>().join(" ")
}

fn tick(x: f64) -> String {
    let t = format!("{x:.3}");
    let t = t.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" { "0".into() } else { t.into() }
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a C,
    pub input_hashes: Vec<(String, String)>,
    pub started: String,
    pub finished: String,
    pub outputs: &'a [OutputFile],
}

/// Single writer for the files of one run.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<OutputFile>,
}

impl OutputDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(root)?;
        // a stale manifest would claim a completed run
        let stale = root.join(MANIFEST);
        if stale.exists() {
            std::fs::remove_file(stale)?;
        }
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        std::fs::write(self.root.join(name), bytes)?;
        self.files.push(OutputFile {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(std::io::Error::other)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.files
    }

    pub fn finish<C: Serialize>(self, manifest: &RunManifest<'_, C>) -> std::io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(manifest).map_err(std::io::Error::other)?;
        bytes.push(b'\n');
        std::fs::write(self.root.join(MANIFEST), bytes)
    }
}

pub const MANIFEST: &str = "manifest.json";
